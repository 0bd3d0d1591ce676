#include "spt/cli.hpp"
#include "spt/errors.hpp"
#include "spt/experiment.hpp"
#include "spt/ingest.hpp"
#include "spt/synthetic.hpp"

#include <gtest/gtest.h>
#include <json.hpp>
#include <sys/wait.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <numeric>
#include <sstream>

using namespace spt;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("spt_harness_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::string first_line(const fs::path& p) {
  std::ifstream in(p);
  std::string line;
  std::getline(in, line);
  return line;
}

// Runs the installed CLI binary and returns its exit code.
int run_cli(const std::string& args, const std::string& env = {}) {
  const std::string cmd = env + (env.empty() ? "" : " ") + "'" + SPT_CLI_PATH + "' " + args +
                          " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

SyntheticPanelConfig small_panel(int years) {
  SyntheticPanelConfig c;
  c.assets = 5;
  c.years = years;
  c.days_per_year = 40;
  return c;
}

double annualized_percent(const WealthSeries& s, int ppy) {
  const double t = static_cast<double>(s.returns.size());
  return 100.0 * (std::pow(s.wealth.back() / s.wealth.front(), ppy / t) - 1.0);
}

double sharpe(const WealthSeries& s, int ppy) {
  std::vector<double> r;
  for (std::size_t t = 1; t < s.wealth.size(); ++t) r.push_back(s.wealth[t] / s.wealth[t - 1] - 1.0);
  const double m = std::accumulate(r.begin(), r.end(), 0.0) / static_cast<double>(r.size());
  double ss = 0.0;
  for (double v : r) ss += (v - m) * (v - m);
  return std::sqrt(static_cast<double>(ppy)) * m / std::sqrt(ss / static_cast<double>(r.size() - 1));
}

}  // namespace

TEST(Ingest, RoundTripIsBitwise) {
  MarketData data = simulate_panel(small_panel(2));
  data.panel.member(3, 1) = false;
  data.panel.returns(3, 1) = 0.0;
  std::stringstream r;
  std::stringstream c;
  write_returns_csv(r, data);
  write_characteristics_csv(c, data);
  const IngestResult back = ingest_panel(r, &c);
  EXPECT_EQ(back.data.panel.dates, data.panel.dates);
  EXPECT_EQ(back.data.panel.asset_ids, data.panel.asset_ids);
  EXPECT_EQ(back.data.panel.returns, data.panel.returns);
  EXPECT_TRUE((back.data.panel.member == data.panel.member).all());
  EXPECT_EQ(back.data.origin_date, data.origin_date);
  ASSERT_EQ(back.data.characteristics.size(), data.characteristics.size());
  for (const auto& [name, m] : data.characteristics) {
    EXPECT_EQ(back.data.characteristics.at(name), m) << name;
  }
}

TEST(Ingest, EmptyMemberMeansMember) {
  std::istringstream r(
      "date,asset_id,return,member\n"
      "2020-01-02,A,0.01,\n2020-01-02,B,0.02,0\n"
      "2020-01-03,A,0.0,1\n2020-01-03,B,,0\n");
  const IngestResult in = ingest_panel(r);
  EXPECT_TRUE(in.data.panel.member(0, 0));
  EXPECT_FALSE(in.data.panel.member(0, 1));
  EXPECT_FALSE(in.data.panel.member(1, 1));
  EXPECT_EQ(in.data.panel.returns(0, 1), 0.02);

  std::istringstream no_column("date,asset_id,return\n2020-01-02,A,0.01\n");
  EXPECT_TRUE(ingest_panel(no_column).data.panel.member(0, 0));
}

TEST(Ingest, QuarterlyReportsForwardFill) {
  std::ostringstream r;
  r << "date,asset_id,return\n";
  const std::vector<std::string> dates = {"2020-01-02", "2020-01-03", "2020-01-06",
                                          "2020-01-07", "2020-01-08"};
  for (const auto& d : dates) r << d << ",A,0.0\n";
  std::istringstream rin(r.str());
  std::istringstream c(
      "date,asset_id,name,value\n"
      "2019-12-31,A,roa,0.1\n2020-01-06,A,roa,0.3\n");
  const IngestResult in = ingest_panel(rin, &c);
  const Eigen::MatrixXd& roa = in.data.characteristics.at("roa");
  // The report dated 2020-01-06 is known only after that day's close.
  EXPECT_EQ(roa(0, 0), 0.1);
  EXPECT_EQ(roa(1, 0), 0.1);
  EXPECT_EQ(roa(2, 0), 0.1);
  EXPECT_EQ(roa(3, 0), 0.3);
  EXPECT_EQ(roa(4, 0), 0.3);
  EXPECT_EQ(in.data.origin_date, "2019-12-31");
}

TEST(Ingest, Errors) {
  std::istringstream bad("date,asset_id,return\n2020-01-02,A,abc\n");
  try {
    ingest_panel(bad);
    FAIL() << "expected DataError";
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("line 2"), std::string::npos) << e.what();
  }
  std::istringstream missing("date,asset_id,return,member\n2020-01-02,A,,1\n");
  EXPECT_THROW(ingest_panel(missing), DataError);
  std::istringstream dup("date,asset_id,return\n2020-01-02,A,0\n2020-01-02,A,0\n");
  EXPECT_THROW(ingest_panel(dup), DataError);
  EXPECT_THROW(ingest_panel_files("/nonexistent/returns.csv"), DataError);
}

TEST(Ingest, CalendarGapWarnings) {
  EXPECT_TRUE(date_gap_warnings({"2020-01-03", "2020-01-06", "2020-01-07"}).empty());
  EXPECT_EQ(date_gap_warnings({"2020-01-03", "2020-01-20"}).size(), 1u);
  EXPECT_EQ(previous_calendar_day("2020-03-01"), "2020-02-29");
  EXPECT_EQ(previous_calendar_day("2021-01-01"), "2020-12-31");
}

TEST(Protocol, TwentyThreeYearsGiveNineFolds) {
  SyntheticPanelConfig c;
  c.years = 23;
  const MarketData data = simulate_panel(c);
  const FoldPlan plan = plan_folds(data.panel.dates, {});
  ASSERT_EQ(plan.folds.size(), 9u);
  EXPECT_TRUE(plan.warnings.empty());
  for (const Fold& f : plan.folds) {
    EXPECT_LT(f.train_last, f.test_first);
    EXPECT_LE(f.train_end, f.test_begin);
    EXPECT_EQ(f.test_last.substr(0, 4), std::to_string(std::stoi(f.train_first.substr(0, 4)) + 14));
  }
  EXPECT_EQ(plan.folds.front().train_first.substr(0, 4), "2000");
  EXPECT_EQ(plan.folds.back().test_last.substr(0, 4), "2022");
}

TEST(Protocol, PlanValidation) {
  SyntheticPanelConfig c;
  c.years = 5;
  const MarketData data = simulate_panel(c);
  EXPECT_TRUE(plan_folds(data.panel.dates, {}).folds.empty());
  ExperimentPlan bad;
  bad.train_years = 0;
  EXPECT_THROW(plan_folds(data.panel.dates, bad), std::invalid_argument);
  EXPECT_THROW(run_experiment(data, {}, {parse_learner("ewp")}, {}), std::exception);
}

TEST(Protocol, LearnerSpecs) {
  EXPECT_EQ(parse_learner("dwp:p=-0.5").kind, LearnerKind::DwpFixed);
  EXPECT_EQ(parse_learner("dwp:p=-0.5").p, -0.5);
  EXPECT_EQ(parse_learner("dwp*").kind, LearnerKind::DwpGrid);
  EXPECT_EQ(parse_learner("dwp").kind, LearnerKind::DwpMh);
  EXPECT_EQ(parse_learner("cap+roa").characteristics.size(), 2u);
  EXPECT_EQ(parse_learner("gp:chars=a+b").characteristics, (std::vector<std::string>{"a", "b"}));
  EXPECT_THROW(parse_learner("nope"), std::invalid_argument);
  EXPECT_EQ(default_learners().size(), 6u);
}

TEST(Protocol, IdenticalFoldsHaveZeroError) {
  FoldReport f;
  StrategyResult r;
  r.name = "EWP";
  r.is_ret = 5.0;
  r.oos_ret = 3.0;
  r.oos_sr = 0.4;
  f.results.push_back(r);
  const std::vector<AggregateRow> rows = aggregate_folds({f, f, f});
  ASSERT_EQ(rows.size(), 1u);
  EXPECT_EQ(rows[0].is_mean, 5.0);
  EXPECT_EQ(rows[0].is_pm, 0.0);
  EXPECT_EQ(rows[0].oos_pm, 0.0);
  EXPECT_DOUBLE_EQ(rows[0].oos_sr_mean, 0.4);
}

TEST(Protocol, TwoStandardErrors) {
  std::vector<FoldReport> folds;
  for (double v : {1.0, 2.0, 6.0}) {
    FoldReport f;
    StrategyResult r;
    r.name = "X";
    r.is_ret = v;
    f.results.push_back(r);
    folds.push_back(f);
  }
  const AggregateRow row = aggregate_folds(folds)[0];
  EXPECT_DOUBLE_EQ(row.is_mean, 3.0);
  // Sample sd of {1, 2, 6} is sqrt(7).
  EXPECT_NEAR(row.is_pm, 2.0 * std::sqrt(7.0) / std::sqrt(3.0), 1e-14);
}

namespace {

LearningConfig quick_config() {
  LearningConfig cfg;
  cfg.performance = PerformanceKind::Sharpe;
  cfg.auto_likelihood_sd_fraction = 0.01;
  cfg.backtest.periods_per_year = 40;
  cfg.mh.iterations = 60;
  cfg.mh.burn_in = 20;
  cfg.gibbs.iterations = 20;
  cfg.gibbs.burn_in = 10;
  cfg.knots_per_dim = 8;
  return cfg;
}

ExperimentResult quick_experiment() {
  const MarketData data = simulate_panel(small_panel(4));
  ExperimentPlan plan;
  plan.train_years = 2;
  plan.test_years = 1;
  std::vector<LearnerSpec> learners;
  for (const char* s : {"ewp", "market", "dwp*", "dwp", "cap"}) learners.push_back(parse_learner(s));
  return run_experiment(data, plan, learners, quick_config());
}

}  // namespace

TEST(Experiment, ReportedNumbersRecompute) {
  const ExperimentResult res = quick_experiment();
  ASSERT_EQ(res.folds.size(), 2u);
  EXPECT_EQ(res.periods_per_year, 40);
  for (const FoldReport& f : res.folds) {
    ASSERT_EQ(f.results.size(), 5u);
    EXPECT_LT(f.fold.train_last, f.fold.test_first);
    for (const StrategyResult& r : f.results) {
      EXPECT_NEAR(r.is_ret, annualized_percent(r.in_sample, 40), 1e-12) << r.name;
      EXPECT_NEAR(r.oos_ret, annualized_percent(r.out_of_sample, 40), 1e-12) << r.name;
      EXPECT_NEAR(r.oos_sr, sharpe(r.out_of_sample, 40), 1e-12) << r.name;
      EXPECT_EQ(r.in_sample.dates.front(), f.fold.train_first);
      EXPECT_EQ(r.out_of_sample.dates.back(), f.fold.test_last);
    }
  }
  EXPECT_FALSE(res.folds[0].results[3].chain_samples.empty());
  EXPECT_TRUE(res.folds[0].results[4].posterior.has_value());

  // Aggregates are fold means.
  for (std::size_t l = 0; l < res.aggregate.size(); ++l) {
    const double mean = 0.5 * (res.folds[0].results[l].oos_ret + res.folds[1].results[l].oos_ret);
    EXPECT_NEAR(res.aggregate[l].oos_mean, mean, 1e-12);
  }
}

TEST(Experiment, UntrainedBaselinesArePureBacktests) {
  const MarketData data = simulate_panel(small_panel(4));
  const ExperimentResult res = quick_experiment();
  const Fold& f = res.folds[1].fold;
  BacktestConfig bc;
  bc.periods_per_year = 40;
  const WealthSeries ewp =
      run_backtest(ewp_strategy(), data.slice(f.test_begin, f.test_end), bc);
  EXPECT_EQ(ewp.wealth, res.folds[1].results[0].out_of_sample.wealth);
}

TEST(Experiment, ArtifactRoundTripAndReport) {
  const ExperimentResult res = quick_experiment();
  const std::string dumped = experiment_to_json(res).dump();
  const ExperimentResult back = experiment_from_json(nlohmann::json::parse(dumped));
  ASSERT_EQ(back.folds.size(), res.folds.size());
  for (std::size_t f = 0; f < res.folds.size(); ++f) {
    for (std::size_t l = 0; l < res.folds[f].results.size(); ++l) {
      const StrategyResult& a = res.folds[f].results[l];
      const StrategyResult& b = back.folds[f].results[l];
      EXPECT_EQ(a.in_sample.wealth, b.in_sample.wealth);
      EXPECT_EQ(a.out_of_sample.wealth, b.out_of_sample.wealth);
      EXPECT_EQ(a.out_of_sample.turnover, b.out_of_sample.turnover);
      EXPECT_EQ(a.chain_samples, b.chain_samples);
      EXPECT_EQ(a.oos_sr, b.oos_sr);
    }
  }

  // Reports from the live result and from the stored artifact agree.
  const fs::path dir = scratch("report");
  const fs::path live = scratch("report_live");
  const auto written = write_report(back, dir);
  for (const auto& p : write_report(res, live)) {
    EXPECT_EQ(slurp(p), slurp(dir / p.filename())) << p.filename();
  }
  EXPECT_EQ(first_line(dir / "table2.csv"), "portfolio,is_ret,oos_ret,oos_sr");
  EXPECT_EQ(first_line(dir / "table1.csv"), "portfolio,is_ret,is_ret_pm,oos_ret,oos_ret_pm");
  EXPECT_EQ(first_line(dir / "figure1.csv"), "portfolio,fold,bin_lo,bin_hi,count,density");
  EXPECT_TRUE(fs::exists(dir / "figure2.csv"));
  EXPECT_GE(written.size(), 5u);

  // Table 2 rows hold the aggregates.
  std::ifstream t2(dir / "table2.csv");
  std::string line;
  std::getline(t2, line);
  std::size_t rows = 0;
  while (std::getline(t2, line)) {
    const auto comma = line.find(',');
    EXPECT_EQ(line.substr(0, comma), res.aggregate[rows].name);
    EXPECT_NEAR(std::stod(line.substr(comma + 1)), res.aggregate[rows].is_mean,
                1e-12 * (1.0 + std::abs(res.aggregate[rows].is_mean)));
    ++rows;
  }
  EXPECT_EQ(rows, res.aggregate.size());
}

TEST(Experiment, Deterministic) {
  EXPECT_EQ(experiment_to_json(quick_experiment()).dump(),
            experiment_to_json(quick_experiment()).dump());
}

TEST(Cli, SimulateIsDeterministic) {
  const fs::path dir = scratch("sim");
  const std::string a = (dir / "a.csv").string();
  const std::string b = (dir / "b.csv").string();
  ASSERT_EQ(run_cli("simulate --n 3 --seed 42 --years 1 --dt 1/252 --out " + a), 0);
  ASSERT_EQ(run_cli("simulate --n 3 --seed 42 --years 1 --dt 1/252 --out " + b), 0);
  EXPECT_EQ(first_line(a), "t,asset_1,asset_2,asset_3");
  EXPECT_FALSE(slurp(a).empty());
  EXPECT_EQ(slurp(a), slurp(b));
}

TEST(Cli, ExitCodes) {
  const fs::path dir = scratch("codes");
  EXPECT_EQ(run_cli("no-such-command"), 1);
  EXPECT_EQ(run_cli("backtest --strategy ewp"), 1);
  EXPECT_EQ(run_cli("backtest --strategy ewp --returns /nonexistent.csv --out " +
                    (dir / "w.csv").string()),
            2);
  EXPECT_EQ(run_cli("--help"), 0);

  std::ofstream(dir / "bad.csv") << "date,asset_id,return\n2020-01-02,A,x\n";
  EXPECT_EQ(run_cli("backtest --strategy ewp --returns " + (dir / "bad.csv").string() +
                    " --out " + (dir / "w.csv").string()),
            2);

  std::ostringstream out;
  std::ostringstream err;
  EXPECT_EQ(cli_dispatch({"verify-master", "--generator", "bogus", "--out",
                          (dir / "v.csv").string()},
                         out, err),
            1);
}

TEST(Cli, GridSearchFindsPlantedPremium) {
  const fs::path dir = scratch("grid");
  ASSERT_EQ(run_cli("simulate --kind panel --seed 1 --out " + (dir / "panel").string()), 0);
  const std::string common = "learn dwp-grid --returns " + (dir / "panel/returns.csv").string() +
                             " --characteristics " +
                             (dir / "panel/characteristics.csv").string() +
                             " --performance sharpe --out ";
  ASSERT_EQ(run_cli(common + (dir / "g1.json").string()), 0);
  ASSERT_EQ(run_cli(common + (dir / "g2.json").string()), 0);
  EXPECT_EQ(slurp(dir / "g1.json"), slurp(dir / "g2.json"));
  const nlohmann::json g = nlohmann::json::parse(slurp(dir / "g1.json"));
  EXPECT_LT(g.at("p_star").get<double>(), 0.0);
  EXPECT_EQ(g.at("evaluations").get<int>(), 321);
}

TEST(Cli, ExperimentThenReport) {
  const fs::path dir = scratch("pipeline");
  const std::string ex =
      "experiment --simulate-years 4 --simulate-assets 5 --train-years 2 --test-years 1 "
      "--learners ewp,market,dwp* --performance sharpe";
  ASSERT_EQ(run_cli(ex + " --out-dir " + (dir / "a").string()), 0);
  // The output directory may also come from the environment.
  ASSERT_EQ(run_cli(ex, "SPT_OUTPUT_DIR='" + (dir / "b").string() + "'"), 0);
  EXPECT_EQ(slurp(dir / "a/experiment.json"), slurp(dir / "b/experiment.json"));
  ASSERT_EQ(run_cli("report --experiment " + (dir / "a/experiment.json").string() + " --out-dir " +
                    (dir / "r").string()),
            0);
  EXPECT_EQ(first_line(dir / "r/table2.csv"), "portfolio,is_ret,oos_ret,oos_sr");
  const nlohmann::json j = nlohmann::json::parse(slurp(dir / "a/experiment.json"));
  EXPECT_FALSE(j.empty());
}
