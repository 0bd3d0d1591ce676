#include "spt/experiment.hpp"

#include "spt/csv.hpp"
#include "spt/errors.hpp"
#include "spt/rng.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace spt {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

int year_of(const std::string& date) {
  if (date.size() < 4 || !std::all_of(date.begin(), date.begin() + 4,
                                      [](unsigned char c) { return std::isdigit(c) != 0; })) {
    throw DataError("date '" + date + "' does not start with a four-digit year");
  }
  return std::stoi(date.substr(0, 4));
}

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return s;
}

double total_turnover(const WealthSeries& s) {
  return std::accumulate(s.turnover.begin(), s.turnover.end(), s.initial_turnover);
}

double percent_return(const WealthSeries& s, int periods_per_year) {
  if (!(s.terminal() > 0.0)) return -100.0;
  return 100.0 * annualize_return(s, periods_per_year);
}

nlohmann::json number_or_null(double v) {
  return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr);
}

double number_or_nan(const nlohmann::json& j) {
  return j.is_null() ? kNaN : j.get<double>();
}

std::string slug(const std::string& name) {
  std::string out;
  for (const char c : lower(name)) {
    if (std::isalnum(static_cast<unsigned char>(c)) != 0) {
      out += c;
    } else if (!out.empty() && out.back() != '_') {
      out += '_';
    }
  }
  while (!out.empty() && out.back() == '_') out.pop_back();
  return out.empty() ? "map" : out;
}

std::ofstream open_out(const std::filesystem::path& p) {
  std::ofstream out(p);
  if (!out) throw DataError("cannot write '" + p.string() + "'");
  return out;
}

}  // namespace

void ExperimentPlan::validate() const {
  if (train_years < 1 || test_years < 1 || roll_years < 1) {
    throw std::invalid_argument("train, test and roll years must all be at least 1");
  }
}

FoldPlan plan_folds(const std::vector<std::string>& dates, const ExperimentPlan& plan) {
  plan.validate();
  std::vector<int> years;
  std::vector<Eigen::Index> first_day;
  for (std::size_t k = 0; k < dates.size(); ++k) {
    const int y = year_of(dates[k]);
    if (years.empty() || y != years.back()) {
      if (!years.empty() && y < years.back()) throw DataError("dates are not in increasing order");
      years.push_back(y);
      first_day.push_back(static_cast<Eigen::Index>(k));
    }
  }
  first_day.push_back(static_cast<Eigen::Index>(dates.size()));
  const auto ny = static_cast<int>(years.size());
  int start = 0;
  if (plan.start_year > 0) {
    while (start < ny && years[static_cast<std::size_t>(start)] < plan.start_year) ++start;
  }
  FoldPlan out;
  int index = 0;
  for (int s = start; s + plan.train_years + plan.test_years <= ny; s += plan.roll_years) {
    Fold f;
    f.index = index++;
    f.train_begin = first_day[static_cast<std::size_t>(s)];
    f.train_end = first_day[static_cast<std::size_t>(s + plan.train_years)];
    f.test_begin = f.train_end;
    f.test_end = first_day[static_cast<std::size_t>(s + plan.train_years + plan.test_years)];
    if (f.train_end - f.train_begin < 2 || f.test_end - f.test_begin < 2) {
      out.warnings.push_back("fold " + std::to_string(f.index) + " skipped: fewer than two days in a window");
      continue;
    }
    f.train_first = dates[static_cast<std::size_t>(f.train_begin)];
    f.train_last = dates[static_cast<std::size_t>(f.train_end - 1)];
    f.test_first = dates[static_cast<std::size_t>(f.test_begin)];
    f.test_last = dates[static_cast<std::size_t>(f.test_end - 1)];
    out.folds.push_back(std::move(f));
  }
  return out;
}

LearnerSpec parse_learner(const std::string& spec) {
  const std::string s = lower(spec);
  if (s == "ewp") return {"EWP", LearnerKind::Ewp, 0.0, {}};
  if (s == "market") return {"Market", LearnerKind::Market, 0.0, {}};
  if (s == "dwp*" || s == "dwp-grid") return {"DWP*", LearnerKind::DwpGrid, 0.0, {}};
  if (s == "dwp" || s == "dwp-mh") return {"DWP", LearnerKind::DwpMh, 0.0, {}};
  if (s == "cap") return {"CAP", LearnerKind::Gp, 0.0, {kLogMarketWeight}};
  if (s == "cap+roa") return {"CAP+ROA", LearnerKind::Gp, 0.0, {kLogMarketWeight, "roa"}};
  if (s.rfind("dwp:p=", 0) == 0) {
    const std::string value = spec.substr(6);
    std::size_t used = 0;
    double p = 0.0;
    try {
      p = std::stod(value, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used == 0 || used != value.size() || !std::isfinite(p)) {
      throw std::invalid_argument("invalid exponent in learner spec '" + spec + "'");
    }
    return {"DWP(p=" + value + ")", LearnerKind::DwpFixed, p, {}};
  }
  if (s.rfind("gp:chars=", 0) == 0) {
    LearnerSpec out{"GP(" + spec.substr(9) + ")", LearnerKind::Gp, 0.0, {}};
    std::string rest = spec.substr(9);
    std::size_t pos = 0;
    while (pos <= rest.size()) {
      const std::size_t next = rest.find('+', pos);
      const std::string name = rest.substr(pos, next == std::string::npos ? std::string::npos : next - pos);
      if (name.empty()) throw std::invalid_argument("empty characteristic in '" + spec + "'");
      out.characteristics.push_back(name);
      if (next == std::string::npos) break;
      pos = next + 1;
    }
    return out;
  }
  throw std::invalid_argument("unknown learner '" + spec + "'");
}

std::vector<LearnerSpec> default_learners() {
  std::vector<LearnerSpec> out;
  for (const char* s : {"ewp", "market", "dwp*", "dwp", "cap", "cap+roa"}) {
    out.push_back(parse_learner(s));
  }
  return out;
}

PerformanceKind parse_performance(const std::string& name) {
  const std::string s = lower(name);
  if (s == "excess" || s == "excess_return") return PerformanceKind::ExcessReturn;
  if (s == "sharpe") return PerformanceKind::Sharpe;
  throw std::invalid_argument("unknown performance '" + name + "' (expected excess or sharpe)");
}

TargetPerformance make_performance(const MarketData& data, const LearningConfig& config) {
  if (config.performance == PerformanceKind::Sharpe) {
    SharpePerformance sp(data, config.backtest);
    return [sp](const Eigen::MatrixXd& t) { return sp(t); };
  }
  ExcessReturnPerformance er(data, config.backtest, ewp_strategy());
  return [er](const Eigen::MatrixXd& t) { return er(t); };
}

GammaLikelihood make_likelihood(const MarketData& data, const TargetPerformance& perf,
                                const LearningConfig& config) {
  if (!config.auto_likelihood_sd_fraction) {
    return {config.likelihood_mean, config.likelihood_sd};
  }
  const double best = grid_search_dwp(data, perf, config.grid).best;
  if (!(best > 0.0)) {
    throw NumericError("automatic likelihood needs a positive best DWP performance");
  }
  return {best, *config.auto_likelihood_sd_fraction * best};
}

TrainedStrategy train_learner(const LearnerSpec& spec, const MarketData& train,
                              const LearningConfig& config, std::uint64_t seed) {
  TrainedStrategy out;
  out.name = spec.name;
  switch (spec.kind) {
    case LearnerKind::Ewp:
      out.strategy = ewp_strategy();
      return out;
    case LearnerKind::Market:
      out.strategy = market_strategy();
      return out;
    case LearnerKind::DwpFixed:
      out.strategy = dwp_strategy(spec.p);
      out.learned["p"] = spec.p;
      return out;
    default:
      break;
  }
  const TargetPerformance perf = make_performance(train, config);
  if (spec.kind == LearnerKind::DwpGrid) {
    const GridSearchResult res = grid_search_dwp(train, perf, config.grid);
    out.strategy = dwp_strategy(res.p_star);
    out.learned = {{"p_star", res.p_star},
                   {"best", res.best},
                   {"evaluations", res.evaluations()},
                   {"failures", res.failures()}};
    return out;
  }
  const GammaLikelihood lik = make_likelihood(train, perf, config);
  if (spec.kind == LearnerKind::DwpMh) {
    const ExponentObjective objective = dwp_objective(train, perf);
    const ExponentObjective log_target = [&](double p) {
      try {
        return gamma_log_density(objective(p), lik);
      } catch (const UndefinedSharpeError&) {
        return -std::numeric_limits<double>::infinity();
      }
    };
    ChainConfig cc = config.mh;
    cc.initial_p = feasible_start(log_target, cc.lo, cc.hi);
    const ExponentChain chain = mh_sample(log_target, cc, seed);
    out.strategy = dwp_strategy(chain.posterior_mean());
    out.learned = chain_summary(chain);
    out.learned["initial_p"] = cc.initial_p;
    out.learned["likelihood_mean"] = lik.mean();
    out.learned["likelihood_sd"] = lik.sd();
    out.chain_samples = chain.samples;
    return out;
  }
  const CharGrid grid = observed_grid(train, spec.characteristics, config.knots_per_dim);
  const GridTargets model(train, spec.characteristics, grid);
  GPPosterior post =
      blocked_gibbs(model, perf, lik, default_hyper_prior(grid), config.gibbs, seed);
  out.strategy = posterior_strategy(post);
  out.learned = {{"retained", post.retained()},
                 {"x_evaluations", post.x_evaluations},
                 {"hyper_evaluations", post.hyper_evaluations},
                 {"likelihood_mean", lik.mean()},
                 {"likelihood_sd", lik.sd()}};
  out.posterior = std::move(post);
  return out;
}

void recompute_metrics(StrategyResult& r, int periods_per_year) {
  r.is_ret = percent_return(r.in_sample, periods_per_year);
  r.oos_ret = percent_return(r.out_of_sample, periods_per_year);
  try {
    r.oos_sr = sharpe_ratio(net_returns(r.out_of_sample), periods_per_year);
  } catch (const UndefinedSharpeError&) {
    r.oos_sr = kNaN;
  } catch (const std::invalid_argument&) {
    r.oos_sr = kNaN;
  }
  r.is_turnover = total_turnover(r.in_sample);
  r.oos_turnover = total_turnover(r.out_of_sample);
}

std::vector<AggregateRow> aggregate_folds(const std::vector<FoldReport>& folds) {
  std::vector<AggregateRow> rows;
  if (folds.empty()) return rows;
  for (std::size_t l = 0; l < folds.front().results.size(); ++l) {
    AggregateRow row;
    row.name = folds.front().results[l].name;
    std::vector<double> is;
    std::vector<double> oos;
    std::vector<double> sr;
    for (const auto& f : folds) {
      const auto& r = f.results.at(l);
      is.push_back(r.is_ret);
      oos.push_back(r.oos_ret);
      if (std::isfinite(r.oos_sr)) sr.push_back(r.oos_sr);
    }
    auto mean_pm = [](const std::vector<double>& v, double& mean, double& pm) {
      const auto n = static_cast<double>(v.size());
      mean = std::accumulate(v.begin(), v.end(), 0.0) / n;
      pm = 0.0;
      if (v.size() > 1) {
        double ss = 0.0;
        for (const double x : v) ss += (x - mean) * (x - mean);
        pm = 2.0 * std::sqrt(ss / (n - 1.0)) / std::sqrt(n);
      }
    };
    mean_pm(is, row.is_mean, row.is_pm);
    mean_pm(oos, row.oos_mean, row.oos_pm);
    row.oos_sr_mean = sr.empty() ? kNaN
                                 : std::accumulate(sr.begin(), sr.end(), 0.0) /
                                       static_cast<double>(sr.size());
    rows.push_back(row);
  }
  return rows;
}

ExperimentResult run_experiment(const MarketData& data, const ExperimentPlan& plan,
                                const std::vector<LearnerSpec>& learners,
                                const LearningConfig& config) {
  if (learners.empty()) throw std::invalid_argument("experiment needs at least one learner");
  data.validate();
  const FoldPlan folds = plan_folds(data.panel.dates, plan);
  ExperimentResult result;
  result.warnings = folds.warnings;
  result.periods_per_year = config.backtest.periods_per_year;
  if (folds.folds.empty()) throw DataError("no fold of the experiment plan fits the panel");
  Rng seeds(config.seed);
  for (const Fold& fold : folds.folds) {
    if (!(fold.train_end <= fold.test_begin) ||
        !(data.panel.dates[static_cast<std::size_t>(fold.train_end - 1)] <
          data.panel.dates[static_cast<std::size_t>(fold.test_begin)])) {
      throw std::logic_error("training window overlaps the test window");
    }
    const MarketData train = data.slice(fold.train_begin, fold.train_end);
    const MarketData test = data.slice(fold.test_begin, fold.test_end);
    FoldReport report;
    report.fold = fold;
    for (const LearnerSpec& spec : learners) {
      const std::uint64_t seed = seeds.split();
      TrainedStrategy trained = train_learner(spec, train, config, seed);
      StrategyResult r;
      r.name = spec.name;
      r.in_sample = run_backtest(trained.strategy, train, config.backtest);
      r.out_of_sample = run_backtest(trained.strategy, test, config.backtest);
      r.learned = std::move(trained.learned);
      r.chain_samples = std::move(trained.chain_samples);
      r.posterior = std::move(trained.posterior);
      recompute_metrics(r, config.backtest.periods_per_year);
      report.results.push_back(std::move(r));
    }
    result.folds.push_back(std::move(report));
  }
  result.aggregate = aggregate_folds(result.folds);
  return result;
}

nlohmann::json wealth_to_json(const WealthSeries& s) {
  return {{"origin_date", s.origin_date},
          {"dates", s.dates},
          {"wealth", s.wealth},
          {"returns", s.returns},
          {"turnover", s.turnover},
          {"costs", s.costs},
          {"initial_turnover", s.initial_turnover},
          {"initial_cost", s.initial_cost},
          {"bankrupt", s.bankrupt}};
}

WealthSeries wealth_from_json(const nlohmann::json& j) {
  WealthSeries s;
  s.origin_date = j.at("origin_date").get<std::string>();
  s.dates = j.at("dates").get<std::vector<std::string>>();
  s.wealth = j.at("wealth").get<std::vector<double>>();
  s.returns = j.at("returns").get<std::vector<double>>();
  s.turnover = j.at("turnover").get<std::vector<double>>();
  s.costs = j.at("costs").get<std::vector<double>>();
  s.initial_turnover = j.at("initial_turnover").get<double>();
  s.initial_cost = j.at("initial_cost").get<double>();
  s.bankrupt = j.at("bankrupt").get<bool>();
  if (s.wealth.size() != s.returns.size() + 1 || s.dates.size() != s.returns.size()) {
    throw DataError("stored wealth series has inconsistent lengths");
  }
  return s;
}

nlohmann::json experiment_to_json(const ExperimentResult& result) {
  nlohmann::json j;
  j["periods_per_year"] = result.periods_per_year;
  j["warnings"] = result.warnings;
  j["folds"] = nlohmann::json::array();
  for (const auto& f : result.folds) {
    nlohmann::json jf;
    jf["fold"] = {{"index", f.fold.index},
                  {"train_begin", f.fold.train_begin},
                  {"train_end", f.fold.train_end},
                  {"test_begin", f.fold.test_begin},
                  {"test_end", f.fold.test_end},
                  {"train_first", f.fold.train_first},
                  {"train_last", f.fold.train_last},
                  {"test_first", f.fold.test_first},
                  {"test_last", f.fold.test_last}};
    jf["results"] = nlohmann::json::array();
    for (const auto& r : f.results) {
      nlohmann::json jr = {{"name", r.name},
                           {"is_ret", r.is_ret},
                           {"oos_ret", r.oos_ret},
                           {"oos_sr", number_or_null(r.oos_sr)},
                           {"is_terminal", r.in_sample.terminal()},
                           {"oos_terminal", r.out_of_sample.terminal()},
                           {"is_turnover", r.is_turnover},
                           {"oos_turnover", r.oos_turnover},
                           {"learned", r.learned},
                           {"in_sample", wealth_to_json(r.in_sample)},
                           {"out_of_sample", wealth_to_json(r.out_of_sample)}};
      if (!r.chain_samples.empty()) jr["chain_samples"] = r.chain_samples;
      if (r.posterior) jr["posterior"] = posterior_to_json(*r.posterior);
      jf["results"].push_back(std::move(jr));
    }
    j["folds"].push_back(std::move(jf));
  }
  j["aggregate"] = nlohmann::json::array();
  for (const auto& a : result.aggregate) {
    j["aggregate"].push_back({{"name", a.name},
                              {"is_ret", a.is_mean},
                              {"is_ret_pm", a.is_pm},
                              {"oos_ret", a.oos_mean},
                              {"oos_ret_pm", a.oos_pm},
                              {"oos_sr", number_or_null(a.oos_sr_mean)}});
  }
  return j;
}

ExperimentResult experiment_from_json(const nlohmann::json& j) {
  ExperimentResult result;
  try {
    result.periods_per_year = j.at("periods_per_year").get<int>();
    result.warnings = j.at("warnings").get<std::vector<std::string>>();
    for (const auto& jf : j.at("folds")) {
      FoldReport f;
      const auto& fo = jf.at("fold");
      f.fold.index = fo.at("index").get<int>();
      f.fold.train_begin = fo.at("train_begin").get<Eigen::Index>();
      f.fold.train_end = fo.at("train_end").get<Eigen::Index>();
      f.fold.test_begin = fo.at("test_begin").get<Eigen::Index>();
      f.fold.test_end = fo.at("test_end").get<Eigen::Index>();
      f.fold.train_first = fo.at("train_first").get<std::string>();
      f.fold.train_last = fo.at("train_last").get<std::string>();
      f.fold.test_first = fo.at("test_first").get<std::string>();
      f.fold.test_last = fo.at("test_last").get<std::string>();
      for (const auto& jr : jf.at("results")) {
        StrategyResult r;
        r.name = jr.at("name").get<std::string>();
        r.is_ret = jr.at("is_ret").get<double>();
        r.oos_ret = jr.at("oos_ret").get<double>();
        r.oos_sr = number_or_nan(jr.at("oos_sr"));
        r.is_turnover = jr.at("is_turnover").get<double>();
        r.oos_turnover = jr.at("oos_turnover").get<double>();
        r.learned = jr.at("learned");
        r.in_sample = wealth_from_json(jr.at("in_sample"));
        r.out_of_sample = wealth_from_json(jr.at("out_of_sample"));
        if (jr.contains("chain_samples")) {
          r.chain_samples = jr.at("chain_samples").get<std::vector<double>>();
        }
        if (jr.contains("posterior")) r.posterior = posterior_from_json(jr.at("posterior"));
        f.results.push_back(std::move(r));
      }
      result.folds.push_back(std::move(f));
    }
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("invalid experiment artifact: ") + e.what());
  }
  result.aggregate = aggregate_folds(result.folds);
  return result;
}

std::vector<std::filesystem::path> write_report(const ExperimentResult& result,
                                                const std::filesystem::path& dir,
                                                int histogram_bins) {
  if (histogram_bins < 1) throw std::invalid_argument("histogram needs at least one bin");
  if (result.folds.empty()) throw DataError("experiment artifact has no folds");
  std::filesystem::create_directories(dir);
  std::vector<std::filesystem::path> written;
  using csv::format_double;

  {
    const auto path = dir / "table1.csv";
    auto out = open_out(path);
    out << "portfolio,is_ret,is_ret_pm,oos_ret,oos_ret_pm\n";
    for (const auto& a : result.aggregate) {
      out << a.name << ',' << format_double(a.is_mean) << ',' << format_double(a.is_pm) << ','
          << format_double(a.oos_mean) << ',' << format_double(a.oos_pm) << '\n';
    }
    written.push_back(path);
  }
  {
    const auto path = dir / "table2.csv";
    auto out = open_out(path);
    out << "portfolio,is_ret,oos_ret,oos_sr\n";
    for (const auto& a : result.aggregate) {
      out << a.name << ',' << format_double(a.is_mean) << ',' << format_double(a.oos_mean) << ','
          << format_double(a.oos_sr_mean) << '\n';
    }
    written.push_back(path);
  }
  {
    const auto path = dir / "figure1.csv";
    auto out = open_out(path);
    out << "portfolio,fold,bin_lo,bin_hi,count,density\n";
    for (const auto& f : result.folds) {
      for (const auto& r : f.results) {
        if (r.chain_samples.empty()) continue;
        const auto [mn, mx] = std::minmax_element(r.chain_samples.begin(), r.chain_samples.end());
        double lo = *mn;
        double hi = *mx;
        if (!(hi > lo)) {
          lo -= 0.5;
          hi += 0.5;
        }
        const double width = (hi - lo) / histogram_bins;
        std::vector<std::size_t> counts(static_cast<std::size_t>(histogram_bins), 0);
        for (const double s : r.chain_samples) {
          auto b = static_cast<std::size_t>((s - lo) / width);
          counts[std::min(b, counts.size() - 1)] += 1;
        }
        const auto total = static_cast<double>(r.chain_samples.size());
        for (std::size_t b = 0; b < counts.size(); ++b) {
          const double b_lo = lo + width * static_cast<double>(b);
          out << r.name << ',' << f.fold.index << ',' << format_double(b_lo) << ','
              << format_double(b_lo + width) << ',' << counts[b] << ','
              << format_double(static_cast<double>(counts[b]) / (total * width)) << '\n';
        }
      }
    }
    written.push_back(path);
  }
  {
    const auto path = dir / "figure2.csv";
    auto out = open_out(path);
    out << "portfolio,fold,sample,date,wealth\n";
    for (const auto& f : result.folds) {
      for (const auto& r : f.results) {
        for (const auto* s : {&r.in_sample, &r.out_of_sample}) {
          const char* label = s == &r.in_sample ? "is" : "oos";
          out << r.name << ',' << f.fold.index << ',' << label << ',' << s->origin_date << ','
              << format_double(s->wealth.front()) << '\n';
          for (std::size_t t = 0; t < s->dates.size(); ++t) {
            out << r.name << ',' << f.fold.index << ',' << label << ',' << s->dates[t] << ','
                << format_double(s->wealth[t + 1]) << '\n';
          }
        }
      }
    }
    written.push_back(path);
  }
  for (const auto& r : result.folds.back().results) {
    if (!r.posterior) continue;
    const auto path = dir / ("figure3_" + slug(r.name) + ".csv");
    auto out = open_out(path);
    write_map_csv(out, *r.posterior);
    written.push_back(path);
  }
  return written;
}

}  // namespace spt
