#include "spt/cli.hpp"

#include "spt/backtest.hpp"
#include "spt/errors.hpp"
#include "spt/experiment.hpp"
#include "spt/gp_engine.hpp"
#include "spt/inference.hpp"
#include "spt/ingest.hpp"
#include "spt/market_model.hpp"
#include "spt/master_eq.hpp"
#include "spt/synthetic.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <numeric>
#include <optional>
#include <sstream>

namespace spt {

namespace fs = std::filesystem;

namespace {

std::ofstream open_out(const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw DataError("cannot write '" + path.string() + "'");
  return out;
}

nlohmann::json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open '" + path.string() + "'");
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw DataError("'" + path.string() + "' is not valid JSON: " + e.what());
  }
}

void write_json(const fs::path& path, const nlohmann::json& j) {
  auto out = open_out(path);
  out << j.dump(2) << '\n';
}

fs::path default_output_dir() {
  if (const char* env = std::getenv("SPT_OUTPUT_DIR"); env != nullptr && *env != '\0') {
    return env;
  }
  return ".";
}

std::vector<std::string> split_list(const std::string& text, char sep) {
  std::vector<std::string> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, sep)) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

Strategy strategy_from_spec(const std::string& spec) {
  if (spec == "ewp") return ewp_strategy();
  if (spec == "market") return market_strategy();
  if (spec.rfind("dwp:p=", 0) == 0) return dwp_strategy(parse_fraction(spec.substr(6)));
  if (spec.rfind("map:artifact=", 0) == 0) {
    return posterior_strategy(posterior_from_json(read_json(spec.substr(13))));
  }
  throw std::invalid_argument("unknown strategy '" + spec +
                              "' (expected ewp, market, dwp:p=<x> or map:artifact=<path>)");
}

struct PanelInputs {
  std::string returns;
  std::string characteristics;
  std::string membership;

  void add(CLI::App* app, bool required) {
    auto* r = app->add_option("--returns", returns, "returns CSV (date,asset_id,return[,member])");
    if (required) r->required();
    app->add_option("--characteristics", characteristics, "characteristics CSV (date,asset_id,name,value)");
    app->add_option("--membership", membership, "membership CSV (date,asset_id,member)");
  }

  IngestResult load(std::ostream& err) const {
    IngestResult in = ingest_panel_files(returns, characteristics, membership);
    for (const auto& w : in.warnings) err << "warning: " << w << '\n';
    return in;
  }
};

struct LearningOptions {
  std::string performance = "excess";
  std::string lik_mean = "7.0";
  double lik_sd = 0.5;
  double lik_sd_fraction = 0.01;
  double tc = 0.001;
  int periods = 252;
  std::uint64_t seed = 1;

  void add(CLI::App* app) {
    app->add_option("--performance", performance, "excess or sharpe")->capture_default_str();
    app->add_option("--lik-mean", lik_mean, "Gamma likelihood mean, or 'auto'")->capture_default_str();
    app->add_option("--lik-sd", lik_sd, "Gamma likelihood sd")->capture_default_str();
    app->add_option("--lik-sd-fraction", lik_sd_fraction,
                    "sd as a fraction of the mean when --lik-mean=auto")
        ->capture_default_str();
    app->add_option("--tc", tc, "transaction cost rate")->capture_default_str();
    app->add_option("--periods-per-year", periods, "periods per year")->capture_default_str();
    app->add_option("--seed", seed, "random seed")->capture_default_str();
  }

  LearningConfig config() const {
    LearningConfig c;
    c.performance = parse_performance(performance);
    c.backtest.tc_rate = tc;
    c.backtest.periods_per_year = periods;
    if (lik_mean == "auto") {
      c.auto_likelihood_sd_fraction = lik_sd_fraction;
    } else {
      c.likelihood_mean = parse_fraction(lik_mean);
      c.likelihood_sd = lik_sd;
    }
    c.seed = seed;
    return c;
  }
};

int run_simulate(const std::string& kind, const SyntheticPanelConfig& panel, const std::string& dt_text,
                 double drift, double vol, const std::string& out_path, std::ostream& out) {
  if (kind == "panel") {
    const MarketData data = simulate_panel(panel);
    const fs::path dir = out_path.empty() ? default_output_dir() : fs::path(out_path);
    fs::create_directories(dir);
    {
      auto f = open_out(dir / "returns.csv");
      write_returns_csv(f, data);
    }
    {
      auto f = open_out(dir / "characteristics.csv");
      write_characteristics_csv(f, data);
    }
    out << "wrote " << (dir / "returns.csv").string() << " and "
        << (dir / "characteristics.csv").string() << '\n';
    return kExitOk;
  }
  if (kind != "market") throw std::invalid_argument("--kind must be market or panel");
  if (out_path.empty()) throw std::invalid_argument("--out is required for --kind market");
  Eigen::VectorXd caps(panel.assets);
  for (Eigen::Index i = 0; i < panel.assets; ++i) caps[i] = static_cast<double>(i + 1);
  const MarketParams params = MarketParams::isotropic(caps, drift, vol);
  const double dt = parse_fraction(dt_text);
  const MarketPath path = simulate_market(params, static_cast<double>(panel.years), dt, panel.seed);
  auto f = open_out(out_path);
  write_market_csv(f, path);
  out << "wrote " << out_path << '\n';
  return kExitOk;
}

nlohmann::json backtest_summary(const WealthSeries& s, int periods) {
  nlohmann::json j;
  j["days"] = s.periods();
  j["terminal_wealth"] = s.terminal();
  j["bankrupt"] = s.bankrupt;
  j["annualized_return"] = s.terminal() > 0.0 ? nlohmann::json(annualize_return(s, periods))
                                              : nlohmann::json(-1.0);
  try {
    j["sharpe_ratio"] = sharpe_ratio(net_returns(s), periods);
  } catch (const std::exception&) {
    j["sharpe_ratio"] = nullptr;
  }
  j["total_turnover"] = std::accumulate(s.turnover.begin(), s.turnover.end(), s.initial_turnover);
  j["total_costs"] = std::accumulate(s.costs.begin(), s.costs.end(), s.initial_cost);
  return j;
}

}  // namespace

double parse_fraction(const std::string& text) {
  auto parse = [&](const std::string& s) {
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(s, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used == 0 || used != s.size() || !std::isfinite(v)) {
      throw std::invalid_argument("invalid number '" + text + "'");
    }
    return v;
  };
  const auto slash = text.find('/');
  if (slash == std::string::npos) return parse(text);
  const double den = parse(text.substr(slash + 1));
  if (den == 0.0) throw std::invalid_argument("zero denominator in '" + text + "'");
  return parse(text.substr(0, slash)) / den;
}

int cli_dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Learning and backtesting functionally generated portfolios", "spt"};
  app.require_subcommand(1);

  // simulate
  auto* sim = app.add_subcommand("simulate", "simulate a GBM market path or a planted-premium panel");
  std::string sim_kind = "market";
  SyntheticPanelConfig sim_panel;
  sim_panel.assets = 3;
  sim_panel.years = 1;
  std::string sim_dt = "1/252";
  double sim_drift = 0.05;
  double sim_vol = 0.2;
  std::string sim_out;
  sim->add_option("--kind", sim_kind, "market or panel")->capture_default_str();
  sim->add_option("--n", sim_panel.assets, "number of assets")->capture_default_str();
  sim->add_option("--seed", sim_panel.seed, "random seed")->capture_default_str();
  sim->add_option("--years", sim_panel.years, "horizon in years")->capture_default_str();
  sim->add_option("--dt", sim_dt, "market step, e.g. 1/252")->capture_default_str();
  sim->add_option("--drift", sim_drift, "market drift b")->capture_default_str();
  sim->add_option("--vol", sim_vol, "market volatility (sigma = vol * I)")->capture_default_str();
  sim->add_option("--first-year", sim_panel.first_year, "panel: first calendar year")->capture_default_str();
  sim->add_option("--premium", sim_panel.small_cap_premium, "panel: daily small-cap premium")->capture_default_str();
  sim->add_option("--roa-premium", sim_panel.roa_premium, "panel: daily premium of the best ROA")->capture_default_str();
  sim->add_option("--daily-vol", sim_panel.daily_vol, "panel: daily volatility")->capture_default_str();
  sim->add_option("--daily-drift", sim_panel.daily_drift, "panel: daily drift")->capture_default_str();
  sim->add_option("--out", sim_out, "market: output CSV; panel: output directory");

  // backtest
  auto* bt = app.add_subcommand("backtest", "backtest a strategy on a panel");
  PanelInputs bt_in;
  bt_in.add(bt, true);
  std::string bt_strategy;
  BacktestConfig bt_cfg;
  bool bt_no_initial = false;
  std::string bt_out;
  std::string bt_summary;
  bt->add_option("--strategy", bt_strategy, "ewp | market | dwp:p=<x> | map:artifact=<json>")->required();
  bt->add_option("--tc", bt_cfg.tc_rate, "transaction cost rate")->capture_default_str();
  bt->add_option("--periods-per-year", bt_cfg.periods_per_year, "periods per year")->capture_default_str();
  bt->add_flag("--no-initial-cost", bt_no_initial, "do not charge the initial purchase");
  bt->add_option("--out", bt_out, "wealth series CSV")->required();
  bt->add_option("--summary", bt_summary, "summary JSON");

  // learn
  auto* learn = app.add_subcommand("learn", "learn a strategy");
  learn->require_subcommand(1);
  auto* grid_cmd = learn->add_subcommand("dwp-grid", "grid search for the DWP exponent");
  auto* mh_cmd = learn->add_subcommand("dwp-mh", "Metropolis-Hastings posterior of the DWP exponent");
  auto* gp_cmd = learn->add_subcommand("gp", "Gaussian-process investment map");
  PanelInputs learn_in;
  LearningOptions learn_opts;
  std::string learn_out;
  GridSearchConfig grid_cfg;
  ChainConfig mh_cfg;
  std::optional<double> mh_initial;
  std::string mh_chain;
  GibbsConfig gibbs_cfg;
  std::string gp_chars = kLogMarketWeight;
  std::size_t gp_knots = 0;
  std::string gp_map;
  for (auto* cmd : {grid_cmd, mh_cmd, gp_cmd}) {
    learn_in.add(cmd, true);
    learn_opts.add(cmd);
    cmd->add_option("--out", learn_out, "learned artifact JSON")->required();
  }
  grid_cmd->add_option("--lo", grid_cfg.lo)->capture_default_str();
  grid_cmd->add_option("--hi", grid_cfg.hi)->capture_default_str();
  grid_cmd->add_option("--mesh", grid_cfg.mesh)->capture_default_str();
  mh_cmd->add_option("--iterations", mh_cfg.iterations)->capture_default_str();
  mh_cmd->add_option("--burn-in", mh_cfg.burn_in)->capture_default_str();
  mh_cmd->add_option("--proposal-std", mh_cfg.proposal_std)->capture_default_str();
  mh_cmd->add_option("--initial-p", mh_initial, "start of the chain (default: first feasible of 0, 0.5, -0.5, ...)");
  mh_cmd->add_option("--chain", mh_chain, "chain dump CSV");
  gp_cmd->add_option("--chars", gp_chars, "comma-separated characteristics")->capture_default_str();
  gp_cmd->add_option("--knots", gp_knots, "knots per dimension (0 = default)")->capture_default_str();
  gp_cmd->add_option("--iterations", gibbs_cfg.iterations)->capture_default_str();
  gp_cmd->add_option("--burn-in", gibbs_cfg.burn_in)->capture_default_str();
  gp_cmd->add_option("--map", gp_map, "posterior map CSV");

  // verify-master
  auto* vm = app.add_subcommand("verify-master", "master-equation decomposition at several step sizes");
  int vm_n = 3;
  std::uint64_t vm_seed = 1;
  double vm_horizon = 1.0;
  std::string vm_levels = "1/252,1/2520,1/25200";
  std::string vm_generator = "diversity:p=0.5";
  double vm_drift = 0.05;
  double vm_vol = 0.2;
  std::string vm_out;
  vm->add_option("--n", vm_n)->capture_default_str();
  vm->add_option("--seed", vm_seed)->capture_default_str();
  vm->add_option("--horizon", vm_horizon)->capture_default_str();
  vm->add_option("--dt-levels", vm_levels, "comma-separated step sizes")->capture_default_str();
  vm->add_option("--generator", vm_generator, "diversity:p=<x> | entropy")->capture_default_str();
  vm->add_option("--drift", vm_drift)->capture_default_str();
  vm->add_option("--vol", vm_vol)->capture_default_str();
  vm->add_option("--out", vm_out, "decomposition CSV")->required();

  // experiment
  auto* ex = app.add_subcommand("experiment", "rolling train/test experiment");
  ex->set_config("--config", "", "INI/TOML configuration file");
  PanelInputs ex_in;
  ex_in.add(ex, false);
  LearningOptions ex_opts;
  ex_opts.add(ex);
  ExperimentPlan plan;
  std::string ex_learners = "ewp,market,dwp*,dwp,cap,cap+roa";
  int sim_years = 0;
  SyntheticPanelConfig ex_panel;
  int mh_iters = 10000;
  int mh_burn = 5000;
  int gp_iters = 2000;
  int gp_burn = 1000;
  std::size_t ex_knots = 0;
  std::string ex_out_dir;
  ex->add_option("--learners", ex_learners, "comma-separated learners")->capture_default_str();
  ex->add_option("--train-years", plan.train_years)->capture_default_str();
  ex->add_option("--test-years", plan.test_years)->capture_default_str();
  ex->add_option("--roll-years", plan.roll_years)->capture_default_str();
  ex->add_option("--start-year", plan.start_year)->capture_default_str();
  ex->add_option("--simulate-years", sim_years, "simulate a panel of this many years instead of reading one");
  ex->add_option("--simulate-assets", ex_panel.assets)->capture_default_str();
  ex->add_option("--simulate-seed", ex_panel.seed)->capture_default_str();
  ex->add_option("--simulate-premium", ex_panel.small_cap_premium)->capture_default_str();
  ex->add_option("--simulate-roa-premium", ex_panel.roa_premium)->capture_default_str();
  ex->add_option("--mh-iterations", mh_iters)->capture_default_str();
  ex->add_option("--mh-burn-in", mh_burn)->capture_default_str();
  ex->add_option("--gp-iterations", gp_iters)->capture_default_str();
  ex->add_option("--gp-burn-in", gp_burn)->capture_default_str();
  ex->add_option("--knots", ex_knots)->capture_default_str();
  ex->add_option("--out-dir", ex_out_dir, "output directory (default: $SPT_OUTPUT_DIR or .)");

  // report
  auto* rp = app.add_subcommand("report", "tables and figure data from an experiment artifact");
  std::string rp_in;
  std::string rp_out_dir;
  int rp_bins = 40;
  rp->add_option("--experiment", rp_in, "experiment JSON")->required();
  rp->add_option("--out-dir", rp_out_dir, "output directory (default: $SPT_OUTPUT_DIR or .)");
  rp->add_option("--bins", rp_bins, "histogram bins")->capture_default_str();

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << (app.get_subcommands().empty() ? app.help() : app.get_subcommands().back()->help());
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  }

  try {
    if (sim->parsed()) {
      return run_simulate(sim_kind, sim_panel, sim_dt, sim_drift, sim_vol, sim_out, out);
    }
    if (bt->parsed()) {
      bt_cfg.charge_initial = !bt_no_initial;
      const IngestResult in = bt_in.load(err);
      const WealthSeries series = run_backtest(strategy_from_spec(bt_strategy), in.data, bt_cfg);
      {
        auto f = open_out(bt_out);
        write_wealth_csv(f, series);
      }
      const nlohmann::json summary = backtest_summary(series, bt_cfg.periods_per_year);
      if (!bt_summary.empty()) write_json(bt_summary, summary);
      out << summary.dump() << '\n';
      return kExitOk;
    }
    if (learn->parsed()) {
      const IngestResult in = learn_in.load(err);
      LearningConfig cfg = learn_opts.config();
      const TargetPerformance perf = make_performance(in.data, cfg);
      nlohmann::json artifact;
      if (grid_cmd->parsed()) {
        const GridSearchResult res = grid_search_dwp(in.data, perf, grid_cfg);
        artifact = {{"p_star", res.p_star},
                    {"best", res.best},
                    {"evaluations", res.evaluations()},
                    {"failures", res.failures()}};
        for (const auto& pt : res.points) {
          artifact["grid"].push_back({{"p", pt.p},
                                      {"perf", pt.ok ? nlohmann::json(pt.perf) : nlohmann::json(nullptr)},
                                      {"error", pt.error}});
          if (!pt.ok) err << "warning: p = " << pt.p << " skipped: " << pt.error << '\n';
        }
      } else if (mh_cmd->parsed()) {
        cfg.grid = grid_cfg;
        const GammaLikelihood lik = make_likelihood(in.data, perf, cfg);
        const ExponentObjective objective = dwp_objective(in.data, perf);
        const ExponentObjective log_target = [&](double p) {
          return gamma_log_density(objective(p), lik);
        };
        mh_cfg.initial_p = mh_initial ? *mh_initial : feasible_start(log_target, mh_cfg.lo, mh_cfg.hi);
        const ExponentChain chain = mh_sample(log_target, mh_cfg, cfg.seed);
        artifact = chain_summary(chain);
        artifact["p_hat"] = chain.posterior_mean();
        artifact["initial_p"] = mh_cfg.initial_p;
        artifact["likelihood_mean"] = lik.mean();
        artifact["likelihood_sd"] = lik.sd();
        if (!mh_chain.empty()) {
          auto f = open_out(mh_chain);
          write_chain_csv(f, chain);
        }
      } else {
        const GammaLikelihood lik = make_likelihood(in.data, perf, cfg);
        const std::vector<std::string> chars = split_list(gp_chars, ',');
        const CharGrid grid = observed_grid(in.data, chars, gp_knots);
        const GridTargets model(in.data, chars, grid);
        const GPPosterior post =
            blocked_gibbs(model, perf, lik, default_hyper_prior(grid), gibbs_cfg, cfg.seed);
        artifact = posterior_to_json(post);
        if (!gp_map.empty()) {
          auto f = open_out(gp_map);
          write_map_csv(f, post);
        }
      }
      write_json(learn_out, artifact);
      out << "wrote " << learn_out << '\n';
      return kExitOk;
    }
    if (vm->parsed()) {
      std::vector<double> levels;
      for (const auto& s : split_list(vm_levels, ',')) levels.push_back(parse_fraction(s));
      if (levels.empty()) throw std::invalid_argument("--dt-levels is empty");
      const double finest = *std::min_element(levels.begin(), levels.end());
      std::vector<Eigen::Index> factors;
      for (const double dt : levels) {
        const double ratio = dt / finest;
        const auto f = static_cast<Eigen::Index>(std::llround(ratio));
        if (std::abs(ratio - static_cast<double>(f)) > 1e-9 * ratio) {
          throw std::invalid_argument("every step size must be a multiple of the finest");
        }
        factors.push_back(f);
      }
      GeneratingFunction g;
      if (vm_generator == "entropy") {
        g = entropy_generator();
      } else if (vm_generator.rfind("diversity:p=", 0) == 0) {
        g = diversity_generator(parse_fraction(vm_generator.substr(12)));
      } else {
        throw std::invalid_argument("unknown generator '" + vm_generator + "'");
      }
      Eigen::VectorXd caps(vm_n);
      for (int i = 0; i < vm_n; ++i) caps[i] = static_cast<double>(i + 1);
      const MarketParams params = MarketParams::isotropic(caps, vm_drift, vm_vol);
      const auto rows = master_convergence(g, params, vm_horizon, finest, factors, vm_seed);
      auto f = open_out(vm_out);
      write_decomposition_csv(f, rows);
      out << "wrote " << vm_out << '\n';
      return kExitOk;
    }
    if (ex->parsed()) {
      MarketData data;
      if (sim_years > 0) {
        ex_panel.years = sim_years;
        data = simulate_panel(ex_panel);
      } else if (!ex_in.returns.empty()) {
        data = ex_in.load(err).data;
      } else {
        throw std::invalid_argument("experiment needs --returns or --simulate-years");
      }
      LearningConfig cfg = ex_opts.config();
      cfg.mh.iterations = mh_iters;
      cfg.mh.burn_in = mh_burn;
      cfg.gibbs.iterations = gp_iters;
      cfg.gibbs.burn_in = gp_burn;
      cfg.knots_per_dim = ex_knots;
      std::vector<LearnerSpec> learners;
      for (const auto& s : split_list(ex_learners, ',')) learners.push_back(parse_learner(s));
      const ExperimentResult result = run_experiment(data, plan, learners, cfg);
      for (const auto& w : result.warnings) err << "warning: " << w << '\n';
      const fs::path dir = ex_out_dir.empty() ? default_output_dir() : fs::path(ex_out_dir);
      write_json(dir / "experiment.json", experiment_to_json(result));
      out << "wrote " << (dir / "experiment.json").string() << " (" << result.folds.size()
          << " folds)\n";
      return kExitOk;
    }
    if (rp->parsed()) {
      const ExperimentResult result = experiment_from_json(read_json(rp_in));
      const fs::path dir = rp_out_dir.empty() ? default_output_dir() : fs::path(rp_out_dir);
      for (const auto& p : write_report(result, dir, rp_bins)) out << "wrote " << p.string() << '\n';
      return kExitOk;
    }
  } catch (const DataError& e) {
    err << "data error: " << e.what() << '\n';
    return kExitData;
  } catch (const NumericError& e) {
    err << "numeric error: " << e.what() << '\n';
    return kExitNumeric;
  } catch (const ResourceError& e) {
    err << "resource error: " << e.what() << '\n';
    return kExitNumeric;
  } catch (const std::invalid_argument& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const fs::filesystem_error& e) {
    err << "data error: " << e.what() << '\n';
    return kExitData;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitNumeric;
  }
  return kExitUsage;
}

int cli_dispatch(int argc, const char* const* argv) {
  std::vector<std::string> args;
  for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
  return cli_dispatch(args, std::cout, std::cerr);
}

}  // namespace spt
