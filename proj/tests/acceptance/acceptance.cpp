// Acceptance run: one PASS/FAIL line per criterion. Tolerances, seeds and
// time limits are fixed here so the output is comparable between builds.

#include "spt/backtest.hpp"
#include "spt/experiment.hpp"
#include "spt/gp_engine.hpp"
#include "spt/inference.hpp"
#include "spt/market_model.hpp"
#include "spt/master_eq.hpp"
#include "spt/portfolios.hpp"
#include "spt/rng.hpp"
#include "spt/synthetic.hpp"

#include <boost/math/tools/minima.hpp>
#include <unsupported/Eigen/KroneckerProduct>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

using namespace spt;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

struct Criterion {
  int id;
  const char* name;
  double time_limit_s;
  std::function<Outcome()> run;
};

std::string fmt(const char* f, double a) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

Eigen::VectorXd random_simplex(Eigen::Index n, Rng& rng) {
  Eigen::VectorXd v(n);
  for (Eigen::Index i = 0; i < n; ++i) v[i] = -std::log(rng.uniform());
  return v / v.sum();
}

// 1. Functionally generated weights of the diversity function against the
// closed form.
Outcome fgp_identity() {
  constexpr double kTol = 1e-10;
  Rng rng(101);
  double worst = 0.0;
  for (double p : {-2.0, -0.5, 0.5, 0.99}) {
    const GeneratingFunction g = diversity_generator(p);
    for (Eigen::Index n : {2, 10, 100}) {
      for (int k = 0; k < 1000; ++k) {
        const Eigen::VectorXd mu = random_simplex(n, rng);
        const double d =
            (fgp_weights(g, mu).values() - dwp_weights(mu, p).values()).cwiseAbs().maxCoeff();
        worst = std::max(worst, d);
      }
    }
  }
  return {worst <= kTol, "max |fgp - dwp| = " + fmt("%.3g", worst)};
}

// 2. Master-equation residual under step refinement.
Outcome master_convergence_study() {
  constexpr int kSeeds = 20;
  constexpr int kRequired = 18;
  constexpr double kFinestTol = 1e-2;
  const MarketParams params = MarketParams::isotropic(Eigen::Vector3d(1, 2, 3), 0.05, 0.2);
  int decreasing = 0;
  double finest_worst = 0.0;
  std::string failed;
  for (int seed = 1; seed <= kSeeds; ++seed) {
    const auto levels = master_convergence(diversity_generator(0.5), params, 1.0, 1.0 / 25200,
                                           {100, 10, 1}, static_cast<std::uint64_t>(seed));
    const double r0 = std::abs(levels[0].decomposition.residual);
    const double r1 = std::abs(levels[1].decomposition.residual);
    const double r2 = std::abs(levels[2].decomposition.residual);
    if (r0 > r1 && r1 > r2) {
      ++decreasing;
    } else {
      failed += " " + std::to_string(seed);
    }
    finest_worst = std::max(finest_worst, r2);
  }
  std::string detail = std::to_string(decreasing) + "/" + std::to_string(kSeeds) +
                       " seeds strictly decreasing (need " + std::to_string(kRequired) +
                       "), max finest |residual| = " + fmt("%.3g", finest_worst);
  if (!failed.empty()) detail += ", non-monotone seeds:" + failed;
  return {decreasing >= kRequired && finest_worst < kFinestTol, detail};
}

// 3. Kronecker algebra against dense matrices.
Outcome kronecker_oracle() {
  constexpr double kTol = 1e-10;
  Rng rng(303);
  const std::vector<std::vector<std::size_t>> shapes = {
      {400}, {20, 20}, {4, 5}, {3, 3}, {7, 8, 7}, {3, 4, 5, 2}, {10, 40}, {1, 9}, {64}, {5, 5, 5, 3}};
  double worst_k = 0.0;
  double worst_mv = 0.0;
  for (int rep = 0; rep < 100; ++rep) {
    const auto& shape = shapes[static_cast<std::size_t>(rep) % shapes.size()];
    CharGrid grid;
    RQHypers h;
    h.k0 = std::exp(0.5 * rng.normal());
    for (std::size_t m : shape) {
      std::vector<double> k;
      double x = rng.normal();
      for (std::size_t j = 0; j < m; ++j) {
        k.push_back(x);
        x += 0.05 + rng.uniform();
      }
      grid.knots.push_back(k);
      h.length.push_back(std::exp(rng.normal()));
      h.alpha.push_back(std::exp(rng.normal()));
    }
    const KronFactors f = kron_factorize(grid, h);
    const Eigen::MatrixXd pts = grid.points();
    Eigen::MatrixXd dense(pts.rows(), pts.rows());
    for (Eigen::Index a = 0; a < pts.rows(); ++a) {
      for (Eigen::Index b = 0; b < pts.rows(); ++b) {
        dense(a, b) = rq_kernel(pts.row(a).transpose(), pts.row(b).transpose(), h);
      }
    }
    worst_k = std::max(worst_k, (f.assemble() - dense).cwiseAbs().maxCoeff());
    Eigen::MatrixXd l = Eigen::MatrixXd::Constant(1, 1, f.k0);
    for (std::size_t i = 0; i < f.u.size(); ++i) {
      l = Eigen::kroneckerProduct(l, (f.u[i] * f.d[i].cwiseSqrt().asDiagonal()).eval()).eval();
    }
    const Eigen::VectorXd x = standard_normal(grid.size(), rng);
    worst_mv = std::max(worst_mv, (kron_matvec(f, x) - l * x).cwiseAbs().maxCoeff());
  }
  return {worst_k <= kTol && worst_mv <= kTol,
          "max |K - dense| = " + fmt("%.3g", worst_k) + ", max |Lx - dense| = " +
              fmt("%.3g", worst_mv)};
}

bool within_3se(const std::vector<double>& x, double mean, double var, std::string& detail,
                const char* label) {
  const auto n = static_cast<double>(x.size());
  double m = 0.0;
  for (double v : x) m += v;
  m /= n;
  double s2 = 0.0;
  for (double v : x) s2 += (v - m) * (v - m);
  s2 /= n - 1.0;
  const double z_mean = std::abs(m - mean) / std::sqrt(var / n);
  const double z_var = std::abs(s2 - var) / (var * std::sqrt(2.0 / (n - 1.0)));
  detail += std::string(label) + " z(mean) " + fmt("%.2f", z_mean) + " z(var) " +
            fmt("%.2f", z_var) + "; ";
  return z_mean < 3.0 && z_var < 3.0;
}

// 4. Samplers: ESS with flat and conjugate likelihoods, MH with a flat target.
Outcome sampler_correctness() {
  constexpr int kDraws = 20000;
  constexpr int kSteps = 30;
  std::string detail;
  bool ok = true;
  const PriorDraw prior = [](Rng& r) { return standard_normal(2, r); };
  {
    Rng rng(404);
    const VectorLogLik flat = [](const Eigen::VectorXd&) { return 0.0; };
    std::vector<double> c0;
    std::vector<double> c1;
    for (int k = 0; k < kDraws; ++k) {
      Eigen::VectorXd x = Eigen::Vector2d(3.0, -2.0);
      for (int s = 0; s < kSteps; ++s) x = ess_step(x, 0.0, flat, prior, rng).next;
      c0.push_back(x[0]);
      c1.push_back(x[1]);
    }
    ok = within_3se(c0, 0.0, 1.0, detail, "(a) x1") && ok;
    ok = within_3se(c1, 0.0, 1.0, detail, "(a) x2") && ok;
  }
  {
    // Prior N(0, 1), likelihood exp(-tau^2 |x - m|^2 / 2).
    Rng rng(405);
    const double tau2 = 4.0;
    const Eigen::Vector2d m(1.0, -0.5);
    const VectorLogLik lik = [&](const Eigen::VectorXd& x) {
      return -0.5 * tau2 * (x - m).squaredNorm();
    };
    std::vector<double> c0;
    std::vector<double> c1;
    for (int k = 0; k < kDraws; ++k) {
      Eigen::VectorXd x = Eigen::Vector2d::Zero();
      double ll = lik(x);
      for (int s = 0; s < kSteps; ++s) {
        const EssResult r = ess_step(x, ll, lik, prior, rng);
        x = r.next;
        ll = r.log_lik;
      }
      c0.push_back(x[0]);
      c1.push_back(x[1]);
    }
    ok = within_3se(c0, tau2 * m[0] / (1 + tau2), 1 / (1 + tau2), detail, "(b) x1") && ok;
    ok = within_3se(c1, tau2 * m[1] / (1 + tau2), 1 / (1 + tau2), detail, "(b) x2") && ok;
  }
  {
    ChainConfig c;
    c.iterations = 55000;
    c.burn_in = 5000;
    const ExponentChain chain = mh_sample([](double) { return 0.0; }, c, 2024);
    const double se = batch_means_se(chain.samples);
    const double var = chain.posterior_sd() * chain.posterior_sd();
    const double rel = std::abs(var / (64.0 / 3.0) - 1.0);
    const bool mh_ok = std::abs(chain.posterior_mean()) < 3.0 * se && rel < 0.15;
    detail += "(c) mean " + fmt("%.3f", chain.posterior_mean()) + " (3 SE " + fmt("%.3f", 3 * se) +
              "), var rel err " + fmt("%.3f", rel);
    ok = ok && mh_ok;
  }
  return {ok, detail};
}

// 5. Backtest against the product formula and the hand-worked cost example.
Outcome backtest_oracle() {
  constexpr double kTol = 1e-12;
  Rng rng(505);
  double worst = 0.0;
  BacktestConfig frictionless;
  frictionless.tc_rate = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const Eigen::Index days = 10 + static_cast<Eigen::Index>(rng.uniform() * 491);
    const Eigen::Index n = 2 + static_cast<Eigen::Index>(rng.uniform() * 49);
    MarketData data;
    data.panel.returns.resize(days, n);
    for (Eigen::Index t = 0; t < days; ++t) {
      for (Eigen::Index i = 0; i < n; ++i) data.panel.returns(t, i) = std::expm1(0.01 * rng.normal());
    }
    data.panel.member = MembershipMatrix::Constant(days, n, true);
    for (Eigen::Index t = 0; t < days; ++t) {
      char buf[32];
      std::snprintf(buf, sizeof buf, "%04d-%02d-%02d", 2001 + static_cast<int>(t / 336),
                    1 + static_cast<int>((t / 28) % 12), 1 + static_cast<int>(t % 28));
      data.panel.dates.emplace_back(buf);
    }
    for (Eigen::Index i = 0; i < n; ++i) data.panel.asset_ids.push_back("A" + std::to_string(i));
    data.origin_date = "2000-12-31";
    Eigen::MatrixXd caps(days, n);
    for (Eigen::Index i = 0; i < n; ++i) caps(0, i) = rng.uniform(1.0, 5.0);
    for (Eigen::Index t = 1; t < days; ++t) {
      for (Eigen::Index i = 0; i < n; ++i) {
        caps(t, i) = caps(t - 1, i) * (1.0 + data.panel.returns(t - 1, i));
      }
    }
    data.characteristics.emplace(kCapCharacteristic, caps);
    const double p = rng.uniform(-3.0, 3.0);
    double v = 1.0;
    for (Eigen::Index t = 0; t < days; ++t) {
      const double total = caps.row(t).sum();
      double norm = 0.0;
      for (Eigen::Index i = 0; i < n; ++i) norm += std::pow(caps(t, i) / total, p);
      double r = 0.0;
      for (Eigen::Index i = 0; i < n; ++i) {
        r += std::pow(caps(t, i) / total, p) / norm * data.panel.returns(t, i);
      }
      v *= 1.0 + r;
    }
    const WealthSeries s = run_backtest(dwp_strategy(p), data, frictionless);
    worst = std::max(worst, std::abs(s.terminal() - v));
  }

  // Two assets, equal weights, +10% / -10%: drifted weights 0.55 / 0.45,
  // turnover 0.10 back to 0.5 / 0.5, cost 0.001 * 0.10 * 1.0.
  MarketData hand;
  hand.panel.returns = (Eigen::MatrixXd(2, 2) << 0.10, -0.10, 0.0, 0.0).finished();
  hand.panel.member = MembershipMatrix::Constant(2, 2, true);
  hand.panel.dates = {"2001-01-02", "2001-01-03"};
  hand.panel.asset_ids = {"A", "B"};
  hand.origin_date = "2001-01-01";
  hand.characteristics.emplace(kCapCharacteristic, (Eigen::MatrixXd(2, 2) << 1, 1, 1.1, 0.9).finished());
  BacktestConfig c;
  c.tc_rate = 0.001;
  c.charge_initial = false;
  const WealthSeries s = run_backtest(ewp_strategy(), hand, c);
  const bool hand_ok = std::abs(s.turnover[0] - 0.10) < 1e-15 &&
                       std::abs(s.costs[0] - 0.0001) < 1e-18 && std::abs(s.wealth[1] - 0.9999) < 1e-15;
  return {worst <= kTol && hand_ok,
          "max |V(T) - product| = " + fmt("%.3g", worst) + ", hand example turnover " +
              fmt("%.17g", s.turnover[0]) + " cost " + fmt("%.17g", s.costs[0])};
}

LearningConfig planted_config() {
  LearningConfig cfg;
  cfg.performance = PerformanceKind::Sharpe;
  cfg.auto_likelihood_sd_fraction = 0.01;
  return cfg;
}

MarketData planted_panel(std::uint64_t seed) {
  SyntheticPanelConfig c;
  c.seed = seed;
  return simulate_panel(c);
}

// 6. Learners recover the planted small-cap premium.
Outcome learning_recovers_structure() {
  constexpr int kSeeds = 10;
  constexpr double kMhTol = 0.2;
  const LearningConfig cfg = planted_config();
  std::string detail;

  int negative = 0;
  double p_star_seed1 = 0.0;
  for (int seed = 1; seed <= kSeeds; ++seed) {
    const MarketData data = planted_panel(static_cast<std::uint64_t>(seed));
    const GridSearchResult g = grid_search_dwp(data, make_performance(data, cfg), cfg.grid);
    if (g.p_star < 0.0) ++negative;
    if (seed == 1) p_star_seed1 = g.p_star;
  }
  const bool a_ok = negative == kSeeds;
  detail += "(a) p* < 0 on " + std::to_string(negative) + "/" + std::to_string(kSeeds) +
            " seeds; ";

  const MarketData data1 = planted_panel(1);
  const TrainedStrategy mh = train_learner(parse_learner("dwp"), data1, cfg, 1);
  const double p_hat = mh.learned.at("posterior_mean").get<double>();
  const bool b_ok = std::abs(p_hat - p_star_seed1) <= kMhTol;
  detail += "(b) seed 1: p* " + fmt("%.3f", p_star_seed1) + ", posterior mean " +
            fmt("%.3f", p_hat) + "; ";

  int positive = 0;
  for (int seed = 1; seed <= kSeeds; ++seed) {
    const MarketData data = planted_panel(static_cast<std::uint64_t>(seed));
    const TrainedStrategy gp =
        train_learner(parse_learner("cap"), data, cfg, static_cast<std::uint64_t>(seed));
    const double excess = run_backtest(gp.strategy, data, cfg.backtest).terminal() -
                          run_backtest(ewp_strategy(), data, cfg.backtest).terminal();
    if (excess > 0.0) ++positive;
  }
  const bool c_ok = positive == kSeeds;
  detail += "(c) GP in-sample excess > 0 on " + std::to_string(positive) + "/" +
            std::to_string(kSeeds) + " seeds";
  return {a_ok && b_ok && c_ok, detail};
}

// 7. Rolling protocol and report layout on 23 simulated years.
Outcome protocol_shape() {
  SyntheticPanelConfig pc;
  pc.years = 23;
  const MarketData data = simulate_panel(pc);
  const FoldPlan plan = plan_folds(data.panel.dates, {});
  bool ok = plan.folds.size() == 9;
  for (const Fold& f : plan.folds) ok = ok && f.train_last < f.test_first;

  LearningConfig cfg = planted_config();
  cfg.mh.iterations = 300;
  cfg.mh.burn_in = 100;
  std::vector<LearnerSpec> learners;
  for (const char* s : {"ewp", "market", "dwp*", "dwp"}) learners.push_back(parse_learner(s));
  const ExperimentResult res = run_experiment(data, {}, learners, cfg);
  ok = ok && res.folds.size() == 9;

  const auto dir = std::filesystem::temp_directory_path() / "spt_acceptance_report";
  std::filesystem::remove_all(dir);
  write_report(res, dir);
  auto header = [&](const char* file) {
    std::ifstream in(dir / file);
    std::string line;
    std::getline(in, line);
    return line;
  };
  auto data_rows = [&](const char* file) {
    std::ifstream in(dir / file);
    std::string line;
    int n = -1;
    while (std::getline(in, line)) ++n;
    return n;
  };
  ok = ok && header("table1.csv") == "portfolio,is_ret,is_ret_pm,oos_ret,oos_ret_pm" &&
       data_rows("table1.csv") == 4;
  ok = ok && header("table2.csv") == "portfolio,is_ret,oos_ret,oos_sr" &&
       data_rows("table2.csv") == 4;
  ok = ok && header("figure1.csv") == "portfolio,fold,bin_lo,bin_hi,count,density" &&
       data_rows("figure1.csv") > 0;
  return {ok, std::to_string(plan.folds.size()) + " folds planned, " +
                  std::to_string(res.folds.size()) + " run; table1/table2/figure1 written to " +
                  dir.string()};
}

// 8. Gamma likelihood parameterization and mode.
Outcome gamma_likelihood() {
  constexpr double kRoundTrip = 1e-12;
  constexpr double kMode = 1e-6;
  const GammaLikelihood lik(7.0, 0.5);
  const double mean_err = std::abs(lik.shape() * lik.scale() - 7.0);
  const double sd_err = std::abs(std::sqrt(lik.shape()) * lik.scale() - 0.5);
  const GammaLikelihood back(lik.mean(), lik.sd());
  const double back_err = std::max(std::abs(back.shape() - lik.shape()) / lik.shape(),
                                   std::abs(back.scale() - lik.scale()) / lik.scale());
  const auto found = boost::math::tools::brent_find_minima(
      [&](double x) { return -gamma_log_density(x, lik); }, 5.0, 9.0, 52);
  const double expected = 7.0 - 0.25 / 7.0;
  const double mode_err = std::max(std::abs(found.first - expected), std::abs(lik.mode() - expected));
  const bool ok = mean_err <= kRoundTrip && sd_err <= kRoundTrip && back_err <= kRoundTrip &&
                  mode_err <= kMode;
  return {ok, "round trip err " + fmt("%.3g", std::max({mean_err, sd_err, back_err})) +
                  ", numerical mode " + fmt("%.9f", found.first) + " vs " + fmt("%.9f", expected)};
}

}  // namespace

int main() {
  const std::vector<Criterion> criteria = {
      {1, "fgp/dwp identity", 5.0, fgp_identity},
      {2, "master-equation convergence", 120.0, master_convergence_study},
      {3, "Kronecker oracle", 30.0, kronecker_oracle},
      {4, "sampler correctness", 120.0, sampler_correctness},
      {5, "backtest oracle", 10.0, backtest_oracle},
      {6, "learning recovers planted structure", 900.0, learning_recovers_structure},
      {7, "protocol shape", 900.0, protocol_shape},
      {8, "Gamma likelihood", 1.0, gamma_likelihood},
  };
  int failures = 0;
  for (const Criterion& c : criteria) {
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    const bool in_time = secs <= c.time_limit_s;
    const bool pass = o.pass && in_time;
    if (!pass) ++failures;
    std::printf("%s criterion %d (%s): %s; %.1f s (limit %.0f s%s)\n", pass ? "PASS" : "FAIL", c.id,
                c.name, o.detail.c_str(), secs, c.time_limit_s, in_time ? "" : ", exceeded");
    std::fflush(stdout);
  }
  std::printf("%d of %zu criteria passed\n", static_cast<int>(criteria.size()) - failures,
              criteria.size());
  return failures == 0 ? 0 : 1;
}
