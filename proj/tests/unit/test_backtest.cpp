#include "spt/backtest.hpp"
#include "spt/errors.hpp"
#include "spt/portfolios.hpp"
#include "support.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <sstream>

using namespace spt;
using spt::test_support::make_data;
using spt::test_support::random_data;

namespace {

BacktestConfig frictionless() {
  BacktestConfig c;
  c.tc_rate = 0.0;
  return c;
}

// V(T) = V(0) prod_t (1 + sum_i pi_i(t) r_i(t)), with pi(t) the DWP weights
// from the caps known before day t. Written with plain loops and pow.
double product_formula(const MarketData& data, double p) {
  const Eigen::MatrixXd& caps = data.characteristics.at(kCapCharacteristic);
  double v = 1.0;
  for (Eigen::Index t = 0; t < data.days(); ++t) {
    double norm = 0.0;
    double total = caps.row(t).sum();
    for (Eigen::Index i = 0; i < data.assets(); ++i) norm += std::pow(caps(t, i) / total, p);
    double r = 0.0;
    for (Eigen::Index i = 0; i < data.assets(); ++i) {
      r += std::pow(caps(t, i) / total, p) / norm * data.panel.returns(t, i);
    }
    v *= 1.0 + r;
  }
  return v;
}

}  // namespace

TEST(Backtest, FlatPanelKeepsWealth) {
  const MarketData data = make_data(Eigen::MatrixXd::Zero(20, 4), Eigen::Vector4d(1, 2, 3, 4));
  BacktestConfig c = frictionless();
  const WealthSeries s = run_backtest(ewp_strategy(), data, c);
  for (double v : s.wealth) EXPECT_EQ(v, 1.0);
  for (double x : s.turnover) EXPECT_EQ(x, 0.0);
  EXPECT_EQ(s.wealth.size(), 21u);
}

TEST(Backtest, SingleAssetCompounds) {
  Eigen::MatrixXd r(2, 1);
  r << 0.01, 0.01;
  const WealthSeries s =
      run_backtest(ewp_strategy(), make_data(r, Eigen::VectorXd::Ones(1)), frictionless());
  EXPECT_NEAR(s.terminal(), 1.0201, 1e-15);
}

TEST(Backtest, HandComputedCostExample) {
  Eigen::MatrixXd r(2, 2);
  r << 0.10, -0.10, 0.0, 0.0;
  BacktestConfig c;
  c.tc_rate = 0.001;
  c.charge_initial = false;
  const WealthSeries s = run_backtest(ewp_strategy(), make_data(r, Eigen::Vector2d(1, 1)), c);
  EXPECT_EQ(s.returns[0], 0.0);
  EXPECT_NEAR(s.turnover[0], 0.10, 1e-15);
  EXPECT_NEAR(s.costs[0], 0.0001, 1e-18);
  EXPECT_NEAR(s.wealth[1], 0.9999, 1e-15);
  EXPECT_EQ(s.initial_cost, 0.0);
  EXPECT_EQ(s.turnover[1], 0.0);
}

TEST(Backtest, InitialPurchaseIsCharged) {
  const MarketData data = make_data(Eigen::MatrixXd::Zero(3, 2), Eigen::Vector2d(1, 1));
  BacktestConfig c;
  c.tc_rate = 0.002;
  const WealthSeries s = run_backtest(ewp_strategy(), data, c);
  EXPECT_DOUBLE_EQ(s.initial_turnover, 1.0);
  EXPECT_DOUBLE_EQ(s.initial_cost, 0.002);
  EXPECT_DOUBLE_EQ(s.wealth[1], 0.998);
}

TEST(Backtest, TerminalWealthMatchesProductFormula) {
  Rng rng(17);
  for (int trial = 0; trial < 100; ++trial) {
    const Eigen::Index days = 10 + static_cast<Eigen::Index>(rng.uniform() * 490);
    const Eigen::Index n = 2 + static_cast<Eigen::Index>(rng.uniform() * 48);
    const MarketData data = random_data(days, n, rng);
    const double p = rng.uniform(-3.0, 3.0);
    const WealthSeries s = run_backtest(dwp_strategy(p), data, frictionless());
    ASSERT_NEAR(s.terminal(), product_formula(data, p), 1e-12) << "trial " << trial;
    for (double c : s.costs) EXPECT_EQ(c, 0.0);
  }
}

TEST(Backtest, ExcessReturnExamples) {
  Rng rng(2);
  const MarketData data = random_data(252, 10, rng);
  const BacktestConfig c = frictionless();
  EXPECT_EQ(excess_return(dwp_strategy(0.3), dwp_strategy(0.3), data, c), 0.0);
  EXPECT_NEAR(excess_return(dwp_strategy(-0.5), ewp_strategy(), data, c),
              product_formula(data, -0.5) - product_formula(data, 0.0), 1e-12);

  Eigen::MatrixXd r(1, 2);
  r << 0.01, 0.0;
  const MarketData one = make_data(r, Eigen::Vector2d(1, 1));
  auto all_in = [](Eigen::Index k) {
    return [k](const DecisionContext& ctx) {
      Eigen::VectorXd w = Eigen::VectorXd::Zero(ctx.assets());
      w[k] = 1.0;
      return w;
    };
  };
  EXPECT_NEAR(excess_return(all_in(0), all_in(1), one, c), 0.01, 1e-15);
}

TEST(Backtest, WealthRecursionHolds) {
  Rng rng(4);
  const MarketData data = random_data(300, 8, rng);
  BacktestConfig c;
  c.tc_rate = 0.003;
  const WealthSeries s = run_backtest(dwp_strategy(-1.0), data, c);
  EXPECT_DOUBLE_EQ(s.wealth[0] - s.initial_cost, 1.0 - c.tc_rate * s.initial_turnover);
  double v = s.wealth[0] - s.initial_cost;
  for (std::size_t t = 0; t < s.returns.size(); ++t) {
    const double pre = v * (1.0 + s.returns[t]);
    EXPECT_NEAR(s.costs[t], c.tc_rate * s.turnover[t] * pre, 1e-15);
    v = pre - s.costs[t];
    EXPECT_EQ(s.wealth[t + 1], v);
    EXPECT_GE(v, 0.0);
  }
}

TEST(Backtest, TurnoverAgainstDriftedWeights) {
  Rng rng(6);
  const MarketData data = random_data(50, 5, rng);
  BacktestConfig c;
  const Eigen::MatrixXd targets = strategy_targets(dwp_strategy(2.0), data);
  const WealthSeries s = run_backtest(targets, data, c);
  for (Eigen::Index t = 0; t + 1 < data.days(); ++t) {
    const Eigen::ArrayXd grown =
        targets.row(t).transpose().array() * (1.0 + data.panel.returns.row(t).transpose().array());
    const Eigen::ArrayXd drifted = grown / grown.sum();
    const double oracle = (targets.row(t + 1).transpose().array() - drifted).abs().sum();
    EXPECT_NEAR(s.turnover[static_cast<std::size_t>(t)], oracle, 1e-14);
  }
}

TEST(Backtest, SharpeExamples) {
  const std::vector<double> alt = {0.01, -0.01, 0.01, -0.01, 0.01, -0.01};
  EXPECT_EQ(sharpe_ratio(alt, 252), 0.0);
  const std::vector<double> flat = {0.003, 0.003, 0.003};
  EXPECT_THROW(sharpe_ratio(flat, 252), UndefinedSharpeError);
  const std::vector<double> r = {0.01, 0.02, -0.005, 0.015};
  // mean 0.01, sd sqrt(0.00035 / 3)
  EXPECT_NEAR(sharpe_ratio(r, 252), std::sqrt(252.0) * 0.01 / std::sqrt(0.00035 / 3.0), 1e-12);
  EXPECT_NEAR(sharpe_ratio(r, 252), 14.6969385, 1e-6);
  const std::vector<double> one = {0.01};
  EXPECT_THROW(sharpe_ratio(one, 252), std::invalid_argument);
}

TEST(Backtest, AnnualizedReturn) {
  WealthSeries s;
  s.wealth = {1.0, 1.1, 1.0};
  s.returns = {0.1, -0.1};
  EXPECT_NEAR(annualize_return(s, 252), 0.0, 1e-15);

  s.wealth.assign(253, 1.0);
  s.wealth.back() = 2.0;
  s.returns.assign(252, 0.0);
  EXPECT_NEAR(annualize_return(s, 252), 1.0, 1e-12);

  s.wealth.assign(505, 1.0);
  s.wealth.back() = 1.5;
  s.returns.assign(504, 0.0);
  EXPECT_NEAR(annualize_return(s, 252), 0.224744871391589, 1e-12);
}

TEST(Backtest, LookAheadIsRejected) {
  Rng rng(1);
  const MarketData data = random_data(10, 3, rng);
  const Strategy peek_returns = [](const DecisionContext& ctx) {
    const Eigen::VectorXd r = ctx.past_returns(ctx.day());
    return ewp_weights(ctx.assets()).values().eval() + 0.0 * r;
  };
  EXPECT_THROW(run_backtest(peek_returns, data, {}), LookAheadError);

  const Strategy peek_caps = [](const DecisionContext& ctx) {
    if (ctx.day() + 1 < 10) (void)ctx.characteristic(kCapCharacteristic, ctx.day() + 1);
    return ewp_weights(ctx.assets()).values();
  };
  EXPECT_THROW(run_backtest(peek_caps, data, {}), LookAheadError);

  const Strategy honest = [](const DecisionContext& ctx) {
    if (ctx.day() > 0) (void)ctx.past_returns(ctx.day() - 1);
    (void)ctx.characteristic(kCapCharacteristic);
    return ewp_weights(ctx.assets()).values();
  };
  EXPECT_NO_THROW(run_backtest(honest, data, {}));
}

TEST(Backtest, MembershipIsEnforced) {
  Rng rng(1);
  MarketData data = random_data(10, 3, rng);
  data.panel.member(4, 2) = false;
  const Strategy naive = [](const DecisionContext& ctx) {
    return ewp_weights(ctx.assets()).values();
  };
  try {
    run_backtest(naive, data, {});
    FAIL() << "expected MembershipError";
  } catch (const MembershipError& e) {
    EXPECT_EQ(e.date(), data.panel.dates[4]);
    EXPECT_EQ(e.asset(), 2u);
  }
  const WealthSeries s = run_backtest(ewp_strategy(), data, {});
  EXPECT_EQ(s.periods(), 10);
}

TEST(Backtest, TargetsMustBeOnSimplex) {
  Rng rng(1);
  const MarketData data = random_data(5, 2, rng);
  Eigen::MatrixXd t = Eigen::MatrixXd::Constant(5, 2, 0.5);
  t(2, 0) = 0.6;
  EXPECT_THROW(run_backtest(t, data, {}), std::domain_error);
  t(2, 0) = 1.5;
  t(2, 1) = -0.5;
  EXPECT_THROW(run_backtest(t, data, {}), std::domain_error);
}

TEST(Backtest, TotalLossIsBankruptcy) {
  Eigen::MatrixXd r(3, 2);
  r << 0.0, 0.0, -1.0, -1.0, 0.1, 0.1;
  const WealthSeries s =
      run_backtest(ewp_strategy(), make_data(r, Eigen::Vector2d(1, 1)), frictionless());
  EXPECT_TRUE(s.bankrupt);
  EXPECT_EQ(s.terminal(), 0.0);
}

TEST(Backtest, MarketStrategyFollowsCaps) {
  Rng rng(9);
  const MarketData data = random_data(40, 4, rng);
  const WealthSeries s = run_backtest(market_strategy(), data, frictionless());
  // Buy and hold: wealth tracks total capitalization and turnover is zero.
  const Eigen::MatrixXd& caps = data.characteristics.at(kCapCharacteristic);
  const double growth = (caps.row(39).array() * (1.0 + data.panel.returns.row(39).array())).sum() /
                        caps.row(0).sum();
  EXPECT_NEAR(s.terminal(), growth, 1e-12);
  for (double x : s.turnover) EXPECT_LT(x, 1e-14);
}

TEST(Backtest, MapStrategyOnLogWeightsIsDwp) {
  Rng rng(10);
  const MarketData data = random_data(30, 6, rng);
  const auto f = [](const Eigen::VectorXd& z) { return -1.3 * z[0]; };
  const WealthSeries a = run_backtest(map_strategy(f, {kLogMarketWeight}), data, {});
  const WealthSeries b = run_backtest(dwp_strategy(-1.3), data, {});
  EXPECT_NEAR(a.terminal(), b.terminal(), 1e-13);
}

TEST(Backtest, NetReturnsAndSharpePerformance) {
  Rng rng(12);
  const MarketData data = random_data(100, 5, rng);
  BacktestConfig c;
  const WealthSeries s = run_backtest(dwp_strategy(0.5), data, c);
  const std::vector<double> net = net_returns(s);
  ASSERT_EQ(net.size(), 100u);
  EXPECT_NEAR(net[10], s.wealth[11] / s.wealth[10] - 1.0, 1e-16);
  const SharpePerformance perf(data, c);
  EXPECT_DOUBLE_EQ(perf(dwp_strategy(0.5)), sharpe_ratio(net, 252));
  const ExcessReturnPerformance er(data, c, ewp_strategy());
  EXPECT_DOUBLE_EQ(er(dwp_strategy(0.5)), s.terminal() - run_backtest(ewp_strategy(), data, c).terminal());
}

TEST(Backtest, WealthCsvRoundTrip) {
  Rng rng(13);
  const MarketData data = random_data(25, 3, rng);
  const WealthSeries s = run_backtest(dwp_strategy(-2.0), data, {});
  std::stringstream io;
  write_wealth_csv(io, s);
  const WealthSeries back = read_wealth_csv(io);
  EXPECT_EQ(back.wealth, s.wealth);
  EXPECT_EQ(back.returns, s.returns);
  EXPECT_EQ(back.turnover, s.turnover);
  EXPECT_EQ(back.costs, s.costs);
  EXPECT_EQ(back.dates, s.dates);
  EXPECT_EQ(back.origin_date, s.origin_date);
  EXPECT_EQ(back.initial_cost, s.initial_cost);
}

TEST(Backtest, SliceKeepsInformationSet) {
  Rng rng(14);
  const MarketData data = random_data(30, 3, rng);
  const MarketData part = data.slice(10, 20);
  EXPECT_EQ(part.days(), 10);
  EXPECT_EQ(part.origin_date, data.panel.dates[9]);
  EXPECT_EQ(part.characteristics.at(kCapCharacteristic).row(0),
            data.characteristics.at(kCapCharacteristic).row(10));
}

TEST(Backtest, WealthFallsWithCostRate) {
  Rng rng(31);
  for (int trial = 0; trial < 20; ++trial) {
    const MarketData data = random_data(120, 8, rng);
    const double p = rng.uniform(-2.0, 2.0);
    double previous = std::numeric_limits<double>::infinity();
    for (double tc : {0.0, 0.0005, 0.001, 0.002, 0.01}) {
      BacktestConfig c;
      c.tc_rate = tc;
      const double v = run_backtest(dwp_strategy(p), data, c).terminal();
      EXPECT_LE(v, previous) << "tc " << tc;
      previous = v;
    }
  }
}

TEST(Backtest, SharpeIgnoresPositiveScaling) {
  Rng rng(32);
  std::vector<double> r(300);
  for (double& v : r) v = 0.01 * rng.normal() + 0.001;
  const double base = sharpe_ratio(r, 252);
  for (int e : {-5, 1, 3}) {
    std::vector<double> scaled = r;
    for (double& v : scaled) v = std::ldexp(v, e);
    EXPECT_EQ(sharpe_ratio(scaled, 252), base) << e;
  }
}
