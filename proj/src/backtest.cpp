#include "spt/backtest.hpp"

#include "spt/csv.hpp"
#include "spt/errors.hpp"
#include "spt/portfolios.hpp"

#include <cmath>
#include <istream>
#include <numeric>
#include <ostream>
#include <stdexcept>
#include <string>

namespace spt {

namespace {

constexpr double kSumTol = 1e-12;

std::vector<Eigen::Index> member_indices(const Eigen::Array<bool, Eigen::Dynamic, 1>& members) {
  std::vector<Eigen::Index> idx;
  for (Eigen::Index i = 0; i < members.size(); ++i) {
    if (members[i]) idx.push_back(i);
  }
  return idx;
}

Eigen::VectorXd scatter(const Eigen::VectorXd& values, const std::vector<Eigen::Index>& idx,
                        Eigen::Index n) {
  Eigen::VectorXd out = Eigen::VectorXd::Zero(n);
  for (std::size_t k = 0; k < idx.size(); ++k) out[idx[k]] = values[static_cast<Eigen::Index>(k)];
  return out;
}

void check_target(const Eigen::Ref<const Eigen::VectorXd>& w, const ReturnsPanel& panel,
                  Eigen::Index day) {
  if (w.size() != panel.assets()) {
    throw std::invalid_argument("target on " + panel.dates[static_cast<std::size_t>(day)] +
                                " has the wrong length");
  }
  double total = 0.0;
  for (Eigen::Index i = 0; i < w.size(); ++i) {
    if (!(w[i] >= 0.0) || !std::isfinite(w[i])) {
      throw std::domain_error("target weight of " + panel.asset_ids[static_cast<std::size_t>(i)] +
                              " on " + panel.dates[static_cast<std::size_t>(day)] +
                              " is negative or not finite");
    }
    if (w[i] > 0.0 && !panel.member(day, i)) {
      throw MembershipError("weight on non-member " +
                                panel.asset_ids[static_cast<std::size_t>(i)] + " on " +
                                panel.dates[static_cast<std::size_t>(day)],
                            panel.dates[static_cast<std::size_t>(day)],
                            static_cast<std::size_t>(i));
    }
    total += w[i];
  }
  if (std::abs(total - 1.0) > kSumTol) {
    throw std::domain_error("target weights on " + panel.dates[static_cast<std::size_t>(day)] +
                            " sum to " + std::to_string(total));
  }
}

}  // namespace

void ReturnsPanel::validate() const {
  const Eigen::Index t = days();
  const Eigen::Index n = assets();
  if (static_cast<Eigen::Index>(dates.size()) != t) throw DataError("panel dates and rows differ");
  if (static_cast<Eigen::Index>(asset_ids.size()) != n) {
    throw DataError("panel asset ids and columns differ");
  }
  if (member.rows() != t || member.cols() != n) throw DataError("membership shape differs");
  for (std::size_t k = 1; k < dates.size(); ++k) {
    if (!(dates[k - 1] < dates[k])) {
      throw DataError("panel dates must be strictly increasing at " + dates[k]);
    }
  }
  for (Eigen::Index d = 0; d < t; ++d) {
    for (Eigen::Index i = 0; i < n; ++i) {
      if (!member(d, i)) continue;
      const double r = returns(d, i);
      if (!std::isfinite(r) || r < -1.0) {
        throw DataError("invalid return for " + asset_ids[static_cast<std::size_t>(i)] +
                        " on " + dates[static_cast<std::size_t>(d)]);
      }
    }
  }
}

bool MarketData::has(const std::string& name) const {
  return name == kLogMarketWeight ? characteristics.contains(kCapCharacteristic)
                                  : characteristics.contains(name);
}

MarketData MarketData::slice(Eigen::Index begin, Eigen::Index end) const {
  if (begin < 0 || end > days() || begin >= end) {
    throw std::invalid_argument("invalid day range for slice");
  }
  MarketData out;
  const auto b = static_cast<std::size_t>(begin);
  const auto e = static_cast<std::size_t>(end);
  out.panel.dates.assign(panel.dates.begin() + static_cast<std::ptrdiff_t>(b),
                         panel.dates.begin() + static_cast<std::ptrdiff_t>(e));
  out.panel.asset_ids = panel.asset_ids;
  out.panel.returns = panel.returns.middleRows(begin, end - begin);
  out.panel.member = panel.member.middleRows(begin, end - begin);
  out.origin_date = begin == 0 ? origin_date : panel.dates[b - 1];
  for (const auto& [name, values] : characteristics) {
    out.characteristics[name] = values.middleRows(begin, end - begin);
  }
  return out;
}

void MarketData::validate() const {
  panel.validate();
  for (const auto& [name, values] : characteristics) {
    if (values.rows() != days() || values.cols() != assets()) {
      throw DataError("characteristic '" + name + "' has the wrong shape");
    }
    for (Eigen::Index d = 0; d < days(); ++d) {
      for (Eigen::Index i = 0; i < assets(); ++i) {
        if (panel.member(d, i) && !std::isfinite(values(d, i))) {
          throw DataError("characteristic '" + name + "' unknown for " +
                          panel.asset_ids[static_cast<std::size_t>(i)] + " before " +
                          panel.dates[static_cast<std::size_t>(d)]);
        }
      }
    }
  }
  if (const auto it = characteristics.find(kCapCharacteristic); it != characteristics.end()) {
    for (Eigen::Index d = 0; d < days(); ++d) {
      for (Eigen::Index i = 0; i < assets(); ++i) {
        if (panel.member(d, i) && !(it->second(d, i) > 0.0)) {
          throw DataError("non-positive capitalization for " +
                          panel.asset_ids[static_cast<std::size_t>(i)]);
        }
      }
    }
  }
}

DecisionContext::DecisionContext(const MarketData& data, Eigen::Index day)
    : data_(data), day_(day) {
  if (day < 0 || day >= data.days()) throw std::out_of_range("decision day outside the panel");
}

const std::string& DecisionContext::date() const {
  return data_.panel.dates[static_cast<std::size_t>(day_)];
}

Eigen::Array<bool, Eigen::Dynamic, 1> DecisionContext::members() const {
  return data_.panel.member.row(day_).transpose();
}

Eigen::VectorXd DecisionContext::characteristic(const std::string& name) const {
  return characteristic(name, day_);
}

Eigen::VectorXd DecisionContext::characteristic(const std::string& name,
                                                Eigen::Index as_of) const {
  if (as_of > day_) {
    throw LookAheadError("decision for " + date() + " requested '" + name +
                         "' as of a later day");
  }
  if (as_of < 0) throw std::out_of_range("characteristic requested before the panel start");
  if (name == kLogMarketWeight) {
    const auto members_row = data_.panel.member.row(as_of);
    const auto it = data_.characteristics.find(kCapCharacteristic);
    if (it == data_.characteristics.end()) throw DataError("panel has no 'cap' characteristic");
    double total = 0.0;
    for (Eigen::Index i = 0; i < assets(); ++i) {
      if (members_row(i)) total += it->second(as_of, i);
    }
    Eigen::VectorXd out = Eigen::VectorXd::Constant(assets(), std::nan(""));
    for (Eigen::Index i = 0; i < assets(); ++i) {
      if (members_row(i)) out[i] = std::log(it->second(as_of, i) / total);
    }
    return out;
  }
  const auto it = data_.characteristics.find(name);
  if (it == data_.characteristics.end()) {
    throw DataError("panel has no characteristic '" + name + "'");
  }
  return it->second.row(as_of).transpose();
}

Eigen::VectorXd DecisionContext::past_returns(Eigen::Index d) const {
  if (d >= day_) {
    throw LookAheadError("decision for " + date() + " requested returns of day " +
                         std::to_string(d));
  }
  if (d < 0) throw std::out_of_range("returns requested before the panel start");
  return data_.panel.returns.row(d).transpose();
}

Eigen::VectorXd DecisionContext::market_weights() const {
  const auto idx = member_indices(members());
  if (idx.empty()) throw DataError("empty universe on " + date());
  const Eigen::VectorXd caps = characteristic(kCapCharacteristic);
  Eigen::VectorXd sub(static_cast<Eigen::Index>(idx.size()));
  for (std::size_t k = 0; k < idx.size(); ++k) sub[static_cast<Eigen::Index>(k)] = caps[idx[k]];
  return scatter(sub / sub.sum(), idx, assets());
}

Strategy ewp_strategy() {
  return [](const DecisionContext& ctx) {
    const auto idx = member_indices(ctx.members());
    if (idx.empty()) throw DataError("empty universe on " + ctx.date());
    return scatter(ewp_weights(static_cast<Eigen::Index>(idx.size())).values(), idx,
                   ctx.assets());
  };
}

Strategy market_strategy() {
  return [](const DecisionContext& ctx) { return ctx.market_weights(); };
}

Strategy dwp_strategy(double p) {
  return [p](const DecisionContext& ctx) {
    const auto idx = member_indices(ctx.members());
    const Eigen::VectorXd mu_full = ctx.market_weights();
    Eigen::VectorXd mu(static_cast<Eigen::Index>(idx.size()));
    for (std::size_t k = 0; k < idx.size(); ++k) mu[static_cast<Eigen::Index>(k)] = mu_full[idx[k]];
    return scatter(dwp_weights(mu, p).values(), idx, ctx.assets());
  };
}

Eigen::MatrixXd characteristic_rows(const DecisionContext& ctx,
                                    const std::vector<std::string>& names,
                                    const std::vector<Eigen::Index>& member_index) {
  Eigen::MatrixXd rows(static_cast<Eigen::Index>(member_index.size()),
                       static_cast<Eigen::Index>(names.size()));
  for (std::size_t c = 0; c < names.size(); ++c) {
    const Eigen::VectorXd values = ctx.characteristic(names[c]);
    for (std::size_t k = 0; k < member_index.size(); ++k) {
      rows(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(c)) = values[member_index[k]];
    }
  }
  return rows;
}

Strategy map_strategy(std::function<double(const Eigen::VectorXd&)> f_log,
                      std::vector<std::string> characteristic_names) {
  return [f_log = std::move(f_log), names = std::move(characteristic_names)](
             const DecisionContext& ctx) {
    const auto idx = member_indices(ctx.members());
    if (idx.empty()) throw DataError("empty universe on " + ctx.date());
    const Eigen::MatrixXd rows = characteristic_rows(ctx, names, idx);
    return scatter(map_portfolio(f_log, rows).values(), idx, ctx.assets());
  };
}

void BacktestConfig::validate() const {
  if (!(tc_rate >= 0.0) || !std::isfinite(tc_rate)) {
    throw std::invalid_argument("transaction cost rate must be nonnegative");
  }
  if (periods_per_year < 1) throw std::invalid_argument("periods per year must be >= 1");
  if (!(initial_wealth > 0.0)) throw std::invalid_argument("initial wealth must be positive");
}

Eigen::MatrixXd strategy_targets(const Strategy& strategy, const MarketData& data) {
  Eigen::MatrixXd targets(data.days(), data.assets());
  for (Eigen::Index d = 0; d < data.days(); ++d) {
    const Eigen::VectorXd w = strategy(DecisionContext(data, d));
    check_target(w, data.panel, d);
    targets.row(d) = w.transpose();
  }
  return targets;
}

WealthSeries run_backtest(const Strategy& strategy, const MarketData& data,
                          const BacktestConfig& config) {
  return run_backtest(strategy_targets(strategy, data), data, config);
}

WealthSeries run_backtest(const Eigen::MatrixXd& targets, const MarketData& data,
                          const BacktestConfig& config) {
  config.validate();
  const ReturnsPanel& panel = data.panel;
  const Eigen::Index days = panel.days();
  const Eigen::Index n = panel.assets();
  if (days < 1) throw std::invalid_argument("backtest needs at least one day");
  if (targets.rows() != days || targets.cols() != n) {
    throw std::invalid_argument("target matrix shape differs from the panel");
  }

  WealthSeries out;
  out.origin_date = data.origin_date;
  out.wealth.reserve(static_cast<std::size_t>(days + 1));
  out.wealth.push_back(config.initial_wealth);

  check_target(targets.row(0).transpose(), panel, 0);
  out.initial_turnover = config.charge_initial ? targets.row(0).sum() : 0.0;
  out.initial_cost = config.tc_rate * out.initial_turnover * config.initial_wealth;
  double wealth = config.initial_wealth - out.initial_cost;

  Eigen::VectorXd drifted(n);
  for (Eigen::Index d = 0; d < days; ++d) {
    const auto w = targets.row(d);
    double gross = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      if (w[i] > 0.0) gross += w[i] * panel.returns(d, i);
    }
    out.dates.push_back(panel.dates[static_cast<std::size_t>(d)]);
    out.returns.push_back(gross);
    const double pre_cost = wealth * (1.0 + gross);
    if (!(1.0 + gross > 0.0) || !(pre_cost > 0.0)) {
      out.turnover.push_back(0.0);
      out.costs.push_back(0.0);
      out.wealth.push_back(0.0);
      out.bankrupt = true;
      break;
    }
    double turnover = 0.0;
    if (d + 1 < days) {
      for (Eigen::Index i = 0; i < n; ++i) {
        drifted[i] = w[i] > 0.0 ? w[i] * (1.0 + panel.returns(d, i)) / (1.0 + gross) : 0.0;
      }
      const auto next = targets.row(d + 1);
      check_target(next.transpose(), panel, d + 1);
      for (Eigen::Index i = 0; i < n; ++i) turnover += std::abs(next[i] - drifted[i]);
    }
    const double cost = config.tc_rate * turnover * pre_cost;
    wealth = pre_cost - cost;
    out.turnover.push_back(turnover);
    out.costs.push_back(cost);
    if (!(wealth > 0.0)) {
      out.wealth.push_back(0.0);
      out.bankrupt = true;
      break;
    }
    out.wealth.push_back(wealth);
  }
  return out;
}

double sharpe_ratio(std::span<const double> returns, int periods_per_year) {
  if (returns.size() < 2) throw std::invalid_argument("Sharpe ratio needs at least two returns");
  if (periods_per_year < 1) throw std::invalid_argument("periods per year must be >= 1");
  const auto t = static_cast<double>(returns.size());
  const double mean = std::accumulate(returns.begin(), returns.end(), 0.0) / t;
  double ss = 0.0;
  bool constant = true;
  for (const double r : returns) {
    ss += (r - mean) * (r - mean);
    constant = constant && r == returns.front();
  }
  if (constant || ss == 0.0) throw UndefinedSharpeError("zero sample standard deviation");
  const double sd = std::sqrt(ss / (t - 1.0));
  return std::sqrt(static_cast<double>(periods_per_year)) * mean / sd;
}

double excess_return(const Strategy& candidate, const Strategy& benchmark,
                     const MarketData& data, const BacktestConfig& config) {
  return run_backtest(candidate, data, config).terminal() -
         run_backtest(benchmark, data, config).terminal();
}

double annualize_return(const WealthSeries& series, int periods_per_year) {
  if (series.periods() < 1) throw std::invalid_argument("annualized return needs T >= 1");
  if (!(series.terminal() > 0.0)) throw std::domain_error("terminal wealth is not positive");
  const double growth = series.terminal() / series.wealth.front();
  return std::pow(growth, static_cast<double>(periods_per_year) /
                              static_cast<double>(series.periods())) -
         1.0;
}

std::vector<double> net_returns(const WealthSeries& series) {
  std::vector<double> out;
  out.reserve(series.returns.size());
  for (std::size_t t = 1; t < series.wealth.size(); ++t) {
    out.push_back(series.wealth[t] / series.wealth[t - 1] - 1.0);
  }
  return out;
}

ExcessReturnPerformance::ExcessReturnPerformance(const MarketData& data_in,
                                                 BacktestConfig config_in,
                                                 const Strategy& benchmark)
    : data(&data_in),
      config(config_in),
      benchmark_terminal(run_backtest(benchmark, data_in, config_in).terminal()) {}

double ExcessReturnPerformance::operator()(const Strategy& s) const {
  return run_backtest(s, *data, config).terminal() - benchmark_terminal;
}

double ExcessReturnPerformance::operator()(const Eigen::MatrixXd& targets) const {
  return run_backtest(targets, *data, config).terminal() - benchmark_terminal;
}

SharpePerformance::SharpePerformance(const MarketData& data_in, BacktestConfig config_in)
    : data(&data_in), config(config_in) {}

double SharpePerformance::operator()(const Strategy& s) const {
  return sharpe_ratio(net_returns(run_backtest(s, *data, config)), config.periods_per_year);
}

double SharpePerformance::operator()(const Eigen::MatrixXd& targets) const {
  return sharpe_ratio(net_returns(run_backtest(targets, *data, config)),
                      config.periods_per_year);
}

void write_wealth_csv(std::ostream& out, const WealthSeries& series) {
  out << "date,wealth,return,turnover,cost\n";
  out << series.origin_date << ',' << csv::format_double(series.wealth.front()) << ",0,"
      << csv::format_double(series.initial_turnover) << ','
      << csv::format_double(series.initial_cost) << '\n';
  for (std::size_t t = 0; t < series.returns.size(); ++t) {
    out << series.dates[t] << ',' << csv::format_double(series.wealth[t + 1]) << ','
        << csv::format_double(series.returns[t]) << ','
        << csv::format_double(series.turnover[t]) << ','
        << csv::format_double(series.costs[t]) << '\n';
  }
}

WealthSeries read_wealth_csv(std::istream& in) {
  csv::Reader reader(in);
  std::string line;
  if (!reader.next(line)) throw DataError("wealth CSV is empty");
  const auto header = csv::split(line);
  const std::size_t c_date = csv::column(header, "date");
  const std::size_t c_wealth = csv::column(header, "wealth");
  const std::size_t c_ret = csv::column(header, "return");
  const std::size_t c_turn = csv::column(header, "turnover");
  const std::size_t c_cost = csv::column(header, "cost");
  WealthSeries series;
  bool first = true;
  while (reader.next(line)) {
    const auto f = csv::split(line);
    if (f.size() != header.size()) {
      throw DataError("line " + std::to_string(reader.line_number()) + ": wrong field count");
    }
    const std::size_t ln = reader.line_number();
    if (first) {
      series.origin_date = std::string(f[c_date]);
      series.wealth.push_back(csv::parse_double(f[c_wealth], ln));
      series.initial_turnover = csv::parse_double(f[c_turn], ln);
      series.initial_cost = csv::parse_double(f[c_cost], ln);
      first = false;
      continue;
    }
    series.dates.emplace_back(f[c_date]);
    series.wealth.push_back(csv::parse_double(f[c_wealth], ln));
    series.returns.push_back(csv::parse_double(f[c_ret], ln));
    series.turnover.push_back(csv::parse_double(f[c_turn], ln));
    series.costs.push_back(csv::parse_double(f[c_cost], ln));
  }
  if (first) throw DataError("wealth CSV has no origin row");
  series.bankrupt = !(series.wealth.back() > 0.0);
  return series;
}

}  // namespace spt
