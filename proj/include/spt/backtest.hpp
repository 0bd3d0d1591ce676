#pragma once

#include <Eigen/Dense>

#include <functional>
#include <iosfwd>
#include <map>
#include <span>
#include <string>
#include <vector>

namespace spt {

using MembershipMatrix = Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic>;

/// Simple per-period returns of n assets over T trading days.
struct ReturnsPanel {
  std::vector<std::string> dates;      ///< T ordered trading days
  std::vector<std::string> asset_ids;  ///< n identifiers
  Eigen::MatrixXd returns;             ///< T x n; entries of non-members are ignored
  MembershipMatrix member;             ///< T x n

  [[nodiscard]] Eigen::Index days() const { return returns.rows(); }
  [[nodiscard]] Eigen::Index assets() const { return returns.cols(); }

  /// Shapes agree, dates strictly increase, member returns are >= -1 and finite.
  void validate() const;
};

/// Name of the capitalization characteristic used by market-weight strategies.
inline constexpr const char* kCapCharacteristic = "cap";
/// Derived characteristic: log of the market weight among the day's members.
inline constexpr const char* kLogMarketWeight = "log_market_weight";

/// A returns panel together with the information available before each day.
///
/// Row t of every characteristic matrix holds the value known at the close
/// preceding dates[t], i.e. the information a decision for day t may use.
struct MarketData {
  ReturnsPanel panel;
  std::string origin_date;  ///< close preceding dates[0]
  std::map<std::string, Eigen::MatrixXd> characteristics;

  [[nodiscard]] Eigen::Index days() const { return panel.days(); }
  [[nodiscard]] Eigen::Index assets() const { return panel.assets(); }
  [[nodiscard]] bool has(const std::string& name) const;

  /// Days [begin, end). The origin date of the slice is dates[begin - 1].
  [[nodiscard]] MarketData slice(Eigen::Index begin, Eigen::Index end) const;

  void validate() const;
};

/// Read-only view of the information set for the decision taken before day t.
/// Requests for anything dated at or after day t raise LookAheadError.
class DecisionContext {
 public:
  DecisionContext(const MarketData& data, Eigen::Index day);

  [[nodiscard]] Eigen::Index day() const { return day_; }
  [[nodiscard]] Eigen::Index assets() const { return data_.assets(); }
  [[nodiscard]] const std::string& date() const;

  /// Universe for day t (known on the previous day).
  [[nodiscard]] Eigen::Array<bool, Eigen::Dynamic, 1> members() const;

  /// Characteristic row known before day t.
  [[nodiscard]] Eigen::VectorXd characteristic(const std::string& name) const;
  /// Characteristic row known before day `as_of`; as_of > t is look-ahead.
  [[nodiscard]] Eigen::VectorXd characteristic(const std::string& name,
                                               Eigen::Index as_of) const;
  /// Realized returns of an earlier day; d >= t is look-ahead.
  [[nodiscard]] Eigen::VectorXd past_returns(Eigen::Index d) const;

  /// Market weights over the day's members (zero elsewhere).
  [[nodiscard]] Eigen::VectorXd market_weights() const;

 private:
  const MarketData& data_;
  Eigen::Index day_;
};

/// Target weights (length n, zero off the universe) for day t.
using Strategy = std::function<Eigen::VectorXd(const DecisionContext&)>;

Strategy ewp_strategy();
Strategy market_strategy();
Strategy dwp_strategy(double p);
/// Weights proportional to exp(f_log(x_i)) over members, x_i built from the
/// named characteristics (kLogMarketWeight is derived from caps).
Strategy map_strategy(std::function<double(const Eigen::VectorXd&)> f_log,
                      std::vector<std::string> characteristic_names);

/// Member-by-characteristic matrix for one decision (rows in member order).
Eigen::MatrixXd characteristic_rows(const DecisionContext& ctx,
                                    const std::vector<std::string>& names,
                                    const std::vector<Eigen::Index>& member_index);

struct BacktestConfig {
  double tc_rate = 0.001;      ///< cost per unit of traded notional
  int periods_per_year = 252;  ///< B
  double initial_wealth = 1.0;
  bool charge_initial = true;  ///< charge the move from cash into the first target

  void validate() const;
};

struct WealthSeries {
  std::vector<std::string> dates;  ///< days actually traded
  std::string origin_date;
  std::vector<double> wealth;      ///< T+1 values, wealth[0] = initial wealth
  std::vector<double> returns;     ///< gross portfolio return r(t)
  std::vector<double> turnover;    ///< sum |next target - drifted weights| after day t
  std::vector<double> costs;       ///< tc_rate * turnover * pre-cost wealth
  double initial_turnover = 0.0;
  double initial_cost = 0.0;
  bool bankrupt = false;

  [[nodiscard]] double terminal() const { return wealth.back(); }
  [[nodiscard]] Eigen::Index periods() const {
    return static_cast<Eigen::Index>(returns.size());
  }
};

/// Runs a strategy: the target for day t uses information before day t, the
/// day's return accrues, then the book is rebalanced into the next target
/// and charged tc_rate on the traded notional.
WealthSeries run_backtest(const Strategy& strategy, const MarketData& data,
                          const BacktestConfig& config);

/// Same accounting with precomputed targets (row t = target for day t).
WealthSeries run_backtest(const Eigen::MatrixXd& targets, const MarketData& data,
                          const BacktestConfig& config);

/// Target matrix produced by a strategy over every day of `data`.
Eigen::MatrixXd strategy_targets(const Strategy& strategy, const MarketData& data);

/// sqrt(B) * mean / sample standard deviation (divisor T - 1).
double sharpe_ratio(std::span<const double> returns, int periods_per_year);

/// Terminal wealth of candidate minus that of benchmark.
double excess_return(const Strategy& candidate, const Strategy& benchmark,
                     const MarketData& data, const BacktestConfig& config);

/// (V(T) / V(0))^(B / T) - 1.
double annualize_return(const WealthSeries& series, int periods_per_year);

/// Maps a strategy to a scalar score on fixed data.
using Performance = std::function<double(const Strategy&)>;
/// Same score for precomputed target matrices (fast path for samplers).
using TargetPerformance = std::function<double(const Eigen::MatrixXd&)>;

/// Excess terminal wealth over a benchmark; the benchmark is run once.
struct ExcessReturnPerformance {
  ExcessReturnPerformance(const MarketData& data, BacktestConfig config,
                          const Strategy& benchmark);
  double operator()(const Strategy& s) const;
  double operator()(const Eigen::MatrixXd& targets) const;

  const MarketData* data;
  BacktestConfig config;
  double benchmark_terminal;
};

/// Annualized Sharpe ratio of the strategy's net daily returns.
struct SharpePerformance {
  SharpePerformance(const MarketData& data, BacktestConfig config);
  double operator()(const Strategy& s) const;
  double operator()(const Eigen::MatrixXd& targets) const;

  const MarketData* data;
  BacktestConfig config;
};

/// Net per-period returns V(t)/V(t-1) - 1 (after costs).
std::vector<double> net_returns(const WealthSeries& series);

/// Rows `date,wealth,return,turnover,cost`; the first row is the origin.
void write_wealth_csv(std::ostream& out, const WealthSeries& series);
WealthSeries read_wealth_csv(std::istream& in);

}  // namespace spt
