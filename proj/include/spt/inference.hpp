#pragma once

#include "spt/backtest.hpp"
#include "spt/rng.hpp"

#include <json.hpp>

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

namespace spt {

/// Gamma likelihood on a performance value, parameterized by mean a and
/// standard deviation b.
class GammaLikelihood {
 public:
  GammaLikelihood(double mean, double sd);

  [[nodiscard]] double mean() const { return a_; }
  [[nodiscard]] double sd() const { return b_; }
  /// k = (a / b)^2
  [[nodiscard]] double shape() const { return (a_ / b_) * (a_ / b_); }
  /// theta = b^2 / a
  [[nodiscard]] double scale() const { return b_ * b_ / a_; }
  /// (k - 1) theta = a - b^2 / a when k > 1, else 0.
  [[nodiscard]] double mode() const;

 private:
  double a_;
  double b_;
};

/// log Gamma(k, theta) density; -inf for x <= 0.
double gamma_log_density(double x, const GammaLikelihood& lik);

/// Performance of DWP(p) on fixed data.
using ExponentObjective = std::function<double(double)>;

/// Target matrix of DWP(p) over the panel (same weights as dwp_strategy).
Eigen::MatrixXd dwp_targets(const MarketData& data, double p);

/// Objective p -> perf(DWP(p)) built from a target-matrix performance.
ExponentObjective dwp_objective(const MarketData& data, TargetPerformance perf);

struct GridSearchConfig {
  double lo = -8.0;
  double hi = 8.0;
  double mesh = 0.05;

  void validate() const;
};

struct GridPoint {
  double p = 0.0;
  double perf = 0.0;
  bool ok = false;
  std::string error;  ///< message of the failed evaluation, empty when ok
};

struct GridSearchResult {
  double p_star = 0.0;
  double best = 0.0;
  std::vector<GridPoint> points;
  [[nodiscard]] std::size_t evaluations() const { return points.size(); }
  [[nodiscard]] std::size_t failures() const;
};

/// lo + k (hi - lo) / K for k = 0..K, K = round((hi - lo) / mesh).
std::vector<double> exponent_grid(const GridSearchConfig& config);

/// Exhaustive maximization over the grid. Failing points are recorded and
/// skipped; values within 1e-12 (relative) of the best count as ties and
/// resolve toward smaller |p|. Throws NoFeasiblePointError if all fail.
GridSearchResult grid_search(const ExponentObjective& objective,
                             const GridSearchConfig& config = {});

GridSearchResult grid_search_dwp(const MarketData& data, const TargetPerformance& perf,
                                 const GridSearchConfig& config = {});

struct ChainConfig {
  int iterations = 10000;
  int burn_in = 5000;
  double proposal_std = 0.5;
  double lo = -8.0;
  double hi = 8.0;
  double initial_p = 0.0;

  void validate() const;
};

struct ExponentChain {
  ChainConfig config;
  std::vector<double> trace;        ///< p after every iteration
  std::vector<double> log_lik;      ///< log-likelihood of trace[i]
  std::vector<bool> accepted;       ///< whether iteration i moved
  std::vector<double> samples;      ///< retained draws (after burn-in)
  int accept_count = 0;             ///< acceptances among retained iterations
  std::size_t likelihood_evaluations = 0;

  [[nodiscard]] double acceptance_rate() const;
  [[nodiscard]] double posterior_mean() const;
  [[nodiscard]] double posterior_sd() const;
};

/// Metropolis acceptance in log space: accept iff the proposal is inside the
/// support and log u < log_prop - log_cur.
bool mh_accept(double log_cur, double log_prop, bool in_support, Rng& rng);

/// min(1, exp(log_prop - log_cur)) times the support indicator.
double mh_acceptance_probability(double log_cur, double log_prop, bool in_support);

/// Random-walk Metropolis on [lo, hi] for an arbitrary log target. Evaluations
/// are memoized on p quantized at 1e-9.
ExponentChain mh_sample(const ExponentObjective& log_target, const ChainConfig& config,
                        std::uint64_t seed);

/// Posterior of the DWP exponent under lik(perf(DWP(p))) with a uniform prior.
ExponentChain mh_sample_dwp(const MarketData& data, const TargetPerformance& perf,
                            const GammaLikelihood& lik, const ChainConfig& config,
                            std::uint64_t seed);

/// First point of 0, +step, -step, +2 step, ... inside [lo, hi] with finite
/// log target. Throws InitializationError when none is found.
double feasible_start(const ExponentObjective& log_target, double lo, double hi,
                      double step = 0.5);

/// Standard error of the mean from `batches` non-overlapping batch means.
double batch_means_se(const std::vector<double>& samples, int batches = 50);

/// Rows `iter,p,log_lik,accepted`.
void write_chain_csv(std::ostream& out, const ExponentChain& chain);
nlohmann::json chain_summary(const ExponentChain& chain);

}  // namespace spt
