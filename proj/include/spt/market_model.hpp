#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

namespace spt {

/// Constant-coefficient Ito market: dX_i = X_i (b_i dt + sum_nu sigma_{i,nu} dW_nu).
struct MarketParams {
  Eigen::VectorXd drift;         ///< b, per year
  Eigen::MatrixXd volatility;    ///< sigma, n x d, per sqrt(year)
  Eigen::VectorXd initial_caps;  ///< X(0), strictly positive

  [[nodiscard]] Eigen::Index assets() const { return initial_caps.size(); }
  [[nodiscard]] Eigen::Index brownian_dim() const { return volatility.cols(); }

  /// Throws std::invalid_argument on shape mismatches, d < n or X(0) <= 0.
  void validate() const;

  /// n assets with common drift, sigma = vol * I and the given X(0).
  static MarketParams isotropic(const Eigen::VectorXd& initial_caps, double drift,
                                double vol);
};

/// Capitalizations and market weights on a time grid t_0 < ... < t_M.
struct MarketPath {
  std::vector<double> times;
  Eigen::MatrixXd caps;     ///< (M+1) x n
  Eigen::MatrixXd weights;  ///< (M+1) x n, each row on the unit simplex

  [[nodiscard]] Eigen::Index steps() const { return caps.rows() - 1; }
  [[nodiscard]] Eigen::Index assets() const { return caps.cols(); }

  /// Builds a path from capitalizations, recomputing the weights.
  static MarketPath from_caps(std::vector<double> times, Eigen::MatrixXd caps);
};

/// Symmetric n x n matrix of covariances measured relative to the market.
struct RelativeCovariance {
  Eigen::MatrixXd tau;
};

/// Time/state-dependent coefficients for the callback simulator.
struct Coefficients {
  Eigen::VectorXd drift;
  Eigen::MatrixXd volatility;
};
using CoefficientFn =
    std::function<Coefficients(double t, const Eigen::VectorXd& caps)>;

/// mu = caps / sum(caps). Throws std::domain_error on any entry <= 0.
Eigen::VectorXd market_weights(const Eigen::Ref<const Eigen::VectorXd>& caps);

/// Number of grid steps for a horizon: round(horizon / dt), at least one.
Eigen::Index step_count(double horizon, double dt);

/// Brownian increments dW (steps x d), each entry sqrt(dt) * Z.
///
/// Draw order: time-major, then Brownian coordinate nu = 1..d within a step.
Eigen::MatrixXd brownian_increments(Eigen::Index steps, Eigen::Index dim,
                                    double dt, std::uint64_t seed);

/// Sums consecutive blocks of `factor` rows, giving the increments of the
/// same Brownian path on a grid `factor` times coarser.
Eigen::MatrixXd coarsen_increments(const Eigen::MatrixXd& increments,
                                   Eigen::Index factor);

/// Exact log-space GBM recursion driven by the given increments:
/// log X(t+dt) = log X(t) + (b - sigma^2 / 2) dt + sigma dW.
MarketPath simulate_market(const MarketParams& params, double dt,
                           const Eigen::MatrixXd& increments);

/// Seeded simulation over [0, horizon].
MarketPath simulate_market(const MarketParams& params, double horizon,
                           double dt, std::uint64_t seed);

/// Callback-coefficient simulation (left-point coefficients per step).
/// The integrability condition is not checked for callback coefficients.
MarketPath simulate_market(const CoefficientFn& coefficients,
                           const Eigen::VectorXd& initial_caps,
                           Eigen::Index brownian_dim, double horizon, double dt,
                           std::uint64_t seed);

/// True iff every market weight on the path stays below 1 - delta.
bool check_diversity(const MarketPath& path, double delta);

/// True iff the smallest eigenvalue of sigma sigma^T is at least epsilon.
bool check_nondegeneracy(const Eigen::MatrixXd& volatility, double epsilon);

/// Smallest eigenvalue of sigma sigma^T.
double min_covariance_eigenvalue(const Eigen::MatrixXd& volatility);

/// tau_ij = (mu - e_i)^T sigma sigma^T (mu - e_j).
RelativeCovariance relative_covariance(const Eigen::MatrixXd& volatility,
                                       const Eigen::Ref<const Eigen::VectorXd>& mu);

/// Same quantity from a precomputed covariance a = sigma sigma^T.
RelativeCovariance relative_covariance_from_cov(
    const Eigen::MatrixXd& covariance, const Eigen::Ref<const Eigen::VectorXd>& mu);

/// Horizon beyond which the diversity-weighted portfolio with exponent p in
/// (0, 1) is a relative arbitrage: 2 log(n) / (epsilon delta p).
/// `n` is real-valued so the unit case n = e can be expressed.
double arbitrage_horizon_bound(double n, double epsilon, double delta, double p);

/// CSV with header `t,asset_1,...,asset_n`; capitalizations only.
void write_market_csv(std::ostream& out, const MarketPath& path);
MarketPath read_market_csv(std::istream& in);

}  // namespace spt
