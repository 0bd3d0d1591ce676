#pragma once

#include "spt/market_model.hpp"
#include "spt/portfolios.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <iosfwd>
#include <vector>

namespace spt {

/// Discrete evaluation of both sides of the master equation
///   log(V^pi(T) / V^mu(T)) = log(G(T) / G(0)) + int g dt - int D log H dF.
struct MasterDecomposition {
  double lhs = 0.0;                 ///< log relative wealth, discrete compounding
  double g_term = 0.0;              ///< log G(mu(T)) - log G(mu(0))
  double drift_integral = 0.0;      ///< trapezoidal integral of the drift process
  double covariate_integral = 0.0;  ///< left-point Stieltjes sum; 0 in the classic case
  double residual = 0.0;            ///< lhs - (g_term + drift_integral - covariate_integral)
  std::vector<double> drift;        ///< drift process at each grid time
};

/// Covariate process F on the market's time grid.
struct FiniteVariationPath {
  std::vector<double> times;
  Eigen::MatrixXd values;  ///< (M+1) x k

  /// sum_t |F_l(t+1) - F_l(t)| per component.
  [[nodiscard]] Eigen::VectorXd total_variation() const;
};

/// g = -sum_ij D_ij G / (2 G) mu_i mu_j tau_ij.
double drift_process(const GeneratingFunction& g, const Eigen::VectorXd& mu,
                     const RelativeCovariance& tau);

/// Same expression for an extended generating function at x = (mu, F).
double extended_drift_process(const ExtendedGeneratingFunction& h,
                              const Eigen::VectorXd& mu, const Eigen::VectorXd& covariates,
                              const RelativeCovariance& tau);

/// Classic master equation along a path simulated with `volatility`.
/// A NotLongOnlyError from the weight rule is rethrown naming the step.
MasterDecomposition verify_master(const GeneratingFunction& g, const MarketPath& path,
                                  const Eigen::MatrixXd& volatility);

/// Extended master equation; F must share the path's time grid.
MasterDecomposition verify_extended_master(const ExtendedGeneratingFunction& h,
                                           const MarketPath& path,
                                           const FiniteVariationPath& covariates,
                                           const Eigen::MatrixXd& volatility);

struct ConvergenceLevel {
  double dt = 0.0;
  MasterDecomposition decomposition;
};

/// Self-convergence study: simulates the finest grid once and aggregates its
/// Brownian increments for each coarser level. `factors` are coarsening
/// factors relative to `finest_dt` (1 = finest), returned in the given order.
std::vector<ConvergenceLevel> master_convergence(const GeneratingFunction& g,
                                                 const MarketParams& params,
                                                 double horizon, double finest_dt,
                                                 const std::vector<Eigen::Index>& factors,
                                                 std::uint64_t seed);

/// Rows `dt,lhs,g_term,drift_integral,covariate_integral,residual`.
void write_decomposition_csv(std::ostream& out, const std::vector<ConvergenceLevel>& rows);

}  // namespace spt
