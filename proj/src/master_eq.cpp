#include "spt/master_eq.hpp"

#include "spt/csv.hpp"
#include "spt/errors.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <stdexcept>
#include <string>

namespace spt {

namespace {

double curvature_drift(const Eigen::MatrixXd& hessian, double value, const Eigen::VectorXd& mu,
                       const RelativeCovariance& tau) {
  const Eigen::Index n = mu.size();
  if (tau.tau.rows() != n || hessian.rows() != n) {
    throw std::invalid_argument("drift process dimensions differ");
  }
  double total = 0.0;
  for (Eigen::Index j = 0; j < n; ++j) {
    for (Eigen::Index i = 0; i < n; ++i) {
      total += hessian(i, j) * mu[i] * mu[j] * tau.tau(i, j);
    }
  }
  return -total / (2.0 * value);
}

MasterDecomposition decompose(const ExtendedGeneratingFunction& h, const MarketPath& path,
                              const Eigen::MatrixXd& covariates,
                              const Eigen::MatrixXd& volatility) {
  const Eigen::Index n = path.assets();
  const Eigen::Index steps = path.steps();
  if (volatility.rows() != n) {
    throw std::invalid_argument("volatility rows must equal the path's asset count");
  }
  if (covariates.rows() != path.caps.rows()) {
    throw std::invalid_argument("covariate path and market path grids differ");
  }
  const Eigen::MatrixXd cov = volatility * volatility.transpose();

  MasterDecomposition out;
  out.drift.resize(static_cast<std::size_t>(steps + 1));
  double first_value = 0.0;
  double last_value = 0.0;
  for (Eigen::Index k = 0; k <= steps; ++k) {
    const Eigen::VectorXd mu = path.weights.row(k).transpose();
    const Eigen::VectorXd f = covariates.row(k).transpose();
    const double hv = h.value(mu, f);
    if (!(hv > 0.0)) {
      throw std::domain_error("generating function is not positive at step " +
                              std::to_string(k));
    }
    if (k == 0) first_value = hv;
    if (k == steps) last_value = hv;
    out.drift[static_cast<std::size_t>(k)] =
        curvature_drift(h.hess(mu, f), hv, mu, relative_covariance_from_cov(cov, mu));
    if (k == steps) break;

    Eigen::VectorXd pi;
    try {
      pi = extended_fgp_weights(h, mu, f).values();
    } catch (const NotLongOnlyError& e) {
      throw NotLongOnlyError("step " + std::to_string(k) + ": " + e.what(), e.asset());
    }
    double portfolio_growth = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      portfolio_growth += pi[i] * (path.caps(k + 1, i) / path.caps(k, i));
    }
    const double market_growth = path.caps.row(k + 1).sum() / path.caps.row(k).sum();
    out.lhs += std::log(portfolio_growth / market_growth);

    if (covariates.cols() > 0) {
      const Eigen::VectorXd dlog = h.log_covariate_grad(mu, f);
      out.covariate_integral += dlog.dot((covariates.row(k + 1) - covariates.row(k)).transpose());
    }
  }
  for (Eigen::Index k = 0; k < steps; ++k) {
    const auto a = static_cast<std::size_t>(k);
    const double dt = path.times[a + 1] - path.times[a];
    out.drift_integral += 0.5 * dt * (out.drift[a] + out.drift[a + 1]);
  }
  out.g_term = std::log(last_value) - std::log(first_value);
  out.residual = out.lhs - (out.g_term + out.drift_integral - out.covariate_integral);
  if (!std::isfinite(out.residual)) throw NumericError("master-equation residual is not finite");
  return out;
}

}  // namespace

Eigen::VectorXd FiniteVariationPath::total_variation() const {
  Eigen::VectorXd tv = Eigen::VectorXd::Zero(values.cols());
  for (Eigen::Index k = 1; k < values.rows(); ++k) {
    tv += (values.row(k) - values.row(k - 1)).cwiseAbs().transpose();
  }
  return tv;
}

double drift_process(const GeneratingFunction& g, const Eigen::VectorXd& mu,
                     const RelativeCovariance& tau) {
  const double gv = g.value(mu);
  if (!(gv > 0.0)) throw std::domain_error("generating function is not positive at mu");
  return curvature_drift(g.hess(mu), gv, mu, tau);
}

double extended_drift_process(const ExtendedGeneratingFunction& h,
                              const Eigen::VectorXd& mu, const Eigen::VectorXd& covariates,
                              const RelativeCovariance& tau) {
  const double hv = h.value(mu, covariates);
  if (!(hv > 0.0)) throw std::domain_error("generating function is not positive at x(t)");
  return curvature_drift(h.hess(mu, covariates), hv, mu, tau);
}

MasterDecomposition verify_master(const GeneratingFunction& g, const MarketPath& path,
                                  const Eigen::MatrixXd& volatility) {
  return decompose(ExtendedGeneratingFunction::from(g), path,
                   Eigen::MatrixXd(path.caps.rows(), 0), volatility);
}

MasterDecomposition verify_extended_master(const ExtendedGeneratingFunction& h,
                                           const MarketPath& path,
                                           const FiniteVariationPath& covariates,
                                           const Eigen::MatrixXd& volatility) {
  if (covariates.times.size() != path.times.size()) {
    throw std::invalid_argument("covariate and market time grids differ in length");
  }
  for (std::size_t k = 0; k < path.times.size(); ++k) {
    if (covariates.times[k] != path.times[k]) {
      throw std::invalid_argument("covariate and market time grids differ at index " +
                                  std::to_string(k));
    }
  }
  return decompose(h, path, covariates.values, volatility);
}

std::vector<ConvergenceLevel> master_convergence(const GeneratingFunction& g,
                                                 const MarketParams& params,
                                                 double horizon, double finest_dt,
                                                 const std::vector<Eigen::Index>& factors,
                                                 std::uint64_t seed) {
  params.validate();
  Eigen::Index coarsest = 1;
  for (const Eigen::Index f : factors) {
    if (f < 1) throw std::invalid_argument("coarsening factors must be positive");
    coarsest = std::max(coarsest, f);
  }
  Eigen::Index steps = step_count(horizon, finest_dt);
  if (steps % coarsest != 0) {
    throw std::invalid_argument("finest step count must be divisible by every factor");
  }
  const Eigen::MatrixXd fine = brownian_increments(steps, params.brownian_dim(), finest_dt, seed);
  std::vector<ConvergenceLevel> levels;
  for (const Eigen::Index f : factors) {
    if (steps % f != 0) throw std::invalid_argument("factor does not divide the step count");
    const double dt = finest_dt * static_cast<double>(f);
    const MarketPath path = simulate_market(params, dt, coarsen_increments(fine, f));
    levels.push_back({dt, verify_master(g, path, params.volatility)});
  }
  return levels;
}

void write_decomposition_csv(std::ostream& out, const std::vector<ConvergenceLevel>& rows) {
  out << "dt,lhs,g_term,drift_integral,covariate_integral,residual\n";
  for (const auto& row : rows) {
    const auto& d = row.decomposition;
    out << csv::format_double(row.dt) << ',' << csv::format_double(d.lhs) << ','
        << csv::format_double(d.g_term) << ',' << csv::format_double(d.drift_integral) << ','
        << csv::format_double(d.covariate_integral) << ',' << csv::format_double(d.residual)
        << '\n';
  }
}

}  // namespace spt
