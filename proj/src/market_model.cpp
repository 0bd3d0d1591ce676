#include "spt/market_model.hpp"

#include "spt/csv.hpp"
#include "spt/errors.hpp"
#include "spt/rng.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <ostream>
#include <stdexcept>
#include <string>

namespace spt {

void MarketParams::validate() const {
  const Eigen::Index n = initial_caps.size();
  if (n < 1) throw std::invalid_argument("market needs at least one asset");
  if (drift.size() != n) throw std::invalid_argument("drift length must equal asset count");
  if (volatility.rows() != n) throw std::invalid_argument("volatility must have one row per asset");
  if (volatility.cols() < n) {
    throw std::invalid_argument("Brownian dimension d must be at least n");
  }
  for (Eigen::Index i = 0; i < n; ++i) {
    if (!(initial_caps[i] > 0.0) || !std::isfinite(initial_caps[i])) {
      throw std::invalid_argument("initial capitalization of asset " +
                                  std::to_string(i + 1) + " must be positive");
    }
  }
  if (!drift.allFinite() || !volatility.allFinite()) {
    throw std::invalid_argument("market coefficients must be finite");
  }
}

MarketParams MarketParams::isotropic(const Eigen::VectorXd& initial_caps,
                                     double drift, double vol) {
  const Eigen::Index n = initial_caps.size();
  MarketParams params;
  params.drift = Eigen::VectorXd::Constant(n, drift);
  params.volatility = vol * Eigen::MatrixXd::Identity(n, n);
  params.initial_caps = initial_caps;
  return params;
}

Eigen::VectorXd market_weights(const Eigen::Ref<const Eigen::VectorXd>& caps) {
  if (caps.size() == 0) throw std::invalid_argument("empty capitalization vector");
  double total = 0.0;
  for (Eigen::Index i = 0; i < caps.size(); ++i) {
    if (!(caps[i] > 0.0)) {
      throw std::domain_error("capitalization of asset " + std::to_string(i + 1) +
                              " is not positive");
    }
    total += caps[i];
  }
  return caps / total;
}

MarketPath MarketPath::from_caps(std::vector<double> times, Eigen::MatrixXd caps) {
  if (static_cast<Eigen::Index>(times.size()) != caps.rows()) {
    throw std::invalid_argument("time grid and capitalization rows differ");
  }
  for (std::size_t k = 1; k < times.size(); ++k) {
    if (!(times[k] > times[k - 1])) {
      throw std::invalid_argument("time grid must be strictly increasing");
    }
  }
  MarketPath path;
  path.times = std::move(times);
  path.weights.resize(caps.rows(), caps.cols());
  for (Eigen::Index k = 0; k < caps.rows(); ++k) {
    path.weights.row(k) = market_weights(caps.row(k).transpose()).transpose();
  }
  path.caps = std::move(caps);
  return path;
}

Eigen::Index step_count(double horizon, double dt) {
  if (!(dt > 0.0) || !std::isfinite(dt)) throw std::invalid_argument("dt must be positive");
  if (!(horizon >= dt) || !std::isfinite(horizon)) {
    throw std::invalid_argument("horizon must be at least dt");
  }
  return std::max<Eigen::Index>(1, std::llround(horizon / dt));
}

Eigen::MatrixXd brownian_increments(Eigen::Index steps, Eigen::Index dim,
                                    double dt, std::uint64_t seed) {
  if (!(dt > 0.0)) throw std::invalid_argument("dt must be positive");
  Rng rng(seed);
  const double scale = std::sqrt(dt);
  Eigen::MatrixXd dw(steps, dim);
  for (Eigen::Index k = 0; k < steps; ++k) {
    for (Eigen::Index nu = 0; nu < dim; ++nu) dw(k, nu) = scale * rng.normal();
  }
  return dw;
}

Eigen::MatrixXd coarsen_increments(const Eigen::MatrixXd& increments,
                                   Eigen::Index factor) {
  if (factor < 1 || increments.rows() % factor != 0) {
    throw std::invalid_argument("coarsening factor must divide the step count");
  }
  const Eigen::Index coarse = increments.rows() / factor;
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(coarse, increments.cols());
  for (Eigen::Index k = 0; k < coarse; ++k) {
    for (Eigen::Index j = 0; j < factor; ++j) out.row(k) += increments.row(k * factor + j);
  }
  return out;
}

MarketPath simulate_market(const MarketParams& params, double dt,
                           const Eigen::MatrixXd& increments) {
  params.validate();
  if (!(dt > 0.0)) throw std::invalid_argument("dt must be positive");
  if (increments.cols() != params.brownian_dim()) {
    throw std::invalid_argument("increment columns must equal the Brownian dimension");
  }
  const Eigen::Index n = params.assets();
  const Eigen::Index steps = increments.rows();
  const Eigen::VectorXd log_drift =
      (params.drift - 0.5 * params.volatility.rowwise().squaredNorm()) * dt;

  std::vector<double> times(static_cast<std::size_t>(steps + 1));
  Eigen::MatrixXd caps(steps + 1, n);
  Eigen::VectorXd log_x = params.initial_caps.array().log();
  caps.row(0) = params.initial_caps.transpose();
  times[0] = 0.0;
  for (Eigen::Index k = 0; k < steps; ++k) {
    log_x += log_drift + params.volatility * increments.row(k).transpose();
    caps.row(k + 1) = log_x.array().exp().transpose();
    times[static_cast<std::size_t>(k + 1)] = static_cast<double>(k + 1) * dt;
  }
  return MarketPath::from_caps(std::move(times), std::move(caps));
}

MarketPath simulate_market(const MarketParams& params, double horizon,
                           double dt, std::uint64_t seed) {
  params.validate();
  const Eigen::Index steps = step_count(horizon, dt);
  return simulate_market(params, dt,
                         brownian_increments(steps, params.brownian_dim(), dt, seed));
}

MarketPath simulate_market(const CoefficientFn& coefficients,
                           const Eigen::VectorXd& initial_caps,
                           Eigen::Index brownian_dim, double horizon, double dt,
                           std::uint64_t seed) {
  const Eigen::Index n = initial_caps.size();
  if (brownian_dim < n) throw std::invalid_argument("Brownian dimension d must be at least n");
  if ((initial_caps.array() <= 0.0).any()) {
    throw std::invalid_argument("initial capitalizations must be positive");
  }
  const Eigen::Index steps = step_count(horizon, dt);
  const Eigen::MatrixXd dw = brownian_increments(steps, brownian_dim, dt, seed);

  std::vector<double> times(static_cast<std::size_t>(steps + 1));
  Eigen::MatrixXd caps(steps + 1, n);
  Eigen::VectorXd log_x = initial_caps.array().log();
  Eigen::VectorXd x = initial_caps;
  caps.row(0) = x.transpose();
  for (Eigen::Index k = 0; k < steps; ++k) {
    const double t = static_cast<double>(k) * dt;
    const Coefficients c = coefficients(t, x);
    if (c.drift.size() != n || c.volatility.rows() != n ||
        c.volatility.cols() != brownian_dim) {
      throw std::invalid_argument("coefficient callback returned wrong shapes");
    }
    log_x += (c.drift - 0.5 * c.volatility.rowwise().squaredNorm()) * dt +
             c.volatility * dw.row(k).transpose();
    x = log_x.array().exp();
    caps.row(k + 1) = x.transpose();
    times[static_cast<std::size_t>(k + 1)] = static_cast<double>(k + 1) * dt;
  }
  return MarketPath::from_caps(std::move(times), std::move(caps));
}

bool check_diversity(const MarketPath& path, double delta) {
  if (!(delta > 0.0 && delta < 1.0)) throw std::invalid_argument("delta must lie in (0, 1)");
  return path.weights.maxCoeff() < 1.0 - delta;
}

double min_covariance_eigenvalue(const Eigen::MatrixXd& volatility) {
  const Eigen::MatrixXd cov = volatility * volatility.transpose();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(cov, Eigen::EigenvaluesOnly);
  if (solver.info() != Eigen::Success) throw NumericError("eigensolver failed on sigma sigma^T");
  return solver.eigenvalues().minCoeff();
}

bool check_nondegeneracy(const Eigen::MatrixXd& volatility, double epsilon) {
  if (!(epsilon > 0.0)) throw std::invalid_argument("epsilon must be positive");
  return min_covariance_eigenvalue(volatility) >= epsilon;
}

RelativeCovariance relative_covariance_from_cov(
    const Eigen::MatrixXd& covariance, const Eigen::Ref<const Eigen::VectorXd>& mu) {
  const Eigen::Index n = mu.size();
  if (covariance.rows() != n || covariance.cols() != n) {
    throw std::invalid_argument("covariance and weight dimensions differ");
  }
  const Eigen::VectorXd a_mu = covariance * mu;
  const double mu_a_mu = mu.dot(a_mu);
  Eigen::MatrixXd tau(n, n);
  for (Eigen::Index j = 0; j < n; ++j) {
    for (Eigen::Index i = 0; i < n; ++i) {
      tau(i, j) = mu_a_mu - a_mu[i] - a_mu[j] + covariance(i, j);
    }
  }
  return {0.5 * (tau + tau.transpose())};
}

RelativeCovariance relative_covariance(const Eigen::MatrixXd& volatility,
                                       const Eigen::Ref<const Eigen::VectorXd>& mu) {
  if (volatility.rows() != mu.size()) {
    throw std::invalid_argument("volatility rows and weight length differ");
  }
  return relative_covariance_from_cov(volatility * volatility.transpose(), mu);
}

double arbitrage_horizon_bound(double n, double epsilon, double delta, double p) {
  if (!(n >= 1.0)) throw std::invalid_argument("asset count must be at least 1");
  if (!(epsilon > 0.0)) throw std::invalid_argument("epsilon must be positive");
  if (!(delta > 0.0 && delta < 1.0)) throw std::invalid_argument("delta must lie in (0, 1)");
  if (!(p > 0.0 && p < 1.0)) throw std::invalid_argument("p must lie in (0, 1)");
  return 2.0 * std::log(n) / (epsilon * delta * p);
}

void write_market_csv(std::ostream& out, const MarketPath& path) {
  out << "t";
  for (Eigen::Index i = 0; i < path.assets(); ++i) out << ",asset_" << (i + 1);
  out << '\n';
  for (Eigen::Index k = 0; k < path.caps.rows(); ++k) {
    out << csv::format_double(path.times[static_cast<std::size_t>(k)]);
    for (Eigen::Index i = 0; i < path.assets(); ++i) {
      out << ',' << csv::format_double(path.caps(k, i));
    }
    out << '\n';
  }
}

MarketPath read_market_csv(std::istream& in) {
  csv::Reader reader(in);
  std::string line;
  if (!reader.next(line)) throw DataError("market CSV is empty");
  const auto header = csv::split(line);
  if (header.size() < 2 || header[0] != "t") {
    throw DataError("line 1: market CSV header must start with 't'");
  }
  const std::size_t n = header.size() - 1;
  std::vector<double> times;
  std::vector<double> values;
  while (reader.next(line)) {
    const auto fields = csv::split(line);
    if (fields.size() != n + 1) {
      throw DataError("line " + std::to_string(reader.line_number()) +
                      ": expected " + std::to_string(n + 1) + " fields");
    }
    times.push_back(csv::parse_double(fields[0], reader.line_number()));
    for (std::size_t i = 0; i < n; ++i) {
      values.push_back(csv::parse_double(fields[i + 1], reader.line_number()));
    }
  }
  const auto rows = static_cast<Eigen::Index>(times.size());
  Eigen::MatrixXd caps(rows, static_cast<Eigen::Index>(n));
  for (Eigen::Index k = 0; k < rows; ++k) {
    for (Eigen::Index i = 0; i < static_cast<Eigen::Index>(n); ++i) {
      caps(k, i) = values[static_cast<std::size_t>(k) * n + static_cast<std::size_t>(i)];
    }
  }
  try {
    return MarketPath::from_caps(std::move(times), std::move(caps));
  } catch (const std::exception& e) {
    throw DataError(std::string("invalid market CSV: ") + e.what());
  }
}

}  // namespace spt
