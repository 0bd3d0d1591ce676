#include "spt/portfolios.hpp"

#include "spt/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace spt {

namespace {

constexpr double kSimplexTol = 1e-12;
constexpr double kLongOnlyTol = 1e-10;

double fd_scale(double xi) { return std::max(std::abs(xi), 1e-8); }

double first_step_factor() {
  static const double c = std::cbrt(std::numeric_limits<double>::epsilon());
  return c;
}

double second_step_factor() {
  static const double c = std::pow(std::numeric_limits<double>::epsilon(), 0.25);
  return c;
}

Eigen::VectorXd fgp_from_ratio(const Eigen::VectorXd& mu, const Eigen::VectorXd& ratio) {
  const double weighted = mu.dot(ratio);
  Eigen::VectorXd pi(mu.size());
  for (Eigen::Index i = 0; i < mu.size(); ++i) {
    pi[i] = mu[i] * (ratio[i] + 1.0 - weighted);
    if (!std::isfinite(pi[i])) {
      throw NumericError("generated weight of asset " + std::to_string(i + 1) +
                         " is not finite");
    }
    if (pi[i] < 0.0) {
      if (pi[i] < -kLongOnlyTol) {
        throw NotLongOnlyError("generating function is not long-only at this point: "
                               "weight of asset " + std::to_string(i + 1) + " is " +
                                   std::to_string(pi[i]),
                               static_cast<std::size_t>(i));
      }
      pi[i] = 0.0;
    }
  }
  return pi / pi.sum();
}

void check_simplex_input(const Eigen::VectorXd& mu) {
  if (mu.size() == 0) throw std::invalid_argument("empty weight vector");
  for (Eigen::Index i = 0; i < mu.size(); ++i) {
    if (!(mu[i] > 0.0)) {
      throw std::domain_error("market weight of asset " + std::to_string(i + 1) +
                              " must be strictly positive");
    }
  }
}

}  // namespace

PortfolioWeights::PortfolioWeights(Eigen::VectorXd w) : w_(std::move(w)) {
  if (w_.size() == 0) throw std::invalid_argument("portfolio has no assets");
  double total = 0.0;
  for (Eigen::Index i = 0; i < w_.size(); ++i) {
    if (!(w_[i] >= 0.0) || !std::isfinite(w_[i])) {
      throw std::domain_error("portfolio weight of asset " + std::to_string(i + 1) +
                              " is negative or not finite");
    }
    total += w_[i];
  }
  if (std::abs(total - 1.0) > kSimplexTol) {
    throw std::domain_error("portfolio weights sum to " + std::to_string(total));
  }
}

Eigen::VectorXd fd_gradient(const ScalarFn& f, const Eigen::VectorXd& x) {
  Eigen::VectorXd g(x.size());
  Eigen::VectorXd probe = x;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double h = first_step_factor() * fd_scale(x[i]);
    probe[i] = x[i] + h;
    const double up = f(probe);
    probe[i] = x[i] - h;
    const double down = f(probe);
    probe[i] = x[i];
    g[i] = (up - down) / (2.0 * h);
  }
  return g;
}

Eigen::MatrixXd fd_jacobian(const VectorFn& g, const Eigen::VectorXd& x) {
  const Eigen::Index n = x.size();
  Eigen::MatrixXd jac(n, n);
  Eigen::VectorXd probe = x;
  for (Eigen::Index j = 0; j < n; ++j) {
    const double h = first_step_factor() * fd_scale(x[j]);
    probe[j] = x[j] + h;
    const Eigen::VectorXd up = g(probe);
    probe[j] = x[j] - h;
    const Eigen::VectorXd down = g(probe);
    probe[j] = x[j];
    jac.col(j) = (up - down) / (2.0 * h);
  }
  return jac;
}

Eigen::MatrixXd fd_hessian(const ScalarFn& f, const Eigen::VectorXd& x) {
  const Eigen::Index n = x.size();
  Eigen::VectorXd h(n);
  for (Eigen::Index i = 0; i < n; ++i) h[i] = second_step_factor() * fd_scale(x[i]);
  const double f0 = f(x);
  Eigen::MatrixXd hess(n, n);
  Eigen::VectorXd p = x;
  for (Eigen::Index i = 0; i < n; ++i) {
    p[i] = x[i] + h[i];
    const double up = f(p);
    p[i] = x[i] - h[i];
    const double down = f(p);
    p[i] = x[i];
    hess(i, i) = (up - 2.0 * f0 + down) / (h[i] * h[i]);
    for (Eigen::Index j = 0; j < i; ++j) {
      auto eval = [&](double si, double sj) {
        p[i] = x[i] + si * h[i];
        p[j] = x[j] + sj * h[j];
        const double v = f(p);
        p[i] = x[i];
        p[j] = x[j];
        return v;
      };
      const double v = (eval(1, 1) - eval(1, -1) - eval(-1, 1) + eval(-1, -1)) /
                       (4.0 * h[i] * h[j]);
      hess(i, j) = v;
      hess(j, i) = v;
    }
  }
  return hess;
}

Eigen::VectorXd GeneratingFunction::grad(const Eigen::VectorXd& x) const {
  Eigen::VectorXd g = gradient ? gradient(x) : fd_gradient(value, x);
  if (!g.allFinite()) throw NumericError("generating-function gradient is not finite");
  return g;
}

Eigen::MatrixXd GeneratingFunction::hess(const Eigen::VectorXd& x) const {
  Eigen::MatrixXd h;
  if (hessian) {
    h = hessian(x);
  } else if (gradient) {
    h = fd_jacobian(gradient, x);
    h = 0.5 * (h + h.transpose()).eval();
  } else {
    h = fd_hessian(value, x);
  }
  if (!h.allFinite()) throw NumericError("generating-function Hessian is not finite");
  return h;
}

Eigen::VectorXd ExtendedGeneratingFunction::grad(const Eigen::VectorXd& x,
                                                 const Eigen::VectorXd& f) const {
  Eigen::VectorXd g = gradient ? gradient(x, f)
                               : fd_gradient([&](const Eigen::VectorXd& y) { return value(y, f); }, x);
  if (!g.allFinite()) throw NumericError("extended generating-function gradient is not finite");
  return g;
}

Eigen::MatrixXd ExtendedGeneratingFunction::hess(const Eigen::VectorXd& x,
                                                 const Eigen::VectorXd& f) const {
  Eigen::MatrixXd h;
  if (hessian) {
    h = hessian(x, f);
  } else if (gradient) {
    h = fd_jacobian([&](const Eigen::VectorXd& y) { return gradient(y, f); }, x);
    h = 0.5 * (h + h.transpose()).eval();
  } else {
    h = fd_hessian([&](const Eigen::VectorXd& y) { return value(y, f); }, x);
  }
  if (!h.allFinite()) throw NumericError("extended generating-function Hessian is not finite");
  return h;
}

Eigen::VectorXd ExtendedGeneratingFunction::log_covariate_grad(const Eigen::VectorXd& x,
                                                               const Eigen::VectorXd& f) const {
  if (covariate_gradient) return covariate_gradient(x, f);
  if (f.size() == 0) return Eigen::VectorXd();
  // Steps in F use an absolute floor of 1 since covariates may sit at zero.
  Eigen::VectorXd g(f.size());
  Eigen::VectorXd probe = f;
  for (Eigen::Index l = 0; l < f.size(); ++l) {
    const double h = first_step_factor() * std::max(std::abs(f[l]), 1.0);
    probe[l] = f[l] + h;
    const double up = std::log(value(x, probe));
    probe[l] = f[l] - h;
    const double down = std::log(value(x, probe));
    probe[l] = f[l];
    g[l] = (up - down) / (2.0 * h);
  }
  if (!g.allFinite()) throw NumericError("covariate derivative of log H is not finite");
  return g;
}

ExtendedGeneratingFunction ExtendedGeneratingFunction::from(const GeneratingFunction& g) {
  ExtendedGeneratingFunction h;
  h.value = [g](const Eigen::VectorXd& x, const Eigen::VectorXd&) { return g.value(x); };
  h.gradient = [g](const Eigen::VectorXd& x, const Eigen::VectorXd&) { return g.grad(x); };
  h.hessian = [g](const Eigen::VectorXd& x, const Eigen::VectorXd&) { return g.hess(x); };
  h.covariate_gradient = [](const Eigen::VectorXd&, const Eigen::VectorXd& f) {
    return Eigen::VectorXd::Zero(f.size()).eval();
  };
  return h;
}

GeneratingFunction constant_generator(double c) {
  if (!(c > 0.0)) throw std::invalid_argument("constant generating function must be positive");
  GeneratingFunction g;
  g.value = [c](const Eigen::VectorXd&) { return c; };
  g.gradient = [](const Eigen::VectorXd& x) { return Eigen::VectorXd::Zero(x.size()).eval(); };
  g.hessian = [](const Eigen::VectorXd& x) {
    return Eigen::MatrixXd::Zero(x.size(), x.size()).eval();
  };
  return g;
}

GeneratingFunction diversity_generator(double p) {
  if (!std::isfinite(p) || p == 0.0) {
    throw std::invalid_argument("diversity generator needs a finite nonzero exponent");
  }
  auto power_sum = [p](const Eigen::VectorXd& x) {
    return (p * x.array().log()).exp().sum();
  };
  GeneratingFunction g;
  g.value = [p, power_sum](const Eigen::VectorXd& x) {
    return std::pow(power_sum(x), 1.0 / p);
  };
  g.gradient = [p, power_sum](const Eigen::VectorXd& x) {
    const double s = power_sum(x);
    const double gv = std::pow(s, 1.0 / p);
    return (gv / s * ((p - 1.0) * x.array().log()).exp()).matrix().eval();
  };
  g.hessian = [p, power_sum](const Eigen::VectorXd& x) {
    const double s = power_sum(x);
    const double gv = std::pow(s, 1.0 / p);
    const Eigen::VectorXd a = ((p - 1.0) * x.array().log()).exp();
    Eigen::MatrixXd h = (gv * (1.0 - p) / (s * s)) * (a * a.transpose());
    for (Eigen::Index i = 0; i < x.size(); ++i) {
      h(i, i) += gv * (p - 1.0) * std::exp((p - 2.0) * std::log(x[i])) / s;
    }
    return h;
  };
  return g;
}

GeneratingFunction entropy_generator() {
  GeneratingFunction g;
  g.value = [](const Eigen::VectorXd& x) { return -(x.array() * x.array().log()).sum(); };
  g.gradient = [](const Eigen::VectorXd& x) {
    return (-(x.array().log() + 1.0)).matrix().eval();
  };
  g.hessian = [](const Eigen::VectorXd& x) {
    return Eigen::MatrixXd((-x.array().inverse()).matrix().asDiagonal());
  };
  return g;
}

Eigen::VectorXd softmax(const Eigen::VectorXd& logits) {
  if (logits.size() == 0) throw std::invalid_argument("softmax of an empty vector");
  const double top = logits.maxCoeff();
  if (!std::isfinite(top)) throw NumericError("softmax needs at least one finite logit");
  Eigen::VectorXd e = (logits.array() - top).exp();
  return e / e.sum();
}

PortfolioWeights ewp_weights(Eigen::Index n) {
  if (n < 1) throw std::invalid_argument("equal-weight portfolio needs n >= 1");
  return PortfolioWeights(Eigen::VectorXd::Constant(n, 1.0 / static_cast<double>(n)));
}

PortfolioWeights dwp_weights(const Eigen::VectorXd& mu, double p) {
  if (!std::isfinite(p)) throw std::invalid_argument("DWP exponent must be finite");
  if (mu.size() == 0) throw std::invalid_argument("empty weight vector");
  for (Eigen::Index i = 0; i < mu.size(); ++i) {
    if (mu[i] < 0.0 || (mu[i] == 0.0 && p <= 0.0) || std::isnan(mu[i])) {
      throw std::domain_error("market weight of asset " + std::to_string(i + 1) +
                              " is outside the domain of mu^p");
    }
  }
  if (p == 1.0) return PortfolioWeights(mu);
  if (p == 0.0) return ewp_weights(mu.size());
  Eigen::VectorXd logits(mu.size());
  for (Eigen::Index i = 0; i < mu.size(); ++i) {
    logits[i] = mu[i] == 0.0 ? -std::numeric_limits<double>::infinity()
                             : p * std::log(mu[i]);
  }
  return PortfolioWeights(softmax(logits));
}

PortfolioWeights fgp_weights(const GeneratingFunction& g, const Eigen::VectorXd& mu) {
  check_simplex_input(mu);
  const double gv = g.value(mu);
  if (!(gv > 0.0)) throw std::domain_error("generating function is not positive at mu");
  return PortfolioWeights(fgp_from_ratio(mu, g.grad(mu) / gv));
}

PortfolioWeights extended_fgp_weights(const ExtendedGeneratingFunction& h,
                                      const Eigen::VectorXd& mu,
                                      const Eigen::VectorXd& covariates) {
  check_simplex_input(mu);
  const double hv = h.value(mu, covariates);
  if (!(hv > 0.0)) throw std::domain_error("generating function is not positive at x(t)");
  return PortfolioWeights(fgp_from_ratio(mu, h.grad(mu, covariates) / hv));
}

PortfolioWeights map_portfolio(const LogMap& f_log, const Eigen::MatrixXd& chars) {
  if (chars.rows() < 1) throw std::invalid_argument("no assets to weight");
  Eigen::VectorXd logits(chars.rows());
  for (Eigen::Index i = 0; i < chars.rows(); ++i) {
    logits[i] = f_log(chars.row(i).transpose());
    if (!std::isfinite(logits[i])) {
      throw NumericError("log investment map is not finite for asset " +
                         std::to_string(i + 1));
    }
  }
  return PortfolioWeights(softmax(logits));
}

}  // namespace spt
