#pragma once

#include <Eigen/Dense>

#include <functional>
#include <optional>

namespace spt {

/// Long-only portfolio: nonnegative weights summing to one.
class PortfolioWeights {
 public:
  /// Validates the simplex invariants (entries >= 0, |sum - 1| <= 1e-12).
  explicit PortfolioWeights(Eigen::VectorXd w);

  [[nodiscard]] const Eigen::VectorXd& values() const noexcept { return w_; }
  [[nodiscard]] Eigen::Index size() const noexcept { return w_.size(); }
  [[nodiscard]] double operator[](Eigen::Index i) const { return w_[i]; }

 private:
  Eigen::VectorXd w_;
};

using ScalarFn = std::function<double(const Eigen::VectorXd&)>;
using VectorFn = std::function<Eigen::VectorXd(const Eigen::VectorXd&)>;
using MatrixFn = std::function<Eigen::MatrixXd(const Eigen::VectorXd&)>;

/// Positive function on the simplex generating a portfolio through its
/// logarithmic gradient. Derivatives that are left empty fall back to
/// central finite differences.
struct GeneratingFunction {
  ScalarFn value;
  VectorFn gradient;  ///< optional
  MatrixFn hessian;   ///< optional

  [[nodiscard]] Eigen::VectorXd grad(const Eigen::VectorXd& x) const;
  [[nodiscard]] Eigen::MatrixXd hess(const Eigen::VectorXd& x) const;
};

using ExtScalarFn = std::function<double(const Eigen::VectorXd&, const Eigen::VectorXd&)>;
using ExtVectorFn =
    std::function<Eigen::VectorXd(const Eigen::VectorXd&, const Eigen::VectorXd&)>;
using ExtMatrixFn =
    std::function<Eigen::MatrixXd(const Eigen::VectorXd&, const Eigen::VectorXd&)>;

/// Generating function of market weights x and k covariates F. All
/// derivatives except `value` are optional.
struct ExtendedGeneratingFunction {
  ExtScalarFn value;
  ExtVectorFn gradient;            ///< D_i H, i <= n
  ExtMatrixFn hessian;             ///< D_ij H, i, j <= n
  ExtVectorFn covariate_gradient;  ///< D_{n+l} log H, l <= k

  [[nodiscard]] Eigen::VectorXd grad(const Eigen::VectorXd& x, const Eigen::VectorXd& f) const;
  [[nodiscard]] Eigen::MatrixXd hess(const Eigen::VectorXd& x, const Eigen::VectorXd& f) const;
  [[nodiscard]] Eigen::VectorXd log_covariate_grad(const Eigen::VectorXd& x,
                                                   const Eigen::VectorXd& f) const;

  /// H(x, F) = G(x), with zero covariate sensitivity.
  static ExtendedGeneratingFunction from(const GeneratingFunction& g);
};

// Central finite differences. Step per coordinate is h_i = c * max(|x_i|, 1e-8)
// with c = eps^(1/3) for first derivatives and eps^(1/4) when a Hessian is
// taken from function values alone; steps scale with x_i so that x +/- h stays
// inside the positive orthant.
Eigen::VectorXd fd_gradient(const ScalarFn& f, const Eigen::VectorXd& x);
Eigen::MatrixXd fd_jacobian(const VectorFn& g, const Eigen::VectorXd& x);
Eigen::MatrixXd fd_hessian(const ScalarFn& f, const Eigen::VectorXd& x);

// Built-in generating functions.
GeneratingFunction constant_generator(double c);
/// G_p(x) = (sum_i x_i^p)^(1/p), p != 0; generates the diversity-weighted portfolio.
GeneratingFunction diversity_generator(double p);
/// G(x) = -sum_i x_i log x_i.
GeneratingFunction entropy_generator();

/// Equal weights 1/n.
PortfolioWeights ewp_weights(Eigen::Index n);

/// Weights proportional to mu_i^p, computed by log-sum-exp on p log mu.
/// p = 1 returns mu and p = 0 returns ewp_weights(n) exactly.
PortfolioWeights dwp_weights(const Eigen::VectorXd& mu, double p);

/// pi_i / mu_i = D_i G / G + 1 - sum_j mu_j D_j G / G.
/// Entries in [-1e-10, 0) are clamped to zero; lower ones raise NotLongOnlyError.
PortfolioWeights fgp_weights(const GeneratingFunction& g, const Eigen::VectorXd& mu);

/// Same rule with partial derivatives taken in the first n variables of H.
PortfolioWeights extended_fgp_weights(const ExtendedGeneratingFunction& h,
                                      const Eigen::VectorXd& mu,
                                      const Eigen::VectorXd& covariates);

/// Log investment map evaluated on one asset's characteristic vector.
using LogMap = std::function<double(const Eigen::VectorXd&)>;

/// pi_i proportional to exp(f_log(x_i)), x_i the i-th row of `chars`.
PortfolioWeights map_portfolio(const LogMap& f_log, const Eigen::MatrixXd& chars);

/// Normalized exp(logits) via log-sum-exp; entries of -inf map to zero.
Eigen::VectorXd softmax(const Eigen::VectorXd& logits);

}  // namespace spt
