#pragma once

#include "spt/backtest.hpp"
#include "spt/rng.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <cstdio>
#include <string>
#include <vector>

namespace spt::test_support {

// Uniform point in the open simplex (normalized exponentials).
inline Eigen::VectorXd random_simplex(Eigen::Index n, Rng& rng) {
  Eigen::VectorXd v(n);
  for (Eigen::Index i = 0; i < n; ++i) v[i] = -std::log(rng.uniform());
  return v / v.sum();
}

inline std::vector<std::string> day_labels(Eigen::Index days) {
  std::vector<std::string> out;
  for (Eigen::Index t = 0; t < days; ++t) {
    char buf[32];
    // 28 days per month keeps every label a valid date.
    std::snprintf(buf, sizeof buf, "%04d-%02d-%02d", 2001 + static_cast<int>(t / 336),
                  1 + static_cast<int>((t / 28) % 12), 1 + static_cast<int>(t % 28));
    out.emplace_back(buf);
  }
  return out;
}

// Panel of given returns, everyone a member, caps set to `caps` on day 0 and
// compounded with the realized returns afterwards.
inline MarketData make_data(const Eigen::MatrixXd& returns, const Eigen::VectorXd& caps) {
  MarketData data;
  data.panel.returns = returns;
  data.panel.member = MembershipMatrix::Constant(returns.rows(), returns.cols(), true);
  data.panel.dates = day_labels(returns.rows());
  for (Eigen::Index i = 0; i < returns.cols(); ++i) {
    data.panel.asset_ids.push_back("S" + std::to_string(i + 1));
  }
  data.origin_date = "2000-12-31";
  Eigen::MatrixXd c(returns.rows(), returns.cols());
  Eigen::VectorXd current = caps;
  for (Eigen::Index t = 0; t < returns.rows(); ++t) {
    c.row(t) = current.transpose();
    current = current.cwiseProduct((Eigen::VectorXd::Ones(caps.size()) +
                                    returns.row(t).transpose()));
  }
  data.characteristics.emplace(kCapCharacteristic, c);
  return data;
}

inline MarketData random_data(Eigen::Index days, Eigen::Index assets, Rng& rng,
                              double vol = 0.01) {
  Eigen::MatrixXd r(days, assets);
  for (Eigen::Index t = 0; t < days; ++t) {
    for (Eigen::Index i = 0; i < assets; ++i) r(t, i) = std::expm1(vol * rng.normal());
  }
  Eigen::VectorXd caps(assets);
  for (Eigen::Index i = 0; i < assets; ++i) caps[i] = rng.uniform(1.0, 5.0);
  return make_data(r, caps);
}

}  // namespace spt::test_support
