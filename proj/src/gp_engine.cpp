#include "spt/gp_engine.hpp"

#include "spt/csv.hpp"
#include "spt/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <numbers>
#include <ostream>
#include <stdexcept>
#include <string>

namespace spt {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

using RowMajorMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

Eigen::MatrixXd kron(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  Eigen::MatrixXd out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    for (Eigen::Index j = 0; j < a.cols(); ++j) {
      out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
    }
  }
  return out;
}

double rq_factor(double diff, double length, double alpha) {
  return std::exp(-alpha * std::log1p(diff * diff / (2.0 * alpha * length * length)));
}

double median_pairwise_distance(const std::vector<double>& knots) {
  std::vector<double> dist;
  for (std::size_t a = 0; a < knots.size(); ++a) {
    for (std::size_t b = a + 1; b < knots.size(); ++b) dist.push_back(std::abs(knots[b] - knots[a]));
  }
  if (dist.empty()) return 1.0;
  const auto mid = dist.begin() + static_cast<std::ptrdiff_t>(dist.size() / 2);
  std::nth_element(dist.begin(), mid, dist.end());
  if (dist.size() % 2 == 1) return *mid;
  const double upper = *mid;
  const double lower = *std::max_element(dist.begin(), mid);
  return 0.5 * (lower + upper);
}

}  // namespace

Eigen::Index CharGrid::size() const {
  if (knots.empty()) return 0;
  Eigen::Index n = 1;
  for (const auto& k : knots) n *= static_cast<Eigen::Index>(k.size());
  return n;
}

void CharGrid::validate() const {
  if (knots.empty()) throw std::invalid_argument("grid needs at least one dimension");
  for (std::size_t i = 0; i < knots.size(); ++i) {
    const auto& k = knots[i];
    if (k.empty()) throw std::invalid_argument("grid dimension " + std::to_string(i + 1) + " is empty");
    for (std::size_t j = 0; j < k.size(); ++j) {
      if (!std::isfinite(k[j])) {
        throw std::invalid_argument("grid dimension " + std::to_string(i + 1) + " has a non-finite knot");
      }
      if (j > 0 && !(k[j] > k[j - 1])) {
        throw std::invalid_argument("knots of grid dimension " + std::to_string(i + 1) +
                                    " must be strictly increasing");
      }
    }
  }
}

std::vector<double> CharGrid::uniform_knots(double lo, double hi, std::size_t m) {
  if (m < 1) throw std::invalid_argument("need at least one knot");
  if (m == 1) return {0.5 * (lo + hi)};
  if (!(lo < hi)) throw std::invalid_argument("knot range must satisfy lo < hi");
  std::vector<double> out(m);
  const auto last = static_cast<double>(m - 1);
  for (std::size_t j = 0; j < m; ++j) {
    const auto jj = static_cast<double>(j);
    out[j] = (lo * (last - jj) + hi * jj) / last;
  }
  return out;
}

Eigen::MatrixXd CharGrid::points() const {
  const Eigen::Index n = size();
  const auto d = static_cast<Eigen::Index>(dims());
  Eigen::MatrixXd pts(n, d);
  for (Eigen::Index c = 0; c < n; ++c) {
    Eigen::Index rest = c;
    for (Eigen::Index i = d - 1; i >= 0; --i) {
      const auto& k = knots[static_cast<std::size_t>(i)];
      const auto m = static_cast<Eigen::Index>(k.size());
      pts(c, i) = k[static_cast<std::size_t>(rest % m)];
      rest /= m;
    }
  }
  return pts;
}

Eigen::Index CharGrid::cell_index(const Eigen::Ref<const Eigen::VectorXd>& x) const {
  if (static_cast<std::size_t>(x.size()) != dims()) {
    throw std::invalid_argument("point dimension differs from the grid");
  }
  Eigen::Index flat = 0;
  for (std::size_t i = 0; i < dims(); ++i) {
    const auto& k = knots[i];
    const double v = std::clamp(x[static_cast<Eigen::Index>(i)], k.front(), k.back());
    auto hi = std::lower_bound(k.begin(), k.end(), v);
    std::size_t j = static_cast<std::size_t>(hi - k.begin());
    if (j == k.size()) {
      j = k.size() - 1;
    } else if (j > 0 && *hi != v) {
      // v lies strictly between k[j-1] and k[j]; ties go to the lower knot.
      if (v - k[j - 1] <= k[j] - v) j -= 1;
    }
    flat = flat * static_cast<Eigen::Index>(k.size()) + static_cast<Eigen::Index>(j);
  }
  return flat;
}

void RQHypers::validate() const {
  if (!(k0 > 0.0) || !std::isfinite(k0)) throw std::invalid_argument("k0 must be positive");
  if (length.size() != alpha.size()) {
    throw std::invalid_argument("length-scale and shape counts differ");
  }
  for (std::size_t i = 0; i < length.size(); ++i) {
    if (!(length[i] > 0.0) || !std::isfinite(length[i])) {
      throw std::invalid_argument("length scales must be positive");
    }
    if (!(alpha[i] > 0.0) || !std::isfinite(alpha[i])) {
      throw std::invalid_argument("shape parameters must be positive");
    }
  }
}

void HyperPrior::validate() const {
  if (length.size() != alpha.size()) throw std::invalid_argument("prior dimension counts differ");
  auto check = [](const LogNormalPrior& p) {
    if (!std::isfinite(p.location) || !(p.scale > 0.0) || !std::isfinite(p.scale)) {
      throw std::invalid_argument("log-normal prior needs finite location and positive scale");
    }
  };
  check(k0);
  for (const auto& p : length) check(p);
  for (const auto& p : alpha) check(p);
}

Eigen::VectorXd HyperPrior::center(const RQHypers& h) const {
  const std::size_t d = length.size();
  if (h.dims() != d) throw std::invalid_argument("hyperparameter and prior dimensions differ");
  Eigen::VectorXd z(static_cast<Eigen::Index>(1 + 2 * d));
  z[0] = (std::log(h.k0) - k0.location) / k0.scale;
  for (std::size_t i = 0; i < d; ++i) {
    z[static_cast<Eigen::Index>(1 + i)] = (std::log(h.length[i]) - length[i].location) / length[i].scale;
    z[static_cast<Eigen::Index>(1 + d + i)] =
        (std::log(h.alpha[i]) - alpha[i].location) / alpha[i].scale;
  }
  return z;
}

RQHypers HyperPrior::uncenter(const Eigen::VectorXd& z) const {
  const std::size_t d = length.size();
  if (static_cast<std::size_t>(z.size()) != 1 + 2 * d) {
    throw std::invalid_argument("centered hyperparameter vector has the wrong length");
  }
  RQHypers h;
  h.k0 = std::exp(k0.location + k0.scale * z[0]);
  for (std::size_t i = 0; i < d; ++i) {
    h.length.push_back(std::exp(length[i].location + length[i].scale * z[static_cast<Eigen::Index>(1 + i)]));
    h.alpha.push_back(std::exp(alpha[i].location + alpha[i].scale * z[static_cast<Eigen::Index>(1 + d + i)]));
  }
  return h;
}

RQHypers HyperPrior::median() const {
  return uncenter(Eigen::VectorXd::Zero(static_cast<Eigen::Index>(1 + 2 * length.size())));
}

HyperPrior default_hyper_prior(const CharGrid& grid) {
  grid.validate();
  HyperPrior prior;
  for (const auto& k : grid.knots) {
    const double scale = median_pairwise_distance(k);
    prior.length.push_back({std::log(scale > 0.0 ? scale : 1.0), 1.0});
    prior.alpha.push_back({0.0, 1.0});
  }
  return prior;
}

double rq_kernel(const Eigen::Ref<const Eigen::VectorXd>& x,
                 const Eigen::Ref<const Eigen::VectorXd>& y, const RQHypers& h) {
  if (x.size() != y.size() || static_cast<std::size_t>(x.size()) != h.dims()) {
    throw std::invalid_argument("kernel inputs and hyperparameters differ in dimension");
  }
  double value = h.k0 * h.k0;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const auto ii = static_cast<std::size_t>(i);
    value *= rq_factor(x[i] - y[i], h.length[ii], h.alpha[ii]);
  }
  return value;
}

Eigen::MatrixXd rq_gram_1d(const std::vector<double>& knots, double length, double alpha) {
  const auto m = static_cast<Eigen::Index>(knots.size());
  Eigen::MatrixXd g(m, m);
  for (Eigen::Index a = 0; a < m; ++a) {
    g(a, a) = 1.0;
    for (Eigen::Index b = 0; b < a; ++b) {
      g(a, b) = rq_factor(knots[static_cast<std::size_t>(a)] - knots[static_cast<std::size_t>(b)],
                          length, alpha);
      g(b, a) = g(a, b);
    }
  }
  return g;
}

Eigen::Index KronFactors::size() const {
  Eigen::Index n = 1;
  for (const auto& di : d) n *= di.size();
  return n;
}

Eigen::MatrixXd KronFactors::assemble() const {
  Eigen::MatrixXd k = Eigen::MatrixXd::Constant(1, 1, k0 * k0);
  for (std::size_t i = 0; i < u.size(); ++i) {
    k = kron(k, u[i] * d[i].asDiagonal() * u[i].transpose());
  }
  return k;
}

Eigen::MatrixXd KronFactors::dense_root() const {
  Eigen::MatrixXd l = Eigen::MatrixXd::Constant(1, 1, k0);
  for (std::size_t i = 0; i < u.size(); ++i) {
    l = kron(l, u[i] * d[i].cwiseSqrt().asDiagonal());
  }
  return l;
}

Eigen::VectorXd KronFactors::eigenvalues() const {
  Eigen::VectorXd ev = Eigen::VectorXd::Constant(1, k0 * k0);
  for (const auto& di : d) {
    Eigen::VectorXd next(ev.size() * di.size());
    for (Eigen::Index a = 0; a < ev.size(); ++a) {
      next.segment(a * di.size(), di.size()) = ev[a] * di;
    }
    ev = std::move(next);
  }
  return ev;
}

KronFactors kron_factorize(const std::vector<std::vector<double>>& knots, const RQHypers& h) {
  h.validate();
  if (knots.size() != h.dims()) {
    throw std::invalid_argument("grid and hyperparameter dimensions differ");
  }
  KronFactors f;
  f.k0 = h.k0;
  for (std::size_t i = 0; i < knots.size(); ++i) {
    if (knots[i].empty()) throw std::invalid_argument("empty knot vector");
    const Eigen::MatrixXd g = rq_gram_1d(knots[i], h.length[i], h.alpha[i]);
    if (!g.allFinite()) {
      throw NumericError("non-finite Gram entry in dimension " + std::to_string(i + 1));
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(g);
    if (solver.info() != Eigen::Success) {
      throw NumericError("eigendecomposition failed in dimension " + std::to_string(i + 1));
    }
    f.u.push_back(solver.eigenvectors());
    f.d.push_back(solver.eigenvalues().cwiseMax(0.0));
  }
  return f;
}

KronFactors kron_factorize(const CharGrid& grid, const RQHypers& h) {
  return kron_factorize(grid.knots, h);
}

Eigen::VectorXd kron_matvec(const KronFactors& factors, const Eigen::VectorXd& x) {
  const Eigen::Index n = factors.size();
  if (x.size() != n) throw std::invalid_argument("whitened vector length differs from the grid size");
  Eigen::VectorXd v = x;
  Eigen::Index pre = 1;
  for (std::size_t i = 0; i < factors.u.size(); ++i) {
    const Eigen::Index m = factors.d[i].size();
    const Eigen::Index post = n / (pre * m);
    const Eigen::MatrixXd root = factors.u[i] * factors.d[i].cwiseSqrt().asDiagonal();
    for (Eigen::Index p = 0; p < pre; ++p) {
      Eigen::Map<RowMajorMatrix> block(v.data() + p * m * post, m, post);
      block = (root * block).eval();
    }
    pre *= m;
  }
  return factors.k0 * v;
}

Eigen::VectorXd standard_normal(Eigen::Index n, Rng& rng) {
  Eigen::VectorXd z(n);
  for (Eigen::Index i = 0; i < n; ++i) z[i] = rng.normal();
  return z;
}

EssResult ess_step(const Eigen::VectorXd& current, double current_log_lik,
                   const VectorLogLik& log_lik, const PriorDraw& prior_draw, Rng& rng) {
  if (std::isnan(current_log_lik)) throw NumericError("log-likelihood is NaN at the current point");
  if (!std::isfinite(current_log_lik)) {
    throw std::invalid_argument("elliptical slice sampling needs a finite current log-likelihood");
  }
  const Eigen::VectorXd nu = prior_draw(rng);
  if (nu.size() != current.size()) throw std::invalid_argument("prior draw has the wrong length");
  const double threshold = current_log_lik + std::log(rng.uniform());
  double theta = rng.uniform(0.0, 2.0 * std::numbers::pi);
  double lo = theta - 2.0 * std::numbers::pi;
  double hi = theta;
  EssResult result;
  while (true) {
    Eigen::VectorXd proposal = current * std::cos(theta) + nu * std::sin(theta);
    const double value = log_lik(proposal);
    ++result.evaluations;
    if (std::isnan(value)) throw NumericError("log-likelihood is NaN on the slice");
    if (value > threshold) {
      result.next = std::move(proposal);
      result.log_lik = value;
      return result;
    }
    if (theta < 0.0) {
      lo = theta;
    } else {
      hi = theta;
    }
    if (!(hi - lo > 1e-12)) {
      result.next = current;
      result.log_lik = current_log_lik;
      return result;
    }
    theta = rng.uniform(lo, hi);
  }
}

GridTargets::GridTargets(const MarketData& data, std::vector<std::string> characteristics,
                         CharGrid grid)
    : grid_(std::move(grid)),
      names_(std::move(characteristics)),
      days_(data.days()),
      assets_(data.assets()) {
  grid_.validate();
  if (names_.size() != grid_.dims()) {
    throw std::invalid_argument("characteristic count differs from the grid dimension");
  }
  cells_.assign(static_cast<std::size_t>(days_ * assets_), -1);
  Eigen::VectorXd x(static_cast<Eigen::Index>(names_.size()));
  for (Eigen::Index t = 0; t < days_; ++t) {
    const DecisionContext ctx(data, t);
    std::vector<Eigen::VectorXd> rows;
    for (const auto& name : names_) rows.push_back(ctx.characteristic(name));
    for (Eigen::Index i = 0; i < assets_; ++i) {
      if (!data.panel.member(t, i)) continue;
      for (std::size_t c = 0; c < names_.size(); ++c) x[static_cast<Eigen::Index>(c)] = rows[c][i];
      cells_[static_cast<std::size_t>(t * assets_ + i)] = grid_.cell_index(x);
    }
  }
}

Eigen::MatrixXd GridTargets::targets(const Eigen::VectorXd& log_map) const {
  if (log_map.size() != grid_.size()) throw std::invalid_argument("log-map length differs from the grid");
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(days_, assets_);
  for (Eigen::Index t = 0; t < days_; ++t) {
    const Eigen::Index* row = cells_.data() + t * assets_;
    double top = -kInf;
    for (Eigen::Index i = 0; i < assets_; ++i) {
      if (row[i] >= 0) top = std::max(top, log_map[row[i]]);
    }
    double total = 0.0;
    for (Eigen::Index i = 0; i < assets_; ++i) {
      if (row[i] < 0) continue;
      const double w = std::exp(log_map[row[i]] - top);
      out(t, i) = w;
      total += w;
    }
    out.row(t) /= total;
  }
  return out;
}

CharGrid observed_grid(const MarketData& data, const std::vector<std::string>& characteristics,
                       std::size_t knots_per_dim) {
  if (characteristics.empty()) throw std::invalid_argument("need at least one characteristic");
  const std::size_t d = characteristics.size();
  const std::size_t m = knots_per_dim > 0 ? knots_per_dim : (d == 1 ? 64 : d == 2 ? 32 : 16);
  std::vector<double> lo(d, kInf);
  std::vector<double> hi(d, -kInf);
  for (Eigen::Index t = 0; t < data.days(); ++t) {
    const DecisionContext ctx(data, t);
    for (std::size_t c = 0; c < d; ++c) {
      const Eigen::VectorXd row = ctx.characteristic(characteristics[c]);
      for (Eigen::Index i = 0; i < data.assets(); ++i) {
        if (!data.panel.member(t, i)) continue;
        lo[c] = std::min(lo[c], row[i]);
        hi[c] = std::max(hi[c], row[i]);
      }
    }
  }
  CharGrid grid;
  for (std::size_t c = 0; c < d; ++c) {
    if (!std::isfinite(lo[c]) || !std::isfinite(hi[c])) {
      throw DataError("characteristic '" + characteristics[c] + "' has no observed values");
    }
    if (!(hi[c] > lo[c])) {
      lo[c] -= 0.5;
      hi[c] += 0.5;
    }
    grid.knots.push_back(CharGrid::uniform_knots(lo[c], hi[c], m));
  }
  return grid;
}

void GibbsConfig::validate() const {
  if (iterations < 1) throw std::invalid_argument("Gibbs sampler needs at least one iteration");
  if (burn_in < 0 || burn_in >= iterations) {
    throw std::invalid_argument("burn-in must lie in [0, iterations)");
  }
  if (init_attempts < 0) throw std::invalid_argument("initialization attempts must be nonnegative");
}

GPPosterior blocked_gibbs(const GridTargets& model, const TargetPerformance& perf,
                          const GammaLikelihood& lik, const HyperPrior& prior,
                          const GibbsConfig& config, std::uint64_t seed) {
  config.validate();
  prior.validate();
  const CharGrid& grid = model.grid();
  if (prior.length.size() != grid.dims()) {
    throw std::invalid_argument("prior and grid dimensions differ");
  }
  const Eigen::Index n = grid.size();
  const auto retained = static_cast<std::size_t>(config.iterations - config.burn_in);
  std::size_t factor_bytes = 0;
  for (const auto& k : grid.knots) factor_bytes += 3 * k.size() * k.size() * sizeof(double);
  const std::size_t bytes =
      static_cast<std::size_t>(n) * sizeof(double) * (retained + 8) + factor_bytes;
  if (bytes > config.memory_budget_bytes) {
    throw ResourceError("grid of " + std::to_string(n) + " cells with " + std::to_string(retained) +
                        " retained samples needs about " + std::to_string(bytes >> 20) +
                        " MiB; use fewer knots per dimension or fewer iterations");
  }

  GPPosterior post;
  post.grid = grid;
  post.characteristics = model.characteristics();
  post.iterations = config.iterations;
  post.burn_in = config.burn_in;

  auto log_lik = [&](const Eigen::VectorXd& log_map) {
    double value;
    try {
      value = perf(model.targets(log_map));
    } catch (const UndefinedSharpeError&) {
      return -kInf;
    }
    return gamma_log_density(value, lik);
  };

  Rng rng(seed);
  RQHypers hypers = prior.median();
  KronFactors factors = kron_factorize(grid, hypers);
  Eigen::VectorXd x = Eigen::VectorXd::Zero(n);
  double ll = log_lik(kron_matvec(factors, x));
  for (int attempt = 0; !std::isfinite(ll) && attempt < config.init_attempts; ++attempt) {
    x = standard_normal(n, rng);
    ll = log_lik(kron_matvec(factors, x));
  }
  if (std::isnan(ll)) throw NumericError("log-likelihood is NaN at initialization");
  if (!std::isfinite(ll)) {
    throw InitializationError("likelihood is zero at X = 0 and at " +
                              std::to_string(config.init_attempts) +
                              " prior draws; check the likelihood location against the data");
  }

  const PriorDraw x_prior = [n](Rng& r) { return standard_normal(n, r); };
  const auto hyper_dim = static_cast<Eigen::Index>(1 + 2 * grid.dims());
  const PriorDraw z_prior = [hyper_dim](Rng& r) { return standard_normal(hyper_dim, r); };

  Eigen::VectorXd sum = Eigen::VectorXd::Zero(n);
  Eigen::VectorXd sum_sq = Eigen::VectorXd::Zero(n);
  post.log_lik_trace.reserve(static_cast<std::size_t>(config.iterations));
  for (int it = 0; it < config.iterations; ++it) {
    const VectorLogLik x_lik = [&](const Eigen::VectorXd& cand) {
      return log_lik(kron_matvec(factors, cand));
    };
    EssResult step = ess_step(x, ll, x_lik, x_prior, rng);
    post.x_evaluations += step.evaluations;
    x = std::move(step.next);
    ll = step.log_lik;

    const VectorLogLik z_lik = [&](const Eigen::VectorXd& z) {
      return log_lik(kron_matvec(kron_factorize(grid, prior.uncenter(z)), x));
    };
    step = ess_step(prior.center(hypers), ll, z_lik, z_prior, rng);
    post.hyper_evaluations += step.evaluations;
    hypers = prior.uncenter(step.next);
    factors = kron_factorize(grid, hypers);
    ll = step.log_lik;

    post.log_lik_trace.push_back(ll);
    if (it >= config.burn_in) {
      const Eigen::VectorXd log_map = kron_matvec(factors, x);
      sum += log_map;
      sum_sq += log_map.cwiseAbs2();
      post.x_samples.push_back(x);
      post.hyper_samples.push_back(hypers);
    }
  }
  const auto r = static_cast<double>(post.retained());
  post.mean_log_map = sum / r;
  if (post.retained() > 1) {
    post.sd_log_map =
        ((sum_sq - r * post.mean_log_map.cwiseAbs2()) / (r - 1.0)).cwiseMax(0.0).cwiseSqrt();
  } else {
    post.sd_log_map = Eigen::VectorXd::Zero(n);
  }
  return post;
}

double map_lookup(const GPPosterior& posterior, const Eigen::Ref<const Eigen::VectorXd>& x) {
  if (posterior.mean_log_map.size() != posterior.grid.size() || posterior.grid.size() == 0) {
    throw std::invalid_argument("posterior has no log-map on its grid");
  }
  return posterior.mean_log_map[posterior.grid.cell_index(x)];
}

Strategy posterior_strategy(const GPPosterior& posterior) {
  auto shared = std::make_shared<const GPPosterior>(posterior);
  return map_strategy([shared](const Eigen::VectorXd& x) { return map_lookup(*shared, x); },
                      shared->characteristics);
}

nlohmann::json posterior_to_json(const GPPosterior& posterior) {
  nlohmann::json j;
  j["characteristics"] = posterior.characteristics;
  j["knots"] = posterior.grid.knots;
  const Eigen::Index n = posterior.mean_log_map.size();
  std::vector<double> mean(static_cast<std::size_t>(n));
  std::vector<double> sd(static_cast<std::size_t>(n));
  std::vector<double> lower(static_cast<std::size_t>(n));
  std::vector<double> upper(static_cast<std::size_t>(n));
  for (Eigen::Index c = 0; c < n; ++c) {
    const auto cc = static_cast<std::size_t>(c);
    mean[cc] = posterior.mean_log_map[c];
    sd[cc] = posterior.sd_log_map[c];
    lower[cc] = mean[cc] - 2.0 * sd[cc];
    upper[cc] = mean[cc] + 2.0 * sd[cc];
  }
  j["mean_log_map"] = mean;
  j["sd_log_map"] = sd;
  j["band_lower"] = lower;
  j["band_upper"] = upper;

  auto summarize = [&](auto get) {
    double s = 0.0;
    double s2 = 0.0;
    for (const auto& h : posterior.hyper_samples) {
      const double v = std::log(get(h));
      s += v;
      s2 += v * v;
    }
    const auto r = static_cast<double>(posterior.hyper_samples.size());
    nlohmann::json out;
    if (r < 1.0) return out;
    const double m = s / r;
    out["mean_log"] = m;
    out["sd_log"] = r > 1.0 ? std::sqrt(std::max(0.0, (s2 - r * m * m) / (r - 1.0))) : 0.0;
    return out;
  };
  nlohmann::json hypers;
  hypers["k0"] = summarize([](const RQHypers& h) { return h.k0; });
  for (std::size_t i = 0; i < posterior.grid.dims(); ++i) {
    hypers["length"].push_back(summarize([i](const RQHypers& h) { return h.length[i]; }));
    hypers["alpha"].push_back(summarize([i](const RQHypers& h) { return h.alpha[i]; }));
  }
  j["hypers"] = hypers;
  j["diagnostics"] = {{"iterations", posterior.iterations},
                      {"burn_in", posterior.burn_in},
                      {"retained", posterior.retained()},
                      {"x_evaluations", posterior.x_evaluations},
                      {"hyper_evaluations", posterior.hyper_evaluations},
                      {"log_lik_trace", posterior.log_lik_trace}};
  return j;
}

GPPosterior posterior_from_json(const nlohmann::json& j) {
  GPPosterior post;
  try {
    post.characteristics = j.at("characteristics").get<std::vector<std::string>>();
    post.grid.knots = j.at("knots").get<std::vector<std::vector<double>>>();
    const auto mean = j.at("mean_log_map").get<std::vector<double>>();
    const auto sd = j.at("sd_log_map").get<std::vector<double>>();
    post.mean_log_map = Eigen::Map<const Eigen::VectorXd>(mean.data(), static_cast<Eigen::Index>(mean.size()));
    post.sd_log_map = Eigen::Map<const Eigen::VectorXd>(sd.data(), static_cast<Eigen::Index>(sd.size()));
    if (const auto it = j.find("diagnostics"); it != j.end()) {
      post.iterations = it->value("iterations", 0);
      post.burn_in = it->value("burn_in", 0);
      post.x_evaluations = it->value("x_evaluations", 0);
      post.hyper_evaluations = it->value("hyper_evaluations", 0);
      post.log_lik_trace = it->value("log_lik_trace", std::vector<double>{});
    }
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("invalid posterior artifact: ") + e.what());
  }
  try {
    post.grid.validate();
  } catch (const std::invalid_argument& e) {
    throw DataError(std::string("invalid posterior grid: ") + e.what());
  }
  if (post.mean_log_map.size() != post.grid.size() || post.sd_log_map.size() != post.grid.size() ||
      post.characteristics.size() != post.grid.dims()) {
    throw DataError("posterior artifact sizes are inconsistent");
  }
  return post;
}

void write_map_csv(std::ostream& out, const GPPosterior& posterior) {
  const std::size_t d = posterior.grid.dims();
  for (std::size_t i = 0; i < d; ++i) out << 'x' << '_' << (i + 1) << ',';
  out << "mean,sd,lower,upper\n";
  const Eigen::MatrixXd pts = posterior.grid.points();
  for (Eigen::Index c = 0; c < pts.rows(); ++c) {
    for (Eigen::Index i = 0; i < pts.cols(); ++i) out << csv::format_double(pts(c, i)) << ',';
    const double m = posterior.mean_log_map[c];
    const double s = posterior.sd_log_map[c];
    out << csv::format_double(m) << ',' << csv::format_double(s) << ','
        << csv::format_double(m - 2.0 * s) << ',' << csv::format_double(m + 2.0 * s) << '\n';
  }
}

}  // namespace spt
