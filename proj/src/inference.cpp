#include "spt/inference.hpp"

#include "spt/csv.hpp"
#include "spt/errors.hpp"
#include "spt/portfolios.hpp"

#include <cmath>
#include <limits>
#include <numeric>
#include <ostream>
#include <stdexcept>
#include <unordered_map>

namespace spt {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

}  // namespace

GammaLikelihood::GammaLikelihood(double mean, double sd) : a_(mean), b_(sd) {
  if (!(mean > 0.0) || !std::isfinite(mean)) {
    throw std::invalid_argument("Gamma likelihood mean must be positive");
  }
  if (!(sd > 0.0) || !std::isfinite(sd)) {
    throw std::invalid_argument("Gamma likelihood standard deviation must be positive");
  }
}

double GammaLikelihood::mode() const {
  const double k = shape();
  return k > 1.0 ? (k - 1.0) * scale() : 0.0;
}

double gamma_log_density(double x, const GammaLikelihood& lik) {
  if (std::isnan(x)) return x;
  if (!(x > 0.0)) return -kInf;
  const double k = lik.shape();
  const double theta = lik.scale();
  return (k - 1.0) * std::log(x) - x / theta - std::lgamma(k) - k * std::log(theta);
}

Eigen::MatrixXd dwp_targets(const MarketData& data, double p) {
  const auto cap_it = data.characteristics.find(kCapCharacteristic);
  if (cap_it == data.characteristics.end()) throw DataError("panel has no 'cap' characteristic");
  const Eigen::MatrixXd& caps = cap_it->second;
  const Eigen::Index n = data.assets();
  Eigen::MatrixXd targets = Eigen::MatrixXd::Zero(data.days(), n);
  std::vector<Eigen::Index> idx;
  Eigen::VectorXd mu;
  for (Eigen::Index t = 0; t < data.days(); ++t) {
    idx.clear();
    for (Eigen::Index i = 0; i < n; ++i) {
      if (data.panel.member(t, i)) idx.push_back(i);
    }
    if (idx.empty()) throw DataError("empty universe on " + data.panel.dates[static_cast<std::size_t>(t)]);
    mu.resize(static_cast<Eigen::Index>(idx.size()));
    double total = 0.0;
    for (std::size_t k = 0; k < idx.size(); ++k) total += caps(t, idx[k]);
    for (std::size_t k = 0; k < idx.size(); ++k) {
      mu[static_cast<Eigen::Index>(k)] = caps(t, idx[k]) / total;
    }
    const PortfolioWeights w = dwp_weights(mu, p);
    for (std::size_t k = 0; k < idx.size(); ++k) targets(t, idx[k]) = w[static_cast<Eigen::Index>(k)];
  }
  return targets;
}

ExponentObjective dwp_objective(const MarketData& data, TargetPerformance perf) {
  return [&data, perf = std::move(perf)](double p) { return perf(dwp_targets(data, p)); };
}

void GridSearchConfig::validate() const {
  if (!(mesh > 0.0)) throw std::invalid_argument("grid mesh must be positive");
  if (!(lo < hi)) throw std::invalid_argument("grid bounds must satisfy lo < hi");
}

std::size_t GridSearchResult::failures() const {
  std::size_t count = 0;
  for (const auto& point : points) count += point.ok ? 0 : 1;
  return count;
}

std::vector<double> exponent_grid(const GridSearchConfig& config) {
  config.validate();
  const long k_max = std::max(1L, std::lround((config.hi - config.lo) / config.mesh));
  std::vector<double> grid(static_cast<std::size_t>(k_max + 1));
  for (long k = 0; k <= k_max; ++k) {
    grid[static_cast<std::size_t>(k)] =
        (config.lo * static_cast<double>(k_max - k) + config.hi * static_cast<double>(k)) /
        static_cast<double>(k_max);
  }
  return grid;
}

GridSearchResult grid_search(const ExponentObjective& objective, const GridSearchConfig& config) {
  GridSearchResult result;
  bool found = false;
  for (const double p : exponent_grid(config)) {
    GridPoint point{p, 0.0, false, {}};
    try {
      point.perf = objective(p);
      if (std::isfinite(point.perf)) {
        point.ok = true;
      } else {
        point.error = "performance is not finite";
      }
    } catch (const std::exception& e) {
      point.error = e.what();
    }
    if (point.ok) {
      const double tol = 1e-12 * std::max(1.0, std::abs(result.best));
      if (!found || point.perf > result.best + tol) {
        result.best = point.perf;
        result.p_star = p;
        found = true;
      } else if (std::abs(point.perf - result.best) <= tol &&
                 std::abs(p) < std::abs(result.p_star)) {
        result.best = std::max(result.best, point.perf);
        result.p_star = p;
      }
    }
    result.points.push_back(std::move(point));
  }
  if (!found) {
    throw NoFeasiblePointError("every grid point failed; first error: " +
                               result.points.front().error);
  }
  return result;
}

GridSearchResult grid_search_dwp(const MarketData& data, const TargetPerformance& perf,
                                 const GridSearchConfig& config) {
  return grid_search(dwp_objective(data, perf), config);
}

void ChainConfig::validate() const {
  if (iterations < 1) throw std::invalid_argument("chain needs at least one iteration");
  if (burn_in < 0 || burn_in >= iterations) {
    throw std::invalid_argument("burn-in must lie in [0, iterations)");
  }
  if (!(proposal_std > 0.0)) throw std::invalid_argument("proposal std must be positive");
  if (!(lo < hi)) throw std::invalid_argument("prior bounds must satisfy lo < hi");
  if (!(initial_p >= lo && initial_p <= hi)) {
    throw std::invalid_argument("initial p lies outside the prior bounds");
  }
}

double ExponentChain::acceptance_rate() const {
  return samples.empty() ? 0.0
                         : static_cast<double>(accept_count) / static_cast<double>(samples.size());
}

double ExponentChain::posterior_mean() const {
  if (samples.empty()) throw std::logic_error("chain has no retained samples");
  return std::accumulate(samples.begin(), samples.end(), 0.0) /
         static_cast<double>(samples.size());
}

double ExponentChain::posterior_sd() const {
  if (samples.size() < 2) return 0.0;
  const double m = posterior_mean();
  double ss = 0.0;
  for (const double s : samples) ss += (s - m) * (s - m);
  return std::sqrt(ss / static_cast<double>(samples.size() - 1));
}

double mh_acceptance_probability(double log_cur, double log_prop, bool in_support) {
  if (!in_support || log_prop == -kInf) return 0.0;
  if (std::isnan(log_prop) || std::isnan(log_cur)) {
    throw NumericError("log-likelihood is NaN");
  }
  const double diff = log_prop - log_cur;
  return diff >= 0.0 ? 1.0 : std::exp(diff);
}

bool mh_accept(double log_cur, double log_prop, bool in_support, Rng& rng) {
  if (!in_support) return false;
  if (std::isnan(log_prop) || std::isnan(log_cur)) throw NumericError("log-likelihood is NaN");
  if (log_prop == -kInf) return false;
  return std::log(rng.uniform()) < log_prop - log_cur;
}

ExponentChain mh_sample(const ExponentObjective& log_target, const ChainConfig& config,
                        std::uint64_t seed) {
  config.validate();
  ExponentChain chain;
  chain.config = config;
  std::unordered_map<long long, double> memo;
  auto evaluate = [&](double p) {
    const auto key = std::llround(p / 1e-9);
    if (const auto it = memo.find(key); it != memo.end()) return it->second;
    const double value = log_target(p);
    ++chain.likelihood_evaluations;
    if (std::isnan(value)) throw NumericError("log-likelihood is NaN at p = " + std::to_string(p));
    memo.emplace(key, value);
    return value;
  };

  double p = config.initial_p;
  double ll = evaluate(p);
  if (ll == -kInf) {
    throw InitializationError("likelihood is zero at the initial p = " + std::to_string(p) +
                              "; choose a start with positive performance");
  }
  Rng rng(seed);
  const auto total = static_cast<std::size_t>(config.iterations);
  chain.trace.reserve(total);
  chain.log_lik.reserve(total);
  chain.accepted.reserve(total);
  for (int it = 0; it < config.iterations; ++it) {
    const double proposal = p + config.proposal_std * rng.normal();
    const bool inside = proposal >= config.lo && proposal <= config.hi;
    const double ll_prop = inside ? evaluate(proposal) : -kInf;
    const bool accept = mh_accept(ll, ll_prop, inside, rng);
    if (accept) {
      p = proposal;
      ll = ll_prop;
    }
    chain.trace.push_back(p);
    chain.log_lik.push_back(ll);
    chain.accepted.push_back(accept);
    if (it >= config.burn_in) {
      chain.samples.push_back(p);
      chain.accept_count += accept ? 1 : 0;
    }
  }
  return chain;
}

ExponentChain mh_sample_dwp(const MarketData& data, const TargetPerformance& perf,
                            const GammaLikelihood& lik, const ChainConfig& config,
                            std::uint64_t seed) {
  const ExponentObjective objective = dwp_objective(data, perf);
  return mh_sample([&](double p) { return gamma_log_density(objective(p), lik); }, config, seed);
}

double feasible_start(const ExponentObjective& log_target, double lo, double hi, double step) {
  if (!(step > 0.0)) throw std::invalid_argument("scan step must be positive");
  const double reach = std::max(std::abs(lo), std::abs(hi));
  for (int k = 0; static_cast<double>(k) * step <= reach; ++k) {
    for (const double sign : {1.0, -1.0}) {
      if (k == 0 && sign < 0.0) continue;
      const double p = sign * static_cast<double>(k) * step;
      if (p < lo || p > hi) continue;
      const double value = log_target(p);
      if (std::isfinite(value)) return p;
    }
  }
  throw InitializationError("no exponent in the scan has positive likelihood");
}

double batch_means_se(const std::vector<double>& samples, int batches) {
  if (batches < 2) throw std::invalid_argument("batch means need at least two batches");
  const std::size_t size = samples.size() / static_cast<std::size_t>(batches);
  if (size < 1) throw std::invalid_argument("too few samples for the batch count");
  std::vector<double> means;
  for (int b = 0; b < batches; ++b) {
    const auto begin = samples.begin() + static_cast<std::ptrdiff_t>(b * size);
    means.push_back(std::accumulate(begin, begin + static_cast<std::ptrdiff_t>(size), 0.0) /
                    static_cast<double>(size));
  }
  const double grand = std::accumulate(means.begin(), means.end(), 0.0) / batches;
  double ss = 0.0;
  for (const double m : means) ss += (m - grand) * (m - grand);
  return std::sqrt(ss / static_cast<double>(batches - 1) / static_cast<double>(batches));
}

void write_chain_csv(std::ostream& out, const ExponentChain& chain) {
  out << "iter,p,log_lik,accepted\n";
  for (std::size_t i = 0; i < chain.trace.size(); ++i) {
    out << i << ',' << csv::format_double(chain.trace[i]) << ','
        << csv::format_double(chain.log_lik[i]) << ',' << (chain.accepted[i] ? 1 : 0) << '\n';
  }
}

nlohmann::json chain_summary(const ExponentChain& chain) {
  return {{"posterior_mean", chain.posterior_mean()},
          {"posterior_sd", chain.posterior_sd()},
          {"acceptance_rate", chain.acceptance_rate()},
          {"retained", chain.samples.size()},
          {"iterations", chain.config.iterations},
          {"burn_in", chain.config.burn_in},
          {"proposal_std", chain.config.proposal_std},
          {"likelihood_evaluations", chain.likelihood_evaluations}};
}

}  // namespace spt
