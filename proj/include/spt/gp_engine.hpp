#pragma once

#include "spt/backtest.hpp"
#include "spt/inference.hpp"
#include "spt/rng.hpp"

#include <Eigen/Dense>
#include <json.hpp>

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

namespace spt {

/// Cartesian grid of characteristic values. Flat cell index runs with the
/// first dimension slowest (row-major order).
struct CharGrid {
  std::vector<std::vector<double>> knots;

  [[nodiscard]] std::size_t dims() const { return knots.size(); }
  [[nodiscard]] Eigen::Index size() const;
  [[nodiscard]] double lower(std::size_t dim) const { return knots[dim].front(); }
  [[nodiscard]] double upper(std::size_t dim) const { return knots[dim].back(); }

  /// Every knot vector non-empty, finite and strictly increasing.
  void validate() const;

  /// m knots spaced uniformly on [lo, hi].
  static std::vector<double> uniform_knots(double lo, double hi, std::size_t m);

  /// Coordinates of every cell, N x d, in flat-index order.
  [[nodiscard]] Eigen::MatrixXd points() const;

  /// Clamps x into the bounding box and snaps each coordinate to the nearest
  /// knot; an exact midpoint goes to the lower knot.
  [[nodiscard]] Eigen::Index cell_index(const Eigen::Ref<const Eigen::VectorXd>& x) const;
};

struct LogNormalPrior {
  double location = 0.0;  ///< mean of the log
  double scale = 1.0;     ///< standard deviation of the log
};

struct RQHypers {
  double k0 = 1.0;
  std::vector<double> length;
  std::vector<double> alpha;

  void validate() const;
  [[nodiscard]] std::size_t dims() const { return length.size(); }
};

/// Independent log-normal priors on k0, every l_i and every alpha_i.
struct HyperPrior {
  LogNormalPrior k0;
  std::vector<LogNormalPrior> length;
  std::vector<LogNormalPrior> alpha;

  void validate() const;

  /// Centered log coordinates (log h - location) / scale, ordered
  /// (k0, l_1..l_d, alpha_1..alpha_d); standard normal under the prior.
  [[nodiscard]] Eigen::VectorXd center(const RQHypers& h) const;
  [[nodiscard]] RQHypers uncenter(const Eigen::VectorXd& z) const;
  /// Hypers at the prior locations (z = 0).
  [[nodiscard]] RQHypers median() const;
};

/// Length-scale locations at log(median pairwise knot distance); k0 and
/// alpha locations at 0; all scales 1.
HyperPrior default_hyper_prior(const CharGrid& grid);

/// k0^2 prod_i (1 + (x_i - y_i)^2 / (2 alpha_i l_i^2))^(-alpha_i).
double rq_kernel(const Eigen::Ref<const Eigen::VectorXd>& x,
                 const Eigen::Ref<const Eigen::VectorXd>& y, const RQHypers& h);

/// One-dimensional factor without the amplitude.
Eigen::MatrixXd rq_gram_1d(const std::vector<double>& knots, double length, double alpha);

/// Per-dimension eigendecompositions G_i = U_i diag(D_i) U_i^T with
/// eigenvalues clamped at 0; K = k0^2 (G_1 kron ... kron G_d).
struct KronFactors {
  double k0 = 1.0;
  std::vector<Eigen::MatrixXd> u;
  std::vector<Eigen::VectorXd> d;

  [[nodiscard]] Eigen::Index size() const;
  /// Dense K; only for small grids.
  [[nodiscard]] Eigen::MatrixXd assemble() const;
  /// Dense L = k0 (U_1 D_1^{1/2} kron ...); only for small grids.
  [[nodiscard]] Eigen::MatrixXd dense_root() const;
  /// All N eigenvalues of K (unsorted).
  [[nodiscard]] Eigen::VectorXd eigenvalues() const;
};

/// Knot vectors need not be strictly increasing here (repeated knots give a
/// singular K). Non-finite Gram entries raise NumericError naming the dimension.
KronFactors kron_factorize(const std::vector<std::vector<double>>& knots, const RQHypers& h);
KronFactors kron_factorize(const CharGrid& grid, const RQHypers& h);

/// log f = L X without forming any N x N matrix.
Eigen::VectorXd kron_matvec(const KronFactors& factors, const Eigen::VectorXd& x);

using VectorLogLik = std::function<double(const Eigen::VectorXd&)>;
using PriorDraw = std::function<Eigen::VectorXd(Rng&)>;

struct EssResult {
  Eigen::VectorXd next;
  double log_lik = 0.0;
  int evaluations = 0;  ///< likelihood calls made by this step
};

/// One elliptical slice sampling update for a zero-mean Gaussian prior.
/// `current_log_lik` must be log_lik(current). If the angle bracket shrinks to
/// nothing the current point is returned.
EssResult ess_step(const Eigen::VectorXd& current, double current_log_lik,
                   const VectorLogLik& log_lik, const PriorDraw& prior_draw, Rng& rng);

/// Standard normal draw of the given length.
Eigen::VectorXd standard_normal(Eigen::Index n, Rng& rng);

/// Maps a log-map on the grid to target weights over the panel. Each
/// (day, member) cell is located once from the characteristics known
/// before that day.
class GridTargets {
 public:
  GridTargets(const MarketData& data, std::vector<std::string> characteristics,
              CharGrid grid);

  [[nodiscard]] Eigen::MatrixXd targets(const Eigen::VectorXd& log_map) const;
  [[nodiscard]] const CharGrid& grid() const { return grid_; }
  [[nodiscard]] const std::vector<std::string>& characteristics() const { return names_; }

 private:
  CharGrid grid_;
  std::vector<std::string> names_;
  Eigen::Index days_;
  Eigen::Index assets_;
  std::vector<Eigen::Index> cells_;  ///< days x assets, -1 off the universe
};

/// Grid spanning the observed range of each characteristic over members.
/// `knots_per_dim` = 0 selects 64 knots for d = 1, 32 for d = 2, 16 otherwise.
CharGrid observed_grid(const MarketData& data, const std::vector<std::string>& characteristics,
                       std::size_t knots_per_dim = 0);

struct GibbsConfig {
  int iterations = 2000;
  int burn_in = 1000;
  int init_attempts = 100;
  std::size_t memory_budget_bytes = std::size_t{1} << 30;

  void validate() const;
};

struct GPPosterior {
  CharGrid grid;
  std::vector<std::string> characteristics;
  Eigen::VectorXd mean_log_map;  ///< posterior mean of log f per cell
  Eigen::VectorXd sd_log_map;    ///< posterior sd of log f per cell
  std::vector<Eigen::VectorXd> x_samples;
  std::vector<RQHypers> hyper_samples;
  std::vector<double> log_lik_trace;  ///< one entry per iteration
  int x_evaluations = 0;
  int hyper_evaluations = 0;
  int iterations = 0;
  int burn_in = 0;

  [[nodiscard]] std::size_t retained() const { return x_samples.size(); }
};

/// Blocked Gibbs over (X, log hypers): each block is one ESS update, the
/// hyper block on centered log coordinates with refactorization per call.
GPPosterior blocked_gibbs(const GridTargets& model, const TargetPerformance& perf,
                          const GammaLikelihood& lik, const HyperPrior& prior,
                          const GibbsConfig& config, std::uint64_t seed);

/// Posterior-mean log-map at the cell containing x.
double map_lookup(const GPPosterior& posterior, const Eigen::Ref<const Eigen::VectorXd>& x);

/// Frozen strategy using the posterior-mean map.
Strategy posterior_strategy(const GPPosterior& posterior);

nlohmann::json posterior_to_json(const GPPosterior& posterior);
/// Restores grid, names, the mean/sd maps and the diagnostics counters and
/// trace. Raw samples are not stored, so hyper summaries are lost.
GPPosterior posterior_from_json(const nlohmann::json& j);

/// Rows `x_1..x_d,mean,sd,lower,upper` with lower/upper = mean -/+ 2 sd.
void write_map_csv(std::ostream& out, const GPPosterior& posterior);

}  // namespace spt
