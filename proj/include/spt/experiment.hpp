#pragma once

#include "spt/backtest.hpp"
#include "spt/gp_engine.hpp"
#include "spt/inference.hpp"

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace spt {

/// Rolling walk-forward protocol over calendar years (the first four
/// characters of each date).
struct ExperimentPlan {
  int train_years = 10;
  int test_years = 5;
  int roll_years = 1;
  int start_year = 0;  ///< first training year; 0 = first year in the data

  void validate() const;
};

struct Fold {
  int index = 0;
  Eigen::Index train_begin = 0;  ///< day range [train_begin, train_end)
  Eigen::Index train_end = 0;
  Eigen::Index test_begin = 0;   ///< day range [test_begin, test_end)
  Eigen::Index test_end = 0;
  std::string train_first, train_last, test_first, test_last;
};

struct FoldPlan {
  std::vector<Fold> folds;
  std::vector<std::string> warnings;  ///< skipped folds
};

/// Folds of the plan over the panel's dates. Folds whose train or test window
/// has fewer than two trading days are skipped with a warning.
FoldPlan plan_folds(const std::vector<std::string>& dates, const ExperimentPlan& plan);

enum class LearnerKind { Ewp, Market, DwpFixed, DwpGrid, DwpMh, Gp };

struct LearnerSpec {
  std::string name;
  LearnerKind kind = LearnerKind::Ewp;
  double p = 0.0;                           ///< DwpFixed only
  std::vector<std::string> characteristics; ///< Gp only
};

/// Parses `ewp`, `market`, `dwp:p=<x>`, `dwp*`, `dwp`, `cap`, `cap+roa`,
/// `gp:chars=a+b`. Throws std::invalid_argument on anything else.
LearnerSpec parse_learner(const std::string& spec);

/// EWP, Market, DWP*, DWP, CAP, CAP+ROA.
std::vector<LearnerSpec> default_learners();

enum class PerformanceKind { ExcessReturn, Sharpe };

PerformanceKind parse_performance(const std::string& name);

struct LearningConfig {
  BacktestConfig backtest;
  PerformanceKind performance = PerformanceKind::ExcessReturn;
  double likelihood_mean = 7.0;
  double likelihood_sd = 0.5;
  /// When set, the Gamma mean is the best DWP grid performance on the
  /// training data and the sd is this fraction of it.
  std::optional<double> auto_likelihood_sd_fraction;
  GridSearchConfig grid;
  ChainConfig mh;
  GibbsConfig gibbs;
  std::size_t knots_per_dim = 0;
  std::uint64_t seed = 1;
};

/// Performance functional on `data` (excess terminal wealth over EWP, or the
/// annualized Sharpe ratio of net returns).
TargetPerformance make_performance(const MarketData& data, const LearningConfig& config);

/// Gamma likelihood for `data`, resolving the automatic location if requested.
GammaLikelihood make_likelihood(const MarketData& data, const TargetPerformance& perf,
                                const LearningConfig& config);

struct TrainedStrategy {
  std::string name;
  Strategy strategy;
  nlohmann::json learned = nlohmann::json::object();  ///< p*, chain summary, ...
  std::vector<double> chain_samples;                  ///< DwpMh only
  std::optional<GPPosterior> posterior;               ///< Gp only
};

/// Trains on `train` and returns a frozen strategy. MH chains start at the
/// first feasible exponent of the scan 0, 0.5, -0.5, ...
TrainedStrategy train_learner(const LearnerSpec& spec, const MarketData& train,
                              const LearningConfig& config, std::uint64_t seed);

struct StrategyResult {
  std::string name;
  WealthSeries in_sample;
  WealthSeries out_of_sample;
  double is_ret = 0.0;   ///< annualized, percent
  double oos_ret = 0.0;  ///< annualized, percent
  double oos_sr = 0.0;   ///< NaN when undefined
  double is_turnover = 0.0;
  double oos_turnover = 0.0;
  nlohmann::json learned = nlohmann::json::object();
  std::vector<double> chain_samples;
  std::optional<GPPosterior> posterior;
};

/// Recomputes the summary numbers of a result from its stored series.
void recompute_metrics(StrategyResult& result, int periods_per_year);

struct FoldReport {
  Fold fold;
  std::vector<StrategyResult> results;
};

struct AggregateRow {
  std::string name;
  double is_mean = 0.0;
  double is_pm = 0.0;   ///< 2 sample sd / sqrt(folds)
  double oos_mean = 0.0;
  double oos_pm = 0.0;
  double oos_sr_mean = 0.0;
};

struct ExperimentResult {
  std::vector<FoldReport> folds;
  std::vector<AggregateRow> aggregate;
  std::vector<std::string> warnings;
  int periods_per_year = 252;
};

/// mean +/- 2 sd / sqrt(n) per learner over the given folds.
std::vector<AggregateRow> aggregate_folds(const std::vector<FoldReport>& folds);

/// Trains each learner on every fold's training window and evaluates the
/// frozen strategy on the training and test windows.
ExperimentResult run_experiment(const MarketData& data, const ExperimentPlan& plan,
                                const std::vector<LearnerSpec>& learners,
                                const LearningConfig& config);

nlohmann::json wealth_to_json(const WealthSeries& series);
WealthSeries wealth_from_json(const nlohmann::json& j);
nlohmann::json experiment_to_json(const ExperimentResult& result);
ExperimentResult experiment_from_json(const nlohmann::json& j);

/// Writes table1.csv, table2.csv, figure1.csv, figure2.csv and one
/// figure3_<learner>.csv per GP learner (last fold) into `dir`. Returns the
/// paths written.
std::vector<std::filesystem::path> write_report(const ExperimentResult& result,
                                                const std::filesystem::path& dir,
                                                int histogram_bins = 40);

}  // namespace spt
