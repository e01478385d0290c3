#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <set>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "emoinf/learning.hpp"
#include "emoinf/synth.hpp"

namespace emoinf {

// ---------------------------------------------------------------------------
// Sampling test

struct SamplingConfig {
  std::size_t group_size = 50;
  int repetitions = 10;
  std::vector<std::uint32_t> deltas{1, 2, 3, 4};
  std::uint64_t seed = 1;
  /// Require the [t - delta, t] windows of different repetitions to be
  /// disjoint instead of only the t values.
  bool disjoint_windows = false;
};

struct SamplingGroup {
  double ratio = 0.0;          // mean over repetitions where the group was non-empty
  std::size_t members = 0;     // summed over repetitions
  int repetitions = 0;         // repetitions with a non-empty group
};

struct SamplingCell {
  std::uint32_t delta = 1;
  SamplingGroup independent;   // G_I
  SamplingGroup one_two;       // G_R, 1-2 friends with the emotion
  SamplingGroup three_plus;    // G_R, >= 3 friends with the emotion
  int repetitions = 0;         // slices actually drawn
};

struct SamplingTestReport {
  std::vector<SamplingCell> cells;
  std::size_t group_size = 0;
  int repetitions = 0;
  std::vector<std::string> warnings;
};

SamplingTestReport sampling_test(const TimeVaryingNetwork& net, Emotion category,
                                 const SamplingConfig& config = {});

// ---------------------------------------------------------------------------
// Temporal and social correlation

struct RatePoint {
  std::uint32_t delta = 1;
  double rate = 0.0;
  std::size_t users = 0;       // users contributing at this delta
  std::size_t excluded = 0;    // sampled users without a valid pair
};

struct RateReport {
  std::vector<RatePoint> points;
  std::size_t sampled = 0;
  std::vector<std::string> warnings;
};

/// Rate_T per delta: per user, the fraction of (t, t + delta) pairs with
/// derived labels at both ends that agree; averaged over users.
RateReport temporal_correlation(const TimeVaryingNetwork& net, Emotion category,
                                std::size_t user_sample, std::uint32_t max_delta,
                                std::uint64_t seed);

enum class NeighborMode : std::uint8_t { friends, random };

/// Rate_I per delta: per user and slice t where the user has the emotion, the
/// fraction of NB(user) having it at t + delta (no label counts as not
/// having it); averaged over the user's slices, then over users. NB is the
/// user's friends over all slices, or a seeded size-matched set of non-friends.
RateReport social_correlation(const TimeVaryingNetwork& net, Emotion category,
                              std::size_t user_sample, std::uint32_t max_delta, NeighborMode mode,
                              std::uint64_t seed);

// ---------------------------------------------------------------------------
// CCA

struct CcaResult {
  std::vector<double> correlations;   // descending, min(p, q) entries
  Eigen::MatrixXd x_directions;       // p x k, on standardized columns
  Eigen::MatrixXd y_directions;       // q x k
  std::vector<std::string> warnings;
};

/// Canonical correlations of the column sets X and Y (rows are samples).
/// Columns are standardized, then each covariance block gets a ridge of
/// 1e-6 times its mean diagonal before solving the generalized eigenproblem.
CcaResult cca(const Eigen::MatrixXd& x, const Eigen::MatrixXd& y);

// ---------------------------------------------------------------------------
// Evaluation

struct Metrics {
  double accuracy = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::size_t tp = 0, tn = 0, fp = 0, fn = 0;

  std::size_t total() const { return tp + tn + fp + fn; }
};

/// Confusion-matrix metrics of P(+1) predictions against +-1 truth; a
/// probability >= threshold counts as positive. Zero denominators give 0.
Metrics evaluate(const std::vector<double>& probabilities, const std::vector<int>& truth,
                 double threshold = 0.5);

struct MetricsReport {
  std::map<Emotion, Metrics> categories;
  Metrics average;   // macro average of the four rates; counts summed
};

MetricsReport summarize(const std::map<Emotion, Metrics>& categories);

// ---------------------------------------------------------------------------
// Holdout experiments and ablation

struct ExperimentConfig {
  TrainConfig train;
  std::uint32_t window = 1;
  double test_fraction = 0.2;
  std::uint64_t split_seed = 1;
};

struct ExperimentResult {
  HoldoutSplit split;
  std::vector<int> truth;                 // labels of split.test
  std::vector<double> model_probability;  // P(+1) per split.test image
  std::vector<double> baseline_score;     // w.x + b per split.test image
  Metrics model;
  Metrics baseline;
  FitResult fit;
  std::map<InfluenceKey, double> influence;
};

/// Hides the test labels, fits the model on the rest and scores both the
/// model and the linear baseline on the hidden images.
ExperimentResult run_holdout(const TimeVaryingNetwork& net, Emotion category,
                             const ExperimentConfig& config,
                             const std::set<FactorKind>& drop = {});

/// run_holdout with the given factor kinds removed at graph-build time.
Metrics ablation_run(const TimeVaryingNetwork& net, Emotion category,
                     const ExperimentConfig& config, const std::set<FactorKind>& drop);

// ---------------------------------------------------------------------------
// Reports

std::string sampling_report_json(const SamplingTestReport& report);
void write_sampling_csv(std::ostream& out, const SamplingTestReport& report);
std::string rate_report_json(const RateReport& report);
void write_rate_csv(std::ostream& out, const RateReport& report);
std::string cca_report_json(const CcaResult& result);
std::string metrics_json(const MetricsReport& report);

/// One row per category plus "average"; for each metric, one column per
/// variant in `variants` order (e.g. SVM, Model, Model-f3, ...).
void write_variant_table_csv(std::ostream& out,
                             const std::map<std::string, MetricsReport>& by_variant,
                             const std::vector<std::string>& variants);

/// Reads a numeric CSV with a header row into a matrix.
Eigen::MatrixXd read_numeric_csv(std::istream& in, std::vector<std::string>* header = nullptr);

}  // namespace emoinf
