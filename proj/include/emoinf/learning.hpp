#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "emoinf/factor_graph.hpp"
#include "emoinf/inference.hpp"

namespace emoinf {

// ---------------------------------------------------------------------------
// Parameter vector layout

/// theta = [alpha (21) | beta (N) | xi (N) | lambda (N) | eta (N)] for step 2,
/// and [delta (N) | tau (N)] for step 3.
struct ParamLayout {
  std::size_t users = 0;

  std::size_t size() const { return kFeatureDim + 4 * users; }
  std::size_t alpha(std::size_t k) const { return k; }
  std::size_t beta(std::size_t i) const { return kFeatureDim + i; }
  std::size_t xi(std::size_t i) const { return kFeatureDim + users + i; }
  std::size_t lambda(std::size_t i) const { return kFeatureDim + 2 * users + i; }
  std::size_t eta(std::size_t i) const { return kFeatureDim + 3 * users + i; }
};

using SufficientStatistics = std::vector<double>;

std::vector<double> pack_weights(const ParameterSet& params);
void unpack_weights(std::span<const double> theta, ParameterSet& params);
double dot(std::span<const double> a, std::span<const double> b);

/// phi(q) with decay rates taken from `params`, so theta . phi(q) equals objective(q).
SufficientStatistics sufficient_statistics(const FactorGraph& graph, const Assignment& q,
                                           const ParameterSet& params);

/// phi(q0) - E[phi] over {alpha, beta, xi, lambda, eta}, the expectation taken
/// from the factor marginals.
std::vector<double> gradient_step2(const FactorGraph& graph, const Assignment& q0,
                                   const ParameterSet& params, const MarginalTable& marginals);

/// d/d{delta, tau} of the same log-likelihood, laid out [delta (N) | tau (N)].
/// Coordinates already at 0 with a negative gradient are zeroed (projection).
std::vector<double> gradient_step3(const FactorGraph& graph, const Assignment& q0,
                                   const ParameterSet& params, const MarginalTable& marginals);

/// theta . phi(q0) - log Z, with Z summed over the unclamped variables.
/// Exact enumeration; throws above kBruteForceLimit unclamped variables.
double exact_log_likelihood(const FactorGraph& graph, const Assignment& q0,
                            const ParameterSet& params);

// ---------------------------------------------------------------------------
// Linear baseline

struct LabeledExample {
  FeatureVector x{};
  int y = 1;  // +1 or -1
};

struct LinearModel {
  FeatureVector weights{};
  double bias = 0.0;

  double score(const FeatureVector& x) const;
  int predict(const FeatureVector& x) const { return score(x) >= 0.0 ? 1 : -1; }
};

struct BaselineConfig {
  int epochs = 1000;
  double step = 0.5;           // divided by sqrt(epoch)
  double l2 = 1e-4;
  double tolerance = 1e-9;     // stop once the hinge objective stalls
};

/// Hinge-loss linear classifier by full-batch subgradient descent with L2
/// regularization; returns the best iterate seen. Throws on an empty set.
LinearModel train_linear_baseline(std::span<const LabeledExample> examples,
                                  const BaselineConfig& config = {});

std::vector<LabeledExample> labeled_examples(const TimeVaryingNetwork& net, Emotion category);

// ---------------------------------------------------------------------------
// Training

struct TrainConfig {
  int max_outer_iterations = 20;
  double tolerance = 1e-4;      // relative objective change
  double step = 0.05;
  int step2_iterations = 10;
  int step3_iterations = 5;
  int max_halvings = 8;
  bool freeze_decay = false;
  BpConfig bp;
  BaselineConfig baseline;

  void validate() const;
};

struct InitResult {
  ParameterSet params;
  std::vector<std::string> warnings;
};

/// alpha from the linear baseline on the labeled images, every per-user
/// scalar at its initial constant. Falls back to alpha = 0 (with a warning)
/// when either class has no labeled image.
InitResult initialize_params(const TimeVaryingNetwork& net, Emotion category,
                             const BaselineConfig& config = {});

struct TraceRow {
  int iteration = 0;
  double objective = 0.0;   // log-likelihood surrogate after the iteration
  double residual = 0.0;    // last sum-product residual
  double step2 = 0.0;       // final step size used in step 2
  double step3 = 0.0;
  bool bp_converged = true;
  bool exact = false;       // objective by enumeration rather than Bethe
};

struct FitResult {
  ParameterSet params;
  Assignment assignment;
  MarginalTable marginals;
  std::vector<TraceRow> trace;
  bool converged = false;
  std::vector<std::string> warnings;
};

FitResult fit(const FactorGraph& graph, ParameterSet init, const TrainConfig& config = {});

struct Prediction {
  Assignment assignment;
  MarginalTable marginals;
  BpDiagnostics max_diagnostics;
  BpDiagnostics sum_diagnostics;
};

Prediction predict(const FactorGraph& graph, const ParameterSet& params,
                   const BpConfig& config = {});

// ---------------------------------------------------------------------------
// Holdout split

struct HoldoutSplit {
  std::vector<std::size_t> train;  // image indices, ascending
  std::vector<std::size_t> test;
};

/// Seeded split of the images labeled for `category`; `test_fraction` of
/// them (rounded) go to the test side.
HoldoutSplit holdout_split(const TimeVaryingNetwork& net, Emotion category, double test_fraction,
                           std::uint64_t seed);

// ---------------------------------------------------------------------------
// Persistence

struct ParamsMetadata {
  Emotion category = Emotion::happiness;
  std::uint32_t window = 1;
  int iterations = 0;
  bool converged = false;
};

/// JSON document: alpha array, per-user maps keyed by user id, metadata.
std::string params_json(const ParameterSet& params, const TimeVaryingNetwork& net,
                        const ParamsMetadata& meta);
/// Users are matched by id; users unknown to the document get the initial constants.
ParameterSet parse_params(const std::string& text, const TimeVaryingNetwork& net,
                          ParamsMetadata* meta = nullptr);

void write_trace_csv(std::ostream& out, std::span<const TraceRow> trace);

}  // namespace emoinf
