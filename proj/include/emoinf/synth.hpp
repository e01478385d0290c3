#pragma once

#include <array>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <tuple>
#include <vector>

#include "emoinf/factor_graph.hpp"

namespace emoinf {

// ---------------------------------------------------------------------------
// Gibbs sampling

/// Single-site Gibbs sampler over a factor graph's unclamped variables,
/// visiting them in graph order each sweep.
class GibbsSampler {
 public:
  /// `unary[v]` adds a log-potential per state of variable v (may be empty).
  GibbsSampler(const FactorGraph& graph, std::vector<FactorTable> tables,
               std::vector<std::array<double, 2>> unary, std::uint64_t seed);

  void sweep();
  void run(int sweeps) {
    for (int i = 0; i < sweeps; ++i) sweep();
  }

  /// P(state 1 | all other variables at their current states).
  double conditional(std::size_t var) const;
  const std::vector<int>& states() const { return states_; }
  Assignment assignment() const;

 private:
  const FactorGraph& graph_;
  std::vector<FactorTable> tables_;
  std::vector<std::array<double, 2>> unary_;
  std::vector<int> states_;
  std::mt19937_64 rng_;
};

// ---------------------------------------------------------------------------
// Synthetic networks

struct SynthConfig {
  std::uint64_t seed = 1;
  std::size_t users = 50;
  TimeSlice slices = 8;
  double mean_degree = 4.0;
  double images_per_slice = 2.0;   // Poisson mean per user-slice
  double edge_dropout = 0.0;       // per edge-slice; 0 keeps the topology static
  UserParams planted{2.0, 1.5, 0.5, 1.5, 1.0, 1.0};
  double feature_separation = 1.5;  // distance between class means, in sigma
  double feature_sigma = 1.0;
  double influence_density = 0.3;
  /// Log-odds pulling each InfluenceVar toward its edge's tendency. Infinite
  /// fixes the variable to the tendency.
  double influence_bias = std::numeric_limits<double>::infinity();
  double observation_rate = 0.5;
  int burn_in = 1000;
  std::uint32_t window = 1;
  Emotion category = Emotion::happiness;

  void validate() const;
};

/// Directed influence key (source user, target user, slice).
using InfluenceKey = std::tuple<std::uint32_t, std::uint32_t, TimeSlice>;

struct SynthResult {
  TimeVaryingNetwork network;   // labels revealed at the observation rate
  Assignment truth;             // over build_graph(network, category, window)
  std::vector<int> full_labels; // sampled label of every image, +-1
  std::set<std::pair<std::uint32_t, std::uint32_t>> tendencies;  // directed edges with tendency 1
};

SynthResult generate(const SynthConfig& config);

/// Directed edge-slices whose InfluenceVar is 1 in `truth`.
std::set<InfluenceKey> influence_ground_truth(const FactorGraph& graph, const Assignment& truth);

/// Influence probability per directed edge-slice from a marginal table.
std::map<InfluenceKey, double> influence_weights(const FactorGraph& graph,
                                                 const std::vector<std::array<double, 2>>& marginals);

/// ROC AUC of `predicted` against membership in `truth` by the rank-sum
/// statistic, ties counting one half. nullopt when either class is empty.
std::optional<double> score_influence_recovery(const std::map<InfluenceKey, double>& predicted,
                                               const std::set<InfluenceKey>& truth);

/// Sidecar truth document: full assignment by variable name plus the planted
/// parameters and generator settings.
std::string truth_json(const SynthResult& result, const SynthConfig& config);

std::string synth_config_json(const SynthConfig& config);
SynthConfig parse_synth_config(const std::string& text);

}  // namespace emoinf
