#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "emoinf/factor_graph.hpp"

namespace emoinf {

enum class Schedule : std::uint8_t { synchronous, sequential };
enum class Semiring : std::uint8_t { max_product, sum_product };

struct BpConfig {
  int max_iterations = 100;
  double damping = 0.3;      // applied on loopy graphs only
  double tolerance = 1e-6;   // on the max log-message change
  Schedule schedule = Schedule::sequential;
  /// Max-product re-runs used to break max-marginal ties one variable at a time.
  int max_decimation_rounds = 64;

  void validate() const;
};

struct BpDiagnostics {
  bool converged = false;
  double residual = 0.0;
  int iterations = 0;
  std::vector<double> residuals;  // one entry per iteration
};

/// Per-variable (2 entries) and per-factor (2^arity entries) probabilities.
struct MarginalTable {
  std::vector<std::array<double, 2>> variables;
  std::vector<std::vector<double>> factors;
};

struct MapResult {
  Assignment assignment;
  BpDiagnostics diagnostics;
};

struct MarginalResult {
  MarginalTable marginals;
  BpDiagnostics diagnostics;
};

/// Log-space loopy BP over a FactorGraph.
///
/// Keeps its messages between runs so repeated runs under slowly changing
/// parameters start warm. Clamped variables send fixed delta messages and
/// never receive updates. One instance must not be shared across threads.
class BeliefPropagator {
 public:
  explicit BeliefPropagator(const FactorGraph& graph, BpConfig config = {});

  void set_params(const ParameterSet& params);
  void set_tables(std::vector<FactorTable> tables);

  /// Temporarily clamps `var` to `state` on top of the graph's own clamps.
  void clamp(std::size_t var, int state);
  void clear_clamps();
  void reset_messages();

  BpDiagnostics run(Semiring mode);

  /// Normalized log-belief of `var` after the last run in `mode`.
  std::array<double, 2> log_belief(std::size_t var, Semiring mode) const;
  int effective_clamp(std::size_t var) const { return clamp_[var]; }

  MarginalTable marginals() const;
  /// Argmax of the max-product beliefs; ties go to state 0.
  Assignment decode() const;
  /// First unclamped variable whose max-product belief is tied, or -1.
  std::int64_t first_tie() const;

  bool loopy() const { return loopy_; }
  const BpConfig& config() const { return config_; }

 private:
  using Message = std::array<double, 2>;

  void compute_beliefs(int mode);
  Message incoming(std::size_t f, std::size_t k, int mode) const;
  Message factor_message(std::size_t f, std::size_t k, int mode, const std::array<Message, 3>& in,
                         const std::array<double, 8>& joint, bool fast) const;
  double update_factor(std::size_t f, int mode, bool apply, bool damp,
                       std::vector<Message>* staged);

  const FactorGraph& graph_;
  BpConfig config_;
  bool loopy_;
  std::vector<FactorTable> tables_;
  std::vector<std::int8_t> clamp_;
  // messages_[mode][3 * factor + position], factor -> variable
  std::array<std::vector<Message>, 2> messages_;
  std::array<std::vector<Message>, 2> beliefs_;
};

MapResult max_product(const FactorGraph& graph, const ParameterSet& params,
                      const BpConfig& config = {});
MarginalResult sum_product(const FactorGraph& graph, const ParameterSet& params,
                           const BpConfig& config = {});

/// Max-product with tie-breaking decimation on an existing propagator.
MapResult decode_map(BeliefPropagator& bp);

// ---------------------------------------------------------------------------
// Exact oracles (unclamped variable count <= kBruteForceLimit)

inline constexpr std::size_t kBruteForceLimit = 20;

/// Exact argmax of the objective. Among optima (within 1e-9 relative) the
/// lexicographically smallest state vector in variable order is returned,
/// which is the assignment tie-breaking max-product converges to on trees.
Assignment brute_force_map(const FactorGraph& graph, const ParameterSet& params);
MarginalTable brute_force_marginals(const FactorGraph& graph, const ParameterSet& params);
/// log Z over the unclamped variables, clamped ones held fixed.
double brute_force_log_partition(const FactorGraph& graph, const ParameterSet& params);

/// Bethe estimate of log Z from (approximate) marginals. Exact on trees.
double bethe_log_partition(const FactorGraph& graph, const std::vector<FactorTable>& tables,
                           const MarginalTable& marginals);

/// P(+1) for emotion variables, P(mu = 1) for influence variables.
double predict_probability(const MarginalTable& marginals, const FactorGraph& graph,
                           const VariableId& var);
double predict_probability(const MarginalTable& marginals, std::size_t var);

std::string marginals_json(const FactorGraph& graph, const MarginalTable& marginals);
std::string assignment_json(const FactorGraph& graph, const Assignment& q);
void write_residual_csv(std::ostream& out, const BpDiagnostics& diagnostics);

}  // namespace emoinf
