#pragma once

#include <array>
#include <compare>
#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "emoinf/network.hpp"

namespace emoinf {

// ---------------------------------------------------------------------------
// Parameters

/// Per-user weights after tying pair parameters to the source user.
struct UserParams {
  double beta = 0.6;
  double xi = 0.5;
  double delta = 1.0;
  double lambda = 0.1;
  double eta = 0.5;
  double tau = 1.0;
};

struct ParameterSet {
  FeatureVector alpha{};
  std::vector<UserParams> users;

  /// alpha = 0 and the initial scalar constants for `num_users` users.
  static ParameterSet initial(std::size_t num_users);

  /// Clamps every scalar parameter to >= 0. Throws on non-finite values.
  void project();
};

// ---------------------------------------------------------------------------
// Variables and factors

enum class VarKind : std::uint8_t { image, user, influence };

/// ImageVar(image), UserVar(user, slice) or InfluenceVar(src, dst, slice),
/// all by dense network index.
struct VariableId {
  VarKind kind = VarKind::image;
  std::uint32_t a = 0;
  std::uint32_t b = 0;
  std::uint32_t c = 0;

  static VariableId image(std::uint32_t image_index) { return {VarKind::image, image_index, 0, 0}; }
  static VariableId user(std::uint32_t user, TimeSlice t) { return {VarKind::user, user, t, 0}; }
  static VariableId influence(std::uint32_t src, std::uint32_t dst, TimeSlice t) {
    return {VarKind::influence, src, dst, t};
  }

  std::string to_string() const;
  friend auto operator<=>(const VariableId&, const VariableId&) = default;
};

/// Domain value of state 0/1: {-1, +1} for emotion variables, {0, 1} for influence.
inline int domain_value(VarKind kind, int state) {
  return kind == VarKind::influence ? state : 2 * state - 1;
}
inline int state_of(VarKind kind, int value) {
  return kind == VarKind::influence ? value : (value + 1) / 2;
}
bool in_domain(VarKind kind, int value);

struct Variable {
  VariableId id;
  std::int8_t clamp = -1;  // clamped state (0/1) or -1
  std::string name;

  bool clamped() const { return clamp >= 0; }
};

enum class FactorKind : std::uint8_t { f1, f2, f3, f4, f5 };

std::string_view to_string(FactorKind kind);
std::size_t arity(FactorKind kind);

/// Variable order per kind: F1 (image, user); F2 (image); F3 (user@t', user@t);
/// F4 (user i, user j, influence i->j); F5 (influence@t', influence@t).
struct Factor {
  FactorKind kind = FactorKind::f2;
  std::array<std::uint32_t, 3> vars{};
  std::uint32_t owner = 0;    // user whose parameters weight this factor
  std::uint32_t gap = 0;      // |t - t'| for F3/F5
  std::uint32_t feature = 0;  // feature row for F2

  std::size_t arity() const { return emoinf::arity(kind); }
  std::span<const std::uint32_t> variables() const { return {vars.data(), arity()}; }
};

/// Bipartite graph of binary variables and F1..F5 factors.
///
/// Factor tables are indexed by sum(state_k << k) over the factor's variables.
class FactorGraph {
 public:
  std::uint32_t add_variable(VariableId id, std::optional<int> clamp_value = std::nullopt,
                             std::string name = {});
  std::uint32_t add_feature(const FeatureVector& x);

  std::uint32_t add_f1(std::uint32_t image_var, std::uint32_t user_var, std::uint32_t owner);
  std::uint32_t add_f2(std::uint32_t image_var, std::uint32_t feature);
  std::uint32_t add_f3(std::uint32_t prev, std::uint32_t cur, std::uint32_t owner,
                       std::uint32_t gap);
  std::uint32_t add_f4(std::uint32_t user_i, std::uint32_t user_j, std::uint32_t influence,
                       std::uint32_t owner);
  std::uint32_t add_f5(std::uint32_t prev, std::uint32_t cur, std::uint32_t owner,
                       std::uint32_t gap);

  std::size_t num_variables() const { return variables_.size(); }
  std::size_t num_factors() const { return factors_.size(); }
  std::size_t num_unclamped() const;
  /// Largest owner index + 1 over the parameterized (non-F2) factors.
  std::size_t num_owners() const { return num_owners_; }

  const Variable& variable(std::size_t i) const { return variables_[i]; }
  const std::vector<Variable>& variables() const { return variables_; }
  const Factor& factor(std::size_t f) const { return factors_[f]; }
  const std::vector<Factor>& factors() const { return factors_; }
  const FeatureVector& feature(std::size_t row) const { return features_[row]; }
  std::span<const std::uint32_t> factors_of(std::size_t var) const { return adjacency_[var]; }

  std::optional<std::uint32_t> find(const VariableId& id) const;
  std::uint32_t require(const VariableId& id) const;
  std::string display_name(std::size_t var) const;

  void set_clamp(std::size_t var, std::optional<int> clamp_value);

  /// True when the graph is acyclic once clamped variables are cut out.
  bool is_forest() const;

 private:
  std::uint32_t push_factor(Factor f);
  void check_var(std::uint32_t v, VarKind kind) const;

  std::vector<Variable> variables_;
  std::vector<Factor> factors_;
  std::vector<std::vector<std::uint32_t>> adjacency_;
  std::vector<FeatureVector> features_;
  std::map<VariableId, std::uint32_t> index_;
  std::size_t num_owners_ = 0;
};

struct GraphOptions {
  std::uint32_t window = 1;          // temporal links for 1 <= t - t' <= window
  std::set<FactorKind> drop;         // factor kinds left out (ablation)
};

/// Dynamic factor graph for one emotion category.
///
/// UserVars exist for every slice within `window` of a slice where the user
/// uploaded; InfluenceVars and F4 exist for each direction of an edge whose
/// two UserVars exist. Images labeled for `category` are clamped. Dropping F4
/// also removes the InfluenceVars and every F5.
FactorGraph build_graph(const TimeVaryingNetwork& net, Emotion category,
                        const GraphOptions& options = {});

// ---------------------------------------------------------------------------
// Log-potentials

double eval_f1(int y_img, int y_user, double beta);
double eval_f2(std::span<const double> x, int y_img, std::span<const double> alpha);
double eval_f3(int y_prev, int y_cur, double xi, double delta, std::uint32_t gap);
double eval_f4(int y_i, int y_j, int mu, double lambda);
double eval_f5(int mu_prev, int mu_cur, double eta, double tau, std::uint32_t gap);

using FactorTable = std::array<double, 8>;

/// Log-potential of factor `f` for every joint state of its variables.
FactorTable factor_log_table(const FactorGraph& graph, const Factor& f,
                             const ParameterSet& params);
std::vector<FactorTable> factor_log_tables(const FactorGraph& graph, const ParameterSet& params);

/// One value per variable, in graph order, in the variable's domain.
struct Assignment {
  std::vector<int> values;

  int operator[](std::size_t i) const { return values[i]; }
  int& operator[](std::size_t i) { return values[i]; }
  std::size_t size() const { return values.size(); }
  friend bool operator==(const Assignment&, const Assignment&) = default;
};

/// Throws unless `q` covers the graph with in-domain, clamp-consistent values.
void validate_assignment(const FactorGraph& graph, const Assignment& q);

/// Joint state index of factor `f` under assignment `q`.
std::size_t factor_state(const FactorGraph& graph, const Factor& f, const Assignment& q);

double factor_log_potential(const FactorGraph& graph, const Factor& f, const ParameterSet& params,
                            const Assignment& q);

/// Sum of all factor log-potentials (the unnormalized log-likelihood).
double objective(const FactorGraph& graph, const Assignment& q, const ParameterSet& params);

// ---------------------------------------------------------------------------
// Export

struct GraphStats {
  std::map<VarKind, std::size_t> variables;
  std::map<FactorKind, std::size_t> factors;
  std::size_t clamped = 0;
};

GraphStats graph_stats(const FactorGraph& graph);
std::string graph_stats_json(const FactorGraph& graph);
void write_adjacency(std::ostream& out, const FactorGraph& graph);

}  // namespace emoinf
