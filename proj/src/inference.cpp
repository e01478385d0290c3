#include "emoinf/inference.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>

#include <json.hpp>

#include "emoinf/error.hpp"

namespace emoinf {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();
constexpr double kTieTolerance = 1e-9;

double log_add(double a, double b) {
  if (a == kNegInf) return b;
  if (b == kNegInf) return a;
  const double hi = std::max(a, b);
  return hi + std::log1p(std::exp(-std::abs(a - b)));
}

bool tied(double a, double b) {
  return std::abs(a - b) <= kTieTolerance * std::max({1.0, std::abs(a), std::abs(b)});
}

}  // namespace

void BpConfig::validate() const {
  if (max_iterations < 1) throw ValidationError("max_iterations must be >= 1");
  if (!(damping >= 0.0 && damping < 1.0)) throw ValidationError("damping must be in [0, 1)");
  if (!(tolerance > 0.0)) throw ValidationError("tolerance must be positive");
  if (max_decimation_rounds < 0) throw ValidationError("max_decimation_rounds must be >= 0");
}

BeliefPropagator::BeliefPropagator(const FactorGraph& graph, BpConfig config)
    : graph_(graph), config_(config), loopy_(!graph.is_forest()) {
  config_.validate();
  clamp_.resize(graph.num_variables());
  clear_clamps();
  reset_messages();
}

void BeliefPropagator::set_params(const ParameterSet& params) {
  tables_ = factor_log_tables(graph_, params);
}

void BeliefPropagator::set_tables(std::vector<FactorTable> tables) {
  if (tables.size() != graph_.num_factors()) throw ValidationError("one table per factor expected");
  tables_ = std::move(tables);
}

void BeliefPropagator::clamp(std::size_t var, int state) {
  clamp_.at(var) = static_cast<std::int8_t>(state);
}

void BeliefPropagator::clear_clamps() {
  for (std::size_t v = 0; v < graph_.num_variables(); ++v) clamp_[v] = graph_.variable(v).clamp;
}

void BeliefPropagator::reset_messages() {
  for (int mode = 0; mode < 2; ++mode) {
    messages_[mode].assign(3 * graph_.num_factors(), Message{0.0, 0.0});
    beliefs_[mode].assign(graph_.num_variables(), Message{0.0, 0.0});
  }
}

void BeliefPropagator::compute_beliefs(int mode) {
  auto& beliefs = beliefs_[mode];
  std::fill(beliefs.begin(), beliefs.end(), Message{0.0, 0.0});
  const auto& msgs = messages_[mode];
  for (std::size_t f = 0; f < graph_.num_factors(); ++f) {
    const auto vars = graph_.factor(f).variables();
    for (std::size_t k = 0; k < vars.size(); ++k) {
      beliefs[vars[k]][0] += msgs[3 * f + k][0];
      beliefs[vars[k]][1] += msgs[3 * f + k][1];
    }
  }
}

BeliefPropagator::Message BeliefPropagator::incoming(std::size_t f, std::size_t k, int mode) const {
  const std::uint32_t v = graph_.factor(f).vars[k];
  if (clamp_[v] >= 0) {
    Message m{kNegInf, kNegInf};
    m[static_cast<std::size_t>(clamp_[v])] = 0.0;
    return m;
  }
  const Message& out = messages_[mode][3 * f + k];
  Message m{beliefs_[mode][v][0] - out[0], beliefs_[mode][v][1] - out[1]};
  const double hi = std::max(m[0], m[1]);
  m[0] -= hi;
  m[1] -= hi;
  return m;
}

BeliefPropagator::Message BeliefPropagator::factor_message(std::size_t f, std::size_t k, int mode,
                                                           const std::array<Message, 3>& in,
                                                           const std::array<double, 8>& joint,
                                                           bool fast) const {
  const std::size_t n = graph_.factor(f).arity();
  const std::size_t states = std::size_t{1} << n;
  const bool max_mode = mode == static_cast<int>(Semiring::max_product);
  Message out{kNegInf, kNegInf};
  if (fast) {
    // joint[c] already includes in[k][c_k]; take it back out afterwards.
    if (max_mode) {
      for (std::size_t c = 0; c < states; ++c) {
        double& slot = out[(c >> k) & 1];
        slot = std::max(slot, joint[c]);
      }
    } else {
      double hi = kNegInf;
      for (std::size_t c = 0; c < states; ++c) hi = std::max(hi, joint[c]);
      double sum[2] = {0.0, 0.0};
      for (std::size_t c = 0; c < states; ++c) sum[(c >> k) & 1] += std::exp(joint[c] - hi);
      out = {std::log(sum[0]) + hi, std::log(sum[1]) + hi};
    }
    out[0] -= in[k][0];
    out[1] -= in[k][1];
    return out;
  }
  const FactorTable& table = tables_[f];
  for (std::size_t c = 0; c < states; ++c) {
    double w = table[c];
    for (std::size_t j = 0; j < n; ++j) {
      if (j != k) w += in[j][(c >> j) & 1];
    }
    double& slot = out[(c >> k) & 1];
    slot = max_mode ? std::max(slot, w) : log_add(slot, w);
  }
  return out;
}

double BeliefPropagator::update_factor(std::size_t f, int mode, bool apply, bool damp,
                                       std::vector<Message>* staged) {
  const Factor& fac = graph_.factor(f);
  const std::size_t n = fac.arity();
  const FactorTable& table = tables_[f];
  std::array<Message, 3> in{};
  for (std::size_t k = 0; k < n; ++k) in[k] = incoming(f, k, mode);
  std::array<double, 8> joint{};
  for (std::size_t c = 0; c < (std::size_t{1} << n); ++c) {
    joint[c] = table[c];
    for (std::size_t k = 0; k < n; ++k) joint[c] += in[k][(c >> k) & 1];
  }

  const double damping = damp && loopy_ ? config_.damping : 0.0;
  const bool max_mode = mode == static_cast<int>(Semiring::max_product);
  const auto normalize = [max_mode](Message& m) {
    const double z = max_mode ? std::max(m[0], m[1]) : log_add(m[0], m[1]);
    m[0] -= z;
    m[1] -= z;
  };
  double residual = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    const std::uint32_t v = fac.vars[k];
    if (clamp_[v] >= 0) continue;
    Message out = factor_message(f, k, mode, in, joint, true);
    if (!std::isfinite(out[0]) || !std::isfinite(out[1])) {
      // Underflow in the shared joint table; redo this message directly.
      out = factor_message(f, k, mode, in, joint, false);
    }
    normalize(out);
    Message& old = messages_[mode][3 * f + k];
    if (damping > 0.0) {
      out[0] = (1.0 - damping) * out[0] + damping * old[0];
      out[1] = (1.0 - damping) * out[1] + damping * old[1];
      normalize(out);
    }
    residual = std::max({residual, std::abs(out[0] - old[0]), std::abs(out[1] - old[1])});
    if (apply) {
      beliefs_[mode][v][0] += out[0] - old[0];
      beliefs_[mode][v][1] += out[1] - old[1];
      old = out;
    } else {
      (*staged)[3 * f + k] = out;
    }
  }
  return residual;
}

BpDiagnostics BeliefPropagator::run(Semiring semiring) {
  if (tables_.size() != graph_.num_factors()) throw Error("belief propagation run without tables");
  const int mode = static_cast<int>(semiring);

  // A factor with at most one unclamped variable sends a message that only
  // depends on its table, so it is set once per run.
  std::vector<std::uint32_t> active;
  std::vector<std::uint32_t> fixed;
  for (std::size_t f = 0; f < graph_.num_factors(); ++f) {
    int free = 0;
    for (std::uint32_t v : graph_.factor(f).variables()) free += clamp_[v] < 0;
    (free >= 2 ? active : fixed).push_back(static_cast<std::uint32_t>(f));
  }

  BpDiagnostics diag;
  std::vector<Message> staged;
  compute_beliefs(mode);
  double initial = 0.0;
  for (std::uint32_t f : fixed) initial = std::max(initial, update_factor(f, mode, true, false, nullptr));
  for (int iter = 0; iter < config_.max_iterations; ++iter) {
    compute_beliefs(mode);
    double residual = iter == 0 ? initial : 0.0;
    if (config_.schedule == Schedule::sequential) {
      for (std::uint32_t f : active) {
        residual = std::max(residual, update_factor(f, mode, true, true, nullptr));
      }
    } else {
      staged = messages_[mode];
      for (std::uint32_t f : active) {
        residual = std::max(residual, update_factor(f, mode, false, true, &staged));
      }
      messages_[mode].swap(staged);
    }
    diag.iterations = iter + 1;
    diag.residual = residual;
    diag.residuals.push_back(residual);
    if (residual < config_.tolerance) {
      diag.converged = true;
      break;
    }
  }
  compute_beliefs(mode);
  return diag;
}

std::array<double, 2> BeliefPropagator::log_belief(std::size_t var, Semiring semiring) const {
  const int mode = static_cast<int>(semiring);
  if (clamp_[var] >= 0) {
    std::array<double, 2> b{kNegInf, kNegInf};
    b[static_cast<std::size_t>(clamp_[var])] = 0.0;
    return b;
  }
  std::array<double, 2> b = beliefs_[mode][var];
  const double z = semiring == Semiring::max_product ? std::max(b[0], b[1]) : log_add(b[0], b[1]);
  b[0] -= z;
  b[1] -= z;
  return b;
}

MarginalTable BeliefPropagator::marginals() const {
  const int mode = static_cast<int>(Semiring::sum_product);
  MarginalTable out;
  out.variables.resize(graph_.num_variables());
  for (std::size_t v = 0; v < graph_.num_variables(); ++v) {
    const auto b = log_belief(v, Semiring::sum_product);
    out.variables[v] = {std::exp(b[0]), std::exp(b[1])};
  }
  out.factors.resize(graph_.num_factors());
  for (std::size_t f = 0; f < graph_.num_factors(); ++f) {
    const std::size_t n = graph_.factor(f).arity();
    std::array<Message, 3> in{};
    for (std::size_t k = 0; k < n; ++k) in[k] = incoming(f, k, mode);
    std::vector<double> w(std::size_t{1} << n);
    double z = kNegInf;
    for (std::size_t c = 0; c < w.size(); ++c) {
      w[c] = tables_[f][c];
      for (std::size_t k = 0; k < n; ++k) w[c] += in[k][(c >> k) & 1];
      z = log_add(z, w[c]);
    }
    for (double& x : w) x = std::exp(x - z);
    out.factors[f] = std::move(w);
  }
  return out;
}

Assignment BeliefPropagator::decode() const {
  Assignment q;
  q.values.resize(graph_.num_variables());
  for (std::size_t v = 0; v < graph_.num_variables(); ++v) {
    int state;
    if (clamp_[v] >= 0) {
      state = clamp_[v];
    } else {
      const auto& b = beliefs_[static_cast<int>(Semiring::max_product)][v];
      state = (b[1] > b[0] && !tied(b[0], b[1])) ? 1 : 0;
    }
    q[v] = domain_value(graph_.variable(v).id.kind, state);
  }
  return q;
}

std::int64_t BeliefPropagator::first_tie() const {
  const auto& beliefs = beliefs_[static_cast<int>(Semiring::max_product)];
  for (std::size_t v = 0; v < graph_.num_variables(); ++v) {
    if (clamp_[v] >= 0) continue;
    if (tied(beliefs[v][0], beliefs[v][1])) return static_cast<std::int64_t>(v);
  }
  return -1;
}

MapResult decode_map(BeliefPropagator& bp) {
  MapResult result;
  result.diagnostics = bp.run(Semiring::max_product);
  // Ties are broken one variable at a time: clamp the first tied variable to
  // its lower state and re-run, which selects a single consistent optimum.
  for (int round = 0; round < bp.config().max_decimation_rounds; ++round) {
    const std::int64_t v = bp.first_tie();
    if (v < 0) break;
    bp.clamp(static_cast<std::size_t>(v), 0);
    result.diagnostics = bp.run(Semiring::max_product);
  }
  result.assignment = bp.decode();
  bp.clear_clamps();
  return result;
}

MapResult max_product(const FactorGraph& graph, const ParameterSet& params,
                      const BpConfig& config) {
  BeliefPropagator bp(graph, config);
  bp.set_params(params);
  return decode_map(bp);
}

MarginalResult sum_product(const FactorGraph& graph, const ParameterSet& params,
                           const BpConfig& config) {
  BeliefPropagator bp(graph, config);
  bp.set_params(params);
  MarginalResult result;
  result.diagnostics = bp.run(Semiring::sum_product);
  result.marginals = bp.marginals();
  return result;
}

// ---------------------------------------------------------------------------
// Exhaustive enumeration

namespace {

struct Enumerator {
  const FactorGraph& graph;
  std::vector<FactorTable> tables;
  std::vector<std::uint32_t> free_vars;
  std::vector<int> states;

  Enumerator(const FactorGraph& g, const ParameterSet& params)
      : graph(g), tables(factor_log_tables(g, params)), states(g.num_variables(), 0) {
    for (std::size_t v = 0; v < g.num_variables(); ++v) {
      if (g.variable(v).clamped()) {
        states[v] = g.variable(v).clamp;
      } else {
        free_vars.push_back(static_cast<std::uint32_t>(v));
      }
    }
    if (free_vars.size() > kBruteForceLimit) {
      throw Error("graph too large for exhaustive enumeration: " +
                  std::to_string(free_vars.size()) + " unclamped variables");
    }
  }

  std::size_t count() const { return std::size_t{1} << free_vars.size(); }

  // First free variable is the most significant bit, so ascending masks are
  // ascending lexicographic state vectors.
  void load(std::size_t mask) {
    const std::size_t n = free_vars.size();
    for (std::size_t k = 0; k < n; ++k) states[free_vars[k]] = (mask >> (n - 1 - k)) & 1;
  }

  std::size_t factor_index(const Factor& f) const {
    std::size_t c = 0;
    const auto vars = f.variables();
    for (std::size_t k = 0; k < vars.size(); ++k) c |= static_cast<std::size_t>(states[vars[k]]) << k;
    return c;
  }

  double weight() const {
    double w = 0.0;
    for (std::size_t f = 0; f < graph.num_factors(); ++f) {
      w += tables[f][factor_index(graph.factor(f))];
    }
    return w;
  }

  Assignment assignment() const {
    Assignment q;
    q.values.resize(states.size());
    for (std::size_t v = 0; v < states.size(); ++v) {
      q[v] = domain_value(graph.variable(v).id.kind, states[v]);
    }
    return q;
  }
};

}  // namespace

Assignment brute_force_map(const FactorGraph& graph, const ParameterSet& params) {
  Enumerator e(graph, params);
  std::vector<double> weights(e.count());
  double best = kNegInf;
  for (std::size_t mask = 0; mask < e.count(); ++mask) {
    e.load(mask);
    weights[mask] = e.weight();
    best = std::max(best, weights[mask]);
  }
  const double slack = kTieTolerance * std::max(1.0, std::abs(best));
  for (std::size_t mask = 0; mask < e.count(); ++mask) {
    if (weights[mask] >= best - slack) {
      e.load(mask);
      return e.assignment();
    }
  }
  return e.assignment();
}

MarginalTable brute_force_marginals(const FactorGraph& graph, const ParameterSet& params) {
  Enumerator e(graph, params);
  std::vector<double> weights(e.count());
  double log_z = kNegInf;
  for (std::size_t mask = 0; mask < e.count(); ++mask) {
    e.load(mask);
    weights[mask] = e.weight();
    log_z = log_add(log_z, weights[mask]);
  }
  MarginalTable out;
  out.variables.assign(graph.num_variables(), {0.0, 0.0});
  out.factors.resize(graph.num_factors());
  for (std::size_t f = 0; f < graph.num_factors(); ++f) {
    out.factors[f].assign(std::size_t{1} << graph.factor(f).arity(), 0.0);
  }
  for (std::size_t mask = 0; mask < e.count(); ++mask) {
    e.load(mask);
    const double p = std::exp(weights[mask] - log_z);
    for (std::size_t v = 0; v < graph.num_variables(); ++v) out.variables[v][e.states[v]] += p;
    for (std::size_t f = 0; f < graph.num_factors(); ++f) {
      out.factors[f][e.factor_index(graph.factor(f))] += p;
    }
  }
  return out;
}

double brute_force_log_partition(const FactorGraph& graph, const ParameterSet& params) {
  Enumerator e(graph, params);
  double log_z = kNegInf;
  for (std::size_t mask = 0; mask < e.count(); ++mask) {
    e.load(mask);
    log_z = log_add(log_z, e.weight());
  }
  return log_z;
}

double bethe_log_partition(const FactorGraph& graph, const std::vector<FactorTable>& tables,
                           const MarginalTable& marginals) {
  const auto plogp = [](double p) { return p > 0.0 ? p * std::log(p) : 0.0; };
  double value = 0.0;
  for (std::size_t f = 0; f < graph.num_factors(); ++f) {
    const auto& b = marginals.factors.at(f);
    for (std::size_t c = 0; c < b.size(); ++c) {
      if (b[c] > 0.0) value += b[c] * tables[f][c] - plogp(b[c]);
    }
  }
  for (std::size_t v = 0; v < graph.num_variables(); ++v) {
    if (graph.variable(v).clamped()) continue;
    const double degree = static_cast<double>(graph.factors_of(v).size());
    const auto& b = marginals.variables[v];
    value += (degree - 1.0) * (plogp(b[0]) + plogp(b[1]));
  }
  return value;
}

double predict_probability(const MarginalTable& marginals, std::size_t var) {
  return marginals.variables.at(var)[1];
}

double predict_probability(const MarginalTable& marginals, const FactorGraph& graph,
                           const VariableId& var) {
  return predict_probability(marginals, graph.require(var));
}

std::string marginals_json(const FactorGraph& graph, const MarginalTable& marginals) {
  nlohmann::json doc = nlohmann::json::object();
  for (std::size_t v = 0; v < graph.num_variables(); ++v) {
    doc[graph.display_name(v)] = {marginals.variables[v][0], marginals.variables[v][1]};
  }
  return doc.dump();
}

std::string assignment_json(const FactorGraph& graph, const Assignment& q) {
  nlohmann::json doc = nlohmann::json::object();
  for (std::size_t v = 0; v < graph.num_variables(); ++v) doc[graph.display_name(v)] = q[v];
  return doc.dump();
}

void write_residual_csv(std::ostream& out, const BpDiagnostics& diagnostics) {
  out << "iteration,residual\n";
  for (std::size_t i = 0; i < diagnostics.residuals.size(); ++i) {
    out << i + 1 << ',' << diagnostics.residuals[i] << '\n';
  }
}

}  // namespace emoinf
