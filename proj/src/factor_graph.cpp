#include "emoinf/factor_graph.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>

#include <json.hpp>

#include "emoinf/error.hpp"

namespace emoinf {

ParameterSet ParameterSet::initial(std::size_t num_users) {
  ParameterSet p;
  p.users.assign(num_users, UserParams{});
  return p;
}

void ParameterSet::project() {
  for (double a : alpha) {
    if (!std::isfinite(a)) throw ValidationError("alpha entries must be finite");
  }
  for (auto& u : users) {
    for (double* w : {&u.beta, &u.xi, &u.delta, &u.lambda, &u.eta, &u.tau}) {
      if (!std::isfinite(*w)) throw ValidationError("user parameters must be finite");
      *w = std::max(0.0, *w);
    }
  }
}

std::string VariableId::to_string() const {
  switch (kind) {
    case VarKind::image:
      return "image:" + std::to_string(a);
    case VarKind::user:
      return "user:" + std::to_string(a) + "@" + std::to_string(b);
    case VarKind::influence:
      return "influence:" + std::to_string(a) + "->" + std::to_string(b) + "@" + std::to_string(c);
  }
  return {};
}

bool in_domain(VarKind kind, int value) {
  return kind == VarKind::influence ? (value == 0 || value == 1) : (value == -1 || value == 1);
}

std::string_view to_string(FactorKind kind) {
  static constexpr std::array<std::string_view, 5> names = {"f1", "f2", "f3", "f4", "f5"};
  return names[static_cast<std::size_t>(kind)];
}

std::size_t arity(FactorKind kind) {
  switch (kind) {
    case FactorKind::f2:
      return 1;
    case FactorKind::f4:
      return 3;
    default:
      return 2;
  }
}

// ---------------------------------------------------------------------------

std::uint32_t FactorGraph::add_variable(VariableId id, std::optional<int> clamp_value,
                                        std::string name) {
  if (index_.count(id) != 0) throw ValidationError("duplicate variable " + id.to_string());
  const auto v = static_cast<std::uint32_t>(variables_.size());
  Variable var{id, -1, std::move(name)};
  variables_.push_back(std::move(var));
  adjacency_.emplace_back();
  index_.emplace(id, v);
  set_clamp(v, clamp_value);
  return v;
}

void FactorGraph::set_clamp(std::size_t var, std::optional<int> clamp_value) {
  Variable& v = variables_.at(var);
  if (!clamp_value) {
    v.clamp = -1;
    return;
  }
  if (!in_domain(v.id.kind, *clamp_value)) throw ValidationError("clamp value outside domain");
  v.clamp = static_cast<std::int8_t>(state_of(v.id.kind, *clamp_value));
}

std::uint32_t FactorGraph::add_feature(const FeatureVector& x) {
  features_.push_back(x);
  return static_cast<std::uint32_t>(features_.size() - 1);
}

void FactorGraph::check_var(std::uint32_t v, VarKind kind) const {
  if (v >= variables_.size()) throw ValidationError("factor references unknown variable");
  if (variables_[v].id.kind != kind) throw ValidationError("factor variable has the wrong kind");
}

std::uint32_t FactorGraph::push_factor(Factor f) {
  const auto index = static_cast<std::uint32_t>(factors_.size());
  for (std::uint32_t v : f.variables()) adjacency_[v].push_back(index);
  if (f.kind != FactorKind::f2) num_owners_ = std::max<std::size_t>(num_owners_, f.owner + 1);
  factors_.push_back(f);
  return index;
}

std::uint32_t FactorGraph::add_f1(std::uint32_t image_var, std::uint32_t user_var,
                                  std::uint32_t owner) {
  check_var(image_var, VarKind::image);
  check_var(user_var, VarKind::user);
  return push_factor({FactorKind::f1, {image_var, user_var, 0}, owner, 0, 0});
}

std::uint32_t FactorGraph::add_f2(std::uint32_t image_var, std::uint32_t feature) {
  check_var(image_var, VarKind::image);
  if (feature >= features_.size()) throw ValidationError("F2 references unknown feature row");
  return push_factor({FactorKind::f2, {image_var, 0, 0}, 0, 0, feature});
}

std::uint32_t FactorGraph::add_f3(std::uint32_t prev, std::uint32_t cur, std::uint32_t owner,
                                  std::uint32_t gap) {
  check_var(prev, VarKind::user);
  check_var(cur, VarKind::user);
  if (gap == 0) throw ValidationError("temporal factor needs gap >= 1");
  return push_factor({FactorKind::f3, {prev, cur, 0}, owner, gap, 0});
}

std::uint32_t FactorGraph::add_f4(std::uint32_t user_i, std::uint32_t user_j,
                                  std::uint32_t influence, std::uint32_t owner) {
  check_var(user_i, VarKind::user);
  check_var(user_j, VarKind::user);
  check_var(influence, VarKind::influence);
  return push_factor({FactorKind::f4, {user_i, user_j, influence}, owner, 0, 0});
}

std::uint32_t FactorGraph::add_f5(std::uint32_t prev, std::uint32_t cur, std::uint32_t owner,
                                  std::uint32_t gap) {
  check_var(prev, VarKind::influence);
  check_var(cur, VarKind::influence);
  if (gap == 0) throw ValidationError("temporal factor needs gap >= 1");
  return push_factor({FactorKind::f5, {prev, cur, 0}, owner, gap, 0});
}

std::size_t FactorGraph::num_unclamped() const {
  return static_cast<std::size_t>(std::count_if(variables_.begin(), variables_.end(),
                                                [](const Variable& v) { return !v.clamped(); }));
}

std::optional<std::uint32_t> FactorGraph::find(const VariableId& id) const {
  auto it = index_.find(id);
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

std::uint32_t FactorGraph::require(const VariableId& id) const {
  auto v = find(id);
  if (!v) throw ValidationError("unknown variable " + id.to_string());
  return *v;
}

std::string FactorGraph::display_name(std::size_t var) const {
  const Variable& v = variables_.at(var);
  return v.name.empty() ? v.id.to_string() : v.name;
}

bool FactorGraph::is_forest() const {
  const std::size_t nv = variables_.size();
  std::vector<std::size_t> parent(nv + factors_.size());
  std::iota(parent.begin(), parent.end(), 0);
  auto root = [&](std::size_t x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  };
  for (std::size_t f = 0; f < factors_.size(); ++f) {
    for (std::uint32_t v : factors_[f].variables()) {
      if (variables_[v].clamped()) continue;
      const std::size_t a = root(v);
      const std::size_t b = root(nv + f);
      if (a == b) return false;
      parent[a] = b;
    }
  }
  return true;
}

// ---------------------------------------------------------------------------

namespace {

std::string user_name(const TimeVaryingNetwork& net, std::size_t u, TimeSlice t) {
  return "user:" + net.user_id(u) + "@" + std::to_string(t);
}

}  // namespace

FactorGraph build_graph(const TimeVaryingNetwork& net, Emotion category,
                        const GraphOptions& options) {
  if (options.window < 1) throw ValidationError("temporal window must be >= 1");
  const auto keep = [&](FactorKind k) { return options.drop.count(k) == 0; };
  const bool with_influence = keep(FactorKind::f4);
  const TimeSlice horizon = net.horizon();
  const std::uint32_t window = options.window;

  FactorGraph g;

  std::vector<std::uint32_t> image_var(net.num_images());
  for (std::size_t i = 0; i < net.num_images(); ++i) {
    const ImageRecord& img = net.image(i);
    std::optional<int> clamp;
    if (auto label = img.label(category)) clamp = label->value();
    image_var[i] = g.add_variable(VariableId::image(static_cast<std::uint32_t>(i)), clamp,
                                  "image:" + img.id);
  }

  // user_var[u][t], or -1 when the (user, slice) pair has no variable.
  std::vector<std::vector<std::int64_t>> user_var(net.num_users(),
                                                  std::vector<std::int64_t>(horizon, -1));
  for (std::size_t u = 0; u < net.num_users(); ++u) {
    for (TimeSlice t = 0; t < horizon; ++t) {
      const TimeSlice lo = t >= window ? t - window : 0;
      const TimeSlice hi = std::min<TimeSlice>(horizon - 1, t + window);
      bool near_active = false;
      for (TimeSlice s = lo; s <= hi && !near_active; ++s) near_active = net.is_active(u, s);
      if (!near_active) continue;
      user_var[u][t] = g.add_variable(VariableId::user(static_cast<std::uint32_t>(u), t),
                                      std::nullopt, user_name(net, u, t));
    }
  }

  // influence_var[(src, dst)][t]
  std::map<std::pair<std::size_t, std::size_t>, std::vector<std::int64_t>> influence_var;
  if (with_influence) {
    for (TimeSlice t = 0; t < horizon; ++t) {
      for (const auto& [lo, hi] : net.edges_at(t)) {
        if (user_var[lo][t] < 0 || user_var[hi][t] < 0) continue;
        for (auto [src, dst] : {std::pair{lo, hi}, std::pair{hi, lo}}) {
          auto& slots = influence_var[{src, dst}];
          if (slots.empty()) slots.assign(horizon, -1);
          slots[t] = g.add_variable(
              VariableId::influence(static_cast<std::uint32_t>(src),
                                    static_cast<std::uint32_t>(dst), t),
              std::nullopt,
              "influence:" + net.user_id(src) + "->" + net.user_id(dst) + "@" + std::to_string(t));
        }
      }
    }
  }

  for (std::size_t i = 0; i < net.num_images(); ++i) {
    const ImageRecord& img = net.image(i);
    const auto owner = static_cast<std::uint32_t>(net.image_owner(i));
    if (keep(FactorKind::f1)) {
      g.add_f1(image_var[i], static_cast<std::uint32_t>(user_var[owner][img.slice]), owner);
    }
    if (keep(FactorKind::f2)) g.add_f2(image_var[i], g.add_feature(img.features));
  }

  if (keep(FactorKind::f3)) {
    for (std::size_t u = 0; u < net.num_users(); ++u) {
      for (TimeSlice t = 1; t < horizon; ++t) {
        if (user_var[u][t] < 0) continue;
        for (std::uint32_t gap = 1; gap <= window && gap <= t; ++gap) {
          if (user_var[u][t - gap] < 0) continue;
          g.add_f3(static_cast<std::uint32_t>(user_var[u][t - gap]),
                   static_cast<std::uint32_t>(user_var[u][t]), static_cast<std::uint32_t>(u), gap);
        }
      }
    }
  }

  if (with_influence) {
    for (TimeSlice t = 0; t < horizon; ++t) {
      for (const auto& [lo, hi] : net.edges_at(t)) {
        for (auto [src, dst] : {std::pair{lo, hi}, std::pair{hi, lo}}) {
          auto it = influence_var.find({src, dst});
          if (it == influence_var.end() || it->second[t] < 0) continue;
          g.add_f4(static_cast<std::uint32_t>(user_var[src][t]),
                   static_cast<std::uint32_t>(user_var[dst][t]),
                   static_cast<std::uint32_t>(it->second[t]), static_cast<std::uint32_t>(src));
        }
      }
    }
    if (keep(FactorKind::f5)) {
      for (const auto& [pair, slots] : influence_var) {
        for (TimeSlice t = 1; t < horizon; ++t) {
          if (slots[t] < 0) continue;
          for (std::uint32_t gap = 1; gap <= window && gap <= t; ++gap) {
            if (slots[t - gap] < 0) continue;
            g.add_f5(static_cast<std::uint32_t>(slots[t - gap]),
                     static_cast<std::uint32_t>(slots[t]), static_cast<std::uint32_t>(pair.first),
                     gap);
          }
        }
      }
    }
  }
  return g;
}

// ---------------------------------------------------------------------------

namespace {

void check_label(int y) {
  if (y != 1 && y != -1) throw ValidationError("emotion value must be -1 or +1");
}

void check_mu(int mu) {
  if (mu != 0 && mu != 1) throw ValidationError("influence value must be 0 or 1");
}

void check_gap(std::uint32_t gap) {
  if (gap < 1) throw ValidationError("time gap must be >= 1");
}

}  // namespace

double eval_f1(int y_img, int y_user, double beta) {
  check_label(y_img);
  check_label(y_user);
  return -beta * std::abs(y_user - y_img);
}

double eval_f2(std::span<const double> x, int y_img, std::span<const double> alpha) {
  if (x.size() != alpha.size()) throw ValidationError("feature/alpha dimension mismatch");
  check_label(y_img);
  double dot = 0.0;
  for (std::size_t k = 0; k < x.size(); ++k) dot += alpha[k] * x[k];
  return dot * y_img;
}

double eval_f3(int y_prev, int y_cur, double xi, double delta, std::uint32_t gap) {
  check_label(y_prev);
  check_label(y_cur);
  check_gap(gap);
  if (y_prev == y_cur) return 0.0;
  return -xi * std::exp(-delta * gap) * std::abs(y_cur - y_prev);
}

double eval_f4(int y_i, int y_j, int mu, double lambda) {
  check_label(y_i);
  check_label(y_j);
  check_mu(mu);
  return -lambda * std::abs(1 - mu - std::abs(y_i - y_j));
}

double eval_f5(int mu_prev, int mu_cur, double eta, double tau, std::uint32_t gap) {
  check_mu(mu_prev);
  check_mu(mu_cur);
  check_gap(gap);
  if (mu_prev == mu_cur) return 0.0;
  return -eta * std::exp(-tau * gap) * std::abs(mu_cur - mu_prev);
}

FactorTable factor_log_table(const FactorGraph& graph, const Factor& f,
                             const ParameterSet& params) {
  FactorTable table{};
  if (f.kind != FactorKind::f2 && f.owner >= params.users.size()) {
    throw ValidationError("parameter set has no entry for factor owner " +
                          std::to_string(f.owner));
  }
  switch (f.kind) {
    case FactorKind::f1: {
      const double beta = params.users[f.owner].beta;
      for (int s = 0; s < 4; ++s) table[s] = eval_f1(2 * (s & 1) - 1, 2 * ((s >> 1) & 1) - 1, beta);
      break;
    }
    case FactorKind::f2: {
      const double score = eval_f2(graph.feature(f.feature), 1, params.alpha);
      table[0] = -score;
      table[1] = score;
      break;
    }
    case FactorKind::f3: {
      const auto& u = params.users[f.owner];
      for (int s = 0; s < 4; ++s) {
        table[s] = eval_f3(2 * (s & 1) - 1, 2 * ((s >> 1) & 1) - 1, u.xi, u.delta, f.gap);
      }
      break;
    }
    case FactorKind::f4: {
      const double lambda = params.users[f.owner].lambda;
      for (int s = 0; s < 8; ++s) {
        table[s] = eval_f4(2 * (s & 1) - 1, 2 * ((s >> 1) & 1) - 1, (s >> 2) & 1, lambda);
      }
      break;
    }
    case FactorKind::f5: {
      const auto& u = params.users[f.owner];
      for (int s = 0; s < 4; ++s) table[s] = eval_f5(s & 1, (s >> 1) & 1, u.eta, u.tau, f.gap);
      break;
    }
  }
  return table;
}

std::vector<FactorTable> factor_log_tables(const FactorGraph& graph, const ParameterSet& params) {
  std::vector<FactorTable> tables;
  tables.reserve(graph.num_factors());
  for (const Factor& f : graph.factors()) tables.push_back(factor_log_table(graph, f, params));
  return tables;
}

void validate_assignment(const FactorGraph& graph, const Assignment& q) {
  if (q.size() != graph.num_variables()) {
    throw ValidationError("incomplete assignment: " + std::to_string(q.size()) + " of " +
                          std::to_string(graph.num_variables()) + " variables");
  }
  for (std::size_t i = 0; i < q.size(); ++i) {
    const Variable& v = graph.variable(i);
    if (!in_domain(v.id.kind, q[i])) {
      throw ValidationError("value out of domain for " + graph.display_name(i));
    }
    if (v.clamped() && state_of(v.id.kind, q[i]) != v.clamp) {
      throw ValidationError("assignment contradicts clamp on " + graph.display_name(i));
    }
  }
}

std::size_t factor_state(const FactorGraph& graph, const Factor& f, const Assignment& q) {
  std::size_t state = 0;
  const auto vars = f.variables();
  for (std::size_t k = 0; k < vars.size(); ++k) {
    const int s = state_of(graph.variable(vars[k]).id.kind, q[vars[k]]);
    state |= static_cast<std::size_t>(s) << k;
  }
  return state;
}

double factor_log_potential(const FactorGraph& graph, const Factor& f, const ParameterSet& params,
                            const Assignment& q) {
  return factor_log_table(graph, f, params)[factor_state(graph, f, q)];
}

double objective(const FactorGraph& graph, const Assignment& q, const ParameterSet& params) {
  validate_assignment(graph, q);
  double total = 0.0;
  for (const Factor& f : graph.factors()) total += factor_log_potential(graph, f, params, q);
  return total;
}

// ---------------------------------------------------------------------------

GraphStats graph_stats(const FactorGraph& graph) {
  GraphStats st;
  for (VarKind k : {VarKind::image, VarKind::user, VarKind::influence}) st.variables[k] = 0;
  for (FactorKind k : {FactorKind::f1, FactorKind::f2, FactorKind::f3, FactorKind::f4,
                       FactorKind::f5}) {
    st.factors[k] = 0;
  }
  for (const Variable& v : graph.variables()) {
    ++st.variables[v.id.kind];
    if (v.clamped()) ++st.clamped;
  }
  for (const Factor& f : graph.factors()) ++st.factors[f.kind];
  return st;
}

std::string graph_stats_json(const FactorGraph& graph) {
  const GraphStats st = graph_stats(graph);
  nlohmann::json doc;
  doc["variables"] = {{"image", st.variables.at(VarKind::image)},
                      {"user", st.variables.at(VarKind::user)},
                      {"influence", st.variables.at(VarKind::influence)}};
  nlohmann::json factors;
  for (const auto& [kind, count] : st.factors) factors[std::string(to_string(kind))] = count;
  doc["factors"] = factors;
  doc["clamped"] = st.clamped;
  return doc.dump(2);
}

void write_adjacency(std::ostream& out, const FactorGraph& graph) {
  static constexpr std::array<std::string_view, 3> kinds = {"image", "user", "influence"};
  out << "# emoinf factor graph v1\n";
  out << "variables " << graph.num_variables() << "\n";
  for (std::size_t i = 0; i < graph.num_variables(); ++i) {
    const Variable& v = graph.variable(i);
    out << "var " << i << ' ' << kinds[static_cast<std::size_t>(v.id.kind)] << ' '
        << graph.display_name(i);
    if (v.clamped()) out << " clamp=" << domain_value(v.id.kind, v.clamp);
    out << '\n';
  }
  out << "factors " << graph.num_factors() << "\n";
  for (std::size_t f = 0; f < graph.num_factors(); ++f) {
    const Factor& fac = graph.factor(f);
    out << "factor " << f << ' ' << to_string(fac.kind);
    if (fac.kind != FactorKind::f2) out << " owner=" << fac.owner;
    if (fac.kind == FactorKind::f3 || fac.kind == FactorKind::f5) out << " gap=" << fac.gap;
    out << " vars=";
    const auto vars = fac.variables();
    for (std::size_t k = 0; k < vars.size(); ++k) out << (k ? "," : "") << vars[k];
    out << '\n';
  }
}

}  // namespace emoinf
