#include "emoinf/learning.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <ostream>
#include <random>

#include <json.hpp>

#include "emoinf/error.hpp"

namespace emoinf {

std::vector<double> pack_weights(const ParameterSet& params) {
  const ParamLayout layout{params.users.size()};
  std::vector<double> theta(layout.size());
  std::copy(params.alpha.begin(), params.alpha.end(), theta.begin());
  for (std::size_t i = 0; i < layout.users; ++i) {
    theta[layout.beta(i)] = params.users[i].beta;
    theta[layout.xi(i)] = params.users[i].xi;
    theta[layout.lambda(i)] = params.users[i].lambda;
    theta[layout.eta(i)] = params.users[i].eta;
  }
  return theta;
}

void unpack_weights(std::span<const double> theta, ParameterSet& params) {
  const ParamLayout layout{params.users.size()};
  if (theta.size() != layout.size()) throw ValidationError("weight vector has the wrong length");
  std::copy(theta.begin(), theta.begin() + kFeatureDim, params.alpha.begin());
  for (std::size_t i = 0; i < layout.users; ++i) {
    params.users[i].beta = theta[layout.beta(i)];
    params.users[i].xi = theta[layout.xi(i)];
    params.users[i].lambda = theta[layout.lambda(i)];
    params.users[i].eta = theta[layout.eta(i)];
  }
}

double dot(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw ValidationError("dot product of unequal lengths");
  return std::inner_product(a.begin(), a.end(), b.begin(), 0.0);
}

namespace {

int value_at(const FactorGraph& graph, const Factor& f, std::size_t state, std::size_t k) {
  return domain_value(graph.variable(f.vars[k]).id.kind, static_cast<int>((state >> k) & 1));
}

void check_owner(const Factor& f, const ParameterSet& params) {
  if (f.kind != FactorKind::f2 && f.owner >= params.users.size()) {
    throw ValidationError("parameter set has no entry for factor owner " + std::to_string(f.owner));
  }
}

/// Calls add(index, value) for the weight-space features of factor `f` in
/// joint state `state`.
template <class Add>
void local_phi(const FactorGraph& graph, const Factor& f, std::size_t state,
               const ParameterSet& params, const ParamLayout& layout, Add&& add) {
  const auto y = [&](std::size_t k) { return value_at(graph, f, state, k); };
  switch (f.kind) {
    case FactorKind::f1:
      add(layout.beta(f.owner), -std::abs(y(1) - y(0)));
      break;
    case FactorKind::f2: {
      const FeatureVector& x = graph.feature(f.feature);
      const int label = y(0);
      for (std::size_t k = 0; k < kFeatureDim; ++k) add(layout.alpha(k), x[k] * label);
      break;
    }
    case FactorKind::f3: {
      const double decay = std::exp(-params.users[f.owner].delta * f.gap);
      add(layout.xi(f.owner), -decay * std::abs(y(1) - y(0)));
      break;
    }
    case FactorKind::f4:
      add(layout.lambda(f.owner), -std::abs(1 - y(2) - std::abs(y(0) - y(1))));
      break;
    case FactorKind::f5: {
      const double decay = std::exp(-params.users[f.owner].tau * f.gap);
      add(layout.eta(f.owner), -decay * std::abs(y(1) - y(0)));
      break;
    }
  }
}

/// Derivative of the factor's log-potential with respect to its decay rate,
/// as (index into [delta | tau], value). Only F3 and F5 have one.
template <class Add>
void local_decay(const FactorGraph& graph, const Factor& f, std::size_t state,
                 const ParameterSet& params, Add&& add) {
  const std::size_t n = params.users.size();
  const double diff = std::abs(value_at(graph, f, state, 1) - value_at(graph, f, state, 0));
  if (f.kind == FactorKind::f3) {
    const auto& u = params.users[f.owner];
    add(f.owner, u.xi * f.gap * std::exp(-u.delta * f.gap) * diff);
  } else if (f.kind == FactorKind::f5) {
    const auto& u = params.users[f.owner];
    add(n + f.owner, u.eta * f.gap * std::exp(-u.tau * f.gap) * diff);
  }
}

void check_inputs(const FactorGraph& graph, const Assignment& q0, const ParameterSet& params,
                  const MarginalTable* marginals) {
  if (q0.size() != graph.num_variables()) throw ValidationError("incomplete assignment");
  if (params.users.size() < graph.num_owners()) {
    throw ValidationError("parameter set covers fewer users than the graph");
  }
  if (marginals && marginals->factors.size() != graph.num_factors()) {
    throw ValidationError("missing factor marginals");
  }
}

}  // namespace

SufficientStatistics sufficient_statistics(const FactorGraph& graph, const Assignment& q,
                                           const ParameterSet& params) {
  check_inputs(graph, q, params, nullptr);
  const ParamLayout layout{params.users.size()};
  SufficientStatistics phi(layout.size(), 0.0);
  for (const Factor& f : graph.factors()) {
    check_owner(f, params);
    local_phi(graph, f, factor_state(graph, f, q), params, layout,
              [&](std::size_t i, double v) { phi[i] += v; });
  }
  return phi;
}

std::vector<double> gradient_step2(const FactorGraph& graph, const Assignment& q0,
                                   const ParameterSet& params, const MarginalTable& marginals) {
  check_inputs(graph, q0, params, &marginals);
  const ParamLayout layout{params.users.size()};
  std::vector<double> grad(layout.size(), 0.0);
  for (std::size_t fi = 0; fi < graph.num_factors(); ++fi) {
    const Factor& f = graph.factor(fi);
    check_owner(f, params);
    local_phi(graph, f, factor_state(graph, f, q0), params, layout,
              [&](std::size_t i, double v) { grad[i] += v; });
    const auto& b = marginals.factors[fi];
    if (b.size() != (std::size_t{1} << f.arity())) throw ValidationError("malformed factor marginal");
    for (std::size_t c = 0; c < b.size(); ++c) {
      if (b[c] == 0.0) continue;
      local_phi(graph, f, c, params, layout, [&](std::size_t i, double v) { grad[i] -= b[c] * v; });
    }
  }
  return grad;
}

std::vector<double> gradient_step3(const FactorGraph& graph, const Assignment& q0,
                                   const ParameterSet& params, const MarginalTable& marginals) {
  check_inputs(graph, q0, params, &marginals);
  const std::size_t n = params.users.size();
  std::vector<double> grad(2 * n, 0.0);
  for (std::size_t fi = 0; fi < graph.num_factors(); ++fi) {
    const Factor& f = graph.factor(fi);
    if (f.kind != FactorKind::f3 && f.kind != FactorKind::f5) continue;
    check_owner(f, params);
    local_decay(graph, f, factor_state(graph, f, q0), params,
                [&](std::size_t i, double v) { grad[i] += v; });
    const auto& b = marginals.factors[fi];
    for (std::size_t c = 0; c < b.size(); ++c) {
      if (b[c] == 0.0) continue;
      local_decay(graph, f, c, params, [&](std::size_t i, double v) { grad[i] -= b[c] * v; });
    }
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (params.users[i].delta <= 0.0 && grad[i] < 0.0) grad[i] = 0.0;
    if (params.users[i].tau <= 0.0 && grad[n + i] < 0.0) grad[n + i] = 0.0;
  }
  return grad;
}

double exact_log_likelihood(const FactorGraph& graph, const Assignment& q0,
                            const ParameterSet& params) {
  return objective(graph, q0, params) - brute_force_log_partition(graph, params);
}

// ---------------------------------------------------------------------------
// Linear baseline

double LinearModel::score(const FeatureVector& x) const {
  return std::inner_product(weights.begin(), weights.end(), x.begin(), bias);
}

LinearModel train_linear_baseline(std::span<const LabeledExample> examples,
                                  const BaselineConfig& config) {
  if (examples.empty()) throw ValidationError("baseline training needs at least one example");
  const double n = static_cast<double>(examples.size());
  LinearModel model;
  LinearModel best;
  double best_objective = std::numeric_limits<double>::infinity();
  double previous = best_objective;
  int stalled = 0;
  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    FeatureVector grad_w{};
    double grad_b = 0.0;
    double loss = 0.0;
    for (const LabeledExample& ex : examples) {
      const double margin = ex.y * model.score(ex.x);
      if (margin < 1.0) {
        loss += 1.0 - margin;
        for (std::size_t k = 0; k < kFeatureDim; ++k) grad_w[k] -= ex.y * ex.x[k];
        grad_b -= ex.y;
      }
    }
    double norm = 0.0;
    for (double w : model.weights) norm += w * w;
    const double obj = 0.5 * config.l2 * norm + loss / n;
    if (obj < best_objective) {
      best_objective = obj;
      best = model;
    }
    stalled = std::abs(previous - obj) < config.tolerance ? stalled + 1 : 0;
    if (stalled >= 10) break;
    previous = obj;

    const double eta = config.step / std::sqrt(static_cast<double>(epoch));
    for (std::size_t k = 0; k < kFeatureDim; ++k) {
      model.weights[k] -= eta * (config.l2 * model.weights[k] + grad_w[k] / n);
    }
    model.bias -= eta * grad_b / n;
  }
  return best;
}

std::vector<LabeledExample> labeled_examples(const TimeVaryingNetwork& net, Emotion category) {
  std::vector<LabeledExample> out;
  for (const ImageRecord& img : net.images()) {
    if (auto label = img.label(category)) out.push_back({img.features, label->value()});
  }
  return out;
}

// ---------------------------------------------------------------------------
// Training

void TrainConfig::validate() const {
  if (max_outer_iterations < 1) throw ValidationError("max_outer_iterations must be >= 1");
  if (!(tolerance > 0.0)) throw ValidationError("tolerance must be positive");
  if (!(step > 0.0)) throw ValidationError("step must be positive");
  if (step2_iterations < 1 || step3_iterations < 1) {
    throw ValidationError("inner iteration counts must be >= 1");
  }
  if (max_halvings < 0) throw ValidationError("max_halvings must be >= 0");
  bp.validate();
}

InitResult initialize_params(const TimeVaryingNetwork& net, Emotion category,
                             const BaselineConfig& config) {
  InitResult out{ParameterSet::initial(net.num_users()), {}};
  const auto examples = labeled_examples(net, category);
  const bool has_pos = std::any_of(examples.begin(), examples.end(), [](auto& e) { return e.y > 0; });
  const bool has_neg = std::any_of(examples.begin(), examples.end(), [](auto& e) { return e.y < 0; });
  if (!has_pos || !has_neg) {
    out.warnings.push_back(std::string("no labeled images of both classes for ") +
                           std::string(to_string(category)) + "; alpha initialized to 0");
    return out;
  }
  // The model has no bias term, so only the weight vector carries over.
  out.params.alpha = train_linear_baseline(examples, config).weights;
  return out;
}

namespace {

struct Surrogate {
  double value = 0.0;
  MarginalTable marginals;
  BpDiagnostics diagnostics;
};

class Trainer {
 public:
  Trainer(const FactorGraph& graph, const TrainConfig& config)
      : graph_(graph), config_(config), exact_(graph.num_unclamped() <= kBruteForceLimit),
        bp_(graph, config.bp) {}

  FitResult run(ParameterSet params);

 private:
  Surrogate evaluate(const ParameterSet& params, const Assignment& q0);
  void build_preconditioners(std::size_t users);
  double ascend(ParameterSet& params, const Assignment& q0, Surrogate& current, bool decay);

  const FactorGraph& graph_;
  const TrainConfig& config_;
  bool exact_;
  BeliefPropagator bp_;
  std::vector<double> scale2_;
  std::vector<double> scale3_;
};

Surrogate Trainer::evaluate(const ParameterSet& params, const Assignment& q0) {
  Surrogate s;
  if (exact_) {
    s.value = exact_log_likelihood(graph_, q0, params);
    s.marginals = brute_force_marginals(graph_, params);
    s.diagnostics.converged = true;
    return s;
  }
  bp_.set_params(params);
  s.diagnostics = bp_.run(Semiring::sum_product);
  s.marginals = bp_.marginals();
  s.value = objective(graph_, q0, params) -
            bethe_log_partition(graph_, factor_log_tables(graph_, params), s.marginals);
  return s;
}

// Gradient coordinates are sums over factors, so each is scaled by the
// number of factors feeding it; the base step then acts per factor.
void Trainer::build_preconditioners(std::size_t users) {
  const ParamLayout layout{users};
  std::vector<double> count2(layout.size(), 0.0);
  std::vector<double> count3(2 * users, 0.0);
  for (const Factor& f : graph_.factors()) {
    switch (f.kind) {
      case FactorKind::f1: count2[layout.beta(f.owner)] += 1; break;
      case FactorKind::f2:
        for (std::size_t k = 0; k < kFeatureDim; ++k) count2[layout.alpha(k)] += 1;
        break;
      case FactorKind::f3:
        count2[layout.xi(f.owner)] += 1;
        count3[f.owner] += 1;
        break;
      case FactorKind::f4: count2[layout.lambda(f.owner)] += 1; break;
      case FactorKind::f5:
        count2[layout.eta(f.owner)] += 1;
        count3[users + f.owner] += 1;
        break;
    }
  }
  scale2_.resize(count2.size());
  scale3_.resize(count3.size());
  for (std::size_t i = 0; i < count2.size(); ++i) scale2_[i] = 1.0 / std::max(1.0, count2[i]);
  for (std::size_t i = 0; i < count3.size(); ++i) scale3_[i] = 1.0 / std::max(1.0, count3[i]);
}

// Runs the inner gradient-ascent loop of step 2 (decay = false) or step 3;
// returns the last step size used (0 when no step was accepted).
double Trainer::ascend(ParameterSet& params, const Assignment& q0, Surrogate& current, bool decay) {
  const int iterations = decay ? config_.step3_iterations : config_.step2_iterations;
  const std::size_t n = params.users.size();
  double step = config_.step;
  double used = 0.0;
  for (int it = 0; it < iterations; ++it) {
    const auto grad = decay ? gradient_step3(graph_, q0, params, current.marginals)
                            : gradient_step2(graph_, q0, params, current.marginals);
    if (std::all_of(grad.begin(), grad.end(), [](double g) { return std::abs(g) < 1e-12; })) break;
    bool accepted = false;
    for (int h = 0; h <= config_.max_halvings; ++h, step *= 0.5) {
      ParameterSet cand = params;
      if (decay) {
        for (std::size_t i = 0; i < n; ++i) {
          cand.users[i].delta += step * scale3_[i] * grad[i];
          cand.users[i].tau += step * scale3_[n + i] * grad[n + i];
        }
      } else {
        auto theta = pack_weights(params);
        for (std::size_t i = 0; i < theta.size(); ++i) theta[i] += step * scale2_[i] * grad[i];
        unpack_weights(theta, cand);
      }
      cand.project();
      Surrogate next = evaluate(cand, q0);
      if (next.value >= current.value - 1e-12 * std::max(1.0, std::abs(current.value))) {
        params = std::move(cand);
        current = std::move(next);
        accepted = true;
        used = step;
        break;
      }
    }
    if (!accepted) break;
  }
  return used;
}

FitResult Trainer::run(ParameterSet params) {
  if (params.users.size() < graph_.num_owners()) {
    throw ValidationError("parameter set covers fewer users than the graph");
  }
  params.project();
  build_preconditioners(params.users.size());

  FitResult result;
  double previous = std::numeric_limits<double>::quiet_NaN();
  for (int iter = 1; iter <= config_.max_outer_iterations; ++iter) {
    bp_.set_params(params);
    const MapResult decoded = decode_map(bp_);
    const Assignment& q0 = decoded.assignment;

    Surrogate current = evaluate(params, q0);
    TraceRow row;
    row.iteration = iter;
    row.exact = exact_;
    row.step2 = ascend(params, q0, current, false);
    if (!config_.freeze_decay) row.step3 = ascend(params, q0, current, true);
    row.objective = current.value;
    row.residual = current.diagnostics.residual;
    row.bp_converged = current.diagnostics.converged && decoded.diagnostics.converged;
    result.trace.push_back(row);

    if (!std::isnan(previous) &&
        std::abs(row.objective - previous) / std::max(1.0, std::abs(previous)) < config_.tolerance) {
      result.converged = true;
      break;
    }
    previous = row.objective;
  }
  if (!result.converged) {
    result.warnings.push_back("training stopped at the iteration limit before converging");
  }

  const Prediction final = predict(graph_, params, config_.bp);
  result.params = std::move(params);
  result.assignment = final.assignment;
  result.marginals = final.marginals;
  return result;
}

}  // namespace

FitResult fit(const FactorGraph& graph, ParameterSet init, const TrainConfig& config) {
  config.validate();
  Trainer trainer(graph, config);
  return trainer.run(std::move(init));
}

Prediction predict(const FactorGraph& graph, const ParameterSet& params, const BpConfig& config) {
  BeliefPropagator bp(graph, config);
  bp.set_params(params);
  Prediction out;
  const MapResult decoded = decode_map(bp);
  out.assignment = decoded.assignment;
  out.max_diagnostics = decoded.diagnostics;
  out.sum_diagnostics = bp.run(Semiring::sum_product);
  out.marginals = bp.marginals();
  return out;
}

// ---------------------------------------------------------------------------
// Holdout split

HoldoutSplit holdout_split(const TimeVaryingNetwork& net, Emotion category, double test_fraction,
                           std::uint64_t seed) {
  if (!(test_fraction >= 0.0 && test_fraction <= 1.0)) {
    throw ValidationError("test fraction must be in [0, 1]");
  }
  std::vector<std::size_t> labeled;
  for (std::size_t i = 0; i < net.num_images(); ++i) {
    if (net.image(i).label(category)) labeled.push_back(i);
  }
  std::mt19937_64 rng(seed);
  std::shuffle(labeled.begin(), labeled.end(), rng);
  const auto n_test = static_cast<std::size_t>(std::llround(test_fraction * labeled.size()));
  HoldoutSplit split;
  split.test.assign(labeled.begin(), labeled.begin() + static_cast<std::ptrdiff_t>(n_test));
  split.train.assign(labeled.begin() + static_cast<std::ptrdiff_t>(n_test), labeled.end());
  std::sort(split.test.begin(), split.test.end());
  std::sort(split.train.begin(), split.train.end());
  return split;
}

// ---------------------------------------------------------------------------
// Persistence

std::string params_json(const ParameterSet& params, const TimeVaryingNetwork& net,
                        const ParamsMetadata& meta) {
  if (params.users.size() != net.num_users()) {
    throw ValidationError("parameter set does not match the network's users");
  }
  nlohmann::json doc;
  doc["schema"] = 1;
  doc["alpha"] = params.alpha;
  nlohmann::json users = nlohmann::json::object();
  for (std::size_t i = 0; i < params.users.size(); ++i) {
    const UserParams& u = params.users[i];
    users[net.user_id(i)] = {{"beta", u.beta}, {"xi", u.xi},   {"delta", u.delta},
                             {"lambda", u.lambda}, {"eta", u.eta}, {"tau", u.tau}};
  }
  doc["users"] = std::move(users);
  doc["metadata"] = {{"category", std::string(to_string(meta.category))},
                     {"window", meta.window},
                     {"iterations", meta.iterations},
                     {"converged", meta.converged}};
  return doc.dump(1) + "\n";
}

ParameterSet parse_params(const std::string& text, const TimeVaryingNetwork& net,
                          ParamsMetadata* meta) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(std::string("params: ") + e.what(), 0);
  }
  try {
    ParameterSet params = ParameterSet::initial(net.num_users());
    const auto& alpha = doc.at("alpha");
    if (!alpha.is_array() || alpha.size() != kFeatureDim) {
      throw ValidationError("params: alpha must have 21 entries");
    }
    for (std::size_t k = 0; k < kFeatureDim; ++k) params.alpha[k] = alpha[k].get<double>();
    for (const auto& [id, entry] : doc.at("users").items()) {
      const auto index = net.user_index(id);
      if (!index) continue;
      UserParams& u = params.users[*index];
      u.beta = entry.at("beta").get<double>();
      u.xi = entry.at("xi").get<double>();
      u.delta = entry.at("delta").get<double>();
      u.lambda = entry.at("lambda").get<double>();
      u.eta = entry.at("eta").get<double>();
      u.tau = entry.at("tau").get<double>();
    }
    if (meta) {
      const auto& m = doc.at("metadata");
      const auto category = parse_emotion(m.at("category").get<std::string>());
      if (!category) throw ValidationError("params: unknown category");
      meta->category = *category;
      meta->window = m.at("window").get<std::uint32_t>();
      meta->iterations = m.at("iterations").get<int>();
      meta->converged = m.at("converged").get<bool>();
    }
    params.project();
    return params;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("params: ") + e.what());
  }
}

void write_trace_csv(std::ostream& out, std::span<const TraceRow> trace) {
  out << "iteration,objective,residual,step2,step3,bp_converged,exact\n";
  for (const TraceRow& r : trace) {
    out << r.iteration << ',' << r.objective << ',' << r.residual << ',' << r.step2 << ','
        << r.step3 << ',' << (r.bp_converged ? 1 : 0) << ',' << (r.exact ? 1 : 0) << '\n';
  }
}

}  // namespace emoinf
