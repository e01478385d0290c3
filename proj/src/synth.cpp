#include "emoinf/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include <json.hpp>

#include "emoinf/error.hpp"
#include "emoinf/seed.hpp"

namespace emoinf {

// ---------------------------------------------------------------------------
// Gibbs sampling

GibbsSampler::GibbsSampler(const FactorGraph& graph, std::vector<FactorTable> tables,
                           std::vector<std::array<double, 2>> unary, std::uint64_t seed)
    : graph_(graph), tables_(std::move(tables)), unary_(std::move(unary)),
      states_(graph.num_variables(), 0), rng_(seed) {
  if (tables_.size() != graph.num_factors()) throw ValidationError("one table per factor expected");
  if (!unary_.empty() && unary_.size() != graph.num_variables()) {
    throw ValidationError("unary potentials must cover every variable");
  }
  for (std::size_t v = 0; v < graph.num_variables(); ++v) {
    const Variable& var = graph.variable(v);
    states_[v] = var.clamped() ? var.clamp : static_cast<int>(rng_() & 1);
  }
}

double GibbsSampler::conditional(std::size_t var) const {
  double log_odds = unary_.empty() ? 0.0 : unary_[var][1] - unary_[var][0];
  for (std::uint32_t fi : graph_.factors_of(var)) {
    const Factor& f = graph_.factor(fi);
    const auto vars = f.variables();
    std::size_t base = 0;
    std::size_t bit = 0;
    for (std::size_t k = 0; k < vars.size(); ++k) {
      if (vars[k] == var) {
        bit = std::size_t{1} << k;
      } else {
        base |= static_cast<std::size_t>(states_[vars[k]]) << k;
      }
    }
    log_odds += tables_[fi][base | bit] - tables_[fi][base];
  }
  return 1.0 / (1.0 + std::exp(-log_odds));
}

void GibbsSampler::sweep() {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (std::size_t v = 0; v < graph_.num_variables(); ++v) {
    if (graph_.variable(v).clamped()) continue;
    states_[v] = unit(rng_) < conditional(v) ? 1 : 0;
  }
}

Assignment GibbsSampler::assignment() const {
  Assignment q;
  q.values.resize(states_.size());
  for (std::size_t v = 0; v < states_.size(); ++v) {
    q[v] = domain_value(graph_.variable(v).id.kind, states_[v]);
  }
  return q;
}

// ---------------------------------------------------------------------------
// Synthetic networks

void SynthConfig::validate() const {
  if (users < 1 || slices < 1) throw ValidationError("synth: users and slices must be >= 1");
  const auto rate = [](double r, const char* name) {
    if (!(r >= 0.0 && r <= 1.0)) throw ValidationError(std::string("synth: ") + name + " must be in [0, 1]");
  };
  rate(edge_dropout, "edge_dropout");
  rate(influence_density, "influence_density");
  rate(observation_rate, "observation_rate");
  if (!(mean_degree >= 0.0)) throw ValidationError("synth: mean_degree must be >= 0");
  if (!(images_per_slice >= 0.0)) throw ValidationError("synth: images_per_slice must be >= 0");
  if (!(feature_sigma > 0.0)) throw ValidationError("synth: feature_sigma must be positive");
  if (!(feature_separation >= 0.0)) throw ValidationError("synth: feature_separation must be >= 0");
  if (!(influence_bias >= 0.0)) throw ValidationError("synth: influence_bias must be >= 0");
  if (burn_in < 0) throw ValidationError("synth: burn_in must be >= 0");
  if (window < 1) throw ValidationError("synth: window must be >= 1");
  for (double w : {planted.beta, planted.xi, planted.delta, planted.lambda, planted.eta,
                   planted.tau}) {
    if (!(w >= 0.0) || !std::isfinite(w)) throw ValidationError("synth: planted parameters must be finite and >= 0");
  }
}

namespace {

std::string user_name(std::size_t u) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "u%03zu", u);
  return buf;
}

// Users, edges and unlabeled images only; features and labels come later.
TimeVaryingNetwork sample_structure(const SynthConfig& cfg) {
  TimeVaryingNetwork net(cfg.slices);
  for (std::size_t u = 0; u < cfg.users; ++u) net.add_user(user_name(u));

  std::mt19937_64 topo(derive_seed(cfg.seed, "topology"));
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double p = cfg.users > 1 ? std::min(1.0, cfg.mean_degree / static_cast<double>(cfg.users - 1)) : 0.0;
  for (std::size_t i = 0; i < cfg.users; ++i) {
    for (std::size_t j = i + 1; j < cfg.users; ++j) {
      if (unit(topo) >= p) continue;
      for (TimeSlice t = 0; t < cfg.slices; ++t) {
        if (cfg.edge_dropout > 0.0 && unit(topo) < cfg.edge_dropout) continue;
        net.add_edge(i, j, t);
      }
    }
  }

  std::mt19937_64 counts(derive_seed(cfg.seed, "images"));
  std::poisson_distribution<int> poisson(cfg.images_per_slice);
  for (std::size_t u = 0; u < cfg.users; ++u) {
    for (TimeSlice t = 0; t < cfg.slices; ++t) {
      const int k = cfg.images_per_slice > 0.0 ? poisson(counts) : 0;
      for (int m = 0; m < k; ++m) {
        ImageRecord img;
        img.id = user_name(u) + "-t" + std::to_string(t) + "-" + std::to_string(m);
        img.owner = user_name(u);
        img.slice = t;
        net.add_image(std::move(img));
      }
    }
  }
  return net;
}

}  // namespace

SynthResult generate(const SynthConfig& cfg) {
  cfg.validate();
  const TimeVaryingNetwork structure = sample_structure(cfg);

  // Tendencies per directed static edge, drawn in (src, dst) order.
  std::set<std::pair<std::uint32_t, std::uint32_t>> tendencies;
  {
    std::set<std::pair<std::size_t, std::size_t>> pairs;
    for (TimeSlice t = 0; t < cfg.slices; ++t) {
      for (const auto& e : structure.edges_at(t)) pairs.insert(e);
    }
    std::mt19937_64 rng(derive_seed(cfg.seed, "tendency"));
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    for (const auto& [lo, hi] : pairs) {
      for (auto [src, dst] : {std::pair{lo, hi}, std::pair{hi, lo}}) {
        if (unit(rng) < cfg.influence_density) {
          tendencies.emplace(static_cast<std::uint32_t>(src), static_cast<std::uint32_t>(dst));
        }
      }
    }
  }

  // Joint draw of every emotion and influence variable. Features do not
  // exist yet, so F2 is left out; image labels are driven by their owners.
  GraphOptions options;
  options.window = cfg.window;
  options.drop = {FactorKind::f2};
  FactorGraph gen = build_graph(structure, cfg.category, options);
  ParameterSet planted;
  planted.users.assign(cfg.users, cfg.planted);
  std::vector<std::array<double, 2>> unary(gen.num_variables(), {0.0, 0.0});
  for (std::size_t v = 0; v < gen.num_variables(); ++v) {
    const VariableId& id = gen.variable(v).id;
    if (id.kind != VarKind::influence) continue;
    const int tendency = tendencies.count({id.a, id.b}) ? 1 : 0;
    if (std::isinf(cfg.influence_bias)) {
      gen.set_clamp(v, tendency);
    } else {
      unary[v][tendency] = cfg.influence_bias;
    }
  }
  GibbsSampler sampler(gen, factor_log_tables(gen, planted), std::move(unary),
                       derive_seed(cfg.seed, "gibbs"));
  sampler.run(cfg.burn_in);
  const Assignment joint = sampler.assignment();

  SynthResult out;
  out.tendencies = std::move(tendencies);
  out.network = TimeVaryingNetwork(cfg.slices);
  for (std::size_t u = 0; u < cfg.users; ++u) out.network.add_user(structure.user_id(u));
  for (TimeSlice t = 0; t < cfg.slices; ++t) {
    for (const auto& [lo, hi] : structure.edges_at(t)) out.network.add_edge(lo, hi, t);
  }
  std::mt19937_64 feat(derive_seed(cfg.seed, "features"));
  std::mt19937_64 reveal(derive_seed(cfg.seed, "observe"));
  std::normal_distribution<double> noise(0.0, cfg.feature_sigma);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  // Class means at +-(separation / 2) sigma along the all-ones direction.
  const double offset = 0.5 * cfg.feature_separation * cfg.feature_sigma /
                        std::sqrt(static_cast<double>(kFeatureDim));
  for (std::size_t i = 0; i < structure.num_images(); ++i) {
    ImageRecord img = structure.image(i);
    const int y = joint[gen.require(VariableId::image(static_cast<std::uint32_t>(i)))];
    for (double& x : img.features) x = y * offset + noise(feat);
    if (unit(reveal) < cfg.observation_rate) img.labels.emplace(cfg.category, BinaryLabel(y));
    out.full_labels.push_back(y);
    out.network.add_image(std::move(img));
  }

  // Same structure, so the observed graph has the generator's variable order.
  const FactorGraph observed = build_graph(out.network, cfg.category, {cfg.window, {}});
  if (observed.num_variables() != gen.num_variables()) {
    throw Error("synth: observed graph does not match the generator graph");
  }
  out.truth = joint;
  return out;
}

std::set<InfluenceKey> influence_ground_truth(const FactorGraph& graph, const Assignment& truth) {
  if (truth.size() != graph.num_variables()) throw ValidationError("truth does not cover the graph");
  std::set<InfluenceKey> out;
  for (std::size_t v = 0; v < graph.num_variables(); ++v) {
    const VariableId& id = graph.variable(v).id;
    if (id.kind == VarKind::influence && truth[v] == 1) out.emplace(id.a, id.b, id.c);
  }
  return out;
}

std::map<InfluenceKey, double> influence_weights(
    const FactorGraph& graph, const std::vector<std::array<double, 2>>& marginals) {
  std::map<InfluenceKey, double> out;
  for (std::size_t v = 0; v < graph.num_variables(); ++v) {
    const VariableId& id = graph.variable(v).id;
    if (id.kind == VarKind::influence) out[{id.a, id.b, id.c}] = marginals.at(v)[1];
  }
  return out;
}

std::optional<double> score_influence_recovery(const std::map<InfluenceKey, double>& predicted,
                                               const std::set<InfluenceKey>& truth) {
  std::vector<std::pair<double, bool>> scored;
  scored.reserve(predicted.size());
  for (const auto& [key, w] : predicted) scored.emplace_back(w, truth.count(key) > 0);
  std::sort(scored.begin(), scored.end(),
            [](const auto& a, const auto& b) { return a.first < b.first; });
  double positives = 0.0;
  double rank_sum = 0.0;
  for (std::size_t i = 0; i < scored.size();) {
    std::size_t j = i;
    while (j < scored.size() && scored[j].first == scored[i].first) ++j;
    const double mid_rank = 0.5 * static_cast<double>(i + 1 + j);  // mean of ranks i+1..j
    for (std::size_t k = i; k < j; ++k) {
      if (scored[k].second) {
        positives += 1.0;
        rank_sum += mid_rank;
      }
    }
    i = j;
  }
  const double negatives = static_cast<double>(scored.size()) - positives;
  if (positives == 0.0 || negatives == 0.0) return std::nullopt;
  return (rank_sum - positives * (positives + 1.0) / 2.0) / (positives * negatives);
}

// ---------------------------------------------------------------------------
// JSON

namespace {

nlohmann::json user_params_json(const UserParams& u) {
  return {{"beta", u.beta}, {"xi", u.xi},   {"delta", u.delta},
          {"lambda", u.lambda}, {"eta", u.eta}, {"tau", u.tau}};
}

nlohmann::json config_doc(const SynthConfig& c) {
  nlohmann::json doc;
  doc["seed"] = c.seed;
  doc["users"] = c.users;
  doc["slices"] = c.slices;
  doc["mean_degree"] = c.mean_degree;
  doc["images_per_slice"] = c.images_per_slice;
  doc["edge_dropout"] = c.edge_dropout;
  doc["planted"] = user_params_json(c.planted);
  doc["feature_separation"] = c.feature_separation;
  doc["feature_sigma"] = c.feature_sigma;
  doc["influence_density"] = c.influence_density;
  if (std::isinf(c.influence_bias)) {
    doc["influence_bias"] = "inf";
  } else {
    doc["influence_bias"] = c.influence_bias;
  }
  doc["observation_rate"] = c.observation_rate;
  doc["burn_in"] = c.burn_in;
  doc["window"] = c.window;
  doc["category"] = std::string(to_string(c.category));
  return doc;
}

}  // namespace

std::string synth_config_json(const SynthConfig& config) { return config_doc(config).dump(1) + "\n"; }

SynthConfig parse_synth_config(const std::string& text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(std::string("synth config: ") + e.what(), 0);
  }
  SynthConfig c;
  try {
    if (!doc.is_object()) throw ValidationError("synth config must be a JSON object");
    for (const auto& [key, value] : doc.items()) {
      if (key == "seed") c.seed = value.get<std::uint64_t>();
      else if (key == "users") c.users = value.get<std::size_t>();
      else if (key == "slices") c.slices = value.get<TimeSlice>();
      else if (key == "mean_degree") c.mean_degree = value.get<double>();
      else if (key == "images_per_slice") c.images_per_slice = value.get<double>();
      else if (key == "edge_dropout") c.edge_dropout = value.get<double>();
      else if (key == "feature_separation") c.feature_separation = value.get<double>();
      else if (key == "feature_sigma") c.feature_sigma = value.get<double>();
      else if (key == "influence_density") c.influence_density = value.get<double>();
      else if (key == "observation_rate") c.observation_rate = value.get<double>();
      else if (key == "burn_in") c.burn_in = value.get<int>();
      else if (key == "window") c.window = value.get<std::uint32_t>();
      else if (key == "influence_bias") {
        c.influence_bias = value.is_string() && value.get<std::string>() == "inf"
                               ? std::numeric_limits<double>::infinity()
                               : value.get<double>();
      } else if (key == "category") {
        const auto e = parse_emotion(value.get<std::string>());
        if (!e) throw ValidationError("synth config: unknown category");
        c.category = *e;
      } else if (key == "planted") {
        for (const auto& [name, w] : value.items()) {
          double* slot = name == "beta"     ? &c.planted.beta
                         : name == "xi"     ? &c.planted.xi
                         : name == "delta"  ? &c.planted.delta
                         : name == "lambda" ? &c.planted.lambda
                         : name == "eta"    ? &c.planted.eta
                         : name == "tau"    ? &c.planted.tau
                                            : nullptr;
          if (!slot) throw ValidationError("synth config: unknown planted parameter " + name);
          *slot = w.get<double>();
        }
      } else {
        throw ValidationError("synth config: unknown key " + key);
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("synth config: ") + e.what());
  }
  c.validate();
  return c;
}

std::string truth_json(const SynthResult& result, const SynthConfig& config) {
  const FactorGraph graph = build_graph(result.network, config.category, {config.window, {}});
  nlohmann::json assignment = nlohmann::json::object();
  for (std::size_t v = 0; v < graph.num_variables(); ++v) {
    assignment[graph.display_name(v)] = result.truth[v];
  }
  nlohmann::json tendencies = nlohmann::json::array();
  for (const auto& [src, dst] : result.tendencies) {
    tendencies.push_back({result.network.user_id(src), result.network.user_id(dst)});
  }
  nlohmann::json doc;
  doc["config"] = config_doc(config);
  doc["assignment"] = std::move(assignment);
  doc["tendencies"] = std::move(tendencies);
  return doc.dump(1) + "\n";
}

}  // namespace emoinf
