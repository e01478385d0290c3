// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any fails.
//
// Tolerances are pinned below. Fits for the synthetic-recovery criteria are
// shared where the protocol allows it (the holdout runs serve both the
// accuracy-vs-baseline and the ablation comparisons).

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "cli.hpp"
#include "dot_parser.hpp"
#include "emoinf/analysis.hpp"
#include "emoinf/features.hpp"
#include "emoinf/learning.hpp"
#include "emoinf/predictions.hpp"
#include "emoinf/seed.hpp"
#include "emoinf/synth.hpp"
#include "random_graphs.hpp"

using namespace emoinf;
using emoinf::testing::random_assignment;
using emoinf::testing::random_graph;
using emoinf::testing::random_params;

namespace {

constexpr double kMarginalTol = 1e-9;
constexpr double kLoopyGap = 0.02;
constexpr double kLoopyShare = 0.90;
constexpr double kGradRelTol = 1e-4;
constexpr double kGradAbsFloor = 1e-8;
constexpr double kGradAbsTol = 1e-6;
constexpr double kObjectiveTol = 1e-9;
constexpr double kAucTarget = 0.70;
constexpr double kAccuracyMargin = 0.02;
constexpr double kCcaDependent = 0.999;
constexpr double kCcaIndependent = 0.05;
constexpr double kGibbsTol = 0.02;
constexpr int kSeeds = 10;

using Clock = std::chrono::steady_clock;
double since(Clock::time_point t) { return std::chrono::duration<double>(Clock::now() - t).count(); }

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

int failures = 0;

void report(int id, const char* name, const std::function<Outcome()>& body) {
  const auto start = Clock::now();
  Outcome o;
  try {
    o = body();
  } catch (const std::exception& e) {
    o = {false, std::string("exception: ") + e.what()};
  }
  if (!o.pass) ++failures;
  std::printf("C%-2d %s  %s: %s [%.1fs]\n", id, o.pass ? "PASS" : "FAIL", name, o.detail.c_str(), since(start));
  std::fflush(stdout);
}

// ---------------------------------------------------------------------------

Outcome tree_oracle() {
  std::mt19937_64 rng(1001);
  const auto start = Clock::now();
  int graphs = 0, map_ok = 0;
  double worst = 0.0;
  for (; graphs < 120; ++graphs) {
    const std::size_t n = 3 + graphs % 6;
    const FactorGraph g = random_graph(rng, {.variables = n, .clamp_rate = 0.2});
    const ParameterSet p = random_params(rng);
    map_ok += max_product(g, p).assignment.values == brute_force_map(g, p).values;
    const MarginalTable bp = sum_product(g, p).marginals, exact = brute_force_marginals(g, p);
    for (std::size_t v = 0; v < g.num_variables(); ++v) {
      for (int s = 0; s < 2; ++s) worst = std::max(worst, std::abs(bp.variables[v][s] - exact.variables[v][s]));
    }
  }
  const double secs = since(start);
  return {map_ok == graphs && worst <= kMarginalTol && secs < 30.0,
          fmt("%d trees (3-8 vars), MAP exact on %d, max marginal error %.2e (tol %.0e), %.2fs (limit 30s)", graphs,
              map_ok, worst, kMarginalTol, secs)};
}

Outcome loopy_objective() {
  std::mt19937_64 rng(1002);
  const auto start = Clock::now();
  std::vector<double> gaps;
  while (gaps.size() < 60) {
    const std::size_t n = 6 + gaps.size() % 7;
    const FactorGraph g = random_graph(rng, {.variables = n, .extra_factors = 1 + gaps.size() % 3, .clamp_rate = 0.1});
    if (g.is_forest()) continue;
    const ParameterSet p = random_params(rng);
    const double best = objective(g, brute_force_map(g, p), p);
    const double got = objective(g, max_product(g, p).assignment, p);
    gaps.push_back(std::abs(best - got) / std::max(std::abs(best), 1e-12));
  }
  const double secs = since(start);
  const auto within = std::count_if(gaps.begin(), gaps.end(), [](double x) { return x <= kLoopyGap; });
  std::sort(gaps.begin(), gaps.end());
  const double share = double(within) / gaps.size();
  return {share >= kLoopyShare && secs < 60.0,
          fmt("%zu loopy graphs (<=12 vars), %.1f%% within %.0f%% of optimum (need %.0f%%), gap median %.2e "
              "p90 %.2e max %.2e, %.2fs (limit 60s)",
              gaps.size(), 100 * share, 100 * kLoopyGap, 100 * kLoopyShare, gaps[gaps.size() / 2],
              gaps[gaps.size() * 9 / 10], gaps.back(), secs)};
}

// Central differences of the exact log-likelihood; the perturbation is
// applied through the same packing the learner uses, plus the decay rates.
std::vector<double> finite_differences(const FactorGraph& g, const Assignment& q0, const ParameterSet& p) {
  const double h = 1e-5;
  const auto theta = pack_weights(p);
  const std::size_t n = p.users.size();
  std::vector<double> out;
  for (std::size_t i = 0; i < theta.size(); ++i) {
    ParameterSet plus = p, minus = p;
    auto t = theta;
    t[i] += h;
    unpack_weights(t, plus);
    t[i] -= 2 * h;
    unpack_weights(t, minus);
    out.push_back((exact_log_likelihood(g, q0, plus) - exact_log_likelihood(g, q0, minus)) / (2 * h));
  }
  for (std::size_t i = 0; i < 2 * n; ++i) {
    ParameterSet plus = p, minus = p;
    (i < n ? plus.users[i].delta : plus.users[i - n].tau) += h;
    (i < n ? minus.users[i].delta : minus.users[i - n].tau) -= h;
    out.push_back((exact_log_likelihood(g, q0, plus) - exact_log_likelihood(g, q0, minus)) / (2 * h));
  }
  return out;
}

Outcome gradients() {
  std::mt19937_64 rng(1003);
  const auto start = Clock::now();
  int graphs = 0, bad = 0;
  double worst_rel = 0.0, worst_abs = 0.0;
  for (; graphs < 60; ++graphs) {
    // Even trials: trees with sum-product marginals; odd: loopy with exact ones.
    const bool tree = graphs % 2 == 0;
    const FactorGraph g = random_graph(rng, {.variables = 4 + static_cast<std::size_t>(graphs % 7),
                                             .extra_factors = tree ? 0u : 2u});
    const ParameterSet p = random_params(rng);
    const Assignment q0 = random_assignment(rng, g);
    const MarginalTable m = tree ? sum_product(g, p).marginals : brute_force_marginals(g, p);
    auto analytic = gradient_step2(g, q0, p, m);
    const auto step3 = gradient_step3(g, q0, p, m);
    analytic.insert(analytic.end(), step3.begin(), step3.end());
    const auto numeric = finite_differences(g, q0, p);
    bool ok = true;
    for (std::size_t i = 0; i < numeric.size(); ++i) {
      // gradient_step3 projects coordinates pinned at zero; skip those.
      if (i >= kFeatureDim + 4 * p.users.size()) {
        const std::size_t k = i - kFeatureDim - 4 * p.users.size(), n = p.users.size();
        const double value = k < n ? p.users[k].delta : p.users[k - n].tau;
        if (value <= 0.0 && numeric[i] < 0.0) continue;
      }
      const double diff = std::abs(analytic[i] - numeric[i]);
      if (std::abs(numeric[i]) < kGradAbsFloor) {
        worst_abs = std::max(worst_abs, diff);
        ok = ok && diff <= kGradAbsTol;
      } else {
        const double rel = diff / std::abs(numeric[i]);
        worst_rel = std::max(worst_rel, rel);
        ok = ok && rel <= kGradRelTol;
      }
    }
    bad += !ok;
  }
  const double secs = since(start);
  return {bad == 0 && secs < 60.0,
          fmt("%d graphs (<=10 unclamped), %d outside tolerance, worst rel %.2e (tol %.0e), worst abs %.2e "
              "where |g|<%.0e, %.2fs (limit 60s)",
              graphs, bad, worst_rel, kGradRelTol, worst_abs, kGradAbsFloor, secs)};
}

Outcome linear_objective() {
  std::mt19937_64 rng(1004);
  double worst = 0.0;
  int pairs = 0;
  for (; pairs < 1000; ++pairs) {
    const FactorGraph g = random_graph(rng, {.variables = 2 + static_cast<std::size_t>(pairs % 15),
                                             .extra_factors = static_cast<std::size_t>(pairs % 3)});
    const ParameterSet p = random_params(rng);
    const Assignment q = random_assignment(rng, g);
    const double lhs = dot(pack_weights(p), sufficient_statistics(g, q, p));
    worst = std::max(worst, std::abs(lhs - objective(g, q, p)));
  }
  return {worst <= kObjectiveTol, fmt("%d (graph, assignment) pairs, max |theta.phi - objective| %.2e (tol %.0e)",
                                      pairs, worst, kObjectiveTol)};
}

// --- synthetic recovery ------------------------------------------------------

SynthConfig recovery_config(std::uint64_t seed) {
  SynthConfig c;  // defaults: N=50, T=8, degree 4, density 0.3, lambda 1.5, eta 1, separation 1.5, 50% observed
  c.seed = seed;
  return c;
}

Outcome influence_auc() {
  const auto start = Clock::now();
  std::vector<double> aucs;
  for (int s = 1; s <= kSeeds; ++s) {
    const SynthConfig cfg = recovery_config(s);
    const SynthResult data = generate(cfg);
    const FactorGraph g = build_graph(data.network, cfg.category, {cfg.window, {}});
    InitResult init = initialize_params(data.network, cfg.category);
    const FitResult fitted = fit(g, std::move(init.params));
    const auto auc = score_influence_recovery(influence_weights(g, fitted.marginals.variables),
                                              influence_ground_truth(g, data.truth));
    aucs.push_back(auc.value_or(0.5));
  }
  const double secs = since(start);
  double mean = 0.0;
  std::string each;
  for (double a : aucs) {
    mean += a / aucs.size();
    each += fmt(" %.3f", a);
  }
  return {mean >= kAucTarget && secs < 600.0,
          fmt("mean AUC %.3f over %d seeds (need %.2f), per seed:%s, %.0fs (limit 600s)", mean, kSeeds, kAucTarget,
              each.c_str(), secs)};
}

struct HoldoutRuns {
  std::vector<Metrics> model, baseline, no_f3, no_f4, no_f5;
};

const HoldoutRuns& holdout_runs() {
  static const HoldoutRuns runs = [] {
    HoldoutRuns r;
    for (int s = 1; s <= kSeeds; ++s) {
      const SynthConfig cfg = recovery_config(s);
      const SynthResult data = generate(cfg);
      ExperimentConfig ec;
      ec.window = cfg.window;
      ec.test_fraction = 0.2;
      ec.split_seed = derive_seed(s, "split");
      const ExperimentResult full = run_holdout(data.network, cfg.category, ec, {});
      r.model.push_back(full.model);
      r.baseline.push_back(full.baseline);
      r.no_f3.push_back(ablation_run(data.network, cfg.category, ec, {FactorKind::f3}));
      r.no_f4.push_back(ablation_run(data.network, cfg.category, ec, {FactorKind::f4}));
      r.no_f5.push_back(ablation_run(data.network, cfg.category, ec, {FactorKind::f5}));
    }
    return r;
  }();
  return runs;
}

double mean_accuracy(const std::vector<Metrics>& m) {
  double sum = 0.0;
  for (const auto& x : m) sum += x.accuracy;
  return sum / m.size();
}

Outcome beats_baseline() {
  const auto& r = holdout_runs();
  const double model = mean_accuracy(r.model), base = mean_accuracy(r.baseline);
  return {model - base >= kAccuracyMargin,
          fmt("model %.4f vs baseline %.4f, margin %+.2f pp (need +%.0f pp), %d seeds, 80/20 split", model, base,
              100 * (model - base), 100 * kAccuracyMargin, kSeeds)};
}

Outcome ablation_order() {
  const auto& r = holdout_runs();
  const double full = mean_accuracy(r.model), f3 = mean_accuracy(r.no_f3), f4 = mean_accuracy(r.no_f4),
               f5 = mean_accuracy(r.no_f5);
  return {full >= f3 && full >= f4 && full >= f5,
          fmt("Model %.4f, Model-f3 %.4f, Model-f4 %.4f, Model-f5 %.4f over %d seeds", full, f3, f4, f5, kSeeds)};
}

// --- observation studies -----------------------------------------------------

Outcome sampling_order() {
  double three = 0.0, one_two = 0.0, indep = 0.0;
  int used = 0;
  for (int s = 1; s <= kSeeds; ++s) {
    const SynthResult data = generate(recovery_config(s));
    SamplingConfig sc;
    sc.deltas = {1};
    sc.repetitions = 10;
    sc.seed = derive_seed(s, "sampling");
    const SamplingCell cell = sampling_test(data.network, Emotion::happiness, sc).cells.at(0);
    if (cell.three_plus.repetitions == 0 || cell.one_two.repetitions == 0 || cell.independent.repetitions == 0) {
      continue;
    }
    three += cell.three_plus.ratio;
    one_two += cell.one_two.ratio;
    indep += cell.independent.ratio;
    ++used;
  }
  if (used == 0) return {false, "no seed produced all three groups"};
  three /= used;
  one_two /= used;
  indep /= used;
  return {three > one_two && one_two > indep,
          fmt("dt=1, 10 repetitions, %d networks: >=3 friends %.3f > 1-2 friends %.3f > independent %.3f", used, three,
              one_two, indep)};
}

TimeVaryingNetwork constant_users() {
  TimeVaryingNetwork net(6);
  for (int u = 0; u < 10; ++u) net.add_user("u" + std::to_string(u));
  for (int u = 0; u < 10; ++u) {
    for (TimeSlice t = 0; t < 6; ++t) {
      ImageRecord img;
      img.id = fmt("u%d-%u", u, t);
      img.owner = "u" + std::to_string(u);
      img.slice = t;
      img.labels[Emotion::happiness] = BinaryLabel(u % 2 == 0 ? 1 : -1);
      net.add_image(img);
    }
  }
  return net;
}

Outcome observation_statistics() {
  std::string detail;
  bool ok = true;

  const RateReport temporal = temporal_correlation(constant_users(), Emotion::happiness, 0, 4, 1);
  bool all_one = !temporal.points.empty();
  for (const auto& p : temporal.points) all_one = all_one && p.users > 0 && p.rate == 1.0;
  ok = ok && all_one;
  detail += fmt("Rate_T on constant users %s", all_one ? "= 1 at dt=1..4" : "!= 1");

  double friends = 0.0, random = 0.0;
  for (int s = 1; s <= kSeeds; ++s) {
    const SynthResult data = generate(recovery_config(s));
    const auto seed = derive_seed(s, "social");
    for (const auto& p : social_correlation(data.network, Emotion::happiness, 0, 4, NeighborMode::friends, seed).points) {
      friends += p.rate / (4.0 * kSeeds);
    }
    for (const auto& p : social_correlation(data.network, Emotion::happiness, 0, 4, NeighborMode::random, seed).points) {
      random += p.rate / (4.0 * kSeeds);
    }
  }
  ok = ok && friends > random;
  detail += fmt("; Rate_I friends %.3f vs random %.3f", friends, random);

  std::mt19937_64 rng(1009);
  std::normal_distribution<double> n01;
  const int n = 10000;
  Eigen::MatrixXd x(n, 3), y(n, 2), noise(n, 2);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < 3; ++j) x(i, j) = n01(rng);
    for (int j = 0; j < 2; ++j) noise(i, j) = n01(rng);
  }
  Eigen::MatrixXd mix(3, 2);
  mix << 0.7, -1.2, 0.3, 0.5, -2.0, 0.1;
  y = x * mix;
  const double dependent = cca(x, y).correlations.at(0);
  const double independent = cca(x, noise).correlations.at(0);
  ok = ok && dependent >= kCcaDependent && independent <= kCcaIndependent;
  detail += fmt("; CCA dependent %.6f (>= %.3f), independent %.4f (<= %.2f), n=%d", dependent, kCcaDependent,
                independent, kCcaIndependent, n);
  return {ok, detail};
}

// --- features ----------------------------------------------------------------

Outcome feature_properties() {
  std::mt19937_64 rng(1010);
  std::uniform_int_distribution<int> channel(0, 255);
  std::uniform_int_distribution<std::size_t> side(1, 40);
  int range_bad = 0, perm_bad = 0, det_bad = 0;
  for (int i = 0; i < 100; ++i) {
    const std::size_t w = side(rng), h = side(rng);
    std::vector<Rgb> px(w * h);
    for (auto& p : px) p = {std::uint8_t(channel(rng)), std::uint8_t(channel(rng)), std::uint8_t(channel(rng))};
    const FeatureVector f = extract_features(PixelGrid(w, h, px), 7);
    for (double v : f) range_bad += !(v >= 0.0 && v <= 1.0);
    det_bad += extract_features(PixelGrid(w, h, px), 7) != f;
    std::shuffle(px.begin(), px.end(), rng);
    const FeatureVector g = extract_features(PixelGrid(w, h, px), 7);
    for (std::size_t k = 0; k < kFeatureDim; ++k) perm_bad += std::abs(g[k] - f[k]) > 1e-12;
  }
  int contrast_bad = 0;
  for (int i = 0; i < 20; ++i) {
    const Rgb c{std::uint8_t(channel(rng)), std::uint8_t(channel(rng)), std::uint8_t(channel(rng))};
    const FeatureVector f = extract_features(PixelGrid(5, 7, c), 1);
    contrast_bad += f[kBrightnessContrast] != 0.0 || f[kSaturationContrast] != 0.0;
  }
  const bool ok = kFeatureDim == 21 && range_bad == 0 && perm_bad == 0 && det_bad == 0 && contrast_bad == 0;
  return {ok, fmt("dim %zu; out-of-[0,1] values %d; uniform images with nonzero contrast %d/20; permutation "
                  "mismatches %d over 100 images; nondeterministic %d",
                  kFeatureDim, range_bad, contrast_bad, perm_bad, det_bad)};
}

// --- Gibbs ---------------------------------------------------------------------

Outcome gibbs_conditionals() {
  // user@0 -F3- user@1 -F1- image, with F2 on the image.
  FactorGraph g;
  const auto u0 = g.add_variable(VariableId::user(0, 0));
  const auto u1 = g.add_variable(VariableId::user(0, 1));
  const auto img = g.add_variable(VariableId::image(0));
  g.add_f3(u0, u1, 0, 1);
  g.add_f1(img, u1, 0);
  FeatureVector x{};
  x[0] = 1.0;
  g.add_f2(img, g.add_feature(x));
  ParameterSet p = ParameterSet::initial(1);
  p.alpha[0] = 0.4;
  p.users[0] = {0.9, 0.7, 0.3, 0.0, 0.0, 0.0};

  auto exact = [&](std::size_t var, int mask) {
    double w[2];
    for (int s = 0; s < 2; ++s) {
      Assignment q;
      q.values.resize(3);
      for (std::size_t v = 0; v < 3; ++v) q[v] = (v == var ? s : (mask >> v) & 1) ? 1 : -1;
      w[s] = std::exp(objective(g, q, p));
    }
    return w[1] / (w[0] + w[1]);
  };

  GibbsSampler sampler(g, factor_log_tables(g, p), {}, derive_seed(1, "acceptance/gibbs"));
  sampler.run(100);
  std::array<double, 8> counts{};
  for (int s = 0; s < 100000; ++s) {
    sampler.sweep();
    int mask = 0;
    for (std::size_t v = 0; v < 3; ++v) mask |= sampler.states()[v] << v;
    counts[mask] += 1.0;
  }
  double worst = 0.0;
  for (std::size_t v = 0; v < 3; ++v) {
    for (int mask = 0; mask < 8; ++mask) {
      if ((mask >> v) & 1) continue;
      const double n0 = counts[mask], n1 = counts[mask | (1 << v)];
      if (n0 + n1 == 0) continue;
      worst = std::max(worst, std::abs(n1 / (n0 + n1) - exact(v, mask)));
    }
  }
  return {worst <= kGibbsTol,
          fmt("3-variable fixture, 100000 sweeps, max conditional error %.4f (tol %.2f)", worst, kGibbsTol)};
}

// --- end to end --------------------------------------------------------------------

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

int cli(std::vector<std::string> args, std::string* out = nullptr) {
  args.insert(args.begin(), "emoinf");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream o, e;
  const int code = cli::run(static_cast<int>(argv.size()), argv.data(), o, e);
  if (out) *out = o.str();
  if (code != 0) std::fprintf(stderr, "emoinf %s -> %d\n%s", args[1].c_str(), code, e.str().c_str());
  return code;
}

Outcome end_to_end() {
  namespace fs = std::filesystem;
  const fs::path dir = fs::temp_directory_path() / "emoinf_acceptance_e2e";
  fs::remove_all(dir);
  const auto start = Clock::now();
  const std::string d = dir.string();
  std::string dot;
  const bool ran = cli({"--seed", "11", "synth", "--out", d + "/data"}) == 0 &&
                   cli({"--seed", "11", "train", "--network", d + "/data/network.jsonl", "--category", "happiness",
                        "--out", d + "/model"}) == 0 &&
                   cli({"predict", "--network", d + "/data/network.jsonl", "--params",
                        d + "/model/params-happiness.json", "--out", d + "/pred.jsonl"}) == 0 &&
                   cli({"analyze", "evaluate", "--network", d + "/data/network.jsonl", "--predictions",
                        d + "/pred.jsonl", "--out", d + "/eval"}) == 0 &&
                   cli({"--seed", "11", "analyze", "sampling", "--network", d + "/data/network.jsonl", "--out",
                        d + "/eval"}) == 0 &&
                   cli({"export-dot", "--predictions", d + "/pred.jsonl", "--network", d + "/data/network.jsonl",
                        "--user", "u000", "--min-weight", "0.3"},
                       &dot) == 0;
  const double secs = since(start);
  if (!ran) return {false, fmt("a pipeline step failed after %.0fs", secs)};

  int mismatched = 0;
  const TimeVaryingNetwork net = load_network(dir / "data/network.jsonl");
  std::ostringstream net_again;
  write_network(net_again, net);
  mismatched += net_again.str() != slurp(dir / "data/network.jsonl");

  std::istringstream pred_in(slurp(dir / "pred.jsonl"));
  std::ostringstream pred_again;
  write_predictions(pred_again, read_predictions(pred_in));
  mismatched += pred_again.str() != slurp(dir / "pred.jsonl");

  const std::string params_text = slurp(dir / "model/params-happiness.json");
  ParamsMetadata meta;
  const ParameterSet params = parse_params(params_text, net, &meta);
  mismatched += params_json(params, net, meta) != params_text;

  mismatched += slurp(dir / "data/synth-config.json") !=
                synth_config_json(parse_synth_config(slurp(dir / "data/synth-config.json")));

  std::string dot_status = "parses";
  std::size_t nodes = 0, edges = 0;
  try {
    const auto graph = emoinf::testing::parse_dot(dot);
    nodes = graph.nodes.size();
    edges = graph.edges.size();
  } catch (const std::exception& e) {
    dot_status = std::string("does not parse: ") + e.what();
  }
  fs::remove_all(dir);
  const bool ok = secs < 600.0 && mismatched == 0 && dot_status == "parses";
  return {ok, fmt("synth, train, predict, analyze, export-dot in %.0fs (limit 600s); %d of 4 files fail to "
                  "round-trip; DOT %s (%zu nodes, %zu edges)",
                  secs, mismatched, dot_status.c_str(), nodes, edges)};
}

}  // namespace

int main() {
  report(1, "tree oracle", tree_oracle);
  report(2, "loopy objective gap", loopy_objective);
  report(3, "gradients vs finite differences", gradients);
  report(4, "objective is linear in phi", linear_objective);
  report(5, "influence recovery AUC", influence_auc);
  report(6, "accuracy over baseline", beats_baseline);
  report(7, "ablation ordering", ablation_order);
  report(8, "sampling-test ordering", sampling_order);
  report(9, "observation statistics", observation_statistics);
  report(10, "feature properties", feature_properties);
  report(11, "Gibbs conditionals", gibbs_conditionals);
  report(12, "end to end", end_to_end);
  std::printf("%d of 12 criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
