#include "cli.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdlib>
#include <exception>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "emoinf/analysis.hpp"
#include "emoinf/error.hpp"
#include "emoinf/features.hpp"
#include "emoinf/learning.hpp"
#include "emoinf/predictions.hpp"
#include "emoinf/seed.hpp"
#include "emoinf/synth.hpp"

namespace emoinf::cli {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

// ---------------------------------------------------------------------------
// Helpers

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

void write_file(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out << text;
  if (!out) throw Error("write failed for " + path.string());
}

template <typename F>
std::string to_text(F&& writer) {
  std::ostringstream s;
  writer(s);
  return s.str();
}

std::vector<Emotion> parse_categories(const std::string& spec) {
  if (spec == "all") return {kAllEmotions.begin(), kAllEmotions.end()};
  std::vector<Emotion> out;
  std::stringstream ss(spec);
  std::string name;
  while (std::getline(ss, name, ',')) {
    const auto e = parse_emotion(name);
    if (!e) throw ValidationError("unknown category '" + name + "'");
    if (std::find(out.begin(), out.end(), *e) == out.end()) out.push_back(*e);
  }
  if (out.empty()) throw ValidationError("no category given");
  return out;
}

Emotion parse_category(const std::string& name) {
  const auto e = parse_emotion(name);
  if (!e) throw ValidationError("unknown category '" + name + "'");
  return *e;
}

/// Runs fn(0..n-1) on up to `jobs` threads; rethrows the first failure.
template <typename F>
void parallel_for(std::size_t n, unsigned jobs, F&& fn) {
  jobs = std::max(1u, std::min<unsigned>(jobs, static_cast<unsigned>(n)));
  if (jobs <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex lock;
  std::vector<std::thread> pool;
  for (unsigned w = 0; w < jobs; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard<std::mutex> g(lock);
          if (!failure) failure = std::current_exception();
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
}

// ---------------------------------------------------------------------------
// Run manifest

class Manifest {
 public:
  Manifest(std::string command, int argc, const char* const* argv)
      : start_(std::chrono::steady_clock::now()) {
    doc_["command"] = std::move(command);
    json args = json::array();
    for (int i = 0; i < argc; ++i) args.push_back(argv[i]);
    doc_["arguments"] = args;
    doc_["version"] = kVersion;
    doc_["seeds"] = json::object();
    doc_["inputs"] = json::array();
    doc_["outputs"] = json::array();
    doc_["warnings"] = json::array();
  }

  // Mutators lock: train and ablate record seeds and warnings from workers.
  void config(json c) { set("config", std::move(c)); }
  void seed(const std::string& label, std::uint64_t value) {
    std::lock_guard<std::mutex> g(lock_);
    doc_["seeds"][label] = value;
  }
  void input(const fs::path& p) { append("inputs", p.string()); }
  void output(const fs::path& p) { append("outputs", p.string()); }
  void warn(const std::string& w) { append("warnings", w); }
  void set(const std::string& key, json value) {
    std::lock_guard<std::mutex> g(lock_);
    doc_[key] = std::move(value);
  }

  void write(const fs::path& path) {
    std::lock_guard<std::mutex> g(lock_);
    doc_["wall_clock_seconds"] =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    write_file(path, doc_.dump(1) + "\n");
  }

 private:
  void append(const char* key, std::string value) {
    std::lock_guard<std::mutex> g(lock_);
    doc_[key].push_back(std::move(value));
  }

  json doc_;
  std::chrono::steady_clock::time_point start_;
  std::mutex lock_;
};

// ---------------------------------------------------------------------------
// Settings: built-in defaults, then the config file, then explicit flags.

struct Settings {
  TrainConfig train;
  std::uint32_t window = 1;
  double split_frac = 0.0;
  std::optional<std::uint64_t> split_seed;
  SynthConfig synth;
  SamplingConfig sampling;
  std::size_t user_sample = 0;
  std::uint32_t max_delta = 4;
};

json settings_json(const Settings& s) {
  return {{"window", s.window},
          {"max_iter", s.train.max_outer_iterations},
          {"tolerance", s.train.tolerance},
          {"step", s.train.step},
          {"freeze_decay", s.train.freeze_decay},
          {"split_frac", s.split_frac},
          {"bp",
           {{"max_iterations", s.train.bp.max_iterations},
            {"damping", s.train.bp.damping},
            {"tolerance", s.train.bp.tolerance},
            {"schedule", s.train.bp.schedule == Schedule::sequential ? "sequential" : "synchronous"}}}};
}

void apply_config_file(Settings& s, const fs::path& path) {
  json doc;
  try {
    doc = json::parse(read_file(path));
  } catch (const json::parse_error& e) {
    throw ParseError("config " + path.string() + ": " + e.what(), 0);
  }
  if (!doc.is_object()) throw ValidationError("config must be a JSON object");
  try {
    for (const auto& [section, body] : doc.items()) {
      if (section == "train") {
        for (const auto& [k, v] : body.items()) {
          if (k == "window") s.window = v.get<std::uint32_t>();
          else if (k == "max_iter") s.train.max_outer_iterations = v.get<int>();
          else if (k == "tolerance") s.train.tolerance = v.get<double>();
          else if (k == "step") s.train.step = v.get<double>();
          else if (k == "freeze_decay") s.train.freeze_decay = v.get<bool>();
          else if (k == "split_frac") s.split_frac = v.get<double>();
          else if (k == "split_seed") s.split_seed = v.get<std::uint64_t>();
          else throw ValidationError("config: unknown train key " + k);
        }
      } else if (section == "bp") {
        for (const auto& [k, v] : body.items()) {
          if (k == "max_iterations") s.train.bp.max_iterations = v.get<int>();
          else if (k == "damping") s.train.bp.damping = v.get<double>();
          else if (k == "tolerance") s.train.bp.tolerance = v.get<double>();
          else if (k == "schedule") {
            const auto name = v.get<std::string>();
            if (name == "sequential") s.train.bp.schedule = Schedule::sequential;
            else if (name == "synchronous") s.train.bp.schedule = Schedule::synchronous;
            else throw ValidationError("config: unknown schedule " + name);
          } else {
            throw ValidationError("config: unknown bp key " + k);
          }
        }
      } else if (section == "synth") {
        s.synth = parse_synth_config(body.dump());
      } else if (section == "analysis") {
        for (const auto& [k, v] : body.items()) {
          if (k == "group_size") s.sampling.group_size = v.get<std::size_t>();
          else if (k == "repetitions") s.sampling.repetitions = v.get<int>();
          else if (k == "deltas") s.sampling.deltas = v.get<std::vector<std::uint32_t>>();
          else if (k == "disjoint_windows") s.sampling.disjoint_windows = v.get<bool>();
          else if (k == "users") s.user_sample = v.get<std::size_t>();
          else if (k == "max_delta") s.max_delta = v.get<std::uint32_t>();
          else throw ValidationError("config: unknown analysis key " + k);
        }
      } else {
        throw ValidationError("config: unknown section " + section);
      }
    }
  } catch (const json::exception& e) {
    throw ValidationError(std::string("config: ") + e.what());
  }
}

// ---------------------------------------------------------------------------
// Commands

struct Common {
  std::uint64_t seed = 1;
  bool seed_given = false;
  unsigned jobs = 1;
  std::string config_path;
  int argc = 0;
  const char* const* argv = nullptr;
  std::ostream* out = nullptr;
  std::ostream* err = nullptr;
};

int cmd_extract(const Common& c, const std::string& manifest_path, const std::string& image_dir,
                const std::string& out_path) {
  Manifest run("extract", c.argc, c.argv);
  run.seed("root", c.seed);
  run.input(manifest_path);
  struct Entry {
    json rec;
    std::size_t line;
  };
  std::vector<Entry> entries;
  {
    std::istringstream in(read_file(manifest_path));
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (line.find_first_not_of(" \t") == std::string::npos) continue;
      try {
        entries.push_back({json::parse(line), line_no});
      } catch (const json::parse_error& e) {
        throw ParseError(std::string("image manifest: ") + e.what(), line_no);
      }
    }
  }
  std::vector<std::optional<std::string>> records(entries.size());
  std::vector<std::string> failures(entries.size());
  parallel_for(entries.size(), c.jobs, [&](std::size_t i) {
    const json& rec = entries[i].rec;
    std::string file = "?";
    try {
      file = rec.at("file").get<std::string>();
      ImageRecord img;
      img.id = rec.at("id").get<std::string>();
      img.owner = rec.at("owner").get<std::string>();
      img.slice = rec.at("t").get<TimeSlice>();
      if (rec.contains("labels")) {
        for (const auto& [k, v] : rec.at("labels").items()) img.labels[parse_category(k)] = BinaryLabel(v.get<int>());
      }
      const PixelGrid pixels = read_ppm(fs::path(image_dir) / file);
      img.features = extract_features(pixels, derive_seed(c.seed, "extract/" + img.id));
      records[i] = image_record_json(img);
    } catch (const std::exception& e) {
      failures[i] = "line " + std::to_string(entries[i].line) + " (" + file + "): " + e.what();
    }
  });
  std::string fragment;
  json failed = json::array();
  for (std::size_t i = 0; i < entries.size(); ++i) {
    if (records[i]) {
      fragment += *records[i] + "\n";
    } else {
      failed.push_back(failures[i]);
      *c.err << "extract: " << failures[i] << "\n";
    }
  }
  write_file(out_path, fragment);
  run.output(out_path);
  run.set("failures", failed);
  run.set("records", entries.size() - failed.size());
  run.write(out_path + ".manifest.json");
  return failed.empty() ? kExitOk : kExitPartial;
}

int cmd_train(const Common& c, Settings s, const std::string& network_path, const std::string& category_spec,
              const std::string& out_dir) {
  Manifest run("train", c.argc, c.argv);
  run.seed("root", c.seed);
  run.input(network_path);
  run.config(settings_json(s));
  s.train.validate();
  if (!(s.split_frac >= 0.0 && s.split_frac < 1.0)) throw ValidationError("--split-frac must lie in [0, 1)");
  const TimeVaryingNetwork net = load_network(network_path);
  const auto categories = parse_categories(category_spec);

  std::vector<Emotion> trained;
  for (Emotion e : categories) {
    const bool labeled = std::any_of(net.images().begin(), net.images().end(),
                                     [&](const ImageRecord& img) { return img.label(e).has_value(); });
    if (labeled) {
      trained.push_back(e);
    } else {
      run.warn(std::string(to_string(e)) + ": no labeled image, skipped");
      *c.err << "train: " << to_string(e) << " has no labeled image, skipped\n";
    }
  }
  if (trained.empty()) throw ValidationError("no requested category has labeled images");

  const fs::path dir(out_dir);
  parallel_for(trained.size(), c.jobs, [&](std::size_t k) {
    const Emotion e = trained[k];
    const std::string name(to_string(e));
    TimeVaryingNetwork local = net;
    if (s.split_frac > 0.0) {
      const std::uint64_t split_seed = s.split_seed ? *s.split_seed : derive_seed(c.seed, "split/" + name);
      run.seed("split/" + name, split_seed);
      const HoldoutSplit split = holdout_split(net, e, s.split_frac, split_seed);
      local.hide_labels(e, split.test);
      json ids = json::array();
      for (std::size_t i : split.test) ids.push_back(net.image(i).id);
      const json doc = {{"category", name}, {"seed", split_seed}, {"test", ids}};
      write_file(dir / ("split-" + name + ".json"), doc.dump(1) + "\n");
      run.output(dir / ("split-" + name + ".json"));
    }
    const FactorGraph graph = build_graph(local, e, {s.window, {}});
    InitResult init = initialize_params(local, e, s.train.baseline);
    for (const auto& w : init.warnings) run.warn(name + ": " + w);
    const FitResult fitted = fit(graph, std::move(init.params), s.train);
    for (const auto& w : fitted.warnings) run.warn(name + ": " + w);
    ParamsMetadata meta{e, s.window, static_cast<int>(fitted.trace.size()), fitted.converged};
    write_file(dir / ("params-" + name + ".json"), params_json(fitted.params, local, meta));
    write_file(dir / ("trace-" + name + ".csv"),
               to_text([&](std::ostream& o) { write_trace_csv(o, fitted.trace); }));
  });
  for (Emotion e : trained) {
    run.output(dir / ("params-" + std::string(to_string(e)) + ".json"));
    run.output(dir / ("trace-" + std::string(to_string(e)) + ".csv"));
  }
  run.write(dir / "manifest.json");
  return kExitOk;
}

int cmd_predict(const Common& c, const Settings& s, const std::string& network_path,
                const std::vector<std::string>& params_paths, const std::string& require,
                const std::string& out_path) {
  Manifest run("predict", c.argc, c.argv);
  run.input(network_path);
  run.config(settings_json(s));
  const TimeVaryingNetwork net = load_network(network_path);
  std::vector<CategoryModel> models;
  for (const auto& p : params_paths) {
    run.input(p);
    ParamsMetadata meta;
    ParameterSet params = parse_params(read_file(p), net, &meta);
    for (const auto& m : models) {
      if (m.category == meta.category) {
        throw ValidationError("category mismatch: two parameter files for " + std::string(to_string(meta.category)));
      }
    }
    models.push_back({meta.category, std::move(params), meta.window});
  }
  if (!require.empty()) {
    for (Emotion e : parse_categories(require)) {
      const bool have = std::any_of(models.begin(), models.end(), [&](const auto& m) { return m.category == e; });
      if (!have) throw ValidationError("category mismatch: no parameters for " + std::string(to_string(e)));
    }
  }
  const PredictionSet set = build_predictions(net, models, s.train.bp);
  write_file(out_path, to_text([&](std::ostream& o) { write_predictions(o, set); }));
  run.output(out_path);
  run.write(out_path + ".manifest.json");
  return kExitOk;
}

int cmd_synth(const Common& c, Settings s, const std::string& synth_path, const std::string& out_dir) {
  Manifest run("synth", c.argc, c.argv);
  if (!synth_path.empty()) {
    run.input(synth_path);
    s.synth = parse_synth_config(read_file(synth_path));
  }
  if (c.seed_given) s.synth.seed = c.seed;
  run.seed("root", s.synth.seed);
  for (const char* label : {"topology", "images", "tendency", "gibbs", "features", "observe"}) {
    run.seed(label, derive_seed(s.synth.seed, label));
  }
  run.config(json::parse(synth_config_json(s.synth)));
  const SynthResult result = generate(s.synth);
  const fs::path dir(out_dir);
  write_file(dir / "network.jsonl", to_text([&](std::ostream& o) { write_network(o, result.network); }));
  write_file(dir / "truth.json", truth_json(result, s.synth));
  write_file(dir / "synth-config.json", synth_config_json(s.synth));
  for (const char* f : {"network.jsonl", "truth.json", "synth-config.json"}) run.output(dir / f);
  run.write(dir / "manifest.json");
  return kExitOk;
}

int cmd_export_dot(const Common& c, const std::string& predictions_path, const std::string& network_path,
                   const std::string& user, double min_weight, TimeSlice slices, const std::string& out_path) {
  const TimeVaryingNetwork net = load_network(network_path);
  std::istringstream in(read_file(predictions_path));
  const PredictionSet set = read_predictions(in);
  if (!net.user_index(user)) throw ValidationError("unknown user '" + user + "'");
  EgoOptions opt;
  opt.min_weight = min_weight;
  opt.slices = slices;
  const std::string dot = to_text([&](std::ostream& o) { write_ego_dot(o, set, net, user, opt); });
  if (out_path.empty()) {
    *c.out << dot;
    return kExitOk;
  }
  Manifest run("export-dot", c.argc, c.argv);
  run.input(predictions_path);
  run.input(network_path);
  write_file(out_path, dot);
  run.output(out_path);
  run.write(out_path + ".manifest.json");
  return kExitOk;
}

// --- analyze ---------------------------------------------------------------

int cmd_sampling(const Common& c, Settings s, const std::string& network_path, const std::string& category,
                 const std::string& out_dir) {
  Manifest run("analyze sampling", c.argc, c.argv);
  run.input(network_path);
  s.sampling.seed = derive_seed(c.seed, "sampling");
  run.seed("root", c.seed);
  run.seed("sampling", s.sampling.seed);
  run.config({{"group_size", s.sampling.group_size},
              {"repetitions", s.sampling.repetitions},
              {"deltas", s.sampling.deltas},
              {"disjoint_windows", s.sampling.disjoint_windows}});
  const TimeVaryingNetwork net = load_network(network_path);
  const SamplingTestReport report = sampling_test(net, parse_category(category), s.sampling);
  for (const auto& w : report.warnings) run.warn(w);
  const fs::path dir(out_dir);
  write_file(dir / "sampling.json", sampling_report_json(report));
  write_file(dir / "sampling.csv", to_text([&](std::ostream& o) { write_sampling_csv(o, report); }));
  run.output(dir / "sampling.json");
  run.output(dir / "sampling.csv");
  run.write(dir / "manifest-sampling.json");
  return kExitOk;
}

int cmd_rates(const Common& c, const Settings& s, const std::string& kind, const std::string& network_path,
              const std::string& category, const std::string& mode, const std::string& out_dir) {
  Manifest run("analyze " + kind, c.argc, c.argv);
  run.input(network_path);
  run.seed("root", c.seed);
  run.config({{"users", s.user_sample}, {"max_delta", s.max_delta}, {"mode", mode}});
  const TimeVaryingNetwork net = load_network(network_path);
  const Emotion e = parse_category(category);
  const fs::path dir(out_dir);
  auto emit = [&](const std::string& stem, const RateReport& r) {
    for (const auto& w : r.warnings) run.warn(stem + ": " + w);
    write_file(dir / (stem + ".json"), rate_report_json(r));
    write_file(dir / (stem + ".csv"), to_text([&](std::ostream& o) { write_rate_csv(o, r); }));
    run.output(dir / (stem + ".json"));
    run.output(dir / (stem + ".csv"));
  };
  if (kind == "temporal") {
    const std::uint64_t seed = derive_seed(c.seed, "temporal");
    run.seed("temporal", seed);
    emit("temporal", temporal_correlation(net, e, s.user_sample, s.max_delta, seed));
  } else {
    const std::uint64_t seed = derive_seed(c.seed, "social");
    run.seed("social", seed);
    if (mode != "friends" && mode != "random" && mode != "both") throw ValidationError("--mode must be friends, random or both");
    if (mode != "random") emit("social-friends", social_correlation(net, e, s.user_sample, s.max_delta, NeighborMode::friends, seed));
    if (mode != "friends") emit("social-random", social_correlation(net, e, s.user_sample, s.max_delta, NeighborMode::random, seed));
  }
  run.write(dir / ("manifest-" + kind + ".json"));
  return kExitOk;
}

int cmd_cca(const Common& c, const std::string& x_path, const std::string& y_path, const std::string& out_dir) {
  Manifest run("analyze cca", c.argc, c.argv);
  run.input(x_path);
  run.input(y_path);
  std::istringstream xs(read_file(x_path)), ys(read_file(y_path));
  const Eigen::MatrixXd x = read_numeric_csv(xs), y = read_numeric_csv(ys);
  const CcaResult r = cca(x, y);
  for (const auto& w : r.warnings) run.warn(w);
  const fs::path dir(out_dir);
  write_file(dir / "cca.json", cca_report_json(r));
  run.output(dir / "cca.json");
  run.write(dir / "manifest-cca.json");
  return kExitOk;
}

int cmd_evaluate(const Common& c, const std::string& network_path, const std::string& predictions_path,
                 const std::vector<std::string>& split_paths, const std::string& out_dir) {
  Manifest run("analyze evaluate", c.argc, c.argv);
  run.input(network_path);
  run.input(predictions_path);
  const TimeVaryingNetwork truth = load_network(network_path);
  std::istringstream in(read_file(predictions_path));
  const PredictionSet set = read_predictions(in);

  std::map<Emotion, std::set<std::string>> restrict_to;
  for (const auto& p : split_paths) {
    run.input(p);
    const json doc = json::parse(read_file(p));
    auto& ids = restrict_to[parse_category(doc.at("category").get<std::string>())];
    for (const auto& id : doc.at("test")) ids.insert(id.get<std::string>());
  }
  std::map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < truth.num_images(); ++i) index[truth.image(i).id] = i;

  std::map<Emotion, Metrics> per_category;
  for (Emotion e : set.categories) {
    std::vector<double> p;
    std::vector<int> y;
    const auto only = restrict_to.find(e);
    for (const auto& img : set.images) {
      const auto it = index.find(img.id);
      if (it == index.end()) throw ValidationError("prediction for unknown image " + img.id);
      if (only != restrict_to.end() && !only->second.count(img.id)) continue;
      const auto label = truth.image(it->second).label(e);
      const auto prob = img.probability.find(e);
      if (!label || prob == img.probability.end()) continue;
      p.push_back(prob->second);
      y.push_back(label->value());
    }
    if (y.empty()) run.warn(std::string(to_string(e)) + ": no labeled image to evaluate");
    per_category[e] = evaluate(p, y);
  }
  const MetricsReport report = summarize(per_category);
  const fs::path dir(out_dir);
  write_file(dir / "metrics.json", metrics_json(report));
  write_file(dir / "metrics.csv", to_text([&](std::ostream& o) {
               write_variant_table_csv(o, {{"Model", report}}, {"Model"});
             }));
  run.output(dir / "metrics.json");
  run.output(dir / "metrics.csv");
  run.write(dir / "manifest-evaluate.json");
  return kExitOk;
}

int cmd_ablate(const Common& c, Settings s, const std::string& network_path, const std::string& category_spec,
               const std::string& out_dir) {
  Manifest run("analyze ablate", c.argc, c.argv);
  run.input(network_path);
  run.seed("root", c.seed);
  run.config(settings_json(s));
  s.train.validate();
  const TimeVaryingNetwork net = load_network(network_path);
  const double frac = s.split_frac > 0.0 ? s.split_frac : 0.2;

  std::vector<Emotion> categories;
  for (Emotion e : parse_categories(category_spec)) {
    std::size_t labeled = 0;
    for (const auto& img : net.images()) labeled += img.label(e).has_value();
    if (labeled >= 2) categories.push_back(e);
    else run.warn(std::string(to_string(e)) + ": too few labeled images, skipped");
  }
  if (categories.empty()) throw ValidationError("no requested category has enough labeled images");

  const std::vector<std::pair<std::string, std::set<FactorKind>>> variants = {
      {"Model", {}}, {"Model-f3", {FactorKind::f3}}, {"Model-f4", {FactorKind::f4}}, {"Model-f5", {FactorKind::f5}}};
  std::vector<ExperimentResult> results(categories.size() * variants.size());
  parallel_for(results.size(), c.jobs, [&](std::size_t k) {
    const Emotion e = categories[k / variants.size()];
    ExperimentConfig cfg;
    cfg.train = s.train;
    cfg.window = s.window;
    cfg.test_fraction = frac;
    cfg.split_seed = s.split_seed ? *s.split_seed : derive_seed(c.seed, "split/" + std::string(to_string(e)));
    results[k] = run_holdout(net, e, cfg, variants[k % variants.size()].second);
  });

  std::map<std::string, std::map<Emotion, Metrics>> table;
  for (std::size_t k = 0; k < results.size(); ++k) {
    const Emotion e = categories[k / variants.size()];
    const auto& [name, drop] = variants[k % variants.size()];
    table[name][e] = results[k].model;
    if (drop.empty()) table["SVM"][e] = results[k].baseline;
    run.seed("split/" + std::string(to_string(e)),
             s.split_seed ? *s.split_seed : derive_seed(c.seed, "split/" + std::string(to_string(e))));
  }
  std::map<std::string, MetricsReport> reports;
  json doc = json::object();
  for (const auto& [name, cats] : table) {
    reports[name] = summarize(cats);
    doc[name] = json::parse(metrics_json(reports[name]));
  }
  const fs::path dir(out_dir);
  write_file(dir / "ablation.json", doc.dump(1) + "\n");
  write_file(dir / "ablation.csv", to_text([&](std::ostream& o) {
               write_variant_table_csv(o, reports, {"SVM", "Model", "Model-f3", "Model-f4", "Model-f5"});
             }));
  run.output(dir / "ablation.json");
  run.output(dir / "ablation.csv");
  run.write(dir / "manifest-ablate.json");
  return kExitOk;
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Emotion inference and influence analysis over time-varying social networks", "emoinf"};
  app.require_subcommand(1);
  app.set_version_flag("--version", kVersion);

  Common common;
  common.argc = argc;
  common.argv = argv;
  common.out = &out;
  common.err = &err;
  common.jobs = std::max(1u, std::thread::hardware_concurrency());
  if (const char* env = std::getenv(kConfigEnv)) common.config_path = env;

  auto* seed_opt = app.add_option("--seed", common.seed, "Root seed; every random stream is derived from it");
  app.add_option("--jobs", common.jobs, "Worker thread cap")->check(CLI::PositiveNumber);
  app.add_option("--config", common.config_path,
                 std::string("JSON config with train/bp/synth/analysis sections (default: $") + kConfigEnv + ")");

  Settings flags;
  std::string network, category = "happiness", out_path, out_dir = ".";

  // extract
  auto* extract = app.add_subcommand("extract", "Compute 21-dim features for PPM images");
  std::string image_manifest, image_dir = ".";
  extract->add_option("--manifest", image_manifest, "JSON-lines image manifest (file, id, owner, t, labels)")->required();
  extract->add_option("--images", image_dir, "Directory the manifest's files are relative to");
  extract->add_option("--out", out_path, "Output fragment of image records")->required();

  // train
  auto* train = app.add_subcommand("train", "Fit model parameters per category");
  std::vector<CLI::Option*> train_opts;
  train->add_option("--network", network)->required();
  train->add_option("--category", category, "Category name, comma list or 'all'");
  train->add_option("--out", out_dir, "Output directory");
  train_opts.push_back(train->add_option("--window", flags.window, "Temporal window in slices")->check(CLI::PositiveNumber));
  train_opts.push_back(train->add_option("--max-iter", flags.train.max_outer_iterations, "Outer iterations"));
  train_opts.push_back(train->add_flag("--freeze-decay", flags.train.freeze_decay, "Keep delta and tau at their initial values"));
  train_opts.push_back(train->add_option("--split-frac", flags.split_frac, "Fraction of labeled images hidden for testing"));
  std::uint64_t split_seed_flag = 0;
  auto* train_split_seed = train->add_option("--split-seed", split_seed_flag, "Holdout split seed (default derived)");

  // predict
  auto* predict_cmd = app.add_subcommand("predict", "Per-image, per-user and per-edge predictions");
  std::vector<std::string> params_paths;
  std::string require_categories;
  predict_cmd->add_option("--network", network)->required();
  predict_cmd->add_option("--params", params_paths, "One params file per category")->required();
  predict_cmd->add_option("--categories", require_categories, "Fail unless these categories have params");
  predict_cmd->add_option("--out", out_path, "Predictions file (JSON lines)")->required();

  // analyze
  auto* analyze = app.add_subcommand("analyze", "Observation studies and evaluation");
  analyze->require_subcommand(1);
  std::vector<CLI::Option*> sampling_opts;
  auto* sampling = analyze->add_subcommand("sampling", "Friends-with-emotion sampling test");
  sampling->add_option("--network", network)->required();
  sampling->add_option("--category", category);
  sampling->add_option("--out", out_dir);
  sampling_opts.push_back(sampling->add_option("--group-size", flags.sampling.group_size));
  sampling_opts.push_back(sampling->add_option("--reps", flags.sampling.repetitions));
  sampling_opts.push_back(sampling->add_option("--deltas", flags.sampling.deltas)->delimiter(','));
  sampling_opts.push_back(sampling->add_flag("--disjoint-windows", flags.sampling.disjoint_windows));

  std::vector<CLI::Option*> rate_opts;
  std::string social_mode = "both";
  auto* temporal = analyze->add_subcommand("temporal", "Same-emotion rate across a user's own slices");
  auto* social = analyze->add_subcommand("social", "Same-emotion rate between a user and friends or strangers");
  for (auto* sub : {temporal, social}) {
    sub->add_option("--network", network)->required();
    sub->add_option("--category", category);
    sub->add_option("--out", out_dir);
    rate_opts.push_back(sub->add_option("--users", flags.user_sample, "Users sampled (0 = all)"));
    rate_opts.push_back(sub->add_option("--max-delta", flags.max_delta)->check(CLI::PositiveNumber));
  }
  social->add_option("--mode", social_mode, "friends, random or both");

  auto* cca_cmd = analyze->add_subcommand("cca", "Canonical correlations of two CSV column sets");
  std::string x_path, y_path;
  cca_cmd->add_option("--x", x_path)->required();
  cca_cmd->add_option("--y", y_path)->required();
  cca_cmd->add_option("--out", out_dir);

  auto* evaluate_cmd = analyze->add_subcommand("evaluate", "Accuracy, precision, recall and F1 of predictions");
  std::string predictions_path;
  std::vector<std::string> split_paths;
  evaluate_cmd->add_option("--network", network, "Network carrying the true labels")->required();
  evaluate_cmd->add_option("--predictions", predictions_path)->required();
  evaluate_cmd->add_option("--split", split_paths, "Split files from train; restrict to their test images");
  evaluate_cmd->add_option("--out", out_dir);

  auto* ablate = analyze->add_subcommand("ablate", "Holdout comparison with F3, F4 or F5 removed");
  std::vector<CLI::Option*> ablate_opts;
  ablate->add_option("--network", network)->required();
  ablate->add_option("--category", category);
  ablate->add_option("--out", out_dir);
  ablate_opts.push_back(ablate->add_option("--window", flags.window)->check(CLI::PositiveNumber));
  ablate_opts.push_back(ablate->add_option("--max-iter", flags.train.max_outer_iterations));
  ablate_opts.push_back(ablate->add_option("--split-frac", flags.split_frac));
  auto* ablate_split_seed = ablate->add_option("--split-seed", split_seed_flag);

  // synth
  auto* synth = app.add_subcommand("synth", "Sample a synthetic network with planted parameters");
  std::string synth_path;
  synth->add_option("--synth-config", synth_path, "Synth config JSON (overrides the config file's synth section)");
  synth->add_option("--out", out_dir);

  // export-dot
  auto* dot = app.add_subcommand("export-dot", "DOT ego network of one user");
  std::string user;
  double min_weight = 0.5;
  TimeSlice slices = 5;
  dot->add_option("--predictions", predictions_path)->required();
  dot->add_option("--network", network)->required();
  dot->add_option("--user", user)->required();
  dot->add_option("--min-weight", min_weight);
  dot->add_option("--slices", slices, "Trailing slices shown (0 = all)");
  dot->add_option("--out", out_path, "Output file (default stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }
  common.seed_given = seed_opt->count() > 0;

  try {
    Settings s;
    if (!common.config_path.empty()) apply_config_file(s, common.config_path);
    auto given = [](const std::vector<CLI::Option*>& opts, const std::string& name) {
      for (auto* o : opts) {
        if (o->check_lname(name) && o->count() > 0) return true;
      }
      return false;
    };
    auto merge_train = [&](const std::vector<CLI::Option*>& opts, CLI::Option* seed_opt_local) {
      if (given(opts, "window")) s.window = flags.window;
      if (given(opts, "max-iter")) s.train.max_outer_iterations = flags.train.max_outer_iterations;
      if (given(opts, "freeze-decay")) s.train.freeze_decay = flags.train.freeze_decay;
      if (given(opts, "split-frac")) s.split_frac = flags.split_frac;
      if (seed_opt_local->count() > 0) s.split_seed = split_seed_flag;
    };

    if (*extract) return cmd_extract(common, image_manifest, image_dir, out_path);
    if (*train) {
      merge_train(train_opts, train_split_seed);
      return cmd_train(common, s, network, category, out_dir);
    }
    if (*predict_cmd) return cmd_predict(common, s, network, params_paths, require_categories, out_path);
    if (*synth) return cmd_synth(common, s, synth_path, out_dir);
    if (*dot) return cmd_export_dot(common, predictions_path, network, user, min_weight, slices, out_path);
    if (*sampling) {
      if (given(sampling_opts, "group-size")) s.sampling.group_size = flags.sampling.group_size;
      if (given(sampling_opts, "reps")) s.sampling.repetitions = flags.sampling.repetitions;
      if (given(sampling_opts, "deltas")) s.sampling.deltas = flags.sampling.deltas;
      if (given(sampling_opts, "disjoint-windows")) s.sampling.disjoint_windows = true;
      return cmd_sampling(common, s, network, category, out_dir);
    }
    if (*temporal || *social) {
      if (given(rate_opts, "users")) s.user_sample = flags.user_sample;
      if (given(rate_opts, "max-delta")) s.max_delta = flags.max_delta;
      return cmd_rates(common, s, *temporal ? "temporal" : "social", network, category, social_mode, out_dir);
    }
    if (*cca_cmd) return cmd_cca(common, x_path, y_path, out_dir);
    if (*evaluate_cmd) return cmd_evaluate(common, network, predictions_path, split_paths, out_dir);
    if (*ablate) {
      merge_train(ablate_opts, ablate_split_seed);
      return cmd_ablate(common, s, network, category, out_dir);
    }
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitData;
  }
  return kExitUsage;
}

}  // namespace emoinf::cli
