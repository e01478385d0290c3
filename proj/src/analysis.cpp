#include "emoinf/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <numeric>
#include <ostream>
#include <random>
#include <sstream>

#include <json.hpp>

#include "emoinf/error.hpp"
#include "emoinf/seed.hpp"

namespace emoinf {

namespace {

using nlohmann::json;

double mean_or_zero(double sum, std::size_t n) { return n == 0 ? 0.0 : sum / static_cast<double>(n); }

// Indices 0..n-1, or a seeded random subset of `sample` of them (sorted).
std::vector<std::size_t> sample_users(std::size_t n, std::size_t sample, std::uint64_t seed) {
  std::vector<std::size_t> users(n);
  std::iota(users.begin(), users.end(), 0);
  if (sample == 0 || sample >= n) return users;
  std::mt19937_64 rng(seed);
  std::shuffle(users.begin(), users.end(), rng);
  users.resize(sample);
  std::sort(users.begin(), users.end());
  return users;
}

void add_to_group(SamplingGroup& g, const std::vector<int>& happy, double& sum) {
  if (happy.empty()) return;
  const auto h = std::count(happy.begin(), happy.end(), 1);
  sum += static_cast<double>(h) / static_cast<double>(happy.size());
  g.members += happy.size();
  ++g.repetitions;
}

}  // namespace

// ---------------------------------------------------------------------------
// Sampling test

SamplingTestReport sampling_test(const TimeVaryingNetwork& net, Emotion category,
                                 const SamplingConfig& config) {
  if (config.group_size == 0) throw ValidationError("group_size must be positive");
  if (config.repetitions <= 0) throw ValidationError("repetitions must be positive");
  SamplingTestReport report;
  report.group_size = config.group_size;
  report.repetitions = config.repetitions;
  const UserLabelGrid grid(net, category);
  const TimeSlice horizon = net.horizon();

  for (std::uint32_t delta : config.deltas) {
    if (delta == 0) throw ValidationError("sampling deltas must be positive");
    SamplingCell cell;
    cell.delta = delta;
    std::mt19937_64 rng(derive_seed(config.seed, "sampling/delta=" + std::to_string(delta)));

    std::vector<TimeSlice> candidates;
    for (TimeSlice t = delta; t < horizon; ++t) candidates.push_back(t);
    std::shuffle(candidates.begin(), candidates.end(), rng);
    std::vector<TimeSlice> chosen;
    for (TimeSlice t : candidates) {
      if (static_cast<int>(chosen.size()) == config.repetitions) break;
      if (config.disjoint_windows) {
        const bool overlaps = std::any_of(chosen.begin(), chosen.end(), [&](TimeSlice s) {
          return t - delta <= s && s - delta <= t;
        });
        if (overlaps) continue;
      }
      chosen.push_back(t);
    }
    if (static_cast<int>(chosen.size()) < config.repetitions) {
      report.warnings.push_back("delta " + std::to_string(delta) + ": only " +
                                std::to_string(chosen.size()) + " of " +
                                std::to_string(config.repetitions) + " repetitions available");
    }

    double sum_i = 0.0, sum_12 = 0.0, sum_3 = 0.0;
    for (TimeSlice t : chosen) {
      std::vector<std::size_t> related, independent;
      std::vector<std::size_t> friend_count(net.num_users(), 0);
      for (std::size_t u = 0; u < net.num_users(); ++u) {
        if (!net.is_active(u, t) || grid.at(u, t) == 0) continue;
        std::size_t c = 0;
        for (std::size_t f : net.neighbors_at(u, t - delta)) c += grid.has_emotion(f, t - delta);
        friend_count[u] = c;
        (c > 0 ? related : independent).push_back(u);
      }
      std::shuffle(related.begin(), related.end(), rng);
      std::shuffle(independent.begin(), independent.end(), rng);
      if (related.size() > config.group_size) related.resize(config.group_size);
      if (independent.size() > config.group_size) independent.resize(config.group_size);

      std::vector<int> happy_i, happy_12, happy_3;
      for (std::size_t u : independent) happy_i.push_back(grid.at(u, t));
      for (std::size_t u : related) (friend_count[u] >= 3 ? happy_3 : happy_12).push_back(grid.at(u, t));
      add_to_group(cell.independent, happy_i, sum_i);
      add_to_group(cell.one_two, happy_12, sum_12);
      add_to_group(cell.three_plus, happy_3, sum_3);
      ++cell.repetitions;
    }
    cell.independent.ratio = mean_or_zero(sum_i, cell.independent.repetitions);
    cell.one_two.ratio = mean_or_zero(sum_12, cell.one_two.repetitions);
    cell.three_plus.ratio = mean_or_zero(sum_3, cell.three_plus.repetitions);
    report.cells.push_back(cell);
  }
  return report;
}

// ---------------------------------------------------------------------------
// Temporal and social correlation

RateReport temporal_correlation(const TimeVaryingNetwork& net, Emotion category,
                                std::size_t user_sample, std::uint32_t max_delta,
                                std::uint64_t seed) {
  if (max_delta == 0) throw ValidationError("max_delta must be positive");
  const UserLabelGrid grid(net, category);
  const auto users = sample_users(net.num_users(), user_sample, derive_seed(seed, "temporal/users"));
  RateReport report;
  report.sampled = users.size();
  for (std::uint32_t delta = 1; delta <= max_delta; ++delta) {
    RatePoint point;
    point.delta = delta;
    double sum = 0.0;
    for (std::size_t u : users) {
      std::size_t pairs = 0, same = 0;
      for (TimeSlice t = 0; t + delta < net.horizon(); ++t) {
        const int a = grid.at(u, t), b = grid.at(u, t + delta);
        if (a == 0 || b == 0) continue;
        ++pairs;
        same += a == b;
      }
      if (pairs == 0) {
        ++point.excluded;
        continue;
      }
      sum += static_cast<double>(same) / static_cast<double>(pairs);
      ++point.users;
    }
    point.rate = mean_or_zero(sum, point.users);
    if (point.users == 0) report.warnings.push_back("delta " + std::to_string(delta) + ": no user has a valid pair");
    report.points.push_back(point);
  }
  return report;
}

RateReport social_correlation(const TimeVaryingNetwork& net, Emotion category,
                              std::size_t user_sample, std::uint32_t max_delta, NeighborMode mode,
                              std::uint64_t seed) {
  if (max_delta == 0) throw ValidationError("max_delta must be positive");
  const UserLabelGrid grid(net, category);
  const auto users = sample_users(net.num_users(), user_sample, derive_seed(seed, "social/users"));
  std::mt19937_64 rng(derive_seed(seed, mode == NeighborMode::random ? "social/random" : "social/friends"));

  // NB per sampled user, fixed across deltas.
  std::vector<std::vector<std::size_t>> nb(users.size());
  std::size_t friendless = 0, short_pool = 0;
  for (std::size_t i = 0; i < users.size(); ++i) {
    const std::size_t u = users[i];
    std::set<std::size_t> friends;
    for (TimeSlice t = 0; t < net.horizon(); ++t) {
      const auto& at = net.neighbors_at(u, t);
      friends.insert(at.begin(), at.end());
    }
    if (friends.empty()) {
      ++friendless;
      continue;
    }
    if (mode == NeighborMode::friends) {
      nb[i].assign(friends.begin(), friends.end());
      continue;
    }
    std::vector<std::size_t> pool;
    for (std::size_t v = 0; v < net.num_users(); ++v) {
      if (v != u && !friends.count(v)) pool.push_back(v);
    }
    std::shuffle(pool.begin(), pool.end(), rng);
    if (pool.size() < friends.size()) ++short_pool;
    pool.resize(std::min(pool.size(), friends.size()));
    nb[i] = std::move(pool);
  }

  RateReport report;
  report.sampled = users.size();
  if (friendless > 0) report.warnings.push_back(std::to_string(friendless) + " sampled users have no friends and were skipped");
  if (short_pool > 0) report.warnings.push_back(std::to_string(short_pool) + " users have fewer non-friends than friends");

  for (std::uint32_t delta = 1; delta <= max_delta; ++delta) {
    RatePoint point;
    point.delta = delta;
    double sum = 0.0;
    for (std::size_t i = 0; i < users.size(); ++i) {
      const std::size_t u = users[i];
      if (nb[i].empty()) {
        ++point.excluded;
        continue;
      }
      std::size_t slices = 0;
      double user_sum = 0.0;
      for (TimeSlice t = 0; t + delta < net.horizon(); ++t) {
        if (!grid.has_emotion(u, t)) continue;
        std::size_t hits = 0;
        for (std::size_t v : nb[i]) hits += grid.has_emotion(v, t + delta);
        user_sum += static_cast<double>(hits) / static_cast<double>(nb[i].size());
        ++slices;
      }
      if (slices == 0) {
        ++point.excluded;
        continue;
      }
      sum += user_sum / static_cast<double>(slices);
      ++point.users;
    }
    point.rate = mean_or_zero(sum, point.users);
    if (point.users == 0) report.warnings.push_back("delta " + std::to_string(delta) + ": no user contributes");
    report.points.push_back(point);
  }
  return report;
}

// ---------------------------------------------------------------------------
// CCA

namespace {

Eigen::MatrixXd standardize(const Eigen::MatrixXd& m, const char* side, std::vector<std::string>& warnings) {
  Eigen::MatrixXd out = m.rowwise() - m.colwise().mean();
  const double denom = static_cast<double>(m.rows() - 1);
  for (Eigen::Index c = 0; c < out.cols(); ++c) {
    const double sd = std::sqrt(out.col(c).squaredNorm() / denom);
    if (sd > 1e-12) {
      out.col(c) /= sd;
    } else {
      out.col(c).setZero();
      warnings.push_back(std::string(side) + " column " + std::to_string(c) + " is constant");
    }
  }
  return out;
}

Eigen::MatrixXd ridged(Eigen::MatrixXd s) {
  const double scale = std::max(s.trace() / static_cast<double>(s.rows()), 1.0);
  s.diagonal().array() += 1e-6 * scale;
  return s;
}

}  // namespace

CcaResult cca(const Eigen::MatrixXd& x, const Eigen::MatrixXd& y) {
  if (x.rows() != y.rows()) throw ValidationError("CCA inputs have different row counts");
  if (x.rows() < 2) throw ValidationError("CCA needs at least two rows");
  if (x.cols() == 0 || y.cols() == 0) throw ValidationError("CCA inputs need at least one column");
  if (!x.allFinite() || !y.allFinite()) throw ValidationError("CCA inputs contain non-finite values");

  CcaResult result;
  const Eigen::MatrixXd xs = standardize(x, "X", result.warnings);
  const Eigen::MatrixXd ys = standardize(y, "Y", result.warnings);
  if (x.rows() <= x.cols() + y.cols()) result.warnings.push_back("fewer rows than columns; correlations are inflated");

  const double denom = static_cast<double>(x.rows() - 1);
  const Eigen::MatrixXd sxx = ridged(xs.transpose() * xs / denom);
  const Eigen::MatrixXd syy = ridged(ys.transpose() * ys / denom);
  const Eigen::MatrixXd sxy = xs.transpose() * ys / denom;

  const Eigen::LLT<Eigen::MatrixXd> syy_llt(syy);
  const Eigen::MatrixXd syy_inv_syx = syy_llt.solve(sxy.transpose());
  Eigen::MatrixXd a = sxy * syy_inv_syx;
  a = 0.5 * (a + a.transpose());

  Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXd> solver(a, sxx);
  if (solver.info() != Eigen::Success) throw Error("CCA eigen solver failed");

  const Eigen::Index k = std::min(x.cols(), y.cols());
  const Eigen::Index p = x.cols();
  result.x_directions.resize(p, k);
  result.y_directions.resize(y.cols(), k);
  for (Eigen::Index i = 0; i < k; ++i) {
    const Eigen::Index col = p - 1 - i;  // eigenvalues ascend
    const double rho = std::sqrt(std::clamp(solver.eigenvalues()(col), 0.0, 1.0));
    result.correlations.push_back(rho);
    result.x_directions.col(i) = solver.eigenvectors().col(col);
    if (rho > 1e-12) {
      result.y_directions.col(i) = syy_inv_syx * solver.eigenvectors().col(col) / rho;
    } else {
      result.y_directions.col(i).setZero();
    }
  }
  return result;
}

// ---------------------------------------------------------------------------
// Evaluation

Metrics evaluate(const std::vector<double>& probabilities, const std::vector<int>& truth,
                 double threshold) {
  if (probabilities.size() != truth.size()) throw ValidationError("prediction and truth sizes differ");
  Metrics m;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    if (truth[i] != 1 && truth[i] != -1) throw ValidationError("truth labels must be +-1");
    const bool predicted = probabilities[i] >= threshold;
    const bool actual = truth[i] == 1;
    if (predicted && actual) ++m.tp;
    else if (predicted) ++m.fp;
    else if (actual) ++m.fn;
    else ++m.tn;
  }
  auto ratio = [](std::size_t a, std::size_t b) { return b == 0 ? 0.0 : static_cast<double>(a) / static_cast<double>(b); };
  m.accuracy = ratio(m.tp + m.tn, m.total());
  m.precision = ratio(m.tp, m.tp + m.fp);
  m.recall = ratio(m.tp, m.tp + m.fn);
  m.f1 = m.precision + m.recall > 0.0 ? 2.0 * m.precision * m.recall / (m.precision + m.recall) : 0.0;
  return m;
}

MetricsReport summarize(const std::map<Emotion, Metrics>& categories) {
  MetricsReport report;
  report.categories = categories;
  if (categories.empty()) return report;
  Metrics& avg = report.average;
  for (const auto& [e, m] : categories) {
    avg.accuracy += m.accuracy;
    avg.precision += m.precision;
    avg.recall += m.recall;
    avg.f1 += m.f1;
    avg.tp += m.tp;
    avg.tn += m.tn;
    avg.fp += m.fp;
    avg.fn += m.fn;
  }
  const double n = static_cast<double>(categories.size());
  avg.accuracy /= n;
  avg.precision /= n;
  avg.recall /= n;
  avg.f1 /= n;
  return report;
}

// ---------------------------------------------------------------------------
// Holdout experiments

ExperimentResult run_holdout(const TimeVaryingNetwork& net, Emotion category,
                             const ExperimentConfig& config, const std::set<FactorKind>& drop) {
  config.train.validate();
  if (!(config.test_fraction > 0.0 && config.test_fraction < 1.0)) {
    throw ValidationError("test_fraction must lie in (0, 1)");
  }
  ExperimentResult result;
  result.split = holdout_split(net, category, config.test_fraction, config.split_seed);
  if (result.split.test.empty()) throw ValidationError("holdout split has no test images");
  for (std::size_t i : result.split.test) result.truth.push_back(net.image(i).label(category)->value());

  TimeVaryingNetwork hidden = net;
  hidden.hide_labels(category, result.split.test);

  GraphOptions options;
  options.window = config.window;
  options.drop = drop;
  const FactorGraph graph = build_graph(hidden, category, options);

  InitResult init = initialize_params(hidden, category, config.train.baseline);
  const auto examples = labeled_examples(hidden, category);
  const LinearModel baseline = train_linear_baseline(examples, config.train.baseline);

  result.fit = fit(graph, std::move(init.params), config.train);
  result.fit.warnings.insert(result.fit.warnings.begin(), init.warnings.begin(), init.warnings.end());

  for (std::size_t i : result.split.test) {
    const auto var = graph.find(VariableId::image(static_cast<std::uint32_t>(i)));
    result.model_probability.push_back(var ? predict_probability(result.fit.marginals, *var) : 0.5);
    result.baseline_score.push_back(baseline.score(net.image(i).features));
  }
  result.model = evaluate(result.model_probability, result.truth);
  result.baseline = evaluate(result.baseline_score, result.truth, 0.0);
  result.influence = influence_weights(graph, result.fit.marginals.variables);
  return result;
}

Metrics ablation_run(const TimeVaryingNetwork& net, Emotion category,
                     const ExperimentConfig& config, const std::set<FactorKind>& drop) {
  return run_holdout(net, category, config, drop).model;
}

// ---------------------------------------------------------------------------
// Reports

namespace {

json group_json(const SamplingGroup& g) {
  return {{"ratio", g.ratio}, {"members", g.members}, {"repetitions", g.repetitions}};
}

json metrics_to_json(const Metrics& m) {
  return {{"accuracy", m.accuracy}, {"precision", m.precision}, {"recall", m.recall}, {"f1", m.f1},
          {"tp", m.tp}, {"tn", m.tn}, {"fp", m.fp}, {"fn", m.fn}};
}

}  // namespace

std::string sampling_report_json(const SamplingTestReport& report) {
  json cells = json::array();
  for (const auto& c : report.cells) {
    cells.push_back({{"delta", c.delta},
                     {"repetitions", c.repetitions},
                     {"independent", group_json(c.independent)},
                     {"one_two", group_json(c.one_two)},
                     {"three_plus", group_json(c.three_plus)}});
  }
  json doc = {{"group_size", report.group_size},
              {"repetitions", report.repetitions},
              {"cells", cells},
              {"warnings", report.warnings}};
  return doc.dump(1) + "\n";
}

void write_sampling_csv(std::ostream& out, const SamplingTestReport& report) {
  out << "delta,group,ratio,members,repetitions\n";
  for (const auto& c : report.cells) {
    const std::pair<const char*, const SamplingGroup*> rows[] = {
        {"independent", &c.independent}, {"one_two", &c.one_two}, {"three_plus", &c.three_plus}};
    for (const auto& [name, g] : rows) {
      out << c.delta << ',' << name << ',' << g->ratio << ',' << g->members << ',' << g->repetitions << '\n';
    }
  }
}

std::string rate_report_json(const RateReport& report) {
  json points = json::array();
  for (const auto& p : report.points) {
    points.push_back({{"delta", p.delta}, {"rate", p.rate}, {"users", p.users}, {"excluded", p.excluded}});
  }
  json doc = {{"sampled", report.sampled}, {"points", points}, {"warnings", report.warnings}};
  return doc.dump(1) + "\n";
}

void write_rate_csv(std::ostream& out, const RateReport& report) {
  out << "delta,rate,users,excluded\n";
  for (const auto& p : report.points) {
    out << p.delta << ',' << p.rate << ',' << p.users << ',' << p.excluded << '\n';
  }
}

std::string cca_report_json(const CcaResult& result) {
  auto matrix = [](const Eigen::MatrixXd& m) {
    json cols = json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      cols.push_back(std::vector<double>(m.col(c).data(), m.col(c).data() + m.rows()));
    }
    return cols;
  };
  json doc = {{"correlations", result.correlations},
              {"x_directions", matrix(result.x_directions)},
              {"y_directions", matrix(result.y_directions)},
              {"warnings", result.warnings}};
  return doc.dump(1) + "\n";
}

std::string metrics_json(const MetricsReport& report) {
  json cats = json::object();
  for (const auto& [e, m] : report.categories) cats[std::string(to_string(e))] = metrics_to_json(m);
  json doc = {{"categories", cats}, {"average", metrics_to_json(report.average)}};
  return doc.dump(1) + "\n";
}

void write_variant_table_csv(std::ostream& out,
                             const std::map<std::string, MetricsReport>& by_variant,
                             const std::vector<std::string>& variants) {
  static constexpr const char* kMetricNames[] = {"accuracy", "precision", "recall", "f1"};
  auto pick = [](const Metrics& m, int k) {
    switch (k) {
      case 0: return m.accuracy;
      case 1: return m.precision;
      case 2: return m.recall;
      default: return m.f1;
    }
  };
  std::set<Emotion> cats;
  for (const auto& v : variants) {
    const auto it = by_variant.find(v);
    if (it == by_variant.end()) throw ValidationError("unknown variant: " + v);
    for (const auto& [e, m] : it->second.categories) cats.insert(e);
  }
  out << "category";
  for (int k = 0; k < 4; ++k) {
    for (const auto& v : variants) out << ',' << v << '_' << kMetricNames[k];
  }
  out << '\n';
  auto row = [&](const std::string& name, auto&& get) {
    out << name;
    for (int k = 0; k < 4; ++k) {
      for (const auto& v : variants) {
        const Metrics* m = get(by_variant.at(v));
        out << ',';
        if (m) out << pick(*m, k);
      }
    }
    out << '\n';
  };
  for (Emotion e : cats) {
    row(std::string(to_string(e)), [&](const MetricsReport& r) -> const Metrics* {
      const auto it = r.categories.find(e);
      return it == r.categories.end() ? nullptr : &it->second;
    });
  }
  row("average", [](const MetricsReport& r) -> const Metrics* { return &r.average; });
}

Eigen::MatrixXd read_numeric_csv(std::istream& in, std::vector<std::string>* header) {
  std::string line;
  std::size_t line_no = 0;
  auto split = [](const std::string& s) {
    std::vector<std::string> cells;
    std::stringstream ss(s);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (!s.empty() && s.back() == ',') cells.emplace_back();
    return cells;
  };
  auto strip = [](std::string& s) {
    while (!s.empty() && (s.back() == '\r' || s.back() == ' ')) s.pop_back();
  };
  if (!std::getline(in, line)) throw ParseError("empty CSV", 0);
  ++line_no;
  strip(line);
  const auto names = split(line);
  if (names.empty()) throw ParseError("CSV header has no columns", line_no);
  if (header) *header = names;

  std::vector<std::vector<double>> rows;
  while (std::getline(in, line)) {
    ++line_no;
    strip(line);
    if (line.empty()) continue;
    const auto cells = split(line);
    if (cells.size() != names.size()) throw ParseError("expected " + std::to_string(names.size()) + " columns", line_no);
    std::vector<double> row;
    for (const auto& c : cells) {
      std::size_t used = 0;
      double v = 0.0;
      try {
        v = std::stod(c, &used);
      } catch (const std::exception&) {
        throw ParseError("not a number: '" + c + "'", line_no);
      }
      if (used != c.size() || !std::isfinite(v)) throw ParseError("not a finite number: '" + c + "'", line_no);
      row.push_back(v);
    }
    rows.push_back(std::move(row));
  }
  Eigen::MatrixXd m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(names.size()));
  for (std::size_t r = 0; r < rows.size(); ++r) {
    for (std::size_t c = 0; c < names.size(); ++c) m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = rows[r][c];
  }
  return m;
}

}  // namespace emoinf
