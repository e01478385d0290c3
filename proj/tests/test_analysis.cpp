#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "emoinf/analysis.hpp"
#include "emoinf/error.hpp"

using namespace emoinf;

namespace {

// Small builder for hand-made networks labeled for happiness.
struct NetBuilder {
  TimeVaryingNetwork net;
  int next_image = 0;

  NetBuilder(std::size_t users, TimeSlice horizon) : net(horizon) {
    for (std::size_t u = 0; u < users; ++u) net.add_user("u" + std::to_string(u));
  }
  void edge(std::size_t a, std::size_t b, TimeSlice t) { net.add_edge(a, b, t); }
  void edge_all(std::size_t a, std::size_t b) {
    for (TimeSlice t = 0; t < net.horizon(); ++t) net.add_edge(a, b, t);
  }
  // label 0 uploads an image without a happiness label.
  void image(std::size_t user, TimeSlice t, int label) {
    ImageRecord img;
    img.id = "img" + std::to_string(next_image++);
    img.owner = net.user_id(user);
    img.slice = t;
    if (label != 0) img.labels[Emotion::happiness] = BinaryLabel(label);
    net.add_image(img);
  }
};

double pearson(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  const Eigen::VectorXd ca = a.array() - a.mean();
  const Eigen::VectorXd cb = b.array() - b.mean();
  return ca.dot(cb) / std::sqrt(ca.squaredNorm() * cb.squaredNorm());
}

}  // namespace

// ---------------------------------------------------------------------------
// evaluate / summarize

TEST(Evaluate, ConfusionCounts) {
  const std::vector<double> p{0.9, 0.5, 0.49, 0.1, 0.7, 0.2};
  const std::vector<int> y{1, -1, 1, -1, 1, 1};
  const Metrics m = evaluate(p, y);
  EXPECT_EQ(m.tp, 2u);
  EXPECT_EQ(m.fp, 1u);  // 0.5 counts as positive
  EXPECT_EQ(m.fn, 2u);
  EXPECT_EQ(m.tn, 1u);
  EXPECT_DOUBLE_EQ(m.accuracy, 3.0 / 6.0);
  EXPECT_DOUBLE_EQ(m.precision, 2.0 / 3.0);
  EXPECT_DOUBLE_EQ(m.recall, 2.0 / 4.0);
  EXPECT_DOUBLE_EQ(m.f1, 2.0 * (2.0 / 3.0) * 0.5 / (2.0 / 3.0 + 0.5));
}

TEST(Evaluate, ZeroDenominatorsGiveZero) {
  const Metrics m = evaluate({0.1, 0.2}, {-1, -1});
  EXPECT_DOUBLE_EQ(m.accuracy, 1.0);
  EXPECT_DOUBLE_EQ(m.precision, 0.0);
  EXPECT_DOUBLE_EQ(m.recall, 0.0);
  EXPECT_DOUBLE_EQ(m.f1, 0.0);
  const Metrics empty = evaluate({}, {});
  EXPECT_DOUBLE_EQ(empty.accuracy, 0.0);
}

TEST(Evaluate, RejectsBadInput) {
  EXPECT_THROW(evaluate({0.5}, {}), ValidationError);
  EXPECT_THROW(evaluate({0.5}, {0}), ValidationError);
}

TEST(Evaluate, SummarizeIsMacroAverage) {
  std::map<Emotion, Metrics> cats;
  cats[Emotion::happiness] = evaluate({0.9, 0.1}, {1, -1});
  cats[Emotion::anger] = evaluate({0.9, 0.9}, {-1, -1});
  const MetricsReport r = summarize(cats);
  EXPECT_DOUBLE_EQ(r.average.accuracy, 0.5);
  EXPECT_DOUBLE_EQ(r.average.f1, 0.5);
  EXPECT_EQ(r.average.total(), 4u);
}

TEST(Evaluate, VariantTableLayout) {
  std::map<Emotion, Metrics> cats{{Emotion::happiness, evaluate({0.9}, {1})}};
  std::map<std::string, MetricsReport> variants{{"SVM", summarize(cats)}, {"Model", summarize(cats)}};
  std::ostringstream out;
  write_variant_table_csv(out, variants, {"SVM", "Model"});
  std::istringstream in(out.str());
  std::string header, row, avg;
  std::getline(in, header);
  std::getline(in, row);
  std::getline(in, avg);
  EXPECT_EQ(header,
            "category,SVM_accuracy,Model_accuracy,SVM_precision,Model_precision,SVM_recall,"
            "Model_recall,SVM_f1,Model_f1");
  EXPECT_EQ(row.rfind("happiness,1,1,", 0), 0u);
  EXPECT_EQ(avg.rfind("average,", 0), 0u);
  EXPECT_THROW(write_variant_table_csv(out, variants, {"nope"}), ValidationError);
}

// ---------------------------------------------------------------------------
// CCA

TEST(Cca, SingleColumnsMatchAbsolutePearson) {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> n01;
  for (int trial = 0; trial < 50; ++trial) {
    Eigen::MatrixXd x(40, 1), y(40, 1);
    const double mix = (trial % 5) / 4.0 - 0.5;
    for (int i = 0; i < 40; ++i) {
      x(i, 0) = n01(rng);
      y(i, 0) = mix * x(i, 0) + n01(rng);
    }
    const CcaResult r = cca(x, y);
    ASSERT_EQ(r.correlations.size(), 1u);
    EXPECT_NEAR(r.correlations[0], std::abs(pearson(x.col(0), y.col(0))), 1e-5);
  }
}

TEST(Cca, InvariantUnderColumnAffineMaps) {
  std::mt19937_64 rng(11);
  std::normal_distribution<double> n01;
  std::uniform_real_distribution<double> scale(0.1, 100.0);
  for (int trial = 0; trial < 30; ++trial) {
    Eigen::MatrixXd x(60, 3), y(60, 2);
    for (int i = 0; i < 60; ++i) {
      for (int c = 0; c < 3; ++c) x(i, c) = n01(rng);
      y(i, 0) = x(i, 0) + x(i, 1) + n01(rng);
      y(i, 1) = 0.3 * x(i, 2) + n01(rng);
    }
    const CcaResult base = cca(x, y);
    Eigen::MatrixXd x2 = x, y2 = y;
    for (int c = 0; c < 3; ++c) x2.col(c) = x2.col(c).array() * scale(rng) + 5.0 * n01(rng);
    for (int c = 0; c < 2; ++c) y2.col(c) = y2.col(c).array() * -scale(rng) + 5.0 * n01(rng);
    const CcaResult moved = cca(x2, y2);
    ASSERT_EQ(base.correlations.size(), 2u);
    for (std::size_t k = 0; k < 2; ++k) EXPECT_NEAR(base.correlations[k], moved.correlations[k], 1e-6);
  }
}

TEST(Cca, PropertiesOnRandomData) {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> n01;
  for (int trial = 0; trial < 40; ++trial) {
    const int p = 1 + trial % 4, q = 1 + (trial / 4) % 3;
    Eigen::MatrixXd x(50, p), y(50, q);
    for (int i = 0; i < 50; ++i) {
      for (int c = 0; c < p; ++c) x(i, c) = n01(rng);
      for (int c = 0; c < q; ++c) y(i, c) = n01(rng) + (c < p ? 0.5 * x(i, c) : 0.0);
    }
    const CcaResult r = cca(x, y);
    ASSERT_EQ(r.correlations.size(), static_cast<std::size_t>(std::min(p, q)));
    double max_pair = 0.0;
    for (int a = 0; a < p; ++a) {
      for (int b = 0; b < q; ++b) max_pair = std::max(max_pair, std::abs(pearson(x.col(a), y.col(b))));
    }
    EXPECT_GE(r.correlations[0], max_pair - 1e-6);
    for (std::size_t k = 0; k < r.correlations.size(); ++k) {
      EXPECT_GE(r.correlations[k], 0.0);
      EXPECT_LE(r.correlations[k], 1.0);
      if (k > 0) EXPECT_LE(r.correlations[k], r.correlations[k - 1] + 1e-12);
    }
    // The first pair of directions realizes the first correlation.
    Eigen::MatrixXd xs = x.rowwise() - x.colwise().mean();
    Eigen::MatrixXd ys = y.rowwise() - y.colwise().mean();
    for (int c = 0; c < p; ++c) xs.col(c) /= std::sqrt(xs.col(c).squaredNorm() / 49.0);
    for (int c = 0; c < q; ++c) ys.col(c) /= std::sqrt(ys.col(c).squaredNorm() / 49.0);
    const Eigen::VectorXd u = xs * r.x_directions.col(0);
    const Eigen::VectorXd v = ys * r.y_directions.col(0);
    EXPECT_NEAR(pearson(u, v), r.correlations[0], 1e-4);
  }
}

TEST(Cca, LinearlyDependentBlocksCorrelatePerfectly) {
  std::mt19937_64 rng(9);
  std::normal_distribution<double> n01;
  Eigen::MatrixXd x(30, 2);
  for (int i = 0; i < 30; ++i) x.row(i) << n01(rng), n01(rng);
  Eigen::MatrixXd m(2, 2);
  m << 2.0, -1.0, 0.5, 3.0;
  const CcaResult r = cca(x, x * m);
  EXPECT_NEAR(r.correlations[0], 1.0, 1e-5);
  EXPECT_NEAR(r.correlations[1], 1.0, 1e-5);
}

TEST(Cca, ConstantColumnWarnsAndInputChecks) {
  Eigen::MatrixXd x(5, 2), y(5, 1);
  x << 1, 7, 2, 7, 3, 7, 4, 7, 5, 7;
  y << 2, 4, 6, 8, 11;
  const CcaResult r = cca(x, y);
  EXPECT_FALSE(r.warnings.empty());
  EXPECT_NEAR(r.correlations[0], std::abs(pearson(x.col(0), y.col(0))), 1e-5);
  EXPECT_THROW(cca(x, Eigen::MatrixXd(4, 1)), ValidationError);
  EXPECT_THROW(cca(Eigen::MatrixXd(1, 1), Eigen::MatrixXd(1, 1)), ValidationError);
}

TEST(Cca, ReadsNumericCsv) {
  std::istringstream in("a,b\n1,2.5\r\n-3,4e1\n\n");
  std::vector<std::string> header;
  const Eigen::MatrixXd m = read_numeric_csv(in, &header);
  EXPECT_EQ(header, (std::vector<std::string>{"a", "b"}));
  ASSERT_EQ(m.rows(), 2);
  EXPECT_DOUBLE_EQ(m(1, 1), 40.0);
  std::istringstream bad("a,b\n1,x\n");
  EXPECT_THROW(read_numeric_csv(bad), ParseError);
  std::istringstream ragged("a,b\n1\n");
  EXPECT_THROW(read_numeric_csv(ragged), ParseError);
}

// ---------------------------------------------------------------------------
// Sampling test

TEST(Sampling, HandBuiltGroups) {
  // Slice 1 uploaders: 0 (one happy friend), 2 (no friends), 3 (three happy friends).
  NetBuilder b(7, 2);
  b.edge(0, 1, 0);
  b.edge(3, 4, 0);
  b.edge(3, 5, 0);
  b.edge(3, 6, 0);
  for (std::size_t f : {1, 4, 5, 6}) b.image(f, 0, 1);
  b.image(0, 1, 1);
  b.image(2, 1, -1);
  b.image(3, 1, -1);
  b.image(3, 1, 1);  // tie -> not happy
  SamplingConfig cfg;
  cfg.deltas = {1};
  cfg.repetitions = 1;
  const SamplingTestReport r = sampling_test(b.net, Emotion::happiness, cfg);
  ASSERT_EQ(r.cells.size(), 1u);
  const SamplingCell& c = r.cells[0];
  EXPECT_EQ(c.repetitions, 1);
  EXPECT_EQ(c.independent.members, 1u);
  EXPECT_DOUBLE_EQ(c.independent.ratio, 0.0);
  EXPECT_EQ(c.one_two.members, 1u);
  EXPECT_DOUBLE_EQ(c.one_two.ratio, 1.0);
  EXPECT_EQ(c.three_plus.members, 1u);
  EXPECT_DOUBLE_EQ(c.three_plus.ratio, 0.0);
  EXPECT_TRUE(r.warnings.empty());
}

TEST(Sampling, MatchesExhaustiveOracleWhenEverythingIsDrawn) {
  std::mt19937_64 rng(21);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t users = 12;
    const TimeSlice horizon = 6;
    NetBuilder b(users, horizon);
    std::bernoulli_distribution edge(0.3), upload(0.6), happy(0.5);
    for (TimeSlice t = 0; t < horizon; ++t) {
      for (std::size_t i = 0; i < users; ++i) {
        for (std::size_t j = i + 1; j < users; ++j) {
          if (edge(rng)) b.edge(i, j, t);
        }
        if (upload(rng)) b.image(i, t, happy(rng) ? 1 : -1);
      }
    }
    const std::uint32_t delta = 1 + trial % 3;
    SamplingConfig cfg;
    cfg.deltas = {delta};
    cfg.repetitions = static_cast<int>(horizon - delta);
    cfg.group_size = users;
    cfg.seed = static_cast<std::uint64_t>(trial);
    const SamplingCell c = sampling_test(b.net, Emotion::happiness, cfg).cells.at(0);

    // Oracle: per slice, classify every labeled uploader directly.
    const UserLabelGrid grid(b.net, Emotion::happiness);
    double sums[3] = {0, 0, 0};
    int reps[3] = {0, 0, 0};
    for (TimeSlice t = delta; t < horizon; ++t) {
      int happy_n[3] = {0, 0, 0}, total[3] = {0, 0, 0};
      for (std::size_t u = 0; u < users; ++u) {
        if (grid.at(u, t) == 0) continue;
        int friends = 0;
        for (std::size_t v = 0; v < users; ++v) {
          if (v != u && b.net.has_edge(u, v, t - delta) && grid.at(v, t - delta) == 1) ++friends;
        }
        const int g = friends == 0 ? 0 : (friends <= 2 ? 1 : 2);
        ++total[g];
        happy_n[g] += grid.at(u, t) == 1;
      }
      for (int g = 0; g < 3; ++g) {
        if (total[g] == 0) continue;
        sums[g] += static_cast<double>(happy_n[g]) / total[g];
        ++reps[g];
      }
    }
    const SamplingGroup* groups[3] = {&c.independent, &c.one_two, &c.three_plus};
    for (int g = 0; g < 3; ++g) {
      EXPECT_EQ(groups[g]->repetitions, reps[g]);
      EXPECT_NEAR(groups[g]->ratio, reps[g] ? sums[g] / reps[g] : 0.0, 1e-12);
    }
  }
}

TEST(Sampling, GroupSizeCapsMembers) {
  NetBuilder b(30, 3);
  for (std::size_t u = 0; u < 30; ++u) b.image(u, 2, 1);
  SamplingConfig cfg;
  cfg.group_size = 7;
  cfg.deltas = {1};
  cfg.repetitions = 1;
  const SamplingCell c = sampling_test(b.net, Emotion::happiness, cfg).cells.at(0);
  EXPECT_EQ(c.independent.members, 7u);
  EXPECT_EQ(c.one_two.members + c.three_plus.members, 0u);
}

TEST(Sampling, RepetitionsCappedWithWarning) {
  NetBuilder b(4, 10);
  SamplingConfig cfg;
  cfg.deltas = {3};
  cfg.repetitions = 10;
  const SamplingTestReport r = sampling_test(b.net, Emotion::happiness, cfg);
  EXPECT_EQ(r.cells[0].repetitions, 7);
  EXPECT_EQ(r.warnings.size(), 1u);

  cfg.disjoint_windows = true;
  const SamplingTestReport d = sampling_test(b.net, Emotion::happiness, cfg);
  EXPECT_GE(d.cells[0].repetitions, 1);
  EXPECT_LE(d.cells[0].repetitions, 2);  // windows of 4 slices in 10
}

TEST(Sampling, DeterministicForSeed) {
  NetBuilder b(40, 6);
  std::mt19937_64 rng(2);
  std::bernoulli_distribution coin(0.5);
  for (std::size_t u = 0; u < 40; ++u) {
    for (TimeSlice t = 0; t < 6; ++t) b.image(u, t, coin(rng) ? 1 : -1);
    b.edge_all(u, (u + 1) % 40);
  }
  SamplingConfig cfg;
  cfg.group_size = 5;
  cfg.repetitions = 3;
  cfg.seed = 17;
  EXPECT_EQ(sampling_report_json(sampling_test(b.net, Emotion::happiness, cfg)),
            sampling_report_json(sampling_test(b.net, Emotion::happiness, cfg)));
}

TEST(Sampling, RejectsBadConfig) {
  NetBuilder b(2, 3);
  SamplingConfig cfg;
  cfg.deltas = {0};
  EXPECT_THROW(sampling_test(b.net, Emotion::happiness, cfg), ValidationError);
  cfg.deltas = {1};
  cfg.group_size = 0;
  EXPECT_THROW(sampling_test(b.net, Emotion::happiness, cfg), ValidationError);
}

// ---------------------------------------------------------------------------
// Temporal correlation

TEST(Temporal, HandComputedRates) {
  NetBuilder b(2, 5);
  b.image(0, 0, 1);
  b.image(0, 1, 1);
  b.image(0, 2, -1);
  b.image(0, 3, 0);  // uploaded but unlabeled
  b.image(0, 4, 1);
  const RateReport r = temporal_correlation(b.net, Emotion::happiness, 0, 4, 1);
  ASSERT_EQ(r.points.size(), 4u);
  EXPECT_DOUBLE_EQ(r.points[0].rate, 0.5);  // (0,1) same, (1,2) differ
  EXPECT_DOUBLE_EQ(r.points[1].rate, 0.0);  // (0,2), (2,4) differ
  EXPECT_DOUBLE_EQ(r.points[2].rate, 1.0);  // (1,4)
  EXPECT_DOUBLE_EQ(r.points[3].rate, 1.0);  // (0,4)
  EXPECT_EQ(r.points[0].users, 1u);
  EXPECT_EQ(r.points[0].excluded, 1u);  // user 1 has no labels
}

TEST(Temporal, ConstantUsersAgreeFully) {
  NetBuilder b(10, 6);
  for (std::size_t u = 0; u < 10; ++u) {
    for (TimeSlice t = 0; t < 6; ++t) b.image(u, t, u % 2 ? 1 : -1);
  }
  const RateReport r = temporal_correlation(b.net, Emotion::happiness, 4, 3, 7);
  EXPECT_EQ(r.sampled, 4u);
  for (const auto& p : r.points) {
    EXPECT_DOUBLE_EQ(p.rate, 1.0);
    EXPECT_EQ(p.users, 4u);
  }
}

// ---------------------------------------------------------------------------
// Social correlation

TEST(Social, HandComputedRate) {
  NetBuilder b(3, 2);
  b.edge(0, 1, 0);
  b.edge(0, 2, 1);  // friends are pooled over slices
  b.image(0, 0, 1);
  b.image(1, 1, 1);
  b.image(2, 1, 0);
  const RateReport r = social_correlation(b.net, Emotion::happiness, 0, 1, NeighborMode::friends, 1);
  ASSERT_EQ(r.points.size(), 1u);
  EXPECT_DOUBLE_EQ(r.points[0].rate, 0.5);
  EXPECT_EQ(r.points[0].users, 1u);
  EXPECT_EQ(r.points[0].excluded, 2u);
}

TEST(Social, FriendlessUsersSkippedAndCounted) {
  NetBuilder b(3, 3);
  b.edge(0, 1, 0);
  b.image(2, 0, 1);
  const RateReport r = social_correlation(b.net, Emotion::happiness, 0, 1, NeighborMode::friends, 1);
  ASSERT_FALSE(r.warnings.empty());
  EXPECT_NE(r.warnings[0].find("1 sampled users have no friends"), std::string::npos);
  EXPECT_EQ(r.points[0].excluded, 3u);
}

TEST(Social, RandomNeighborsAvoidFriends) {
  // Two cliques of 6: one always happy, one never. Friends agree; non-friends never do.
  NetBuilder b(12, 4);
  for (std::size_t i = 0; i < 12; ++i) {
    for (std::size_t j = i + 1; j < 12; ++j) {
      if ((i < 6) == (j < 6)) b.edge_all(i, j);
    }
    for (TimeSlice t = 0; t < 4; ++t) b.image(i, t, i < 6 ? 1 : -1);
  }
  const RateReport friends = social_correlation(b.net, Emotion::happiness, 0, 2, NeighborMode::friends, 3);
  const RateReport random = social_correlation(b.net, Emotion::happiness, 0, 2, NeighborMode::random, 3);
  for (std::size_t k = 0; k < 2; ++k) {
    EXPECT_DOUBLE_EQ(friends.points[k].rate, 1.0);
    EXPECT_DOUBLE_EQ(random.points[k].rate, 0.0);
    EXPECT_EQ(friends.points[k].users, 6u);
  }
}

TEST(Social, ReportsRoundTripShape) {
  NetBuilder b(3, 2);
  b.edge(0, 1, 0);
  b.image(0, 0, 1);
  b.image(1, 1, 1);
  const RateReport r = social_correlation(b.net, Emotion::happiness, 0, 1, NeighborMode::friends, 1);
  std::ostringstream csv;
  write_rate_csv(csv, r);
  EXPECT_EQ(csv.str().rfind("delta,rate,users,excluded\n1,", 0), 0u);
  const auto doc = rate_report_json(r);
  EXPECT_NE(doc.find("\"points\""), std::string::npos);
}

// ---------------------------------------------------------------------------
// Holdout experiments

TEST(Holdout, ScoresEveryHiddenImage) {
  SynthConfig sc;
  sc.users = 8;
  sc.slices = 3;
  sc.burn_in = 50;
  sc.seed = 4;
  const SynthResult data = generate(sc);
  ExperimentConfig cfg;
  cfg.train.max_outer_iterations = 2;
  cfg.train.baseline.epochs = 50;
  cfg.test_fraction = 0.3;
  const ExperimentResult r = run_holdout(data.network, Emotion::happiness, cfg);
  ASSERT_FALSE(r.split.test.empty());
  EXPECT_EQ(r.model_probability.size(), r.split.test.size());
  EXPECT_EQ(r.model.total(), r.split.test.size());
  EXPECT_EQ(r.baseline.total(), r.split.test.size());
  for (std::size_t k = 0; k < r.split.test.size(); ++k) {
    EXPECT_EQ(r.truth[k], data.network.image(r.split.test[k]).label(Emotion::happiness)->value());
    EXPECT_GE(r.model_probability[k], 0.0);
    EXPECT_LE(r.model_probability[k], 1.0);
  }
  EXPECT_FALSE(r.influence.empty());

  const ExperimentResult again = run_holdout(data.network, Emotion::happiness, cfg);
  EXPECT_EQ(r.model_probability, again.model_probability);

  const ExperimentResult no_f4 = run_holdout(data.network, Emotion::happiness, cfg, {FactorKind::f4});
  EXPECT_TRUE(no_f4.influence.empty());
  EXPECT_EQ(ablation_run(data.network, Emotion::happiness, cfg, {FactorKind::f4}).tp, no_f4.model.tp);
}
