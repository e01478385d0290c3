#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "emoinf/inference.hpp"
#include "emoinf/network.hpp"

namespace emoinf {

inline constexpr int kPredictionSchemaVersion = 1;

struct ImagePrediction {
  std::string id;
  UserId owner;
  TimeSlice slice = 0;
  std::map<Emotion, double> probability;   // P(+1) per predicted category
  std::optional<Emotion> emotion;          // nullopt = neutral
};

struct UserPrediction {
  UserId user;
  TimeSlice slice = 0;
  std::size_t images = 0;                  // uploads at this slice
  std::map<Emotion, double> probability;
  std::optional<Emotion> emotion;
};

struct InfluencePrediction {
  Emotion category = Emotion::happiness;
  UserId source;
  UserId target;
  TimeSlice slice = 0;
  double weight = 0.0;                     // P(mu = 1)
};

/// Per-image, per-user-slice and per-edge results over one or more categories.
struct PredictionSet {
  std::vector<Emotion> categories;
  std::vector<ImagePrediction> images;     // network image order
  std::vector<UserPrediction> users;       // ordered by (user, slice)
  std::vector<InfluencePrediction> influence;  // ordered by (category, source, target, slice)
};

struct CategoryModel {
  Emotion category = Emotion::happiness;
  ParameterSet params;
  std::uint32_t window = 1;
};

/// Runs inference once per category and merges the marginals. Images and
/// user-slices get their emotion from resolve_multilabel. Categories must be
/// distinct.
PredictionSet build_predictions(const TimeVaryingNetwork& net, const std::vector<CategoryModel>& models,
                                const BpConfig& bp = {});

/// JSON lines: a header, then image, user and influence records.
void write_predictions(std::ostream& out, const PredictionSet& set);
PredictionSet read_predictions(std::istream& in);

struct EgoOptions {
  double min_weight = 0.5;
  /// Number of trailing slices shown (0 = all).
  TimeSlice slices = 5;
};

/// DOT digraph of `user` and everyone linked to them at the shown slices.
/// Nodes list per-slice image counts and predicted emotions; a directed edge
/// appears when the pair's mean influence weight over the shown slices (max
/// over categories) reaches `min_weight`, with pen width proportional to it.
void write_ego_dot(std::ostream& out, const PredictionSet& set, const TimeVaryingNetwork& net,
                   const UserId& user, const EgoOptions& options = {});

}  // namespace emoinf
