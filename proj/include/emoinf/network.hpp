#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "emoinf/emotion.hpp"

namespace emoinf {

using UserId = std::string;
using TimeSlice = std::uint32_t;

inline constexpr std::size_t kFeatureDim = 21;
using FeatureVector = std::array<double, kFeatureDim>;

inline constexpr std::int64_t kDefaultSliceWidthSeconds = 7 * 24 * 3600;
inline constexpr int kNetworkSchemaVersion = 1;

struct ImageRecord {
  std::string id;
  UserId owner;
  TimeSlice slice = 0;
  FeatureVector features{};
  std::map<Emotion, BinaryLabel> labels;

  std::optional<BinaryLabel> label(Emotion e) const {
    auto it = labels.find(e);
    if (it == labels.end()) return std::nullopt;
    return it->second;
  }
};

/// Users, per-slice undirected friendship edges and per-user-per-slice images.
///
/// Users and images are addressed by dense indices in insertion order; the
/// string ids are kept for I/O. Edges are stored once per slice as (lo, hi)
/// index pairs. The network is append-only and safe to share read-only.
class TimeVaryingNetwork {
 public:
  explicit TimeVaryingNetwork(TimeSlice horizon = 0);

  TimeSlice horizon() const { return horizon_; }
  std::size_t num_users() const { return user_ids_.size(); }
  std::size_t num_images() const { return images_.size(); }

  std::size_t add_user(const UserId& id);
  void add_edge(const UserId& u, const UserId& v, TimeSlice t);
  void add_edge(std::size_t u, std::size_t v, TimeSlice t);
  std::size_t add_image(ImageRecord image);

  const UserId& user_id(std::size_t index) const { return user_ids_.at(index); }
  std::optional<std::size_t> user_index(const UserId& id) const;
  std::size_t require_user(const UserId& id) const;

  const std::vector<ImageRecord>& images() const { return images_; }
  const ImageRecord& image(std::size_t index) const { return images_.at(index); }
  std::size_t image_owner(std::size_t index) const { return image_owner_.at(index); }

  /// Indices of the images `user` uploaded at `t` (empty if none).
  std::span<const std::size_t> images_of(std::size_t user, TimeSlice t) const;
  bool is_active(std::size_t user, TimeSlice t) const { return !images_of(user, t).empty(); }

  const std::set<std::pair<std::size_t, std::size_t>>& edges_at(TimeSlice t) const;
  std::size_t num_edges() const;
  bool has_edge(std::size_t u, std::size_t v, TimeSlice t) const;

  /// NB^t(v): sorted friend indices of `user` at slice `t`.
  const std::vector<std::size_t>& neighbors_at(std::size_t user, TimeSlice t) const;
  std::vector<UserId> neighbors_at(const UserId& user, TimeSlice t) const;

  /// Removes the label of `category` from the given images (others untouched).
  void hide_labels(Emotion category, std::span<const std::size_t> image_indices);
  void set_label(std::size_t image_index, Emotion category, BinaryLabel label);

 private:
  void check_slice(TimeSlice t) const;

  TimeSlice horizon_;
  std::vector<UserId> user_ids_;
  std::unordered_map<UserId, std::size_t> user_lookup_;
  std::vector<std::set<std::pair<std::size_t, std::size_t>>> edges_;
  // adjacency_[t][user] is kept sorted.
  std::vector<std::vector<std::vector<std::size_t>>> adjacency_;
  std::vector<ImageRecord> images_;
  std::vector<std::size_t> image_owner_;
  std::unordered_map<std::string, std::size_t> image_lookup_;
  // by_user_slice_[user][t] -> image indices
  std::vector<std::vector<std::vector<std::size_t>>> by_user_slice_;
};

/// Maps an epoch-seconds timestamp to a slice index.
TimeSlice slice_of(std::int64_t timestamp, std::int64_t origin = 0,
                   std::int64_t slice_width = kDefaultSliceWidthSeconds);

TimeVaryingNetwork read_network(std::istream& in);
TimeVaryingNetwork load_network(const std::filesystem::path& path);
void write_network(std::ostream& out, const TimeVaryingNetwork& net);
void save_network(const std::filesystem::path& path, const TimeVaryingNetwork& net);

/// Serializes one image record as a single JSON line (no trailing newline).
std::string image_record_json(const ImageRecord& image);

enum class LabelSource : std::uint8_t { observed_majority, inferred };

struct UserSliceLabel {
  std::size_t user = 0;
  TimeSlice slice = 0;
  Emotion category = Emotion::happiness;
  BinaryLabel label;
  LabelSource source = LabelSource::observed_majority;
};

/// Majority label per (user, slice) over the images labeled for `category`.
/// A tie yields -1. Slices without any labeled image are omitted. Output is
/// ordered by (user, slice).
std::vector<UserSliceLabel> derive_user_labels(const TimeVaryingNetwork& net, Emotion category);

/// Dense lookup built from derive_user_labels: 0 = no label, otherwise +-1.
class UserLabelGrid {
 public:
  UserLabelGrid(const TimeVaryingNetwork& net, Emotion category);
  int at(std::size_t user, TimeSlice t) const { return cells_[user * horizon_ + t]; }
  bool has_emotion(std::size_t user, TimeSlice t) const { return at(user, t) > 0; }

 private:
  std::size_t horizon_;
  std::vector<std::int8_t> cells_;
};

}  // namespace emoinf
