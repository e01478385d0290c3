#include "emoinf/network.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include <json.hpp>

#include "emoinf/error.hpp"

namespace emoinf {

using nlohmann::json;

TimeVaryingNetwork::TimeVaryingNetwork(TimeSlice horizon)
    : horizon_(horizon), edges_(horizon), adjacency_(horizon) {}

std::size_t TimeVaryingNetwork::add_user(const UserId& id) {
  if (id.empty()) throw ValidationError("user id must not be empty");
  if (user_lookup_.count(id) != 0) throw ValidationError("duplicate user '" + id + "'");
  const std::size_t index = user_ids_.size();
  user_ids_.push_back(id);
  user_lookup_.emplace(id, index);
  for (auto& per_slice : adjacency_) per_slice.emplace_back();
  by_user_slice_.emplace_back(horizon_);
  return index;
}

std::optional<std::size_t> TimeVaryingNetwork::user_index(const UserId& id) const {
  auto it = user_lookup_.find(id);
  if (it == user_lookup_.end()) return std::nullopt;
  return it->second;
}

std::size_t TimeVaryingNetwork::require_user(const UserId& id) const {
  auto index = user_index(id);
  if (!index) throw ValidationError("unknown user '" + id + "'");
  return *index;
}

void TimeVaryingNetwork::check_slice(TimeSlice t) const {
  if (t >= horizon_) {
    throw ValidationError("slice " + std::to_string(t) + " outside horizon " +
                          std::to_string(horizon_));
  }
}

void TimeVaryingNetwork::add_edge(const UserId& u, const UserId& v, TimeSlice t) {
  add_edge(require_user(u), require_user(v), t);
}

void TimeVaryingNetwork::add_edge(std::size_t u, std::size_t v, TimeSlice t) {
  check_slice(t);
  if (u >= num_users() || v >= num_users()) throw ValidationError("edge endpoint out of range");
  if (u == v) throw ValidationError("self-edge on user '" + user_ids_[u] + "'");
  const auto key = std::minmax(u, v);
  if (!edges_[t].insert({key.first, key.second}).second) return;
  auto insert_sorted = [](std::vector<std::size_t>& list, std::size_t x) {
    list.insert(std::upper_bound(list.begin(), list.end(), x), x);
  };
  insert_sorted(adjacency_[t][u], v);
  insert_sorted(adjacency_[t][v], u);
}

std::size_t TimeVaryingNetwork::add_image(ImageRecord image) {
  if (image.id.empty()) throw ValidationError("image id must not be empty");
  if (image_lookup_.count(image.id) != 0) {
    throw ValidationError("duplicate image '" + image.id + "'");
  }
  const std::size_t owner = require_user(image.owner);
  check_slice(image.slice);
  for (double x : image.features) {
    if (!std::isfinite(x)) throw ValidationError("image '" + image.id + "' has non-finite feature");
  }
  const std::size_t index = images_.size();
  image_lookup_.emplace(image.id, index);
  by_user_slice_[owner][image.slice].push_back(index);
  image_owner_.push_back(owner);
  images_.push_back(std::move(image));
  return index;
}

std::span<const std::size_t> TimeVaryingNetwork::images_of(std::size_t user, TimeSlice t) const {
  if (user >= by_user_slice_.size() || t >= horizon_) return {};
  return by_user_slice_[user][t];
}

const std::set<std::pair<std::size_t, std::size_t>>& TimeVaryingNetwork::edges_at(
    TimeSlice t) const {
  check_slice(t);
  return edges_[t];
}

std::size_t TimeVaryingNetwork::num_edges() const {
  std::size_t total = 0;
  for (const auto& slice : edges_) total += slice.size();
  return total;
}

bool TimeVaryingNetwork::has_edge(std::size_t u, std::size_t v, TimeSlice t) const {
  if (t >= horizon_) return false;
  const auto key = std::minmax(u, v);
  return edges_[t].count({key.first, key.second}) != 0;
}

const std::vector<std::size_t>& TimeVaryingNetwork::neighbors_at(std::size_t user,
                                                                 TimeSlice t) const {
  check_slice(t);
  if (user >= num_users()) throw ValidationError("user index out of range");
  return adjacency_[t][user];
}

std::vector<UserId> TimeVaryingNetwork::neighbors_at(const UserId& user, TimeSlice t) const {
  std::vector<UserId> out;
  for (std::size_t v : neighbors_at(require_user(user), t)) out.push_back(user_ids_[v]);
  std::sort(out.begin(), out.end());
  return out;
}

void TimeVaryingNetwork::hide_labels(Emotion category, std::span<const std::size_t> image_indices) {
  for (std::size_t i : image_indices) images_.at(i).labels.erase(category);
}

void TimeVaryingNetwork::set_label(std::size_t image_index, Emotion category, BinaryLabel label) {
  images_.at(image_index).labels[category] = label;
}

TimeSlice slice_of(std::int64_t timestamp, std::int64_t origin, std::int64_t slice_width) {
  if (slice_width <= 0) throw ValidationError("slice width must be positive");
  if (timestamp < origin) throw ValidationError("timestamp precedes origin");
  return static_cast<TimeSlice>((timestamp - origin) / slice_width);
}

// ---------------------------------------------------------------------------
// Line-delimited JSON

namespace {

struct HeaderInfo {
  TimeSlice horizon = 0;
  std::int64_t origin = 0;
  std::int64_t slice_width = kDefaultSliceWidthSeconds;
};

TimeSlice record_slice(const json& rec, const HeaderInfo& header, std::size_t line) {
  if (rec.contains("t")) {
    const auto t = rec.at("t").get<std::int64_t>();
    if (t < 0) throw ParseError("negative slice index", line);
    return static_cast<TimeSlice>(t);
  }
  if (rec.contains("ts")) {
    try {
      return slice_of(rec.at("ts").get<std::int64_t>(), header.origin, header.slice_width);
    } catch (const ValidationError& e) {
      throw ParseError(e.what(), line);
    }
  }
  throw ParseError("record needs 't' or 'ts'", line);
}

ImageRecord parse_image(const json& rec, const HeaderInfo& header, std::size_t line) {
  ImageRecord image;
  image.id = rec.at("id").get<std::string>();
  image.owner = rec.at("owner").get<std::string>();
  image.slice = record_slice(rec, header, line);
  const auto& features = rec.at("features");
  if (!features.is_array() || features.size() != kFeatureDim) {
    throw ParseError("image '" + image.id + "' must have exactly 21 features", line);
  }
  for (std::size_t k = 0; k < kFeatureDim; ++k) image.features[k] = features[k].get<double>();
  if (rec.contains("labels")) {
    for (const auto& [name, value] : rec.at("labels").items()) {
      auto category = parse_emotion(name);
      if (!category) throw ParseError("unknown emotion category '" + name + "'", line);
      try {
        image.labels[*category] = BinaryLabel(value.get<int>());
      } catch (const ValidationError& e) {
        throw ParseError(e.what(), line);
      }
    }
  }
  return image;
}

}  // namespace

TimeVaryingNetwork read_network(std::istream& in) {
  std::string text;
  std::size_t line_no = 0;
  std::optional<TimeVaryingNetwork> net;
  HeaderInfo header;

  while (std::getline(in, text)) {
    ++line_no;
    if (!text.empty() && text.back() == '\r') text.pop_back();
    if (text.find_first_not_of(" \t") == std::string::npos) continue;
    json rec;
    try {
      rec = json::parse(text);
    } catch (const json::parse_error& e) {
      throw ParseError(std::string("invalid JSON: ") + e.what(), line_no);
    }
    try {
      const auto kind = rec.at("kind").get<std::string>();
      if (kind == "header") {
        if (net) throw ParseError("duplicate header", line_no);
        const int schema = rec.value("schema", kNetworkSchemaVersion);
        if (schema != kNetworkSchemaVersion) {
          throw ParseError("unsupported schema version " + std::to_string(schema), line_no);
        }
        header.horizon = rec.at("horizon").get<TimeSlice>();
        header.origin = rec.value("origin", std::int64_t{0});
        header.slice_width = rec.value("slice_width", kDefaultSliceWidthSeconds);
        if (header.slice_width <= 0) throw ParseError("slice_width must be positive", line_no);
        net.emplace(header.horizon);
        continue;
      }
      if (!net) throw ParseError("first record must be the header", line_no);
      if (kind == "user") {
        net->add_user(rec.at("id").get<std::string>());
      } else if (kind == "edge") {
        net->add_edge(rec.at("u").get<std::string>(), rec.at("v").get<std::string>(),
                      record_slice(rec, header, line_no));
      } else if (kind == "image") {
        net->add_image(parse_image(rec, header, line_no));
      } else {
        throw ParseError("unknown record kind '" + kind + "'", line_no);
      }
    } catch (const ValidationError& e) {
      throw ValidationError("line " + std::to_string(line_no) + ": " + e.what());
    } catch (const json::exception& e) {
      throw ParseError(std::string("malformed record: ") + e.what(), line_no);
    }
  }
  if (!net) return TimeVaryingNetwork(0);
  return std::move(*net);
}

TimeVaryingNetwork load_network(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open network file " + path.string());
  return read_network(in);
}

std::string image_record_json(const ImageRecord& image) {
  json rec;
  rec["kind"] = "image";
  rec["id"] = image.id;
  rec["owner"] = image.owner;
  rec["t"] = image.slice;
  rec["features"] = image.features;
  if (!image.labels.empty()) {
    json labels = json::object();
    for (const auto& [category, label] : image.labels) {
      labels[std::string(to_string(category))] = label.value();
    }
    rec["labels"] = std::move(labels);
  }
  return rec.dump();
}

void write_network(std::ostream& out, const TimeVaryingNetwork& net) {
  json header = {{"kind", "header"},
                 {"schema", kNetworkSchemaVersion},
                 {"horizon", net.horizon()},
                 {"slice_width", kDefaultSliceWidthSeconds},
                 {"origin", 0}};
  out << header.dump() << '\n';
  for (std::size_t u = 0; u < net.num_users(); ++u) {
    out << json{{"kind", "user"}, {"id", net.user_id(u)}}.dump() << '\n';
  }
  for (TimeSlice t = 0; t < net.horizon(); ++t) {
    for (const auto& [u, v] : net.edges_at(t)) {
      out << json{{"kind", "edge"}, {"u", net.user_id(u)}, {"v", net.user_id(v)}, {"t", t}}.dump()
          << '\n';
    }
  }
  for (const auto& image : net.images()) out << image_record_json(image) << '\n';
}

void save_network(const std::filesystem::path& path, const TimeVaryingNetwork& net) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write network file " + path.string());
  write_network(out, net);
}

// ---------------------------------------------------------------------------

std::vector<UserSliceLabel> derive_user_labels(const TimeVaryingNetwork& net, Emotion category) {
  std::vector<UserSliceLabel> out;
  for (std::size_t u = 0; u < net.num_users(); ++u) {
    for (TimeSlice t = 0; t < net.horizon(); ++t) {
      int positives = 0;
      int labeled = 0;
      for (std::size_t i : net.images_of(u, t)) {
        if (auto label = net.image(i).label(category)) {
          ++labeled;
          if (label->is_positive()) ++positives;
        }
      }
      if (labeled == 0) continue;
      const bool majority = 2 * positives > labeled;
      out.push_back({u, t, category, majority ? BinaryLabel::positive() : BinaryLabel::negative(),
                     LabelSource::observed_majority});
    }
  }
  return out;
}

UserLabelGrid::UserLabelGrid(const TimeVaryingNetwork& net, Emotion category)
    : horizon_(net.horizon()), cells_(net.num_users() * net.horizon(), 0) {
  for (const auto& entry : derive_user_labels(net, category)) {
    cells_[entry.user * horizon_ + entry.slice] = static_cast<std::int8_t>(entry.label.value());
  }
}

}  // namespace emoinf
