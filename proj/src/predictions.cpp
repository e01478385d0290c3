#include "emoinf/predictions.hpp"

#include <algorithm>
#include <cstdio>
#include <istream>
#include <ostream>
#include <set>
#include <tuple>

#include <json.hpp>

#include "emoinf/error.hpp"
#include "emoinf/learning.hpp"

namespace emoinf {

namespace {

using nlohmann::ordered_json;

std::optional<Emotion> resolve(const std::map<Emotion, double>& p) { return resolve_multilabel(p); }

ordered_json probability_json(const std::map<Emotion, double>& p) {
  ordered_json out = ordered_json::object();
  for (const auto& [e, v] : p) out[std::string(to_string(e))] = v;
  return out;
}

std::string emotion_name(const std::optional<Emotion>& e) {
  return e ? std::string(to_string(*e)) : std::string("neutral");
}

Emotion require_emotion(const std::string& name, std::size_t line) {
  const auto e = parse_emotion(name);
  if (!e) throw ParseError("unknown emotion '" + name + "'", line);
  return *e;
}

std::optional<Emotion> parse_resolved(const std::string& name, std::size_t line) {
  if (name == "neutral") return std::nullopt;
  return require_emotion(name, line);
}

std::map<Emotion, double> parse_probability(const ordered_json& j, std::size_t line) {
  std::map<Emotion, double> out;
  for (const auto& [k, v] : j.items()) out[require_emotion(k, line)] = v.get<double>();
  return out;
}

std::string dot_quote(const std::string& s) {
  std::string out = "\"";
  for (char c : s) {
    if (c == '"' || c == '\\') out += '\\';
    out += c;
  }
  return out + '"';
}

std::string fixed(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

}  // namespace

PredictionSet build_predictions(const TimeVaryingNetwork& net, const std::vector<CategoryModel>& models,
                                const BpConfig& bp) {
  PredictionSet set;
  std::set<Emotion> seen;
  for (const auto& m : models) {
    if (!seen.insert(m.category).second) {
      throw ValidationError("duplicate category " + std::string(to_string(m.category)));
    }
    if (m.params.users.size() != net.num_users()) {
      throw ValidationError("parameters do not match the network's users");
    }
  }
  set.categories.assign(seen.begin(), seen.end());

  set.images.resize(net.num_images());
  for (std::size_t i = 0; i < net.num_images(); ++i) {
    const ImageRecord& img = net.image(i);
    set.images[i].id = img.id;
    set.images[i].owner = img.owner;
    set.images[i].slice = img.slice;
  }
  std::map<std::pair<std::size_t, TimeSlice>, UserPrediction> users;

  for (const auto& m : models) {
    const FactorGraph graph = build_graph(net, m.category, {m.window, {}});
    const Prediction pred = predict(graph, m.params, bp);
    for (std::size_t v = 0; v < graph.num_variables(); ++v) {
      const VariableId& id = graph.variable(v).id;
      const double p = predict_probability(pred.marginals, v);
      switch (id.kind) {
        case VarKind::image:
          set.images[id.a].probability[m.category] = p;
          break;
        case VarKind::user: {
          UserPrediction& u = users[{id.a, id.b}];
          u.user = net.user_id(id.a);
          u.slice = id.b;
          u.images = net.images_of(id.a, id.b).size();
          u.probability[m.category] = p;
          break;
        }
        case VarKind::influence:
          set.influence.push_back({m.category, net.user_id(id.a), net.user_id(id.b), id.c, p});
          break;
      }
    }
  }
  for (auto& img : set.images) img.emotion = resolve(img.probability);
  for (auto& [key, u] : users) {
    u.emotion = resolve(u.probability);
    set.users.push_back(std::move(u));
  }
  std::stable_sort(set.influence.begin(), set.influence.end(), [&](const auto& a, const auto& b) {
    const auto ia = net.require_user(a.source), ja = net.require_user(a.target);
    const auto ib = net.require_user(b.source), jb = net.require_user(b.target);
    return std::tie(a.category, ia, ja, a.slice) < std::tie(b.category, ib, jb, b.slice);
  });
  return set;
}

void write_predictions(std::ostream& out, const PredictionSet& set) {
  ordered_json header;
  header["kind"] = "header";
  header["schema"] = kPredictionSchemaVersion;
  ordered_json cats = ordered_json::array();
  for (Emotion e : set.categories) cats.push_back(std::string(to_string(e)));
  header["categories"] = cats;
  out << header.dump() << '\n';
  for (const auto& img : set.images) {
    ordered_json rec;
    rec["kind"] = "image";
    rec["id"] = img.id;
    rec["owner"] = img.owner;
    rec["t"] = img.slice;
    rec["probability"] = probability_json(img.probability);
    rec["emotion"] = emotion_name(img.emotion);
    out << rec.dump() << '\n';
  }
  for (const auto& u : set.users) {
    ordered_json rec;
    rec["kind"] = "user";
    rec["id"] = u.user;
    rec["t"] = u.slice;
    rec["images"] = u.images;
    rec["probability"] = probability_json(u.probability);
    rec["emotion"] = emotion_name(u.emotion);
    out << rec.dump() << '\n';
  }
  for (const auto& w : set.influence) {
    ordered_json rec;
    rec["kind"] = "influence";
    rec["category"] = std::string(to_string(w.category));
    rec["source"] = w.source;
    rec["target"] = w.target;
    rec["t"] = w.slice;
    rec["weight"] = w.weight;
    out << rec.dump() << '\n';
  }
}

PredictionSet read_predictions(std::istream& in) {
  PredictionSet set;
  std::string line;
  std::size_t line_no = 0;
  bool header = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    try {
      const ordered_json rec = ordered_json::parse(line);
      const std::string kind = rec.at("kind").get<std::string>();
      if (kind == "header") {
        if (header) throw ParseError("duplicate header", line_no);
        if (rec.at("schema").get<int>() != kPredictionSchemaVersion) {
          throw ParseError("unsupported prediction schema", line_no);
        }
        for (const auto& c : rec.at("categories")) set.categories.push_back(require_emotion(c.get<std::string>(), line_no));
        header = true;
        continue;
      }
      if (!header) throw ParseError("first record must be the header", line_no);
      if (kind == "image") {
        ImagePrediction p;
        p.id = rec.at("id").get<std::string>();
        p.owner = rec.at("owner").get<std::string>();
        p.slice = rec.at("t").get<TimeSlice>();
        p.probability = parse_probability(rec.at("probability"), line_no);
        p.emotion = parse_resolved(rec.at("emotion").get<std::string>(), line_no);
        set.images.push_back(std::move(p));
      } else if (kind == "user") {
        UserPrediction p;
        p.user = rec.at("id").get<std::string>();
        p.slice = rec.at("t").get<TimeSlice>();
        p.images = rec.at("images").get<std::size_t>();
        p.probability = parse_probability(rec.at("probability"), line_no);
        p.emotion = parse_resolved(rec.at("emotion").get<std::string>(), line_no);
        set.users.push_back(std::move(p));
      } else if (kind == "influence") {
        InfluencePrediction p;
        p.category = require_emotion(rec.at("category").get<std::string>(), line_no);
        p.source = rec.at("source").get<std::string>();
        p.target = rec.at("target").get<std::string>();
        p.slice = rec.at("t").get<TimeSlice>();
        p.weight = rec.at("weight").get<double>();
        set.influence.push_back(std::move(p));
      } else {
        throw ParseError("unknown record kind '" + kind + "'", line_no);
      }
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(std::string("malformed prediction record: ") + e.what(), line_no);
    }
  }
  if (!header) throw ParseError("missing prediction header", 0);
  return set;
}

void write_ego_dot(std::ostream& out, const PredictionSet& set, const TimeVaryingNetwork& net,
                   const UserId& user, const EgoOptions& options) {
  const std::size_t center = net.require_user(user);
  const TimeSlice horizon = net.horizon();
  const TimeSlice first = options.slices == 0 || options.slices >= horizon ? 0 : horizon - options.slices;

  std::set<std::size_t> members{center};
  for (TimeSlice t = first; t < horizon; ++t) {
    const auto& nb = net.neighbors_at(center, t);
    members.insert(nb.begin(), nb.end());
  }
  std::map<std::pair<UserId, TimeSlice>, const UserPrediction*> by_slice;
  for (const auto& u : set.users) by_slice[{u.user, u.slice}] = &u;

  out << "digraph ego {\n";
  out << "  node [shape=box];\n";
  for (std::size_t m : members) {
    const UserId& id = net.user_id(m);
    // dot_quote escapes each piece; "\\n" between them is a DOT line break.
    std::string label = dot_quote(id);
    label.pop_back();
    for (TimeSlice t = first; t < horizon; ++t) {
      const auto it = by_slice.find({id, t});
      const std::size_t images = net.images_of(m, t).size();
      const std::string emotion = it == by_slice.end() ? "-" : emotion_name(it->second->emotion);
      label += "\\nt" + std::to_string(t) + ": " + emotion + " (" + std::to_string(images) + ")";
    }
    out << "  " << dot_quote(id) << " [label=" << label << "\"";
    if (m == center) out << ", style=bold";
    out << "];\n";
  }

  // Mean weight per (category, source, target) over the shown slices.
  std::map<std::tuple<UserId, UserId, Emotion>, std::pair<double, int>> sums;
  for (const auto& w : set.influence) {
    if (w.slice < first || w.slice >= horizon) continue;
    const auto s = net.user_index(w.source), d = net.user_index(w.target);
    if (!s || !d || !members.count(*s) || !members.count(*d)) continue;
    auto& acc = sums[{w.source, w.target, w.category}];
    acc.first += w.weight;
    acc.second += 1;
  }
  std::map<std::pair<UserId, UserId>, std::pair<double, Emotion>> best;
  for (const auto& [key, acc] : sums) {
    const auto& [src, dst, cat] = key;
    const double mean = acc.first / acc.second;
    auto it = best.find({src, dst});
    if (it == best.end() || mean > it->second.first) best[{src, dst}] = {mean, cat};
  }
  for (const auto& [pair, value] : best) {
    const auto& [w, cat] = value;
    if (w < options.min_weight) continue;
    out << "  " << dot_quote(pair.first) << " -> " << dot_quote(pair.second)
        << " [penwidth=" << fixed(5.0 * w, 3) << ", label=\"" << to_string(cat) << ' ' << fixed(w, 2)
        << "\"];\n";
  }
  out << "}\n";
}

}  // namespace emoinf
