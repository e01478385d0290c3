#include "emoinf/emotion.hpp"

#include "emoinf/error.hpp"

namespace emoinf {

namespace {
constexpr std::array<std::string_view, 6> kNames = {"happiness", "surprise", "anger",
                                                     "disgust",   "fear",     "sadness"};
}

std::string_view to_string(Emotion e) { return kNames[static_cast<std::size_t>(e)]; }

std::optional<Emotion> parse_emotion(std::string_view name) {
  for (std::size_t i = 0; i < kNames.size(); ++i) {
    if (kNames[i] == name) return static_cast<Emotion>(i);
  }
  return std::nullopt;
}

BinaryLabel::BinaryLabel(int value) : value_(static_cast<std::int8_t>(value)) {
  if (value != 1 && value != -1) {
    throw ValidationError("binary label must be -1 or +1, got " + std::to_string(value));
  }
}

std::optional<Emotion> resolve_multilabel(const std::map<Emotion, double>& probabilities) {
  std::optional<Emotion> best;
  double best_p = 0.0;
  // std::map iterates in declaration order, so the first maximum wins ties.
  for (const auto& [emotion, p] : probabilities) {
    if (p < 0.5) continue;
    if (!best || p > best_p) {
      best = emotion;
      best_p = p;
    }
  }
  return best;
}

}  // namespace emoinf
