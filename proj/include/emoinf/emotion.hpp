#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>

namespace emoinf {

enum class Emotion : std::uint8_t { happiness, surprise, anger, disgust, fear, sadness };

inline constexpr std::array<Emotion, 6> kAllEmotions = {
    Emotion::happiness, Emotion::surprise, Emotion::anger,
    Emotion::disgust,   Emotion::fear,     Emotion::sadness};

std::string_view to_string(Emotion e);
std::optional<Emotion> parse_emotion(std::string_view name);

/// A {-1, +1} label. Any other value is rejected at construction.
class BinaryLabel {
 public:
  constexpr BinaryLabel() = default;
  explicit BinaryLabel(int value);

  static constexpr BinaryLabel positive() { return BinaryLabel(Tag{}, 1); }
  static constexpr BinaryLabel negative() { return BinaryLabel(Tag{}, -1); }

  constexpr int value() const { return value_; }
  constexpr bool is_positive() const { return value_ > 0; }

  friend constexpr bool operator==(BinaryLabel, BinaryLabel) = default;

 private:
  struct Tag {};
  constexpr BinaryLabel(Tag, int v) : value_(static_cast<std::int8_t>(v)) {}
  std::int8_t value_ = -1;
};

/// Picks one category from per-category positive probabilities.
///
/// Returns nullopt (neutral) when every probability is below 0.5; otherwise the
/// category with the highest probability among those at or above 0.5. Exact
/// ties go to the category declared first in `Emotion`.
std::optional<Emotion> resolve_multilabel(const std::map<Emotion, double>& probabilities);

}  // namespace emoinf
