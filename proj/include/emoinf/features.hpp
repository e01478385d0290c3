#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <vector>

#include "emoinf/network.hpp"

namespace emoinf {

struct Rgb {
  std::uint8_t r = 0, g = 0, b = 0;
  friend bool operator==(Rgb, Rgb) = default;
};

/// h in degrees [0, 360); s and v in [0, 1].
struct Hsv {
  double h = 0.0, s = 0.0, v = 0.0;
};

/// Decoded RGB image, row-major.
class PixelGrid {
 public:
  PixelGrid(std::size_t width, std::size_t height, std::vector<Rgb> pixels);
  PixelGrid(std::size_t width, std::size_t height, Rgb fill);

  std::size_t width() const { return width_; }
  std::size_t height() const { return height_; }
  std::size_t size() const { return pixels_.size(); }
  std::span<const Rgb> pixels() const { return pixels_; }
  Rgb& at(std::size_t x, std::size_t y) { return pixels_[y * width_ + x]; }

 private:
  std::size_t width_, height_;
  std::vector<Rgb> pixels_;
};

// Layout of the 21-dimensional descriptor.
inline constexpr std::size_t kDominantColorSlots = 15;
inline constexpr std::size_t kMeanBrightness = 15;
inline constexpr std::size_t kMeanSaturation = 16;
inline constexpr std::size_t kBrightnessContrast = 17;
inline constexpr std::size_t kSaturationContrast = 18;
inline constexpr std::size_t kCoolColorRatio = 19;
inline constexpr std::size_t kClearColorRatio = 20;

inline constexpr int kDominantColors = 5;
inline constexpr std::size_t kClusterSampleLimit = 10000;

Hsv rgb_to_hsv(int r, int g, int b);
std::vector<Hsv> to_hsv(const PixelGrid& img);

/// Five dominant colors as 5 x (h/360, s, v), most populous first.
///
/// Weighted k-means over the distinct colors with hue embedded on the unit
/// circle. Pixels are sorted before the seeded subsample, so the result does
/// not depend on pixel order. With fewer than five distinct colors the largest
/// cluster fills the remaining slots.
std::array<double, kDominantColorSlots> dominant_colors(const PixelGrid& img, std::uint64_t seed);

struct ChannelStats {
  double mean_v = 0.0;
  double mean_s = 0.0;
  double contrast_v = 0.0;  // population standard deviation of v
  double contrast_s = 0.0;  // population standard deviation of s
};

ChannelStats brightness_saturation_stats(std::span<const Hsv> pixels);
ChannelStats brightness_saturation_stats(const PixelGrid& img);

/// Fraction of pixels with 30 <= h <= 110.
double cool_color_ratio(std::span<const Hsv> pixels);
double cool_color_ratio(const PixelGrid& img);

/// Fraction of pixels with v > 0.7.
double clear_color_ratio(std::span<const Hsv> pixels);
double clear_color_ratio(const PixelGrid& img);

FeatureVector extract_features(const PixelGrid& img, std::uint64_t seed);

/// Binary P6 portable pixmap with maxval 255.
PixelGrid read_ppm(std::istream& in);
PixelGrid read_ppm(const std::filesystem::path& path);
void write_ppm(std::ostream& out, const PixelGrid& img);

}  // namespace emoinf
