#include "emoinf/features.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <istream>
#include <iterator>
#include <numbers>
#include <ostream>
#include <random>

#include "emoinf/error.hpp"

namespace emoinf {

PixelGrid::PixelGrid(std::size_t width, std::size_t height, std::vector<Rgb> pixels)
    : width_(width), height_(height), pixels_(std::move(pixels)) {
  if (width_ == 0 || height_ == 0) throw ValidationError("pixel grid must be non-empty");
  if (pixels_.size() != width_ * height_) {
    throw ValidationError("pixel count does not match width x height");
  }
}

PixelGrid::PixelGrid(std::size_t width, std::size_t height, Rgb fill)
    : PixelGrid(width, height, std::vector<Rgb>(width * height, fill)) {}

Hsv rgb_to_hsv(int r, int g, int b) {
  const int hi = std::max({r, g, b});
  const int lo = std::min({r, g, b});
  Hsv out;
  out.v = hi / 255.0;
  if (hi == 0) return out;
  const double chroma = hi - lo;
  out.s = chroma / hi;
  if (chroma == 0) return out;
  double h;
  if (hi == r) {
    h = 60.0 * std::fmod((g - b) / chroma + 6.0, 6.0);
  } else if (hi == g) {
    h = 60.0 * ((b - r) / chroma + 2.0);
  } else {
    h = 60.0 * ((r - g) / chroma + 4.0);
  }
  if (h >= 360.0) h -= 360.0;
  out.h = h;
  return out;
}

std::vector<Hsv> to_hsv(const PixelGrid& img) {
  std::vector<Hsv> out;
  out.reserve(img.size());
  for (const Rgb& p : img.pixels()) out.push_back(rgb_to_hsv(p.r, p.g, p.b));
  return out;
}

namespace {

using Point = std::array<double, 4>;  // cos h, sin h, s, v

Point embed(const Hsv& c) {
  const double rad = c.h * std::numbers::pi / 180.0;
  return {std::cos(rad), std::sin(rad), c.s, c.v};
}

double sq_dist(const Point& a, const Point& b) {
  double d = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) d += (a[k] - b[k]) * (a[k] - b[k]);
  return d;
}

std::uint32_t pack(Rgb p) { return (std::uint32_t{p.r} << 16) | (std::uint32_t{p.g} << 8) | p.b; }

Hsv unpack_hsv(std::uint32_t key) {
  return rgb_to_hsv(static_cast<int>((key >> 16) & 0xff), static_cast<int>((key >> 8) & 0xff),
                    static_cast<int>(key & 0xff));
}

struct Cluster {
  Hsv color;
  double population = 0.0;
};

}  // namespace

std::array<double, kDominantColorSlots> dominant_colors(const PixelGrid& img, std::uint64_t seed) {
  std::mt19937_64 rng(seed);

  std::vector<std::uint32_t> keys;
  keys.reserve(img.size());
  for (const Rgb& p : img.pixels()) keys.push_back(pack(p));
  std::sort(keys.begin(), keys.end());
  if (keys.size() > kClusterSampleLimit) {
    std::vector<std::uint32_t> sample;
    sample.reserve(kClusterSampleLimit);
    std::sample(keys.begin(), keys.end(), std::back_inserter(sample), kClusterSampleLimit, rng);
    keys = std::move(sample);
  }

  // Distinct colors with their pixel counts.
  std::vector<Point> points;
  std::vector<double> weights;
  for (std::size_t i = 0; i < keys.size();) {
    std::size_t j = i;
    while (j < keys.size() && keys[j] == keys[i]) ++j;
    points.push_back(embed(unpack_hsv(keys[i])));
    weights.push_back(static_cast<double>(j - i));
    i = j;
  }

  std::vector<std::size_t> order(points.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::shuffle(order.begin(), order.end(), rng);

  const std::size_t k = std::min<std::size_t>(kDominantColors, points.size());
  std::vector<Point> centers{points[order[0]]};
  std::vector<double> nearest(points.size());
  for (std::size_t i = 0; i < points.size(); ++i) nearest[i] = sq_dist(points[i], centers[0]);
  while (centers.size() < k) {
    std::size_t pick = order[0];
    double far = -1.0;
    for (std::size_t idx : order) {
      if (nearest[idx] > far) {
        far = nearest[idx];
        pick = idx;
      }
    }
    centers.push_back(points[pick]);
    for (std::size_t i = 0; i < points.size(); ++i) {
      nearest[i] = std::min(nearest[i], sq_dist(points[i], centers.back()));
    }
  }

  std::vector<std::size_t> assign(points.size(), 0);
  std::vector<double> population(k, 0.0);
  for (int iter = 0; iter < 50; ++iter) {
    for (std::size_t i = 0; i < points.size(); ++i) {
      double best = sq_dist(points[i], centers[0]);
      assign[i] = 0;
      for (std::size_t c = 1; c < k; ++c) {
        const double d = sq_dist(points[i], centers[c]);
        if (d < best) {
          best = d;
          assign[i] = c;
        }
      }
    }
    std::vector<Point> sums(k, Point{});
    std::fill(population.begin(), population.end(), 0.0);
    for (std::size_t i = 0; i < points.size(); ++i) {
      population[assign[i]] += weights[i];
      for (std::size_t d = 0; d < 4; ++d) sums[assign[i]][d] += weights[i] * points[i][d];
    }
    double moved = 0.0;
    for (std::size_t c = 0; c < k; ++c) {
      if (population[c] == 0.0) continue;  // empty cluster keeps its center
      Point next;
      for (std::size_t d = 0; d < 4; ++d) next[d] = sums[c][d] / population[c];
      moved = std::max(moved, std::sqrt(sq_dist(next, centers[c])));
      centers[c] = next;
    }
    if (moved < 1e-6) break;
  }

  std::vector<Cluster> clusters;
  for (std::size_t c = 0; c < k; ++c) {
    Cluster cl;
    const double radius = std::hypot(centers[c][0], centers[c][1]);
    double h = 0.0;
    if (radius > 1e-12) {
      h = std::atan2(centers[c][1], centers[c][0]) * 180.0 / std::numbers::pi;
      if (h < 0.0) h += 360.0;
      if (h >= 360.0) h -= 360.0;
    }
    cl.color = {h, centers[c][2], centers[c][3]};
    cl.population = population[c];
    clusters.push_back(cl);
  }
  std::sort(clusters.begin(), clusters.end(), [](const Cluster& a, const Cluster& b) {
    if (a.population != b.population) return a.population > b.population;
    if (a.color.h != b.color.h) return a.color.h < b.color.h;
    if (a.color.s != b.color.s) return a.color.s < b.color.s;
    return a.color.v < b.color.v;
  });
  while (clusters.size() < static_cast<std::size_t>(kDominantColors)) {
    clusters.push_back(clusters.front());
  }

  std::array<double, kDominantColorSlots> out{};
  for (std::size_t c = 0; c < static_cast<std::size_t>(kDominantColors); ++c) {
    out[3 * c] = clusters[c].color.h / 360.0;
    out[3 * c + 1] = clusters[c].color.s;
    out[3 * c + 2] = clusters[c].color.v;
  }
  return out;
}

ChannelStats brightness_saturation_stats(std::span<const Hsv> pixels) {
  if (pixels.empty()) throw ValidationError("image must be non-empty");
  ChannelStats st;
  const double n = static_cast<double>(pixels.size());
  // Accumulate offsets from the channel minimum so a uniform image gives
  // exactly its value and exactly zero spread.
  double min_v = pixels[0].v, min_s = pixels[0].s;
  for (const Hsv& p : pixels) {
    min_v = std::min(min_v, p.v);
    min_s = std::min(min_s, p.s);
  }
  double off_v = 0.0, off_s = 0.0;
  for (const Hsv& p : pixels) {
    off_v += p.v - min_v;
    off_s += p.s - min_s;
  }
  off_v /= n;
  off_s /= n;
  st.mean_v = min_v + off_v;
  st.mean_s = min_s + off_s;
  double var_v = 0.0, var_s = 0.0;
  for (const Hsv& p : pixels) {
    const double dv = p.v - min_v - off_v, ds = p.s - min_s - off_s;
    var_v += dv * dv;
    var_s += ds * ds;
  }
  st.contrast_v = std::sqrt(var_v / n);
  st.contrast_s = std::sqrt(var_s / n);
  return st;
}

ChannelStats brightness_saturation_stats(const PixelGrid& img) {
  return brightness_saturation_stats(to_hsv(img));
}

double cool_color_ratio(std::span<const Hsv> pixels) {
  if (pixels.empty()) throw ValidationError("image must be non-empty");
  const auto cool = std::count_if(pixels.begin(), pixels.end(),
                                  [](const Hsv& p) { return p.h >= 30.0 && p.h <= 110.0; });
  return static_cast<double>(cool) / static_cast<double>(pixels.size());
}

double cool_color_ratio(const PixelGrid& img) { return cool_color_ratio(to_hsv(img)); }

double clear_color_ratio(std::span<const Hsv> pixels) {
  if (pixels.empty()) throw ValidationError("image must be non-empty");
  const auto clear =
      std::count_if(pixels.begin(), pixels.end(), [](const Hsv& p) { return p.v > 0.7; });
  return static_cast<double>(clear) / static_cast<double>(pixels.size());
}

double clear_color_ratio(const PixelGrid& img) { return clear_color_ratio(to_hsv(img)); }

FeatureVector extract_features(const PixelGrid& img, std::uint64_t seed) {
  FeatureVector x{};
  const auto colors = dominant_colors(img, seed);
  std::copy(colors.begin(), colors.end(), x.begin());
  const auto hsv = to_hsv(img);
  const auto stats = brightness_saturation_stats(hsv);
  x[kMeanBrightness] = stats.mean_v;
  x[kMeanSaturation] = stats.mean_s;
  x[kBrightnessContrast] = stats.contrast_v;
  x[kSaturationContrast] = stats.contrast_s;
  x[kCoolColorRatio] = cool_color_ratio(hsv);
  x[kClearColorRatio] = clear_color_ratio(hsv);
  return x;
}

// ---------------------------------------------------------------------------
// P6 PPM

namespace {

long read_header_int(std::istream& in) {
  int c = in.peek();
  while (c != EOF) {
    if (std::isspace(c)) {
      in.get();
    } else if (c == '#') {
      std::string comment;
      std::getline(in, comment);
    } else {
      break;
    }
    c = in.peek();
  }
  long value = -1;
  if (!(in >> value)) throw ParseError("truncated PPM header", 0);
  return value;
}

}  // namespace

PixelGrid read_ppm(std::istream& in) {
  char magic[2] = {};
  if (!in.read(magic, 2) || magic[0] != 'P' || magic[1] != '6') {
    throw ParseError("not a binary PPM (P6) file", 0);
  }
  const long width = read_header_int(in);
  const long height = read_header_int(in);
  const long maxval = read_header_int(in);
  if (width <= 0 || height <= 0) throw ParseError("PPM dimensions must be positive", 0);
  if (maxval != 255) throw ParseError("only maxval 255 PPM files are supported", 0);
  if (!std::isspace(in.get())) throw ParseError("malformed PPM header", 0);

  const auto count = static_cast<std::size_t>(width) * static_cast<std::size_t>(height);
  std::vector<unsigned char> raw(count * 3);
  if (!in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()))) {
    throw ParseError("truncated PPM pixel data", 0);
  }
  std::vector<Rgb> pixels(count);
  for (std::size_t i = 0; i < count; ++i) pixels[i] = {raw[3 * i], raw[3 * i + 1], raw[3 * i + 2]};
  return PixelGrid(static_cast<std::size_t>(width), static_cast<std::size_t>(height),
                   std::move(pixels));
}

PixelGrid read_ppm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  return read_ppm(in);
}

void write_ppm(std::ostream& out, const PixelGrid& img) {
  out << "P6\n" << img.width() << ' ' << img.height() << "\n255\n";
  for (const Rgb& p : img.pixels()) {
    const char bytes[3] = {static_cast<char>(p.r), static_cast<char>(p.g), static_cast<char>(p.b)};
    out.write(bytes, 3);
  }
}

}  // namespace emoinf
