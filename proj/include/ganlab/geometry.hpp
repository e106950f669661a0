#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <utility>
#include <vector>

#include "ganlab/rng.hpp"

// Synthetic rectangle images: rendering, component-based rectangle counting
// and the paired dataset construction (3-rectangle bases, two 2-rectangle
// siblings each).
namespace ganlab::geometry {

inline constexpr int kImageSize = 32;
inline constexpr int kRectSize = 8;
inline constexpr double kBinarizeThreshold = 0.5;

struct BinaryImage {
  int width = 0;
  int height = 0;
  std::vector<double> pixels;  // row-major, values in [0, 1]

  BinaryImage() = default;
  BinaryImage(int w, int h, double fill = 0.0)
      : width(w), height(h), pixels(static_cast<std::size_t>(w) * h, fill) {
    if (w < 1 || h < 1) throw std::invalid_argument("BinaryImage: dimensions must be positive");
  }

  double& at(int x, int y) { return pixels[static_cast<std::size_t>(y) * width + x]; }
  double at(int x, int y) const { return pixels[static_cast<std::size_t>(y) * width + x]; }
  int pixel_count() const { return width * height; }

  bool is_binary() const {
    for (double p : pixels)
      if (p != 0.0 && p != 1.0) return false;
    return true;
  }
};

inline double l2_distance(const BinaryImage& a, const BinaryImage& b) {
  if (a.width != b.width || a.height != b.height)
    throw std::invalid_argument("l2_distance: image dimensions differ");
  double acc = 0.0;
  for (std::size_t i = 0; i < a.pixels.size(); ++i) {
    const double d = a.pixels[i] - b.pixels[i];
    acc += d * d;
  }
  return std::sqrt(acc);
}

struct RectSpec {
  int x = 0;
  int y = 0;
  int w = kRectSize;
  int h = kRectSize;
};

inline bool in_bounds(const RectSpec& r, int width, int height) {
  return r.x >= 0 && r.y >= 0 && r.w > 0 && r.h > 0 && r.x + r.w <= width && r.y + r.h <= height;
}

struct GeometryDataset {
  std::vector<BinaryImage> images;
  int target_count = 2;
  std::vector<std::pair<int, int>> sibling_pairs;  // index pairs sharing a base image

  std::size_t size() const { return images.size(); }
};

inline BinaryImage render(const std::vector<RectSpec>& specs, int width = kImageSize,
                          int height = kImageSize) {
  BinaryImage img(width, height, 0.0);
  for (const auto& r : specs) {
    if (!in_bounds(r, width, height))
      throw std::invalid_argument("render: rectangle out of image bounds");
    for (int y = r.y; y < r.y + r.h; ++y)
      for (int x = r.x; x < r.x + r.w; ++x) img.at(x, y) = 1.0;
  }
  return img;
}

struct CountResult {
  int count = 0;
  bool clean = true;
};

// Binarizes at 0.5 (strictly greater is foreground), labels 4-connected
// components, and counts those whose bounding box is exactly rect_w x rect_h
// and fully filled. clean is true iff every foreground pixel lies in such a
// component; an image "has exactly k rectangles" iff count == k and clean.
inline CountResult count_rectangles(const BinaryImage& img, int rect_w = kRectSize,
                                    int rect_h = kRectSize) {
  const int w = img.width, h = img.height;
  std::vector<std::uint8_t> fg(img.pixels.size());
  for (std::size_t i = 0; i < img.pixels.size(); ++i)
    fg[i] = img.pixels[i] > kBinarizeThreshold ? 1 : 0;

  CountResult result;
  std::vector<int> stack;
  for (int start = 0; start < w * h; ++start) {
    if (!fg[start]) continue;
    // flood fill one component, tracking its bounding box and area
    int min_x = w, max_x = -1, min_y = h, max_y = -1, area = 0;
    stack.assign(1, start);
    fg[start] = 0;
    while (!stack.empty()) {
      const int p = stack.back();
      stack.pop_back();
      const int x = p % w, y = p / w;
      min_x = std::min(min_x, x);
      max_x = std::max(max_x, x);
      min_y = std::min(min_y, y);
      max_y = std::max(max_y, y);
      ++area;
      if (x > 0 && fg[p - 1]) {
        fg[p - 1] = 0;
        stack.push_back(p - 1);
      }
      if (x + 1 < w && fg[p + 1]) {
        fg[p + 1] = 0;
        stack.push_back(p + 1);
      }
      if (y > 0 && fg[p - w]) {
        fg[p - w] = 0;
        stack.push_back(p - w);
      }
      if (y + 1 < h && fg[p + w]) {
        fg[p + w] = 0;
        stack.push_back(p + w);
      }
    }
    const bool ok = (max_x - min_x + 1 == rect_w) && (max_y - min_y + 1 == rect_h) &&
                    (area == rect_w * rect_h);
    if (ok)
      ++result.count;
    else
      result.clean = false;
  }
  return result;
}

inline bool has_exactly(const BinaryImage& img, int k, int rect_w = kRectSize,
                        int rect_h = kRectSize) {
  const auto r = count_rectangles(img, rect_w, rect_h);
  return r.count == k && r.clean;
}

// Draws k rectangle placements with pairwise gap >= 1 pixel (no touching,
// diagonal contact included) by whole-set rejection sampling.
inline std::vector<RectSpec> sample_nonadjacent_rects(int k, rng::Stream& stream,
                                                      int width = kImageSize,
                                                      int height = kImageSize,
                                                      int rect_w = kRectSize,
                                                      int rect_h = kRectSize,
                                                      int max_tries = 10000) {
  if (k < 0) throw std::invalid_argument("sample_nonadjacent_rects: k must be >= 0");
  const int x_range = width - rect_w + 1;
  const int y_range = height - rect_h + 1;
  if (x_range < 1 || y_range < 1)
    throw std::invalid_argument("sample_nonadjacent_rects: rectangle does not fit the image");
  const auto separated = [&](const RectSpec& a, const RectSpec& b) {
    return std::abs(a.x - b.x) > rect_w || std::abs(a.y - b.y) > rect_h;
  };
  for (int attempt = 0; attempt < max_tries; ++attempt) {
    std::vector<RectSpec> specs(k);
    for (auto& r : specs) {
      r.x = static_cast<int>(stream.below(static_cast<std::uint64_t>(x_range)));
      r.y = static_cast<int>(stream.below(static_cast<std::uint64_t>(y_range)));
      r.w = rect_w;
      r.h = rect_h;
    }
    bool ok = true;
    for (int i = 0; i < k && ok; ++i)
      for (int j = i + 1; j < k; ++j)
        if (!separated(specs[i], specs[j])) {
          ok = false;
          break;
        }
    if (ok) return specs;
  }
  throw std::runtime_error("sample_nonadjacent_rects: retry cap exhausted");
}

// Builds 2 * n_base images: each base image holds three mutually separated
// rectangles; two siblings are derived from it by removing a different
// rectangle each. The pixel-wise OR of a sibling pair recovers the 3-rect
// base; the AND leaves the single shared rectangle.
inline GeometryDataset generate_paired(int n_base, std::uint64_t seed) {
  if (n_base < 1) throw std::invalid_argument("generate_paired: n_base must be >= 1");
  GeometryDataset ds;
  ds.target_count = 2;
  ds.images.reserve(static_cast<std::size_t>(n_base) * 2);
  ds.sibling_pairs.reserve(n_base);
  for (int b = 0; b < n_base; ++b) {
    rng::Stream stream(rng::derive_seed(seed, static_cast<std::uint64_t>(b)));
    const auto rects = sample_nonadjacent_rects(3, stream);
    const int drop_a = static_cast<int>(stream.below(3));
    const int other = static_cast<int>(stream.below(2));
    int remaining[2], r = 0;
    for (int i = 0; i < 3; ++i)
      if (i != drop_a) remaining[r++] = i;
    const int drop_b = remaining[other];
    for (int drop : {drop_a, drop_b}) {
      std::vector<RectSpec> kept;
      for (int i = 0; i < 3; ++i)
        if (i != drop) kept.push_back(rects[i]);
      ds.images.push_back(render(kept));
    }
    ds.sibling_pairs.emplace_back(2 * b, 2 * b + 1);
  }
  return ds;
}

// n images with exactly rect_count separated rectangles each, no sibling
// structure (used e.g. for the two-image toy dataset).
inline GeometryDataset generate_plain(int n_images, int rect_count, std::uint64_t seed) {
  if (n_images < 1) throw std::invalid_argument("generate_plain: n_images must be >= 1");
  if (rect_count < 0) throw std::invalid_argument("generate_plain: rect_count must be >= 0");
  GeometryDataset ds;
  ds.target_count = rect_count;
  ds.images.reserve(n_images);
  for (int i = 0; i < n_images; ++i) {
    rng::Stream stream(rng::derive_seed(seed, static_cast<std::uint64_t>(i)));
    ds.images.push_back(render(sample_nonadjacent_rects(rect_count, stream)));
  }
  return ds;
}

struct NearestNeighbor {
  int index = -1;
  double distance = 0.0;
};

// Index of the training image closest in Euclidean distance over raw pixel
// values; ties break toward the lowest index.
inline NearestNeighbor nearest_neighbor(const BinaryImage& sample, const GeometryDataset& dataset) {
  if (dataset.images.empty()) throw std::invalid_argument("nearest_neighbor: empty dataset");
  NearestNeighbor best{0, l2_distance(sample, dataset.images[0])};
  for (std::size_t i = 1; i < dataset.images.size(); ++i) {
    const double d = l2_distance(sample, dataset.images[i]);
    if (d < best.distance) best = {static_cast<int>(i), d};
  }
  return best;
}

}  // namespace ganlab::geometry
