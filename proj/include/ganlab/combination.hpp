#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "ganlab/geometry.hpp"
#include "ganlab/net.hpp"
#include "ganlab/rng.hpp"

// Pixel-wise combination operators, the combination negative-set builder and
// the Lipschitz margin verifier for convex mixtures of training samples.
namespace ganlab::combination {

using geometry::BinaryImage;

enum class CombOp { Average, And, Or };

inline const char* to_string(CombOp op) {
  switch (op) {
    case CombOp::Average: return "average";
    case CombOp::And: return "and";
    case CombOp::Or: return "or";
  }
  throw std::logic_error("CombOp: unknown value");
}

inline CombOp parse_comb_op(const std::string& s) {
  if (s == "average") return CombOp::Average;
  if (s == "and") return CombOp::And;
  if (s == "or") return CombOp::Or;
  throw std::invalid_argument("unknown combination op: " + s);
}

struct CombDataset {
  std::vector<BinaryImage> images;
  CombOp op = CombOp::Average;
  std::vector<std::pair<int, int>> source_pairs;  // indices into the origin dataset, i < j
};

// Average is the per-pixel mean of the raw values; And/Or require binary
// inputs and take the per-pixel min/max.
inline BinaryImage combine(const BinaryImage& x1, const BinaryImage& x2, CombOp op) {
  if (x1.width != x2.width || x1.height != x2.height)
    throw std::invalid_argument("combine: image dimensions differ");
  if (op != CombOp::Average && (!x1.is_binary() || !x2.is_binary()))
    throw std::invalid_argument("combine: and/or require binary inputs");
  BinaryImage out(x1.width, x1.height);
  for (std::size_t i = 0; i < out.pixels.size(); ++i) {
    switch (op) {
      case CombOp::Average: out.pixels[i] = 0.5 * (x1.pixels[i] + x2.pixels[i]); break;
      case CombOp::And: out.pixels[i] = std::min(x1.pixels[i], x2.pixels[i]); break;
      case CombOp::Or: out.pixels[i] = std::max(x1.pixels[i], x2.pixels[i]); break;
    }
  }
  return out;
}

namespace detail {

inline std::uint64_t pair_count(std::uint64_t n) { return n * (n - 1) / 2; }

// Linear index of the unordered pair (i, j), i < j, ordered by i then j.
inline std::uint64_t pair_to_index(std::uint64_t i, std::uint64_t j, std::uint64_t n) {
  return i * n - i * (i + 1) / 2 + (j - i - 1);
}

inline std::pair<int, int> pair_from_index(std::uint64_t k, std::uint64_t n) {
  // float guess for the row, then exact correction
  double nd = static_cast<double>(n);
  double guess = nd - 0.5 - std::sqrt(std::max(0.0, (nd - 0.5) * (nd - 0.5) - 2.0 * static_cast<double>(k)));
  auto i = static_cast<std::int64_t>(guess);
  i = std::clamp<std::int64_t>(i, 0, static_cast<std::int64_t>(n) - 2);
  while (i > 0 && pair_to_index(i, i + 1, n) > k) --i;
  while (pair_to_index(i + 1, i + 2, n) <= k && i + 2 < static_cast<std::int64_t>(n)) ++i;
  const std::uint64_t j = i + 1 + (k - pair_to_index(i, i + 1, n));
  return {static_cast<int>(i), static_cast<int>(j)};
}

}  // namespace detail

// Enumerates all unordered pairs i < j; when the pair count exceeds max_size,
// draws max_size pairs uniformly without replacement (seeded), keeping the
// result ordered by linear pair index.
inline CombDataset build_dcom(const std::vector<BinaryImage>& images, CombOp op,
                              std::uint64_t max_size, std::uint64_t seed) {
  const std::uint64_t n = images.size();
  if (n < 2) throw std::invalid_argument("build_dcom: need at least 2 images");
  if (max_size == 0) throw std::invalid_argument("build_dcom: max_size must be positive");
  const std::uint64_t total = detail::pair_count(n);
  std::vector<std::uint64_t> picks;
  if (total <= max_size) {
    picks.resize(total);
    for (std::uint64_t k = 0; k < total; ++k) picks[k] = k;
  } else {
    rng::Stream stream(seed);
    picks = stream.sample_without_replacement(total, max_size);
  }
  CombDataset out;
  out.op = op;
  out.images.reserve(picks.size());
  out.source_pairs.reserve(picks.size());
  for (std::uint64_t k : picks) {
    const auto [i, j] = detail::pair_from_index(k, n);
    out.images.push_back(combine(images[i], images[j], op));
    out.source_pairs.emplace_back(i, j);
  }
  return out;
}

inline CombDataset build_dcom(const geometry::GeometryDataset& dataset, CombOp op,
                              std::uint64_t max_size, std::uint64_t seed) {
  return build_dcom(dataset.images, op, max_size, seed);
}

// Per-pixel lambda * x1 + (1 - lambda) * x2, lambda in [0, 1].
inline BinaryImage convex_mix(const BinaryImage& x1, const BinaryImage& x2, double lambda) {
  if (x1.width != x2.width || x1.height != x2.height)
    throw std::invalid_argument("convex_mix: image dimensions differ");
  if (!(lambda >= 0.0 && lambda <= 1.0))
    throw std::invalid_argument("convex_mix: lambda must lie in [0, 1]");
  BinaryImage out(x1.width, x1.height);
  for (std::size_t i = 0; i < out.pixels.size(); ++i)
    out.pixels[i] =
        std::clamp(lambda * x1.pixels[i] + (1.0 - lambda) * x2.pixels[i], 0.0, 1.0);
  return out;
}

namespace detail {

// Largest singular value by power iteration on A^T A, deterministic start.
inline double spectral_norm(const tinygan::Matrix& a) {
  if (a.rows == 0 || a.cols == 0) return 0.0;
  std::vector<double> v(a.cols), av(a.rows);
  rng::Stream start(0x5eedULL);
  double norm = 0.0;
  for (double& x : v) {
    x = start.gaussian();
    norm += x * x;
  }
  norm = std::sqrt(norm);
  for (double& x : v) x /= norm;

  double sigma = 0.0;
  for (int iter = 0; iter < 1000; ++iter) {
    // av = A v
    for (int r = 0; r < a.rows; ++r) {
      const double* ar = a.row(r);
      double acc = 0.0;
      for (int c = 0; c < a.cols; ++c) acc += ar[c] * v[c];
      av[r] = acc;
    }
    double s = 0.0;
    for (double x : av) s += x * x;
    s = std::sqrt(s);
    if (s == 0.0) return 0.0;
    // v = A^T av, renormalized
    std::fill(v.begin(), v.end(), 0.0);
    for (int r = 0; r < a.rows; ++r) {
      const double* ar = a.row(r);
      const double f = av[r];
      for (int c = 0; c < a.cols; ++c) v[c] += f * ar[c];
    }
    double vn = 0.0;
    for (double x : v) vn += x * x;
    vn = std::sqrt(vn);
    for (double& x : v) x /= vn;
    if (std::abs(s - sigma) <= 1e-14 * std::max(s, 1.0)) return s;
    sigma = s;
  }
  return sigma;
}

}  // namespace detail

// Certified global Lipschitz upper bound for the network's pre-output score:
// the product of per-layer spectral norms, valid because every supported
// activation is 1-Lipschitz.
inline double lipschitz_upper_bound(const tinygan::DenseNet& net) {
  if (net.layers.empty()) throw std::invalid_argument("lipschitz_upper_bound: empty network");
  for (std::size_t l = 0; l < net.layers.size(); ++l) {
    if (!net.activation_of(l).unit_lipschitz())
      throw std::invalid_argument("lipschitz_upper_bound: activation is not 1-Lipschitz");
  }
  double bound = 1.0;
  for (const auto& layer : net.layers) bound *= detail::spectral_norm(layer.w);
  return bound;
}

struct MarginReport {
  double f_x1 = 0.0;
  double f_x2 = 0.0;
  double lambda = 0.0;
  double delta = 0.0;      // ||x1 - x2||_2
  double lipschitz = 0.0;  // the constant L used
  double bound = 0.0;      // max(f_x1 - L(1-lambda)delta, f_x2 - L lambda delta)
  double f_mix = 0.0;
  bool holds = false;
  bool positivity_condition = false;  // min(f_x1, f_x2) > L delta min(lambda, 1-lambda)
  bool mix_positive = false;
};

namespace detail {

inline double score_single(const tinygan::DenseNet& disc, const BinaryImage& x) {
  if (disc.output_dim() != 1)
    throw std::invalid_argument("check_margin: discriminator must emit a single score");
  tinygan::Matrix batch(1, static_cast<int>(x.pixels.size()));
  std::copy(x.pixels.begin(), x.pixels.end(), batch.data.begin());
  return tinygan::net_forward(disc, batch).output()(0, 0);
}

}  // namespace detail

// Evaluates the discriminator at x1, x2 and their convex mixture and checks
// the Lipschitz lower bound for the mixture score. With a certified L the
// bound always holds (up to a 1e-9 slack for arithmetic noise).
inline MarginReport check_margin(const tinygan::DenseNet& disc, const BinaryImage& x1,
                                 const BinaryImage& x2, double lambda, double lipschitz) {
  if (x1.width != x2.width || x1.height != x2.height)
    throw std::invalid_argument("check_margin: image dimensions differ");
  MarginReport rep;
  rep.lambda = lambda;
  rep.lipschitz = lipschitz;
  rep.f_x1 = detail::score_single(disc, x1);
  rep.f_x2 = detail::score_single(disc, x2);
  rep.delta = geometry::l2_distance(x1, x2);
  rep.f_mix = detail::score_single(disc, convex_mix(x1, x2, lambda));
  rep.bound = std::max(rep.f_x1 - lipschitz * (1.0 - lambda) * rep.delta,
                       rep.f_x2 - lipschitz * lambda * rep.delta);
  rep.holds = rep.f_mix >= rep.bound - 1e-9;
  const double margin = std::min(rep.f_x1, rep.f_x2);
  rep.positivity_condition = margin > lipschitz * rep.delta * std::min(lambda, 1.0 - lambda);
  rep.mix_positive = rep.f_mix > 0.0;
  return rep;
}

}  // namespace ganlab::combination
