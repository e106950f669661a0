#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <numeric>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "ganlab/combination.hpp"
#include "ganlab/geometry.hpp"
#include "ganlab/net.hpp"
#include "ganlab/rng.hpp"
#include "ganlab/util.hpp"

// Desk-scale GAN on rectangle images: dense generator/discriminator pairs
// trained under the vanilla, full-batch, sample-correction and combination-
// regularized regimes, with the metrics used to compare them.
namespace ganlab::tinygan {

using geometry::BinaryImage;
using geometry::GeometryDataset;

enum class Regime { Vanilla, FGD, SC, PCR, ScPcr };

inline const char* to_string(Regime r) {
  switch (r) {
    case Regime::Vanilla: return "vanilla";
    case Regime::FGD: return "fgd";
    case Regime::SC: return "sc";
    case Regime::PCR: return "pcr";
    case Regime::ScPcr: return "sc-pcr";
  }
  throw std::logic_error("Regime: unknown value");
}

inline Regime parse_regime(const std::string& s) {
  if (s == "vanilla") return Regime::Vanilla;
  if (s == "fgd") return Regime::FGD;
  if (s == "sc") return Regime::SC;
  if (s == "pcr") return Regime::PCR;
  if (s == "sc-pcr" || s == "sc_pcr") return Regime::ScPcr;
  throw std::invalid_argument("unknown regime: " + s);
}

inline bool uses_pcr(Regime r) { return r == Regime::PCR || r == Regime::ScPcr; }
inline bool uses_sc(Regime r) { return r == Regime::SC || r == Regime::ScPcr; }

// Latent prior: either n fixed codes sampled once from a standard Gaussian
// (drawn uniformly at training time) or a continuous standard Gaussian.
struct LatentPrior {
  enum class Kind { DiscreteUniform, Gaussian };

  Kind kind = Kind::Gaussian;
  int dim = 32;
  std::vector<std::vector<double>> codes;  // DiscreteUniform only

  static LatentPrior discrete_uniform(int support, int dim, std::uint64_t seed) {
    if (support < 1) throw std::invalid_argument("LatentPrior: support must be >= 1");
    if (dim < 1) throw std::invalid_argument("LatentPrior: dim must be >= 1");
    LatentPrior p;
    p.kind = Kind::DiscreteUniform;
    p.dim = dim;
    p.codes.resize(support);
    rng::Stream stream(seed);
    for (auto& code : p.codes) {
      code.resize(dim);
      for (double& v : code) v = stream.gaussian();
    }
    return p;
  }

  static LatentPrior gaussian(int dim) {
    if (dim < 1) throw std::invalid_argument("LatentPrior: dim must be >= 1");
    LatentPrior p;
    p.kind = Kind::Gaussian;
    p.dim = dim;
    return p;
  }

  int support() const { return static_cast<int>(codes.size()); }

  void sample_row(double* out, rng::Stream& stream) const {
    if (kind == Kind::DiscreteUniform) {
      const auto& code = codes[stream.below(codes.size())];
      std::copy(code.begin(), code.end(), out);
    } else {
      for (int i = 0; i < dim; ++i) out[i] = stream.gaussian();
    }
  }

  Matrix sample_batch(int n, rng::Stream& stream) const {
    Matrix z(n, dim);
    for (int i = 0; i < n; ++i) sample_row(z.row(i), stream);
    return z;
  }

  Matrix all_codes() const {
    if (kind != Kind::DiscreteUniform)
      throw std::logic_error("LatentPrior: all_codes requires a discrete prior");
    Matrix z(support(), dim);
    for (int i = 0; i < support(); ++i)
      std::copy(codes[i].begin(), codes[i].end(), z.row(i));
    return z;
  }
};

struct ScMode {
  enum class Kind { CountFilter, DifFilter };

  Kind kind = Kind::CountFilter;
  int target_count = 2;     // CountFilter: rectangle count marking a fake as realistic
  double threshold = 0.1;   // DifFilter: fakes with dif below this are realistic
};

struct GanConfig {
  Regime regime = Regime::Vanilla;
  int batchsize = 16;
  bool full_batch = false;  // implied by the FGD regime
  int steps = 1000;         // generator updates
  int d_steps_per_g = 1;
  OptimizerSpec optimizer;
  std::optional<ScMode> sc_mode;
  std::optional<combination::CombOp> pcr_op;
  LatentPrior::Kind prior_kind = LatentPrior::Kind::DiscreteUniform;
  int latent_dim = 32;
  std::vector<int> gen_hidden = {256, 256};
  std::vector<int> disc_hidden = {256, 256};
  std::uint64_t seed = 0;
  int log_stride = 10;
  int n_probe = 4;
  int eval_fakes = 256;  // generated samples per metric log (full set on the final log)
  int eval_reals = 256;  // dataset rows per score_real log
  int eval_dif = 32;     // generated samples entering mean_dif
  int dcom_pool_factor = 8;
  int sc_retry_cap = 8;

  bool effective_full_batch() const { return full_batch || regime == Regime::FGD; }

  std::vector<std::string> violations(const GeometryDataset& dataset) const {
    std::vector<std::string> out;
    const int n = static_cast<int>(dataset.size());
    if (n < 2) out.push_back("dataset: need at least 2 images");
    if (steps < 0) out.push_back("steps: must be >= 0");
    if (d_steps_per_g < 1) out.push_back("d_steps_per_g: must be >= 1");
    if (!effective_full_batch() && (batchsize < 1 || batchsize > n))
      out.push_back("batchsize: must lie in [1, dataset size]");
    if (uses_sc(regime) && !sc_mode) out.push_back("sc_mode: required for SC regimes");
    if (!uses_sc(regime) && sc_mode) out.push_back("sc_mode: only valid for SC regimes");
    if (uses_pcr(regime) && !pcr_op) out.push_back("pcr_op: required for PCR regimes");
    if (!uses_pcr(regime) && pcr_op) out.push_back("pcr_op: only valid for PCR regimes");
    if (latent_dim < 1) out.push_back("latent_dim: must be >= 1");
    if (log_stride < 1) out.push_back("log_stride: must be >= 1");
    if (n_probe < 1) out.push_back("n_probe: must be >= 1");
    if (eval_fakes < 1) out.push_back("eval_fakes: must be >= 1");
    if (eval_reals < 1) out.push_back("eval_reals: must be >= 1");
    if (eval_dif < 1) out.push_back("eval_dif: must be >= 1");
    if (dcom_pool_factor < 1) out.push_back("dcom_pool_factor: must be >= 1");
    if (sc_retry_cap < 1) out.push_back("sc_retry_cap: must be >= 1");
    for (int hsize : gen_hidden)
      if (hsize < 1) out.push_back("gen_hidden: sizes must be positive");
    for (int hsize : disc_hidden)
      if (hsize < 1) out.push_back("disc_hidden: sizes must be positive");
    return out;
  }
};

struct LogEntry {
  int step = 0;
  double d_loss = 0.0;
  double g_loss = 0.0;
  double grad_d = 0.0;
  double grad_g = 0.0;
  double score_real = 0.0;
  double score_fake = 0.0;
  double score_dcom = 0.0;
  double prop_correct = 0.0;
  double mean_dif = 0.0;
  std::vector<int> probe_labels;
  int probe_flips = 0;
};

struct TrainLog {
  std::vector<LogEntry> entries;
  std::vector<int> skipped_d_steps;  // generator steps where SC emptied the batch
  bool aborted = false;
  std::string abort_reason;

  double final_prop_correct() const {
    if (entries.empty()) throw std::logic_error("TrainLog: no entries");
    return entries.back().prop_correct;
  }
};

struct TrainResult {
  DenseNet gen;
  DenseNet disc;
  Optimizer gen_opt;
  Optimizer disc_opt;
  LatentPrior prior;
  std::vector<std::vector<double>> probe_codes;
  TrainLog log;
};

struct LossPair {
  double d_loss = 0.0;
  double g_loss = 0.0;
};

namespace detail {

inline double softplus(double x) { return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x))); }
inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

inline double mean_softplus_neg(const std::vector<double>& s) {
  double acc = 0.0;
  for (double v : s) acc += softplus(-v);
  return acc / static_cast<double>(s.size());
}

inline double mean_softplus(const std::vector<double>& s) {
  double acc = 0.0;
  for (double v : s) acc += softplus(v);
  return acc / static_cast<double>(s.size());
}

}  // namespace detail

// Discriminator and (non-saturating) generator losses from logit scores.
// Non-PCR: d = -[mean log sig(s_real) + mean log(1 - sig(s_fake))].
// PCR regimes split the negative term evenly between generated and
// combination batches. g = -mean log sig(s_fake).
inline LossPair gan_losses(const std::vector<double>& scores_real,
                           const std::vector<double>& scores_fake,
                           const std::vector<double>* scores_dcom, Regime regime) {
  if (scores_real.empty() || scores_fake.empty())
    throw std::invalid_argument("gan_losses: empty batch");
  const bool pcr = uses_pcr(regime);
  if (pcr && (scores_dcom == nullptr || scores_dcom->empty()))
    throw std::invalid_argument("gan_losses: PCR regimes require combination scores");
  if (!pcr && scores_dcom != nullptr)
    throw std::invalid_argument("gan_losses: combination scores given to a non-PCR regime");
  LossPair out;
  const double neg_fake = detail::mean_softplus(scores_fake);
  out.d_loss = detail::mean_softplus_neg(scores_real) +
               (pcr ? 0.5 * (neg_fake + detail::mean_softplus(*scores_dcom)) : neg_fake);
  out.g_loss = detail::mean_softplus_neg(scores_fake);
  return out;
}

// Normalized minimum L2 distance of a sample to the training set; the
// normalizer sqrt(P) is the diameter of the unit pixel hypercube.
inline double dif(const BinaryImage& sample, const GeometryDataset& dataset) {
  if (dataset.images.empty()) throw std::invalid_argument("dif: empty dataset");
  const auto nn = geometry::nearest_neighbor(sample, dataset);
  return nn.distance / std::sqrt(static_cast<double>(sample.pixel_count()));
}

namespace detail {

inline BinaryImage image_from_row(const double* row, int width, int height) {
  BinaryImage img(width, height);
  for (std::size_t i = 0; i < img.pixels.size(); ++i)
    img.pixels[i] = std::clamp(row[i], 0.0, 1.0);
  return img;
}

// Min L2 distance from a flat sample to the rows of a matrix, with early
// exit on the running minimum.
inline double min_l2_to_rows(const double* sample, const Matrix& rows) {
  double best = std::numeric_limits<double>::infinity();
  for (int r = 0; r < rows.rows; ++r) {
    const double* y = rows.row(r);
    double acc = 0.0;
    for (int i = 0; i < rows.cols; ++i) {
      const double d = sample[i] - y[i];
      acc += d * d;
      if (acc >= best) break;
    }
    best = std::min(best, acc);
  }
  return std::sqrt(best);
}

}  // namespace detail

// Loss value and discriminator parameter gradients for one update on the
// given batches (dcom is null outside the PCR regimes). The batches run
// through the network as one concatenated pass; the gradient decomposes over
// rows, so this matches the per-batch formulation exactly.
inline std::pair<LossPair, NetGradients> disc_loss_gradients(const DenseNet& disc,
                                                             const Matrix& reals,
                                                             const Matrix& fakes,
                                                             const Matrix* dcom, Regime regime) {
  if (reals.cols != fakes.cols || (dcom && dcom->cols != reals.cols))
    throw std::invalid_argument("disc_loss_gradients: batch widths differ");
  const int n_r = reals.rows, n_f = fakes.rows, n_c = dcom ? dcom->rows : 0;
  Matrix all(n_r + n_f + n_c, reals.cols);
  std::copy(reals.data.begin(), reals.data.end(), all.data.begin());
  std::copy(fakes.data.begin(), fakes.data.end(), all.data.begin() + reals.data.size());
  if (dcom)
    std::copy(dcom->data.begin(), dcom->data.end(),
              all.data.begin() + reals.data.size() + fakes.data.size());

  const auto fwd = net_forward(disc, all);
  std::vector<double> s_real(n_r), s_fake(n_f), s_dcom(n_c);
  for (int r = 0; r < n_r; ++r) s_real[r] = fwd.output()(r, 0);
  for (int r = 0; r < n_f; ++r) s_fake[r] = fwd.output()(n_r + r, 0);
  for (int r = 0; r < n_c; ++r) s_dcom[r] = fwd.output()(n_r + n_f + r, 0);
  const auto losses = gan_losses(s_real, s_fake, dcom ? &s_dcom : nullptr, regime);

  const double fake_scale = uses_pcr(regime) ? 0.5 : 1.0;
  Matrix d_out(n_r + n_f + n_c, 1);
  for (int r = 0; r < n_r; ++r) d_out(r, 0) = (detail::sigmoid(s_real[r]) - 1.0) / n_r;
  for (int r = 0; r < n_f; ++r)
    d_out(n_r + r, 0) = fake_scale * detail::sigmoid(s_fake[r]) / n_f;
  for (int r = 0; r < n_c; ++r)
    d_out(n_r + n_f + r, 0) = 0.5 * detail::sigmoid(s_dcom[r]) / n_c;
  return {losses, net_backward(disc, fwd, d_out)};
}

struct GenUpdate {
  double g_loss = 0.0;
  NetGradients grads;
};

// Non-saturating generator loss and its gradients through the (frozen)
// discriminator for a latent batch.
inline GenUpdate gen_loss_gradients(const DenseNet& gen, const DenseNet& disc, const Matrix& z) {
  const auto g_fwd = net_forward(gen, z);
  const auto d_fwd = net_forward(disc, g_fwd.output());
  const int n = d_fwd.output().rows;
  GenUpdate out;
  Matrix d_out(n, 1);
  for (int i = 0; i < n; ++i) {
    const double s = d_fwd.output()(i, 0);
    out.g_loss += detail::softplus(-s);
    d_out(i, 0) = (detail::sigmoid(s) - 1.0) / n;
  }
  out.g_loss /= n;
  const auto through_disc = net_backward(disc, d_fwd, d_out);
  out.grads = net_backward(gen, g_fwd, through_disc.input);
  return out;
}

struct FilterResult {
  Matrix batch;
  int n_removed = 0;   // realistic fakes taken out of the batch
  int n_replaced = 0;  // slots refilled with a fresh non-realistic sample
  bool skipped = false;
};

// Removes realistic fakes from the negative batch. Each removed slot is
// refilled by drawing fresh generator samples (up to retry_cap) and keeping
// the first non-realistic draw; slots with no such draw are dropped. When
// every slot drops, the caller must skip the discriminator update.
inline FilterResult sc_filter(const Matrix& fakes, const GeometryDataset& dataset,
                              const ScMode& mode,
                              const std::function<std::vector<double>()>& draw_fresh,
                              int retry_cap = 8) {
  if (fakes.rows == 0) throw std::invalid_argument("sc_filter: empty batch");
  if (dataset.images.empty()) throw std::invalid_argument("sc_filter: empty dataset");
  const int width = dataset.images[0].width;
  const int height = dataset.images[0].height;
  if (width * height != fakes.cols)
    throw std::invalid_argument("sc_filter: fake width does not match dataset images");

  Matrix train_rows;
  if (mode.kind == ScMode::Kind::DifFilter) {
    train_rows = Matrix(static_cast<int>(dataset.size()), fakes.cols);
    for (std::size_t i = 0; i < dataset.size(); ++i)
      std::copy(dataset.images[i].pixels.begin(), dataset.images[i].pixels.end(),
                train_rows.row(static_cast<int>(i)));
  }
  const double norm = std::sqrt(static_cast<double>(fakes.cols));
  const auto realistic = [&](const double* row) {
    if (mode.kind == ScMode::Kind::CountFilter) {
      const auto img = detail::image_from_row(row, width, height);
      return geometry::has_exactly(img, mode.target_count);
    }
    return detail::min_l2_to_rows(row, train_rows) / norm < mode.threshold;
  };

  FilterResult result;
  std::vector<std::vector<double>> kept;
  kept.reserve(fakes.rows);
  for (int r = 0; r < fakes.rows; ++r) {
    const double* row = fakes.row(r);
    if (!realistic(row)) {
      kept.emplace_back(row, row + fakes.cols);
      continue;
    }
    ++result.n_removed;
    for (int attempt = 0; attempt < retry_cap; ++attempt) {
      auto fresh = draw_fresh();
      if (static_cast<int>(fresh.size()) != fakes.cols)
        throw std::invalid_argument("sc_filter: fresh sample width mismatch");
      if (!realistic(fresh.data())) {
        kept.push_back(std::move(fresh));
        ++result.n_replaced;
        break;
      }
    }
  }
  if (kept.empty()) {
    result.skipped = true;
    return result;
  }
  result.batch = Matrix(static_cast<int>(kept.size()), fakes.cols);
  for (std::size_t r = 0; r < kept.size(); ++r)
    std::copy(kept[r].begin(), kept[r].end(), result.batch.row(static_cast<int>(r)));
  return result;
}

// Fraction of generated samples whose thresholded image has exactly
// target_count rectangles. Discrete priors with support <= n_samples are
// evaluated one pass over the codes instead of sampling.
inline double prop_correct(const DenseNet& gen, const LatentPrior& prior, int n_samples,
                           int target_count, rng::Stream& stream, int width = geometry::kImageSize,
                           int height = geometry::kImageSize, int rect_w = geometry::kRectSize,
                           int rect_h = geometry::kRectSize) {
  if (n_samples < 1) throw std::invalid_argument("prop_correct: n_samples must be >= 1");
  Matrix z;
  if (prior.kind == LatentPrior::Kind::DiscreteUniform && prior.support() <= n_samples)
    z = prior.all_codes();
  else
    z = prior.sample_batch(n_samples, stream);
  const auto fwd = net_forward(gen, z);
  const Matrix& out = fwd.output();
  int good = 0;
  for (int r = 0; r < out.rows; ++r) {
    const auto img = detail::image_from_row(out.row(r), width, height);
    const auto c = geometry::count_rectangles(img, rect_w, rect_h);
    if (c.count == target_count && c.clean) ++good;
  }
  return static_cast<double>(good) / out.rows;
}

// Mean discriminator logits over a real and a combination batch.
inline std::pair<double, double> score_combos(const DenseNet& disc, const Matrix& real_batch,
                                              const Matrix& dcom_batch) {
  if (real_batch.rows == 0 || dcom_batch.rows == 0)
    throw std::invalid_argument("score_combos: empty batch");
  if (disc.output_dim() != 1)
    throw std::invalid_argument("score_combos: discriminator must emit a single score");
  const auto mean_score = [&](const Matrix& batch) {
    const auto fwd = net_forward(disc, batch);
    const Matrix& s = fwd.output();
    double acc = 0.0;
    for (int r = 0; r < s.rows; ++r) acc += s(r, 0);
    return acc / s.rows;
  };
  return {mean_score(real_batch), mean_score(dcom_batch)};
}

// Rectangle-count class of the image generated from each probe code;
// malformed images (count not clean) are labeled -1.
inline std::vector<int> probe_latents(const DenseNet& gen,
                                      const std::vector<std::vector<double>>& probe_codes,
                                      int width = geometry::kImageSize,
                                      int height = geometry::kImageSize,
                                      int rect_w = geometry::kRectSize,
                                      int rect_h = geometry::kRectSize) {
  std::vector<int> labels;
  labels.reserve(probe_codes.size());
  if (probe_codes.empty()) return labels;
  Matrix z(static_cast<int>(probe_codes.size()), static_cast<int>(probe_codes[0].size()));
  for (std::size_t i = 0; i < probe_codes.size(); ++i)
    std::copy(probe_codes[i].begin(), probe_codes[i].end(), z.row(static_cast<int>(i)));
  const auto fwd = net_forward(gen, z);
  const Matrix& out = fwd.output();
  for (int r = 0; r < out.rows; ++r) {
    const auto img = detail::image_from_row(out.row(r), width, height);
    const auto c = geometry::count_rectangles(img, rect_w, rect_h);
    labels.push_back(c.clean ? c.count : -1);
  }
  return labels;
}

struct ModeCollapseReport {
  std::vector<double> nearest_generated;  // per training image, normalized L2
  double coverage = 0.0;                  // fraction below 0.1
};

// For each training image, the minimum normalized distance to any of n_gen
// generated samples. A discrete prior has at most support() distinct
// outputs, so each code is evaluated once.
inline ModeCollapseReport mode_collapse_report(const DenseNet& gen, const LatentPrior& prior,
                                               const GeometryDataset& dataset, int n_gen,
                                               rng::Stream& stream) {
  const int n = static_cast<int>(dataset.size());
  if (n == 0) throw std::invalid_argument("mode_collapse_report: empty dataset");
  if (n_gen < n) throw std::invalid_argument("mode_collapse_report: n_gen must be >= dataset size");
  const int pix = dataset.images[0].pixel_count();
  const double norm = std::sqrt(static_cast<double>(pix));

  ModeCollapseReport report;
  report.nearest_generated.assign(n, std::numeric_limits<double>::infinity());

  const auto absorb = [&](const Matrix& generated) {
    for (int g = 0; g < generated.rows; ++g) {
      const double* row = generated.row(g);
      for (int i = 0; i < n; ++i) {
        const auto& img = dataset.images[i];
        double acc = 0.0;
        const double cap = report.nearest_generated[i];
        for (int p = 0; p < pix; ++p) {
          const double d = std::clamp(row[p], 0.0, 1.0) - img.pixels[p];
          acc += d * d;
          if (acc >= cap * cap * pix) break;  // cannot improve this image
        }
        const double dist = std::sqrt(acc) / norm;
        if (dist < report.nearest_generated[i]) report.nearest_generated[i] = dist;
      }
    }
  };

  if (prior.kind == LatentPrior::Kind::DiscreteUniform) {
    absorb(net_forward(gen, prior.all_codes()).output());
  } else {
    constexpr int kChunk = 256;
    for (int done = 0; done < n_gen; done += kChunk) {
      const int take = std::min(kChunk, n_gen - done);
      absorb(net_forward(gen, prior.sample_batch(take, stream)).output());
    }
  }
  int covered = 0;
  for (double d : report.nearest_generated)
    if (d < 0.1) ++covered;
  report.coverage = static_cast<double>(covered) / n;
  return report;
}

namespace detail {

// Substream labels under the master training seed.
enum : std::uint64_t {
  kSeedCodes = 1,
  kSeedProbe = 2,
  kSeedInit = 3,
  kSeedTrain = 4,
  kSeedDiag = 5,
  kSeedEval = 6,
  kSeedPool = 7,
};

inline std::vector<double> column(const Matrix& m) {
  std::vector<double> out(m.rows);
  for (int r = 0; r < m.rows; ++r) out[r] = m(r, 0);
  return out;
}

inline Matrix rows_subset(const Matrix& src, const std::vector<std::uint64_t>& idx) {
  Matrix out(static_cast<int>(idx.size()), src.cols);
  for (std::size_t r = 0; r < idx.size(); ++r)
    std::copy(src.row(static_cast<int>(idx[r])),
              src.row(static_cast<int>(idx[r])) + src.cols, out.row(static_cast<int>(r)));
  return out;
}

}  // namespace detail

// Optional per-log callback; probe_images holds one generated image per row.
using LogCallback = std::function<void(const LogEntry&, const Matrix& probe_images)>;

// Alternates d_steps_per_g discriminator updates with one generator update
// for config.steps generator updates. Fully deterministic per seed: all
// randomness flows through substreams derived from config.seed.
inline TrainResult train(const GanConfig& config, const GeometryDataset& dataset,
                         const LogCallback& on_log = nullptr) {
  const auto problems = config.violations(dataset);
  if (!problems.empty())
    throw std::invalid_argument("GanConfig: " + util::join(problems, "; "));
  const int n = static_cast<int>(dataset.size());
  const int width = dataset.images[0].width;
  const int height = dataset.images[0].height;
  const int pix = width * height;
  for (const auto& img : dataset.images)
    if (img.width != width || img.height != height)
      throw std::invalid_argument("train: dataset images must share dimensions");

  Matrix real_all(n, pix);
  for (int i = 0; i < n; ++i)
    std::copy(dataset.images[i].pixels.begin(), dataset.images[i].pixels.end(), real_all.row(i));

  TrainResult result;
  result.prior = config.prior_kind == LatentPrior::Kind::DiscreteUniform
                     ? LatentPrior::discrete_uniform(n, config.latent_dim,
                                                     rng::derive_seed(config.seed, detail::kSeedCodes))
                     : LatentPrior::gaussian(config.latent_dim);
  const LatentPrior& prior = result.prior;

  // probe codes are fixed before training starts
  if (prior.kind == LatentPrior::Kind::DiscreteUniform) {
    const int k = std::min(config.n_probe, prior.support());
    result.probe_codes.assign(prior.codes.begin(), prior.codes.begin() + k);
  } else {
    rng::Stream probe_stream(rng::derive_seed(config.seed, detail::kSeedProbe));
    result.probe_codes.resize(config.n_probe);
    for (auto& code : result.probe_codes) {
      code.resize(config.latent_dim);
      for (double& v : code) v = probe_stream.gaussian();
    }
  }

  rng::Stream init_stream(rng::derive_seed(config.seed, detail::kSeedInit));
  std::vector<int> g_sizes{config.latent_dim};
  g_sizes.insert(g_sizes.end(), config.gen_hidden.begin(), config.gen_hidden.end());
  g_sizes.push_back(pix);
  std::vector<int> d_sizes{pix};
  d_sizes.insert(d_sizes.end(), config.disc_hidden.begin(), config.disc_hidden.end());
  d_sizes.push_back(1);
  result.gen = DenseNet::create(g_sizes, Activation::leaky_relu(0.2), Activation::sigmoid(),
                                init_stream);
  result.disc = DenseNet::create(d_sizes, Activation::leaky_relu(0.2), Activation::identity(),
                                 init_stream);
  result.gen_opt = Optimizer(config.optimizer, result.gen);
  result.disc_opt = Optimizer(config.optimizer, result.disc);
  DenseNet& gen = result.gen;
  DenseNet& disc = result.disc;

  rng::Stream train_stream(rng::derive_seed(config.seed, detail::kSeedTrain));

  // fixed diagnostic combination set (and + or), scored at every log point
  Matrix diag;
  {
    const auto diag_and = combination::build_dcom(dataset.images, combination::CombOp::And, 64,
                                                  rng::derive_seed(config.seed, detail::kSeedDiag));
    const auto diag_or = combination::build_dcom(dataset.images, combination::CombOp::Or, 64,
                                                 rng::derive_seed(config.seed, detail::kSeedDiag) + 1);
    diag = Matrix(static_cast<int>(diag_and.images.size() + diag_or.images.size()), pix);
    int r = 0;
    for (const auto* set : {&diag_and, &diag_or})
      for (const auto& img : set->images)
        std::copy(img.pixels.begin(), img.pixels.end(), diag.row(r++));
  }

  const bool full = config.effective_full_batch();
  const int real_batch_n = full ? n : config.batchsize;
  const int fake_batch_n =
      full ? (prior.kind == LatentPrior::Kind::DiscreteUniform ? prior.support() : n)
           : config.batchsize;

  // PCR pair pool, refreshed once per pass over the dataset
  Matrix pool;
  const int pool_refresh_every = std::max(1, n / std::max(1, fake_batch_n));
  int d_step_counter = 0;
  std::uint64_t pool_epoch = 0;
  const auto refresh_pool = [&] {
    const auto built = combination::build_dcom(
        dataset.images, *config.pcr_op,
        static_cast<std::uint64_t>(config.dcom_pool_factor) * fake_batch_n,
        rng::derive_seed(rng::derive_seed(config.seed, detail::kSeedPool), pool_epoch));
    ++pool_epoch;
    pool = Matrix(static_cast<int>(built.images.size()), pix);
    for (std::size_t i = 0; i < built.images.size(); ++i)
      std::copy(built.images[i].pixels.begin(), built.images[i].pixels.end(),
                pool.row(static_cast<int>(i)));
  };
  if (uses_pcr(config.regime)) refresh_pool();

  const auto draw_latents = [&](int k, rng::Stream& stream) { return prior.sample_batch(k, stream); };
  const auto full_or_sampled_latents = [&](rng::Stream& stream) {
    if (full && prior.kind == LatentPrior::Kind::DiscreteUniform) return prior.all_codes();
    return draw_latents(fake_batch_n, stream);
  };

  double last_d_loss = 0.0, last_g_loss = 0.0, last_grad_d = 0.0, last_grad_g = 0.0;

  const auto score_batch = [&](const Matrix& batch) { return detail::column(net_forward(disc, batch).output()); };

  // evaluation at a log point; the final log always evaluates the full sets
  std::vector<int> prev_probe_labels;
  const auto emit_log = [&](int step, bool final_eval) {
    rng::Stream eval_stream(
        rng::derive_seed(rng::derive_seed(config.seed, detail::kSeedEval), static_cast<std::uint64_t>(step)));
    LogEntry e;
    e.step = step;
    e.d_loss = last_d_loss;
    e.g_loss = last_g_loss;
    e.grad_d = last_grad_d;
    e.grad_g = last_grad_g;

    // generated evaluation batch
    Matrix z_eval;
    if (prior.kind == LatentPrior::Kind::DiscreteUniform) {
      if (final_eval || prior.support() <= config.eval_fakes)
        z_eval = prior.all_codes();
      else
        z_eval = detail::rows_subset(prior.all_codes(),
                                     eval_stream.sample_without_replacement(
                                         prior.support(), config.eval_fakes));
    } else {
      z_eval = prior.sample_batch(config.eval_fakes, eval_stream);
    }
    const Matrix fakes_eval = net_forward(gen, z_eval).output();
    const auto s_fake = score_batch(fakes_eval);
    e.score_fake = std::accumulate(s_fake.begin(), s_fake.end(), 0.0) / s_fake.size();

    Matrix reals_eval;
    if (final_eval || n <= config.eval_reals)
      reals_eval = real_all;
    else
      reals_eval = detail::rows_subset(
          real_all, eval_stream.sample_without_replacement(n, config.eval_reals));
    const auto s_real = score_batch(reals_eval);
    e.score_real = std::accumulate(s_real.begin(), s_real.end(), 0.0) / s_real.size();

    const auto s_diag = score_batch(diag);
    e.score_dcom = std::accumulate(s_diag.begin(), s_diag.end(), 0.0) / s_diag.size();

    int good = 0;
    for (int r = 0; r < fakes_eval.rows; ++r) {
      const auto img = detail::image_from_row(fakes_eval.row(r), width, height);
      const auto c = geometry::count_rectangles(img);
      if (c.count == dataset.target_count && c.clean) ++good;
    }
    e.prop_correct = static_cast<double>(good) / fakes_eval.rows;

    const int dif_n = std::min(config.eval_dif, fakes_eval.rows);
    double dif_acc = 0.0;
    for (int r = 0; r < dif_n; ++r)
      dif_acc += detail::min_l2_to_rows(fakes_eval.row(r), real_all) /
                 std::sqrt(static_cast<double>(pix));
    e.mean_dif = dif_acc / dif_n;

    e.probe_labels = probe_latents(gen, result.probe_codes, width, height);
    e.probe_flips = 0;
    if (!prev_probe_labels.empty())
      for (std::size_t i = 0; i < e.probe_labels.size(); ++i)
        if (e.probe_labels[i] != prev_probe_labels[i]) ++e.probe_flips;
    prev_probe_labels = e.probe_labels;

    result.log.entries.push_back(e);
    if (on_log) {
      Matrix probes(static_cast<int>(result.probe_codes.size()), config.latent_dim);
      for (std::size_t i = 0; i < result.probe_codes.size(); ++i)
        std::copy(result.probe_codes[i].begin(), result.probe_codes[i].end(),
                  probes.row(static_cast<int>(i)));
      on_log(e, net_forward(gen, probes).output());
    }
  };

  // initial entry: losses and gradient norms measured on evaluation batches
  {
    rng::Stream eval_stream(rng::derive_seed(rng::derive_seed(config.seed, detail::kSeedEval),
                                             0xabcdULL));
    Matrix reals = n <= real_batch_n ? real_all
                                     : detail::rows_subset(real_all,
                                                           eval_stream.sample_without_replacement(
                                                               n, real_batch_n));
    Matrix z0 = full_or_sampled_latents(eval_stream);
    const Matrix fakes0 = net_forward(gen, z0).output();
    Matrix dcom_batch;
    if (uses_pcr(config.regime)) {
      dcom_batch = Matrix(fake_batch_n, pix);
      for (int r = 0; r < fake_batch_n; ++r) {
        const auto idx = static_cast<int>(eval_stream.below(pool.rows));
        std::copy(pool.row(idx), pool.row(idx) + pix, dcom_batch.row(r));
      }
    }
    const auto [losses, d_grads] = disc_loss_gradients(
        disc, reals, fakes0, uses_pcr(config.regime) ? &dcom_batch : nullptr, config.regime);
    last_d_loss = losses.d_loss;
    last_grad_d = d_grads.norm();
    const auto g_update = gen_loss_gradients(gen, disc, z0);
    last_g_loss = g_update.g_loss;
    last_grad_g = g_update.grads.norm();
    emit_log(0, config.steps == 0);
  }

  for (int gs = 1; gs <= config.steps && !result.log.aborted; ++gs) {
    for (int k = 0; k < config.d_steps_per_g; ++k) {
      Matrix reals = full ? real_all
                          : detail::rows_subset(real_all, train_stream.sample_without_replacement(
                                                              n, config.batchsize));
      Matrix z = full_or_sampled_latents(train_stream);
      Matrix fakes = net_forward(gen, z).output();

      if (uses_sc(config.regime)) {
        const auto draw_fresh = [&]() {
          Matrix z1(1, config.latent_dim);
          prior.sample_row(z1.row(0), train_stream);
          const Matrix& out = net_forward(gen, z1).output();
          return std::vector<double>(out.data.begin(), out.data.end());
        };
        auto filtered =
            sc_filter(fakes, dataset, *config.sc_mode, draw_fresh, config.sc_retry_cap);
        if (filtered.skipped) {
          result.log.skipped_d_steps.push_back(gs);
          continue;
        }
        fakes = std::move(filtered.batch);
      }

      Matrix dcom_batch;
      if (uses_pcr(config.regime)) {
        if (d_step_counter > 0 && d_step_counter % pool_refresh_every == 0) refresh_pool();
        dcom_batch = Matrix(fakes.rows, pix);
        for (int r = 0; r < fakes.rows; ++r) {
          const auto idx = static_cast<int>(train_stream.below(pool.rows));
          std::copy(pool.row(idx), pool.row(idx) + pix, dcom_batch.row(r));
        }
      }
      ++d_step_counter;

      const auto [losses, d_grads] = disc_loss_gradients(
          disc, reals, fakes, uses_pcr(config.regime) ? &dcom_batch : nullptr, config.regime);
      last_d_loss = losses.d_loss;
      last_grad_d = d_grads.norm();
      result.disc_opt.step(disc, d_grads);
    }

    // generator update on a fresh latent batch
    {
      Matrix z = full_or_sampled_latents(train_stream);
      const auto g_update = gen_loss_gradients(gen, disc, z);
      last_g_loss = g_update.g_loss;
      last_grad_g = g_update.grads.norm();
      result.gen_opt.step(gen, g_update.grads);
    }

    if (!std::isfinite(last_d_loss) || !std::isfinite(last_g_loss)) {
      result.log.aborted = true;
      result.log.abort_reason = "non-finite loss at generator step " + std::to_string(gs);
      emit_log(gs, true);
      break;
    }
    if (gs % config.log_stride == 0 || gs == config.steps) emit_log(gs, gs == config.steps);
  }
  return result;
}

}  // namespace ganlab::tinygan
