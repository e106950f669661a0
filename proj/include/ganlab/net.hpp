#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#ifdef GANLAB_USE_CBLAS
#include <cblas.h>
#endif

#include "ganlab/rng.hpp"

// Small dense networks with hand-written forward/backward passes. Batches
// are row-major matrices with one sample per row.
namespace ganlab::tinygan {

struct Matrix {
  int rows = 0;
  int cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(int r, int c, double fill = 0.0)
      : rows(r), cols(c), data(static_cast<std::size_t>(r) * c, fill) {}

  double& operator()(int r, int c) { return data[static_cast<std::size_t>(r) * cols + c]; }
  double operator()(int r, int c) const { return data[static_cast<std::size_t>(r) * cols + c]; }
  double* row(int r) { return data.data() + static_cast<std::size_t>(r) * cols; }
  const double* row(int r) const { return data.data() + static_cast<std::size_t>(r) * cols; }
};

// The three batch kernels below are plain GEMMs; when a CBLAS is available
// they are routed through it (single-threaded for reproducibility), with the
// hand-rolled loops as the fallback.
namespace kernels {

#ifdef GANLAB_USE_CBLAS
namespace blas {
extern "C" void openblas_set_num_threads(int) __attribute__((weak));
inline bool single_threaded_blas() {
  if (openblas_set_num_threads) openblas_set_num_threads(1);
  return true;
}
inline const bool blas_init = single_threaded_blas();
}  // namespace blas
#endif

// Dot product with eight independent accumulators; the fixed reassociation
// lets the compiler vectorize and pipeline the FMA chain.
inline double dot(const double* a, const double* b, int n) {
  double acc[8] = {0, 0, 0, 0, 0, 0, 0, 0};
  int k = 0;
  for (; k + 8 <= n; k += 8)
    for (int j = 0; j < 8; ++j) acc[j] += a[k + j] * b[k + j];
  double tail = 0.0;
  for (; k < n; ++k) tail += a[k] * b[k];
  return ((acc[0] + acc[1]) + (acc[2] + acc[3])) + ((acc[4] + acc[5]) + (acc[6] + acc[7])) +
         tail;
}

// z[n x out] = x[n x in] . w^T[in x out] + b
inline void affine_forward(const Matrix& x, const Matrix& w, const std::vector<double>& b,
                           Matrix& z) {
  z = Matrix(x.rows, w.rows);
#ifdef GANLAB_USE_CBLAS
  cblas_dgemm(CblasRowMajor, CblasNoTrans, CblasTrans, x.rows, w.rows, x.cols, 1.0,
              x.data.data(), x.cols, w.data.data(), w.cols, 0.0, z.data.data(), z.cols);
  for (int i = 0; i < z.rows; ++i) {
    double* zi = z.row(i);
    for (int o = 0; o < z.cols; ++o) zi[o] += b[o];
  }
#else
  for (int i = 0; i < x.rows; ++i) {
    const double* xi = x.row(i);
    double* zi = z.row(i);
    for (int o = 0; o < w.rows; ++o) zi[o] = b[o] + dot(xi, w.row(o), x.cols);
  }
#endif
}

// dw[out x in] += dz^T[out x n] . x[n x in]
inline void grad_weights(const Matrix& dz, const Matrix& x, Matrix& dw) {
#ifdef GANLAB_USE_CBLAS
  cblas_dgemm(CblasRowMajor, CblasTrans, CblasNoTrans, dz.cols, x.cols, x.rows, 1.0,
              dz.data.data(), dz.cols, x.data.data(), x.cols, 1.0, dw.data.data(), dw.cols);
#else
  for (int o = 0; o < dz.cols; ++o) {
    double* dwo = dw.row(o);
    for (int i = 0; i < x.rows; ++i) {
      const double g = dz(i, o);
      if (g == 0.0) continue;
      const double* xi = x.row(i);
      for (int k = 0; k < x.cols; ++k) dwo[k] += g * xi[k];
    }
  }
#endif
}

// dx[n x in] = dz[n x out] . w[out x in]
inline void grad_input(const Matrix& dz, const Matrix& w, Matrix& dx) {
  dx = Matrix(dz.rows, w.cols);
#ifdef GANLAB_USE_CBLAS
  cblas_dgemm(CblasRowMajor, CblasNoTrans, CblasNoTrans, dz.rows, w.cols, dz.cols, 1.0,
              dz.data.data(), dz.cols, w.data.data(), w.cols, 0.0, dx.data.data(), dx.cols);
#else
  for (int o = 0; o < w.rows; ++o) {
    const double* wo = w.row(o);
    for (int i = 0; i < dz.rows; ++i) {
      const double g = dz(i, o);
      if (g == 0.0) continue;
      double* dxi = dx.row(i);
      for (int k = 0; k < w.cols; ++k) dxi[k] += g * wo[k];
    }
  }
#endif
}

}  // namespace kernels

struct Activation {
  enum class Kind { Identity, Relu, LeakyRelu, Tanh, Sigmoid };

  Kind kind = Kind::Identity;
  double alpha = 0.2;  // LeakyRelu slope

  static Activation identity() { return {Kind::Identity, 0.0}; }
  static Activation relu() { return {Kind::Relu, 0.0}; }
  static Activation leaky_relu(double alpha = 0.2) { return {Kind::LeakyRelu, alpha}; }
  static Activation tanh_fn() { return {Kind::Tanh, 0.0}; }
  static Activation sigmoid() { return {Kind::Sigmoid, 0.0}; }

  double apply(double z) const {
    switch (kind) {
      case Kind::Identity: return z;
      case Kind::Relu: return z > 0.0 ? z : 0.0;
      case Kind::LeakyRelu: return z > 0.0 ? z : alpha * z;
      case Kind::Tanh: return std::tanh(z);
      case Kind::Sigmoid: return 1.0 / (1.0 + std::exp(-z));
    }
    throw std::logic_error("Activation: unknown kind");
  }

  // Derivative at pre-activation z, given the stored post-activation a.
  double grad(double z, double a) const {
    switch (kind) {
      case Kind::Identity: return 1.0;
      case Kind::Relu: return z > 0.0 ? 1.0 : 0.0;
      case Kind::LeakyRelu: return z > 0.0 ? 1.0 : alpha;
      case Kind::Tanh: return 1.0 - a * a;
      case Kind::Sigmoid: return a * (1.0 - a);
    }
    throw std::logic_error("Activation: unknown kind");
  }

  // All supported activations have Lipschitz constant <= 1 provided the
  // leaky slope does not exceed 1.
  bool unit_lipschitz() const { return kind != Kind::LeakyRelu || std::abs(alpha) <= 1.0; }

  friend bool operator==(const Activation&, const Activation&) = default;
};

struct DenseNet {
  struct Layer {
    Matrix w;  // out x in
    std::vector<double> b;
  };

  std::vector<Layer> layers;
  Activation hidden = Activation::leaky_relu();  // after every layer but the last
  Activation output = Activation::identity();    // after the last layer

  int input_dim() const { return layers.empty() ? 0 : layers.front().w.cols; }
  int output_dim() const { return layers.empty() ? 0 : layers.back().w.rows; }

  std::size_t parameter_count() const {
    std::size_t n = 0;
    for (const auto& l : layers) n += l.w.data.size() + l.b.size();
    return n;
  }

  const Activation& activation_of(std::size_t layer) const {
    return layer + 1 == layers.size() ? output : hidden;
  }

  // Gaussian init with std sqrt(2 / fan_in), zero biases; draw order is
  // layer by layer, row-major, so creation is reproducible per stream.
  static DenseNet create(const std::vector<int>& sizes, Activation hidden, Activation output,
                         rng::Stream& init) {
    if (sizes.size() < 2) throw std::invalid_argument("DenseNet: need at least two layer sizes");
    for (int s : sizes)
      if (s < 1) throw std::invalid_argument("DenseNet: layer sizes must be positive");
    DenseNet net;
    net.hidden = hidden;
    net.output = output;
    net.layers.resize(sizes.size() - 1);
    for (std::size_t l = 0; l < net.layers.size(); ++l) {
      const int fan_in = sizes[l];
      const int fan_out = sizes[l + 1];
      auto& layer = net.layers[l];
      layer.w = Matrix(fan_out, fan_in);
      layer.b.assign(fan_out, 0.0);
      const double std_dev = std::sqrt(2.0 / fan_in);
      for (double& v : layer.w.data) v = std_dev * init.gaussian();
    }
    return net;
  }
};

struct ForwardPass {
  std::vector<Matrix> pre;  // pre-activations, one per layer
  std::vector<Matrix> act;  // act[0] is the input batch; act[l+1] follows layer l

  const Matrix& output() const { return act.back(); }
};

inline ForwardPass net_forward(const DenseNet& net, const Matrix& batch) {
  if (net.layers.empty()) throw std::invalid_argument("net_forward: empty network");
  if (batch.cols != net.input_dim())
    throw std::invalid_argument("net_forward: input width does not match first layer");
  ForwardPass fwd;
  fwd.pre.resize(net.layers.size());
  fwd.act.resize(net.layers.size() + 1);
  fwd.act[0] = batch;
  for (std::size_t l = 0; l < net.layers.size(); ++l) {
    kernels::affine_forward(fwd.act[l], net.layers[l].w, net.layers[l].b, fwd.pre[l]);
    const Activation& fn = net.activation_of(l);
    Matrix& a = fwd.act[l + 1];
    a = Matrix(fwd.pre[l].rows, fwd.pre[l].cols);
    for (std::size_t i = 0; i < a.data.size(); ++i) a.data[i] = fn.apply(fwd.pre[l].data[i]);
  }
  return fwd;
}

struct NetGradients {
  std::vector<Matrix> w;
  std::vector<std::vector<double>> b;
  Matrix input;  // gradient w.r.t. the input batch

  static NetGradients zeros_like(const DenseNet& net) {
    NetGradients g;
    g.w.reserve(net.layers.size());
    g.b.reserve(net.layers.size());
    for (const auto& l : net.layers) {
      g.w.emplace_back(l.w.rows, l.w.cols);
      g.b.emplace_back(l.b.size(), 0.0);
    }
    return g;
  }

  void add(const NetGradients& other) {
    for (std::size_t l = 0; l < w.size(); ++l) {
      for (std::size_t i = 0; i < w[l].data.size(); ++i) w[l].data[i] += other.w[l].data[i];
      for (std::size_t i = 0; i < b[l].size(); ++i) b[l][i] += other.b[l][i];
    }
  }

  // L2 norm over all parameter gradients (input gradient excluded).
  double norm() const {
    double acc = 0.0;
    for (const auto& m : w)
      for (double v : m.data) acc += v * v;
    for (const auto& vec : b)
      for (double v : vec) acc += v * v;
    return std::sqrt(acc);
  }
};

// Backward pass; d_output is the loss gradient w.r.t. the final activation.
inline NetGradients net_backward(const DenseNet& net, const ForwardPass& fwd,
                                 const Matrix& d_output) {
  if (d_output.rows != fwd.output().rows || d_output.cols != fwd.output().cols)
    throw std::invalid_argument("net_backward: d_output shape mismatch");
  NetGradients grads = NetGradients::zeros_like(net);
  Matrix d_act = d_output;
  for (int l = static_cast<int>(net.layers.size()) - 1; l >= 0; --l) {
    const Activation& fn = net.activation_of(l);
    Matrix dz(d_act.rows, d_act.cols);
    for (std::size_t i = 0; i < dz.data.size(); ++i)
      dz.data[i] = d_act.data[i] * fn.grad(fwd.pre[l].data[i], fwd.act[l + 1].data[i]);
    kernels::grad_weights(dz, fwd.act[l], grads.w[l]);
    for (int i = 0; i < dz.rows; ++i) {
      const double* dzi = dz.row(i);
      for (int o = 0; o < dz.cols; ++o) grads.b[l][o] += dzi[o];
    }
    kernels::grad_input(dz, net.layers[l].w, d_act);
  }
  grads.input = std::move(d_act);
  return grads;
}

struct OptimizerSpec {
  enum class Kind { Sgd, Adam };

  Kind kind = Kind::Adam;
  double lr = 0.01;  // Sgd
  double alpha = 2e-4, beta1 = 0.5, beta2 = 0.9, eps = 1e-8;  // Adam
};

class Optimizer {
 public:
  Optimizer() = default;
  Optimizer(const OptimizerSpec& spec, const DenseNet& net) : spec_(spec) {
    if (spec.kind == OptimizerSpec::Kind::Adam) {
      for (const auto& l : net.layers) {
        m_w_.emplace_back(l.w.rows, l.w.cols);
        v_w_.emplace_back(l.w.rows, l.w.cols);
        m_b_.emplace_back(l.b.size(), 0.0);
        v_b_.emplace_back(l.b.size(), 0.0);
      }
    }
  }

  void step(DenseNet& net, const NetGradients& grads) {
    if (spec_.kind == OptimizerSpec::Kind::Sgd) {
      for (std::size_t l = 0; l < net.layers.size(); ++l) {
        auto& layer = net.layers[l];
        for (std::size_t i = 0; i < layer.w.data.size(); ++i)
          layer.w.data[i] -= spec_.lr * grads.w[l].data[i];
        for (std::size_t i = 0; i < layer.b.size(); ++i) layer.b[i] -= spec_.lr * grads.b[l][i];
      }
      return;
    }
    ++t_;
    const double bc1 = 1.0 - std::pow(spec_.beta1, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(spec_.beta2, static_cast<double>(t_));
    const auto adam = [&](double& p, double g, double& m, double& v) {
      m = spec_.beta1 * m + (1.0 - spec_.beta1) * g;
      v = spec_.beta2 * v + (1.0 - spec_.beta2) * g * g;
      p -= spec_.alpha * (m / bc1) / (std::sqrt(v / bc2) + spec_.eps);
    };
    for (std::size_t l = 0; l < net.layers.size(); ++l) {
      auto& layer = net.layers[l];
      for (std::size_t i = 0; i < layer.w.data.size(); ++i)
        adam(layer.w.data[i], grads.w[l].data[i], m_w_[l].data[i], v_w_[l].data[i]);
      for (std::size_t i = 0; i < layer.b.size(); ++i)
        adam(layer.b[i], grads.b[l][i], m_b_[l][i], v_b_[l][i]);
    }
  }

  const OptimizerSpec& spec() const { return spec_; }
  std::uint64_t steps_taken() const { return t_; }

  // Serialized state access (checkpoint IO).
  std::vector<Matrix>& moment1_w() { return m_w_; }
  std::vector<Matrix>& moment2_w() { return v_w_; }
  std::vector<std::vector<double>>& moment1_b() { return m_b_; }
  std::vector<std::vector<double>>& moment2_b() { return v_b_; }
  const std::vector<Matrix>& moment1_w() const { return m_w_; }
  const std::vector<Matrix>& moment2_w() const { return v_w_; }
  const std::vector<std::vector<double>>& moment1_b() const { return m_b_; }
  const std::vector<std::vector<double>>& moment2_b() const { return v_b_; }
  void set_steps_taken(std::uint64_t t) { t_ = t; }

 private:
  OptimizerSpec spec_;
  std::vector<Matrix> m_w_, v_w_;
  std::vector<std::vector<double>> m_b_, v_b_;
  std::uint64_t t_ = 0;
};

}  // namespace ganlab::tinygan
