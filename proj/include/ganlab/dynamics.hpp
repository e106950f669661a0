#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "ganlab/rng.hpp"
#include "ganlab/util.hpp"

// Linear WGAN toy model: a linear discriminator w and a shift generator
// theta, trained against each other by (stochastic) gradient flow. The
// noise-free flow rotates (w_i, theta_i) in each coordinate plane; finite
// batches add Brownian noise to the w equation only.
namespace ganlab::dynamics {

using Vec = std::vector<double>;

struct ParamState {
  Vec w;      // discriminator parameter
  Vec theta;  // generator shift parameter

  int dim() const { return static_cast<int>(w.size()); }

  static ParamState origin(int d) {
    if (d < 1) throw std::invalid_argument("ParamState: dimension must be >= 1");
    return {Vec(d, 0.0), Vec(d, 0.0)};
  }
};

inline bool all_finite(const Vec& v) {
  for (double x : v)
    if (!std::isfinite(x)) return false;
  return true;
}

inline void validate_state(const ParamState& s) {
  if (s.w.empty() || s.w.size() != s.theta.size())
    throw std::invalid_argument("ParamState: w and theta must have identical dimension >= 1");
  if (!all_finite(s.w) || !all_finite(s.theta))
    throw std::invalid_argument("ParamState: components must be finite");
}

// Step-size schedule: either a positive constant rate c or the 1/t rate,
// the latter defined for t >= 1 only.
struct StepSchedule {
  enum class Kind { Constant, Vanishing };

  Kind kind = Kind::Constant;
  double c = 1.0;

  static StepSchedule constant(double c = 1.0) {
    if (!(c > 0.0)) throw std::invalid_argument("StepSchedule: constant rate must be positive");
    return {Kind::Constant, c};
  }
  static StepSchedule vanishing() { return {Kind::Vanishing, 0.0}; }

  bool is_vanishing() const { return kind == Kind::Vanishing; }

  double rate(double t) const {
    if (kind == Kind::Constant) return c;
    if (t < 1.0) throw std::domain_error("StepSchedule: vanishing rate is defined for t >= 1");
    return 1.0 / t;
  }

  double start_time() const { return kind == Kind::Vanishing ? 1.0 : 0.0; }
};

// Mini-batch size; the infinite value selects the noise-free full-batch flow.
class Batchsize {
 public:
  static Batchsize finite(std::uint64_t m) {
    if (m == 0) throw std::invalid_argument("Batchsize: m must be >= 1");
    return Batchsize(m);
  }
  static Batchsize infinite() { return Batchsize(0); }

  bool is_infinite() const { return m_ == 0; }
  std::uint64_t value() const {
    if (m_ == 0) throw std::logic_error("Batchsize: infinite batchsize has no finite value");
    return m_;
  }
  // Diffusion coefficient sqrt(2/m) of the batch-mean noise.
  double noise_scale() const { return m_ == 0 ? 0.0 : std::sqrt(2.0 / static_cast<double>(m_)); }

  friend bool operator==(const Batchsize&, const Batchsize&) = default;

 private:
  explicit Batchsize(std::uint64_t m) : m_(m) {}
  std::uint64_t m_;
};

struct SimConfig {
  int d = 1;
  Batchsize m = Batchsize::infinite();
  double dt = 1e-3;
  double t_start = 0.0;
  double t_end = 1.0;
  StepSchedule schedule = StepSchedule::constant();
  std::uint64_t seed = 0;
  std::int64_t record_stride = 1;
  std::optional<ParamState> initial;  // origin when unset

  std::vector<std::string> violations() const {
    std::vector<std::string> out;
    if (d < 1) out.push_back("d: must be >= 1");
    if (!(dt > 0.0)) out.push_back("dt: must be positive");
    if (!(t_end > t_start)) out.push_back("t_end: must exceed t_start");
    if (dt > t_end - t_start) out.push_back("dt: must not exceed t_end - t_start");
    if (record_stride < 1) out.push_back("record_stride: must be >= 1");
    const double want_start = schedule.start_time();
    if (t_start != want_start)
      out.push_back("t_start: must be " + std::to_string(want_start) + " for this schedule");
    if (initial) {
      if (initial->dim() != d || initial->theta.size() != initial->w.size())
        out.push_back("initial: dimension must equal d");
      else if (!all_finite(initial->w) || !all_finite(initial->theta))
        out.push_back("initial: components must be finite");
    }
    return out;
  }

  void validate() const {
    const auto v = violations();
    if (!v.empty()) throw std::invalid_argument("SimConfig: " + util::join(v, "; "));
  }
};

struct Trajectory {
  std::vector<double> times;
  std::vector<ParamState> states;

  const ParamState& final_state() const {
    if (states.empty()) throw std::logic_error("Trajectory: empty");
    return states.back();
  }
};

namespace detail {
inline void require_dim(std::size_t got, std::size_t want, const char* what) {
  if (got != want) throw std::invalid_argument(std::string(what) + ": dimension mismatch");
}
}  // namespace detail

// F(w, theta) = w . (x_mean - y_mean - theta)
inline double value_function(const ParamState& s, const Vec& x_mean, const Vec& y_mean) {
  validate_state(s);
  detail::require_dim(x_mean.size(), s.w.size(), "value_function: x_mean");
  detail::require_dim(y_mean.size(), s.w.size(), "value_function: y_mean");
  double acc = 0.0;
  for (std::size_t i = 0; i < s.w.size(); ++i)
    acc += s.w[i] * (x_mean[i] - y_mean[i] - s.theta[i]);
  return acc;
}

struct GradientPair {
  Vec grad_w;      // ascent direction for the discriminator
  Vec grad_theta;  // gradient of F in theta (the generator descends it)
};

inline GradientPair gradients(const ParamState& s, const Vec& x_mean, const Vec& y_mean) {
  validate_state(s);
  detail::require_dim(x_mean.size(), s.w.size(), "gradients: x_mean");
  detail::require_dim(y_mean.size(), s.w.size(), "gradients: y_mean");
  GradientPair g{Vec(s.w.size()), Vec(s.w.size())};
  for (std::size_t i = 0; i < s.w.size(); ++i) {
    g.grad_w[i] = x_mean[i] - y_mean[i] - s.theta[i];
    g.grad_theta[i] = -s.w[i];
  }
  return g;
}

// Noise-free flow solution. Both schedules rotate each (w_i, theta_i) plane:
// by angle c*t for the constant schedule (initial state at t = 0), and by
// ln t for the vanishing schedule (initial state at t = 1; the substitution
// u = ln t reduces the 1/t system to the constant-rate one).
inline ParamState exact_orbit(const ParamState& initial, double t, const StepSchedule& schedule) {
  validate_state(initial);
  double angle = 0.0;
  if (schedule.is_vanishing()) {
    if (t < 1.0) throw std::domain_error("exact_orbit: vanishing schedule requires t >= 1");
    angle = std::log(t);
  } else {
    angle = schedule.c * t;
  }
  const double ca = std::cos(angle);
  const double sa = std::sin(angle);
  ParamState out = initial;
  for (std::size_t i = 0; i < initial.w.size(); ++i) {
    out.w[i] = initial.w[i] * ca - initial.theta[i] * sa;
    out.theta[i] = initial.theta[i] * ca + initial.w[i] * sa;
  }
  return out;
}

// One Euler-Maruyama step of
//   dw     = rate(t) * (-theta dt + sqrt(2/m) dW)
//   dtheta = rate(t) * w dt
// Both components advance from the pre-step state; the Brownian increment is
// realized as sqrt(dt) * g with g standard normal per coordinate. Infinite m
// draws nothing and reduces to the explicit Euler step of the flow.
inline ParamState em_step(const ParamState& state, double t, double dt, Batchsize m,
                          const StepSchedule& schedule, rng::Stream& noise) {
  if (!(dt > 0.0)) throw std::invalid_argument("em_step: dt must be positive");
  const double rate = schedule.rate(t);
  const double diffusion = rate * m.noise_scale() * std::sqrt(dt);
  ParamState next = state;
  for (std::size_t i = 0; i < state.w.size(); ++i) {
    double dw = rate * (-state.theta[i]) * dt;
    if (!m.is_infinite()) dw += diffusion * noise.gaussian();
    next.w[i] = state.w[i] + dw;
    next.theta[i] = state.theta[i] + rate * state.w[i] * dt;
  }
  return next;
}

// Integrates one sample path over [t_start, t_end] with a uniform step no
// larger than config.dt (the span is divided exactly), recording the initial
// state, every record_stride-th step and the final state. Deterministic for
// a fixed seed.
inline Trajectory simulate_path(const SimConfig& config) {
  config.validate();
  ParamState state = config.initial ? *config.initial : ParamState::origin(config.d);
  validate_state(state);
  const double span = config.t_end - config.t_start;
  const auto n_steps =
      static_cast<std::int64_t>(std::ceil(span / config.dt - 1e-9));
  const double h = span / static_cast<double>(n_steps);
  rng::Stream noise(config.seed);

  Trajectory traj;
  traj.times.reserve(static_cast<std::size_t>(n_steps / config.record_stride) + 2);
  traj.states.reserve(traj.times.capacity());
  traj.times.push_back(config.t_start);
  traj.states.push_back(state);
  for (std::int64_t j = 0; j < n_steps; ++j) {
    const double t = config.t_start + static_cast<double>(j) * h;
    state = em_step(state, t, h, config.m, config.schedule, noise);
    const bool last = (j + 1 == n_steps);
    if ((j + 1) % config.record_stride == 0 || last) {
      traj.times.push_back(last ? config.t_end : config.t_start + static_cast<double>(j + 1) * h);
      traj.states.push_back(state);
    }
  }
  return traj;
}

namespace detail {

template <typename F>
double adaptive_simpson_impl(const F& f, double a, double b, double fa, double fm, double fb,
                             double whole, double tol, int depth) {
  const double mid = 0.5 * (a + b);
  const double lm = 0.5 * (a + mid);
  const double rm = 0.5 * (mid + b);
  const double flm = f(lm);
  const double frm = f(rm);
  const double left = (mid - a) / 6.0 * (fa + 4.0 * flm + fm);
  const double right = (b - mid) / 6.0 * (fm + 4.0 * frm + fb);
  const double delta = left + right - whole;
  if (depth <= 0 || std::abs(delta) <= 15.0 * tol) return left + right + delta / 15.0;
  return adaptive_simpson_impl(f, a, mid, fa, flm, fm, left, 0.5 * tol, depth - 1) +
         adaptive_simpson_impl(f, mid, b, fm, frm, fb, right, 0.5 * tol, depth - 1);
}

template <typename F>
double adaptive_simpson(const F& f, double a, double b, double rel_tol) {
  if (b <= a) return 0.0;
  const double fa = f(a);
  const double fb = f(b);
  const double fm = f(0.5 * (a + b));
  const double whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
  const double tol = rel_tol * std::max(std::abs(whole), 1e-300);
  return adaptive_simpson_impl(f, a, b, fa, fm, fb, whole, tol, 60);
}

}  // namespace detail

// Which diffusion matrix entry the vanishing-schedule variance integral uses:
// PerStep evaluates the sqrt(2)/(sqrt(m) s) entry at the integration variable;
// FinalTime fixes the denominator at the evaluation time t instead. The two
// readings coincide at s = t and both scale exactly as 1/m.
enum class SigmaReading { PerStep, FinalTime };

// Variance of the i-th generator coordinate at time t for a path started at
// its mean (the integral form of the OU variance). Constant schedule: closed
// form (2c/m)(u/2 - sin(2u)/4) with u = c t, which is (2/m)(t/2 - sin(2t)/4)
// at c = 1. Vanishing schedule: adaptive quadrature of
// (2/m) sin^2(ln(t/s)) / s^2 over [1, t] to 1e-8 relative tolerance.
inline double variance_oracle(double t, std::uint64_t m, int d, int component,
                              const StepSchedule& schedule,
                              SigmaReading reading = SigmaReading::PerStep) {
  if (m == 0) throw std::invalid_argument("variance_oracle: m must be >= 1");
  if (d < 1 || component < 1 || component > d)
    throw std::out_of_range("variance_oracle: component index must satisfy 1 <= i <= d");
  const double md = static_cast<double>(m);
  if (!schedule.is_vanishing()) {
    if (t < 0.0) throw std::domain_error("variance_oracle: constant schedule requires t >= 0");
    const double u = schedule.c * t;
    return (2.0 * schedule.c / md) * (0.5 * u - 0.25 * std::sin(2.0 * u));
  }
  if (t < 1.0) throw std::domain_error("variance_oracle: vanishing schedule requires t >= 1");
  if (t == 1.0) return 0.0;
  const auto integrand = [&](double s) {
    const double entry = reading == SigmaReading::PerStep ? 1.0 / s : 1.0 / t;
    const double sine = std::sin(std::log(t / s));
    return (2.0 / md) * sine * sine * entry * entry;
  };
  return detail::adaptive_simpson(integrand, 1.0, t, 1e-8);
}

}  // namespace ganlab::dynamics
