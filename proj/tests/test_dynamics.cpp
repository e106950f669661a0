#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <numbers>

#include "ganlab/dynamics.hpp"

using namespace ganlab;
using dynamics::Batchsize;
using dynamics::ParamState;
using dynamics::StepSchedule;
using Catch::Approx;

namespace {

constexpr double kPi = std::numbers::pi;

// Independent fourth-order (classic RK4) integration of the noise-free flow
//   w' = -rate(t) theta,  theta' = rate(t) w
// used as the oracle for the closed-form orbit.
ParamState rk4_orbit(const ParamState& initial, double t_start, double t_end, double dt,
                     const StepSchedule& schedule) {
  const std::size_t d = initial.w.size();
  std::vector<double> y(2 * d);
  for (std::size_t i = 0; i < d; ++i) {
    y[i] = initial.w[i];
    y[d + i] = initial.theta[i];
  }
  const auto deriv = [&](double t, const std::vector<double>& s) {
    std::vector<double> out(2 * d);
    const double rate = schedule.rate(t);
    for (std::size_t i = 0; i < d; ++i) {
      out[i] = -rate * s[d + i];
      out[d + i] = rate * s[i];
    }
    return out;
  };
  const auto n = static_cast<long long>(std::ceil((t_end - t_start) / dt - 1e-9));
  const double h = (t_end - t_start) / static_cast<double>(n);
  double t = t_start;
  std::vector<double> k1, k2, k3, k4, tmp(2 * d);
  for (long long step = 0; step < n; ++step) {
    k1 = deriv(t, y);
    for (std::size_t i = 0; i < 2 * d; ++i) tmp[i] = y[i] + 0.5 * h * k1[i];
    k2 = deriv(t + 0.5 * h, tmp);
    for (std::size_t i = 0; i < 2 * d; ++i) tmp[i] = y[i] + 0.5 * h * k2[i];
    k3 = deriv(t + 0.5 * h, tmp);
    for (std::size_t i = 0; i < 2 * d; ++i) tmp[i] = y[i] + h * k3[i];
    k4 = deriv(t + h, tmp);
    for (std::size_t i = 0; i < 2 * d; ++i)
      y[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    t = t_start + static_cast<double>(step + 1) * h;
  }
  ParamState out = initial;
  for (std::size_t i = 0; i < d; ++i) {
    out.w[i] = y[i];
    out.theta[i] = y[d + i];
  }
  return out;
}

// Composite Simpson quadrature, independent of the adaptive scheme in the
// library.
template <typename F>
double simpson(F f, double a, double b, int panels) {
  const double h = (b - a) / panels;
  double acc = f(a) + f(b);
  for (int i = 1; i < panels; ++i) acc += (i % 2 == 1 ? 4.0 : 2.0) * f(a + i * h);
  return acc * h / 3.0;
}

double max_norm_err(const ParamState& a, const ParamState& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.w.size(); ++i) {
    m = std::max(m, std::abs(a.w[i] - b.w[i]));
    m = std::max(m, std::abs(a.theta[i] - b.theta[i]));
  }
  return m;
}

double energy(const ParamState& s) {
  double acc = 0.0;
  for (double v : s.w) acc += v * v;
  for (double v : s.theta) acc += v * v;
  return acc;
}

}  // namespace

TEST_CASE("value_function matches the bilinear form") {
  CHECK(dynamics::value_function({{1, 0}, {0, 0}}, {0, 0}, {0, 0}) == 0.0);
  CHECK(dynamics::value_function({{1, 0}, {2, 5}}, {0, 0}, {0, 0}) == Approx(-2.0));
  // direct arithmetic: (1,1) . ((0.5,0) - (0,0) - (1,0)) = -0.5
  CHECK(dynamics::value_function({{1, 1}, {1, 0}}, {0.5, 0}, {0, 0}) == Approx(-0.5));
  CHECK_THROWS_AS(dynamics::value_function({{1}, {0}}, {0, 0}, {0}), std::invalid_argument);
}

TEST_CASE("gradients of the value function") {
  auto g = dynamics::gradients({{3}, {0}}, {0}, {0});
  CHECK(g.grad_w[0] == 0.0);
  CHECK(g.grad_theta[0] == -3.0);

  g = dynamics::gradients({{0, 0}, {1, 2}}, {0, 0}, {0, 0});
  CHECK(g.grad_w[0] == -1.0);
  CHECK(g.grad_w[1] == -2.0);
  CHECK(g.grad_theta[0] == 0.0);
  CHECK(g.grad_theta[1] == 0.0);

  g = dynamics::gradients({{1}, {1}}, {0.5}, {0.25});
  CHECK(g.grad_w[0] == Approx(-0.75));
  CHECK(g.grad_theta[0] == Approx(-1.0));

  CHECK_THROWS_AS(dynamics::gradients({{1}, {1}}, {1, 2}, {0}), std::invalid_argument);
}

TEST_CASE("exact_orbit closed forms") {
  const ParamState init{{0.3, -0.2}, {0.1, 0.4}};
  SECTION("identity at t = 0") {
    const auto s = dynamics::exact_orbit(init, 0.0, StepSchedule::constant());
    CHECK(max_norm_err(s, init) == 0.0);
  }
  SECTION("quarter rotation") {
    const auto s = dynamics::exact_orbit({{1, 0}, {0, 0}}, kPi / 2, StepSchedule::constant());
    CHECK(s.w[0] == Approx(0.0).margin(1e-15));
    CHECK(s.w[1] == 0.0);
    CHECK(s.theta[0] == Approx(1.0));
    CHECK(s.theta[1] == 0.0);
  }
  SECTION("vanishing schedule, ln t = pi/2") {
    const auto s =
        dynamics::exact_orbit({{1}, {0}}, std::exp(kPi / 2), StepSchedule::vanishing());
    CHECK(s.w[0] == Approx(0.0).margin(1e-12));
    CHECK(s.theta[0] == Approx(1.0).epsilon(1e-12));
  }
  SECTION("vanishing schedule rejects t < 1") {
    CHECK_THROWS_AS(dynamics::exact_orbit(init, 0.5, StepSchedule::vanishing()),
                    std::domain_error);
  }
  SECTION("agrees with a fourth-order integration at t = 1.3") {
    const ParamState start{{0.2, -0.1}, {0.4, 0.0}};
    const auto oracle = rk4_orbit(start, 0.0, 1.3, 1e-6, StepSchedule::constant());
    const auto closed = dynamics::exact_orbit(start, 1.3, StepSchedule::constant());
    CHECK(max_norm_err(closed, oracle) < 1e-10);
  }
  SECTION("agrees with a fourth-order integration under the vanishing schedule") {
    const ParamState start{{0.2, -0.1}, {0.4, 0.0}};
    const auto oracle = rk4_orbit(start, 1.0, 7.5, 1e-5, StepSchedule::vanishing());
    const auto closed = dynamics::exact_orbit(start, 7.5, StepSchedule::vanishing());
    CHECK(max_norm_err(closed, oracle) < 1e-10);
  }
  SECTION("constant rate c rescales time") {
    const auto fast = dynamics::exact_orbit(init, 0.7, StepSchedule::constant(2.0));
    const auto slow = dynamics::exact_orbit(init, 1.4, StepSchedule::constant(1.0));
    CHECK(max_norm_err(fast, slow) < 1e-15);
  }
}

TEST_CASE("em_step") {
  rng::Stream noise(1);
  SECTION("noise-free Euler step") {
    const auto s = dynamics::em_step({{1}, {0}}, 0.0, 0.01, Batchsize::infinite(),
                                     StepSchedule::constant(), noise);
    CHECK(s.w[0] == 1.0);
    CHECK(s.theta[0] == Approx(0.01));
  }
  SECTION("vanishing rate at t = 2") {
    const auto s = dynamics::em_step({{0}, {1}}, 2.0, 0.01, Batchsize::infinite(),
                                     StepSchedule::vanishing(), noise);
    CHECK(s.w[0] == Approx(-0.005));
    CHECK(s.theta[0] == 1.0);
  }
  SECTION("seeded noise replay at m = 1") {
    const double dt = 0.04;
    rng::Stream stream(42);
    const auto s = dynamics::em_step(ParamState::origin(1), 0.0, dt, Batchsize::finite(1),
                                     StepSchedule::constant(), stream);
    rng::Stream replay(42);
    const double g = replay.gaussian();
    CHECK(s.theta[0] == 0.0);
    CHECK(s.w[0] == Approx(std::sqrt(2.0) * std::sqrt(dt) * g));
  }
  SECTION("rejects non-positive dt") {
    CHECK_THROWS_AS(dynamics::em_step(ParamState::origin(1), 0.0, 0.0, Batchsize::infinite(),
                                      StepSchedule::constant(), noise),
                    std::invalid_argument);
  }
}

TEST_CASE("simulate_path: closed orbit over one period") {
  dynamics::SimConfig config;
  config.d = 1;
  config.m = Batchsize::infinite();
  config.dt = 1e-4;
  config.t_end = 2 * kPi;
  config.seed = 7;
  config.record_stride = 1000;
  config.initial = ParamState{{0.6}, {0.8}};  // on the unit circle
  const auto traj = dynamics::simulate_path(config);
  CHECK(traj.times.front() == 0.0);
  CHECK(max_norm_err(traj.final_state(), *config.initial) < 1e-3);
}

TEST_CASE("simulate_path: deterministic per seed") {
  dynamics::SimConfig config;
  config.d = 2;
  config.m = Batchsize::finite(4);
  config.dt = 1e-2;
  config.t_end = 2.0;
  config.seed = 123;
  const auto a = dynamics::simulate_path(config);
  const auto b = dynamics::simulate_path(config);
  REQUIRE(a.times == b.times);
  for (std::size_t i = 0; i < a.states.size(); ++i) {
    CHECK(a.states[i].w == b.states[i].w);
    CHECK(a.states[i].theta == b.states[i].theta);
  }
}

TEST_CASE("simulate_path: ensemble mean follows the deterministic orbit") {
  // 4000 independent paths from a non-origin start; the sample mean of theta
  // at t = pi must match the noise-free orbit within 3 standard errors.
  dynamics::SimConfig config;
  config.d = 1;
  config.m = Batchsize::finite(4);
  config.dt = 2e-3;
  config.t_end = kPi;
  config.record_stride = 10000000;
  config.initial = ParamState{{0.5}, {0.0}};
  const int n = 4000;
  std::vector<double> thetas(n);
  for (int p = 0; p < n; ++p) {
    config.seed = rng::derive_seed(99, p);
    thetas[p] = dynamics::simulate_path(config).final_state().theta[0];
  }
  double mean = 0.0;
  for (double v : thetas) mean += v;
  mean /= n;
  double var = 0.0;
  for (double v : thetas) var += (v - mean) * (v - mean);
  var /= (n - 1);
  const double stderr_mean = std::sqrt(var / n);
  const auto orbit = dynamics::exact_orbit(*config.initial, kPi, config.schedule);
  CHECK(std::abs(mean - orbit.theta[0]) < 3.0 * stderr_mean);
}

TEST_CASE("noise-free integrator converges at first order") {
  dynamics::SimConfig config;
  config.d = 1;
  config.m = Batchsize::infinite();
  config.t_end = 2 * kPi;
  config.seed = 0;
  config.record_stride = 1 << 30;
  config.initial = ParamState{{1.0}, {0.0}};
  const auto exact = dynamics::exact_orbit(*config.initial, config.t_end, config.schedule);

  config.dt = 2e-3;
  const double coarse = max_norm_err(dynamics::simulate_path(config).final_state(), exact);
  config.dt = 1e-3;
  const double fine = max_norm_err(dynamics::simulate_path(config).final_state(), exact);
  const double ratio = coarse / fine;
  CHECK(ratio > 1.7);
  CHECK(ratio < 2.3);
}

TEST_CASE("energy is conserved along the closed forms and nearly so by the integrator") {
  const ParamState init{{0.3, -0.5}, {0.2, 0.7}};
  const double e0 = energy(init);
  for (const auto& schedule : {StepSchedule::constant(), StepSchedule::vanishing()}) {
    const double t0 = schedule.start_time();
    const double period_end = schedule.is_vanishing() ? std::exp(2 * kPi) : 2 * kPi;
    for (int k = 1; k <= 8; ++k) {
      const double t = t0 + (period_end - t0) * k / 8.0;
      const auto s = dynamics::exact_orbit(init, t, schedule);
      CHECK(std::abs(energy(s) - e0) / e0 < 1e-6);
      // Lipschitz-style bound on the discriminator norm along the orbit
      double wn = 0.0, w0n = 0.0, t0n = 0.0;
      for (double v : s.w) wn += v * v;
      for (double v : init.w) w0n += v * v;
      for (double v : init.theta) t0n += v * v;
      CHECK(std::sqrt(wn) <= std::sqrt(w0n) + std::sqrt(t0n) + 1e-12);
    }
  }

  dynamics::SimConfig config;
  config.d = 2;
  config.m = Batchsize::infinite();
  config.dt = 1e-4;
  config.t_end = 2 * kPi;
  config.seed = 0;
  config.record_stride = 1 << 30;
  config.initial = init;
  const auto end = dynamics::simulate_path(config).final_state();
  CHECK(std::abs(energy(end) - e0) / e0 < 10 * config.dt);
}

TEST_CASE("variance_oracle: constant schedule") {
  const auto schedule = StepSchedule::constant();
  CHECK(dynamics::variance_oracle(0.0, 3, 1, 1, schedule) == 0.0);

  // independent quadrature of the integrand (2/m) sin^2(s) over [0, pi]
  const double quad =
      simpson([](double s) { return 0.5 * std::sin(s) * std::sin(s); }, 0.0, kPi, 20000);
  const double oracle = dynamics::variance_oracle(kPi, 4, 1, 1, schedule);
  CHECK(oracle == Approx(quad).epsilon(1e-9));
  CHECK(oracle == Approx(0.78540).margin(5e-6));  // pi/4 from the quadrature

  CHECK(dynamics::variance_oracle(kPi, 8, 1, 1, schedule) == Approx(oracle / 2.0).epsilon(1e-12));

  SECTION("monotone nondecreasing in t") {
    double prev = 0.0;
    for (int k = 1; k <= 40; ++k) {
      const double v = dynamics::variance_oracle(0.25 * k, 2, 3, 2, schedule);
      CHECK(v >= prev - 1e-15);
      prev = v;
    }
  }
  SECTION("exact 1/m scaling") {
    const double base = dynamics::variance_oracle(2.7, 1, 1, 1, schedule) * 1.0;
    for (std::uint64_t m : {2ULL, 5ULL, 16ULL, 1024ULL}) {
      const double scaled = dynamics::variance_oracle(2.7, m, 1, 1, schedule) * m;
      CHECK(scaled == Approx(base).epsilon(1e-9));
    }
  }
  SECTION("invalid component") {
    CHECK_THROWS_AS(dynamics::variance_oracle(1.0, 1, 2, 3, schedule), std::out_of_range);
    CHECK_THROWS_AS(dynamics::variance_oracle(1.0, 1, 2, 0, schedule), std::out_of_range);
  }
}

TEST_CASE("variance_oracle: vanishing schedule against a Riemann sum") {
  const auto schedule = StepSchedule::vanishing();
  const double t = 10.0;
  const std::uint64_t m = 3;

  // brute-force midpoint Riemann sum of (2/m) sin^2(ln(t/s)) / s^2, 1e7 panels
  const long long panels = 10000000;
  const double h = (t - 1.0) / panels;
  double riemann = 0.0;
  for (long long i = 0; i < panels; ++i) {
    const double s = 1.0 + (i + 0.5) * h;
    const double sine = std::sin(std::log(t / s));
    riemann += sine * sine / (s * s);
  }
  riemann *= (2.0 / m) * h;

  const double oracle = dynamics::variance_oracle(t, m, 1, 1, schedule);
  CHECK(oracle == Approx(riemann).epsilon(1e-6));

  SECTION("exact 1/m scaling") {
    const double base = oracle * m;
    for (std::uint64_t mm : {1ULL, 8ULL, 64ULL}) {
      CHECK(dynamics::variance_oracle(t, mm, 1, 1, schedule) * mm ==
            Approx(base).epsilon(1e-6));
    }
  }
  SECTION("alternate diffusion reading stays 1/m and differs from the default") {
    const double alt =
        dynamics::variance_oracle(t, m, 1, 1, schedule, dynamics::SigmaReading::FinalTime);
    CHECK(alt != Approx(oracle).epsilon(1e-3));
    CHECK(dynamics::variance_oracle(t, 2 * m, 1, 1, schedule,
                                    dynamics::SigmaReading::FinalTime) ==
          Approx(alt / 2.0).epsilon(1e-9));
  }
  SECTION("rejects t < 1") {
    CHECK_THROWS_AS(dynamics::variance_oracle(0.5, 1, 1, 1, schedule), std::domain_error);
  }
}

TEST_CASE("SimConfig validation lists violations") {
  dynamics::SimConfig config;
  config.d = 0;
  config.dt = -1.0;
  config.t_end = -2.0;
  const auto problems = config.violations();
  CHECK(problems.size() >= 3);
  CHECK_THROWS_AS(config.validate(), std::invalid_argument);

  dynamics::SimConfig vanish;
  vanish.schedule = StepSchedule::vanishing();
  vanish.t_start = 0.0;  // must be 1 for the vanishing schedule
  vanish.t_end = 2.0;
  CHECK_FALSE(vanish.violations().empty());
}
