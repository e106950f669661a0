#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "ganlab/dynamics.hpp"
#include "ganlab/rng.hpp"
#include "ganlab/util.hpp"

// Monte Carlo estimation of the generator-parameter variance across
// batchsizes, with a log-log fit against the 1/m law.
namespace ganlab::variance_lab {

struct SweepConfig {
  dynamics::SimConfig base;  // its m and t_end are overwritten per estimate
  std::vector<std::uint64_t> m_values;
  int n_paths = 2;
  double t_eval = 1.0;
  int component = 1;  // 1-based index into theta
  int n_threads = 1;  // <= 0 selects hardware concurrency

  std::vector<std::string> violations() const {
    std::vector<std::string> out;
    if (m_values.empty()) out.push_back("m_values: must be nonempty");
    for (std::size_t i = 0; i + 1 < m_values.size(); ++i)
      if (m_values[i] >= m_values[i + 1]) {
        out.push_back("m_values: must be strictly increasing");
        break;
      }
    for (std::uint64_t m : m_values)
      if (m == 0) {
        out.push_back("m_values: entries must be positive");
        break;
      }
    if (n_paths < 2) out.push_back("n_paths: must be >= 2");
    if (!(t_eval > base.t_start) || t_eval > base.t_end)
      out.push_back("t_eval: must lie in (t_start, t_end]");
    if (component < 1 || component > base.d) out.push_back("component: must satisfy 1 <= i <= d");
    return out;
  }

  void validate() const {
    auto v = violations();
    // base constraints apply with t_end replaced by t_eval
    dynamics::SimConfig probe = base;
    probe.t_end = t_eval;
    for (auto& msg : probe.violations()) v.push_back("base." + msg);
    if (!v.empty()) throw std::invalid_argument("SweepConfig: " + util::join(v, "; "));
  }
};

struct VarianceEstimate {
  std::uint64_t m = 0;  // 0 encodes the infinite batchsize
  double var_hat = 0.0;
  double std_error = 0.0;
  int n_paths = 0;
};

struct ScalingFit {
  double slope = 0.0;
  double intercept = 0.0;
  double r_squared = 0.0;
};

// Unbiased sample variance of theta_[component] at t_eval over n_paths
// independent paths, plus the asymptotic standard error of that variance
// computed from the empirical fourth central moment. Path p of batchsize m
// uses the stream seeded by derive(derive(master, m), p), so every cell of a
// sweep is reproducible in isolation.
inline VarianceEstimate estimate_variance(const SweepConfig& config, dynamics::Batchsize m) {
  config.validate();
  if (config.n_paths < 2) throw std::invalid_argument("estimate_variance: n_paths must be >= 2");

  dynamics::SimConfig run = config.base;
  run.m = m;
  run.t_end = config.t_eval;
  run.record_stride = std::numeric_limits<std::int64_t>::max();  // final state only
  const std::uint64_t m_key = m.is_infinite() ? 0 : m.value();
  const std::uint64_t root = rng::derive_seed(config.base.seed, m_key);

  const int n = config.n_paths;
  std::vector<double> values(n);
  util::parallel_for(n, config.n_threads, [&](std::int64_t p) {
    dynamics::SimConfig path = run;
    path.seed = rng::derive_seed(root, static_cast<std::uint64_t>(p));
    const auto traj = dynamics::simulate_path(path);
    values[p] = traj.final_state().theta[config.component - 1];
  });

  double mean = 0.0;
  for (double v : values) mean += v;
  mean /= n;
  double sum2 = 0.0, sum4 = 0.0;
  for (double v : values) {
    const double c = v - mean;
    sum2 += c * c;
    sum4 += c * c * c * c;
  }
  const double var_hat = sum2 / (n - 1);
  const double m4 = sum4 / n;
  const double var_of_var = (m4 - var_hat * var_hat * (n - 3.0) / (n - 1.0)) / n;
  return {m_key, var_hat, std::sqrt(std::max(0.0, var_of_var)), n};
}

inline std::vector<VarianceEstimate> sweep(const SweepConfig& config) {
  config.validate();
  std::vector<VarianceEstimate> out;
  out.reserve(config.m_values.size());
  for (std::uint64_t m : config.m_values)
    out.push_back(estimate_variance(config, dynamics::Batchsize::finite(m)));
  return out;
}

// Ordinary least squares of log(var_hat) against log(m); the 1/m law
// predicts slope -1. Estimates are sorted internally, so the fit does not
// depend on the input order.
inline ScalingFit fit_scaling(std::vector<VarianceEstimate> estimates) {
  if (estimates.size() < 3)
    throw std::invalid_argument("fit_scaling: need at least 3 estimates");
  for (const auto& e : estimates) {
    if (e.m == 0) throw std::invalid_argument("fit_scaling: infinite batchsize has no log(m)");
    if (!(e.var_hat > 0.0))
      throw std::invalid_argument("fit_scaling: variances must be positive");
  }
  std::sort(estimates.begin(), estimates.end(),
            [](const VarianceEstimate& a, const VarianceEstimate& b) {
              return a.m != b.m ? a.m < b.m : a.var_hat < b.var_hat;
            });
  const std::size_t n = estimates.size();
  double sx = 0.0, sy = 0.0;
  for (const auto& e : estimates) {
    sx += std::log(static_cast<double>(e.m));
    sy += std::log(e.var_hat);
  }
  const double mx = sx / n, my = sy / n;
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (const auto& e : estimates) {
    const double dx = std::log(static_cast<double>(e.m)) - mx;
    const double dy = std::log(e.var_hat) - my;
    sxx += dx * dx;
    sxy += dx * dy;
    syy += dy * dy;
  }
  if (sxx == 0.0) throw std::invalid_argument("fit_scaling: m values must not be all equal");
  ScalingFit fit;
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  if (syy == 0.0) {
    fit.r_squared = 1.0;  // constant y is fit exactly by the horizontal line
  } else {
    double ss_res = 0.0;
    for (const auto& e : estimates) {
      const double pred = fit.intercept + fit.slope * std::log(static_cast<double>(e.m));
      const double r = std::log(e.var_hat) - pred;
      ss_res += r * r;
    }
    fit.r_squared = std::clamp(1.0 - ss_res / syy, 0.0, 1.0);
  }
  return fit;
}

}  // namespace ganlab::variance_lab
