// Copyright (c) 2026 deitsp contributors
// SPDX-License-Identifier: Apache-2.0
#include "deitsp/diffusion.hpp"

#include <algorithm>
#include <cmath>

namespace deitsp {

NoiseSchedule::NoiseSchedule(std::vector<double> betas)
    : betas_(std::move(betas)) {
  if (betas_.empty()) throw UsageError("noise schedule needs at least 1 step");
  gammas_.reserve(betas_.size());
  double g = 1.0;
  for (double b : betas_) {
    if (!(b > 0.0 && b < 0.5))
      throw UsageError("beta values must lie in (0, 0.5)");
    g *= 1.0 - 2.0 * b;
    gammas_.push_back(g);
  }
}

NoiseSchedule NoiseSchedule::linear(int steps) {
  if (steps < 1) throw UsageError("noise schedule needs at least 1 step");
  constexpr double kBetaStart = 1e-4;
  constexpr double kBetaEnd = 0.02;
  std::vector<double> betas(static_cast<size_t>(steps));
  for (int t = 1; t <= steps; ++t)
    betas[static_cast<size_t>(t - 1)] =
        steps == 1 ? kBetaStart
                   : kBetaStart + (kBetaEnd - kBetaStart) * (t - 1) / (steps - 1);
  return NoiseSchedule(std::move(betas));
}

NoiseSchedule NoiseSchedule::from_betas(std::vector<double> betas) {
  return NoiseSchedule(std::move(betas));
}

double NoiseSchedule::beta(int t) const {
  if (t < 1 || t > steps())
    throw UsageError("timestep " + std::to_string(t) + " outside 1.." +
                     std::to_string(steps()));
  return betas_[static_cast<size_t>(t - 1)];
}

double NoiseSchedule::gamma(int t) const {
  if (t < 1 || t > steps())
    throw UsageError("timestep " + std::to_string(t) + " outside 1.." +
                     std::to_string(steps()));
  return gammas_[static_cast<size_t>(t - 1)];
}

TransitionMatrix NoiseSchedule::single(int t) const {
  const double b = beta(t);
  return TransitionMatrix{{{{1.0 - b, b}, {b, 1.0 - b}}}};
}

TransitionMatrix NoiseSchedule::cumulative(int t) const {
  const double g = gamma(t);
  const double stay = (1.0 + g) / 2.0;
  const double flip = (1.0 - g) / 2.0;
  return TransitionMatrix{{{{stay, flip}, {flip, stay}}}};
}

double NoiseSchedule::flip_probability(int t) const {
  return (1.0 - gamma(t)) / 2.0;
}

namespace {

// Shared pair scan. present(i, j) gives the clean probability of state 1;
// one uniform draw per unordered pair keeps RNG consumption independent of
// the data.
template <typename PresentFn>
EdgeMatrix noise_pairs(int n, double flip, PresentFn present, Rng& rng) {
  EdgeMatrix out(n);
  for (int i = 0; i < n - 1; ++i)
    for (int j = i + 1; j < n; ++j) {
      const double p1 = flip + present(i, j) * (1.0 - 2.0 * flip);
      out.set(i, j, rng.uniform() < p1 ? 1 : 0);
    }
  return out;
}

}  // namespace

EdgeMatrix add_noise(const EdgeMatrix& clean, const NoiseSchedule& schedule,
                     int t, Rng& rng) {
  const double flip = schedule.flip_probability(t);
  return noise_pairs(
      clean.size(), flip,
      [&](int i, int j) { return static_cast<double>(clean.at(i, j)); }, rng);
}

EdgeMatrix add_noise(const Heatmap& predicted, const NoiseSchedule& schedule,
                     int t, Rng& rng) {
  const double flip = schedule.flip_probability(t);
  return noise_pairs(
      predicted.n, flip,
      [&](int i, int j) {
        const double p = (predicted.at(i, j) + predicted.at(j, i)) / 2.0;
        return std::clamp(p, 0.0, 1.0);
      },
      rng);
}

EdgeMatrix sample_uniform_state(int n, Rng& rng) {
  return noise_pairs(
      n, 0.5, [](int, int) { return 0.0; }, rng);
}

const char* schedule_kind_name(ScheduleKind kind) {
  switch (kind) {
    case ScheduleKind::kLinear:
      return "linear";
    case ScheduleKind::kCosine:
      return "cosine";
    case ScheduleKind::kInverse:
      return "inverse";
  }
  return "?";
}

std::optional<ScheduleKind> schedule_kind_from_name(const std::string& name) {
  if (name == "linear") return ScheduleKind::kLinear;
  if (name == "cosine") return ScheduleKind::kCosine;
  if (name == "inverse") return ScheduleKind::kInverse;
  return std::nullopt;
}

namespace {

std::pair<double, double> default_interval(ScheduleKind kind) {
  switch (kind) {
    case ScheduleKind::kLinear:
    case ScheduleKind::kCosine:
      return {0.0, 1.0};
    case ScheduleKind::kInverse:
      return {0.25, 1.5};
  }
  return {0.0, 1.0};
}

std::function<double(double)> kind_function(ScheduleKind kind) {
  switch (kind) {
    case ScheduleKind::kLinear:
      return [](double c) { return c; };
    case ScheduleKind::kCosine:
      return [](double c) { return std::cos(M_PI * c / 2.0); };
    case ScheduleKind::kInverse:
      return [](double c) { return 1.0 / c; };
  }
  throw UsageError("unknown schedule kind");
}

}  // namespace

IterationSchedule make_iteration_schedule(
    const std::function<double(double)>& f, int iterations, int diffusion_steps,
    double lo, double hi) {
  if (iterations < 1) throw UsageError("iterations must be >= 1");
  if (diffusion_steps < 2)
    throw UsageError("iteration schedules need diffusion_steps >= 2");
  if (!(lo < hi)) throw UsageError("schedule interval needs lo < hi");

  IterationSchedule sched;
  sched.iterations = iterations;
  const int S = iterations - 1;
  if (S == 0) return sched;

  const double f_lo = f(lo), f_hi = f(hi);
  const double f_min = std::min(f_lo, f_hi);
  const double f_max = std::max(f_lo, f_hi);
  if (!(f_max - f_min > 1e-12))
    throw ConfigError("schedule source function is flat on its interval");

  for (int i = 1; i <= S; ++i) {
    const double c = lo + (hi - lo) * (i - 0.5) / S;
    const double norm = (f(c) - f_min) / (f_max - f_min);
    int tau = static_cast<int>(std::floor(norm * diffusion_steps));
    tau = std::clamp(tau, 1, diffusion_steps - 1);
    sched.taus.push_back(tau);
  }
  std::sort(sched.taus.begin(), sched.taus.end(), std::greater<int>());
  for (size_t k = 1; k < sched.taus.size(); ++k)
    if (sched.taus[k] == sched.taus[k - 1])
      throw ConfigError(
          "iteration schedule collapses to duplicate timestep " +
          std::to_string(sched.taus[k]) +
          "; reduce iterations or raise diffusion_steps");
  return sched;
}

IterationSchedule make_iteration_schedule(ScheduleKind kind, int iterations,
                                          int diffusion_steps, double lo,
                                          double hi) {
  return make_iteration_schedule(kind_function(kind), iterations,
                                 diffusion_steps, lo, hi);
}

IterationSchedule make_iteration_schedule(ScheduleKind kind, int iterations,
                                          int diffusion_steps) {
  const auto [lo, hi] = default_interval(kind);
  return make_iteration_schedule(kind, iterations, diffusion_steps, lo, hi);
}

}  // namespace deitsp
