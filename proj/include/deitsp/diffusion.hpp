// Copyright (c) 2026 deitsp contributors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "deitsp/rng.hpp"
#include "deitsp/tsp.hpp"

namespace deitsp {

// Row-stochastic 2x2 transition over edge states {absent=0, present=1};
// m[row][col] = P(next=col | current=row).
struct TransitionMatrix {
  std::array<std::array<double, 2>, 2> m;
};

// Forward-process schedule for the binary edge diffusion. Each step applies
// the symmetric flip matrix [[1-b, b], [b, 1-b]]; t steps compose to
// [[ (1+g)/2, (1-g)/2 ], [ (1-g)/2, (1+g)/2 ]] with g = prod(1 - 2*b_s),
// which is what cumulative() returns in closed form.
class NoiseSchedule {
 public:
  // b_t rises linearly from 1e-4 at t=1 to 0.02 at t=T.
  static NoiseSchedule linear(int steps);
  static NoiseSchedule from_betas(std::vector<double> betas);

  int steps() const { return static_cast<int>(betas_.size()); }
  // t is 1-based throughout.
  double beta(int t) const;
  double gamma(int t) const;
  TransitionMatrix single(int t) const;
  TransitionMatrix cumulative(int t) const;
  // P(a bit differs from its clean value after t steps) = (1 - g_t) / 2.
  double flip_probability(int t) const;

 private:
  explicit NoiseSchedule(std::vector<double> betas);
  std::vector<double> betas_;
  std::vector<double> gammas_;  // gammas_[t-1] = prod_{s<=t} (1 - 2*b_s)
};

// Samples a_t ~ Cate(a_0 * cumulative(t)) one unordered node pair at a time
// (pairs scanned in (i, j), i < j order; one uniform draw per pair), keeping
// the result symmetric with a zero diagonal.
EdgeMatrix add_noise(const EdgeMatrix& clean, const NoiseSchedule& schedule,
                     int t, Rng& rng);

// Same, but the clean state is soft: each unordered pair's probability of
// being present is the symmetrized heatmap value (p_ij + p_ji) / 2. Used to
// re-noise a denoised prediction part-way through inference.
EdgeMatrix add_noise(const Heatmap& predicted, const NoiseSchedule& schedule,
                     int t, Rng& rng);

// The fully-noised prior: every unordered pair Bernoulli(1/2).
EdgeMatrix sample_uniform_state(int n, Rng& rng);

// Where the alternating inference loop re-noises to. A source function f on
// [lo, hi] is sampled at the S = iterations-1 interval midpoints
// c_i = lo + (hi-lo)*(i-0.5)/S, normalized against f's endpoint values, and
// scaled to timesteps floor(norm * steps), clamped into [1, steps-1]. The
// result is sorted into a strictly decreasing sequence; if the mapping
// collapses two midpoints onto one timestep that is a ConfigError rather
// than a silent dedup (it would change the effective iteration count).
enum class ScheduleKind {
  kLinear,   // f(c) = c on [0, 1]
  kCosine,   // f(c) = cos(pi*c/2) on [0, 1]
  kInverse,  // f(c) = 1/c on [0.25, 1.5]; front-loads small timesteps
};

const char* schedule_kind_name(ScheduleKind kind);
std::optional<ScheduleKind> schedule_kind_from_name(const std::string& name);

struct IterationSchedule {
  int iterations = 1;     // M: total denoise passes
  std::vector<int> taus;  // M-1 re-noise targets, strictly decreasing
};

IterationSchedule make_iteration_schedule(ScheduleKind kind, int iterations,
                                          int diffusion_steps);
IterationSchedule make_iteration_schedule(ScheduleKind kind, int iterations,
                                          int diffusion_steps, double lo,
                                          double hi);
IterationSchedule make_iteration_schedule(
    const std::function<double(double)>& f, int iterations, int diffusion_steps,
    double lo, double hi);

}  // namespace deitsp
