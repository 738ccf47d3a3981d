// Copyright (c) 2026 deitsp contributors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <functional>
#include <vector>

#include "deitsp/dataset.hpp"
#include "deitsp/diffusion.hpp"
#include "deitsp/model.hpp"

namespace deitsp {

struct TrainingConfig {
  int steps = 2000;
  int batch_size = 16;
  // Consistency pairs the predictions at t and min(t + gap, T).
  int consistency_gap = 20;
  double consistency_weight = 1.0;
  double lr = 2e-4;
  std::uint64_t seed = 0;
  // Stop early once the best batch loss has not improved by more than
  // plateau_tolerance for plateau_window consecutive steps. 0 disables.
  int plateau_window = 200;
  double plateau_tolerance = 1e-5;

  // diffusion_steps is the model's T; the gap must leave room below it.
  void validate(int diffusion_steps) const;
};

struct LossTerms {
  double ce_far = 0.0;       // cross-entropy at the heavier noise level
  double ce_near = 0.0;      // cross-entropy at the sampled level
  double consistency = 0.0;  // unweighted L2 between the two heatmaps
  double total = 0.0;        // ce_far + ce_near + weight * consistency
};

// Combined objective on two predictions of the same clean state: mean
// two-class cross-entropy of each against the truth over off-diagonal
// cells, plus weight times the L2 distance between the two predicted
// heatmaps (class-1 softmax, off-diagonal). Logits are (n*n, 2).
// Detached per-term values land in *terms when given.
Tensor consistency_loss(const Tensor& logits_near, const Tensor& logits_far,
                        const EdgeMatrix& truth, double weight,
                        LossTerms* terms = nullptr);

// The two noisy views Algorithm-style training feeds the model.
struct TrainingExample {
  int t_near = 0;
  int t_far = 0;  // min(t_near + gap, T)
  EdgeMatrix state_near;
  EdgeMatrix state_far;
};

// t_near uniform on {1..T}; each state sampled independently from the
// cumulative transition at its level.
TrainingExample make_training_example(const EdgeMatrix& truth,
                                      const NoiseSchedule& schedule, int gap,
                                      Rng& rng);

// Runs both forwards and builds the combined loss for one record.
Tensor record_loss(Model& model, const DatasetRecord& record,
                   const TrainingExample& example, double weight,
                   LossTerms* terms = nullptr);

struct StepRecord {
  int step = 0;  // 1-based
  LossTerms loss;  // batch mean
};

struct TrainingResult {
  std::vector<StepRecord> curve;
  int steps_run = 0;
  bool stopped_early = false;
};

using ProgressFn = std::function<void(const StepRecord&)>;

// Minimizes the combined objective with Adam. Batch order reshuffles each
// epoch
// as a pure function of (seed, epoch); noise draws are a pure function of
// (seed, step), so a rerun with the same seed reproduces every update. A
// non-finite loss aborts with the step, timestep, and record named.
TrainingResult train(Model& model, const std::vector<DatasetRecord>& data,
                     const TrainingConfig& cfg,
                     const ProgressFn& progress = nullptr);

}  // namespace deitsp
