// Copyright (c) 2026 deitsp contributors
// SPDX-License-Identifier: Apache-2.0
#include "deitsp/training.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

namespace deitsp {

namespace {
constexpr std::uint64_t kShuffleStream = 0x73687566ull;  // epoch ordering
constexpr std::uint64_t kNoiseStream = 0x6e6f6973ull;    // per-step noise
}  // namespace

void TrainingConfig::validate(int diffusion_steps) const {
  if (steps < 1) throw ConfigError("training: steps must be >= 1");
  if (batch_size < 1) throw ConfigError("training: batch size must be >= 1");
  if (consistency_gap < 1 || consistency_gap >= diffusion_steps)
    throw ConfigError("training: consistency gap must be in [1, T), got " +
                      std::to_string(consistency_gap) + " with T=" +
                      std::to_string(diffusion_steps));
  if (consistency_weight < 0.0)
    throw ConfigError("training: consistency weight must be >= 0");
  if (!(lr > 0.0)) throw ConfigError("training: learning rate must be > 0");
  if (plateau_window < 0)
    throw ConfigError("training: plateau window must be >= 0");
}

Tensor consistency_loss(const Tensor& logits_near, const Tensor& logits_far,
                        const EdgeMatrix& truth, double weight,
                        LossTerms* terms) {
  const int n = truth.size();
  const int cells = n * n;
  if (logits_near.shape() != Shape{cells, 2} ||
      logits_far.shape() != Shape{cells, 2})
    throw ShapeError("consistency_loss: logits must be (n*n, 2)");
  for (const Tensor* t : {&logits_near, &logits_far})
    for (double v : t->data())
      if (!std::isfinite(v))
        throw NumericError("consistency_loss: non-finite logit");

  std::vector<int> targets(static_cast<size_t>(cells));
  std::vector<std::uint8_t> mask(static_cast<size_t>(cells), 1);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      targets[static_cast<size_t>(i * n + j)] = truth.at(i, j);
      if (i == j) mask[static_cast<size_t>(i * n + j)] = 0;
    }

  Tensor ce_far = softmax_cross_entropy(logits_far, targets, mask);
  Tensor ce_near = softmax_cross_entropy(logits_near, targets, mask);

  std::vector<double> mask_vals(mask.begin(), mask.end());
  Tensor mask_t = Tensor::from_data({cells}, std::move(mask_vals));
  Tensor p_far = slice_lastdim(softmax(logits_far), 1);
  Tensor p_near = slice_lastdim(softmax(logits_near), 1);
  Tensor gap = l2_norm(mul(sub(p_far, p_near), mask_t));

  Tensor total = add(add(ce_far, ce_near), scale(gap, weight));
  if (terms) {
    terms->ce_far = ce_far.item();
    terms->ce_near = ce_near.item();
    terms->consistency = gap.item();
    terms->total = total.item();
  }
  return total;
}

TrainingExample make_training_example(const EdgeMatrix& truth,
                                      const NoiseSchedule& schedule, int gap,
                                      Rng& rng) {
  const int steps = schedule.steps();
  TrainingExample ex{0, 0, EdgeMatrix(truth.size()), EdgeMatrix(truth.size())};
  ex.t_near = 1 + rng.uniform_int(steps);
  ex.t_far = std::min(ex.t_near + gap, steps);
  ex.state_near = add_noise(truth, schedule, ex.t_near, rng);
  ex.state_far = add_noise(truth, schedule, ex.t_far, rng);
  return ex;
}

Tensor record_loss(Model& model, const DatasetRecord& record,
                   const TrainingExample& example, double weight,
                   LossTerms* terms) {
  Tensor near = model.forward_logits(record.instance, example.state_near,
                                     example.t_near);
  Tensor far =
      model.forward_logits(record.instance, example.state_far, example.t_far);
  const EdgeMatrix truth = tour_to_edge_matrix(record.optimal_tour);
  return consistency_loss(near, far, truth, weight, terms);
}

TrainingResult train(Model& model, const std::vector<DatasetRecord>& data,
                     const TrainingConfig& cfg, const ProgressFn& progress) {
  cfg.validate(model.config().diffusion_steps);
  if (data.empty()) throw UsageError("training: dataset is empty");

  const NoiseSchedule schedule =
      NoiseSchedule::linear(model.config().diffusion_steps);
  Adam opt(AdamConfig{cfg.lr, 0.9, 0.999, 1e-8});

  std::vector<size_t> order(data.size());
  std::iota(order.begin(), order.end(), 0);
  size_t cursor = order.size();  // forces a shuffle before the first batch
  std::uint64_t epoch = 0;

  TrainingResult result;
  double best = std::numeric_limits<double>::infinity();
  int best_step = 0;

  for (int step = 1; step <= cfg.steps; ++step) {
    Rng noise(cfg.seed, kNoiseStream + static_cast<std::uint64_t>(step));

    std::vector<size_t> batch;
    for (int b = 0; b < cfg.batch_size; ++b) {
      if (cursor == order.size()) {
        Rng shuffler(cfg.seed, kShuffleStream + epoch++);
        shuffler.shuffle(order.begin(), order.end());
        cursor = 0;
      }
      batch.push_back(order[cursor++]);
    }

    Tensor batch_loss;
    LossTerms mean{};
    for (size_t idx : batch) {
      const DatasetRecord& rec = data[idx];
      const EdgeMatrix truth = tour_to_edge_matrix(rec.optimal_tour);
      const TrainingExample ex =
          make_training_example(truth, schedule, cfg.consistency_gap, noise);
      LossTerms terms;
      Tensor loss =
          record_loss(model, rec, ex, cfg.consistency_weight, &terms);
      if (!std::isfinite(terms.total))
        throw NumericError("training: non-finite loss at step " +
                           std::to_string(step) + ", t=" +
                           std::to_string(ex.t_near) + ", record " +
                           rec.instance.name());
      mean.ce_far += terms.ce_far;
      mean.ce_near += terms.ce_near;
      mean.consistency += terms.consistency;
      mean.total += terms.total;
      batch_loss = batch_loss.defined() ? add(batch_loss, loss) : loss;
    }
    const double inv = 1.0 / static_cast<double>(batch.size());
    mean.ce_far *= inv;
    mean.ce_near *= inv;
    mean.consistency *= inv;
    mean.total *= inv;

    backward(scale(batch_loss, inv));
    opt.step(model.params());

    result.curve.push_back(StepRecord{step, mean});
    result.steps_run = step;
    if (progress) progress(result.curve.back());

    if (mean.total < best - cfg.plateau_tolerance) {
      best = mean.total;
      best_step = step;
    } else if (cfg.plateau_window > 0 &&
               step - best_step >= cfg.plateau_window) {
      result.stopped_early = true;
      break;
    }
  }
  return result;
}

}  // namespace deitsp
