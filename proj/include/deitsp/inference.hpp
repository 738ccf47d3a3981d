// Copyright (c) 2026 deitsp contributors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <functional>
#include <optional>
#include <utility>
#include <vector>

#include "deitsp/dataset.hpp"
#include "deitsp/diffusion.hpp"
#include "deitsp/model.hpp"

namespace deitsp {

// Builds a tour by inserting edges in descending (p_ij + p_ji) / cost order,
// skipping any edge that would push a node past degree 2 or close a cycle
// early. Score ties break on (i, j) lexicographic order, so equal heatmaps
// decode identically everywhere. Total on every valid heatmap.
Tour greedy_decode(const Heatmap& heatmap, const TspInstance& inst);

struct InferenceConfig {
  int iterations = 1;  // M: denoise passes, hence solutions generated
  ScheduleKind schedule = ScheduleKind::kInverse;
  // Overrides the schedule kind's default sampling interval when set.
  std::optional<std::pair<double, double>> interval;
  bool two_opt = true;
  std::uint64_t seed = 0;
};

// One denoise iteration's outcome.
struct SolutionEntry {
  int iteration = 0;  // 0-based
  int timestep = 0;   // noise level the state was denoised from
  Heatmap heatmap;
  Tour tour;
  double length = 0.0;
};

struct SolveResult {
  Tour best_tour;
  double best_length = 0.0;
  int best_iteration = 0;
  std::vector<SolutionEntry> set;  // exactly config.iterations entries
};

// Alternating denoise/re-noise loop: start from the uniform prior at t = T,
// and per iteration predict a heatmap, decode it (2-opt optional), then
// re-noise the prediction down to the next scheduled timestep. The state
// consumed by iteration i is drawn on RNG stream i of the seed (stream 0
// seeds the uniform prior), so runs sharing a seed produce identical first
// entries regardless of the iteration count, and best-of-set length can
// only improve with more iterations.
SolveResult solve(const Model& model, const TspInstance& inst,
                  const InferenceConfig& cfg);

// Instance solver used by evaluate; the index lets callers derive
// per-instance seeds.
using SolveFn = std::function<SolveResult(const TspInstance&, size_t)>;

struct EvalOutcome {
  std::vector<ResultRecord> records;  // one per dataset record, in order
  double mean_length = 0.0;
  double mean_seconds = 0.0;
  // Mean over records with a reference; count carried alongside.
  double mean_gap_percent = 0.0;
  int gap_count = 0;
};

// Runs the solver over every record (workers > 1 solve instances in
// parallel; outputs stay index-ordered either way) and aggregates lengths,
// gaps against each record's reference optimum, and per-instance wall time
// measured around the solver call only.
EvalOutcome evaluate(const SolveFn& solver,
                     const std::vector<DatasetRecord>& data,
                     const std::string& method, int iterations, int workers);

// Convenience wrapper: solve with `model`, per-instance seed mixed from
// (cfg.seed, index).
EvalOutcome evaluate(const Model& model,
                     const std::vector<DatasetRecord>& data,
                     const InferenceConfig& cfg, const std::string& method,
                     int workers);

std::string format_eval_summary(const EvalOutcome& outcome);

}  // namespace deitsp
