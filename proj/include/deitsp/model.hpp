// Copyright (c) 2026 deitsp contributors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "deitsp/tensor.hpp"
#include "deitsp/tsp.hpp"

namespace deitsp {

struct ModelConfig {
  int layers = 3;
  int dim = 64;
  int heads = 4;
  int diffusion_steps = 1000;
  int groups = 8;    // classifier group-norm groups
  int ffn_mult = 2;  // hidden width multiplier in both FFNs

  void validate() const;
  std::vector<std::pair<std::string, std::string>> to_meta() const;
  static ModelConfig from_meta(
      const std::vector<std::pair<std::string, std::string>>& meta);
  bool operator==(const ModelConfig&) const = default;
};

// Sinusoidal position code used for the diffusion timestep (and nothing
// else: node identity stays positionless so predictions are permutation
// equivariant). dim must be even.
std::vector<double> sinusoidal_embedding(int t, int dim);

// Denoiser over (instance, noised edge state, timestep). Two coupled
// streams per layer: node states mix through multi-head attention whose
// logits are gated by edge features; edge states mix through the attention
// scores and receive the timestep signal; a group-norm + two pointwise
// convolutions turn final edge states into per-cell logits over
// {absent, present}.
class Model {
 public:
  Model(ModelConfig cfg, std::uint64_t seed);

  static Model load(const std::filesystem::path& path);
  void save(const std::filesystem::path& path) const;

  const ModelConfig& config() const { return cfg_; }
  ParameterStore& params() { return params_; }
  const ParameterStore& params() const { return params_; }

  // Training path: logits shaped (n*n, 2), graph recorded for backward.
  Tensor forward_logits(const TspInstance& inst, const EdgeMatrix& state,
                        int t) const;

  // Inference path: probability of each directed cell being part of the
  // tour (softmax channel 1), diagonal forced to zero; no autograd graph.
  Heatmap predict(const TspInstance& inst, const EdgeMatrix& state,
                  int t) const;

 private:
  Model(ModelConfig cfg, ParameterStore params);

  ModelConfig cfg_;
  ParameterStore params_;
};

}  // namespace deitsp
