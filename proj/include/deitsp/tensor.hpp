// Copyright (c) 2026 deitsp contributors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <string>
#include <unordered_map>
#include <vector>

#include "deitsp/errors.hpp"
#include "deitsp/rng.hpp"

namespace deitsp {

using Shape = std::vector<int>;

std::string shape_str(const Shape& s);
std::int64_t shape_numel(const Shape& s);

namespace detail {

struct Node {
  Shape shape;
  std::vector<double> value;
  std::vector<double> grad;  // allocated iff requires_grad
  bool requires_grad = false;
  std::string name;  // set for parameters, empty otherwise
  std::vector<std::shared_ptr<Node>> parents;
  // Pull-style: reads this node's grad, accumulates into parents' grads.
  std::function<void(Node&)> backward;

  std::int64_t numel() const { return shape_numel(shape); }
};

}  // namespace detail

// When false (see NoGradGuard), ops compute values only: no parents, no
// backward closures, nothing to keep alive. Inference runs this way.
bool autograd_enabled();

struct NoGradGuard {
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool saved_;
};

// Shared handle to a tape node. Copies alias the same storage.
class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(Shape shape);
  static Tensor constant(Shape shape, double v);
  static Tensor from_data(Shape shape, std::vector<double> data);
  static Tensor scalar(double v);

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const;
  std::int64_t numel() const;
  const std::vector<double>& data() const;
  std::vector<double>& data();  // for leaf initialization
  const std::vector<double>& grad() const;
  bool requires_grad() const;
  Tensor& set_requires_grad(bool on);
  const std::string& name() const;
  Tensor& set_name(std::string name);
  // Value of a one-element tensor.
  double item() const;

  std::shared_ptr<detail::Node> node() const { return node_; }
  explicit Tensor(std::shared_ptr<detail::Node> node) : node_(std::move(node)) {}

 private:
  std::shared_ptr<detail::Node> node_;
};

// ---- ops ----------------------------------------------------------------
// Every op funnels through a registry keyed by name; using an unregistered
// op name is an internal error, and the gradient-check suite iterates the
// registry so an op cannot exist without a corresponding check.
const std::vector<std::string>& registered_op_names();

// Matrix product over the trailing two dims. Leading (batch) dims must be
// identical, or one operand may omit them entirely to be shared across the
// batch.
Tensor matmul(const Tensor& a, const Tensor& b);

// Elementwise with right-aligned broadcasting (dims equal or 1).
Tensor add(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);

Tensor scale(const Tensor& a, double c);
Tensor add_scalar(const Tensor& a, double c);

Tensor relu(const Tensor& a);
Tensor sigmoid(const Tensor& a);
Tensor square(const Tensor& a);

// Softmax over the last dim.
Tensor softmax(const Tensor& a);

// Normalize over the last dim; gain/bias shaped like that dim.
Tensor layer_norm(const Tensor& a, const Tensor& gain, const Tensor& bias,
                  double eps = 1e-6);

// a is (rows, channels); normalizes each row within contiguous channel
// groups; per-channel gain/bias.
Tensor group_norm(const Tensor& a, int groups, const Tensor& gain,
                  const Tensor& bias, double eps = 1e-6);

// Kernel-size-1 convolution: a (len, in), w (out, in), b (out) -> (len, out).
Tensor pointwise_conv1d(const Tensor& a, const Tensor& w, const Tensor& b);

// table (vocab, dim), indices (len) -> (len, dim).
Tensor embedding_lookup(const Tensor& table, const std::vector<int>& indices);

Tensor concat(const std::vector<Tensor>& parts, int axis);
Tensor transpose(const Tensor& a, const std::vector<int>& perm);
Tensor reshape(const Tensor& a, Shape shape);

Tensor sum(const Tensor& a);
Tensor mean(const Tensor& a);
// sqrt(sum of squares); gradient defined as 0 at the origin.
Tensor l2_norm(const Tensor& a);

// Drops the last dim by picking one index from it.
Tensor slice_lastdim(const Tensor& a, int index);

// logits (rows, classes); mean over rows where mask != 0 of
// -log softmax(logits_row)[target_row]. Numerically stable (log-sum-exp).
Tensor softmax_cross_entropy(const Tensor& logits,
                             const std::vector<int>& targets,
                             const std::vector<std::uint8_t>& mask);

// Reverse pass from a scalar. Zeroes grads across the reachable graph
// first; after the call every requires-grad node holds d loss / d node.
void backward(const Tensor& loss);

// ---- parameters and optimizer -------------------------------------------

class ParameterStore {
 public:
  // Registers (and returns) a leaf tensor as a named trainable parameter.
  Tensor add(const std::string& name, Tensor t);
  Tensor get(const std::string& name) const;
  bool contains(const std::string& name) const;
  const std::vector<std::pair<std::string, Tensor>>& items() const {
    return items_;
  }
  std::int64_t total_parameters() const;

 private:
  std::vector<std::pair<std::string, Tensor>> items_;
  std::unordered_map<std::string, size_t> index_;
};

struct AdamConfig {
  double lr = 2e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// Adam with bias correction. Moment buffers are keyed by parameter name and
// created on first step. A non-finite gradient raises NumericError naming
// the parameter.
class Adam {
 public:
  explicit Adam(AdamConfig cfg) : cfg_(cfg) {}
  void step(ParameterStore& params);
  std::int64_t steps_taken() const { return t_; }
  const AdamConfig& config() const { return cfg_; }

 private:
  AdamConfig cfg_;
  std::int64_t t_ = 0;
  std::unordered_map<std::string, std::pair<std::vector<double>, std::vector<double>>>
      moments_;
};

// ---- checkpoints ---------------------------------------------------------

// Binary container: magic/version, ordered string metadata, then each
// parameter's name, shape, and raw float64 payload. Same store + meta always
// serializes to identical bytes.
struct Checkpoint {
  std::vector<std::pair<std::string, std::string>> meta;
  ParameterStore params;
};

void save_checkpoint(const std::filesystem::path& path,
                     const std::vector<std::pair<std::string, std::string>>& meta,
                     const ParameterStore& params);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace deitsp
