// Copyright (c) 2026 deitsp contributors
// SPDX-License-Identifier: Apache-2.0
#include "deitsp/model.hpp"

#include <cmath>

namespace deitsp {

void ModelConfig::validate() const {
  if (layers < 1) throw ConfigError("model needs >= 1 layer");
  if (heads < 1) throw ConfigError("model needs >= 1 head");
  if (dim < 2 || dim % 2 != 0)
    throw ConfigError("model dim must be even and >= 2");
  if (dim % heads != 0)
    throw ConfigError("model dim " + std::to_string(dim) +
                      " not divisible by heads " + std::to_string(heads));
  if (groups < 1 || dim % groups != 0)
    throw ConfigError("model dim " + std::to_string(dim) +
                      " not divisible by group-norm groups " +
                      std::to_string(groups));
  if (ffn_mult < 1) throw ConfigError("ffn_mult must be >= 1");
  if (diffusion_steps < 1)
    throw ConfigError("model needs >= 1 diffusion step");
}

std::vector<std::pair<std::string, std::string>> ModelConfig::to_meta() const {
  return {
      {"format", "deitsp-model"},
      {"layers", std::to_string(layers)},
      {"dim", std::to_string(dim)},
      {"heads", std::to_string(heads)},
      {"diffusion_steps", std::to_string(diffusion_steps)},
      {"groups", std::to_string(groups)},
      {"ffn_mult", std::to_string(ffn_mult)},
  };
}

ModelConfig ModelConfig::from_meta(
    const std::vector<std::pair<std::string, std::string>>& meta) {
  ModelConfig cfg;
  bool format_ok = false;
  for (const auto& [k, v] : meta) {
    if (k == "format") {
      if (v != "deitsp-model")
        throw DataError("checkpoint format '" + v + "' is not a model");
      format_ok = true;
    } else if (k == "layers")
      cfg.layers = std::stoi(v);
    else if (k == "dim")
      cfg.dim = std::stoi(v);
    else if (k == "heads")
      cfg.heads = std::stoi(v);
    else if (k == "diffusion_steps")
      cfg.diffusion_steps = std::stoi(v);
    else if (k == "groups")
      cfg.groups = std::stoi(v);
    else if (k == "ffn_mult")
      cfg.ffn_mult = std::stoi(v);
    else
      throw DataError("unknown model meta key '" + k + "'");
  }
  if (!format_ok) throw DataError("checkpoint lacks a model format tag");
  cfg.validate();
  return cfg;
}

std::vector<double> sinusoidal_embedding(int t, int dim) {
  if (dim < 2 || dim % 2 != 0)
    throw UsageError("sinusoidal embedding dim must be even");
  std::vector<double> pe(static_cast<size_t>(dim));
  for (int k = 0; 2 * k < dim; ++k) {
    const double freq =
        std::pow(10000.0, -2.0 * static_cast<double>(k) / dim);
    pe[static_cast<size_t>(2 * k)] = std::sin(t * freq);
    pe[static_cast<size_t>(2 * k + 1)] = std::cos(t * freq);
  }
  return pe;
}

namespace {

enum class Init { kFanIn, kZero, kOne };

struct ParamSpec {
  std::string name;
  Shape shape;
  Init init;
  int fan_in = 0;
};

// Single source of truth for the parameter layout; both fresh
// initialization and checkpoint validation iterate this list.
std::vector<ParamSpec> layout(const ModelConfig& cfg) {
  const int d = cfg.dim, H = cfg.heads, f = cfg.ffn_mult * cfg.dim;
  std::vector<ParamSpec> specs;
  auto linear = [&](const std::string& base, int in, int out) {
    specs.push_back({base + ".w", {in, out}, Init::kFanIn, in});
    specs.push_back({base + ".b", {out}, Init::kZero, 0});
  };
  auto norm = [&](const std::string& base) {
    specs.push_back({base + ".gain", {d}, Init::kOne, 0});
    specs.push_back({base + ".bias", {d}, Init::kZero, 0});
  };

  linear("embed.node", 2, d);
  linear("embed.edge", 1, d);
  linear("embed.time", d, d);
  for (int l = 0; l < cfg.layers; ++l) {
    const std::string p = "layer" + std::to_string(l) + ".";
    // Attention projections carry no biases.
    specs.push_back({p + "attn.q.w", {d, d}, Init::kFanIn, d});
    specs.push_back({p + "attn.k.w", {d, d}, Init::kFanIn, d});
    specs.push_back({p + "attn.v.w", {d, d}, Init::kFanIn, d});
    // Edge features gate the attention logits (dim -> heads)...
    specs.push_back({p + "edge_gate.w1", {d, H}, Init::kFanIn, d});
    specs.push_back({p + "edge_gate.w2", {d, H}, Init::kFanIn, d});
    // ...and attention scores feed back into edges (heads -> dim).
    specs.push_back({p + "edge_mix.w1", {H, d}, Init::kFanIn, H});
    specs.push_back({p + "edge_mix.w2", {H, d}, Init::kFanIn, H});
    // Per-layer timestep injection, no bias.
    specs.push_back({p + "time.w", {d, d}, Init::kFanIn, d});
    norm(p + "node_norm");
    linear(p + "node_ffn.1", d, f);
    linear(p + "node_ffn.2", f, d);
    norm(p + "edge_norm");
    linear(p + "edge_ffn.1", d, f);
    linear(p + "edge_ffn.2", f, d);
  }
  norm("head.norm");
  specs.push_back({"head.conv1.w", {d, d}, Init::kFanIn, d});
  specs.push_back({"head.conv1.b", {d}, Init::kZero, 0});
  specs.push_back({"head.conv2.w", {2, d}, Init::kFanIn, d});
  specs.push_back({"head.conv2.b", {2}, Init::kZero, 0});
  return specs;
}

}  // namespace

Model::Model(ModelConfig cfg, std::uint64_t seed) : cfg_(cfg) {
  cfg_.validate();
  Rng rng(seed, 0x6d6f64656cull);  // dedicated init stream
  for (const ParamSpec& spec : layout(cfg_)) {
    const auto n = static_cast<size_t>(shape_numel(spec.shape));
    std::vector<double> data(n);
    switch (spec.init) {
      case Init::kZero:
        break;
      case Init::kOne:
        data.assign(n, 1.0);
        break;
      case Init::kFanIn: {
        const double bound = 1.0 / std::sqrt(static_cast<double>(spec.fan_in));
        for (double& v : data) v = (2.0 * rng.uniform() - 1.0) * bound;
        break;
      }
    }
    params_.add(spec.name, Tensor::from_data(spec.shape, std::move(data)));
  }
}

Model::Model(ModelConfig cfg, ParameterStore params)
    : cfg_(cfg), params_(std::move(params)) {
  cfg_.validate();
  const auto specs = layout(cfg_);
  if (params_.items().size() != specs.size())
    throw DataError("checkpoint has " +
                    std::to_string(params_.items().size()) +
                    " parameters, model wants " + std::to_string(specs.size()));
  for (const ParamSpec& spec : specs) {
    if (!params_.contains(spec.name))
      throw DataError("checkpoint missing parameter '" + spec.name + "'");
    if (params_.get(spec.name).shape() != spec.shape)
      throw DataError("checkpoint parameter '" + spec.name +
                      "' has shape " +
                      shape_str(params_.get(spec.name).shape()) + ", want " +
                      shape_str(spec.shape));
  }
}

Model Model::load(const std::filesystem::path& path) {
  Checkpoint ck = load_checkpoint(path);
  return Model(ModelConfig::from_meta(ck.meta), std::move(ck.params));
}

void Model::save(const std::filesystem::path& path) const {
  save_checkpoint(path, cfg_.to_meta(), params_);
}

Tensor Model::forward_logits(const TspInstance& inst, const EdgeMatrix& state,
                             int t) const {
  const int n = inst.size();
  if (state.size() != n)
    throw UsageError("edge state size " + std::to_string(state.size()) +
                     " does not match instance size " + std::to_string(n));
  if (t < 1 || t > cfg_.diffusion_steps)
    throw UsageError("timestep " + std::to_string(t) + " outside 1.." +
                     std::to_string(cfg_.diffusion_steps));
  const int d = cfg_.dim, H = cfg_.heads, dh = d / H;
  const auto& P = params_;

  std::vector<double> coord_data(static_cast<size_t>(n) * 2);
  for (int i = 0; i < n; ++i) {
    coord_data[static_cast<size_t>(2 * i)] = inst.node(i).x;
    coord_data[static_cast<size_t>(2 * i) + 1] = inst.node(i).y;
  }
  Tensor coords = Tensor::from_data({n, 2}, std::move(coord_data));

  std::vector<double> edge_data(state.cells().begin(), state.cells().end());
  Tensor edges = Tensor::from_data({n * n, 1}, std::move(edge_data));

  Tensor pe = Tensor::from_data({1, d}, sinusoidal_embedding(t, d));

  Tensor h = add(matmul(coords, P.get("embed.node.w")), P.get("embed.node.b"));
  Tensor x = add(matmul(edges, P.get("embed.edge.w")), P.get("embed.edge.b"));
  Tensor temb = add(matmul(pe, P.get("embed.time.w")), P.get("embed.time.b"));

  for (int l = 0; l < cfg_.layers; ++l) {
    const std::string p = "layer" + std::to_string(l) + ".";

    // Raw per-head attention logits w_hat[(i,j), head].
    Tensor q = matmul(h, P.get(p + "attn.q.w"));
    Tensor k = matmul(h, P.get(p + "attn.k.w"));
    Tensor v = matmul(h, P.get(p + "attn.v.w"));
    Tensor q3 = transpose(reshape(q, {n, H, dh}), {1, 0, 2});  // (H,n,dh)
    Tensor k3 = transpose(reshape(k, {n, H, dh}), {1, 2, 0});  // (H,dh,n)
    Tensor scores =
        scale(matmul(q3, k3), 1.0 / std::sqrt(static_cast<double>(dh)));
    Tensor w_hat = reshape(transpose(scores, {1, 2, 0}), {n * n, H});

    // Node stream: edge features modulate attention, then softmax over
    // neighbours, value mix, heads re-concatenated.
    Tensor wmix = add(add(mul(matmul(x, P.get(p + "edge_gate.w1")), w_hat),
                          matmul(x, P.get(p + "edge_gate.w2"))),
                      w_hat);
    Tensor attn = softmax(transpose(reshape(wmix, {n, n, H}), {2, 0, 1}));
    Tensor v3 = transpose(reshape(v, {n, H, dh}), {1, 0, 2});
    Tensor agg = reshape(transpose(matmul(attn, v3), {1, 0, 2}), {n, d});
    Tensor hn = layer_norm(agg, P.get(p + "node_norm.gain"),
                           P.get(p + "node_norm.bias"));
    Tensor hff =
        add(matmul(relu(add(matmul(hn, P.get(p + "node_ffn.1.w")),
                            P.get(p + "node_ffn.1.b"))),
                   P.get(p + "node_ffn.2.w")),
            P.get(p + "node_ffn.2.b"));
    Tensor h_next = add(hff, h);

    // Edge stream: attention scores gate and shift edge features; the
    // timestep signal enters here, broadcast across all n^2 cells.
    Tensor xmix = add(add(mul(matmul(w_hat, P.get(p + "edge_mix.w1")), x),
                          matmul(w_hat, P.get(p + "edge_mix.w2"))),
                      x);
    Tensor tinj = matmul(sigmoid(temb), P.get(p + "time.w"));  // (1,d)
    xmix = add(xmix, tinj);
    Tensor xn = layer_norm(xmix, P.get(p + "edge_norm.gain"),
                           P.get(p + "edge_norm.bias"));
    Tensor xff =
        add(matmul(relu(add(matmul(xn, P.get(p + "edge_ffn.1.w")),
                            P.get(p + "edge_ffn.1.b"))),
                   P.get(p + "edge_ffn.2.w")),
            P.get(p + "edge_ffn.2.b"));
    x = add(xff, x);
    h = h_next;
  }

  Tensor g = group_norm(x, cfg_.groups, P.get("head.norm.gain"),
                        P.get("head.norm.bias"));
  Tensor c1 =
      sigmoid(pointwise_conv1d(g, P.get("head.conv1.w"), P.get("head.conv1.b")));
  return pointwise_conv1d(c1, P.get("head.conv2.w"), P.get("head.conv2.b"));
}

Heatmap Model::predict(const TspInstance& inst, const EdgeMatrix& state,
                       int t) const {
  NoGradGuard no_grad;
  Tensor logits = forward_logits(inst, state, t);
  const int n = inst.size();
  Heatmap hm = Heatmap::zeros(n);
  const auto& lv = logits.data();
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      if (i == j) continue;
      const size_t cell = static_cast<size_t>(i) * n + j;
      const double l0 = lv[2 * cell], l1 = lv[2 * cell + 1];
      // softmax channel 1, computed stably as a sigmoid of the margin
      const double m = l1 - l0;
      double p;
      if (m >= 0)
        p = 1.0 / (1.0 + std::exp(-m));
      else {
        const double e = std::exp(m);
        p = e / (1.0 + e);
      }
      if (!std::isfinite(p))
        throw NumericError("non-finite probability in model prediction");
      hm.at(i, j) = p;
    }
  return hm;
}

}  // namespace deitsp
