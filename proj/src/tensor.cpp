// Copyright (c) 2026 deitsp contributors
// SPDX-License-Identifier: Apache-2.0
#include "deitsp/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <set>
#include <unordered_set>

namespace deitsp {

std::string shape_str(const Shape& s) {
  std::string out = "(";
  for (size_t k = 0; k < s.size(); ++k) {
    if (k) out += ",";
    out += std::to_string(s[k]);
  }
  return out + ")";
}

std::int64_t shape_numel(const Shape& s) {
  std::int64_t n = 1;
  for (int d : s) {
    if (d <= 0) throw ShapeError("non-positive dim in shape " + shape_str(s));
    n *= d;
  }
  return n;
}

namespace {

thread_local bool g_autograd = true;

using detail::Node;
using NodePtr = std::shared_ptr<Node>;

const std::set<std::string>& op_registry() {
  static const std::set<std::string> names = {
      "matmul",     "add",        "mul",
      "scale",      "add_scalar", "relu",
      "sigmoid",    "square",     "softmax",
      "layer_norm", "group_norm", "pointwise_conv1d",
      "embedding_lookup",         "concat",
      "transpose",  "reshape",    "sum",
      "mean",       "l2_norm",    "slice_lastdim",
      "softmax_cross_entropy",
  };
  return names;
}

NodePtr make_leaf(Shape shape, std::vector<double> data) {
  const auto n = shape_numel(shape);
  if (static_cast<std::int64_t>(data.size()) != n)
    throw ShapeError("data size " + std::to_string(data.size()) +
                     " does not fill shape " + shape_str(shape));
  auto node = std::make_shared<Node>();
  node->shape = std::move(shape);
  node->value = std::move(data);
  return node;
}

// All op results come through here so the registry check is unskippable.
NodePtr make_result(const char* op, Shape shape, std::vector<NodePtr> parents) {
  if (!op_registry().count(op))
    throw UsageError(std::string("internal: op '") + op +
                     "' missing from the op registry");
  auto node = std::make_shared<Node>();
  node->shape = std::move(shape);
  node->value.assign(static_cast<size_t>(node->numel()), 0.0);
  if (g_autograd) {
    for (const NodePtr& p : parents)
      node->requires_grad = node->requires_grad || p->requires_grad;
    if (node->requires_grad) node->parents = std::move(parents);
  }
  return node;
}

NodePtr need(const Tensor& t, const char* what) {
  if (!t.defined()) throw UsageError(std::string("undefined tensor: ") + what);
  return t.node();
}

void ensure_grad(Node& n) {
  if (n.requires_grad && n.grad.size() != n.value.size())
    n.grad.assign(n.value.size(), 0.0);
}

// Right-aligned broadcast result shape.
Shape broadcast_shape(const Shape& a, const Shape& b) {
  const size_t nd = std::max(a.size(), b.size());
  Shape out(nd);
  for (size_t k = 0; k < nd; ++k) {
    const int da = k < nd - a.size() ? 1 : a[k - (nd - a.size())];
    const int db = k < nd - b.size() ? 1 : b[k - (nd - b.size())];
    if (da != db && da != 1 && db != 1)
      throw ShapeError("cannot broadcast " + shape_str(a) + " with " +
                       shape_str(b));
    out[k] = std::max(da, db);
  }
  return out;
}

std::vector<std::int64_t> row_major_strides(const Shape& s) {
  std::vector<std::int64_t> strides(s.size());
  std::int64_t acc = 1;
  for (size_t k = s.size(); k-- > 0;) {
    strides[k] = acc;
    acc *= s[k];
  }
  return strides;
}

// Strides for reading `in` at out-shaped multi-indices (0 where broadcast).
std::vector<std::int64_t> broadcast_strides(const Shape& in, const Shape& out) {
  const auto in_strides = row_major_strides(in);
  std::vector<std::int64_t> strides(out.size(), 0);
  const size_t off = out.size() - in.size();
  for (size_t k = 0; k < in.size(); ++k)
    strides[off + k] = in[k] == 1 ? 0 : in_strides[k];
  return strides;
}

// Calls fn(out_linear, in_linear) for every element of out.
template <typename Fn>
void for_each_broadcast(const Shape& out, const std::vector<std::int64_t>& in_strides,
                        Fn fn) {
  const auto n = shape_numel(out);
  const size_t nd = out.size();
  std::vector<std::int64_t> idx(nd, 0);
  std::int64_t in_lin = 0;
  for (std::int64_t lin = 0; lin < n; ++lin) {
    fn(lin, in_lin);
    for (size_t k = nd; k-- > 0;) {
      ++idx[k];
      in_lin += in_strides[k];
      if (idx[k] < out[k]) break;
      in_lin -= in_strides[k] * out[k];
      idx[k] = 0;
      if (k == 0) break;
    }
  }
}

struct MatDims {
  std::int64_t batch, m, k, n;
  bool a_batched, b_batched;
};

MatDims matmul_dims(const Shape& a, const Shape& b) {
  if (a.size() < 2 || b.size() < 2)
    throw ShapeError("matmul needs >= 2 dims, got " + shape_str(a) + " and " +
                     shape_str(b));
  const Shape a_lead(a.begin(), a.end() - 2);
  const Shape b_lead(b.begin(), b.end() - 2);
  if (!a_lead.empty() && !b_lead.empty() && a_lead != b_lead)
    throw ShapeError("matmul batch dims differ: " + shape_str(a) + " vs " +
                     shape_str(b));
  const int ak = a[a.size() - 1];
  const int bk = b[b.size() - 2];
  if (ak != bk)
    throw ShapeError("matmul inner dims differ: " + shape_str(a) + " vs " +
                     shape_str(b));
  const Shape& lead = a_lead.empty() ? b_lead : a_lead;
  MatDims d;
  d.batch = lead.empty() ? 1 : shape_numel(lead);
  d.m = a[a.size() - 2];
  d.k = ak;
  d.n = b[b.size() - 1];
  d.a_batched = !a_lead.empty();
  d.b_batched = !b_lead.empty();
  return d;
}

void check_finite_scalar(double v, const char* what) {
  if (!std::isfinite(v))
    throw NumericError(std::string(what) + " is non-finite");
}

}  // namespace

bool autograd_enabled() { return g_autograd; }

NoGradGuard::NoGradGuard() : saved_(g_autograd) { g_autograd = false; }
NoGradGuard::~NoGradGuard() { g_autograd = saved_; }

Tensor Tensor::zeros(Shape shape) {
  auto n = shape_numel(shape);
  return Tensor(make_leaf(std::move(shape),
                          std::vector<double>(static_cast<size_t>(n), 0.0)));
}

Tensor Tensor::constant(Shape shape, double v) {
  auto n = shape_numel(shape);
  return Tensor(make_leaf(std::move(shape),
                          std::vector<double>(static_cast<size_t>(n), v)));
}

Tensor Tensor::from_data(Shape shape, std::vector<double> data) {
  return Tensor(make_leaf(std::move(shape), std::move(data)));
}

Tensor Tensor::scalar(double v) { return from_data({1}, {v}); }

const Shape& Tensor::shape() const { return need(*this, "shape")->shape; }
std::int64_t Tensor::numel() const { return need(*this, "numel")->numel(); }
const std::vector<double>& Tensor::data() const {
  return need(*this, "data")->value;
}
std::vector<double>& Tensor::data() { return need(*this, "data")->value; }
const std::vector<double>& Tensor::grad() const {
  const auto n = need(*this, "grad");
  if (!n->requires_grad)
    throw UsageError("tensor does not track gradients");
  const_cast<Node&>(*n).grad.resize(n->value.size(), 0.0);
  return n->grad;
}
bool Tensor::requires_grad() const {
  return need(*this, "requires_grad")->requires_grad;
}
Tensor& Tensor::set_requires_grad(bool on) {
  auto n = need(*this, "set_requires_grad");
  if (!n->parents.empty())
    throw UsageError("set_requires_grad is for leaf tensors");
  n->requires_grad = on;
  return *this;
}
const std::string& Tensor::name() const { return need(*this, "name")->name; }
Tensor& Tensor::set_name(std::string name) {
  need(*this, "set_name")->name = std::move(name);
  return *this;
}
double Tensor::item() const {
  const auto n = need(*this, "item");
  if (n->numel() != 1)
    throw ShapeError("item() on tensor of shape " + shape_str(n->shape));
  return n->value[0];
}

const std::vector<std::string>& registered_op_names() {
  static const std::vector<std::string> names(op_registry().begin(),
                                              op_registry().end());
  return names;
}

// ---- op implementations --------------------------------------------------

Tensor matmul(const Tensor& ta, const Tensor& tb) {
  NodePtr a = need(ta, "matmul lhs"), b = need(tb, "matmul rhs");
  const MatDims d = matmul_dims(a->shape, b->shape);

  Shape out_shape = d.a_batched
                        ? Shape(a->shape.begin(), a->shape.end() - 2)
                        : Shape(b->shape.begin(), b->shape.end() - 2);
  out_shape.push_back(static_cast<int>(d.m));
  out_shape.push_back(static_cast<int>(d.n));

  NodePtr out = make_result("matmul", std::move(out_shape), {a, b});
  const std::int64_t a_step = d.a_batched ? d.m * d.k : 0;
  const std::int64_t b_step = d.b_batched ? d.k * d.n : 0;

  for (std::int64_t bt = 0; bt < d.batch; ++bt) {
    const double* A = a->value.data() + bt * a_step;
    const double* B = b->value.data() + bt * b_step;
    double* C = out->value.data() + bt * d.m * d.n;
    for (std::int64_t i = 0; i < d.m; ++i)
      for (std::int64_t kk = 0; kk < d.k; ++kk) {
        const double av = A[i * d.k + kk];
        if (av == 0.0) continue;
        const double* Brow = B + kk * d.n;
        double* Crow = C + i * d.n;
        for (std::int64_t j = 0; j < d.n; ++j) Crow[j] += av * Brow[j];
      }
  }

  if (out->requires_grad) {
    out->backward = [a, b, d, a_step, b_step](Node& self) {
      ensure_grad(*a);
      ensure_grad(*b);
      for (std::int64_t bt = 0; bt < d.batch; ++bt) {
        const double* A = a->value.data() + bt * a_step;
        const double* B = b->value.data() + bt * b_step;
        const double* G = self.grad.data() + bt * d.m * d.n;
        if (a->requires_grad) {
          double* dA = a->grad.data() + bt * a_step;
          // dA[i,kk] = sum_j G[i,j] * B[kk,j]
          for (std::int64_t i = 0; i < d.m; ++i)
            for (std::int64_t kk = 0; kk < d.k; ++kk) {
              const double* Grow = G + i * d.n;
              const double* Brow = B + kk * d.n;
              double acc = 0.0;
              for (std::int64_t j = 0; j < d.n; ++j) acc += Grow[j] * Brow[j];
              dA[i * d.k + kk] += acc;
            }
        }
        if (b->requires_grad) {
          double* dB = b->grad.data() + bt * b_step;
          // dB[kk,j] += sum_i A[i,kk] * G[i,j]
          for (std::int64_t i = 0; i < d.m; ++i)
            for (std::int64_t kk = 0; kk < d.k; ++kk) {
              const double av = A[i * d.k + kk];
              if (av == 0.0) continue;
              const double* Grow = G + i * d.n;
              double* dBrow = dB + kk * d.n;
              for (std::int64_t j = 0; j < d.n; ++j)
                dBrow[j] += av * Grow[j];
            }
        }
      }
    };
  }
  return Tensor(out);
}

namespace {

template <typename FwdFn>
Tensor broadcast_binary(const char* op, const Tensor& ta, const Tensor& tb,
                        FwdFn fwd, bool is_mul) {
  NodePtr a = need(ta, op), b = need(tb, op);
  Shape out_shape = broadcast_shape(a->shape, b->shape);
  NodePtr out = make_result(op, out_shape, {a, b});
  const auto sa = broadcast_strides(a->shape, out_shape);
  const auto sb = broadcast_strides(b->shape, out_shape);

  std::vector<std::int64_t> b_lin(static_cast<size_t>(out->numel()));
  for_each_broadcast(out_shape, sb, [&](std::int64_t o, std::int64_t i) {
    b_lin[static_cast<size_t>(o)] = i;
  });
  for_each_broadcast(out_shape, sa, [&](std::int64_t o, std::int64_t i) {
    out->value[static_cast<size_t>(o)] =
        fwd(a->value[static_cast<size_t>(i)],
            b->value[static_cast<size_t>(b_lin[static_cast<size_t>(o)])]);
  });

  if (out->requires_grad) {
    Shape shape = out_shape;
    out->backward = [a, b, sa, sb, shape, is_mul](Node& self) {
      ensure_grad(*a);
      ensure_grad(*b);
      std::vector<std::int64_t> blin(self.value.size());
      for_each_broadcast(shape, sb, [&](std::int64_t o, std::int64_t i) {
        blin[static_cast<size_t>(o)] = i;
      });
      for_each_broadcast(shape, sa, [&](std::int64_t o, std::int64_t i) {
        const double g = self.grad[static_cast<size_t>(o)];
        const auto bi = static_cast<size_t>(blin[static_cast<size_t>(o)]);
        if (is_mul) {
          if (a->requires_grad)
            a->grad[static_cast<size_t>(i)] += g * b->value[bi];
          if (b->requires_grad)
            b->grad[bi] += g * a->value[static_cast<size_t>(i)];
        } else {
          if (a->requires_grad) a->grad[static_cast<size_t>(i)] += g;
          if (b->requires_grad) b->grad[bi] += g;
        }
      });
    };
  }
  return Tensor(out);
}

template <typename Fwd, typename Bwd>
Tensor unary_pointwise(const char* op, const Tensor& ta, Fwd fwd, Bwd bwd) {
  NodePtr a = need(ta, op);
  NodePtr out = make_result(op, a->shape, {a});
  for (size_t i = 0; i < a->value.size(); ++i) out->value[i] = fwd(a->value[i]);
  if (out->requires_grad) {
    out->backward = [a, bwd](Node& self) {
      ensure_grad(*a);
      for (size_t i = 0; i < a->value.size(); ++i)
        a->grad[i] += self.grad[i] * bwd(a->value[i], self.value[i]);
    };
  }
  return Tensor(out);
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
  return broadcast_binary(
      "add", a, b, [](double x, double y) { return x + y; }, false);
}

Tensor mul(const Tensor& a, const Tensor& b) {
  return broadcast_binary(
      "mul", a, b, [](double x, double y) { return x * y; }, true);
}

Tensor sub(const Tensor& a, const Tensor& b) { return add(a, scale(b, -1.0)); }

Tensor scale(const Tensor& ta, double c) {
  NodePtr a = need(ta, "scale");
  NodePtr out = make_result("scale", a->shape, {a});
  for (size_t i = 0; i < a->value.size(); ++i) out->value[i] = a->value[i] * c;
  if (out->requires_grad) {
    out->backward = [a, c](Node& self) {
      ensure_grad(*a);
      for (size_t i = 0; i < a->value.size(); ++i)
        a->grad[i] += self.grad[i] * c;
    };
  }
  return Tensor(out);
}

Tensor add_scalar(const Tensor& ta, double c) {
  NodePtr a = need(ta, "add_scalar");
  NodePtr out = make_result("add_scalar", a->shape, {a});
  for (size_t i = 0; i < a->value.size(); ++i) out->value[i] = a->value[i] + c;
  if (out->requires_grad) {
    out->backward = [a](Node& self) {
      ensure_grad(*a);
      for (size_t i = 0; i < a->value.size(); ++i) a->grad[i] += self.grad[i];
    };
  }
  return Tensor(out);
}

Tensor relu(const Tensor& a) {
  return unary_pointwise(
      "relu", a, [](double x) { return x > 0.0 ? x : 0.0; },
      [](double x, double) { return x > 0.0 ? 1.0 : 0.0; });
}

Tensor sigmoid(const Tensor& a) {
  return unary_pointwise(
      "sigmoid", a,
      [](double x) {
        // Stable in both tails.
        if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
        const double e = std::exp(x);
        return e / (1.0 + e);
      },
      [](double, double y) { return y * (1.0 - y); });
}

Tensor square(const Tensor& a) {
  return unary_pointwise(
      "square", a, [](double x) { return x * x; },
      [](double x, double) { return 2.0 * x; });
}

Tensor softmax(const Tensor& ta) {
  NodePtr a = need(ta, "softmax");
  if (a->shape.empty()) throw ShapeError("softmax needs >= 1 dim");
  const std::int64_t C = a->shape.back();
  const std::int64_t rows = a->numel() / C;
  NodePtr out = make_result("softmax", a->shape, {a});
  for (std::int64_t r = 0; r < rows; ++r) {
    const double* x = a->value.data() + r * C;
    double* y = out->value.data() + r * C;
    double mx = x[0];
    for (std::int64_t c = 1; c < C; ++c) mx = std::max(mx, x[c]);
    double s = 0.0;
    for (std::int64_t c = 0; c < C; ++c) {
      y[c] = std::exp(x[c] - mx);
      s += y[c];
    }
    for (std::int64_t c = 0; c < C; ++c) y[c] /= s;
  }
  if (out->requires_grad) {
    out->backward = [a, rows, C](Node& self) {
      ensure_grad(*a);
      for (std::int64_t r = 0; r < rows; ++r) {
        const double* y = self.value.data() + r * C;
        const double* g = self.grad.data() + r * C;
        double dot = 0.0;
        for (std::int64_t c = 0; c < C; ++c) dot += y[c] * g[c];
        double* dx = a->grad.data() + r * C;
        for (std::int64_t c = 0; c < C; ++c) dx[c] += y[c] * (g[c] - dot);
      }
    };
  }
  return Tensor(out);
}

namespace {

// Shared normalization core: rows separate samples, each row is split into
// `groups` contiguous segments normalized independently; gain/bias are
// per-channel (row length). layer_norm is groups == 1.
Tensor norm_impl(const char* op, const Tensor& ta, int groups,
                 const Tensor& tgain, const Tensor& tbias, double eps) {
  NodePtr a = need(ta, op), gain = need(tgain, op), bias = need(tbias, op);
  if (a->shape.empty()) throw ShapeError(std::string(op) + " needs >= 1 dim");
  const std::int64_t C = a->shape.back();
  if (groups < 1 || C % groups != 0)
    throw ShapeError(std::string(op) + ": channels " + std::to_string(C) +
                     " not divisible into " + std::to_string(groups) +
                     " groups");
  if (gain->numel() != C || bias->numel() != C)
    throw ShapeError(std::string(op) + ": gain/bias must have " +
                     std::to_string(C) + " entries");
  const std::int64_t rows = a->numel() / C;
  const std::int64_t gs = C / groups;

  NodePtr out = make_result(op, a->shape, {a, gain, bias});
  // xhat and inv-std are needed again in backward.
  auto xhat = std::make_shared<std::vector<double>>(a->value.size());
  auto istd = std::make_shared<std::vector<double>>(
      static_cast<size_t>(rows * groups));

  for (std::int64_t r = 0; r < rows; ++r)
    for (std::int64_t g = 0; g < groups; ++g) {
      const double* x = a->value.data() + r * C + g * gs;
      double mu = 0.0;
      for (std::int64_t c = 0; c < gs; ++c) mu += x[c];
      mu /= static_cast<double>(gs);
      double var = 0.0;
      for (std::int64_t c = 0; c < gs; ++c) var += (x[c] - mu) * (x[c] - mu);
      var /= static_cast<double>(gs);
      const double is = 1.0 / std::sqrt(var + eps);
      (*istd)[static_cast<size_t>(r * groups + g)] = is;
      for (std::int64_t c = 0; c < gs; ++c) {
        const std::int64_t pos = r * C + g * gs + c;
        const double xh = (x[c] - mu) * is;
        (*xhat)[static_cast<size_t>(pos)] = xh;
        out->value[static_cast<size_t>(pos)] =
            xh * gain->value[static_cast<size_t>(g * gs + c)] +
            bias->value[static_cast<size_t>(g * gs + c)];
      }
    }

  if (out->requires_grad) {
    out->backward = [a, gain, bias, rows, groups, gs, C, xhat,
                     istd](Node& self) {
      ensure_grad(*a);
      ensure_grad(*gain);
      ensure_grad(*bias);
      for (std::int64_t r = 0; r < rows; ++r)
        for (std::int64_t g = 0; g < groups; ++g) {
          const std::int64_t base = r * C + g * gs;
          const double is = (*istd)[static_cast<size_t>(r * groups + g)];
          double mean_dxh = 0.0, mean_dxh_xh = 0.0;
          for (std::int64_t c = 0; c < gs; ++c) {
            const auto pos = static_cast<size_t>(base + c);
            const auto ch = static_cast<size_t>(g * gs + c);
            const double go = self.grad[pos];
            const double xh = (*xhat)[pos];
            if (gain->requires_grad) gain->grad[ch] += go * xh;
            if (bias->requires_grad) bias->grad[ch] += go;
            const double dxh = go * gain->value[ch];
            mean_dxh += dxh;
            mean_dxh_xh += dxh * xh;
          }
          mean_dxh /= static_cast<double>(gs);
          mean_dxh_xh /= static_cast<double>(gs);
          if (a->requires_grad)
            for (std::int64_t c = 0; c < gs; ++c) {
              const auto pos = static_cast<size_t>(base + c);
              const auto ch = static_cast<size_t>(g * gs + c);
              const double dxh = self.grad[pos] * gain->value[ch];
              a->grad[pos] +=
                  is * (dxh - mean_dxh - (*xhat)[pos] * mean_dxh_xh);
            }
        }
    };
  }
  return Tensor(out);
}

}  // namespace

Tensor layer_norm(const Tensor& a, const Tensor& gain, const Tensor& bias,
                  double eps) {
  return norm_impl("layer_norm", a, 1, gain, bias, eps);
}

Tensor group_norm(const Tensor& a, int groups, const Tensor& gain,
                  const Tensor& bias, double eps) {
  if (need(a, "group_norm")->shape.size() != 2)
    throw ShapeError("group_norm expects (rows, channels)");
  return norm_impl("group_norm", a, groups, gain, bias, eps);
}

Tensor pointwise_conv1d(const Tensor& ta, const Tensor& tw, const Tensor& tb) {
  NodePtr a = need(ta, "conv input"), w = need(tw, "conv weight"),
          b = need(tb, "conv bias");
  if (a->shape.size() != 2 || w->shape.size() != 2 || b->shape.size() != 1)
    throw ShapeError("pointwise_conv1d wants a(len,in), w(out,in), b(out)");
  const std::int64_t L = a->shape[0], Cin = a->shape[1];
  const std::int64_t Cout = w->shape[0];
  if (w->shape[1] != Cin || b->shape[0] != Cout)
    throw ShapeError("pointwise_conv1d shape mismatch: a" +
                     shape_str(a->shape) + " w" + shape_str(w->shape) + " b" +
                     shape_str(b->shape));

  NodePtr out = make_result("pointwise_conv1d",
                            {static_cast<int>(L), static_cast<int>(Cout)},
                            {a, w, b});
  for (std::int64_t i = 0; i < L; ++i) {
    const double* x = a->value.data() + i * Cin;
    double* y = out->value.data() + i * Cout;
    for (std::int64_t o = 0; o < Cout; ++o) {
      const double* wrow = w->value.data() + o * Cin;
      double acc = b->value[static_cast<size_t>(o)];
      for (std::int64_t c = 0; c < Cin; ++c) acc += wrow[c] * x[c];
      y[o] = acc;
    }
  }
  if (out->requires_grad) {
    out->backward = [a, w, b, L, Cin, Cout](Node& self) {
      ensure_grad(*a);
      ensure_grad(*w);
      ensure_grad(*b);
      for (std::int64_t i = 0; i < L; ++i) {
        const double* x = a->value.data() + i * Cin;
        const double* g = self.grad.data() + i * Cout;
        for (std::int64_t o = 0; o < Cout; ++o) {
          const double go = g[o];
          if (go == 0.0) continue;
          if (b->requires_grad) b->grad[static_cast<size_t>(o)] += go;
          const double* wrow = w->value.data() + o * Cin;
          double* dwrow = w->requires_grad ? w->grad.data() + o * Cin : nullptr;
          double* dx = a->requires_grad ? a->grad.data() + i * Cin : nullptr;
          for (std::int64_t c = 0; c < Cin; ++c) {
            if (dwrow) dwrow[c] += go * x[c];
            if (dx) dx[c] += go * wrow[c];
          }
        }
      }
    };
  }
  return Tensor(out);
}

Tensor embedding_lookup(const Tensor& ttable, const std::vector<int>& indices) {
  NodePtr table = need(ttable, "embedding table");
  if (table->shape.size() != 2)
    throw ShapeError("embedding table must be (vocab, dim)");
  const std::int64_t V = table->shape[0], D = table->shape[1];
  for (int ix : indices)
    if (ix < 0 || ix >= V)
      throw UsageError("embedding index " + std::to_string(ix) +
                       " outside vocab " + std::to_string(V));
  const auto L = static_cast<std::int64_t>(indices.size());
  NodePtr out = make_result(
      "embedding_lookup", {static_cast<int>(L), static_cast<int>(D)}, {table});
  for (std::int64_t i = 0; i < L; ++i)
    std::copy_n(table->value.data() + indices[static_cast<size_t>(i)] * D, D,
                out->value.data() + i * D);
  if (out->requires_grad) {
    auto idx = indices;
    out->backward = [table, idx, D](Node& self) {
      ensure_grad(*table);
      for (size_t i = 0; i < idx.size(); ++i) {
        const double* g = self.grad.data() + static_cast<std::int64_t>(i) * D;
        double* dst = table->grad.data() + idx[i] * D;
        for (std::int64_t c = 0; c < D; ++c) dst[c] += g[c];
      }
    };
  }
  return Tensor(out);
}

Tensor concat(const std::vector<Tensor>& parts, int axis) {
  if (parts.empty()) throw UsageError("concat of nothing");
  std::vector<NodePtr> nodes;
  for (const Tensor& t : parts) nodes.push_back(need(t, "concat part"));
  const Shape& first = nodes[0]->shape;
  if (axis < 0 || axis >= static_cast<int>(first.size()))
    throw ShapeError("concat axis out of range");
  Shape out_shape = first;
  for (size_t p = 1; p < nodes.size(); ++p) {
    const Shape& s = nodes[p]->shape;
    if (s.size() != first.size())
      throw ShapeError("concat rank mismatch");
    for (size_t k = 0; k < s.size(); ++k)
      if (static_cast<int>(k) != axis && s[k] != first[k])
        throw ShapeError("concat dim mismatch at axis " + std::to_string(k));
    out_shape[static_cast<size_t>(axis)] += s[static_cast<size_t>(axis)];
  }

  std::int64_t outer = 1, inner = 1;
  for (int k = 0; k < axis; ++k) outer *= first[static_cast<size_t>(k)];
  for (size_t k = static_cast<size_t>(axis) + 1; k < first.size(); ++k)
    inner *= first[k];

  NodePtr out = make_result("concat", out_shape, nodes);
  const std::int64_t out_axis = out_shape[static_cast<size_t>(axis)];
  std::int64_t offset = 0;
  for (const NodePtr& p : nodes) {
    const std::int64_t ax = p->shape[static_cast<size_t>(axis)];
    for (std::int64_t o = 0; o < outer; ++o)
      std::copy_n(p->value.data() + o * ax * inner, ax * inner,
                  out->value.data() + (o * out_axis + offset) * inner);
    offset += ax;
  }
  if (out->requires_grad) {
    out->backward = [nodes, outer, inner, out_axis, axis](Node& self) {
      std::int64_t off = 0;
      for (const NodePtr& p : nodes) {
        ensure_grad(*p);
        const std::int64_t ax = p->shape[static_cast<size_t>(axis)];
        if (p->requires_grad)
          for (std::int64_t o = 0; o < outer; ++o) {
            const double* g =
                self.grad.data() + (o * out_axis + off) * inner;
            double* dst = p->grad.data() + o * ax * inner;
            for (std::int64_t k = 0; k < ax * inner; ++k) dst[k] += g[k];
          }
        off += ax;
      }
    };
  }
  return Tensor(out);
}

namespace {

// out[i] = in[map[i]]; shared by transpose forward and backward.
std::vector<std::int64_t> permute_map(const Shape& in_shape,
                                      const std::vector<int>& perm) {
  const size_t nd = in_shape.size();
  Shape out_shape(nd);
  for (size_t k = 0; k < nd; ++k)
    out_shape[k] = in_shape[static_cast<size_t>(perm[k])];
  const auto in_strides = row_major_strides(in_shape);
  std::vector<std::int64_t> map(static_cast<size_t>(shape_numel(out_shape)));
  std::vector<std::int64_t> idx(nd, 0);
  for (std::int64_t lin = 0; lin < static_cast<std::int64_t>(map.size());
       ++lin) {
    std::int64_t src = 0;
    for (size_t k = 0; k < nd; ++k)
      src += idx[k] * in_strides[static_cast<size_t>(perm[k])];
    map[static_cast<size_t>(lin)] = src;
    for (size_t k = nd; k-- > 0;) {
      if (++idx[k] < out_shape[k]) break;
      idx[k] = 0;
    }
  }
  return map;
}

}  // namespace

Tensor transpose(const Tensor& ta, const std::vector<int>& perm) {
  NodePtr a = need(ta, "transpose");
  const size_t nd = a->shape.size();
  if (perm.size() != nd) throw ShapeError("transpose perm rank mismatch");
  std::vector<char> used(nd, 0);
  for (int p : perm) {
    if (p < 0 || p >= static_cast<int>(nd) || used[static_cast<size_t>(p)])
      throw ShapeError("transpose perm is not a permutation");
    used[static_cast<size_t>(p)] = 1;
  }
  Shape out_shape(nd);
  for (size_t k = 0; k < nd; ++k)
    out_shape[k] = a->shape[static_cast<size_t>(perm[k])];

  NodePtr out = make_result("transpose", out_shape, {a});
  const auto map = permute_map(a->shape, perm);
  for (size_t i = 0; i < map.size(); ++i)
    out->value[i] = a->value[static_cast<size_t>(map[i])];
  if (out->requires_grad) {
    out->backward = [a, map](Node& self) {
      ensure_grad(*a);
      for (size_t i = 0; i < map.size(); ++i)
        a->grad[static_cast<size_t>(map[i])] += self.grad[i];
    };
  }
  return Tensor(out);
}

Tensor reshape(const Tensor& ta, Shape shape) {
  NodePtr a = need(ta, "reshape");
  if (shape_numel(shape) != a->numel())
    throw ShapeError("reshape " + shape_str(a->shape) + " -> " +
                     shape_str(shape) + " changes element count");
  NodePtr out = make_result("reshape", std::move(shape), {a});
  out->value = a->value;
  if (out->requires_grad) {
    out->backward = [a](Node& self) {
      ensure_grad(*a);
      for (size_t i = 0; i < a->grad.size(); ++i) a->grad[i] += self.grad[i];
    };
  }
  return Tensor(out);
}

Tensor sum(const Tensor& ta) {
  NodePtr a = need(ta, "sum");
  NodePtr out = make_result("sum", {1}, {a});
  double acc = 0.0;
  for (double v : a->value) acc += v;
  out->value[0] = acc;
  if (out->requires_grad) {
    out->backward = [a](Node& self) {
      ensure_grad(*a);
      const double g = self.grad[0];
      for (double& d : a->grad) d += g;
    };
  }
  return Tensor(out);
}

Tensor mean(const Tensor& ta) {
  NodePtr a = need(ta, "mean");
  NodePtr out = make_result("mean", {1}, {a});
  double acc = 0.0;
  for (double v : a->value) acc += v;
  const double inv = 1.0 / static_cast<double>(a->value.size());
  out->value[0] = acc * inv;
  if (out->requires_grad) {
    out->backward = [a, inv](Node& self) {
      ensure_grad(*a);
      const double g = self.grad[0] * inv;
      for (double& d : a->grad) d += g;
    };
  }
  return Tensor(out);
}

Tensor l2_norm(const Tensor& ta) {
  NodePtr a = need(ta, "l2_norm");
  NodePtr out = make_result("l2_norm", {1}, {a});
  double acc = 0.0;
  for (double v : a->value) acc += v * v;
  out->value[0] = std::sqrt(acc);
  if (out->requires_grad) {
    out->backward = [a](Node& self) {
      ensure_grad(*a);
      const double r = self.value[0];
      if (r <= 0.0) return;  // grad defined as 0 at the origin
      const double g = self.grad[0] / r;
      for (size_t i = 0; i < a->value.size(); ++i)
        a->grad[i] += g * a->value[i];
    };
  }
  return Tensor(out);
}

Tensor slice_lastdim(const Tensor& ta, int index) {
  NodePtr a = need(ta, "slice_lastdim");
  if (a->shape.empty()) throw ShapeError("slice_lastdim needs >= 1 dim");
  const std::int64_t C = a->shape.back();
  if (index < 0 || index >= C)
    throw ShapeError("slice index " + std::to_string(index) +
                     " outside last dim " + std::to_string(C));
  Shape out_shape(a->shape.begin(), a->shape.end() - 1);
  if (out_shape.empty()) out_shape = {1};
  const std::int64_t rows = a->numel() / C;
  NodePtr out = make_result("slice_lastdim", out_shape, {a});
  for (std::int64_t r = 0; r < rows; ++r)
    out->value[static_cast<size_t>(r)] =
        a->value[static_cast<size_t>(r * C + index)];
  if (out->requires_grad) {
    out->backward = [a, rows, C, index](Node& self) {
      ensure_grad(*a);
      for (std::int64_t r = 0; r < rows; ++r)
        a->grad[static_cast<size_t>(r * C + index)] +=
            self.grad[static_cast<size_t>(r)];
    };
  }
  return Tensor(out);
}

Tensor softmax_cross_entropy(const Tensor& tlogits,
                             const std::vector<int>& targets,
                             const std::vector<std::uint8_t>& mask) {
  NodePtr logits = need(tlogits, "cross-entropy logits");
  if (logits->shape.size() != 2)
    throw ShapeError("cross-entropy wants (rows, classes) logits");
  const std::int64_t L = logits->shape[0], C = logits->shape[1];
  if (static_cast<std::int64_t>(targets.size()) != L ||
      static_cast<std::int64_t>(mask.size()) != L)
    throw ShapeError("cross-entropy targets/mask must match logit rows");
  std::int64_t count = 0;
  for (std::int64_t r = 0; r < L; ++r) {
    if (!mask[static_cast<size_t>(r)]) continue;
    ++count;
    const int t = targets[static_cast<size_t>(r)];
    if (t < 0 || t >= C)
      throw UsageError("cross-entropy target " + std::to_string(t) +
                       " outside classes " + std::to_string(C));
  }
  if (count == 0) throw UsageError("cross-entropy mask selects no rows");

  NodePtr out = make_result("softmax_cross_entropy", {1}, {logits});
  double total = 0.0;
  for (std::int64_t r = 0; r < L; ++r) {
    if (!mask[static_cast<size_t>(r)]) continue;
    const double* x = logits->value.data() + r * C;
    double mx = x[0];
    for (std::int64_t c = 1; c < C; ++c) mx = std::max(mx, x[c]);
    double s = 0.0;
    for (std::int64_t c = 0; c < C; ++c) s += std::exp(x[c] - mx);
    const double lse = mx + std::log(s);
    total += lse - x[targets[static_cast<size_t>(r)]];
  }
  out->value[0] = total / static_cast<double>(count);
  check_finite_scalar(out->value[0], "cross-entropy loss");

  if (out->requires_grad) {
    auto tg = targets;
    auto mk = mask;
    out->backward = [logits, tg, mk, L, C, count](Node& self) {
      ensure_grad(*logits);
      const double g = self.grad[0] / static_cast<double>(count);
      for (std::int64_t r = 0; r < L; ++r) {
        if (!mk[static_cast<size_t>(r)]) continue;
        const double* x = logits->value.data() + r * C;
        double* dx = logits->grad.data() + r * C;
        double mx = x[0];
        for (std::int64_t c = 1; c < C; ++c) mx = std::max(mx, x[c]);
        double s = 0.0;
        for (std::int64_t c = 0; c < C; ++c) s += std::exp(x[c] - mx);
        for (std::int64_t c = 0; c < C; ++c) {
          const double p = std::exp(x[c] - mx) / s;
          dx[c] += g * (p - (c == tg[static_cast<size_t>(r)] ? 1.0 : 0.0));
        }
      }
    };
  }
  return Tensor(out);
}

// ---- backward ------------------------------------------------------------

void backward(const Tensor& tloss) {
  NodePtr loss = need(tloss, "backward loss");
  if (loss->numel() != 1)
    throw ShapeError("backward needs a scalar, got " + shape_str(loss->shape));
  if (!loss->requires_grad)
    throw UsageError("backward on a graph that tracks no gradients");

  // Post-order DFS, then run closures in reverse.
  std::vector<Node*> order;
  std::unordered_set<Node*> seen;
  std::vector<std::pair<Node*, size_t>> stack{{loss.get(), 0}};
  seen.insert(loss.get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      Node* p = node->parents[next++].get();
      if (p->requires_grad && seen.insert(p).second) stack.push_back({p, 0});
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }
  for (Node* n : order) {
    n->grad.assign(n->value.size(), 0.0);
  }
  loss->grad[0] = 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it)
    if ((*it)->backward) (*it)->backward(**it);
}

// ---- parameters ----------------------------------------------------------

Tensor ParameterStore::add(const std::string& name, Tensor t) {
  if (name.empty()) throw UsageError("parameter needs a name");
  if (index_.count(name))
    throw UsageError("duplicate parameter name '" + name + "'");
  t.set_requires_grad(true);
  t.set_name(name);
  index_[name] = items_.size();
  items_.emplace_back(name, t);
  return t;
}

Tensor ParameterStore::get(const std::string& name) const {
  const auto it = index_.find(name);
  if (it == index_.end())
    throw UsageError("no parameter named '" + name + "'");
  return items_[it->second].second;
}

bool ParameterStore::contains(const std::string& name) const {
  return index_.count(name) != 0;
}

std::int64_t ParameterStore::total_parameters() const {
  std::int64_t n = 0;
  for (const auto& [name, t] : items_) n += t.numel();
  return n;
}

void Adam::step(ParameterStore& params) {
  ++t_;
  const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
  for (auto& [name, param] : params.items()) {
    auto node = param.node();
    if (node->grad.size() != node->value.size())
      node->grad.assign(node->value.size(), 0.0);
    auto& [m, v] = moments_[name];
    if (m.size() != node->value.size()) {
      m.assign(node->value.size(), 0.0);
      v.assign(node->value.size(), 0.0);
    }
    for (size_t i = 0; i < node->value.size(); ++i) {
      const double g = node->grad[i];
      if (!std::isfinite(g))
        throw NumericError("non-finite gradient in parameter '" + name + "'");
      m[i] = cfg_.beta1 * m[i] + (1.0 - cfg_.beta1) * g;
      v[i] = cfg_.beta2 * v[i] + (1.0 - cfg_.beta2) * g * g;
      const double mhat = m[i] / bc1;
      const double vhat = v[i] / bc2;
      node->value[i] -= cfg_.lr * mhat / (std::sqrt(vhat) + cfg_.eps);
    }
  }
}

}  // namespace deitsp
