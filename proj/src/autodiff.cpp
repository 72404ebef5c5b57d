// Copyright 2026 The attnbf Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "attnbf/autodiff.h"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <unordered_set>

#include "attnbf/error.h"
#include "attnbf/fft.h"

namespace attnbf::ad {
namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMap = Eigen::Map<const RowMat>;
using MutMap = Eigen::Map<RowMat>;

int normalize_axis(int axis, int ndim) {
  const int a = axis < 0 ? axis + ndim : axis;
  if (a < 0 || a >= ndim) throw InvalidInput("axis " + std::to_string(axis) + " out of range");
  return a;
}

// Product of dims in [begin, end).
std::size_t span_size(const Shape& s, int begin, int end) {
  std::size_t n = 1;
  for (int i = begin; i < end; ++i) n *= static_cast<std::size_t>(s[i]);
  return n;
}

thread_local bool g_grad_enabled = true;

bool any_requires_grad(std::initializer_list<const Tensor*> inputs) {
  if (!g_grad_enabled) return false;
  for (const Tensor* t : inputs)
    if (t->defined() && t->requires_grad()) return true;
  return false;
}

// Builds the result node; the closure is kept only when some input needs a
// gradient. Inside the closure parents are addressed by position.
Tensor make_result(Shape shape, std::vector<double> value, std::initializer_list<const Tensor*> inputs,
                   std::function<void(Node&)> backward_fn) {
  auto node = std::make_shared<Node>();
  node->shape = std::move(shape);
  node->value = std::move(value);
  if (any_requires_grad(inputs)) {
    node->requires_grad = true;
    for (const Tensor* t : inputs) node->parents.push_back(t->shared_node());
    node->backward_fn = std::move(backward_fn);
  }
  return Tensor(std::move(node));
}

bool wants_grad(const Node& self, std::size_t i) { return self.parents[i] && self.parents[i]->requires_grad; }

bool is_suffix(const Shape& small, const Shape& big) {
  if (small.size() > big.size()) return false;
  return std::equal(small.rbegin(), small.rend(), big.rbegin());
}

// Shape of a suffix-broadcast binary op.
Shape broadcast_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() == b.shape()) return a.shape();
  if (is_suffix(b.shape(), a.shape())) return a.shape();
  if (is_suffix(a.shape(), b.shape())) return b.shape();
  throw InvalidInput(std::string(op) + ": shapes " + to_string(a.shape()) + " and " + to_string(b.shape()) +
                     " are not broadcast-compatible");
}

template <typename Fn>
Tensor unary(const Tensor& a, Fn fn, std::function<void(Node&)> back) {
  std::vector<double> out(a.numel());
  const auto& x = a.values();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = fn(x[i]);
  return make_result(a.shape(), std::move(out), {&a}, std::move(back));
}

void lu_solve_real(std::vector<double> a, int n, double* b, int k) {
  std::vector<int> perm(static_cast<std::size_t>(n));
  std::iota(perm.begin(), perm.end(), 0);
  for (int c = 0; c < n; ++c) {
    int piv = c;
    for (int i = c + 1; i < n; ++i)
      if (std::abs(a[i * n + c]) > std::abs(a[piv * n + c])) piv = i;
    if (a[piv * n + c] == 0.0) throw NumericalError("solve: singular matrix");
    if (piv != c) {
      for (int j = 0; j < n; ++j) std::swap(a[c * n + j], a[piv * n + j]);
      for (int j = 0; j < k; ++j) std::swap(b[c * k + j], b[piv * k + j]);
    }
    const double inv = 1.0 / a[c * n + c];
    for (int i = c + 1; i < n; ++i) {
      const double factor = a[i * n + c] * inv;
      if (factor == 0.0) continue;
      for (int j = c; j < n; ++j) a[i * n + j] -= factor * a[c * n + j];
      for (int j = 0; j < k; ++j) b[i * k + j] -= factor * b[c * k + j];
    }
  }
  for (int i = n - 1; i >= 0; --i)
    for (int j = 0; j < k; ++j) {
      double s = b[i * k + j];
      for (int m = i + 1; m < n; ++m) s -= a[i * n + m] * b[m * k + j];
      b[i * k + j] = s / a[i * n + i];
    }
}

}  // namespace

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }
bool grad_enabled() { return g_grad_enabled; }

std::size_t numel(const Shape& shape) { return span_size(shape, 0, static_cast<int>(shape.size())); }

std::string to_string(const Shape& shape) {
  std::string s = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) s += (i ? ", " : "") + std::to_string(shape[i]);
  return s + "]";
}

Tensor Tensor::constant(Shape shape, std::vector<double> values) { return leaf(std::move(shape), std::move(values), false); }

Tensor Tensor::zeros(Shape shape) { return full(std::move(shape), 0.0); }

Tensor Tensor::full(Shape shape, double value) {
  const std::size_t n = ad::numel(shape);
  return leaf(std::move(shape), std::vector<double>(n, value), false);
}

Tensor Tensor::scalar(double value) { return leaf({}, {value}, false); }

Tensor Tensor::leaf(Shape shape, std::vector<double> values, bool requires_grad) {
  for (int d : shape)
    if (d < 0) throw InvalidInput("negative dimension in " + to_string(shape));
  if (values.size() != ad::numel(shape))
    throw InvalidInput("value count " + std::to_string(values.size()) + " does not match shape " + to_string(shape));
  auto node = std::make_shared<Node>();
  node->shape = std::move(shape);
  node->value = std::move(values);
  node->requires_grad = requires_grad;
  return Tensor(std::move(node));
}

int Tensor::dim(int axis) const { return node_->shape[normalize_axis(axis, ndim())]; }

double Tensor::item() const {
  if (numel() != 1) throw InvalidInput("item() on tensor of shape " + to_string(shape()));
  return node_->value[0];
}

Tensor Tensor::detach() const { return constant(shape(), values()); }

void backward(const Tensor& loss) {
  if (!loss.defined() || loss.numel() != 1) throw InvalidInput("backward: loss must be a scalar");
  if (!std::isfinite(loss.item())) throw NumericalError("backward: loss is not finite");
  if (!loss.requires_grad()) return;

  // Iterative post-order DFS gives a topological order; parents are visited
  // in recorded order so the sweep is deterministic.
  std::vector<Node*> order;
  std::unordered_set<Node*> seen;
  std::vector<std::pair<Node*, std::size_t>> stack{{loss.node(), 0}};
  seen.insert(loss.node());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      Node* p = node->parents[next++].get();
      if (p && p->requires_grad && seen.insert(p).second) stack.emplace_back(p, 0);
      continue;
    }
    order.push_back(node);
    stack.pop_back();
  }

  loss.node()->grad_buffer()[0] += 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* node = *it;
    if (node->backward_fn && !node->grad.empty()) node->backward_fn(*node);
  }
}

// -- elementwise ---------------------------------------------------------------

namespace {

template <typename Fwd, typename DA, typename DB>
Tensor binary(const Tensor& a, const Tensor& b, const char* name, Fwd fwd, DA da, DB db) {
  Shape out_shape = broadcast_shape(a, b, name);
  const std::size_t n = numel(out_shape);
  const std::size_t na = a.numel(), nb = b.numel();
  std::vector<double> out(n);
  const auto& x = a.values();
  const auto& y = b.values();
  for (std::size_t i = 0; i < n; ++i) out[i] = fwd(x[i % na], y[i % nb]);
  return make_result(std::move(out_shape), std::move(out), {&a, &b}, [na, nb, da, db](Node& self) {
    const auto& g = self.grad;
    const auto& x = self.parents[0]->value;
    const auto& y = self.parents[1]->value;
    if (wants_grad(self, 0)) {
      auto& ga = self.parents[0]->grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) ga[i % na] += g[i] * da(x[i % na], y[i % nb]);
    }
    if (wants_grad(self, 1)) {
      auto& gb = self.parents[1]->grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) gb[i % nb] += g[i] * db(x[i % na], y[i % nb]);
    }
  });
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
  return binary(
      a, b, "add", [](double x, double y) { return x + y; }, [](double, double) { return 1.0; },
      [](double, double) { return 1.0; });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  return binary(
      a, b, "sub", [](double x, double y) { return x - y; }, [](double, double) { return 1.0; },
      [](double, double) { return -1.0; });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  return binary(
      a, b, "mul", [](double x, double y) { return x * y; }, [](double, double y) { return y; },
      [](double x, double) { return x; });
}

Tensor scale(const Tensor& a, double s) {
  return unary(a, [s](double x) { return s * x; }, [s](Node& self) {
    auto& ga = self.parents[0]->grad_buffer();
    for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += s * self.grad[i];
  });
}

Tensor add_scalar(const Tensor& a, double s) {
  return unary(a, [s](double x) { return x + s; }, [](Node& self) {
    auto& ga = self.parents[0]->grad_buffer();
    for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += self.grad[i];
  });
}

Tensor relu(const Tensor& a) {
  return unary(a, [](double x) { return x > 0.0 ? x : 0.0; }, [](Node& self) {
    const auto& x = self.parents[0]->value;
    auto& ga = self.parents[0]->grad_buffer();
    for (std::size_t i = 0; i < ga.size(); ++i)
      if (x[i] > 0.0) ga[i] += self.grad[i];
  });
}

Tensor sigmoid(const Tensor& a) {
  return unary(a, [](double x) { return 1.0 / (1.0 + std::exp(-x)); }, [](Node& self) {
    auto& ga = self.parents[0]->grad_buffer();
    for (std::size_t i = 0; i < ga.size(); ++i) {
      const double y = self.value[i];
      ga[i] += self.grad[i] * y * (1.0 - y);
    }
  });
}

Tensor exp(const Tensor& a) {
  return unary(a, [](double x) { return std::exp(x); }, [](Node& self) {
    auto& ga = self.parents[0]->grad_buffer();
    for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += self.grad[i] * self.value[i];
  });
}

Tensor log(const Tensor& a) {
  return unary(a, [](double x) { return std::log(x); }, [](Node& self) {
    const auto& x = self.parents[0]->value;
    auto& ga = self.parents[0]->grad_buffer();
    for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += self.grad[i] / x[i];
  });
}

Tensor sqrt(const Tensor& a) {
  return unary(a, [](double x) { return std::sqrt(x); }, [](Node& self) {
    auto& ga = self.parents[0]->grad_buffer();
    for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += self.grad[i] * 0.5 / self.value[i];
  });
}

Tensor power(const Tensor& a, double p) {
  return unary(a, [p](double x) { return std::pow(x, p); }, [p](Node& self) {
    const auto& x = self.parents[0]->value;
    auto& ga = self.parents[0]->grad_buffer();
    for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += self.grad[i] * p * std::pow(x[i], p - 1.0);
  });
}

Tensor reciprocal(const Tensor& a) {
  return unary(a, [](double x) { return 1.0 / x; }, [](Node& self) {
    auto& ga = self.parents[0]->grad_buffer();
    for (std::size_t i = 0; i < ga.size(); ++i) ga[i] -= self.grad[i] * self.value[i] * self.value[i];
  });
}

// -- structural ----------------------------------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.ndim() < 2 || b.ndim() < 2) throw InvalidInput("matmul: operands need at least 2 dims");
  const int n = a.dim(-2), k = a.dim(-1), m = b.dim(-1);
  if (b.dim(-2) != k)
    throw InvalidInput("matmul: inner dims differ " + to_string(a.shape()) + " x " + to_string(b.shape()));
  const bool shared_b = b.ndim() == 2;
  Shape batch_shape(a.shape().begin(), a.shape().end() - 2);
  if (!shared_b && Shape(b.shape().begin(), b.shape().end() - 2) != batch_shape)
    throw InvalidInput("matmul: batch dims differ " + to_string(a.shape()) + " x " + to_string(b.shape()));
  const std::size_t batch = numel(batch_shape);
  Shape out_shape = batch_shape;
  out_shape.push_back(n);
  out_shape.push_back(m);

  std::vector<double> out(batch * n * m);
  const std::size_t sa = std::size_t(n) * k, sb = shared_b ? 0 : std::size_t(k) * m, so = std::size_t(n) * m;
  for (std::size_t i = 0; i < batch; ++i) {
    MutMap(out.data() + i * so, n, m).noalias() =
        ConstMap(a.values().data() + i * sa, n, k) * ConstMap(b.values().data() + i * sb, k, m);
  }
  return make_result(std::move(out_shape), std::move(out), {&a, &b}, [=](Node& self) {
    const double* av = self.parents[0]->value.data();
    const double* bv = self.parents[1]->value.data();
    const double* g = self.grad.data();
    if (wants_grad(self, 0)) {
      double* ga = self.parents[0]->grad_buffer().data();
      for (std::size_t i = 0; i < batch; ++i)
        MutMap(ga + i * sa, n, k).noalias() += ConstMap(g + i * so, n, m) * ConstMap(bv + i * sb, k, m).transpose();
    }
    if (wants_grad(self, 1)) {
      double* gb = self.parents[1]->grad_buffer().data();
      for (std::size_t i = 0; i < batch; ++i)
        MutMap(gb + i * sb, k, m).noalias() += ConstMap(av + i * sa, n, k).transpose() * ConstMap(g + i * so, n, m);
    }
  });
}

Tensor permute(const Tensor& a, const std::vector<int>& axes) {
  const int nd = a.ndim();
  if (static_cast<int>(axes.size()) != nd) throw InvalidInput("permute: wrong number of axes");
  std::vector<int> seen(static_cast<std::size_t>(nd), 0);
  for (int ax : axes) {
    if (ax < 0 || ax >= nd || seen[ax]++) throw InvalidInput("permute: axes are not a permutation");
  }
  Shape out_shape(static_cast<std::size_t>(nd));
  for (int i = 0; i < nd; ++i) out_shape[i] = a.shape()[axes[i]];
  // in_stride[d]: stride of input axis d
  std::vector<std::size_t> in_stride(static_cast<std::size_t>(nd), 1);
  for (int d = nd - 2; d >= 0; --d) in_stride[d] = in_stride[d + 1] * a.shape()[d + 1];
  // map[i]: input offset of output element i
  const std::size_t total = a.numel();
  std::vector<std::size_t> map(total);
  std::vector<int> idx(static_cast<std::size_t>(nd), 0);
  for (std::size_t i = 0; i < total; ++i) {
    std::size_t off = 0;
    for (int d = 0; d < nd; ++d) off += idx[d] * in_stride[axes[d]];
    map[i] = off;
    for (int d = nd - 1; d >= 0; --d) {
      if (++idx[d] < out_shape[d]) break;
      idx[d] = 0;
    }
  }
  std::vector<double> out(total);
  for (std::size_t i = 0; i < total; ++i) out[i] = a.values()[map[i]];
  return make_result(std::move(out_shape), std::move(out), {&a}, [map = std::move(map)](Node& self) {
    auto& ga = self.parents[0]->grad_buffer();
    for (std::size_t i = 0; i < map.size(); ++i) ga[map[i]] += self.grad[i];
  });
}

Tensor transpose(const Tensor& a) {
  const int nd = a.ndim();
  if (nd < 2) throw InvalidInput("transpose: need at least 2 dims");
  std::vector<int> axes(static_cast<std::size_t>(nd));
  std::iota(axes.begin(), axes.end(), 0);
  std::swap(axes[nd - 1], axes[nd - 2]);
  return permute(a, axes);
}

Tensor reshape(const Tensor& a, Shape shape) {
  if (numel(shape) != a.numel())
    throw InvalidInput("reshape: " + to_string(a.shape()) + " -> " + to_string(shape) + " changes element count");
  return make_result(std::move(shape), a.values(), {&a}, [](Node& self) {
    auto& ga = self.parents[0]->grad_buffer();
    for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += self.grad[i];
  });
}

Tensor concat(const std::vector<Tensor>& parts, int axis) {
  if (parts.empty()) throw InvalidInput("concat: no inputs");
  const int nd = parts.front().ndim();
  const int ax = normalize_axis(axis, nd);
  Shape out_shape = parts.front().shape();
  out_shape[ax] = 0;
  for (const auto& p : parts) {
    if (p.ndim() != nd) throw InvalidInput("concat: rank mismatch");
    for (int d = 0; d < nd; ++d)
      if (d != ax && p.shape()[d] != parts.front().shape()[d]) throw InvalidInput("concat: shape mismatch off-axis");
    out_shape[ax] += p.shape()[ax];
  }
  const std::size_t outer = span_size(out_shape, 0, ax);
  const std::size_t inner = span_size(out_shape, ax + 1, nd);
  const std::size_t out_row = std::size_t(out_shape[ax]) * inner;
  std::vector<double> out(numel(out_shape));
  std::vector<std::size_t> offsets;
  std::size_t off = 0;
  for (const auto& p : parts) {
    offsets.push_back(off);
    const std::size_t row = std::size_t(p.shape()[ax]) * inner;
    for (std::size_t o = 0; o < outer; ++o)
      std::copy_n(p.values().data() + o * row, row, out.data() + o * out_row + off);
    off += row;
  }

  auto node = std::make_shared<Node>();
  node->shape = std::move(out_shape);
  node->value = std::move(out);
  bool needs = false;
  for (const auto& p : parts) needs = needs || (g_grad_enabled && p.requires_grad());
  if (needs) {
    node->requires_grad = true;
    std::vector<std::size_t> rows;
    for (const auto& p : parts) {
      node->parents.push_back(p.shared_node());
      rows.push_back(std::size_t(p.shape()[ax]) * inner);
    }
    node->backward_fn = [offsets, rows, outer, out_row](Node& self) {
      for (std::size_t i = 0; i < self.parents.size(); ++i) {
        if (!wants_grad(self, i)) continue;
        auto& gp = self.parents[i]->grad_buffer();
        for (std::size_t o = 0; o < outer; ++o)
          for (std::size_t j = 0; j < rows[i]; ++j) gp[o * rows[i] + j] += self.grad[o * out_row + offsets[i] + j];
      }
    };
  }
  return Tensor(std::move(node));
}

Tensor slice(const Tensor& a, int axis, int start, int length) {
  const int nd = a.ndim();
  const int ax = normalize_axis(axis, nd);
  if (start < 0 || length < 0 || start + length > a.shape()[ax])
    throw InvalidInput("slice: range out of bounds on axis of size " + std::to_string(a.shape()[ax]));
  Shape out_shape = a.shape();
  out_shape[ax] = length;
  const std::size_t outer = span_size(a.shape(), 0, ax);
  const std::size_t inner = span_size(a.shape(), ax + 1, nd);
  const std::size_t in_row = std::size_t(a.shape()[ax]) * inner;
  const std::size_t out_row = std::size_t(length) * inner;
  const std::size_t first = std::size_t(start) * inner;
  std::vector<double> out(outer * out_row);
  for (std::size_t o = 0; o < outer; ++o)
    std::copy_n(a.values().data() + o * in_row + first, out_row, out.data() + o * out_row);
  return make_result(std::move(out_shape), std::move(out), {&a}, [=](Node& self) {
    auto& ga = self.parents[0]->grad_buffer();
    for (std::size_t o = 0; o < outer; ++o)
      for (std::size_t j = 0; j < out_row; ++j) ga[o * in_row + first + j] += self.grad[o * out_row + j];
  });
}

Tensor gather(const Tensor& a, std::vector<std::int64_t> index, std::vector<double> coeff, Shape out_shape) {
  const std::size_t n = numel(out_shape);
  if (index.size() != n || coeff.size() != n) throw InvalidInput("gather: index/coeff size does not match shape");
  const auto limit = static_cast<std::int64_t>(a.numel());
  std::vector<double> out(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    if (index[i] >= limit) throw InvalidInput("gather: index out of range");
    if (index[i] >= 0) out[i] = coeff[i] * a.values()[static_cast<std::size_t>(index[i])];
  }
  return make_result(std::move(out_shape), std::move(out), {&a},
                     [index = std::move(index), coeff = std::move(coeff)](Node& self) {
                       auto& ga = self.parents[0]->grad_buffer();
                       for (std::size_t i = 0; i < index.size(); ++i)
                         if (index[i] >= 0) ga[static_cast<std::size_t>(index[i])] += coeff[i] * self.grad[i];
                     });
}

// -- reductions ----------------------------------------------------------------

Tensor sum(const Tensor& a) {
  double acc = 0.0;
  for (double v : a.values()) acc += v;
  return make_result({}, {acc}, {&a}, [](Node& self) {
    auto& ga = self.parents[0]->grad_buffer();
    const double g = self.grad[0];
    for (double& v : ga) v += g;
  });
}

Tensor sum(const Tensor& a, int axis) {
  const int nd = a.ndim();
  const int ax = normalize_axis(axis, nd);
  const std::size_t outer = span_size(a.shape(), 0, ax);
  const std::size_t len = a.shape()[ax];
  const std::size_t inner = span_size(a.shape(), ax + 1, nd);
  Shape out_shape = a.shape();
  out_shape.erase(out_shape.begin() + ax);
  std::vector<double> out(outer * inner, 0.0);
  for (std::size_t o = 0; o < outer; ++o)
    for (std::size_t l = 0; l < len; ++l)
      for (std::size_t i = 0; i < inner; ++i) out[o * inner + i] += a.values()[(o * len + l) * inner + i];
  return make_result(std::move(out_shape), std::move(out), {&a}, [=](Node& self) {
    auto& ga = self.parents[0]->grad_buffer();
    for (std::size_t o = 0; o < outer; ++o)
      for (std::size_t l = 0; l < len; ++l)
        for (std::size_t i = 0; i < inner; ++i) ga[(o * len + l) * inner + i] += self.grad[o * inner + i];
  });
}

Tensor mean(const Tensor& a) {
  if (a.numel() == 0) throw InvalidInput("mean of empty tensor");
  return scale(sum(a), 1.0 / static_cast<double>(a.numel()));
}

Tensor mean(const Tensor& a, int axis) { return scale(sum(a, axis), 1.0 / a.dim(axis)); }

// -- normalization / attention -------------------------------------------------

Tensor softmax(const Tensor& a, int axis, const Tensor& additive_mask) {
  const int nd = a.ndim();
  const int ax = normalize_axis(axis, nd);
  if (additive_mask.defined() && !is_suffix(additive_mask.shape(), a.shape()))
    throw InvalidInput("softmax: mask shape " + to_string(additive_mask.shape()) + " is not a suffix of " +
                       to_string(a.shape()));
  const std::size_t outer = span_size(a.shape(), 0, ax);
  const std::size_t len = a.shape()[ax];
  const std::size_t inner = span_size(a.shape(), ax + 1, nd);
  const std::size_t nm = additive_mask.defined() ? additive_mask.numel() : 0;
  std::vector<double> logits = a.values();
  if (nm)
    for (std::size_t i = 0; i < logits.size(); ++i) logits[i] += additive_mask.values()[i % nm];
  std::vector<double> out(logits.size());
  for (std::size_t o = 0; o < outer; ++o)
    for (std::size_t i = 0; i < inner; ++i) {
      const std::size_t base = o * len * inner + i;
      double mx = -INFINITY;
      for (std::size_t l = 0; l < len; ++l) mx = std::max(mx, logits[base + l * inner]);
      double z = 0.0;
      for (std::size_t l = 0; l < len; ++l) {
        const double e = std::exp(logits[base + l * inner] - mx);
        out[base + l * inner] = e;
        z += e;
      }
      for (std::size_t l = 0; l < len; ++l) out[base + l * inner] /= z;
    }
  return make_result(a.shape(), std::move(out), {&a}, [=](Node& self) {
    auto& ga = self.parents[0]->grad_buffer();
    const auto& y = self.value;
    const auto& g = self.grad;
    for (std::size_t o = 0; o < outer; ++o)
      for (std::size_t i = 0; i < inner; ++i) {
        const std::size_t base = o * len * inner + i;
        double dot = 0.0;
        for (std::size_t l = 0; l < len; ++l) dot += g[base + l * inner] * y[base + l * inner];
        for (std::size_t l = 0; l < len; ++l) {
          const std::size_t j = base + l * inner;
          ga[j] += y[j] * (g[j] - dot);
        }
      }
  });
}

Tensor layer_norm(const Tensor& a, double eps) {
  if (a.ndim() < 1) throw InvalidInput("layer_norm: need at least 1 dim");
  const std::size_t len = a.dim(-1);
  const std::size_t rows = a.numel() / len;
  std::vector<double> out(a.numel());
  std::vector<double> inv_std(rows);
  const auto& x = a.values();
  for (std::size_t r = 0; r < rows; ++r) {
    const double* row = x.data() + r * len;
    double mu = 0.0;
    for (std::size_t i = 0; i < len; ++i) mu += row[i];
    mu /= len;
    double var = 0.0;
    for (std::size_t i = 0; i < len; ++i) var += (row[i] - mu) * (row[i] - mu);
    var /= len;
    inv_std[r] = 1.0 / std::sqrt(var + eps);
    for (std::size_t i = 0; i < len; ++i) out[r * len + i] = (row[i] - mu) * inv_std[r];
  }
  return make_result(a.shape(), std::move(out), {&a}, [len, rows, inv_std = std::move(inv_std)](Node& self) {
    auto& ga = self.parents[0]->grad_buffer();
    const auto& y = self.value;
    const auto& g = self.grad;
    for (std::size_t r = 0; r < rows; ++r) {
      double g_mean = 0.0, gy_mean = 0.0;
      for (std::size_t i = 0; i < len; ++i) {
        g_mean += g[r * len + i];
        gy_mean += g[r * len + i] * y[r * len + i];
      }
      g_mean /= len;
      gy_mean /= len;
      for (std::size_t i = 0; i < len; ++i) {
        const std::size_t j = r * len + i;
        ga[j] += inv_std[r] * (g[j] - g_mean - y[j] * gy_mean);
      }
    }
  });
}

// -- linear algebra / signal ---------------------------------------------------

Tensor solve(const Tensor& a, const Tensor& b) {
  if (a.ndim() < 2 || b.ndim() < 2) throw InvalidInput("solve: operands need at least 2 dims");
  const int n = a.dim(-1);
  if (a.dim(-2) != n) throw InvalidInput("solve: matrix is not square");
  if (b.dim(-2) != n) throw InvalidInput("solve: right-hand side has wrong row count");
  const int k = b.dim(-1);
  if (Shape(a.shape().begin(), a.shape().end() - 2) != Shape(b.shape().begin(), b.shape().end() - 2))
    throw InvalidInput("solve: batch dims differ");
  const std::size_t batch = a.numel() / (std::size_t(n) * n);
  const std::size_t sa = std::size_t(n) * n, sb = std::size_t(n) * k;
  std::vector<double> x = b.values();
  for (std::size_t i = 0; i < batch; ++i) {
    std::vector<double> mat(a.values().begin() + i * sa, a.values().begin() + (i + 1) * sa);
    lu_solve_real(std::move(mat), n, x.data() + i * sb, k);
  }
  return make_result(b.shape(), std::move(x), {&a, &b}, [=](Node& self) {
    // gB = A^-T G, gA = -gB X^T
    std::vector<double> gb = self.grad;
    const auto& av = self.parents[0]->value;
    std::vector<double> at(sa);
    for (std::size_t i = 0; i < batch; ++i) {
      for (int r = 0; r < n; ++r)
        for (int c = 0; c < n; ++c) at[std::size_t(c) * n + r] = av[i * sa + std::size_t(r) * n + c];
      lu_solve_real(at, n, gb.data() + i * sb, k);
    }
    if (wants_grad(self, 1)) {
      auto& g1 = self.parents[1]->grad_buffer();
      for (std::size_t j = 0; j < gb.size(); ++j) g1[j] += gb[j];
    }
    if (wants_grad(self, 0)) {
      double* g0 = self.parents[0]->grad_buffer().data();
      for (std::size_t i = 0; i < batch; ++i)
        MutMap(g0 + i * sa, n, n).noalias() -=
            ConstMap(gb.data() + i * sb, n, k) * ConstMap(self.value.data() + i * sb, n, k).transpose();
    }
  });
}

Tensor istft(const Tensor& re, const Tensor& im, const StftConfig& cfg, std::size_t num_samples) {
  cfg.validate();
  const int frames = cfg.num_frames(num_samples);
  const int bins = cfg.num_bins();
  const Shape expected{frames, bins};
  if (re.shape() != expected || im.shape() != expected)
    throw InvalidInput("istft: expected spectra of shape " + to_string(expected));
  const int n = cfg.window_len;
  const long pad = cfg.edge_padding();
  const auto window = hann_window(n);
  const auto norm = synthesis_normalizer(num_samples, cfg);
  RealFft fft(n);

  std::vector<double> out(num_samples, 0.0);
  std::vector<cplx> spec(static_cast<std::size_t>(bins));
  std::vector<double> frame(static_cast<std::size_t>(n));
  for (int t = 0; t < frames; ++t) {
    for (int f = 0; f < bins; ++f) spec[f] = cplx(re.values()[std::size_t(t) * bins + f], im.values()[std::size_t(t) * bins + f]);
    fft.inverse(spec, frame);
    const long start = long(t) * cfg.hop - pad;
    for (int k = 0; k < n; ++k) {
      const long i = start + k;
      if (i >= 0 && i < long(num_samples)) out[i] += window[k] * frame[k];
    }
  }
  for (std::size_t i = 0; i < num_samples; ++i) out[i] = norm[i] > 1e-10 ? out[i] / norm[i] : 0.0;

  return make_result({static_cast<int>(num_samples)}, std::move(out), {&re, &im}, [=](Node& self) {
    std::vector<double> gk(static_cast<std::size_t>(n));
    std::vector<cplx> r(static_cast<std::size_t>(bins));
    const bool want_re = wants_grad(self, 0), want_im = wants_grad(self, 1);
    double* gre = want_re ? self.parents[0]->grad_buffer().data() : nullptr;
    double* gim = want_im ? self.parents[1]->grad_buffer().data() : nullptr;
    for (int t = 0; t < frames; ++t) {
      const long start = long(t) * cfg.hop - pad;
      for (int k = 0; k < n; ++k) {
        const long i = start + k;
        gk[k] = (i >= 0 && i < long(num_samples) && norm[i] > 1e-10) ? window[k] * self.grad[i] / norm[i] : 0.0;
      }
      fft.forward(gk, r);
      for (int f = 0; f < bins; ++f) {
        const bool edge = f == 0 || f == bins - 1;
        const double c = (edge ? 1.0 : 2.0) / n;
        if (gre) gre[std::size_t(t) * bins + f] += c * r[f].real();
        if (gim && !edge) gim[std::size_t(t) * bins + f] += c * r[f].imag();
      }
    }
  });
}

// -- complex -------------------------------------------------------------------

CTensor complex_matmul(const CTensor& a, const CTensor& b) {
  return {sub(matmul(a.re, b.re), matmul(a.im, b.im)), add(matmul(a.re, b.im), matmul(a.im, b.re))};
}

CTensor complex_conj_transpose(const CTensor& a) { return {transpose(a.re), scale(transpose(a.im), -1.0)}; }

CTensor complex_mul(const CTensor& a, const CTensor& b) {
  return {sub(mul(a.re, b.re), mul(a.im, b.im)), add(mul(a.re, b.im), mul(a.im, b.re))};
}

}  // namespace attnbf::ad
