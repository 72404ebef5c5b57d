// Copyright 2026 The attnbf Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

// Minimal reverse-mode automatic differentiation over real n-D tensors.
//
// A Tensor is a cheap handle to a graph node holding its value, an optional
// gradient buffer and the closure that pushes the node's gradient into its
// parents. Ops only record a backward closure when at least one input
// requires a gradient, so inference graphs hold no tape.
//
// Broadcasting is limited to leading dimensions: in a binary op the smaller
// operand's shape must equal a suffix of the larger one's.
//
// Complex values are (re, im) pairs of real tensors, see CTensor.

#pragma once

#include <cstdint>
#include <functional>
#include <initializer_list>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "attnbf/stft.h"

namespace attnbf::ad {

using Shape = std::vector<int>;

std::size_t numel(const Shape& shape);
std::string to_string(const Shape& shape);

struct Node {
  Shape shape;
  std::vector<double> value;
  std::vector<double> grad;
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(Node&)> backward_fn;

  // Zero-initialized on first use.
  std::vector<double>& grad_buffer() {
    if (grad.empty()) grad.assign(value.size(), 0.0);
    return grad;
  }
};

class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::shared_ptr<Node> node) : node_(std::move(node)) {}

  static Tensor constant(Shape shape, std::vector<double> values);
  static Tensor zeros(Shape shape);
  static Tensor full(Shape shape, double value);
  static Tensor scalar(double value);
  // A leaf that accumulates gradients when requires_grad is set.
  static Tensor leaf(Shape shape, std::vector<double> values, bool requires_grad);

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const { return node_->shape; }
  int ndim() const { return static_cast<int>(node_->shape.size()); }
  // Negative axes count from the end.
  int dim(int axis) const;
  std::size_t numel() const { return node_->value.size(); }
  const std::vector<double>& values() const { return node_->value; }
  std::vector<double>& mutable_values() { return node_->value; }
  // Empty until a gradient has been accumulated.
  const std::vector<double>& grad() const { return node_->grad; }
  bool requires_grad() const { return node_->requires_grad; }
  double item() const;

  // A new constant leaf holding a copy of the values.
  Tensor detach() const;
  void zero_grad() { node_->grad.clear(); }

  Node* node() const { return node_.get(); }
  const std::shared_ptr<Node>& shared_node() const { return node_; }

 private:
  std::shared_ptr<Node> node_;
};

// While alive, ops on this thread build no tape: results never require
// gradients, whatever their inputs. Used for inference and validation.
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};
bool grad_enabled();

// Reverse sweep from a scalar loss. Gradients accumulate additively into every
// reachable node that requires them. Throws InvalidInput for a non-scalar loss
// and NumericalError for a non-finite one.
void backward(const Tensor& loss);

// -- elementwise ---------------------------------------------------------------
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double s);
Tensor add_scalar(const Tensor& a, double s);
Tensor relu(const Tensor& a);
Tensor sigmoid(const Tensor& a);
Tensor exp(const Tensor& a);
Tensor log(const Tensor& a);
Tensor sqrt(const Tensor& a);
Tensor power(const Tensor& a, double p);
Tensor reciprocal(const Tensor& a);

inline Tensor operator+(const Tensor& a, const Tensor& b) { return add(a, b); }
inline Tensor operator-(const Tensor& a, const Tensor& b) { return sub(a, b); }
inline Tensor operator*(const Tensor& a, const Tensor& b) { return mul(a, b); }
inline Tensor operator-(const Tensor& a) { return scale(a, -1.0); }

// -- structural ----------------------------------------------------------------
// [..., n, k] x [..., k, m] with equal batch dims, or x [k, m] shared by all batches.
Tensor matmul(const Tensor& a, const Tensor& b);
// Swaps the last two axes.
Tensor transpose(const Tensor& a);
Tensor permute(const Tensor& a, const std::vector<int>& axes);
Tensor reshape(const Tensor& a, Shape shape);
Tensor concat(const std::vector<Tensor>& parts, int axis);
Tensor slice(const Tensor& a, int axis, int start, int length);
// out[i] = coeff[i] * a[index[i]], or 0 where index[i] < 0.
Tensor gather(const Tensor& a, std::vector<std::int64_t> index, std::vector<double> coeff, Shape out_shape);

// -- reductions ----------------------------------------------------------------
Tensor sum(const Tensor& a);
Tensor sum(const Tensor& a, int axis);
Tensor mean(const Tensor& a);
Tensor mean(const Tensor& a, int axis);

// -- normalization / attention -------------------------------------------------
// Softmax along `axis`. `additive_mask`, when given, is a constant added to the
// logits first (suffix-broadcast); entries of -1e9 zero out a position.
Tensor softmax(const Tensor& a, int axis = -1, const Tensor& additive_mask = Tensor());
// (x - mean) / sqrt(var + eps) along the last axis; no affine part.
Tensor layer_norm(const Tensor& a, double eps = 1e-5);

// -- linear algebra / signal ---------------------------------------------------
// Batched solve A X = B, A [..., n, n], B [..., n, k]. Partial-pivot LU.
// Throws NumericalError on an exactly singular A.
Tensor solve(const Tensor& a, const Tensor& b);

// Weighted overlap-add inverse STFT of one channel. re/im have shape
// [frames, bins]; returns [num_samples]. Matches attnbf::synthesize.
Tensor istft(const Tensor& re, const Tensor& im, const StftConfig& cfg, std::size_t num_samples);

// -- complex values as (re, im) pairs -------------------------------------------
struct CTensor {
  Tensor re;
  Tensor im;
};

CTensor complex_matmul(const CTensor& a, const CTensor& b);
CTensor complex_conj_transpose(const CTensor& a);
CTensor complex_mul(const CTensor& a, const CTensor& b);

}  // namespace attnbf::ad
