#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

namespace squim::ad {

using Shape = std::vector<int>;

std::int64_t numel(const Shape& s);
std::string shape_str(const Shape& s);

// One recorded operation result. Creation order doubles as the tape: every
// input node precedes its consumers, so walking ids in reverse is a valid
// reverse topological order and backward() visits each node exactly once.
struct Node {
  Shape shape;
  std::vector<double> value;
  std::vector<double> grad;  // allocated on first use, same length as value
  bool requires_grad = false;
  std::uint64_t id = 0;
  std::uint64_t visit_stamp = 0;
  std::vector<std::shared_ptr<Node>> parents;
  // Scatters this node's grad into the parents' grads.
  std::function<void(Node&)> backprop;

  void ensure_grad() {
    if (grad.size() != value.size()) grad.assign(value.size(), 0.0);
  }
};

// Value-semantics handle onto a Node. Cheap to copy; the underlying buffers
// are immutable once created except for leaf values (optimizer updates,
// finite-difference probes) and grads.
class Tensor {
 public:
  Tensor() = default;

  static Tensor from_data(Shape shape, std::vector<double> data,
                          bool requires_grad = false);
  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, double v);
  static Tensor scalar(double v);

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const { return node_->shape; }
  int rank() const { return static_cast<int>(node_->shape.size()); }
  std::int64_t size() const { return static_cast<std::int64_t>(node_->value.size()); }
  const std::vector<double>& value() const { return node_->value; }
  // Leaf-only mutation hook; using it on an op output would desynchronize
  // the recorded graph.
  std::vector<double>& mutable_value() { return node_->value; }
  const std::vector<double>& grad() const;
  bool requires_grad() const { return node_->requires_grad; }
  void zero_grad();
  double item() const;

  std::shared_ptr<Node> node() const { return node_; }
  explicit Tensor(std::shared_ptr<Node> n) : node_(std::move(n)) {}

 private:
  std::shared_ptr<Node> node_;
};

// Suspends tape recording: ops inside the scope produce constant results and
// release their inputs immediately. Used for inference.
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;
};

bool grad_enabled();

// Reverse pass from a scalar root. Accumulates into leaf grads (callers zero
// them between steps).
void backward(const Tensor& root);

// --- elementwise / structural primitives ---
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double c);
// Broadcast multiply by a single-element tensor (the one sanctioned
// broadcast; everything else requires explicit reshapes).
Tensor mul_scalar(const Tensor& a, const Tensor& s);
// Adds a length-n vector to every row of an [m x n] matrix.
Tensor add_rowvec(const Tensor& m, const Tensor& v);
Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& a);
Tensor permute(const Tensor& a, const std::vector<int>& perm);
Tensor reshape(const Tensor& a, Shape shape);
Tensor concat(const std::vector<Tensor>& parts, int axis);
Tensor slice(const Tensor& a, int axis, int start, int len);
Tensor sum_axis(const Tensor& a, int axis);
Tensor sum_all(const Tensor& a);
Tensor mean_all(const Tensor& a);
Tensor abs_t(const Tensor& a);

// --- activations ---
Tensor relu(const Tensor& a);
Tensor sigmoid(const Tensor& a);
Tensor tanh_t(const Tensor& a);
// y = x for x >= 0, slope*x otherwise; slope is a learnable scalar tensor.
Tensor prelu(const Tensor& a, const Tensor& slope);
// Log-sum-exp stabilized softmax along `axis`.
Tensor softmax(const Tensor& a, int axis);

// Normalization over the last axis with per-feature gain/bias, eps = 1e-5.
Tensor layer_norm(const Tensor& a, const Tensor& gain, const Tensor& bias);

// --- signal-shaped primitives ---
// x: [1 x T], kernel: [N x 1 x P]; valid correlation with the given stride,
// output [N x L] with L = floor((T - P) / stride) + 1.
Tensor conv1d(const Tensor& x, const Tensor& kernel, int stride);
// [N x L] -> [N x S x R]: overlapped chunks, zero-padded at the tail.
// S = max(1, ceil((L - R) / hop) + 1).
Tensor chunk(const Tensor& f, int chunk_len, int hop);
// [N x S x R] -> [N x out_len]: plain summation of overlapping chunks, tail
// padding trimmed (positions beyond the covered extent are zero).
Tensor overlap_add_chunks(const Tensor& c, int hop, int out_len);
// [L x P] -> [out_len]: frame-level overlap-add.
Tensor overlap_add_frames(const Tensor& frames, int hop, int out_len);

}  // namespace squim::ad
