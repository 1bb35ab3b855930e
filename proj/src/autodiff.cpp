#include "squim/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "squim/errors.hpp"

namespace squim::ad {

namespace {

thread_local std::uint64_t g_next_id = 1;
thread_local std::uint64_t g_visit_stamp = 0;
thread_local int g_no_grad_depth = 0;

void check_finite(const char* op, const std::vector<double>& v) {
  for (double x : v) {
    if (!std::isfinite(x)) {
      throw ValueError(std::string(op) + ": produced non-finite value");
    }
  }
}

Tensor make_op(const char* op, Shape shape, std::vector<double> value,
               const std::vector<Tensor>& inputs,
               std::function<void(Node&)> backprop) {
  check_finite(op, value);
  auto n = std::make_shared<Node>();
  n->shape = std::move(shape);
  n->value = std::move(value);
  n->id = g_next_id++;
  bool rg = false;
  if (g_no_grad_depth == 0) {
    for (const Tensor& t : inputs) rg = rg || t.node()->requires_grad;
  }
  n->requires_grad = rg;
  if (rg) {
    n->parents.reserve(inputs.size());
    for (const Tensor& t : inputs) n->parents.push_back(t.node());
    n->backprop = std::move(backprop);
  }
  return Tensor(std::move(n));
}

[[noreturn]] void shape_fail(const char* op, const Tensor& a, const Tensor& b) {
  throw ShapeError(std::string(op) + ": incompatible shapes " +
                   shape_str(a.shape()) + " and " + shape_str(b.shape()));
}

void require_rank(const char* op, const Tensor& t, int rank) {
  if (t.rank() != rank) {
    throw ShapeError(std::string(op) + ": expected rank " +
                     std::to_string(rank) + " tensor, got shape " +
                     shape_str(t.shape()));
  }
}

std::vector<std::int64_t> row_major_strides(const Shape& s) {
  std::vector<std::int64_t> st(s.size(), 1);
  for (int i = static_cast<int>(s.size()) - 2; i >= 0; --i) {
    st[static_cast<std::size_t>(i)] =
        st[static_cast<std::size_t>(i) + 1] * s[static_cast<std::size_t>(i) + 1];
  }
  return st;
}

// c[m x n] += a[m x k] * b[k x n]
void mm_nn(const double* a, const double* b, double* c, int m, int k, int n) {
  for (int i = 0; i < m; ++i) {
    const double* arow = a + static_cast<std::size_t>(i) * k;
    double* crow = c + static_cast<std::size_t>(i) * n;
    for (int t = 0; t < k; ++t) {
      const double av = arow[t];
      const double* brow = b + static_cast<std::size_t>(t) * n;
      for (int j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

// c[m x n] += a[m x t] * b[n x t]^T
void mm_nt(const double* a, const double* b, double* c, int m, int t, int n) {
  for (int i = 0; i < m; ++i) {
    const double* arow = a + static_cast<std::size_t>(i) * t;
    double* crow = c + static_cast<std::size_t>(i) * n;
    for (int j = 0; j < n; ++j) {
      const double* brow = b + static_cast<std::size_t>(j) * t;
      double acc = 0.0;
      for (int q = 0; q < t; ++q) acc += arow[q] * brow[q];
      crow[j] += acc;
    }
  }
}

// c[k x n] += a[m x k]^T * b[m x n]
void mm_tn(const double* a, const double* b, double* c, int m, int k, int n) {
  for (int i = 0; i < m; ++i) {
    const double* arow = a + static_cast<std::size_t>(i) * k;
    const double* brow = b + static_cast<std::size_t>(i) * n;
    for (int t = 0; t < k; ++t) {
      const double av = arow[t];
      double* crow = c + static_cast<std::size_t>(t) * n;
      for (int j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

}  // namespace

std::int64_t numel(const Shape& s) {
  std::int64_t n = 1;
  for (int d : s) n *= d;
  return n;
}

std::string shape_str(const Shape& s) {
  std::ostringstream os;
  os << "[";
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (i) os << " x ";
    os << s[i];
  }
  os << "]";
  return os.str();
}

Tensor Tensor::from_data(Shape shape, std::vector<double> data,
                         bool requires_grad) {
  for (int d : shape) {
    if (d <= 0) throw ShapeError("tensor: non-positive dimension in " + shape_str(shape));
  }
  if (numel(shape) != static_cast<std::int64_t>(data.size())) {
    throw ShapeError("tensor: shape " + shape_str(shape) + " does not match " +
                     std::to_string(data.size()) + " elements");
  }
  check_finite("tensor", data);
  auto n = std::make_shared<Node>();
  n->shape = std::move(shape);
  n->value = std::move(data);
  n->requires_grad = requires_grad && g_no_grad_depth == 0;
  n->id = g_next_id++;
  return Tensor(std::move(n));
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
  std::vector<double> d(static_cast<std::size_t>(numel(shape)), 0.0);
  return from_data(std::move(shape), std::move(d), requires_grad);
}

Tensor Tensor::full(Shape shape, double v) {
  std::vector<double> d(static_cast<std::size_t>(numel(shape)), v);
  return from_data(std::move(shape), std::move(d), false);
}

Tensor Tensor::scalar(double v) { return from_data({1}, {v}, false); }

const std::vector<double>& Tensor::grad() const {
  node_->ensure_grad();
  return node_->grad;
}

void Tensor::zero_grad() {
  node_->grad.assign(node_->value.size(), 0.0);
}

double Tensor::item() const {
  if (size() != 1) {
    throw ShapeError("item: tensor has shape " + shape_str(shape()));
  }
  return node_->value[0];
}

NoGradGuard::NoGradGuard() { ++g_no_grad_depth; }
NoGradGuard::~NoGradGuard() { --g_no_grad_depth; }

bool grad_enabled() { return g_no_grad_depth == 0; }

void backward(const Tensor& root) {
  if (root.size() != 1) {
    throw ShapeError("backward: root must be scalar, got " + shape_str(root.shape()));
  }
  if (!root.requires_grad()) {
    throw ValueError("backward: root does not require gradients");
  }
  const std::uint64_t stamp = ++g_visit_stamp;
  std::vector<Node*> order;
  std::vector<Node*> stack{root.node().get()};
  root.node()->visit_stamp = stamp;
  while (!stack.empty()) {
    Node* n = stack.back();
    stack.pop_back();
    order.push_back(n);
    for (const auto& p : n->parents) {
      if (p->requires_grad && p->visit_stamp != stamp) {
        p->visit_stamp = stamp;
        stack.push_back(p.get());
      }
    }
  }
  std::sort(order.begin(), order.end(),
            [](const Node* a, const Node* b) { return a->id > b->id; });
  root.node()->ensure_grad();
  root.node()->grad[0] += 1.0;
  for (Node* n : order) {
    if (n->backprop) n->backprop(*n);
  }
}

// ---------------------------------------------------------------------------
// elementwise / structural ops

Tensor add(const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) shape_fail("add", a, b);
  std::vector<double> out(a.value());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += b.value()[i];
  auto an = a.node();
  auto bn = b.node();
  return make_op("add", a.shape(), std::move(out), {a, b}, [an, bn](Node& o) {
    if (an->requires_grad) {
      an->ensure_grad();
      for (std::size_t i = 0; i < o.grad.size(); ++i) an->grad[i] += o.grad[i];
    }
    if (bn->requires_grad) {
      bn->ensure_grad();
      for (std::size_t i = 0; i < o.grad.size(); ++i) bn->grad[i] += o.grad[i];
    }
  });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) shape_fail("sub", a, b);
  std::vector<double> out(a.value());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] -= b.value()[i];
  auto an = a.node();
  auto bn = b.node();
  return make_op("sub", a.shape(), std::move(out), {a, b}, [an, bn](Node& o) {
    if (an->requires_grad) {
      an->ensure_grad();
      for (std::size_t i = 0; i < o.grad.size(); ++i) an->grad[i] += o.grad[i];
    }
    if (bn->requires_grad) {
      bn->ensure_grad();
      for (std::size_t i = 0; i < o.grad.size(); ++i) bn->grad[i] -= o.grad[i];
    }
  });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) shape_fail("mul", a, b);
  std::vector<double> out(a.value());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= b.value()[i];
  auto an = a.node();
  auto bn = b.node();
  return make_op("mul", a.shape(), std::move(out), {a, b}, [an, bn](Node& o) {
    if (an->requires_grad) {
      an->ensure_grad();
      for (std::size_t i = 0; i < o.grad.size(); ++i) {
        an->grad[i] += o.grad[i] * bn->value[i];
      }
    }
    if (bn->requires_grad) {
      bn->ensure_grad();
      for (std::size_t i = 0; i < o.grad.size(); ++i) {
        bn->grad[i] += o.grad[i] * an->value[i];
      }
    }
  });
}

Tensor scale(const Tensor& a, double c) {
  std::vector<double> out(a.value());
  for (double& v : out) v *= c;
  auto an = a.node();
  return make_op("scale", a.shape(), std::move(out), {a}, [an, c](Node& o) {
    an->ensure_grad();
    for (std::size_t i = 0; i < o.grad.size(); ++i) an->grad[i] += c * o.grad[i];
  });
}

Tensor mul_scalar(const Tensor& a, const Tensor& s) {
  if (s.size() != 1) {
    throw ShapeError("mul_scalar: scalar operand has shape " + shape_str(s.shape()));
  }
  const double sv = s.value()[0];
  std::vector<double> out(a.value());
  for (double& v : out) v *= sv;
  auto an = a.node();
  auto sn = s.node();
  return make_op("mul_scalar", a.shape(), std::move(out), {a, s},
                 [an, sn, sv](Node& o) {
                   if (an->requires_grad) {
                     an->ensure_grad();
                     for (std::size_t i = 0; i < o.grad.size(); ++i) {
                       an->grad[i] += sv * o.grad[i];
                     }
                   }
                   if (sn->requires_grad) {
                     sn->ensure_grad();
                     double acc = 0.0;
                     for (std::size_t i = 0; i < o.grad.size(); ++i) {
                       acc += o.grad[i] * an->value[i];
                     }
                     sn->grad[0] += acc;
                   }
                 });
}

Tensor add_rowvec(const Tensor& m, const Tensor& v) {
  require_rank("add_rowvec", m, 2);
  require_rank("add_rowvec", v, 1);
  if (m.shape()[1] != v.shape()[0]) shape_fail("add_rowvec", m, v);
  const int rows = m.shape()[0];
  const int cols = m.shape()[1];
  std::vector<double> out(m.value());
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) {
      out[static_cast<std::size_t>(r) * cols + c] += v.value()[static_cast<std::size_t>(c)];
    }
  }
  auto mn = m.node();
  auto vn = v.node();
  return make_op("add_rowvec", m.shape(), std::move(out), {m, v},
                 [mn, vn, rows, cols](Node& o) {
                   if (mn->requires_grad) {
                     mn->ensure_grad();
                     for (std::size_t i = 0; i < o.grad.size(); ++i) {
                       mn->grad[i] += o.grad[i];
                     }
                   }
                   if (vn->requires_grad) {
                     vn->ensure_grad();
                     for (int r = 0; r < rows; ++r) {
                       for (int c = 0; c < cols; ++c) {
                         vn->grad[static_cast<std::size_t>(c)] +=
                             o.grad[static_cast<std::size_t>(r) * cols + c];
                       }
                     }
                   }
                 });
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  require_rank("matmul", a, 2);
  require_rank("matmul", b, 2);
  if (a.shape()[1] != b.shape()[0]) shape_fail("matmul", a, b);
  const int m = a.shape()[0];
  const int k = a.shape()[1];
  const int n = b.shape()[1];
  std::vector<double> out(static_cast<std::size_t>(m) * n, 0.0);
  mm_nn(a.value().data(), b.value().data(), out.data(), m, k, n);
  auto an = a.node();
  auto bn = b.node();
  return make_op("matmul", {m, n}, std::move(out), {a, b},
                 [an, bn, m, k, n](Node& o) {
                   if (an->requires_grad) {
                     an->ensure_grad();
                     mm_nt(o.grad.data(), bn->value.data(), an->grad.data(), m, n, k);
                   }
                   if (bn->requires_grad) {
                     bn->ensure_grad();
                     mm_tn(an->value.data(), o.grad.data(), bn->grad.data(), m, k, n);
                   }
                 });
}

Tensor transpose(const Tensor& a) {
  require_rank("transpose", a, 2);
  return permute(a, {1, 0});
}

Tensor permute(const Tensor& a, const std::vector<int>& perm) {
  const int r = a.rank();
  if (static_cast<int>(perm.size()) != r) {
    throw ShapeError("permute: axis list size " + std::to_string(perm.size()) +
                     " does not match rank of " + shape_str(a.shape()));
  }
  std::vector<bool> seen(static_cast<std::size_t>(r), false);
  for (int p : perm) {
    if (p < 0 || p >= r || seen[static_cast<std::size_t>(p)]) {
      throw ShapeError("permute: invalid axis permutation");
    }
    seen[static_cast<std::size_t>(p)] = true;
  }
  Shape out_shape(static_cast<std::size_t>(r));
  for (int i = 0; i < r; ++i) {
    out_shape[static_cast<std::size_t>(i)] =
        a.shape()[static_cast<std::size_t>(perm[static_cast<std::size_t>(i)])];
  }
  const auto in_strides = row_major_strides(a.shape());
  const auto total = static_cast<std::size_t>(numel(out_shape));

  // out[idx] = in[permuted idx]; precompute the in-stride seen from each
  // output axis so a single linear walk covers any rank.
  std::vector<std::int64_t> gather(static_cast<std::size_t>(r));
  for (int i = 0; i < r; ++i) {
    gather[static_cast<std::size_t>(i)] =
        in_strides[static_cast<std::size_t>(perm[static_cast<std::size_t>(i)])];
  }
  std::vector<double> out(total);
  std::vector<std::int64_t> idx(static_cast<std::size_t>(r), 0);
  std::int64_t src = 0;
  for (std::size_t lin = 0; lin < total; ++lin) {
    out[lin] = a.value()[static_cast<std::size_t>(src)];
    for (int ax = r - 1; ax >= 0; --ax) {
      auto& cur = idx[static_cast<std::size_t>(ax)];
      src += gather[static_cast<std::size_t>(ax)];
      if (++cur < out_shape[static_cast<std::size_t>(ax)]) break;
      src -= gather[static_cast<std::size_t>(ax)] * cur;
      cur = 0;
    }
  }

  auto an = a.node();
  return make_op("permute", out_shape, std::move(out), {a},
                 [an, gather, out_shape, r](Node& o) {
                   an->ensure_grad();
                   std::vector<std::int64_t> idx(static_cast<std::size_t>(r), 0);
                   std::int64_t src = 0;
                   for (std::size_t lin = 0; lin < o.grad.size(); ++lin) {
                     an->grad[static_cast<std::size_t>(src)] += o.grad[lin];
                     for (int ax = r - 1; ax >= 0; --ax) {
                       auto& cur = idx[static_cast<std::size_t>(ax)];
                       src += gather[static_cast<std::size_t>(ax)];
                       if (++cur < out_shape[static_cast<std::size_t>(ax)]) break;
                       src -= gather[static_cast<std::size_t>(ax)] * cur;
                       cur = 0;
                     }
                   }
                 });
}

Tensor reshape(const Tensor& a, Shape shape) {
  if (numel(shape) != a.size()) {
    throw ShapeError("reshape: cannot view " + shape_str(a.shape()) + " as " +
                     shape_str(shape));
  }
  auto an = a.node();
  return make_op("reshape", std::move(shape), a.value(), {a}, [an](Node& o) {
    an->ensure_grad();
    for (std::size_t i = 0; i < o.grad.size(); ++i) an->grad[i] += o.grad[i];
  });
}

Tensor concat(const std::vector<Tensor>& parts, int axis) {
  if (parts.empty()) {
    throw ShapeError("concat: no inputs");
  }
  const int r = parts[0].rank();
  if (axis < 0 || axis >= r) {
    throw ShapeError("concat: axis out of range");
  }
  Shape out_shape = parts[0].shape();
  out_shape[static_cast<std::size_t>(axis)] = 0;
  for (const Tensor& p : parts) {
    if (p.rank() != r) shape_fail("concat", parts[0], p);
    for (int i = 0; i < r; ++i) {
      if (i != axis && p.shape()[static_cast<std::size_t>(i)] !=
                           parts[0].shape()[static_cast<std::size_t>(i)]) {
        shape_fail("concat", parts[0], p);
      }
    }
    out_shape[static_cast<std::size_t>(axis)] += p.shape()[static_cast<std::size_t>(axis)];
  }

  // Row-major layout: concatenation interleaves per-outer-index blocks.
  std::int64_t outer = 1;
  for (int i = 0; i < axis; ++i) outer *= out_shape[static_cast<std::size_t>(i)];
  std::int64_t inner = 1;
  for (int i = axis + 1; i < r; ++i) inner *= out_shape[static_cast<std::size_t>(i)];

  const auto total = static_cast<std::size_t>(numel(out_shape));
  std::vector<double> out(total);
  const std::int64_t out_block = out_shape[static_cast<std::size_t>(axis)] * inner;
  std::int64_t off = 0;
  std::vector<std::int64_t> offsets;
  offsets.reserve(parts.size());
  for (const Tensor& p : parts) {
    offsets.push_back(off);
    const std::int64_t block = p.shape()[static_cast<std::size_t>(axis)] * inner;
    for (std::int64_t o = 0; o < outer; ++o) {
      std::copy_n(p.value().data() + o * block, block,
                  out.data() + o * out_block + off);
    }
    off += block;
  }

  std::vector<std::shared_ptr<Node>> nodes;
  nodes.reserve(parts.size());
  for (const Tensor& p : parts) nodes.push_back(p.node());
  return make_op("concat", out_shape, std::move(out), parts,
                 [nodes, offsets, outer, out_block](Node& o) {
                   for (std::size_t pi = 0; pi < nodes.size(); ++pi) {
                     auto& pn = nodes[pi];
                     if (!pn->requires_grad) continue;
                     pn->ensure_grad();
                     const std::int64_t block =
                         static_cast<std::int64_t>(pn->value.size()) / outer;
                     for (std::int64_t ob = 0; ob < outer; ++ob) {
                       const double* src = o.grad.data() + ob * out_block + offsets[pi];
                       double* dst = pn->grad.data() + ob * block;
                       for (std::int64_t i = 0; i < block; ++i) dst[i] += src[i];
                     }
                   }
                 });
}

Tensor slice(const Tensor& a, int axis, int start, int len) {
  const int r = a.rank();
  if (axis < 0 || axis >= r) {
    throw ShapeError("slice: axis out of range");
  }
  const int dim = a.shape()[static_cast<std::size_t>(axis)];
  if (start < 0 || len < 1 || start + len > dim) {
    throw ShapeError("slice: range [" + std::to_string(start) + ", " +
                     std::to_string(start + len) + ") out of bounds for axis of size " +
                     std::to_string(dim));
  }
  Shape out_shape = a.shape();
  out_shape[static_cast<std::size_t>(axis)] = len;
  std::int64_t outer = 1;
  for (int i = 0; i < axis; ++i) outer *= a.shape()[static_cast<std::size_t>(i)];
  std::int64_t inner = 1;
  for (int i = axis + 1; i < r; ++i) inner *= a.shape()[static_cast<std::size_t>(i)];

  const std::int64_t in_block = static_cast<std::int64_t>(dim) * inner;
  const std::int64_t out_block = static_cast<std::int64_t>(len) * inner;
  const std::int64_t skip = static_cast<std::int64_t>(start) * inner;
  std::vector<double> out(static_cast<std::size_t>(numel(out_shape)));
  for (std::int64_t o = 0; o < outer; ++o) {
    std::copy_n(a.value().data() + o * in_block + skip, out_block,
                out.data() + o * out_block);
  }
  auto an = a.node();
  return make_op("slice", out_shape, std::move(out), {a},
                 [an, outer, in_block, out_block, skip](Node& o) {
                   an->ensure_grad();
                   for (std::int64_t ob = 0; ob < outer; ++ob) {
                     const double* src = o.grad.data() + ob * out_block;
                     double* dst = an->grad.data() + ob * in_block + skip;
                     for (std::int64_t i = 0; i < out_block; ++i) dst[i] += src[i];
                   }
                 });
}

Tensor sum_axis(const Tensor& a, int axis) {
  const int r = a.rank();
  if (axis < 0 || axis >= r) {
    throw ShapeError("sum_axis: axis out of range");
  }
  const int dim = a.shape()[static_cast<std::size_t>(axis)];
  Shape out_shape;
  for (int i = 0; i < r; ++i) {
    if (i != axis) out_shape.push_back(a.shape()[static_cast<std::size_t>(i)]);
  }
  if (out_shape.empty()) out_shape = {1};
  std::int64_t outer = 1;
  for (int i = 0; i < axis; ++i) outer *= a.shape()[static_cast<std::size_t>(i)];
  std::int64_t inner = 1;
  for (int i = axis + 1; i < r; ++i) inner *= a.shape()[static_cast<std::size_t>(i)];

  std::vector<double> out(static_cast<std::size_t>(outer * inner), 0.0);
  for (std::int64_t o = 0; o < outer; ++o) {
    for (int d = 0; d < dim; ++d) {
      const double* src = a.value().data() + (o * dim + d) * inner;
      double* dst = out.data() + o * inner;
      for (std::int64_t i = 0; i < inner; ++i) dst[i] += src[i];
    }
  }
  auto an = a.node();
  return make_op("sum_axis", out_shape, std::move(out), {a},
                 [an, outer, inner, dim](Node& o) {
                   an->ensure_grad();
                   for (std::int64_t ob = 0; ob < outer; ++ob) {
                     const double* src = o.grad.data() + ob * inner;
                     for (int d = 0; d < dim; ++d) {
                       double* dst = an->grad.data() + (ob * dim + d) * inner;
                       for (std::int64_t i = 0; i < inner; ++i) dst[i] += src[i];
                     }
                   }
                 });
}

Tensor sum_all(const Tensor& a) {
  double acc = 0.0;
  for (double v : a.value()) acc += v;
  auto an = a.node();
  return make_op("sum_all", {1}, {acc}, {a}, [an](Node& o) {
    an->ensure_grad();
    for (double& g : an->grad) g += o.grad[0];
  });
}

Tensor mean_all(const Tensor& a) {
  const double inv = 1.0 / static_cast<double>(a.size());
  double acc = 0.0;
  for (double v : a.value()) acc += v;
  acc *= inv;
  auto an = a.node();
  return make_op("mean_all", {1}, {acc}, {a}, [an, inv](Node& o) {
    an->ensure_grad();
    for (double& g : an->grad) g += inv * o.grad[0];
  });
}

Tensor abs_t(const Tensor& a) {
  std::vector<double> out(a.value());
  for (double& v : out) v = std::abs(v);
  auto an = a.node();
  return make_op("abs", a.shape(), std::move(out), {a}, [an](Node& o) {
    an->ensure_grad();
    for (std::size_t i = 0; i < o.grad.size(); ++i) {
      const double x = an->value[i];
      an->grad[i] += (x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0)) * o.grad[i];
    }
  });
}

// ---------------------------------------------------------------------------
// activations

Tensor relu(const Tensor& a) {
  std::vector<double> out(a.value());
  for (double& v : out) v = v > 0.0 ? v : 0.0;
  auto an = a.node();
  return make_op("relu", a.shape(), std::move(out), {a}, [an](Node& o) {
    an->ensure_grad();
    for (std::size_t i = 0; i < o.grad.size(); ++i) {
      if (an->value[i] > 0.0) an->grad[i] += o.grad[i];
    }
  });
}

Tensor sigmoid(const Tensor& a) {
  std::vector<double> out(a.value());
  for (double& v : out) {
    v = v >= 0.0 ? 1.0 / (1.0 + std::exp(-v))
                 : std::exp(v) / (1.0 + std::exp(v));
  }
  auto an = a.node();
  return make_op("sigmoid", a.shape(), std::move(out), {a}, [an](Node& o) {
    an->ensure_grad();
    for (std::size_t i = 0; i < o.grad.size(); ++i) {
      const double y = o.value[i];
      an->grad[i] += y * (1.0 - y) * o.grad[i];
    }
  });
}

Tensor tanh_t(const Tensor& a) {
  std::vector<double> out(a.value());
  for (double& v : out) v = std::tanh(v);
  auto an = a.node();
  return make_op("tanh", a.shape(), std::move(out), {a}, [an](Node& o) {
    an->ensure_grad();
    for (std::size_t i = 0; i < o.grad.size(); ++i) {
      const double y = o.value[i];
      an->grad[i] += (1.0 - y * y) * o.grad[i];
    }
  });
}

Tensor prelu(const Tensor& a, const Tensor& slope) {
  if (slope.size() != 1) {
    throw ShapeError("prelu: slope must be a single learnable scalar");
  }
  const double s = slope.value()[0];
  std::vector<double> out(a.value());
  for (double& v : out) {
    if (v < 0.0) v *= s;
  }
  auto an = a.node();
  auto sn = slope.node();
  return make_op("prelu", a.shape(), std::move(out), {a, slope},
                 [an, sn, s](Node& o) {
                   if (an->requires_grad) {
                     an->ensure_grad();
                     for (std::size_t i = 0; i < o.grad.size(); ++i) {
                       an->grad[i] += (an->value[i] >= 0.0 ? 1.0 : s) * o.grad[i];
                     }
                   }
                   if (sn->requires_grad) {
                     sn->ensure_grad();
                     double acc = 0.0;
                     for (std::size_t i = 0; i < o.grad.size(); ++i) {
                       if (an->value[i] < 0.0) acc += an->value[i] * o.grad[i];
                     }
                     sn->grad[0] += acc;
                   }
                 });
}

Tensor softmax(const Tensor& a, int axis) {
  const int r = a.rank();
  if (axis < 0 || axis >= r) {
    throw ShapeError("softmax: axis out of range");
  }
  if (axis != r - 1) {
    // Move the axis last, apply, move back; backward falls out of the
    // permute nodes.
    std::vector<int> fwd, inv(static_cast<std::size_t>(r));
    for (int i = 0; i < r; ++i) {
      if (i != axis) fwd.push_back(i);
    }
    fwd.push_back(axis);
    for (int i = 0; i < r; ++i) inv[static_cast<std::size_t>(fwd[static_cast<std::size_t>(i)])] = i;
    return permute(softmax(permute(a, fwd), r - 1), inv);
  }

  const int f = a.shape().back();
  const std::int64_t rows = a.size() / f;
  std::vector<double> out(a.value().size());
  for (std::int64_t row = 0; row < rows; ++row) {
    const double* x = a.value().data() + row * f;
    double* y = out.data() + row * f;
    double m = x[0];
    for (int i = 1; i < f; ++i) m = std::max(m, x[i]);
    double denom = 0.0;
    for (int i = 0; i < f; ++i) {
      y[i] = std::exp(x[i] - m);
      denom += y[i];
    }
    for (int i = 0; i < f; ++i) y[i] /= denom;
  }
  auto an = a.node();
  return make_op("softmax", a.shape(), std::move(out), {a},
                 [an, rows, f](Node& o) {
                   an->ensure_grad();
                   for (std::int64_t row = 0; row < rows; ++row) {
                     const double* y = o.value.data() + row * f;
                     const double* g = o.grad.data() + row * f;
                     double dot = 0.0;
                     for (int i = 0; i < f; ++i) dot += y[i] * g[i];
                     double* dst = an->grad.data() + row * f;
                     for (int i = 0; i < f; ++i) dst[i] += y[i] * (g[i] - dot);
                   }
                 });
}

Tensor layer_norm(const Tensor& a, const Tensor& gain, const Tensor& bias) {
  const int f = a.shape().back();
  if (gain.rank() != 1 || gain.shape()[0] != f || bias.rank() != 1 ||
      bias.shape()[0] != f) {
    throw ShapeError("layer_norm: gain/bias must be length-" + std::to_string(f) +
                     " vectors");
  }
  constexpr double eps = 1e-5;
  const std::int64_t rows = a.size() / f;
  std::vector<double> out(a.value().size());
  std::vector<double> inv_std(static_cast<std::size_t>(rows));
  std::vector<double> xhat(a.value().size());
  for (std::int64_t row = 0; row < rows; ++row) {
    const double* x = a.value().data() + row * f;
    double mean = 0.0;
    for (int i = 0; i < f; ++i) mean += x[i];
    mean /= f;
    double var = 0.0;
    for (int i = 0; i < f; ++i) var += (x[i] - mean) * (x[i] - mean);
    var /= f;
    const double is = 1.0 / std::sqrt(var + eps);
    inv_std[static_cast<std::size_t>(row)] = is;
    for (int i = 0; i < f; ++i) {
      const double xh = (x[i] - mean) * is;
      xhat[static_cast<std::size_t>(row * f + i)] = xh;
      out[static_cast<std::size_t>(row * f + i)] = xh * gain.value()[static_cast<std::size_t>(i)] +
                                                   bias.value()[static_cast<std::size_t>(i)];
    }
  }
  auto an = a.node();
  auto gn = gain.node();
  auto bn = bias.node();
  return make_op(
      "layer_norm", a.shape(), std::move(out), {a, gain, bias},
      [an, gn, bn, rows, f, inv_std = std::move(inv_std),
       xhat = std::move(xhat)](Node& o) {
        if (gn->requires_grad) gn->ensure_grad();
        if (bn->requires_grad) bn->ensure_grad();
        if (an->requires_grad) an->ensure_grad();
        for (std::int64_t row = 0; row < rows; ++row) {
          const double* g = o.grad.data() + row * f;
          const double* xh = xhat.data() + row * f;
          if (gn->requires_grad || bn->requires_grad) {
            for (int i = 0; i < f; ++i) {
              if (gn->requires_grad) gn->grad[static_cast<std::size_t>(i)] += g[i] * xh[i];
              if (bn->requires_grad) bn->grad[static_cast<std::size_t>(i)] += g[i];
            }
          }
          if (an->requires_grad) {
            double sum_dxhat = 0.0, sum_dxhat_xhat = 0.0;
            for (int i = 0; i < f; ++i) {
              const double dxh = g[i] * gn->value[static_cast<std::size_t>(i)];
              sum_dxhat += dxh;
              sum_dxhat_xhat += dxh * xh[i];
            }
            const double is = inv_std[static_cast<std::size_t>(row)];
            double* dst = an->grad.data() + row * f;
            for (int i = 0; i < f; ++i) {
              const double dxh = g[i] * gn->value[static_cast<std::size_t>(i)];
              dst[i] += is * (dxh - sum_dxhat / f - xh[i] * sum_dxhat_xhat / f);
            }
          }
        }
      });
}

// ---------------------------------------------------------------------------
// signal-shaped ops

Tensor conv1d(const Tensor& x, const Tensor& kernel, int stride) {
  require_rank("conv1d", x, 2);
  require_rank("conv1d", kernel, 3);
  if (x.shape()[0] != 1 || kernel.shape()[1] != 1) {
    throw ShapeError("conv1d: expected x [1 x T] and kernel [N x 1 x P], got " +
                     shape_str(x.shape()) + " and " + shape_str(kernel.shape()));
  }
  if (stride < 1) {
    throw ValueError("conv1d: stride must be >= 1");
  }
  const int t_len = x.shape()[1];
  const int n_out = kernel.shape()[0];
  const int p = kernel.shape()[2];
  if (t_len < p) {
    throw ShapeError("conv1d: input length " + std::to_string(t_len) +
                     " shorter than kernel " + std::to_string(p));
  }
  const int l = (t_len - p) / stride + 1;
  std::vector<double> out(static_cast<std::size_t>(n_out) * l, 0.0);
  const double* xd = x.value().data();
  const double* kd = kernel.value().data();
  for (int n = 0; n < n_out; ++n) {
    const double* kr = kd + static_cast<std::size_t>(n) * p;
    double* orow = out.data() + static_cast<std::size_t>(n) * l;
    for (int j = 0; j < l; ++j) {
      const double* xi = xd + static_cast<std::size_t>(j) * stride;
      double acc = 0.0;
      for (int q = 0; q < p; ++q) acc += kr[q] * xi[q];
      orow[j] = acc;
    }
  }
  auto xn = x.node();
  auto kn = kernel.node();
  return make_op("conv1d", {n_out, l}, std::move(out), {x, kernel},
                 [xn, kn, n_out, l, p, stride](Node& o) {
                   if (xn->requires_grad) xn->ensure_grad();
                   if (kn->requires_grad) kn->ensure_grad();
                   for (int n = 0; n < n_out; ++n) {
                     const double* kr = kn->value.data() + static_cast<std::size_t>(n) * p;
                     double* kg = kn->requires_grad
                                      ? kn->grad.data() + static_cast<std::size_t>(n) * p
                                      : nullptr;
                     const double* grow = o.grad.data() + static_cast<std::size_t>(n) * l;
                     for (int j = 0; j < l; ++j) {
                       const double g = grow[j];
                       const std::size_t base = static_cast<std::size_t>(j) * stride;
                       if (xn->requires_grad) {
                         for (int q = 0; q < p; ++q) xn->grad[base + q] += g * kr[q];
                       }
                       if (kg) {
                         for (int q = 0; q < p; ++q) kg[q] += g * xn->value[base + q];
                       }
                     }
                   }
                 });
}

Tensor chunk(const Tensor& f, int chunk_len, int hop) {
  require_rank("chunk", f, 2);
  if (chunk_len < 1 || hop < 1 || hop > chunk_len) {
    throw ValueError("chunk: need 1 <= hop <= chunk_len");
  }
  const int n = f.shape()[0];
  const int l = f.shape()[1];
  const int s = l <= chunk_len ? 1 : (l - chunk_len + hop - 1) / hop + 1;
  std::vector<double> out(static_cast<std::size_t>(n) * s * chunk_len, 0.0);
  for (int c = 0; c < n; ++c) {
    const double* src = f.value().data() + static_cast<std::size_t>(c) * l;
    for (int si = 0; si < s; ++si) {
      double* dst = out.data() +
                    (static_cast<std::size_t>(c) * s + si) * chunk_len;
      for (int r = 0; r < chunk_len; ++r) {
        const int pos = si * hop + r;
        if (pos < l) dst[r] = src[pos];
      }
    }
  }
  auto fn = f.node();
  return make_op("chunk", {n, s, chunk_len}, std::move(out), {f},
                 [fn, n, l, s, chunk_len, hop](Node& o) {
                   fn->ensure_grad();
                   for (int c = 0; c < n; ++c) {
                     double* dst = fn->grad.data() + static_cast<std::size_t>(c) * l;
                     for (int si = 0; si < s; ++si) {
                       const double* src =
                           o.grad.data() + (static_cast<std::size_t>(c) * s + si) * chunk_len;
                       for (int r = 0; r < chunk_len; ++r) {
                         const int pos = si * hop + r;
                         if (pos < l) dst[pos] += src[r];
                       }
                     }
                   }
                 });
}

Tensor overlap_add_chunks(const Tensor& c, int hop, int out_len) {
  require_rank("overlap_add_chunks", c, 3);
  if (hop < 1) {
    throw ValueError("overlap_add_chunks: hop must be >= 1");
  }
  const int n = c.shape()[0];
  const int s = c.shape()[1];
  const int r_len = c.shape()[2];
  const int covered = (s - 1) * hop + r_len;
  if (out_len < 1 || out_len > covered) {
    throw ShapeError("overlap_add_chunks: out_len " + std::to_string(out_len) +
                     " inconsistent with covered extent " + std::to_string(covered));
  }
  std::vector<double> out(static_cast<std::size_t>(n) * out_len, 0.0);
  for (int ch = 0; ch < n; ++ch) {
    double* dst = out.data() + static_cast<std::size_t>(ch) * out_len;
    for (int si = 0; si < s; ++si) {
      const double* src =
          c.value().data() + (static_cast<std::size_t>(ch) * s + si) * r_len;
      for (int r = 0; r < r_len; ++r) {
        const int pos = si * hop + r;
        if (pos < out_len) dst[pos] += src[r];
      }
    }
  }
  auto cn = c.node();
  return make_op("overlap_add_chunks", {n, out_len}, std::move(out), {c},
                 [cn, n, s, r_len, hop, out_len](Node& o) {
                   cn->ensure_grad();
                   for (int ch = 0; ch < n; ++ch) {
                     const double* src = o.grad.data() + static_cast<std::size_t>(ch) * out_len;
                     for (int si = 0; si < s; ++si) {
                       double* dst = cn->grad.data() +
                                     (static_cast<std::size_t>(ch) * s + si) * r_len;
                       for (int r = 0; r < r_len; ++r) {
                         const int pos = si * hop + r;
                         if (pos < out_len) dst[r] += src[pos];
                       }
                     }
                   }
                 });
}

Tensor overlap_add_frames(const Tensor& frames, int hop, int out_len) {
  require_rank("overlap_add_frames", frames, 2);
  if (hop < 1 || out_len < 1) {
    throw ValueError("overlap_add_frames: hop and out_len must be >= 1");
  }
  const int l = frames.shape()[0];
  const int p = frames.shape()[1];
  std::vector<double> out(static_cast<std::size_t>(out_len), 0.0);
  for (int j = 0; j < l; ++j) {
    const double* src = frames.value().data() + static_cast<std::size_t>(j) * p;
    for (int q = 0; q < p; ++q) {
      const int pos = j * hop + q;
      if (pos < out_len) out[static_cast<std::size_t>(pos)] += src[q];
    }
  }
  auto fn = frames.node();
  return make_op("overlap_add_frames", {out_len}, std::move(out), {frames},
                 [fn, l, p, hop, out_len](Node& o) {
                   fn->ensure_grad();
                   for (int j = 0; j < l; ++j) {
                     double* dst = fn->grad.data() + static_cast<std::size_t>(j) * p;
                     for (int q = 0; q < p; ++q) {
                       const int pos = j * hop + q;
                       if (pos < out_len) dst[q] += o.grad[static_cast<std::size_t>(pos)];
                     }
                   }
                 });
}

}  // namespace squim::ad
