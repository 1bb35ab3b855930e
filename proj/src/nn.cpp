#include "squim/nn.hpp"

#include <algorithm>
#include <cmath>

#include "squim/errors.hpp"

namespace squim::nn {

namespace {

using ad::Shape;

// One direction of the recurrence over x [B x T x F].
std::vector<Tensor> lstm_steps(const Tensor& x, const LstmDirParams& p,
                               int hidden, bool reverse) {
  const int batch = x.shape()[0];
  const int steps = x.shape()[1];
  const int features = x.shape()[2];
  if (p.w_ih.shape() != Shape{features, 4 * hidden} ||
      p.w_hh.shape() != Shape{hidden, 4 * hidden} ||
      p.bias.shape() != Shape{4 * hidden}) {
    throw ShapeError("blstm: parameter shapes do not match features=" +
                     std::to_string(features) + ", hidden=" + std::to_string(hidden));
  }
  Tensor h = Tensor::zeros({batch, hidden});
  Tensor c = Tensor::zeros({batch, hidden});
  std::vector<Tensor> outputs(static_cast<std::size_t>(steps));
  for (int i = 0; i < steps; ++i) {
    const int t = reverse ? steps - 1 - i : i;
    Tensor x_t = ad::reshape(ad::slice(x, 1, t, 1), {batch, features});
    Tensor gates = ad::add_rowvec(
        ad::add(ad::matmul(x_t, p.w_ih), ad::matmul(h, p.w_hh)), p.bias);
    Tensor ig = ad::sigmoid(ad::slice(gates, 1, 0, hidden));
    Tensor fg = ad::sigmoid(ad::slice(gates, 1, hidden, hidden));
    Tensor gg = ad::tanh_t(ad::slice(gates, 1, 2 * hidden, hidden));
    Tensor og = ad::sigmoid(ad::slice(gates, 1, 3 * hidden, hidden));
    c = ad::add(ad::mul(fg, c), ad::mul(ig, gg));
    h = ad::mul(og, ad::tanh_t(c));
    outputs[static_cast<std::size_t>(t)] = ad::reshape(h, {batch, 1, hidden});
  }
  return outputs;
}

}  // namespace

Tensor blstm(const Tensor& x, const BlstmParams& p, int hidden) {
  if (hidden < 1) {
    throw ValueError("blstm: hidden size must be >= 1");
  }
  const bool batched = x.rank() == 3;
  if (!batched && x.rank() != 2) {
    throw ShapeError("blstm: expected [steps x features] or "
                     "[batch x steps x features], got " + ad::shape_str(x.shape()));
  }
  Tensor xb = batched ? x : ad::reshape(x, {1, x.shape()[0], x.shape()[1]});
  auto fw = lstm_steps(xb, p.fw, hidden, false);
  auto bw = lstm_steps(xb, p.bw, hidden, true);
  Tensor h_fw = fw.size() == 1 ? fw[0] : ad::concat(fw, 1);
  Tensor h_bw = bw.size() == 1 ? bw[0] : ad::concat(bw, 1);
  Tensor out = ad::concat({h_fw, h_bw}, 2);
  if (!batched) {
    out = ad::reshape(out, {out.shape()[1], out.shape()[2]});
  }
  return out;
}

Tensor multi_head_attention(const Tensor& z_t, const AttentionParams& p) {
  if (z_t.rank() != 2) {
    throw ShapeError("attention: expected [L x N] input, got " +
                     ad::shape_str(z_t.shape()));
  }
  if (p.heads.empty()) {
    throw ValueError("attention: no heads");
  }
  const int d = p.heads[0].w_q.shape()[1];
  const double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(d));
  std::vector<Tensor> heads;
  heads.reserve(p.heads.size());
  for (const auto& hp : p.heads) {
    Tensor q = ad::matmul(z_t, hp.w_q);
    Tensor k = ad::matmul(z_t, hp.w_k);
    Tensor v = ad::matmul(z_t, hp.w_v);
    Tensor scores = ad::scale(ad::matmul(q, ad::transpose(k)), inv_sqrt_d);
    Tensor weights = ad::softmax(scores, 1);
    heads.push_back(ad::matmul(weights, v));
  }
  Tensor cat = heads.size() == 1 ? heads[0] : ad::concat(heads, 1);
  return ad::matmul(cat, p.w_o);
}

Tensor auto_pool(const Tensor& x, const Tensor& alpha) {
  if (x.rank() != 2) {
    throw ShapeError("auto_pool: expected [L x d] input, got " +
                     ad::shape_str(x.shape()));
  }
  Tensor weights = ad::softmax(ad::mul_scalar(x, alpha), 0);
  return ad::sum_axis(ad::mul(x, weights), 0);
}

Tensor linear(const Tensor& x, const Tensor& w, const Tensor& b) {
  if (x.rank() == 2) {
    return ad::add_rowvec(ad::matmul(x, w), b);
  }
  if (x.rank() == 3) {
    const int b0 = x.shape()[0];
    const int b1 = x.shape()[1];
    Tensor flat = ad::reshape(x, {b0 * b1, x.shape()[2]});
    Tensor out = ad::add_rowvec(ad::matmul(flat, w), b);
    return ad::reshape(out, {b0, b1, out.shape()[1]});
  }
  throw ShapeError("linear: expected rank-2 or rank-3 input, got " +
                   ad::shape_str(x.shape()));
}

Tensor layer_norm_axis(const Tensor& x, int axis, const Tensor& gain,
                       const Tensor& bias) {
  const int r = x.rank();
  if (axis == r - 1) {
    return ad::layer_norm(x, gain, bias);
  }
  std::vector<int> fwd, inv(static_cast<std::size_t>(r));
  for (int i = 0; i < r; ++i) {
    if (i != axis) fwd.push_back(i);
  }
  fwd.push_back(axis);
  for (int i = 0; i < r; ++i) {
    inv[static_cast<std::size_t>(fwd[static_cast<std::size_t>(i)])] = i;
  }
  return ad::permute(ad::layer_norm(ad::permute(x, fwd), gain, bias), inv);
}

Tensor ParamStore::create(const std::string& name, ad::Shape shape,
                          std::vector<double> init) {
  if (params_.count(name)) {
    throw ValueError("param store: duplicate parameter name " + name);
  }
  Tensor t = Tensor::from_data(std::move(shape), std::move(init), true);
  params_.emplace(name, t);
  Moments mo;
  mo.m.assign(t.value().size(), 0.0);
  mo.v.assign(t.value().size(), 0.0);
  moments_.emplace(name, std::move(mo));
  return t;
}

const Tensor& ParamStore::at(const std::string& name) const {
  auto it = params_.find(name);
  if (it == params_.end()) {
    throw ValueError("param store: no parameter named " + name);
  }
  return it->second;
}

bool ParamStore::has(const std::string& name) const {
  return params_.count(name) != 0;
}

std::vector<std::string> ParamStore::names() const {
  std::vector<std::string> out;
  out.reserve(params_.size());
  for (const auto& [k, _] : params_) out.push_back(k);
  return out;
}

std::int64_t ParamStore::total_parameters() const {
  std::int64_t n = 0;
  for (const auto& [_, t] : params_) n += t.size();
  return n;
}

void ParamStore::zero_grad() {
  for (auto& [_, t] : params_) t.zero_grad();
}

double ParamStore::grad_norm() const {
  double acc = 0.0;
  for (const auto& [_, t] : params_) {
    for (double g : t.grad()) acc += g * g;
  }
  return std::sqrt(acc);
}

void ParamStore::clip_grad_norm(double max_norm) {
  const double norm = grad_norm();
  if (norm <= max_norm || norm == 0.0) return;
  const double s = max_norm / norm;
  for (auto& [_, t] : params_) {
    for (double& g : t.node()->grad) g *= s;
  }
}

void ParamStore::adam_step(double lr, double beta1, double beta2, double eps) {
  ++step_;
  const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(step_));
  const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(step_));
  for (auto& [name, t] : params_) {
    auto& mo = moments_.at(name);
    const auto& g = t.grad();
    auto& val = t.mutable_value();
    if (g.size() != val.size()) {
      throw ShapeError("adam: gradient/parameter size mismatch for " + name);
    }
    for (std::size_t i = 0; i < val.size(); ++i) {
      mo.m[i] = beta1 * mo.m[i] + (1.0 - beta1) * g[i];
      mo.v[i] = beta2 * mo.v[i] + (1.0 - beta2) * g[i] * g[i];
      const double mhat = mo.m[i] / bc1;
      const double vhat = mo.v[i] / bc2;
      val[i] -= lr * mhat / (std::sqrt(vhat) + eps);
    }
  }
}

void ParamStore::restore_moments(std::map<std::string, Moments> moments,
                                 std::int64_t step) {
  for (const auto& [name, mo] : moments) {
    auto it = params_.find(name);
    if (it == params_.end()) {
      throw ValueError("param store: moments for unknown parameter " + name);
    }
    if (mo.m.size() != it->second.value().size() ||
        mo.v.size() != it->second.value().size()) {
      throw ShapeError("param store: moment size mismatch for " + name);
    }
  }
  if (moments.size() != params_.size()) {
    throw ValueError("param store: incomplete moment set");
  }
  moments_ = std::move(moments);
  step_ = step;
}

double grad_check(const std::function<Tensor()>& f,
                  const std::vector<Tensor>& leaves) {
  for (Tensor l : leaves) l.zero_grad();
  Tensor out = f();
  ad::backward(out);
  std::vector<std::vector<double>> analytic;
  analytic.reserve(leaves.size());
  for (const Tensor& l : leaves) analytic.push_back(l.grad());

  double max_rel = 0.0;
  for (std::size_t li = 0; li < leaves.size(); ++li) {
    Tensor leaf = leaves[li];
    auto& vals = leaf.mutable_value();
    for (std::size_t i = 0; i < vals.size(); ++i) {
      const double theta = vals[i];
      const double h = 1e-5 * std::max(1.0, std::abs(theta));
      vals[i] = theta + h;
      const double fp = f().item();
      vals[i] = theta - h;
      const double fm = f().item();
      vals[i] = theta;
      const double g_fd = (fp - fm) / (2.0 * h);
      const double g_ad = analytic[li][i];
      const double rel = std::abs(g_ad - g_fd) /
                         std::max({std::abs(g_ad), std::abs(g_fd), 1e-8});
      max_rel = std::max(max_rel, rel);
    }
  }
  return max_rel;
}

}  // namespace squim::nn
