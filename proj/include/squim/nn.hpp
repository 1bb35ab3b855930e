#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "squim/autodiff.hpp"

namespace squim::nn {

using ad::Tensor;

// One LSTM direction. Gates are packed i, f, g, o along the 4H axis.
struct LstmDirParams {
  Tensor w_ih;  // [features x 4H]
  Tensor w_hh;  // [H x 4H]
  Tensor bias;  // [4H]
};

struct BlstmParams {
  LstmDirParams fw;
  LstmDirParams bw;
};

// Bidirectional LSTM over the step axis with zero initial states.
// x: [steps x features] or [batch x steps x features];
// returns [steps x 2H] or [batch x steps x 2H].
Tensor blstm(const Tensor& x, const BlstmParams& p, int hidden);

struct AttentionHeadParams {
  Tensor w_q;  // [N x d]
  Tensor w_k;  // [N x d]
  Tensor w_v;  // [N x d]
};

struct AttentionParams {
  std::vector<AttentionHeadParams> heads;
  Tensor w_o;  // [h*d x d]
};

// Scaled dot-product self-attention over the rows of z_t [L x N], heads of
// full width d, concatenated and projected by w_o. No positional encoding.
Tensor multi_head_attention(const Tensor& z_t, const AttentionParams& p);

// Softmax-weighted pooling over the row axis of x [L x d] with one shared
// learnable sharpness alpha: column means at alpha = 0, column maxima as
// alpha -> +inf. Returns [d].
Tensor auto_pool(const Tensor& x, const Tensor& alpha);

// y = x * w + b applied along the last axis; x may be rank 2 or 3.
Tensor linear(const Tensor& x, const Tensor& w, const Tensor& b);

// layer_norm over an arbitrary feature axis (permutes to last internally).
Tensor layer_norm_axis(const Tensor& x, int axis, const Tensor& gain,
                       const Tensor& bias);

// Named parameter map plus Adam state. Parameter tensors are leaves shared
// by every graph; iteration order is lexicographic, which fixes the byte
// layout of checkpoints and the floating-point reduction order.
class ParamStore {
 public:
  Tensor create(const std::string& name, ad::Shape shape,
                std::vector<double> init);
  const Tensor& at(const std::string& name) const;
  bool has(const std::string& name) const;
  std::vector<std::string> names() const;
  std::size_t count() const { return params_.size(); }
  std::int64_t total_parameters() const;

  void zero_grad();
  double grad_norm() const;
  // Scales all gradients so the global norm does not exceed max_norm.
  void clip_grad_norm(double max_norm);
  // Bias-corrected Adam update in place.
  void adam_step(double lr, double beta1 = 0.9, double beta2 = 0.999,
                 double eps = 1e-8);
  std::int64_t step_count() const { return step_; }

  // Full-precision optimizer state, used by exact training resume.
  struct Moments {
    std::vector<double> m;
    std::vector<double> v;
  };
  const std::map<std::string, Moments>& moments() const { return moments_; }
  void restore_moments(std::map<std::string, Moments> moments, std::int64_t step);

  auto begin() const { return params_.begin(); }
  auto end() const { return params_.end(); }

 private:
  std::map<std::string, Tensor> params_;
  std::map<std::string, Moments> moments_;
  std::int64_t step_ = 0;
};

// Central-finite-difference verification of reverse-mode gradients.
// f rebuilds the scalar loss graph from the current leaf values; returns the
// maximum relative error max(|g_ad - g_fd|) / max(|g_ad|, |g_fd|, 1e-8)
// over every component of every leaf.
double grad_check(const std::function<Tensor()>& f,
                  const std::vector<Tensor>& leaves);

}  // namespace squim::nn
