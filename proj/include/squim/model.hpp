#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "squim/autodiff.hpp"
#include "squim/metrics.hpp"
#include "squim/nn.hpp"
#include "squim/wav.hpp"

namespace squim {

using ad::Tensor;

// Architecture hyperparameters. Field names double as the keys of the flat
// config-file format, so they are part of the external interface.
struct ModelConfig {
  int N = 256;    // encoder channels / trunk feature width
  int P = 64;     // encoder kernel length in samples; hop is P/2
  int R = 71;     // chunk size in frames; hop is floor(R/2)
  int h = 4;      // attention heads
  int d = 256;    // transformer width
  int d1 = 1024;  // transformer feed-forward width
  int num_dprnn_blocks = 4;
  int blstm_hidden = 0;  // per direction; 0 resolves to N/2

  int hidden() const { return blstm_hidden > 0 ? blstm_hidden : N / 2; }
  int encoder_hop() const { return P / 2; }
  int chunk_hop() const { return R / 2; }
  // Throws on invalid combinations; note the transformer residual ties d to N.
  void validate() const;
  bool operator==(const ModelConfig&) const = default;
};

// Desk-scale preset small enough for exhaustive finite-difference checks.
ModelConfig tiny_config();
// Desk-scale preset that trains on 1-second clips in minutes.
ModelConfig small_config();

enum class MetricBranch { kStoi, kPesq, kSiSdr };

// Raw head output t and the range-mapped score s. The STOI branch maps
// through a sigmoid, the PESQ branch through 1 + sigmoid * 3.64, and the
// SI-SDR branch passes t through unchanged.
struct BranchOutput {
  Tensor t;
  Tensor s;
};

// The metric estimator: strided conv encoder, chunked DPRNN trunk, one
// transformer/auto-pool branch per metric, and a reconstruction decoder used
// as a secondary training task.
class SquimNet {
 public:
  static SquimNet init(const ModelConfig& cfg, std::uint64_t seed);

  const ModelConfig& config() const { return cfg_; }
  nn::ParamStore& params() { return params_; }
  const nn::ParamStore& params() const { return params_; }

  // [1 x T] -> [N x L], L = floor((T - P) / (P/2)) + 1.
  Tensor encoder_forward(const Tensor& x) const;
  // [N x S x R] -> [N x S x R]: intra-chunk then inter-chunk BLSTM
  // sub-blocks, each with projection, layer norm and a residual bypass.
  Tensor dprnn_block_forward(const Tensor& u, int block_index) const;
  // [1 x T] -> Z [N x L].
  Tensor trunk_forward(const Tensor& x) const;
  BranchOutput branch_forward(const Tensor& z, MetricBranch branch) const;
  // [N x L] -> reconstructed signal of length out_len.
  Tensor decoder_forward(const Tensor& z, int out_len) const;

  struct Forward {
    BranchOutput stoi;
    BranchOutput pesq;
    BranchOutput si_sdr;
    Tensor recon;  // defined only when requested
    MetricTriple triple() const;
  };
  Forward forward(const std::vector<double>& samples, bool with_mtl) const;
  Forward forward(const Waveform& y, bool with_mtl) const;

 private:
  explicit SquimNet(ModelConfig cfg) : cfg_(cfg) {}
  nn::BlstmParams blstm_params(const std::string& prefix) const;
  nn::AttentionParams attention_params(const std::string& prefix) const;

  ModelConfig cfg_;
  nn::ParamStore params_;
};

const char* branch_name(MetricBranch b);

}  // namespace squim
