#include "squim/model.hpp"

#include <cmath>
#include <string>

#include "squim/errors.hpp"
#include "squim/rng.hpp"

namespace squim {

namespace {

std::vector<double> uniform_init(Rng& rng, std::int64_t n, double bound) {
  std::vector<double> v(static_cast<std::size_t>(n));
  for (double& x : v) x = rng.uniform(-bound, bound);
  return v;
}

std::vector<double> fan_in_init(Rng& rng, std::int64_t n, int fan_in) {
  return uniform_init(rng, n, std::sqrt(1.0 / fan_in));
}

}  // namespace

void ModelConfig::validate() const {
  if (N < 1 || P < 2 || R < 2 || h < 1 || d < 1 || d1 < 1) {
    throw ValueError("model config: all dimensions must be positive (P >= 2, R >= 2)");
  }
  if (P % 2 != 0) {
    throw ValueError("model config: P must be even so the encoder hop is P/2");
  }
  if (num_dprnn_blocks < 1) {
    throw ValueError("model config: need at least one DPRNN block");
  }
  if (N != d) {
    throw ValueError(
        "model config: transformer width d must equal trunk width N (the "
        "attention residual adds [L x N] to [L x d])");
  }
  if (hidden() < 1) {
    throw ValueError("model config: BLSTM hidden size must be >= 1");
  }
}

ModelConfig tiny_config() {
  ModelConfig cfg;
  cfg.N = 8;
  cfg.P = 4;
  cfg.R = 4;
  cfg.h = 2;
  cfg.d = 8;
  cfg.d1 = 16;
  cfg.num_dprnn_blocks = 2;
  cfg.blstm_hidden = 4;
  return cfg;
}

ModelConfig small_config() {
  ModelConfig cfg;
  cfg.N = 16;
  cfg.P = 256;
  cfg.R = 16;
  cfg.h = 2;
  cfg.d = 16;
  cfg.d1 = 32;
  cfg.num_dprnn_blocks = 2;
  cfg.blstm_hidden = 8;
  return cfg;
}

const char* branch_name(MetricBranch b) {
  switch (b) {
    case MetricBranch::kStoi:
      return "stoi";
    case MetricBranch::kPesq:
      return "pesq";
    case MetricBranch::kSiSdr:
      return "sisdr";
  }
  return "?";
}

SquimNet SquimNet::init(const ModelConfig& cfg_in, std::uint64_t seed) {
  ModelConfig cfg = cfg_in;
  cfg.blstm_hidden = cfg_in.hidden();  // store resolved for serialization
  cfg.validate();
  SquimNet net(cfg);
  Rng rng(seed);
  auto& ps = net.params_;
  const int n = cfg.N;
  const int hid = cfg.hidden();

  ps.create("encoder.kernel", {n, 1, cfg.P},
            fan_in_init(rng, static_cast<std::int64_t>(n) * cfg.P, cfg.P));

  auto make_blstm = [&](const std::string& prefix, int features) {
    for (const char* dir : {"fw", "bw"}) {
      std::vector<double> bias(static_cast<std::size_t>(4 * hid), 0.0);
      // forget-gate bias at 1.0 keeps early memory cells open
      for (int i = hid; i < 2 * hid; ++i) bias[static_cast<std::size_t>(i)] = 1.0;
      ps.create(prefix + "." + dir + ".w_ih", {features, 4 * hid},
                fan_in_init(rng, static_cast<std::int64_t>(features) * 4 * hid, features));
      ps.create(prefix + "." + dir + ".w_hh", {hid, 4 * hid},
                fan_in_init(rng, static_cast<std::int64_t>(hid) * 4 * hid, hid));
      ps.create(prefix + "." + dir + ".bias", {4 * hid}, std::move(bias));
    }
  };
  auto make_linear = [&](const std::string& prefix, int in, int out) {
    ps.create(prefix + ".w", {in, out},
              fan_in_init(rng, static_cast<std::int64_t>(in) * out, in));
    ps.create(prefix + ".b", {out}, std::vector<double>(static_cast<std::size_t>(out), 0.0));
  };
  auto make_layer_norm = [&](const std::string& prefix, int width) {
    ps.create(prefix + ".gain", {width},
              std::vector<double>(static_cast<std::size_t>(width), 1.0));
    ps.create(prefix + ".bias", {width},
              std::vector<double>(static_cast<std::size_t>(width), 0.0));
  };

  for (int b = 0; b < cfg.num_dprnn_blocks; ++b) {
    for (const char* sub : {"intra", "inter"}) {
      const std::string prefix =
          "trunk.block" + std::to_string(b) + "." + sub;
      make_blstm(prefix + ".blstm", n);
      make_linear(prefix + ".proj", 2 * hid, n);
      make_layer_norm(prefix + ".ln", n);
    }
  }
  make_linear("trunk.out_proj", n, n);
  ps.create("trunk.out_prelu.a", {1}, {0.25});

  for (MetricBranch b : {MetricBranch::kStoi, MetricBranch::kPesq, MetricBranch::kSiSdr}) {
    const std::string prefix = std::string("branch.") + branch_name(b);
    for (int head = 0; head < cfg.h; ++head) {
      const std::string hp = prefix + ".attn.head" + std::to_string(head);
      for (const char* w : {"w_q", "w_k", "w_v"}) {
        ps.create(hp + "." + w, {n, cfg.d},
                  fan_in_init(rng, static_cast<std::int64_t>(n) * cfg.d, n));
      }
    }
    ps.create(prefix + ".attn.w_o", {cfg.h * cfg.d, cfg.d},
              fan_in_init(rng, static_cast<std::int64_t>(cfg.h) * cfg.d * cfg.d,
                          cfg.h * cfg.d));
    make_layer_norm(prefix + ".ln1", cfg.d);
    make_linear(prefix + ".ff1", cfg.d, cfg.d1);
    make_linear(prefix + ".ff2", cfg.d1, cfg.d);
    make_layer_norm(prefix + ".ln2", cfg.d);
    ps.create(prefix + ".pool.alpha", {1}, {0.0});
    make_linear(prefix + ".head1", cfg.d, cfg.d);
    ps.create(prefix + ".head_prelu.a", {1}, {0.25});
    make_linear(prefix + ".head2", cfg.d, 1);
  }

  make_linear("decoder", n, cfg.P);
  return net;
}

nn::BlstmParams SquimNet::blstm_params(const std::string& prefix) const {
  nn::BlstmParams p;
  p.fw = {params_.at(prefix + ".fw.w_ih"), params_.at(prefix + ".fw.w_hh"),
          params_.at(prefix + ".fw.bias")};
  p.bw = {params_.at(prefix + ".bw.w_ih"), params_.at(prefix + ".bw.w_hh"),
          params_.at(prefix + ".bw.bias")};
  return p;
}

nn::AttentionParams SquimNet::attention_params(const std::string& prefix) const {
  nn::AttentionParams p;
  p.heads.reserve(static_cast<std::size_t>(cfg_.h));
  for (int head = 0; head < cfg_.h; ++head) {
    const std::string hp = prefix + ".head" + std::to_string(head);
    p.heads.push_back({params_.at(hp + ".w_q"), params_.at(hp + ".w_k"),
                       params_.at(hp + ".w_v")});
  }
  p.w_o = params_.at(prefix + ".w_o");
  return p;
}

Tensor SquimNet::encoder_forward(const Tensor& x) const {
  if (x.rank() != 2 || x.shape()[0] != 1) {
    throw ShapeError("encoder: expected [1 x T] input, got " + ad::shape_str(x.shape()));
  }
  if (x.shape()[1] < cfg_.P) {
    throw ShapeError("encoder: input shorter than one frame (" +
                     std::to_string(x.shape()[1]) + " < " + std::to_string(cfg_.P) + ")");
  }
  return ad::relu(ad::conv1d(x, params_.at("encoder.kernel"), cfg_.encoder_hop()));
}

Tensor SquimNet::dprnn_block_forward(const Tensor& u, int block_index) const {
  if (u.rank() != 3 || u.shape()[0] != cfg_.N) {
    throw ShapeError("dprnn block: expected [N x S x R] input, got " +
                     ad::shape_str(u.shape()));
  }
  const std::string prefix = "trunk.block" + std::to_string(block_index);
  const int hid = cfg_.hidden();

  // intra-chunk pass: sequences run along R, chunks act as the batch
  Tensor v = ad::permute(u, {1, 2, 0});  // [S x R x N]
  {
    Tensor hseq = nn::blstm(v, blstm_params(prefix + ".intra.blstm"), hid);
    Tensor proj = nn::linear(hseq, params_.at(prefix + ".intra.proj.w"),
                             params_.at(prefix + ".intra.proj.b"));
    Tensor normed = ad::layer_norm(proj, params_.at(prefix + ".intra.ln.gain"),
                                   params_.at(prefix + ".intra.ln.bias"));
    v = ad::add(v, normed);
  }
  // inter-chunk pass: sequences run along S
  Tensor w = ad::permute(v, {1, 0, 2});  // [R x S x N]
  {
    Tensor hseq = nn::blstm(w, blstm_params(prefix + ".inter.blstm"), hid);
    Tensor proj = nn::linear(hseq, params_.at(prefix + ".inter.proj.w"),
                             params_.at(prefix + ".inter.proj.b"));
    Tensor normed = ad::layer_norm(proj, params_.at(prefix + ".inter.ln.gain"),
                                   params_.at(prefix + ".inter.ln.bias"));
    w = ad::add(w, normed);
  }
  return ad::permute(w, {2, 1, 0});  // back to [N x S x R]
}

Tensor SquimNet::trunk_forward(const Tensor& x) const {
  Tensor f = encoder_forward(x);
  const int frames = f.shape()[1];
  Tensor u = ad::chunk(f, cfg_.R, cfg_.chunk_hop());
  for (int b = 0; b < cfg_.num_dprnn_blocks; ++b) {
    u = dprnn_block_forward(u, b);
  }
  Tensor v = ad::permute(u, {1, 2, 0});  // [S x R x N]
  v = nn::linear(v, params_.at("trunk.out_proj.w"), params_.at("trunk.out_proj.b"));
  v = ad::prelu(v, params_.at("trunk.out_prelu.a"));
  Tensor back = ad::permute(v, {2, 0, 1});  // [N x S x R]
  return ad::overlap_add_chunks(back, cfg_.chunk_hop(), frames);
}

BranchOutput SquimNet::branch_forward(const Tensor& z, MetricBranch branch) const {
  const std::string prefix = std::string("branch.") + branch_name(branch);
  Tensor zt = ad::transpose(z);  // [L x N]
  Tensor attended = nn::multi_head_attention(zt, attention_params(prefix + ".attn"));
  Tensor x1 = ad::layer_norm(ad::add(zt, attended), params_.at(prefix + ".ln1.gain"),
                             params_.at(prefix + ".ln1.bias"));
  Tensor ff = nn::linear(
      ad::relu(nn::linear(x1, params_.at(prefix + ".ff1.w"), params_.at(prefix + ".ff1.b"))),
      params_.at(prefix + ".ff2.w"), params_.at(prefix + ".ff2.b"));
  Tensor x2 = ad::layer_norm(ad::add(x1, ff), params_.at(prefix + ".ln2.gain"),
                             params_.at(prefix + ".ln2.bias"));

  Tensor pooled = nn::auto_pool(x2, params_.at(prefix + ".pool.alpha"));
  Tensor hid = ad::prelu(
      nn::linear(ad::reshape(pooled, {1, cfg_.d}), params_.at(prefix + ".head1.w"),
                 params_.at(prefix + ".head1.b")),
      params_.at(prefix + ".head_prelu.a"));
  Tensor t = ad::reshape(
      nn::linear(hid, params_.at(prefix + ".head2.w"), params_.at(prefix + ".head2.b")),
      {1});

  BranchOutput out;
  out.t = t;
  switch (branch) {
    case MetricBranch::kStoi:
      out.s = ad::sigmoid(t);
      break;
    case MetricBranch::kPesq:
      // 1 + sigmoid(t) * (4.64 - 1), the WB-PESQ value range
      out.s = ad::add(ad::scale(ad::sigmoid(t), 4.64 - 1.0), Tensor::scalar(1.0));
      break;
    case MetricBranch::kSiSdr:
      out.s = t;
      break;
  }
  return out;
}

Tensor SquimNet::decoder_forward(const Tensor& z, int out_len) const {
  Tensor frames = nn::linear(ad::transpose(z), params_.at("decoder.w"),
                             params_.at("decoder.b"));  // [L x P]
  return ad::overlap_add_frames(frames, cfg_.encoder_hop(), out_len);
}

MetricTriple SquimNet::Forward::triple() const {
  MetricTriple t;
  t.stoi = stoi.s.item();
  t.pesq = pesq.s.item();
  t.si_sdr = si_sdr.s.item();
  return t;
}

SquimNet::Forward SquimNet::forward(const std::vector<double>& samples,
                                    bool with_mtl) const {
  const int t_len = static_cast<int>(samples.size());
  Tensor x = Tensor::from_data({1, t_len}, samples);
  Tensor z = trunk_forward(x);
  Forward out;
  out.stoi = branch_forward(z, MetricBranch::kStoi);
  out.pesq = branch_forward(z, MetricBranch::kPesq);
  out.si_sdr = branch_forward(z, MetricBranch::kSiSdr);
  if (with_mtl) {
    out.recon = decoder_forward(z, t_len);
  }
  return out;
}

SquimNet::Forward SquimNet::forward(const Waveform& y, bool with_mtl) const {
  validate(y);
  return forward(y.samples, with_mtl);
}

}  // namespace squim
