#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <vector>

#include "squim/checkpoint.hpp"
#include "squim/errors.hpp"
#include "squim/model.hpp"
#include "squim/rng.hpp"
#include "squim/signal.hpp"

using namespace squim;
using ad::Tensor;

namespace {

std::filesystem::path temp_file(const std::string& name) {
  return std::filesystem::temp_directory_path() / ("squim_model_" + name);
}

Tensor random_input(Rng& rng, int t_len) {
  std::vector<double> v(static_cast<std::size_t>(t_len));
  for (double& x : v) x = 0.3 * rng.gauss();
  return Tensor::from_data({1, t_len}, std::move(v));
}

void zero_param(SquimNet& net, const std::string& name) {
  Tensor t = net.params().at(name);
  for (double& v : t.mutable_value()) v = 0.0;
}

}  // namespace

TEST_CASE("model config validation") {
  ModelConfig defaults;
  CHECK(defaults.N == 256);
  CHECK(defaults.P == 64);
  CHECK(defaults.R == 71);
  CHECK(defaults.h == 4);
  CHECK(defaults.d == 256);
  CHECK(defaults.d1 == 1024);
  CHECK(defaults.num_dprnn_blocks == 4);
  CHECK(defaults.hidden() == 128);
  defaults.validate();

  ModelConfig odd = tiny_config();
  odd.P = 5;
  CHECK_THROWS_AS(odd.validate(), ValueError);
  ModelConfig mismatch = tiny_config();
  mismatch.d = 16;
  CHECK_THROWS_AS(mismatch.validate(), ValueError);
  ModelConfig no_blocks = tiny_config();
  no_blocks.num_dprnn_blocks = 0;
  CHECK_THROWS_AS(no_blocks.validate(), ValueError);
}

TEST_CASE("encoder frame arithmetic") {
  const SquimNet net = SquimNet::init(tiny_config(), 1);
  Rng rng(2);
  // L = floor((T - P) / (P/2)) + 1 with P = 4
  CHECK(net.encoder_forward(random_input(rng, 100)).shape() == ad::Shape{8, 49});
  CHECK(net.encoder_forward(random_input(rng, 4)).shape() == ad::Shape{8, 1});
  CHECK_THROWS_AS(net.encoder_forward(random_input(rng, 3)), ShapeError);

  const auto out = net.encoder_forward(random_input(rng, 64)).value();
  for (double v : out) CHECK(v >= 0.0);  // post-ReLU
}

TEST_CASE("default-config encoder yields 2499 frames for 5 s of audio") {
  // encoder only; the full trunk at this size belongs to the acceptance suite
  SquimNet net = SquimNet::init(ModelConfig{}, 3);
  Rng rng(4);
  ad::NoGradGuard guard;
  CHECK(net.encoder_forward(random_input(rng, 80000)).shape() == ad::Shape{256, 2499});
}

TEST_CASE("dprnn block keeps shapes and passes zeros through zeroed projections") {
  SquimNet net = SquimNet::init(tiny_config(), 5);
  Rng rng(6);

  SUBCASE("shape preservation on random chunk tensors") {
    std::vector<double> data(8 * 3 * 5);
    for (double& v : data) v = rng.gauss();
    Tensor u = Tensor::from_data({8, 3, 5}, std::move(data));
    CHECK(net.dprnn_block_forward(u, 0).shape() == ad::Shape{8, 3, 5});
    CHECK(net.dprnn_block_forward(u, 1).shape() == ad::Shape{8, 3, 5});
  }
  SUBCASE("residual path: zero input and zeroed projections give zero output") {
    for (const char* sub : {"intra", "inter"}) {
      zero_param(net, std::string("trunk.block0.") + sub + ".proj.w");
      zero_param(net, std::string("trunk.block0.") + sub + ".proj.b");
    }
    Tensor u = Tensor::zeros({8, 2, 4});
    const auto out = net.dprnn_block_forward(u, 0).value();
    for (double v : out) CHECK(v == 0.0);
  }
  SUBCASE("gradients through one block at N=4, S=3, R=3") {
    ModelConfig cfg;
    cfg.N = 4;
    cfg.P = 2;
    cfg.R = 3;
    cfg.h = 1;
    cfg.d = 4;
    cfg.d1 = 8;
    cfg.num_dprnn_blocks = 1;
    cfg.blstm_hidden = 2;
    SquimNet small = SquimNet::init(cfg, 7);
    std::vector<double> data(4 * 3 * 3);
    for (double& v : data) v = rng.gauss();
    Tensor u = Tensor::from_data({4, 3, 3}, std::move(data), true);
    std::vector<Tensor> leaves{u};
    for (const auto& name : small.params().names()) {
      if (name.rfind("trunk.block0", 0) == 0) leaves.push_back(small.params().at(name));
    }
    const double err = nn::grad_check(
        [&] { return ad::mean_all(ad::abs_t(small.dprnn_block_forward(u, 0))); },
        leaves);
    CHECK(err < 1e-4);
  }
}

TEST_CASE("trunk preserves the frame count and is seed-deterministic") {
  const SquimNet net = SquimNet::init(tiny_config(), 8);
  Rng rng(9);
  Tensor x = random_input(rng, 400);
  const Tensor z = net.trunk_forward(x);
  // L = (400 - 4) / 2 + 1; chunk padding must be trimmed again
  CHECK(z.shape() == ad::Shape{8, 199});

  const SquimNet net2 = SquimNet::init(tiny_config(), 8);
  const Tensor z2 = net2.trunk_forward(x);
  CHECK(z.value() == z2.value());
}

TEST_CASE("branch outputs respect their range mappings") {
  SquimNet net = SquimNet::init(tiny_config(), 10);
  Rng rng(11);
  Tensor z = net.trunk_forward(random_input(rng, 200));

  SUBCASE("pesq branch with t = 0 maps to 2.82") {
    zero_param(net, "branch.pesq.head2.w");
    zero_param(net, "branch.pesq.head2.b");
    const BranchOutput out = net.branch_forward(z, MetricBranch::kPesq);
    CHECK(out.t.item() == 0.0);
    CHECK(out.s.item() == doctest::Approx(1.0 + 0.5 * 3.64).epsilon(1e-12));
  }
  SUBCASE("stoi stays in (0,1), pesq in (1,4.64), si_sdr is the raw scalar") {
    for (int seed = 0; seed < 20; ++seed) {
      const SquimNet draw = SquimNet::init(tiny_config(), 100 + seed);
      Tensor zz = draw.trunk_forward(random_input(rng, 150));
      const BranchOutput st = draw.branch_forward(zz, MetricBranch::kStoi);
      CHECK(st.s.item() > 0.0);
      CHECK(st.s.item() < 1.0);
      const BranchOutput pq = draw.branch_forward(zz, MetricBranch::kPesq);
      CHECK(pq.s.item() > 1.0);
      CHECK(pq.s.item() < 4.64);
      const BranchOutput sd = draw.branch_forward(zz, MetricBranch::kSiSdr);
      CHECK(sd.s.item() == sd.t.item());
    }
  }
}

TEST_CASE("decoder reconstructs a signal of the input length") {
  SquimNet net = SquimNet::init(tiny_config(), 12);
  Rng rng(13);
  const int t_len = 230;
  Tensor x = random_input(rng, t_len);
  Tensor z = net.trunk_forward(x);
  CHECK(net.decoder_forward(z, t_len).shape() == ad::Shape{t_len});

  SUBCASE("zero decoder weights give a zero reconstruction") {
    zero_param(net, "decoder.w");
    zero_param(net, "decoder.b");
    const Tensor recon = net.decoder_forward(z, t_len);
    for (double v : recon.value()) CHECK(v == 0.0);
  }
  SUBCASE("reconstruction loss reaches the encoder parameters") {
    net.params().zero_grad();
    auto fwd = net.forward(std::vector<double>(t_len, 0.05), true);
    Tensor target = Tensor::from_data({t_len}, std::vector<double>(t_len, 0.01));
    ad::backward(ad::mean_all(ad::abs_t(ad::sub(fwd.recon, target))));
    double norm = 0.0;
    for (double g : net.params().at("encoder.kernel").grad()) norm += g * g;
    CHECK(norm > 0.0);
  }
}

TEST_CASE("full forward produces finite scores in range") {
  const SquimNet net = SquimNet::init(tiny_config(), 14);
  const Waveform y = synth_signal(SignalKind::kSpeechLikeAmNoise, 0.02, 16000, 15);
  const auto fwd = net.forward(y, true);
  const MetricTriple t = fwd.triple();
  CHECK(std::isfinite(t.stoi));
  CHECK(std::isfinite(*t.pesq));
  CHECK(std::isfinite(t.si_sdr));
  CHECK(fwd.recon.shape() == ad::Shape{static_cast<int>(y.samples.size())});

  const auto no_mtl = net.forward(y, false);
  CHECK_FALSE(no_mtl.recon.defined());
  // branches read the same trunk output either way
  CHECK(no_mtl.stoi.s.item() == fwd.stoi.s.item());
}

TEST_CASE("full-model gradients on a parameter cross-section") {
  SquimNet net = SquimNet::init(tiny_config(), 16);
  const std::vector<double> samples = [] {
    Rng rng(17);
    std::vector<double> v(48);
    for (double& x : v) x = 0.3 * rng.gauss();
    return v;
  }();
  const std::vector<Tensor> leaves{
      net.params().at("encoder.kernel"),
      net.params().at("trunk.block0.intra.blstm.fw.w_hh"),
      net.params().at("trunk.block1.inter.proj.b"),
      net.params().at("trunk.out_prelu.a"),
      net.params().at("branch.stoi.pool.alpha"),
      net.params().at("branch.pesq.attn.head0.w_q"),
      net.params().at("branch.sisdr.ff1.b"),
      net.params().at("decoder.w"),
  };
  const double err = nn::grad_check(
      [&] {
        auto fwd = net.forward(samples, true);
        Tensor score_sum = ad::add(
            ad::add(fwd.stoi.s, ad::scale(fwd.pesq.s, 0.31)),
            ad::scale(fwd.si_sdr.s, 0.17));
        return ad::add(score_sum, ad::mean_all(ad::abs_t(fwd.recon)));
      },
      leaves);
  CHECK(err < 1e-3);
}

TEST_CASE("parameter initialization is deterministic with a stable count") {
  const SquimNet a = SquimNet::init(tiny_config(), 42);
  const SquimNet b = SquimNet::init(tiny_config(), 42);
  const SquimNet c = SquimNet::init(tiny_config(), 43);
  bool identical = true;
  bool any_diff = false;
  for (const auto& name : a.params().names()) {
    identical = identical && a.params().at(name).value() == b.params().at(name).value();
    any_diff = any_diff || a.params().at(name).value() != c.params().at(name).value();
  }
  CHECK(identical);
  CHECK(any_diff);

  // frozen golden counts; a change here is an architecture change
  CHECK(a.params().total_parameters() == 4878);
  const SquimNet full = SquimNet::init(ModelConfig{}, 0);
  CHECK(full.params().total_parameters() == 8706634);

  // init bounds: uniform in +/- sqrt(1 / fan_in)
  const auto& kernel = a.params().at("encoder.kernel").value();
  const double bound = std::sqrt(1.0 / 4.0);
  for (double v : kernel) {
    CHECK(std::abs(v) <= bound);
    CHECK(std::isfinite(v));
  }
}

TEST_CASE("checkpoint round-trip restores float32-quantized parameters") {
  const SquimNet net = SquimNet::init(tiny_config(), 77);
  const auto path = temp_file("roundtrip.sqmc");
  save_checkpoint(path, net);
  const SquimNet back = load_checkpoint(path);
  CHECK(back.config() == net.config());
  for (const auto& name : net.params().names()) {
    const auto& orig = net.params().at(name).value();
    const auto& loaded = back.params().at(name).value();
    REQUIRE(orig.size() == loaded.size());
    for (std::size_t i = 0; i < orig.size(); ++i) {
      CHECK(loaded[i] == static_cast<double>(static_cast<float>(orig[i])));
    }
  }

  SUBCASE("corrupt magic is rejected") {
    const auto bad = temp_file("bad.sqmc");
    std::ofstream(bad) << "not a checkpoint";
    CHECK_THROWS_AS(load_checkpoint(bad), IoError);
  }
}

TEST_CASE("training state round-trip is bit-exact") {
  SquimNet net = SquimNet::init(tiny_config(), 78);
  // produce nonzero moments
  net.params().zero_grad();
  auto fwd = net.forward(std::vector<double>(40, 0.1), false);
  ad::backward(fwd.stoi.s);
  net.params().adam_step(1e-3);

  const auto path = temp_file("state.sqts");
  save_train_state(path, net, 3);
  std::int64_t next_epoch = -1;
  const SquimNet back = load_train_state(path, &next_epoch);
  CHECK(next_epoch == 3);
  CHECK(back.params().step_count() == net.params().step_count());
  for (const auto& name : net.params().names()) {
    CHECK(back.params().at(name).value() == net.params().at(name).value());
    CHECK(back.params().moments().at(name).m == net.params().moments().at(name).m);
    CHECK(back.params().moments().at(name).v == net.params().moments().at(name).v);
  }
}
