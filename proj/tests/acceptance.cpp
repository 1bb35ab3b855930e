// Acceptance suite: one pass/fail line per criterion, exit code = number of
// failed criteria. Run all criteria, or a subset via --criterion N.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "squim/autodiff.hpp"
#include "squim/checkpoint.hpp"
#include "squim/dataset.hpp"
#include "squim/errors.hpp"
#include "squim/metrics.hpp"
#include "squim/model.hpp"
#include "squim/nn.hpp"
#include "squim/rng.hpp"
#include "squim/signal.hpp"
#include "squim/train.hpp"
#include "squim/wav.hpp"

namespace fs = std::filesystem;
using namespace squim;
using ad::Tensor;

namespace {

struct Failure : std::runtime_error {
  using std::runtime_error::runtime_error;
};

void expect(bool cond, const std::string& msg) {
  if (!cond) throw Failure(msg);
}

std::string fmt(const char* spec, double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), spec, v);
  return buf;
}

double now_seconds() {
  return std::chrono::duration<double>(
             std::chrono::steady_clock::now().time_since_epoch())
      .count();
}

fs::path work_dir() {
  static const fs::path dir = [] {
    const fs::path d = fs::temp_directory_path() / "squim_acceptance";
    fs::remove_all(d);
    fs::create_directories(d);
    return d;
  }();
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Tensor random_leaf(Rng& rng, ad::Shape shape, double scale = 1.0) {
  std::vector<double> data(static_cast<std::size_t>(ad::numel(shape)));
  for (double& v : data) v = scale * rng.gauss();
  return Tensor::from_data(std::move(shape), std::move(data), true);
}

Tensor fixed_coeffs(Rng& rng, const ad::Shape& shape) {
  std::vector<double> c(static_cast<std::size_t>(ad::numel(shape)));
  for (double& v : c) v = 0.5 + rng.uniform();
  return Tensor::from_data(shape, std::move(c));
}

template <typename Op>
double scalarized_grad_check(Rng& rng, Op op, const std::vector<Tensor>& leaves) {
  const Tensor w = fixed_coeffs(rng, op().shape());
  return nn::grad_check([op, w] { return ad::sum_all(ad::mul(op(), w)); }, leaves);
}

// ---------------------------------------------------------------------------
// shared overfit run (criteria 7 and 9)

struct OverfitRun {
  fs::path checkpoint;
  fs::path log;
  TrainResult result;
  double stoi_mae = 0.0;    // frozen-parameter MAE over the training set
  double sisdr_mae = 0.0;
  double seconds = 0.0;
};

OverfitRun run_overfit(const std::string& tag) {
  const fs::path dir = work_dir() / tag;
  fs::create_directories(dir);
  const double t0 = now_seconds();

  auto dataset = synth_dataset(16, 1.0, -15.0, 25.0, 7);
  SquimNet net = SquimNet::init(small_config(), 3);
  TrainHyper hyper;
  hyper.lr = 2e-3;
  hyper.batch = 4;
  hyper.epochs = 500;  // upper bound; the stop condition ends far earlier
  hyper.clip = 5.0;
  hyper.seed = 3;
  hyper.loss_kind = LossKind::kMae;
  const LossWeights weights{1.0, 2.0, 0.5, 2.0};  // PESQ masked: no labels
  const StopCondition stop{0.02, 1.0};

  OverfitRun run;
  run.checkpoint = dir / "model.sqmc";
  run.log = dir / "train.jsonl";
  std::ofstream log(run.log);
  run.result = train(net, dataset, weights, hyper, &log, &stop);
  log.close();
  save_checkpoint(run.checkpoint, net);

  const EvalResult ev = evaluate_model(net, dataset);
  run.stoi_mae = ev.report.stoi.mae / 100.0;  // back to fractions
  run.sisdr_mae = ev.report.si_sdr.mae;
  run.seconds = now_seconds() - t0;
  return run;
}

const OverfitRun& cached_overfit() {
  static const OverfitRun run = run_overfit("overfit_a");
  return run;
}

// ---------------------------------------------------------------------------
// criteria

std::string criterion_1() {
  return "production-scale accuracy tables need corpus-scale training data "
         "and enhancement systems not available at desk scale; criteria 2-10 "
         "verify the implementation by construction instead";
}

std::string criterion_2() {
  const double t0 = now_seconds();
  Rng rng(101);
  double worst_primitive = 0.0;
  auto track = [&](double err) {
    worst_primitive = std::max(worst_primitive, err);
    expect(err < 1e-4, "primitive gradient check failed: rel err " + fmt("%.3g", err));
  };

  {  // conv1d
    Tensor x = random_leaf(rng, {1, 24});
    Tensor k = random_leaf(rng, {3, 1, 5});
    track(scalarized_grad_check(rng, [&] { return ad::conv1d(x, k, 2); }, {x, k}));
  }
  {  // blstm
    nn::BlstmParams p;
    for (nn::LstmDirParams* dir : {&p.fw, &p.bw}) {
      dir->w_ih = random_leaf(rng, {4, 12}, 0.4);
      dir->w_hh = random_leaf(rng, {3, 12}, 0.4);
      dir->bias = random_leaf(rng, {12}, 0.4);
    }
    Tensor x = random_leaf(rng, {5, 4});
    track(scalarized_grad_check(
        rng, [&] { return nn::blstm(x, p, 3); },
        {x, p.fw.w_ih, p.fw.w_hh, p.fw.bias, p.bw.w_ih, p.bw.w_hh, p.bw.bias}));
  }
  {  // layer_norm
    Tensor x = random_leaf(rng, {3, 6});
    Tensor gain = random_leaf(rng, {6}, 0.5);
    Tensor bias = random_leaf(rng, {6}, 0.5);
    track(scalarized_grad_check(
        rng, [&] { return ad::layer_norm(x, gain, bias); }, {x, gain, bias}));
  }
  {  // attention at L=3, N=4, h=2, d=4
    nn::AttentionParams p;
    for (int i = 0; i < 2; ++i) {
      p.heads.push_back({random_leaf(rng, {4, 4}, 0.5), random_leaf(rng, {4, 4}, 0.5),
                         random_leaf(rng, {4, 4}, 0.5)});
    }
    p.w_o = random_leaf(rng, {8, 4}, 0.5);
    Tensor z = random_leaf(rng, {3, 4});
    std::vector<Tensor> leaves{z, p.w_o};
    for (auto& head : p.heads) {
      leaves.push_back(head.w_q);
      leaves.push_back(head.w_k);
      leaves.push_back(head.w_v);
    }
    track(scalarized_grad_check(
        rng, [&] { return nn::multi_head_attention(z, p); }, leaves));
  }
  {  // auto_pool
    Tensor x = random_leaf(rng, {6, 3});
    Tensor alpha = Tensor::from_data({1}, {0.4}, true);
    track(scalarized_grad_check(rng, [&] { return nn::auto_pool(x, alpha); },
                                {x, alpha}));
  }
  {  // chunk / overlap_add, both geometries
    Tensor f = random_leaf(rng, {2, 9});
    track(scalarized_grad_check(
        rng, [&] { return ad::overlap_add_chunks(ad::chunk(f, 4, 2), 2, 9); }, {f}));
    Tensor frames = random_leaf(rng, {4, 6});
    track(scalarized_grad_check(
        rng, [&] { return ad::overlap_add_frames(frames, 3, 15); }, {frames}));
  }
  {  // prelu
    Tensor x = random_leaf(rng, {4, 5});
    Tensor slope = Tensor::from_data({1}, {0.3}, true);
    track(scalarized_grad_check(rng, [&] { return ad::prelu(x, slope); }, {x, slope}));
  }

  // full tiny-config model over every parameter
  SquimNet net = SquimNet::init(tiny_config(), 11);
  std::vector<double> samples(48);
  for (double& v : samples) v = 0.3 * rng.gauss();
  std::vector<Tensor> leaves;
  for (const auto& name : net.params().names()) leaves.push_back(net.params().at(name));
  const double model_err = nn::grad_check(
      [&] {
        auto fwd = net.forward(samples, true);
        Tensor score_sum = ad::add(ad::add(fwd.stoi.s, ad::scale(fwd.pesq.s, 0.31)),
                                   ad::scale(fwd.si_sdr.s, 0.17));
        return ad::add(score_sum, ad::mean_all(ad::abs_t(fwd.recon)));
      },
      leaves);
  expect(model_err < 1e-3, "full-model gradient check failed: rel err " +
                               fmt("%.3g", model_err));

  const double elapsed = now_seconds() - t0;
  expect(elapsed < 60.0, "gradient suite took " + fmt("%.1f", elapsed) + " s");
  return "worst primitive rel err " + fmt("%.2e", worst_primitive) +
         ", full model (" + std::to_string(leaves.size()) + " tensors) " +
         fmt("%.2e", model_err) + ", " + fmt("%.1f", elapsed) + " s";
}

std::string criterion_3() {
  const double hand =
      si_sdr(Waveform{{1, 1, 0, 0}, 16000}, Waveform{{1, 0, 0, 0}, 16000});
  expect(std::abs(hand) < 1e-12, "hand case returned " + fmt("%.3g", hand));

  Rng rng(31);
  double worst = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    Waveform ref = synth_signal(SignalKind::kSpeechLikeAmNoise, 0.125, 16000,
                                3000 + static_cast<std::uint64_t>(trial));
    Waveform noise = synth_signal(SignalKind::kPinkNoise, 0.125, 16000,
                                  4000 + static_cast<std::uint64_t>(trial));
    for (double& v : ref.samples) v *= 3.0;
    for (double& v : noise.samples) v *= 3.0;
    const Waveform est = mix_at_snr(ref, noise, rng.uniform(-10.0, 20.0));
    const double base = si_sdr(est, ref);
    for (double c : {0.1, 10.0}) {
      Waveform ref_scaled = ref;
      Waveform est_scaled = est;
      for (double& x : ref_scaled.samples) x *= c;
      for (double& x : est_scaled.samples) x *= c;
      worst = std::max(worst, std::abs(si_sdr(est, ref_scaled) - base));
      worst = std::max(worst, std::abs(si_sdr(est_scaled, ref) - base));
    }
  }
  expect(worst < 1e-9, "scale-invariance deviation " + fmt("%.3g", worst));
  return "hand case exact, worst scale deviation " + fmt("%.2e", worst) +
         " dB over 100 trials";
}

std::string criterion_4() {
  for (int seed = 0; seed < 3; ++seed) {
    const Waveform s = synth_signal(SignalKind::kSpeechLikeAmNoise, 1.0, 16000,
                                    500 + static_cast<std::uint64_t>(seed));
    const double self_score = stoi(s, s);
    expect(self_score >= 0.99,
           "identity pair scored " + fmt("%.4f", self_score));
  }

  const std::vector<double> snrs{-10.0, 0.0, 10.0, 20.0};
  std::vector<double> means(snrs.size(), 0.0);
  for (int pair = 0; pair < 20; ++pair) {
    const Waveform clean = synth_signal(SignalKind::kSpeechLikeAmNoise, 1.0, 16000,
                                        600 + static_cast<std::uint64_t>(pair));
    const Waveform noise =
        synth_signal(pair % 2 ? SignalKind::kWhiteNoise : SignalKind::kPinkNoise,
                     1.0, 16000, 700 + static_cast<std::uint64_t>(pair));
    for (std::size_t i = 0; i < snrs.size(); ++i) {
      means[i] += stoi(mix_at_snr(clean, noise, snrs[i]), clean);
    }
  }
  std::string detail = "mean STOI:";
  for (std::size_t i = 0; i < means.size(); ++i) {
    means[i] /= 20.0;
    detail += " " + fmt("%.3f", means[i]);
    if (i > 0) {
      expect(means[i] > means[i - 1],
             "mean STOI not increasing between SNR steps " + fmt("%.0f", snrs[i - 1]) +
                 " and " + fmt("%.0f", snrs[i]));
    }
  }
  return detail + " across SNR -10/0/10/20 dB";
}

std::string criterion_5() {
  Rng rng(51);
  double worst = 0.0;
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t n = 8 + rng.below(60);
    std::vector<double> a(n), b(n);
    for (double& v : a) v = rng.gauss();
    for (double& v : b) v = rng.gauss();
    if (trial % 3 == 0) {
      // quantize to force ties
      for (double& v : a) v = std::round(v * 2.0) / 2.0;
      for (double& v : b) v = std::round(v * 2.0) / 2.0;
    }

    double m = 0.0;
    for (std::size_t i = 0; i < n; ++i) m += std::abs(a[i] - b[i]);
    m /= static_cast<double>(n);
    worst = std::max(worst, std::abs(mae(a, b) - m));

    auto brute_pcc = [](const std::vector<double>& x, const std::vector<double>& y) {
      double mx = 0.0, my = 0.0;
      for (std::size_t i = 0; i < x.size(); ++i) {
        mx += x[i];
        my += y[i];
      }
      mx /= static_cast<double>(x.size());
      my /= static_cast<double>(x.size());
      double cov = 0.0, vx = 0.0, vy = 0.0;
      for (std::size_t i = 0; i < x.size(); ++i) {
        cov += (x[i] - mx) * (y[i] - my);
        vx += (x[i] - mx) * (x[i] - mx);
        vy += (y[i] - my) * (y[i] - my);
      }
      return cov / std::sqrt(vx * vy);
    };
    auto brute_ranks = [](const std::vector<double>& x) {
      std::vector<double> r(x.size());
      for (std::size_t i = 0; i < x.size(); ++i) {
        std::size_t less = 0, equal = 0;
        for (std::size_t j = 0; j < x.size(); ++j) {
          less += x[j] < x[i];
          equal += x[j] == x[i];
        }
        r[i] = 1.0 + static_cast<double>(less) + (static_cast<double>(equal) - 1.0) / 2.0;
      }
      return r;
    };
    // degenerate constant draws cannot happen with gaussian samples
    worst = std::max(worst, std::abs(pcc(a, b) - brute_pcc(a, b)));
    worst = std::max(worst, std::abs(srcc(a, b) - brute_pcc(brute_ranks(a), brute_ranks(b))));
  }
  expect(worst < 1e-12, "statistics deviate from brute force by " + fmt("%.3g", worst));
  return "mae/pcc/srcc within " + fmt("%.2e", worst) +
         " of brute-force recomputation over 1000 vectors (ties included)";
}

std::string criterion_6() {
  SquimNet net = SquimNet::init(ModelConfig{}, 1);
  const Waveform y = synth_signal(SignalKind::kSpeechLikeAmNoise, 5.0, 16000, 2);
  expect(y.samples.size() == 80000, "synthesis length off");
  ad::NoGradGuard guard;

  const Tensor x = Tensor::from_data({1, 80000}, y.samples);
  const Tensor frames = net.encoder_forward(x);
  expect(frames.shape() == ad::Shape{256, 2499},
         "encoder produced " + ad::shape_str(frames.shape()));
  const Tensor chunked = ad::chunk(frames, net.config().R, net.config().chunk_hop());
  expect(chunked.shape() == ad::Shape{256, 71, 71},
         "chunking produced " + ad::shape_str(chunked.shape()));

  const Tensor z = net.trunk_forward(x);
  expect(z.shape() == ad::Shape{256, 2499}, "trunk produced " + ad::shape_str(z.shape()));

  const BranchOutput stoi_out = net.branch_forward(z, MetricBranch::kStoi);
  const BranchOutput pesq_out = net.branch_forward(z, MetricBranch::kPesq);
  const BranchOutput sisdr_out = net.branch_forward(z, MetricBranch::kSiSdr);
  const Tensor recon = net.decoder_forward(z, 80000);
  expect(stoi_out.s.item() > 0.0 && stoi_out.s.item() < 1.0,
         "stoi estimate out of (0,1)");
  expect(pesq_out.s.item() > 1.0 && pesq_out.s.item() < 4.64,
         "pesq estimate out of (1,4.64)");
  expect(std::isfinite(sisdr_out.s.item()), "si_sdr estimate not finite");
  expect(recon.shape() == ad::Shape{80000},
         "reconstruction length " + ad::shape_str(recon.shape()));
  return "L=2499, S=71, Z 256x2499, estimates (" + fmt("%.3f", stoi_out.s.item()) +
         ", " + fmt("%.3f", pesq_out.s.item()) + ", " +
         fmt("%.2f", sisdr_out.s.item()) + "), reconstruction length 80000";
}

std::string criterion_7() {
  const OverfitRun& run = cached_overfit();
  expect(run.result.steps <= 2000,
         "needed " + std::to_string(run.result.steps) + " steps");
  expect(run.stoi_mae <= 0.03, "STOI training MAE " + fmt("%.4f", run.stoi_mae));
  expect(run.sisdr_mae <= 1.5, "SI-SDR training MAE " + fmt("%.3f", run.sisdr_mae));
  expect(run.seconds < 600.0, "took " + fmt("%.0f", run.seconds) + " s");
  return std::to_string(run.result.steps) + " steps, STOI MAE " +
         fmt("%.4f", run.stoi_mae) + ", SI-SDR MAE " + fmt("%.3f", run.sisdr_mae) +
         " dB, " + fmt("%.0f", run.seconds) + " s";
}

std::string criterion_8() {
  auto dataset = synth_dataset(2, 1.0, -5.0, 15.0, 9);
  dataset[0].labels.pesq = 2.5;  // give the pesq term something to fit
  SquimNet net = SquimNet::init(small_config(), 4);

  auto grads_all_zero = [&](const std::string& prefix) {
    for (const auto& name : net.params().names()) {
      if (name.rfind(prefix, 0) != 0) continue;
      for (double g : net.params().at(name).grad()) {
        if (g != 0.0) return false;
      }
    }
    return true;
  };
  auto backward_loss = [&](const LossWeights& w) {
    net.params().zero_grad();
    const auto& s = dataset[0];
    auto fwd = net.forward(s.degraded.samples, w.w0 > 0.0);
    Tensor loss = ad::scale(
        ad::abs_t(ad::sub(fwd.stoi.s, Tensor::scalar(s.labels.stoi))), w.w1);
    if (w.w2 > 0.0 && s.labels.pesq.has_value()) {
      loss = ad::add(loss, ad::scale(ad::abs_t(ad::sub(fwd.pesq.s,
                                                      Tensor::scalar(*s.labels.pesq))),
                                     w.w2));
    }
    if (w.w3 > 0.0) {
      loss = ad::add(loss, ad::scale(ad::abs_t(ad::sub(fwd.si_sdr.s,
                                                      Tensor::scalar(s.labels.si_sdr))),
                                     w.w3));
    }
    if (w.w0 > 0.0) {
      Tensor target = Tensor::from_data({static_cast<int>(s.clean.samples.size())},
                                        s.clean.samples);
      loss = ad::add(loss, ad::scale(ad::mean_all(ad::abs_t(ad::sub(fwd.recon, target))),
                                     w.w0));
    }
    ad::backward(loss);
  };

  backward_loss(LossWeights{1.0, 2.0, 0.5, 0.0});
  expect(grads_all_zero("decoder"), "w0=0 leaked gradient into the decoder");
  expect(!grads_all_zero("branch.pesq."), "pesq branch unexpectedly gradient-free");

  backward_loss(LossWeights{1.0, 0.0, 0.0, 0.0});
  expect(grads_all_zero("branch.pesq."), "w=(w1,0,0,0) leaked gradient into pesq branch");
  expect(grads_all_zero("branch.sisdr."), "w=(w1,0,0,0) leaked gradient into sisdr branch");
  expect(grads_all_zero("decoder"), "w=(w1,0,0,0) leaked gradient into the decoder");
  expect(!grads_all_zero("branch.stoi."), "stoi branch unexpectedly gradient-free");
  expect(!grads_all_zero("trunk."), "shared trunk unexpectedly gradient-free");

  // the optimizer respects the zero gradients: exclusive parameters hold still
  const SquimNet ref = SquimNet::init(small_config(), 4);
  TrainHyper hyper;
  hyper.epochs = 1;
  hyper.seed = 4;
  train(net, dataset, LossWeights{1.0, 0.0, 0.0, 0.0}, hyper);
  for (const auto& name : net.params().names()) {
    const bool exclusive = name.rfind("branch.pesq.", 0) == 0 ||
                           name.rfind("branch.sisdr.", 0) == 0 ||
                           name.rfind("decoder", 0) == 0;
    if (exclusive) {
      expect(net.params().at(name).value() == ref.params().at(name).value(),
             "training moved ablated parameter " + name);
    }
  }
  return "decoder and unused branches receive exactly zero gradient and stay "
         "frozen under ablated weights";
}

std::string criterion_9() {
  const OverfitRun& a = cached_overfit();
  const OverfitRun b = run_overfit("overfit_b");
  expect(slurp(a.checkpoint) == slurp(b.checkpoint),
         "checkpoints differ between identical runs");
  expect(slurp(a.log) == slurp(b.log), "training logs differ between identical runs");
  expect(!slurp(a.checkpoint).empty(), "empty checkpoint");
  return "two full training runs produced byte-identical checkpoints (" +
         std::to_string(fs::file_size(a.checkpoint)) + " bytes) and logs";
}

std::string criterion_10() {
  Rng rng(7);
  const ModelConfig cfg = tiny_config();
  double stoi_min = 1.0, stoi_max = 0.0, pesq_min = 5.0, pesq_max = 0.0;
  ad::NoGradGuard guard;
  for (int trial = 0; trial < 1000; ++trial) {
    const SquimNet net = SquimNet::init(cfg, rng.next_u64());
    const int t_len = cfg.P + static_cast<int>(rng.below(600));
    std::vector<double> samples(static_cast<std::size_t>(t_len));
    const double amp = std::pow(10.0, rng.uniform(-2.0, 1.0));
    for (double& v : samples) v = amp * rng.gauss();
    const auto fwd = net.forward(samples, false);
    const MetricTriple t = fwd.triple();
    expect(t.stoi > 0.0 && t.stoi < 1.0,
           "trial " + std::to_string(trial) + ": stoi " + fmt("%.6f", t.stoi));
    expect(*t.pesq > 1.0 && *t.pesq < 4.64,
           "trial " + std::to_string(trial) + ": pesq " + fmt("%.6f", *t.pesq));
    expect(std::isfinite(t.si_sdr), "non-finite si_sdr estimate");
    stoi_min = std::min(stoi_min, t.stoi);
    stoi_max = std::max(stoi_max, t.stoi);
    pesq_min = std::min(pesq_min, *t.pesq);
    pesq_max = std::max(pesq_max, *t.pesq);
  }
  return "1000 random inputs/parameter draws: stoi in [" + fmt("%.4f", stoi_min) +
         ", " + fmt("%.4f", stoi_max) + "], pesq in [" + fmt("%.4f", pesq_min) +
         ", " + fmt("%.4f", pesq_max) + "]";
}

struct Criterion {
  int id;
  const char* title;
  std::function<std::string()> run;
};

}  // namespace

int main(int argc, char** argv) {
  std::vector<int> selected;
  bool list_only = false;
  for (int i = 1; i < argc; ++i) {
    if (std::strcmp(argv[i], "--criterion") == 0 && i + 1 < argc) {
      selected.push_back(std::atoi(argv[++i]));
    } else if (std::strcmp(argv[i], "--list") == 0) {
      list_only = true;
    } else {
      std::fprintf(stderr, "usage: %s [--list] [--criterion N]...\n", argv[0]);
      return 64;
    }
  }

  const std::vector<Criterion> criteria{
      {1, "desk-scale substitution statement", criterion_1},
      {2, "gradient-check suite over all primitives and the tiny model", criterion_2},
      {3, "SI-SDR oracle: hand case and scale invariance", criterion_3},
      {4, "STOI oracle: identity pairs and SNR monotonicity", criterion_4},
      {5, "statistics match brute-force recomputation", criterion_5},
      {6, "shape pipeline at the full configuration", criterion_6},
      {7, "overfit smoke test on 16 synthetic samples", criterion_7},
      {8, "ablated loss weights leave exclusive parameters untouched", criterion_8},
      {9, "training determinism: byte-identical artifacts", criterion_9},
      {10, "estimate ranges hold for arbitrary inputs and parameters", criterion_10},
  };

  if (list_only) {
    for (const auto& c : criteria) std::printf("%2d  %s\n", c.id, c.title);
    return 0;
  }

  int failures = 0;
  for (const auto& c : criteria) {
    if (!selected.empty() &&
        std::find(selected.begin(), selected.end(), c.id) == selected.end()) {
      continue;
    }
    try {
      const std::string detail = c.run();
      std::printf("[PASS] criterion %d: %s — %s\n", c.id, c.title, detail.c_str());
    } catch (const std::exception& e) {
      std::printf("[FAIL] criterion %d: %s — %s\n", c.id, c.title, e.what());
      ++failures;
    }
    std::fflush(stdout);
  }
  return failures;
}
