// Command-line front end: dataset synthesis, oracle scoring, training,
// reference-less estimation, evaluation and scatter export. TSV goes to
// stdout, diagnostics to stderr.

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>

#include "squim/checkpoint.hpp"
#include "squim/config.hpp"
#include "squim/dataset.hpp"
#include "squim/errors.hpp"
#include "squim/metrics.hpp"
#include "squim/model.hpp"
#include "squim/signal.hpp"
#include "squim/train.hpp"
#include "squim/wav.hpp"

namespace {

using namespace squim;

constexpr int kExitError = 1;
constexpr int kExitMismatch = 2;
constexpr int kExitMissingCheckpoint = 3;
constexpr int kExitBadConfig = 4;

std::uint64_t default_seed() {
  if (const char* env = std::getenv("SQUIM_SEED")) {
    try {
      return std::stoull(env);
    } catch (const std::exception&) {
      throw ConfigError("SQUIM_SEED is not a valid integer: " + std::string(env));
    }
  }
  return 0;
}

void print_kv(const char* key, const std::string& value) {
  std::cerr << key << " = " << value << "\n";
}

void print_kv(const char* key, double value) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%g", value);
  print_kv(key, std::string(buf));
}

void print_kv(const char* key, std::uint64_t value) {
  print_kv(key, std::to_string(value));
}

void print_kv(const char* key, int value) { print_kv(key, std::to_string(value)); }

void print_model_config(const ModelConfig& cfg) {
  print_kv("N", cfg.N);
  print_kv("P", cfg.P);
  print_kv("R", cfg.R);
  print_kv("h", cfg.h);
  print_kv("d", cfg.d);
  print_kv("d1", cfg.d1);
  print_kv("num_dprnn_blocks", cfg.num_dprnn_blocks);
  print_kv("blstm_hidden", cfg.hidden());
}

std::string fmt6(double v) {
  char buf[48];
  std::snprintf(buf, sizeof(buf), "%.6f", v);
  return buf;
}

SquimNet load_checkpoint_checked(const std::string& path) {
  if (!std::filesystem::exists(path)) {
    throw IoError("checkpoint not found: " + path);
  }
  return load_checkpoint(path);
}

ModelConfig preset_config(const std::string& name) {
  if (name == "tiny") return tiny_config();
  if (name == "small") return small_config();
  if (name == "full") return ModelConfig{};
  throw ConfigError("unknown preset '" + name + "' (expected tiny|small|full)");
}

struct TrainArgs {
  std::string data_dir;
  std::string out_path = "model.sqmc";
  std::string log_path;
  std::string state_out;
  std::string resume_path;
  std::string config_path;
  std::string labels_path;
  std::string preset = "small";
  TrainHyper hyper;
  std::string loss_kind = "mae";
};

int run_train(const TrainArgs& args, bool epochs_set, bool lr_set, bool batch_set,
              bool clip_set, bool seed_set, bool loss_set) {
  ModelConfig cfg = preset_config(args.preset);
  LossWeights weights;
  TrainHyper hyper = args.hyper;
  hyper.seed = seed_set ? args.hyper.seed : default_seed();
  if (!args.config_path.empty()) {
    TrainHyper from_file;
    apply_config(parse_config_file(args.config_path), &cfg, &weights, &from_file);
    // flags win over the config file
    if (!epochs_set) hyper.epochs = from_file.epochs;
    if (!lr_set) hyper.lr = from_file.lr;
    if (!batch_set) hyper.batch = from_file.batch;
    if (!clip_set) hyper.clip = from_file.clip;
    if (!seed_set) hyper.seed = from_file.seed;
    hyper.loss_kind = from_file.loss_kind;
  }
  if (loss_set || args.config_path.empty()) {
    if (args.loss_kind == "mse") hyper.loss_kind = LossKind::kMse;
    else if (args.loss_kind == "mae") hyper.loss_kind = LossKind::kMae;
    else throw ConfigError("--loss must be mae or mse");
  }

  print_model_config(cfg);
  print_kv("w0", weights.w0);
  print_kv("w1", weights.w1);
  print_kv("w2", weights.w2);
  print_kv("w3", weights.w3);
  print_kv("lr", hyper.lr);
  print_kv("batch", hyper.batch);
  print_kv("epochs", hyper.epochs);
  print_kv("clip", hyper.clip);
  print_kv("seed", hyper.seed);
  print_kv("loss_kind", hyper.loss_kind == LossKind::kMae ? "mae" : "mse");

  auto dataset = load_dataset(args.data_dir);
  if (!args.labels_path.empty()) {
    attach_pesq_labels(dataset, load_label_file(args.labels_path));
  }

  std::int64_t start_epoch = 0;
  SquimNet net = args.resume_path.empty()
                     ? SquimNet::init(cfg, hyper.seed)
                     : load_train_state(args.resume_path, &start_epoch);

  std::ofstream log;
  if (!args.log_path.empty()) {
    log.open(args.log_path);
    if (!log) throw IoError("cannot write " + args.log_path);
  }
  const TrainResult result = train(net, dataset, weights, hyper,
                                   log.is_open() ? &log : nullptr, nullptr,
                                   start_epoch);
  save_checkpoint(args.out_path, net);
  if (!args.state_out.empty()) {
    save_train_state(args.state_out, net, hyper.epochs);
  }
  std::cerr << "trained " << result.steps << " steps, checkpoint written to "
            << args.out_path << "\n";
  if (!result.epochs.empty()) {
    const auto& last = result.epochs.back();
    std::cerr << "final epoch MAE: stoi=" << fmt6(last.stoi_mae)
              << " sisdr=" << fmt6(last.sisdr_mae) << "\n";
  }
  return 0;
}

void print_report(const EvalReport& report) {
  auto row = [](const char* name, const MetricStats& s) {
    std::cout << name << '\t' << fmt6(s.mae) << '\t' << fmt6(s.pcc) << '\t'
              << fmt6(s.srcc) << "\n";
  };
  std::cout << "metric\tmae\tpcc\tsrcc\n";
  row("stoi_pct", report.stoi);
  if (report.pesq.has_value()) row("pesq", *report.pesq);
  row("si_sdr", report.si_sdr);
  std::cout << "n\t" << report.n << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"reference-less speech quality and intelligibility toolkit"};
  app.require_subcommand(1);

  // --- synth ---
  auto* synth = app.add_subcommand("synth", "synthesize a labeled dataset");
  int synth_n = 8;
  double synth_dur = 1.0;
  double snr_lo = -15.0, snr_hi = 25.0;
  std::uint64_t synth_seed = 0;
  bool synth_seed_set = false;
  std::string out_dir, clean_dir;
  int jobs = static_cast<int>(std::thread::hardware_concurrency());
  synth->add_option("--n", synth_n, "number of samples");
  synth->add_option("--dur", synth_dur, "clip duration in seconds");
  synth->add_option("--snr-lo", snr_lo, "lower SNR bound in dB");
  synth->add_option("--snr-hi", snr_hi, "upper SNR bound in dB");
  synth->add_option("--seed", synth_seed, "RNG seed")->each([&](const std::string&) {
    synth_seed_set = true;
  });
  synth->add_option("--out-dir", out_dir, "output directory")->required();
  synth->add_option("--clean-dir", clean_dir, "directory of clean WAV sources");
  synth->add_option("--jobs", jobs, "worker threads");

  // --- oracle ---
  auto* oracle = app.add_subcommand("oracle", "score a degraded/reference pair");
  std::string est_path, ref_path, metric = "all";
  oracle->add_option("--est", est_path, "estimate/degraded WAV")->required();
  oracle->add_option("--ref", ref_path, "reference/clean WAV")->required();
  oracle->add_option("--metric", metric, "stoi|sisdr|all");

  // --- train ---
  auto* train_cmd = app.add_subcommand("train", "train the estimator");
  TrainArgs targs;
  bool epochs_set = false, lr_set = false, batch_set = false, clip_set = false,
       train_seed_set = false, loss_set = false;
  train_cmd->add_option("--data", targs.data_dir, "dataset directory")->required();
  train_cmd->add_option("--out", targs.out_path, "checkpoint output path");
  train_cmd->add_option("--log", targs.log_path, "JSONL training log path");
  train_cmd->add_option("--state-out", targs.state_out, "training-state output path");
  train_cmd->add_option("--resume", targs.resume_path, "resume from training state");
  train_cmd->add_option("--config", targs.config_path, "key = value config file");
  train_cmd->add_option("--labels", targs.labels_path, "PESQ label TSV");
  train_cmd->add_option("--preset", targs.preset, "model preset: tiny|small|full");
  train_cmd->add_option("--epochs", targs.hyper.epochs, "training epochs")
      ->each([&](const std::string&) { epochs_set = true; });
  train_cmd->add_option("--lr", targs.hyper.lr, "Adam learning rate")
      ->each([&](const std::string&) { lr_set = true; });
  train_cmd->add_option("--batch", targs.hyper.batch, "batch size")
      ->each([&](const std::string&) { batch_set = true; });
  train_cmd->add_option("--clip", targs.hyper.clip, "gradient-norm clip")
      ->each([&](const std::string&) { clip_set = true; });
  train_cmd->add_option("--seed", targs.hyper.seed, "RNG seed")
      ->each([&](const std::string&) { train_seed_set = true; });
  train_cmd->add_option("--loss", targs.loss_kind, "mae|mse")
      ->each([&](const std::string&) { loss_set = true; });

  // --- estimate ---
  auto* estimate = app.add_subcommand("estimate", "reference-less metric estimates");
  std::string est_ckpt;
  std::vector<std::string> est_wavs;
  estimate->add_option("--ckpt", est_ckpt, "model checkpoint")->required();
  estimate->add_option("wavs", est_wavs, "input WAV files")->required();

  // --- eval ---
  auto* eval_cmd = app.add_subcommand("eval", "evaluate a checkpoint on a dataset");
  std::string eval_ckpt, eval_data, eval_labels, eval_scatter;
  eval_cmd->add_option("--ckpt", eval_ckpt, "model checkpoint")->required();
  eval_cmd->add_option("--data", eval_data, "dataset directory")->required();
  eval_cmd->add_option("--labels", eval_labels, "PESQ label TSV");

  // --- scatter ---
  auto* scatter = app.add_subcommand("scatter", "export truth/estimate pairs");
  std::string sc_ckpt, sc_data, sc_labels, sc_out;
  scatter->add_option("--ckpt", sc_ckpt, "model checkpoint")->required();
  scatter->add_option("--data", sc_data, "dataset directory")->required();
  scatter->add_option("--labels", sc_labels, "PESQ label TSV");
  scatter->add_option("--out", sc_out, "output TSV path")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*synth) {
      if (snr_lo > snr_hi) {
        std::cerr << "error: --snr-lo exceeds --snr-hi\n";
        return kExitError;
      }
      const std::uint64_t seed = synth_seed_set ? synth_seed : default_seed();
      print_kv("n", synth_n);
      print_kv("dur", synth_dur);
      print_kv("snr_lo", snr_lo);
      print_kv("snr_hi", snr_hi);
      print_kv("seed", seed);
      print_kv("out_dir", out_dir);
      print_kv("clean_dir", clean_dir.empty() ? "(synthetic)" : clean_dir);
      print_kv("jobs", jobs);
      const auto dataset = synth_dataset(synth_n, synth_dur, snr_lo, snr_hi, seed,
                                         clean_dir, std::max(1, jobs));
      save_dataset(out_dir, dataset);
      std::cerr << "wrote " << dataset.size() << " samples to " << out_dir << "\n";
      return 0;
    }

    if (*oracle) {
      print_kv("est", est_path);
      print_kv("ref", ref_path);
      print_kv("metric", metric);
      const Waveform est = load_wav(est_path);
      const Waveform ref = load_wav(ref_path);
      try {
        if (metric == "sisdr" || metric == "all") {
          std::cout << "si_sdr\t" << fmt6(si_sdr(est, ref)) << "\n";
        }
        if (metric == "stoi" || metric == "all") {
          std::cout << "stoi\t" << fmt6(stoi(est, ref)) << "\n";
        }
      } catch (const ShapeError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitMismatch;
      }
      if (metric != "stoi" && metric != "sisdr" && metric != "all") {
        std::cerr << "error: unknown metric '" << metric << "'\n";
        return kExitError;
      }
      return 0;
    }

    if (*train_cmd) {
      return run_train(targs, epochs_set, lr_set, batch_set, clip_set,
                       train_seed_set, loss_set);
    }

    if (*estimate) {
      print_kv("ckpt", est_ckpt);
      const SquimNet net = load_checkpoint_checked(est_ckpt);
      print_model_config(net.config());
      ad::NoGradGuard guard;
      std::cout << "file\tstoi\tpesq\tsi_sdr\n";
      for (const auto& path : est_wavs) {
        Waveform w = load_wav(path);
        if (w.sample_rate != 16000) w = resample(w, 16000);
        const MetricTriple t = net.forward(w.samples, false).triple();
        std::cout << path << '\t' << fmt6(t.stoi) << '\t' << fmt6(*t.pesq) << '\t'
                  << fmt6(t.si_sdr) << "\n";
      }
      return 0;
    }

    if (*eval_cmd) {
      print_kv("ckpt", eval_ckpt);
      print_kv("data", eval_data);
      const SquimNet net = load_checkpoint_checked(eval_ckpt);
      print_model_config(net.config());
      auto dataset = load_dataset(eval_data);
      if (!eval_labels.empty()) {
        attach_pesq_labels(dataset, load_label_file(eval_labels));
      }
      const EvalResult result = evaluate_model(net, dataset);
      print_report(result.report);
      return 0;
    }

    if (*scatter) {
      print_kv("ckpt", sc_ckpt);
      print_kv("data", sc_data);
      print_kv("out", sc_out);
      const SquimNet net = load_checkpoint_checked(sc_ckpt);
      auto dataset = load_dataset(sc_data);
      if (!sc_labels.empty()) {
        attach_pesq_labels(dataset, load_label_file(sc_labels));
      }
      export_scatter(evaluate_model(net, dataset), sc_out);
      std::cerr << "scatter written to " << sc_out << "\n";
      return 0;
    }
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitBadConfig;
  } catch (const IoError& e) {
    const std::string what = e.what();
    std::cerr << "error: " << what << "\n";
    return what.find("checkpoint not found") != std::string::npos
               ? kExitMissingCheckpoint
               : kExitError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitError;
  }
  return kExitError;
}
