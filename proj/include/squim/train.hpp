#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <ostream>
#include <vector>

#include "squim/dataset.hpp"
#include "squim/metrics.hpp"
#include "squim/model.hpp"

namespace squim {

enum class LossKind { kMae, kMse };

// Weighting factors of the joint training objective:
//   w1 * L(stoi) + w2 * L(pesq) + w3 * L(si_sdr) + w0 * L(reconstruction)
struct LossWeights {
  double w1 = 1.0;
  double w2 = 2.0;
  double w3 = 0.5;
  double w0 = 2.0;
  void validate() const;
};

// Reference-route loss on plain values; the trainer builds the identical
// expression as a graph. PESQ is skipped when the sample has no label; the
// reconstruction term is waveform-domain MAE and is skipped when recon is
// empty or w0 == 0.
double total_loss(const MetricTriple& pred, const std::vector<double>& recon,
                  const LabeledSample& sample, const LossWeights& w,
                  LossKind kind);

struct TrainHyper {
  double lr = 4e-4;
  int batch = 4;
  int epochs = 10;
  double clip = 5.0;
  std::uint64_t seed = 0;
  LossKind loss_kind = LossKind::kMae;
};

// Optional epoch-level stopping thresholds on training MAE (natural units);
// negative values disable a threshold.
struct StopCondition {
  double stoi_mae = -1.0;
  double sisdr_mae = -1.0;
};

struct EpochStats {
  int epoch = 0;
  double stoi_mae = 0.0;
  double pesq_mae = 0.0;  // over labeled samples only; 0 when none
  double sisdr_mae = 0.0;
  double recon_mae = 0.0;
  double total = 0.0;
};

struct TrainResult {
  std::vector<EpochStats> epochs;
  std::int64_t steps = 0;
};

// Runs Adam with gradient-norm clipping over the dataset, mutating the
// network in place. Batches are drawn in a seeded per-epoch shuffle; the
// whole procedure is bit-deterministic for fixed inputs. `log` receives one
// JSON object per optimizer step:
//   {epoch, step, loss_total, loss_stoi, loss_pesq, loss_sisdr, loss_recon}
// start_epoch is nonzero when resuming from a saved training state.
TrainResult train(SquimNet& net, const std::vector<LabeledSample>& dataset,
                  const LossWeights& weights, const TrainHyper& hyper,
                  std::ostream* log = nullptr,
                  const StopCondition* stop = nullptr,
                  std::int64_t start_epoch = 0);

struct PerSampleEval {
  std::string id;
  MetricTriple truth;
  MetricTriple pred;
};

struct EvalResult {
  EvalReport report;
  std::vector<PerSampleEval> rows;
};

// Runs the estimator (no decoder) over the dataset and aggregates
// MAE/PCC/SRCC against the oracle labels.
EvalResult evaluate_model(const SquimNet& net,
                          const std::vector<LabeledSample>& dataset);

// TSV with columns id, metric, truth, estimate; one row per sample and
// available metric.
void export_scatter(const EvalResult& result, const std::filesystem::path& path);

}  // namespace squim
