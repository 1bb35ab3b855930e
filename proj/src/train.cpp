#include "squim/train.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <string>

#include <json.hpp>

#include "squim/errors.hpp"
#include "squim/rng.hpp"

namespace squim {

namespace {

double loss_term_value(double pred, double truth, LossKind kind) {
  const double d = pred - truth;
  return kind == LossKind::kMae ? std::abs(d) : d * d;
}

Tensor loss_term_graph(const Tensor& pred, double truth, LossKind kind) {
  Tensor diff = ad::sub(pred, Tensor::scalar(truth));
  return kind == LossKind::kMae ? ad::abs_t(diff) : ad::mul(diff, diff);
}

void shuffle_indices(std::vector<std::size_t>& idx, Rng& rng) {
  for (std::size_t i = idx.size(); i > 1; --i) {
    const std::size_t j = static_cast<std::size_t>(rng.below(i));
    std::swap(idx[i - 1], idx[j]);
  }
}

}  // namespace

void LossWeights::validate() const {
  if (w0 < 0.0 || w1 < 0.0 || w2 < 0.0 || w3 < 0.0) {
    throw ValueError("loss weights must be nonnegative");
  }
}

double total_loss(const MetricTriple& pred, const std::vector<double>& recon,
                  const LabeledSample& sample, const LossWeights& w,
                  LossKind kind) {
  w.validate();
  double loss = w.w1 * loss_term_value(pred.stoi, sample.labels.stoi, kind) +
                w.w3 * loss_term_value(pred.si_sdr, sample.labels.si_sdr, kind);
  if (sample.labels.pesq.has_value() && pred.pesq.has_value()) {
    loss += w.w2 * loss_term_value(*pred.pesq, *sample.labels.pesq, kind);
  }
  if (w.w0 > 0.0 && !recon.empty()) {
    if (recon.size() != sample.clean.samples.size()) {
      throw ShapeError("total_loss: reconstruction length mismatch");
    }
    double acc = 0.0;
    for (std::size_t i = 0; i < recon.size(); ++i) {
      acc += std::abs(recon[i] - sample.clean.samples[i]);
    }
    loss += w.w0 * acc / static_cast<double>(recon.size());
  }
  return loss;
}

TrainResult train(SquimNet& net, const std::vector<LabeledSample>& dataset,
                  const LossWeights& weights, const TrainHyper& hyper,
                  std::ostream* log, const StopCondition* stop,
                  std::int64_t start_epoch) {
  weights.validate();
  if (dataset.empty()) {
    throw ValueError("train: empty dataset");
  }
  if (hyper.batch < 1 || hyper.epochs < 0 || hyper.lr <= 0.0) {
    throw ValueError("train: invalid hyperparameters");
  }
  const bool with_mtl = weights.w0 > 0.0;
  const std::size_t n = dataset.size();

  TrainResult result;
  std::int64_t step = net.params().step_count();
  for (std::int64_t epoch = start_epoch; epoch < hyper.epochs; ++epoch) {
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    Rng shuffle_rng(derive_seed(hyper.seed, static_cast<std::uint64_t>(epoch)));
    shuffle_indices(order, shuffle_rng);

    EpochStats stats;
    stats.epoch = static_cast<int>(epoch);
    std::size_t epoch_pesq_count = 0;

    for (std::size_t batch_start = 0; batch_start < n; batch_start += static_cast<std::size_t>(hyper.batch)) {
      const std::size_t batch_end =
          std::min(n, batch_start + static_cast<std::size_t>(hyper.batch));
      const double inv_batch = 1.0 / static_cast<double>(batch_end - batch_start);
      net.params().zero_grad();

      double batch_total = 0.0, batch_stoi = 0.0, batch_pesq = 0.0;
      double batch_sisdr = 0.0, batch_recon = 0.0;
      std::size_t batch_pesq_count = 0;

      for (std::size_t bi = batch_start; bi < batch_end; ++bi) {
        const LabeledSample& sample = dataset[order[bi]];
        try {
          auto fwd = net.forward(sample.degraded.samples, with_mtl);

          Tensor stoi_term =
              loss_term_graph(fwd.stoi.s, sample.labels.stoi, hyper.loss_kind);
          Tensor sisdr_term =
              loss_term_graph(fwd.si_sdr.s, sample.labels.si_sdr, hyper.loss_kind);
          Tensor loss = ad::add(ad::scale(stoi_term, weights.w1),
                                ad::scale(sisdr_term, weights.w3));
          if (weights.w2 > 0.0 && sample.labels.pesq.has_value()) {
            Tensor pesq_term = loss_term_graph(fwd.pesq.s, *sample.labels.pesq,
                                               hyper.loss_kind);
            loss = ad::add(loss, ad::scale(pesq_term, weights.w2));
          }
          Tensor recon_term;
          if (with_mtl) {
            Tensor target = Tensor::from_data(
                {static_cast<int>(sample.clean.samples.size())},
                sample.clean.samples);
            recon_term = ad::mean_all(ad::abs_t(ad::sub(fwd.recon, target)));
            loss = ad::add(loss, ad::scale(recon_term, weights.w0));
          }
          ad::backward(ad::scale(loss, inv_batch));

          batch_total += loss.item();
          // component logs stay in natural units regardless of loss kind
          batch_stoi += std::abs(fwd.stoi.s.item() - sample.labels.stoi);
          batch_sisdr += std::abs(fwd.si_sdr.s.item() - sample.labels.si_sdr);
          if (sample.labels.pesq.has_value()) {
            batch_pesq += std::abs(fwd.pesq.s.item() - *sample.labels.pesq);
            ++batch_pesq_count;
          }
          if (with_mtl) batch_recon += recon_term.item();
        } catch (const ValueError& e) {
          throw Error("training diverged at step " + std::to_string(step + 1) +
                      " (sample " + sample.id + "): " + e.what());
        }
      }

      net.params().clip_grad_norm(hyper.clip);
      net.params().adam_step(hyper.lr);
      ++step;

      stats.total += batch_total;
      stats.stoi_mae += batch_stoi;
      stats.pesq_mae += batch_pesq;
      stats.sisdr_mae += batch_sisdr;
      stats.recon_mae += batch_recon;
      epoch_pesq_count += batch_pesq_count;

      if (log) {
        nlohmann::ordered_json line;
        line["epoch"] = epoch;
        line["step"] = step;
        line["loss_total"] = batch_total * inv_batch;
        line["loss_stoi"] = batch_stoi * inv_batch;
        line["loss_pesq"] =
            batch_pesq_count ? batch_pesq / static_cast<double>(batch_pesq_count) : 0.0;
        line["loss_sisdr"] = batch_sisdr * inv_batch;
        line["loss_recon"] = batch_recon * inv_batch;
        (*log) << line.dump() << '\n';
      }
    }

    const double inv_n = 1.0 / static_cast<double>(n);
    stats.total *= inv_n;
    stats.stoi_mae *= inv_n;
    stats.sisdr_mae *= inv_n;
    stats.recon_mae *= inv_n;
    stats.pesq_mae = epoch_pesq_count
                         ? stats.pesq_mae / static_cast<double>(epoch_pesq_count)
                         : 0.0;
    result.epochs.push_back(stats);

    if (stop && (stop->stoi_mae < 0.0 || stats.stoi_mae <= stop->stoi_mae) &&
        (stop->sisdr_mae < 0.0 || stats.sisdr_mae <= stop->sisdr_mae)) {
      break;
    }
  }
  result.steps = step;
  return result;
}

EvalResult evaluate_model(const SquimNet& net,
                          const std::vector<LabeledSample>& dataset) {
  if (dataset.empty()) {
    throw ValueError("evaluate_model: empty dataset");
  }
  ad::NoGradGuard guard;
  EvalResult result;
  std::vector<MetricTriple> preds, truths;
  preds.reserve(dataset.size());
  truths.reserve(dataset.size());
  for (const auto& sample : dataset) {
    const MetricTriple pred = net.forward(sample.degraded.samples, false).triple();
    preds.push_back(pred);
    truths.push_back(sample.labels);
    result.rows.push_back({sample.id, sample.labels, pred});
  }
  result.report = evaluate(preds, truths);
  return result;
}

void export_scatter(const EvalResult& result, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) {
    throw IoError("cannot write " + path.string());
  }
  auto emit = [&out](const std::string& id, const char* metric, double truth,
                     double estimate) {
    char buf[96];
    std::snprintf(buf, sizeof(buf), "%s\t%s\t%.17g\t%.17g", id.c_str(), metric,
                  truth, estimate);
    out << buf << '\n';
  };
  out << "id\tmetric\ttruth\testimate\n";
  for (const auto& row : result.rows) {
    emit(row.id, "stoi", row.truth.stoi, row.pred.stoi);
    if (row.truth.pesq.has_value() && row.pred.pesq.has_value()) {
      emit(row.id, "pesq", *row.truth.pesq, *row.pred.pesq);
    }
    emit(row.id, "si_sdr", row.truth.si_sdr, row.pred.si_sdr);
  }
  if (!out) {
    throw IoError("write failed for " + path.string());
  }
}

}  // namespace squim
