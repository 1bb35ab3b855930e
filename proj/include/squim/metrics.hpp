#pragma once

#include <optional>
#include <span>
#include <vector>

#include "squim/wav.hpp"

namespace squim {

// One (STOI, PESQ, SI-SDR) score tuple. PESQ may be absent: this toolkit
// carries no PESQ implementation and ingests those labels from sidecar files.
struct MetricTriple {
  double stoi = 0.0;
  std::optional<double> pesq;
  double si_sdr = 0.0;
};

struct MetricStats {
  double mae = 0.0;
  double pcc = 0.0;
  double srcc = 0.0;
};

// Aggregate evaluation statistics. STOI MAE is reported in percent; PESQ
// stats are absent when fewer than two labeled pairs exist.
struct EvalReport {
  MetricStats stoi;
  std::optional<MetricStats> pesq;
  MetricStats si_sdr;
  std::size_t n = 0;
};

// Scale-invariant signal-to-distortion ratio in dB. Projects the estimate
// onto the reference, then takes 10*log10 of target over residual energy
// (eps = 1e-12), clamped to [-60, +60] dB.
double si_sdr(const Waveform& estimate, const Waveform& reference);

// Short-time objective intelligibility in [0, 1]. Internals are pinned:
// 10 kHz rate, 256-sample Hann frames with 50% overlap, 512-point FFT,
// 40 dB VAD dynamic range, 15 one-third-octave bands from 150 Hz, 30-frame
// segments, -15 dB clipping.
double stoi(const Waveform& degraded, const Waveform& clean);

// Mean absolute error.
double mae(std::span<const double> pred, std::span<const double> truth);

// Pearson correlation coefficient. Throws on zero variance.
double pcc(std::span<const double> a, std::span<const double> b);

// Spearman rank correlation; ties receive average ranks.
double srcc(std::span<const double> a, std::span<const double> b);

// Average ranks (1-based) with ties averaged, as used by srcc.
std::vector<double> average_ranks(std::span<const double> x);

// Per-metric MAE/PCC/SRCC over aligned prediction/truth sequences.
EvalReport evaluate(const std::vector<MetricTriple>& pred,
                    const std::vector<MetricTriple>& truth);

}  // namespace squim
