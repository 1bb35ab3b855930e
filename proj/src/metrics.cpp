#include "squim/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>
#include <string>
#include <vector>

#include "squim/errors.hpp"
#include "squim/fft.hpp"
#include "squim/signal.hpp"

namespace squim {

namespace {

constexpr double kEps = std::numeric_limits<double>::epsilon();

// --- STOI internals (all parameters pinned, see header) ---
constexpr int kStoiRate = 10000;
constexpr int kFrameLen = 256;
constexpr int kHop = 128;
constexpr int kNfft = 512;
constexpr int kNumBands = 15;
constexpr double kMinBandFreq = 150.0;
constexpr int kSegLen = 30;       // 384 ms of 12.8 ms hops
constexpr double kDynRange = 40.0;
constexpr double kClipDb = -15.0;

// MATLAB-style Hann window without zero endpoints.
std::vector<double> hann_window(int n) {
  std::vector<double> w(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    w[static_cast<std::size_t>(i)] =
        0.5 * (1.0 - std::cos(2.0 * std::numbers::pi * (i + 1) / (n + 1)));
  }
  return w;
}

std::size_t num_frames(std::size_t len) {
  if (len < kFrameLen) return 0;
  return (len - kFrameLen) / kHop + 1;
}

// Drops frames whose clean-signal energy falls more than kDynRange below the
// loudest frame, then rebuilds both signals by overlap-adding the kept
// windowed frames.
void remove_silent_frames(std::vector<double>& x, std::vector<double>& y) {
  const auto w = hann_window(kFrameLen);
  const std::size_t m = num_frames(x.size());
  std::vector<double> energy_db(m);
  for (std::size_t j = 0; j < m; ++j) {
    double e = 0.0;
    for (int i = 0; i < kFrameLen; ++i) {
      const double v = x[j * kHop + static_cast<std::size_t>(i)] *
                       w[static_cast<std::size_t>(i)];
      e += v * v;
    }
    energy_db[j] = 20.0 * std::log10(std::sqrt(e) + kEps);
  }
  const double peak = *std::max_element(energy_db.begin(), energy_db.end());

  std::vector<double> xs, ys;
  std::size_t count = 0;
  for (std::size_t j = 0; j < m; ++j) {
    if (energy_db[j] <= peak - kDynRange) continue;
    const std::size_t out_base = count * kHop;
    if (xs.size() < out_base + kFrameLen) {
      xs.resize(out_base + kFrameLen, 0.0);
      ys.resize(out_base + kFrameLen, 0.0);
    }
    for (int i = 0; i < kFrameLen; ++i) {
      const std::size_t src = j * kHop + static_cast<std::size_t>(i);
      xs[out_base + static_cast<std::size_t>(i)] +=
          x[src] * w[static_cast<std::size_t>(i)];
      ys[out_base + static_cast<std::size_t>(i)] +=
          y[src] * w[static_cast<std::size_t>(i)];
    }
    ++count;
  }
  x = std::move(xs);
  y = std::move(ys);
}

// One-third-octave band matrix: bands[k] = [first_bin, last_bin) over the
// 257-bin half spectrum, edges snapped to the nearest FFT bin.
std::vector<std::pair<int, int>> third_octave_bands() {
  std::vector<std::pair<int, int>> bands(kNumBands);
  const int nbins = kNfft / 2 + 1;
  auto nearest_bin = [&](double freq) {
    int best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (int i = 0; i < nbins; ++i) {
      const double f = static_cast<double>(i) * kStoiRate / kNfft;
      const double d = (f - freq) * (f - freq);
      if (d < best_d) {
        best_d = d;
        best = i;
      }
    }
    return best;
  };
  for (int k = 0; k < kNumBands; ++k) {
    const double lo = kMinBandFreq * std::pow(2.0, (2.0 * k - 1.0) / 6.0);
    const double hi = kMinBandFreq * std::pow(2.0, (2.0 * k + 1.0) / 6.0);
    bands[static_cast<std::size_t>(k)] = {nearest_bin(lo), nearest_bin(hi)};
  }
  return bands;
}

// Band-level magnitudes: out[band][frame] = sqrt(sum of |STFT|^2 over band).
std::vector<std::vector<double>> band_spectrogram(const std::vector<double>& x) {
  const auto w = hann_window(kFrameLen);
  const auto bands = third_octave_bands();
  const std::size_t m = num_frames(x.size());
  std::vector<std::vector<double>> out(
      kNumBands, std::vector<double>(m, 0.0));
  std::vector<double> frame(kFrameLen);
  for (std::size_t j = 0; j < m; ++j) {
    for (int i = 0; i < kFrameLen; ++i) {
      frame[static_cast<std::size_t>(i)] =
          x[j * kHop + static_cast<std::size_t>(i)] * w[static_cast<std::size_t>(i)];
    }
    const auto spec = real_fft(frame, kNfft);
    for (int k = 0; k < kNumBands; ++k) {
      double acc = 0.0;
      for (int b = bands[static_cast<std::size_t>(k)].first;
           b < bands[static_cast<std::size_t>(k)].second; ++b) {
        acc += std::norm(spec[static_cast<std::size_t>(b)]);
      }
      out[static_cast<std::size_t>(k)][j] = std::sqrt(acc);
    }
  }
  return out;
}

}  // namespace

double si_sdr(const Waveform& estimate, const Waveform& reference) {
  validate(estimate);
  validate(reference);
  if (estimate.samples.size() != reference.samples.size()) {
    throw ShapeError("si_sdr: length mismatch (" +
                     std::to_string(estimate.samples.size()) + " vs " +
                     std::to_string(reference.samples.size()) + ")");
  }
  if (estimate.sample_rate != reference.sample_rate) {
    throw ShapeError("si_sdr: sample-rate mismatch");
  }
  double dot = 0.0;
  double ref_energy = 0.0;
  for (std::size_t i = 0; i < reference.samples.size(); ++i) {
    dot += estimate.samples[i] * reference.samples[i];
    ref_energy += reference.samples[i] * reference.samples[i];
  }
  if (ref_energy <= 0.0) {
    throw ValueError("si_sdr: zero reference");
  }
  const double alpha = dot / ref_energy;
  double target_energy = 0.0;
  double residual_energy = 0.0;
  for (std::size_t i = 0; i < reference.samples.size(); ++i) {
    const double t = alpha * reference.samples[i];
    const double r = estimate.samples[i] - t;
    target_energy += t * t;
    residual_energy += r * r;
  }
  constexpr double eps = 1e-12;
  const double ratio = (target_energy + eps) / (residual_energy + eps);
  return std::clamp(10.0 * std::log10(ratio), -60.0, 60.0);
}

double stoi(const Waveform& degraded, const Waveform& clean) {
  validate(degraded);
  validate(clean);
  if (degraded.samples.size() != clean.samples.size()) {
    throw ShapeError("stoi: length mismatch");
  }
  if (degraded.sample_rate != clean.sample_rate) {
    throw ShapeError("stoi: sample-rate mismatch");
  }

  std::vector<double> x = resample(clean, kStoiRate).samples;
  std::vector<double> y = resample(degraded, kStoiRate).samples;
  if (num_frames(x.size()) == 0) {
    throw ValueError("stoi: signal too short");
  }
  remove_silent_frames(x, y);

  const auto xb = band_spectrogram(x);
  const auto yb = band_spectrogram(y);
  const std::size_t m = xb[0].size();
  if (m < kSegLen) {
    throw ValueError(
        "stoi: signal too short after silence removal (need >= 384 ms of "
        "non-silent material)");
  }

  const double clip_gain = 1.0 + std::pow(10.0, -kClipDb / 20.0);
  double total = 0.0;
  std::size_t count = 0;
  std::vector<double> xs(kSegLen), yp(kSegLen);
  for (std::size_t seg_end = kSegLen; seg_end <= m; ++seg_end) {
    const std::size_t base = seg_end - kSegLen;
    for (int j = 0; j < kNumBands; ++j) {
      double x_norm2 = 0.0, y_norm2 = 0.0;
      for (int i = 0; i < kSegLen; ++i) {
        xs[static_cast<std::size_t>(i)] =
            xb[static_cast<std::size_t>(j)][base + static_cast<std::size_t>(i)];
        const double yv =
            yb[static_cast<std::size_t>(j)][base + static_cast<std::size_t>(i)];
        yp[static_cast<std::size_t>(i)] = yv;
        x_norm2 += xs[static_cast<std::size_t>(i)] * xs[static_cast<std::size_t>(i)];
        y_norm2 += yv * yv;
      }
      // Energy-normalize the degraded segment, then clip its excess above
      // the clean segment to bound the SDR at kClipDb.
      const double scale = std::sqrt(x_norm2) / (std::sqrt(y_norm2) + kEps);
      double x_mean = 0.0, y_mean = 0.0;
      for (int i = 0; i < kSegLen; ++i) {
        yp[static_cast<std::size_t>(i)] =
            std::min(yp[static_cast<std::size_t>(i)] * scale,
                     xs[static_cast<std::size_t>(i)] * clip_gain);
        x_mean += xs[static_cast<std::size_t>(i)];
        y_mean += yp[static_cast<std::size_t>(i)];
      }
      x_mean /= kSegLen;
      y_mean /= kSegLen;
      double num = 0.0, xd2 = 0.0, yd2 = 0.0;
      for (int i = 0; i < kSegLen; ++i) {
        const double xd = xs[static_cast<std::size_t>(i)] - x_mean;
        const double yd = yp[static_cast<std::size_t>(i)] - y_mean;
        num += xd * yd;
        xd2 += xd * xd;
        yd2 += yd * yd;
      }
      total += num / (std::sqrt(xd2) * std::sqrt(yd2) + kEps);
      ++count;
    }
  }
  return std::clamp(total / static_cast<double>(count), 0.0, 1.0);
}

double mae(std::span<const double> pred, std::span<const double> truth) {
  if (pred.empty()) {
    throw ValueError("mae: empty input");
  }
  if (pred.size() != truth.size()) {
    throw ShapeError("mae: length mismatch");
  }
  double acc = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    acc += std::abs(pred[i] - truth[i]);
  }
  return acc / static_cast<double>(pred.size());
}

double pcc(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) {
    throw ShapeError("pcc: length mismatch");
  }
  const std::size_t n = a.size();
  if (n < 2) {
    throw ValueError("pcc: need at least 2 samples, got " + std::to_string(n));
  }
  double ma = 0.0, mb = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    ma += a[i];
    mb += b[i];
  }
  ma /= static_cast<double>(n);
  mb /= static_cast<double>(n);
  double cov = 0.0, va = 0.0, vb = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double da = a[i] - ma;
    const double db = b[i] - mb;
    cov += da * db;
    va += da * da;
    vb += db * db;
  }
  if (va <= 0.0 || vb <= 0.0) {
    throw ValueError("pcc: zero variance input");
  }
  return cov / (std::sqrt(va) * std::sqrt(vb));
}

std::vector<double> average_ranks(std::span<const double> x) {
  const std::size_t n = x.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](std::size_t i, std::size_t j) { return x[i] < x[j]; });
  std::vector<double> ranks(n, 0.0);
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j + 1 < n && x[order[j + 1]] == x[order[i]]) ++j;
    // positions i..j (0-based) share the average 1-based rank
    const double r = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = r;
    i = j + 1;
  }
  return ranks;
}

double srcc(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) {
    throw ShapeError("srcc: length mismatch");
  }
  const auto ra = average_ranks(a);
  const auto rb = average_ranks(b);
  return pcc(ra, rb);
}

EvalReport evaluate(const std::vector<MetricTriple>& pred,
                    const std::vector<MetricTriple>& truth) {
  if (pred.empty()) {
    throw ValueError("evaluate: empty input");
  }
  if (pred.size() != truth.size()) {
    throw ShapeError("evaluate: prediction/truth length mismatch");
  }
  EvalReport report;
  report.n = pred.size();

  std::vector<double> ps, ts;
  ps.reserve(pred.size());
  ts.reserve(pred.size());

  auto stats = [&](auto getter) {
    ps.clear();
    ts.clear();
    for (std::size_t i = 0; i < pred.size(); ++i) {
      ps.push_back(getter(pred[i]));
      ts.push_back(getter(truth[i]));
    }
    MetricStats s;
    s.mae = mae(ps, ts);
    s.pcc = pcc(ps, ts);
    s.srcc = srcc(ps, ts);
    return s;
  };

  report.stoi = stats([](const MetricTriple& t) { return t.stoi; });
  report.stoi.mae *= 100.0;  // table convention: STOI in percent
  report.si_sdr = stats([](const MetricTriple& t) { return t.si_sdr; });

  ps.clear();
  ts.clear();
  for (std::size_t i = 0; i < pred.size(); ++i) {
    if (pred[i].pesq.has_value() && truth[i].pesq.has_value()) {
      ps.push_back(*pred[i].pesq);
      ts.push_back(*truth[i].pesq);
    }
  }
  if (ps.size() >= 2) {
    MetricStats s;
    s.mae = mae(ps, ts);
    s.pcc = pcc(ps, ts);
    s.srcc = srcc(ps, ts);
    report.pesq = s;
  }
  return report;
}

}  // namespace squim
