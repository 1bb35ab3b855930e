#include "squim/signal.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <string>
#include <vector>

#include "squim/errors.hpp"
#include "squim/rng.hpp"

namespace squim {

namespace {

constexpr double kKaiserBeta = 14.77;
constexpr int kZeroCrossings = 64;

// Modified Bessel function of the first kind, order zero (power series).
double bessel_i0(double x) {
  const double half = 0.5 * x;
  double term = 1.0;
  double sum = 1.0;
  for (int k = 1; k < 64; ++k) {
    term *= (half / k) * (half / k);
    sum += term;
    if (term < sum * 1e-18) break;
  }
  return sum;
}

double sinc(double x) {
  if (std::abs(x) < 1e-12) return 1.0;
  const double px = std::numbers::pi * x;
  return std::sin(px) / px;
}

// Pink noise via Paul Kellet's three-stage filter cascade.
class PinkFilter {
 public:
  double step(double white) {
    b0_ = 0.99886 * b0_ + white * 0.0555179;
    b1_ = 0.99332 * b1_ + white * 0.0750759;
    b2_ = 0.96900 * b2_ + white * 0.1538520;
    b3_ = 0.86650 * b3_ + white * 0.3104856;
    b4_ = 0.55000 * b4_ + white * 0.5329522;
    b5_ = -0.7616 * b5_ - white * 0.0168980;
    const double pink = b0_ + b1_ + b2_ + b3_ + b4_ + b5_ + b6_ + white * 0.5362;
    b6_ = white * 0.115926;
    return pink;
  }

 private:
  double b0_ = 0, b1_ = 0, b2_ = 0, b3_ = 0, b4_ = 0, b5_ = 0, b6_ = 0;
};

void scale_to_rms(std::vector<double>& x, double target_rms) {
  double p = 0.0;
  for (double v : x) p += v * v;
  p /= static_cast<double>(x.size());
  if (p <= 0.0) return;
  const double g = target_rms / std::sqrt(p);
  for (double& v : x) v *= g;
}

}  // namespace

double mean_power(const Waveform& w) {
  double acc = 0.0;
  for (double s : w.samples) acc += s * s;
  return acc / static_cast<double>(w.samples.size());
}

Waveform mix_at_snr(const Waveform& clean, const Waveform& noise,
                    double snr_db, std::size_t noise_offset) {
  validate(clean);
  validate(noise);
  if (clean.sample_rate != noise.sample_rate) {
    throw ValueError("mix_at_snr: sample-rate mismatch (" +
                     std::to_string(clean.sample_rate) + " vs " +
                     std::to_string(noise.sample_rate) + ")");
  }
  if (!std::isfinite(snr_db)) {
    throw ValueError("mix_at_snr: snr_db must be finite");
  }
  const std::size_t n = clean.samples.size();
  if (noise.samples.size() < n) {
    throw ValueError("mix_at_snr: noise shorter than clean signal");
  }
  if (noise_offset + n > noise.samples.size()) {
    throw ValueError("mix_at_snr: noise_offset out of range");
  }

  const double p_clean = mean_power(clean);
  double p_noise = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double v = noise.samples[noise_offset + i];
    p_noise += v * v;
  }
  p_noise /= static_cast<double>(n);
  if (p_clean <= 0.0) {
    throw ValueError("mix_at_snr: clean signal has zero power");
  }
  if (p_noise <= 0.0) {
    throw ValueError("mix_at_snr: noise has zero power over used extent");
  }

  const double g = std::sqrt(p_clean / (p_noise * std::pow(10.0, snr_db / 10.0)));
  Waveform out;
  out.sample_rate = clean.sample_rate;
  out.samples.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    out.samples[i] = clean.samples[i] + g * noise.samples[noise_offset + i];
  }
  return out;
}

Waveform resample(const Waveform& w, int target_rate) {
  validate(w);
  if (target_rate <= 0) {
    throw ValueError("resample: target_rate must be positive");
  }
  if (target_rate == w.sample_rate) {
    return w;
  }

  const std::int64_t src = w.sample_rate;
  const std::int64_t tgt = target_rate;
  const std::int64_t g = std::gcd(src, tgt);
  const std::int64_t up = tgt / g;    // phases
  const std::int64_t down = src / g;  // input step per up output samples

  const double ratio = static_cast<double>(tgt) / static_cast<double>(src);
  const double cutoff = std::min(1.0, ratio);  // relative to source Nyquist
  const double half_width = kZeroCrossings / cutoff;
  const double i0_beta = bessel_i0(kKaiserBeta);

  // Output sample m sits at input time tau = m * down / up. Only `up`
  // distinct fractional offsets occur, so the tap set is precomputed per
  // phase.
  struct Phase {
    std::int64_t qmin;
    std::vector<double> taps;
  };
  std::vector<Phase> phases(static_cast<std::size_t>(up));
  for (std::int64_t p = 0; p < up; ++p) {
    const double frac = static_cast<double>(p) / static_cast<double>(up);
    const auto qmin = static_cast<std::int64_t>(std::ceil(frac - half_width));
    const auto qmax = static_cast<std::int64_t>(std::floor(frac + half_width));
    Phase ph;
    ph.qmin = qmin;
    ph.taps.reserve(static_cast<std::size_t>(qmax - qmin + 1));
    for (std::int64_t q = qmin; q <= qmax; ++q) {
      const double u = frac - static_cast<double>(q);
      const double window_arg = u / half_width;
      const double win =
          bessel_i0(kKaiserBeta * std::sqrt(std::max(0.0, 1.0 - window_arg * window_arg))) /
          i0_beta;
      ph.taps.push_back(cutoff * sinc(cutoff * u) * win);
    }
    phases[static_cast<std::size_t>(p)] = std::move(ph);
  }

  const auto in_len = static_cast<std::int64_t>(w.samples.size());
  const auto out_len = static_cast<std::int64_t>(
      std::llround(static_cast<double>(in_len) * ratio));
  Waveform out;
  out.sample_rate = target_rate;
  out.samples.assign(static_cast<std::size_t>(std::max<std::int64_t>(out_len, 0)), 0.0);

  for (std::int64_t m = 0; m < out_len; ++m) {
    const std::int64_t num = m * down;
    const std::int64_t base = num / up;
    const auto& ph = phases[static_cast<std::size_t>(num % up)];
    double acc = 0.0;
    const auto ntaps = static_cast<std::int64_t>(ph.taps.size());
    for (std::int64_t j = 0; j < ntaps; ++j) {
      const std::int64_t n = base + ph.qmin + j;
      if (n < 0 || n >= in_len) continue;
      acc += w.samples[static_cast<std::size_t>(n)] * ph.taps[static_cast<std::size_t>(j)];
    }
    out.samples[static_cast<std::size_t>(m)] = acc;
  }
  return out;
}

Waveform synth_signal(SignalKind kind, double duration_s, int sample_rate,
                      std::uint64_t seed) {
  if (duration_s <= 0.0) {
    throw ValueError("synth_signal: duration must be positive");
  }
  if (sample_rate <= 0) {
    throw ValueError("synth_signal: sample_rate must be positive");
  }
  const auto n = static_cast<std::size_t>(
      std::llround(duration_s * static_cast<double>(sample_rate)));
  Waveform w;
  w.sample_rate = sample_rate;
  w.samples.resize(std::max<std::size_t>(n, 1));
  Rng rng(seed);

  switch (kind) {
    case SignalKind::kSine: {
      const double f0 = 440.0;
      const double phase = rng.uniform(0.0, 2.0 * std::numbers::pi);
      const double step = 2.0 * std::numbers::pi * f0 / sample_rate;
      for (std::size_t i = 0; i < w.samples.size(); ++i) {
        w.samples[i] = 0.5 * std::sin(step * static_cast<double>(i) + phase);
      }
      break;
    }
    case SignalKind::kWhiteNoise: {
      for (double& s : w.samples) s = rng.gauss();
      scale_to_rms(w.samples, 0.1);
      break;
    }
    case SignalKind::kPinkNoise: {
      PinkFilter pink;
      for (double& s : w.samples) s = pink.step(rng.gauss());
      scale_to_rms(w.samples, 0.1);
      break;
    }
    case SignalKind::kSpeechLikeAmNoise: {
      // Pink noise with a raised-cosine 4 Hz envelope: a crude syllabic
      // rhythm whose troughs give the STOI VAD something to discard.
      PinkFilter pink;
      const double env_phase = rng.uniform(0.0, 2.0 * std::numbers::pi);
      const double env_step = 2.0 * std::numbers::pi * 4.0 / sample_rate;
      for (std::size_t i = 0; i < w.samples.size(); ++i) {
        const double env =
            0.5 * (1.0 - std::cos(env_step * static_cast<double>(i) + env_phase));
        w.samples[i] = env * pink.step(rng.gauss());
      }
      scale_to_rms(w.samples, 0.1);
      break;
    }
  }
  return w;
}

}  // namespace squim
