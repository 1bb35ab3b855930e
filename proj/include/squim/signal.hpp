#pragma once

#include <cstdint>

#include "squim/wav.hpp"

namespace squim {

enum class SignalKind {
  kSine,              // 440 Hz tone, seed-dependent phase
  kWhiteNoise,        // gaussian white noise
  kPinkNoise,         // -3 dB/octave filtered noise
  kSpeechLikeAmNoise  // pink noise with a 4 Hz amplitude envelope
};

// Mean squared amplitude.
double mean_power(const Waveform& w);

// Mixes clean speech with additive noise at the requested SNR:
//   out = clean + g * noise[offset : offset + len(clean)]
//   g   = sqrt(P_clean / (P_noise * 10^(snr_db / 10)))
// where powers are mean squares over the used extent. Noise longer than the
// clean signal is truncated starting at noise_offset (callers wanting a
// randomized cut draw the offset themselves).
Waveform mix_at_snr(const Waveform& clean, const Waveform& noise,
                    double snr_db, std::size_t noise_offset = 0);

// Polyphase windowed-sinc resampler (Kaiser window, beta = 14.77, 64 zero
// crossings per side). Output length is round(T * target / source). Equal
// rates pass the input through bit-identically.
Waveform resample(const Waveform& w, int target_rate);

// Deterministic test-signal synthesis; identical (kind, seed) pairs produce
// identical samples on any platform.
Waveform synth_signal(SignalKind kind, double duration_s, int sample_rate,
                      std::uint64_t seed);

}  // namespace squim
