#pragma once

#include <filesystem>
#include <vector>

namespace squim {

// Mono time-domain signal. Samples are dimensionless amplitudes, nominally in
// [-1, 1], stored as doubles regardless of the on-disk encoding.
struct Waveform {
  std::vector<double> samples;
  int sample_rate = 16000;

  std::size_t length() const { return samples.size(); }
  double duration_s() const {
    return static_cast<double>(samples.size()) / sample_rate;
  }
};

// Throws ValueError unless all samples are finite, sample_rate > 0 and the
// signal has at least one sample.
void validate(const Waveform& w);

// Reads a mono RIFF/WAVE file. 16-bit PCM is scaled by 1/32768 into [-1, 1);
// 32-bit IEEE float passes through unchanged.
Waveform load_wav(const std::filesystem::path& path);

// Writes a 32-bit IEEE float mono WAV, little-endian. load_wav(save_wav(w))
// reproduces the samples bit-exactly whenever they are float32-representable.
void save_wav(const Waveform& w, const std::filesystem::path& path);

}  // namespace squim
