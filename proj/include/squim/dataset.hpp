#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "squim/metrics.hpp"
#include "squim/wav.hpp"

namespace squim {

// One training/evaluation item: degraded/clean pair plus oracle labels.
// PESQ labels only exist when ingested from a sidecar file.
struct LabeledSample {
  std::string id;
  Waveform degraded;
  Waveform clean;
  MetricTriple labels;
  double snr_db = 0.0;
};

// Synthesizes n labeled samples at 16 kHz: speech-like clean signals (or
// clips from clean_dir when given), white/pink additive noise cut at a random
// offset, SNR uniform in [snr_lo, snr_hi]. Samples are quantized to the
// float32 grid before labeling so that WAV round-trips reproduce the labels
// exactly. Deterministic per seed; jobs > 1 parallelizes across samples
// without changing the result.
std::vector<LabeledSample> synth_dataset(
    int n, double duration_s, double snr_lo, double snr_hi, std::uint64_t seed,
    const std::filesystem::path& clean_dir = {}, int jobs = 1);

// On-disk layout: <id>_degraded.wav, <id>_clean.wav, labels.tsv
// (id, stoi, si_sdr, snr_db) and manifest.json.
void save_dataset(const std::filesystem::path& dir,
                  const std::vector<LabeledSample>& samples);
std::vector<LabeledSample> load_dataset(const std::filesystem::path& dir);

// TSV with header "id<TAB>pesq"; scores must lie in [1.0, 4.64] and ids must
// be unique.
std::map<std::string, double> load_label_file(const std::filesystem::path& path);

// Attaches PESQ labels by id; samples without an entry keep pesq absent.
void attach_pesq_labels(std::vector<LabeledSample>& samples,
                        const std::map<std::string, double>& pesq_by_id);

}  // namespace squim
