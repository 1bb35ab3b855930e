#include "squim/dataset.hpp"

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <fstream>
#include <mutex>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "squim/errors.hpp"
#include "squim/rng.hpp"
#include "squim/signal.hpp"

namespace squim {

namespace {

constexpr int kRate = 16000;

std::string format_value(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

void quantize_f32(Waveform& w) {
  for (double& s : w.samples) s = static_cast<double>(static_cast<float>(s));
}

std::vector<std::filesystem::path> sorted_wavs(const std::filesystem::path& dir) {
  std::vector<std::filesystem::path> files;
  for (const auto& e : std::filesystem::directory_iterator(dir)) {
    if (e.is_regular_file() && e.path().extension() == ".wav") {
      files.push_back(e.path());
    }
  }
  std::sort(files.begin(), files.end());
  return files;
}

LabeledSample synth_one(int index, double duration_s, double snr_lo,
                        double snr_hi, std::uint64_t seed,
                        const std::vector<std::filesystem::path>& clean_files) {
  Rng rng(derive_seed(seed, static_cast<std::uint64_t>(index)));

  Waveform clean;
  if (!clean_files.empty()) {
    const auto& path = clean_files[static_cast<std::size_t>(index) % clean_files.size()];
    clean = load_wav(path);
    if (clean.sample_rate != kRate) clean = resample(clean, kRate);
    const auto want = static_cast<std::size_t>(duration_s * kRate);
    if (clean.samples.size() < want) {
      throw ValueError("clean file too short for requested duration: " + path.string());
    }
    clean.samples.resize(want);
    rng.next_u64();  // keep the draw sequence aligned with the synthetic path
  } else {
    clean = synth_signal(SignalKind::kSpeechLikeAmNoise, duration_s, kRate,
                         rng.next_u64());
  }

  const SignalKind noise_kind =
      rng.below(2) == 0 ? SignalKind::kWhiteNoise : SignalKind::kPinkNoise;
  const double margin_s = 0.25;  // slack so the cut offset can vary
  Waveform noise =
      synth_signal(noise_kind, duration_s + margin_s, kRate, rng.next_u64());
  const std::size_t slack = noise.samples.size() - clean.samples.size();
  const std::size_t offset = static_cast<std::size_t>(rng.below(slack + 1));
  const double snr_db = rng.uniform(snr_lo, snr_hi);

  // Cut the noise, then remove its component along the clean signal. With an
  // orthogonal noise term the mixture's SI-SDR equals the mixing SNR instead
  // of wandering by several dB whenever the two 1/f spectra happen to
  // correlate.
  Waveform cut;
  cut.sample_rate = noise.sample_rate;
  cut.samples.assign(noise.samples.begin() + static_cast<std::ptrdiff_t>(offset),
                     noise.samples.begin() +
                         static_cast<std::ptrdiff_t>(offset + clean.samples.size()));
  double dot = 0.0, clean_energy = 0.0;
  for (std::size_t i = 0; i < cut.samples.size(); ++i) {
    dot += cut.samples[i] * clean.samples[i];
    clean_energy += clean.samples[i] * clean.samples[i];
  }
  const double coef = dot / clean_energy;
  for (std::size_t i = 0; i < cut.samples.size(); ++i) {
    cut.samples[i] -= coef * clean.samples[i];
  }

  LabeledSample sample;
  sample.degraded = mix_at_snr(clean, cut, snr_db);
  sample.clean = std::move(clean);
  quantize_f32(sample.degraded);
  quantize_f32(sample.clean);
  sample.snr_db = snr_db;
  sample.labels.stoi = stoi(sample.degraded, sample.clean);
  sample.labels.si_sdr = si_sdr(sample.degraded, sample.clean);

  char id[32];
  std::snprintf(id, sizeof(id), "sample_%04d", index);
  sample.id = id;
  return sample;
}

}  // namespace

std::vector<LabeledSample> synth_dataset(int n, double duration_s,
                                         double snr_lo, double snr_hi,
                                         std::uint64_t seed,
                                         const std::filesystem::path& clean_dir,
                                         int jobs) {
  if (n < 1) {
    throw ValueError("synth_dataset: need n >= 1");
  }
  if (snr_lo > snr_hi) {
    throw ValueError("synth_dataset: snr_lo > snr_hi");
  }
  std::vector<std::filesystem::path> clean_files;
  if (!clean_dir.empty()) {
    if (!std::filesystem::is_directory(clean_dir)) {
      throw IoError("clean directory does not exist: " + clean_dir.string());
    }
    clean_files = sorted_wavs(clean_dir);
    if (clean_files.empty()) {
      throw ValueError("clean directory holds no .wav files: " + clean_dir.string());
    }
  }

  std::vector<LabeledSample> out(static_cast<std::size_t>(n));
  const int workers = std::max(1, std::min(jobs, n));
  if (workers == 1) {
    for (int i = 0; i < n; ++i) {
      out[static_cast<std::size_t>(i)] =
          synth_one(i, duration_s, snr_lo, snr_hi, seed, clean_files);
    }
    return out;
  }

  std::atomic<int> next{0};
  std::exception_ptr first_error;
  std::mutex error_mutex;
  auto worker = [&] {
    for (;;) {
      const int i = next.fetch_add(1);
      if (i >= n) return;
      try {
        out[static_cast<std::size_t>(i)] =
            synth_one(i, duration_s, snr_lo, snr_hi, seed, clean_files);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!first_error) first_error = std::current_exception();
        return;
      }
    }
  };
  std::vector<std::thread> threads;
  threads.reserve(static_cast<std::size_t>(workers));
  for (int i = 0; i < workers; ++i) threads.emplace_back(worker);
  for (auto& t : threads) t.join();
  if (first_error) std::rethrow_exception(first_error);
  return out;
}

void save_dataset(const std::filesystem::path& dir,
                  const std::vector<LabeledSample>& samples) {
  std::filesystem::create_directories(dir);
  std::ofstream labels(dir / "labels.tsv");
  if (!labels) {
    throw IoError("cannot write " + (dir / "labels.tsv").string());
  }
  labels << "id\tstoi\tsi_sdr\tsnr_db\n";
  nlohmann::ordered_json manifest;
  manifest["n"] = samples.size();
  manifest["sample_rate"] = samples.empty() ? 16000 : samples[0].degraded.sample_rate;
  auto ids = nlohmann::json::array();
  for (const auto& s : samples) {
    save_wav(s.degraded, dir / (s.id + "_degraded.wav"));
    save_wav(s.clean, dir / (s.id + "_clean.wav"));
    labels << s.id << '\t' << format_value(s.labels.stoi) << '\t'
           << format_value(s.labels.si_sdr) << '\t' << format_value(s.snr_db)
           << '\n';
    ids.push_back(s.id);
  }
  manifest["ids"] = ids;
  std::ofstream mf(dir / "manifest.json");
  if (!mf) {
    throw IoError("cannot write " + (dir / "manifest.json").string());
  }
  mf << manifest.dump(2) << '\n';
}

std::vector<LabeledSample> load_dataset(const std::filesystem::path& dir) {
  std::ifstream labels(dir / "labels.tsv");
  if (!labels) {
    throw IoError("cannot open " + (dir / "labels.tsv").string());
  }
  std::string line;
  if (!std::getline(labels, line) || line != "id\tstoi\tsi_sdr\tsnr_db") {
    throw ValueError("labels.tsv: missing or malformed header");
  }
  std::vector<LabeledSample> out;
  while (std::getline(labels, line)) {
    if (line.empty()) continue;
    std::istringstream ss(line);
    LabeledSample s;
    std::string stoi_s, sisdr_s, snr_s;
    if (!std::getline(ss, s.id, '\t') || !std::getline(ss, stoi_s, '\t') ||
        !std::getline(ss, sisdr_s, '\t') || !std::getline(ss, snr_s)) {
      throw ValueError("labels.tsv: malformed row: " + line);
    }
    s.labels.stoi = std::stod(stoi_s);
    s.labels.si_sdr = std::stod(sisdr_s);
    s.snr_db = std::stod(snr_s);
    s.degraded = load_wav(dir / (s.id + "_degraded.wav"));
    s.clean = load_wav(dir / (s.id + "_clean.wav"));
    out.push_back(std::move(s));
  }
  if (out.empty()) {
    throw ValueError("labels.tsv: no samples listed");
  }
  return out;
}

std::map<std::string, double> load_label_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw IoError("cannot open " + path.string());
  }
  std::string line;
  if (!std::getline(in, line) || line != "id\tpesq") {
    throw ValueError(path.string() + ": expected header \"id\\tpesq\"");
  }
  std::map<std::string, double> out;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos) {
      throw ValueError(path.string() + ": malformed row: " + line);
    }
    const std::string id = line.substr(0, tab);
    const double score = std::stod(line.substr(tab + 1));
    if (score < 1.0 || score > 4.64) {
      throw ValueError(path.string() + ": pesq score " + format_value(score) +
                       " for " + id + " outside [1.0, 4.64]");
    }
    if (!out.emplace(id, score).second) {
      throw ValueError(path.string() + ": duplicate id " + id);
    }
  }
  return out;
}

void attach_pesq_labels(std::vector<LabeledSample>& samples,
                        const std::map<std::string, double>& pesq_by_id) {
  for (auto& s : samples) {
    auto it = pesq_by_id.find(s.id);
    if (it != pesq_by_id.end()) {
      s.labels.pesq = it->second;
    }
  }
}

}  // namespace squim
