#include "squim/wav.hpp"

#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>

#include "squim/errors.hpp"

namespace squim {

namespace {

constexpr std::uint16_t kFormatPcm = 1;
constexpr std::uint16_t kFormatIeeeFloat = 3;

std::uint32_t rd_u32(const std::vector<std::uint8_t>& b, std::size_t off) {
  return static_cast<std::uint32_t>(b[off]) |
         static_cast<std::uint32_t>(b[off + 1]) << 8 |
         static_cast<std::uint32_t>(b[off + 2]) << 16 |
         static_cast<std::uint32_t>(b[off + 3]) << 24;
}

std::uint16_t rd_u16(const std::vector<std::uint8_t>& b, std::size_t off) {
  return static_cast<std::uint16_t>(static_cast<std::uint16_t>(b[off]) |
                                    static_cast<std::uint16_t>(b[off + 1])
                                        << 8);
}

void wr_u32(std::vector<std::uint8_t>& b, std::uint32_t v) {
  b.push_back(static_cast<std::uint8_t>(v & 0xff));
  b.push_back(static_cast<std::uint8_t>((v >> 8) & 0xff));
  b.push_back(static_cast<std::uint8_t>((v >> 16) & 0xff));
  b.push_back(static_cast<std::uint8_t>((v >> 24) & 0xff));
}

void wr_u16(std::vector<std::uint8_t>& b, std::uint16_t v) {
  b.push_back(static_cast<std::uint8_t>(v & 0xff));
  b.push_back(static_cast<std::uint8_t>((v >> 8) & 0xff));
}

bool tag_is(const std::vector<std::uint8_t>& b, std::size_t off,
            const char* tag) {
  return std::memcmp(b.data() + off, tag, 4) == 0;
}

}  // namespace

void validate(const Waveform& w) {
  if (w.sample_rate <= 0) {
    throw ValueError("waveform: sample_rate must be positive, got " +
                     std::to_string(w.sample_rate));
  }
  if (w.samples.empty()) {
    throw ValueError("waveform: empty signal");
  }
  for (double s : w.samples) {
    if (!std::isfinite(s)) {
      throw ValueError("waveform: non-finite sample");
    }
  }
}

Waveform load_wav(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw IoError("cannot open " + path.string());
  }
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  if (bytes.size() < 12 || !tag_is(bytes, 0, "RIFF") ||
      !tag_is(bytes, 8, "WAVE")) {
    throw WavFormatError(path.string() + ": not a RIFF/WAVE file");
  }

  bool have_fmt = false;
  std::uint16_t format = 0;
  std::uint16_t channels = 0;
  std::uint16_t bits = 0;
  std::uint32_t rate = 0;
  std::size_t data_off = 0;
  std::size_t data_len = 0;

  std::size_t off = 12;
  while (off + 8 <= bytes.size()) {
    const std::uint32_t chunk_size = rd_u32(bytes, off + 4);
    if (off + 8 + chunk_size > bytes.size()) {
      throw WavFormatError(path.string() + ": truncated chunk");
    }
    if (tag_is(bytes, off, "fmt ")) {
      if (chunk_size < 16) {
        throw WavFormatError(path.string() + ": fmt chunk too small");
      }
      format = rd_u16(bytes, off + 8);
      channels = rd_u16(bytes, off + 10);
      rate = rd_u32(bytes, off + 12);
      bits = rd_u16(bytes, off + 22);
      have_fmt = true;
    } else if (tag_is(bytes, off, "data")) {
      data_off = off + 8;
      data_len = chunk_size;
    }
    off += 8 + chunk_size + (chunk_size & 1);  // chunks are word-aligned
  }

  if (!have_fmt || data_off == 0) {
    throw WavFormatError(path.string() + ": missing fmt or data chunk");
  }
  if (channels != 1) {
    throw MultiChannelError(path.string() + ": multi-channel unsupported (" +
                            std::to_string(channels) + " channels)");
  }
  if (rate == 0) {
    throw WavFormatError(path.string() + ": zero sample rate");
  }

  Waveform w;
  w.sample_rate = static_cast<int>(rate);
  if (format == kFormatPcm && bits == 16) {
    const std::size_t n = data_len / 2;
    w.samples.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      const auto u = rd_u16(bytes, data_off + 2 * i);
      const auto v = static_cast<std::int16_t>(u);
      w.samples[i] = static_cast<double>(v) / 32768.0;
    }
  } else if (format == kFormatIeeeFloat && bits == 32) {
    const std::size_t n = data_len / 4;
    w.samples.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      const std::uint32_t u = rd_u32(bytes, data_off + 4 * i);
      float f;
      std::memcpy(&f, &u, 4);
      w.samples[i] = static_cast<double>(f);
    }
  } else {
    throw UnsupportedEncodingError(
        path.string() + ": unsupported encoding (format=" +
        std::to_string(format) + ", bits=" + std::to_string(bits) +
        "); expected PCM16 or float32");
  }
  validate(w);
  return w;
}

void save_wav(const Waveform& w, const std::filesystem::path& path) {
  validate(w);
  const std::uint32_t data_len = static_cast<std::uint32_t>(4 * w.samples.size());
  std::vector<std::uint8_t> bytes;
  bytes.reserve(44 + data_len);
  for (char c : {'R', 'I', 'F', 'F'}) bytes.push_back(c);
  wr_u32(bytes, 36 + data_len);
  for (char c : {'W', 'A', 'V', 'E'}) bytes.push_back(c);
  for (char c : {'f', 'm', 't', ' '}) bytes.push_back(c);
  wr_u32(bytes, 16);
  wr_u16(bytes, kFormatIeeeFloat);
  wr_u16(bytes, 1);  // mono
  wr_u32(bytes, static_cast<std::uint32_t>(w.sample_rate));
  wr_u32(bytes, static_cast<std::uint32_t>(w.sample_rate) * 4);
  wr_u16(bytes, 4);   // block align
  wr_u16(bytes, 32);  // bits per sample
  for (char c : {'d', 'a', 't', 'a'}) bytes.push_back(c);
  wr_u32(bytes, data_len);
  for (double s : w.samples) {
    const float f = static_cast<float>(s);
    std::uint32_t u;
    std::memcpy(&u, &f, 4);
    wr_u32(bytes, u);
  }

  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw IoError("cannot write " + path.string());
  }
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) {
    throw IoError("write failed for " + path.string());
  }
}

}  // namespace squim
