#include "squim/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <vector>

#include "squim/errors.hpp"

namespace squim {

namespace {

constexpr std::uint32_t kCheckpointVersion = 1;
constexpr std::uint32_t kTrainStateVersion = 1;

struct Writer {
  std::ofstream out;
  explicit Writer(const std::filesystem::path& path)
      : out(path, std::ios::binary) {
    if (!out) throw IoError("cannot write " + path.string());
  }
  void bytes(const void* p, std::size_t n) {
    out.write(static_cast<const char*>(p), static_cast<std::streamsize>(n));
  }
  void u32(std::uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v & 0xff),
                          static_cast<unsigned char>((v >> 8) & 0xff),
                          static_cast<unsigned char>((v >> 16) & 0xff),
                          static_cast<unsigned char>((v >> 24) & 0xff)};
    bytes(b, 4);
  }
  void u64(std::uint64_t v) {
    u32(static_cast<std::uint32_t>(v & 0xffffffffu));
    u32(static_cast<std::uint32_t>(v >> 32));
  }
  void f32(float v) {
    std::uint32_t u;
    std::memcpy(&u, &v, 4);
    u32(u);
  }
  void f64(double v) {
    std::uint64_t u;
    std::memcpy(&u, &v, 8);
    u64(u);
  }
  void str(const std::string& s) {
    u32(static_cast<std::uint32_t>(s.size()));
    bytes(s.data(), s.size());
  }
};

struct Reader {
  std::ifstream in;
  std::filesystem::path path;
  explicit Reader(const std::filesystem::path& p) : in(p, std::ios::binary), path(p) {
    if (!in) throw IoError("cannot open " + p.string());
  }
  void bytes(void* p, std::size_t n) {
    in.read(static_cast<char*>(p), static_cast<std::streamsize>(n));
    if (in.gcount() != static_cast<std::streamsize>(n)) {
      throw IoError("truncated file " + path.string());
    }
  }
  bool at_eof() { return in.peek() == std::ifstream::traits_type::eof(); }
  std::uint32_t u32() {
    unsigned char b[4];
    bytes(b, 4);
    return static_cast<std::uint32_t>(b[0]) | static_cast<std::uint32_t>(b[1]) << 8 |
           static_cast<std::uint32_t>(b[2]) << 16 | static_cast<std::uint32_t>(b[3]) << 24;
  }
  std::uint64_t u64() {
    const std::uint64_t lo = u32();
    return lo | static_cast<std::uint64_t>(u32()) << 32;
  }
  float f32() {
    const std::uint32_t u = u32();
    float v;
    std::memcpy(&v, &u, 4);
    return v;
  }
  double f64() {
    const std::uint64_t u = u64();
    double v;
    std::memcpy(&v, &u, 8);
    return v;
  }
  std::string str() {
    const std::uint32_t n = u32();
    if (n > 4096) throw IoError("implausible string length in " + path.string());
    std::string s(n, '\0');
    bytes(s.data(), n);
    return s;
  }
};

const std::vector<std::pair<const char*, int ModelConfig::*>>& config_fields() {
  static const std::vector<std::pair<const char*, int ModelConfig::*>> fields = {
      {"N", &ModelConfig::N},
      {"P", &ModelConfig::P},
      {"R", &ModelConfig::R},
      {"h", &ModelConfig::h},
      {"d", &ModelConfig::d},
      {"d1", &ModelConfig::d1},
      {"num_dprnn_blocks", &ModelConfig::num_dprnn_blocks},
      {"blstm_hidden", &ModelConfig::blstm_hidden},
  };
  return fields;
}

void write_config(Writer& w, const ModelConfig& cfg) {
  const auto& fields = config_fields();
  w.u32(static_cast<std::uint32_t>(fields.size()));
  for (const auto& [name, member] : fields) {
    w.str(name);
    w.u32(static_cast<std::uint32_t>(cfg.*member));
  }
}

ModelConfig read_config(Reader& r) {
  ModelConfig cfg;
  const std::uint32_t n = r.u32();
  const auto& fields = config_fields();
  for (std::uint32_t i = 0; i < n; ++i) {
    const std::string name = r.str();
    const std::uint32_t value = r.u32();
    bool matched = false;
    for (const auto& [fname, member] : fields) {
      if (name == fname) {
        cfg.*member = static_cast<int>(value);
        matched = true;
        break;
      }
    }
    if (!matched) {
      throw IoError("unknown config field '" + name + "' in " + r.path.string());
    }
  }
  return cfg;
}

void check_magic(Reader& r, const char* expected) {
  char magic[4];
  r.bytes(magic, 4);
  if (std::memcmp(magic, expected, 4) != 0) {
    throw IoError(r.path.string() + ": bad magic, expected " + expected);
  }
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const SquimNet& net) {
  Writer w(path);
  w.bytes("SQMC", 4);
  w.u32(kCheckpointVersion);
  write_config(w, net.config());
  for (const auto& [name, tensor] : net.params()) {
    w.str(name);
    const auto& shape = tensor.shape();
    w.u32(static_cast<std::uint32_t>(shape.size()));
    for (int dim : shape) w.u32(static_cast<std::uint32_t>(dim));
    for (double v : tensor.value()) w.f32(static_cast<float>(v));
  }
  if (!w.out) throw IoError("write failed for " + path.string());
}

SquimNet load_checkpoint(const std::filesystem::path& path) {
  Reader r(path);
  check_magic(r, "SQMC");
  const std::uint32_t version = r.u32();
  if (version != kCheckpointVersion) {
    throw IoError(path.string() + ": unsupported checkpoint version " +
                  std::to_string(version));
  }
  const ModelConfig cfg = read_config(r);
  SquimNet net = SquimNet::init(cfg, 0);

  std::size_t loaded = 0;
  while (!r.at_eof()) {
    const std::string name = r.str();
    const std::uint32_t rank = r.u32();
    ad::Shape shape;
    std::int64_t count = 1;
    for (std::uint32_t i = 0; i < rank; ++i) {
      const int dim = static_cast<int>(r.u32());
      shape.push_back(dim);
      count *= dim;
    }
    if (!net.params().has(name)) {
      throw IoError(path.string() + ": unknown parameter '" + name + "'");
    }
    Tensor t = net.params().at(name);
    if (t.shape() != shape) {
      throw IoError(path.string() + ": shape mismatch for '" + name + "'");
    }
    auto& vals = t.mutable_value();
    for (std::int64_t i = 0; i < count; ++i) {
      vals[static_cast<std::size_t>(i)] = static_cast<double>(r.f32());
    }
    ++loaded;
  }
  if (loaded != net.params().count()) {
    throw IoError(path.string() + ": checkpoint holds " + std::to_string(loaded) +
                  " parameters, model expects " + std::to_string(net.params().count()));
  }
  return net;
}

void save_train_state(const std::filesystem::path& path, const SquimNet& net,
                      std::int64_t next_epoch) {
  Writer w(path);
  w.bytes("SQTS", 4);
  w.u32(kTrainStateVersion);
  write_config(w, net.config());
  w.u64(static_cast<std::uint64_t>(net.params().step_count()));
  w.u64(static_cast<std::uint64_t>(next_epoch));
  const auto& moments = net.params().moments();
  for (const auto& [name, tensor] : net.params()) {
    w.str(name);
    const auto& shape = tensor.shape();
    w.u32(static_cast<std::uint32_t>(shape.size()));
    for (int dim : shape) w.u32(static_cast<std::uint32_t>(dim));
    for (double v : tensor.value()) w.f64(v);
    const auto& mo = moments.at(name);
    for (double v : mo.m) w.f64(v);
    for (double v : mo.v) w.f64(v);
  }
  if (!w.out) throw IoError("write failed for " + path.string());
}

SquimNet load_train_state(const std::filesystem::path& path,
                          std::int64_t* next_epoch) {
  Reader r(path);
  check_magic(r, "SQTS");
  const std::uint32_t version = r.u32();
  if (version != kTrainStateVersion) {
    throw IoError(path.string() + ": unsupported train-state version " +
                  std::to_string(version));
  }
  const ModelConfig cfg = read_config(r);
  const auto step = static_cast<std::int64_t>(r.u64());
  const auto epoch = static_cast<std::int64_t>(r.u64());
  SquimNet net = SquimNet::init(cfg, 0);

  std::map<std::string, nn::ParamStore::Moments> moments;
  std::size_t loaded = 0;
  while (!r.at_eof()) {
    const std::string name = r.str();
    const std::uint32_t rank = r.u32();
    ad::Shape shape;
    std::int64_t count = 1;
    for (std::uint32_t i = 0; i < rank; ++i) {
      const int dim = static_cast<int>(r.u32());
      shape.push_back(dim);
      count *= dim;
    }
    if (!net.params().has(name)) {
      throw IoError(path.string() + ": unknown parameter '" + name + "'");
    }
    Tensor t = net.params().at(name);
    if (t.shape() != shape) {
      throw IoError(path.string() + ": shape mismatch for '" + name + "'");
    }
    auto& vals = t.mutable_value();
    nn::ParamStore::Moments mo;
    mo.m.resize(static_cast<std::size_t>(count));
    mo.v.resize(static_cast<std::size_t>(count));
    for (std::int64_t i = 0; i < count; ++i) vals[static_cast<std::size_t>(i)] = r.f64();
    for (std::int64_t i = 0; i < count; ++i) mo.m[static_cast<std::size_t>(i)] = r.f64();
    for (std::int64_t i = 0; i < count; ++i) mo.v[static_cast<std::size_t>(i)] = r.f64();
    moments.emplace(name, std::move(mo));
    ++loaded;
  }
  if (loaded != net.params().count()) {
    throw IoError(path.string() + ": incomplete training state");
  }
  net.params().restore_moments(std::move(moments), step);
  if (next_epoch) *next_epoch = epoch;
  return net;
}

}  // namespace squim
