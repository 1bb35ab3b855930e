#pragma once

#include <cstdint>
#include <filesystem>
#include <map>

#include "squim/model.hpp"

namespace squim {

// Model checkpoint: magic "SQMC", u32 version, the named integer config
// fields, then each parameter as name + dims + row-major float32 payload.
// All integers little-endian; parameters sorted by name.
void save_checkpoint(const std::filesystem::path& path, const SquimNet& net);
SquimNet load_checkpoint(const std::filesystem::path& path);

// Full-precision training state ("SQTS"): float64 parameters plus Adam
// moments and counters. The float32 model checkpoint cannot support
// bit-exact resume, so interrupted training restarts from this file instead.
struct TrainState {
  ModelConfig cfg;
  std::int64_t adam_step = 0;
  std::int64_t next_epoch = 0;
  std::map<std::string, std::vector<double>> values;
  std::map<std::string, nn::ParamStore::Moments> moments;
};

void save_train_state(const std::filesystem::path& path, const SquimNet& net,
                      std::int64_t next_epoch);
// Rebuilds the network and optimizer state exactly as saved.
SquimNet load_train_state(const std::filesystem::path& path,
                          std::int64_t* next_epoch);

}  // namespace squim
