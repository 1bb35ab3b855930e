#pragma once

#include <filesystem>
#include <map>
#include <string>

#include "squim/model.hpp"
#include "squim/train.hpp"

namespace squim {

// Flat "key = value" file; '#' starts a comment. Keys mirror the ModelConfig,
// LossWeights and TrainHyper field names exactly (N, P, R, h, d, d1,
// num_dprnn_blocks, blstm_hidden, w0..w3, lr, batch, epochs, clip, seed,
// loss_kind). Unknown keys are rejected.
std::map<std::string, std::string> parse_config_file(
    const std::filesystem::path& path);

void apply_config(const std::map<std::string, std::string>& entries,
                  ModelConfig* model, LossWeights* weights, TrainHyper* hyper);

}  // namespace squim
