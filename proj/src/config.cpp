#include "squim/config.hpp"

#include <fstream>

#include "squim/errors.hpp"

namespace squim {

namespace {

std::string trim(const std::string& s) {
  const auto begin = s.find_first_not_of(" \t\r");
  if (begin == std::string::npos) return "";
  const auto end = s.find_last_not_of(" \t\r");
  return s.substr(begin, end - begin + 1);
}

int to_int(const std::string& key, const std::string& v) {
  try {
    std::size_t pos = 0;
    const int x = std::stoi(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return x;
  } catch (const std::exception&) {
    throw ConfigError("config: key '" + key + "' expects an integer, got '" + v + "'");
  }
}

double to_double(const std::string& key, const std::string& v) {
  try {
    std::size_t pos = 0;
    const double x = std::stod(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return x;
  } catch (const std::exception&) {
    throw ConfigError("config: key '" + key + "' expects a number, got '" + v + "'");
  }
}

}  // namespace

std::map<std::string, std::string> parse_config_file(
    const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw ConfigError("cannot open config file " + path.string());
  }
  std::map<std::string, std::string> entries;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    const std::string t = trim(line);
    if (t.empty()) continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(path.string() + ":" + std::to_string(lineno) +
                        ": expected 'key = value'");
    }
    const std::string key = trim(t.substr(0, eq));
    const std::string value = trim(t.substr(eq + 1));
    if (key.empty() || value.empty()) {
      throw ConfigError(path.string() + ":" + std::to_string(lineno) +
                        ": empty key or value");
    }
    if (!entries.emplace(key, value).second) {
      throw ConfigError(path.string() + ": duplicate key '" + key + "'");
    }
  }
  return entries;
}

void apply_config(const std::map<std::string, std::string>& entries,
                  ModelConfig* model, LossWeights* weights, TrainHyper* hyper) {
  for (const auto& [key, value] : entries) {
    if (key == "N") model->N = to_int(key, value);
    else if (key == "P") model->P = to_int(key, value);
    else if (key == "R") model->R = to_int(key, value);
    else if (key == "h") model->h = to_int(key, value);
    else if (key == "d") model->d = to_int(key, value);
    else if (key == "d1") model->d1 = to_int(key, value);
    else if (key == "num_dprnn_blocks") model->num_dprnn_blocks = to_int(key, value);
    else if (key == "blstm_hidden") model->blstm_hidden = to_int(key, value);
    else if (key == "w0") weights->w0 = to_double(key, value);
    else if (key == "w1") weights->w1 = to_double(key, value);
    else if (key == "w2") weights->w2 = to_double(key, value);
    else if (key == "w3") weights->w3 = to_double(key, value);
    else if (key == "lr") hyper->lr = to_double(key, value);
    else if (key == "batch") hyper->batch = to_int(key, value);
    else if (key == "epochs") hyper->epochs = to_int(key, value);
    else if (key == "clip") hyper->clip = to_double(key, value);
    else if (key == "seed") hyper->seed = static_cast<std::uint64_t>(to_int(key, value));
    else if (key == "loss_kind") {
      if (value == "mae") hyper->loss_kind = LossKind::kMae;
      else if (value == "mse") hyper->loss_kind = LossKind::kMse;
      else throw ConfigError("config: loss_kind must be 'mae' or 'mse', got '" + value + "'");
    } else {
      throw ConfigError("config: unknown key '" + key + "'");
    }
  }
}

}  // namespace squim
