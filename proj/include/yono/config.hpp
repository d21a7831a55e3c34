#pragma once

#include <cstdint>
#include <fstream>
#include <istream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "yono/datasets.hpp"
#include "yono/trainer.hpp"

namespace yono {

/// One experiment description: dataset source, stream shape, trainer
/// settings, and the (mode, seed) lists to run.
struct RunConfig {
  std::string dataset_source = "blobs";  // "blobs" | "csv"
  std::string csv_path;
  SyntheticBlobSpec blobs;

  int phases = 5;
  int base_classes = 0;  // 0 = zero-base even split
  std::uint64_t order_seed = 11;

  TrainerConfig trainer;  // mode and seed overridden per run

  std::vector<Mode> modes{Mode::yono, Mode::yono_plus};
  std::vector<std::uint64_t> seeds{1};
  std::string output_dir = "out";

  Dataset load_dataset() const {
    if (dataset_source == "blobs") return generate_blobs(blobs);
    if (dataset_source == "csv") return load_csv(csv_path, blobs.input_dim);
    throw ConfigError("dataset.source must be 'blobs' or 'csv', got '" + dataset_source + "'");
  }

  TaskStream build_stream() const { return split_stream(load_dataset(), phases, base_classes, order_seed); }
};

namespace detail {

inline std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

template <class T>
T parse_number(const std::string& key, const std::string& value);

template <>
inline double parse_number<double>(const std::string& key, const std::string& value) {
  try {
    std::size_t pos = 0;
    const double v = std::stod(value, &pos);
    if (pos != value.size()) throw std::invalid_argument("trailing junk");
    return v;
  } catch (const std::exception&) {
    throw ConfigError("config key '" + key + "': expected a number, got '" + value + "'");
  }
}

template <>
inline long long parse_number<long long>(const std::string& key, const std::string& value) {
  try {
    std::size_t pos = 0;
    const long long v = std::stoll(value, &pos);
    if (pos != value.size()) throw std::invalid_argument("trailing junk");
    return v;
  } catch (const std::exception&) {
    throw ConfigError("config key '" + key + "': expected an integer, got '" + value + "'");
  }
}

template <>
inline std::uint64_t parse_number<std::uint64_t>(const std::string& key,
                                                 const std::string& value) {
  try {
    std::size_t pos = 0;
    const unsigned long long v = std::stoull(value, &pos);
    if (pos != value.size()) throw std::invalid_argument("trailing junk");
    return v;
  } catch (const std::exception&) {
    throw ConfigError("config key '" + key + "': expected an unsigned integer, got '" + value +
                      "'");
  }
}

inline std::vector<std::string> split_list(const std::string& value) {
  std::vector<std::string> out;
  std::stringstream ss(value);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

}  // namespace detail

/// Parses the flat `section.key = value` text form. '#' starts a comment.
inline std::vector<std::pair<std::string, std::string>> parse_config_text(std::istream& is) {
  std::vector<std::pair<std::string, std::string>> entries;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = detail::trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("config line " + std::to_string(lineno) + ": expected 'key = value'");
    }
    const std::string key = detail::trim(line.substr(0, eq));
    const std::string value = detail::trim(line.substr(eq + 1));
    if (key.empty()) {
      throw ConfigError("config line " + std::to_string(lineno) + ": empty key");
    }
    entries.emplace_back(key, value);
  }
  return entries;
}

/// Applies one typed key. Unknown keys are rejected by name.
inline void apply_config_entry(RunConfig& cfg, const std::string& key,
                               const std::string& value) {
  using detail::parse_number;
  auto as_int = [&](long long lo, long long hi) {
    const long long v = parse_number<long long>(key, value);
    if (v < lo || v > hi) {
      throw ConfigError("config key '" + key + "': value " + value + " out of range");
    }
    return v;
  };
  auto as_index_list = [&] {
    std::vector<Index> dims;
    for (const auto& item : detail::split_list(value)) {
      dims.push_back(static_cast<Index>(parse_number<long long>(key, item)));
    }
    return dims;
  };

  if (key == "dataset.source") {
    if (value != "blobs" && value != "csv") {
      throw ConfigError("config key 'dataset.source': expected blobs or csv, got '" + value +
                        "'");
    }
    cfg.dataset_source = value;
  } else if (key == "dataset.csv_path") {
    cfg.csv_path = value;
  } else if (key == "dataset.classes") {
    cfg.blobs.n_classes = static_cast<int>(as_int(1, 1 << 20));
  } else if (key == "dataset.samples_per_class") {
    cfg.blobs.samples_per_class = static_cast<int>(as_int(1, 1 << 30));
  } else if (key == "dataset.input_dim") {
    cfg.blobs.input_dim = static_cast<Index>(as_int(1, 1 << 20));
  } else if (key == "dataset.separation") {
    cfg.blobs.center_separation = parse_number<double>(key, value);
  } else if (key == "dataset.std") {
    cfg.blobs.within_class_std = parse_number<double>(key, value);
  } else if (key == "dataset.seed") {
    cfg.blobs.seed = parse_number<std::uint64_t>(key, value);
  } else if (key == "stream.phases") {
    cfg.phases = static_cast<int>(as_int(1, 1 << 20));
  } else if (key == "stream.base_classes") {
    cfg.base_classes = static_cast<int>(as_int(0, 1 << 20));
  } else if (key == "stream.order_seed") {
    cfg.order_seed = parse_number<std::uint64_t>(key, value);
  } else if (key == "trainer.epochs") {
    cfg.trainer.epochs = static_cast<int>(as_int(1, 1 << 20));
  } else if (key == "trainer.batch_size") {
    cfg.trainer.batch_size = static_cast<Index>(as_int(1, 1 << 30));
  } else if (key == "trainer.mean_shift_iterations") {
    cfg.trainer.mean_shift_iterations = static_cast<int>(as_int(1, 1 << 20));
  } else if (key == "trainer.lambda") {
    cfg.trainer.lambda = parse_number<double>(key, value);
  } else if (key == "trainer.margin") {
    cfg.trainer.arcface.margin = parse_number<double>(key, value);
  } else if (key == "trainer.temperature") {
    cfg.trainer.arcface.temperature = parse_number<double>(key, value);
  } else if (key == "trainer.beta") {
    cfg.trainer.beta = parse_number<double>(key, value);
  } else if (key == "trainer.kappa") {
    cfg.trainer.kappa = parse_number<double>(key, value);
  } else if (key == "trainer.learning_rate") {
    cfg.trainer.optimizer.learning_rate = parse_number<double>(key, value);
  } else if (key == "trainer.frozen_rate") {
    cfg.trainer.optimizer.frozen_rate = parse_number<double>(key, value);
  } else if (key == "trainer.lr_decay") {
    cfg.trainer.optimizer.lr_decay = parse_number<double>(key, value);
  } else if (key == "trainer.lr_decay_every") {
    cfg.trainer.optimizer.lr_decay_every = static_cast<int>(as_int(1, 1 << 20));
  } else if (key == "trainer.momentum") {
    cfg.trainer.optimizer.momentum = parse_number<double>(key, value);
  } else if (key == "trainer.weight_prototype") {
    cfg.trainer.weights.prototype = parse_number<double>(key, value);
  } else if (key == "trainer.weight_classifier") {
    cfg.trainer.weights.classifier = parse_number<double>(key, value);
  } else if (key == "trainer.weight_distillation") {
    cfg.trainer.weights.distillation = parse_number<double>(key, value);
  } else if (key == "trainer.hidden_dims") {
    cfg.trainer.hidden_dims = as_index_list();
  } else if (key == "trainer.embedding_dim") {
    cfg.trainer.embedding_dim = static_cast<Index>(as_int(2, 1 << 20));
  } else if (key == "run.modes") {
    cfg.modes.clear();
    for (const auto& item : detail::split_list(value)) {
      try {
        cfg.modes.push_back(mode_from_string(item));
      } catch (const ConfigError&) {
        throw ConfigError("config key 'run.modes': unknown mode '" + item + "'");
      }
    }
    if (cfg.modes.empty()) throw ConfigError("config key 'run.modes': empty list");
  } else if (key == "run.seeds") {
    cfg.seeds.clear();
    for (const auto& item : detail::split_list(value)) {
      cfg.seeds.push_back(parse_number<std::uint64_t>(key, item));
    }
    if (cfg.seeds.empty()) throw ConfigError("config key 'run.seeds': empty list");
  } else if (key == "output.dir") {
    cfg.output_dir = value;
  } else {
    throw ConfigError("unknown config key: '" + key + "'");
  }
}

inline RunConfig load_run_config(const std::string& path,
                                 const std::vector<std::string>& overrides = {}) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot open config file: " + path);
  RunConfig cfg;
  for (const auto& [key, value] : parse_config_text(is)) {
    apply_config_entry(cfg, key, value);
  }
  for (const auto& kv : overrides) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("--set expects key=value, got '" + kv + "'");
    }
    apply_config_entry(cfg, detail::trim(kv.substr(0, eq)), detail::trim(kv.substr(eq + 1)));
  }
  return cfg;
}

}  // namespace yono
