#pragma once

#include <cmath>
#include <fstream>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "yono/config.hpp"
#include "yono/trainer.hpp"

namespace yono {

using Json = nlohmann::json;

inline Json config_echo(const RunConfig& cfg) {
  Json j;
  j["dataset"] = {{"source", cfg.dataset_source},
                  {"csv_path", cfg.csv_path},
                  {"classes", cfg.blobs.n_classes},
                  {"samples_per_class", cfg.blobs.samples_per_class},
                  {"input_dim", cfg.blobs.input_dim},
                  {"separation", cfg.blobs.center_separation},
                  {"std", cfg.blobs.within_class_std},
                  {"seed", cfg.blobs.seed}};
  j["stream"] = {{"phases", cfg.phases},
                 {"base_classes", cfg.base_classes},
                 {"order_seed", cfg.order_seed}};
  const auto& t = cfg.trainer;
  j["trainer"] = {{"epochs", t.epochs},
                  {"batch_size", t.batch_size},
                  {"mean_shift_iterations", t.mean_shift_iterations},
                  {"lambda", t.lambda},
                  {"margin", t.arcface.margin},
                  {"temperature", t.arcface.temperature},
                  {"beta", t.beta},
                  {"kappa", t.kappa},
                  {"learning_rate", t.optimizer.learning_rate},
                  {"frozen_rate", t.optimizer.frozen_rate},
                  {"lr_decay", t.optimizer.lr_decay},
                  {"lr_decay_every", t.optimizer.lr_decay_every},
                  {"momentum", t.optimizer.momentum},
                  {"weight_prototype", t.weights.prototype},
                  {"weight_classifier", t.weights.classifier},
                  {"weight_distillation", t.weights.distillation},
                  {"hidden_dims", t.hidden_dims},
                  {"embedding_dim", t.embedding_dim},
                  {"prototype_replay", t.prototype_replay},
                  {"synthesis_replay", t.synthesis_replay},
                  {"distillation", t.distillation},
                  {"interpolation", t.interpolation},
                  {"partial_freeze", t.partial_freeze}};
  return j;
}

inline Json run_record_to_json(const RunRecord& rec, const Json& config) {
  Json j;
  j["mode"] = rec.mode;
  j["seed"] = rec.seed;
  j["config"] = config;
  j["tasks"] = Json::array();
  for (const auto& t : rec.tasks) {
    j["tasks"].push_back({{"task_id", t.task_id},
                          {"classes", t.classes},
                          {"epoch_losses", t.epoch_losses},
                          {"checkpoint", t.checkpoint}});
  }
  j["accuracy_matrix"] = rec.accuracy.rows();
  j["metrics"] = {{"average_accuracy", rec.average_accuracy},
                  {"all_phase_mean_accuracy", rec.all_phase_mean_accuracy}};
  if (std::isnan(rec.average_forgetting)) {
    j["metrics"]["average_forgetting"] = nullptr;
  } else {
    j["metrics"]["average_forgetting"] = rec.average_forgetting;
  }
  j["wall_seconds"] = rec.wall_seconds;
  return j;
}

inline RunRecord run_record_from_json(const Json& j) {
  RunRecord rec;
  rec.mode = j.at("mode").get<std::string>();
  rec.seed = j.at("seed").get<std::uint64_t>();
  for (const auto& jt : j.at("tasks")) {
    TaskResult t;
    t.task_id = jt.at("task_id").get<int>();
    t.classes = jt.at("classes").get<std::vector<int>>();
    t.epoch_losses = jt.at("epoch_losses").get<std::vector<double>>();
    t.checkpoint = jt.at("checkpoint").get<std::string>();
    rec.tasks.push_back(std::move(t));
  }
  for (const auto& row : j.at("accuracy_matrix")) {
    rec.accuracy.append_row(row.get<std::vector<double>>());
  }
  rec.average_accuracy = j.at("metrics").at("average_accuracy").get<double>();
  rec.all_phase_mean_accuracy = j.at("metrics").at("all_phase_mean_accuracy").get<double>();
  const auto& fgt = j.at("metrics").at("average_forgetting");
  rec.average_forgetting =
      fgt.is_null() ? std::numeric_limits<double>::quiet_NaN() : fgt.get<double>();
  rec.wall_seconds = j.at("wall_seconds").get<double>();
  return rec;
}

// --- metrics comparison table (one row per mode/seed) --------------------

struct MetricsRow {
  std::string mode;
  std::uint64_t seed = 0;
  double average_accuracy = 0.0;
  double average_forgetting = 0.0;
  double all_phase_mean_accuracy = 0.0;
  std::string variant = "full";  // ablation variant; "full" outside ablations
};

inline void write_metrics_csv(std::ostream& os, const std::vector<MetricsRow>& rows,
                              bool with_variant = false) {
  os << (with_variant ? "variant,mode,seed" : "mode,seed")
     << ",average_accuracy,average_forgetting,all_phase_mean_accuracy\n";
  char buf[64];
  const auto put = [&](double v) {
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    os << ',' << buf;
  };
  for (const auto& r : rows) {
    if (with_variant) os << r.variant << ',';
    os << r.mode << ',' << r.seed;
    put(r.average_accuracy);
    put(r.average_forgetting);
    put(r.all_phase_mean_accuracy);
    os << '\n';
  }
}

inline std::vector<MetricsRow> read_metrics_csv(std::istream& is) {
  std::string line;
  if (!std::getline(is, line)) throw ParseError("metrics csv: missing header");
  const bool with_variant = line.rfind("variant,", 0) == 0;
  std::vector<MetricsRow> rows;
  std::size_t lineno = 1;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string field;
    MetricsRow r;
    try {
      if (with_variant) {
        std::getline(ss, r.variant, ',');
      }
      std::getline(ss, r.mode, ',');
      std::getline(ss, field, ',');
      r.seed = std::stoull(field);
      std::getline(ss, field, ',');
      r.average_accuracy = std::stod(field);
      std::getline(ss, field, ',');
      r.average_forgetting = std::stod(field);
      std::getline(ss, field, ',');
      r.all_phase_mean_accuracy = std::stod(field);
    } catch (const std::exception&) {
      throw ParseError("metrics csv: malformed line " + std::to_string(lineno));
    }
    rows.push_back(std::move(r));
  }
  return rows;
}

}  // namespace yono
