// Command-line entry point: experiment execution, ablations, and embedding
// dumps. See README.md for the config format and output layout.

#include <sys/wait.h>
#include <unistd.h>

#include <CLI11.hpp>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "yono/yono.hpp"

namespace fs = std::filesystem;
using namespace yono;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitRuntime = 1;
constexpr int kExitConfig = 2;

struct RunJob {
  TrainerConfig trainer;  // mode, seed and toggles resolved
  std::string variant = "full";
  fs::path dir;
};

void write_run_outputs(const RunConfig& cfg, const TaskStream& stream, const RunJob& job) {
  fs::create_directories(job.dir);
  std::optional<ModelState> state;
  PrototypeMemory memory;
  RunRecord record = run_stream(stream, job.trainer, &state, &memory);

  const fs::path ckpt = job.dir / "model.ckpt";
  state->save_checkpoint_file(ckpt.string());
  memory.write_binary_file((job.dir / "memory.bin").string());
  memory.write_text_file((job.dir / "memory.txt").string());
  record.tasks.back().checkpoint = ckpt.string();

  {
    std::ofstream os(job.dir / "accuracy.csv", std::ios::trunc | std::ios::binary);
    record.accuracy.write_csv(os);
  }
  {
    RunConfig echo_cfg = cfg;
    echo_cfg.trainer = job.trainer;
    Json j = run_record_to_json(record, config_echo(echo_cfg));
    j["variant"] = job.variant;
    std::ofstream os(job.dir / "run.json", std::ios::trunc);
    os << j.dump(2) << '\n';
  }
}

int execute_jobs(const RunConfig& cfg, const TaskStream& stream,
                 const std::vector<RunJob>& jobs, int parallel) {
  if (parallel <= 1) {
    for (const auto& job : jobs) write_run_outputs(cfg, stream, job);
    return kExitOk;
  }
  std::size_t next = 0;
  int active = 0;
  bool failed = false;
  while (next < jobs.size() || active > 0) {
    while (active < parallel && next < jobs.size()) {
      const pid_t pid = fork();
      if (pid < 0) throw IoError("fork failed");
      if (pid == 0) {
        try {
          write_run_outputs(cfg, stream, jobs[next]);
          _exit(0);
        } catch (const std::exception& e) {
          std::fprintf(stderr, "error: %s\n", e.what());
          _exit(1);
        }
      }
      ++active;
      ++next;
    }
    int status = 0;
    if (wait(&status) > 0) {
      --active;
      if (!WIFEXITED(status) || WEXITSTATUS(status) != 0) failed = true;
    }
  }
  if (failed) throw Error("one or more parallel runs failed");
  return kExitOk;
}

std::vector<MetricsRow> collect_metrics(const std::vector<RunJob>& jobs) {
  std::vector<MetricsRow> rows;
  for (const auto& job : jobs) {
    std::ifstream is(job.dir / "run.json");
    if (!is) throw IoError("missing run record: " + (job.dir / "run.json").string());
    const Json j = Json::parse(is);
    const RunRecord rec = run_record_from_json(j);
    MetricsRow row;
    row.variant = job.variant;
    row.mode = rec.mode;
    row.seed = rec.seed;
    row.average_accuracy = rec.average_accuracy;
    row.average_forgetting = rec.average_forgetting;
    row.all_phase_mean_accuracy = rec.all_phase_mean_accuracy;
    rows.push_back(std::move(row));
  }
  return rows;
}

struct CommonArgs {
  std::string config_path;
  std::vector<std::string> overrides;
  std::string out_dir;
  std::string seed_list;
  std::string mode_list;
  int parallel = 1;
};

void add_common(CLI::App* cmd, CommonArgs& args) {
  cmd->add_option("--config", args.config_path, "configuration file")->required();
  cmd->add_option("--set", args.overrides, "override a config key (key=value, repeatable)");
  cmd->add_option("--out", args.out_dir, "output directory (overrides output.dir)");
  cmd->add_option("--seed", args.seed_list, "comma-separated seed list (overrides run.seeds)");
  cmd->add_option("--mode", args.mode_list, "comma-separated mode list (overrides run.modes)");
  cmd->add_option("--parallel", args.parallel, "run up to N (mode, seed) jobs in parallel processes")
      ->check(CLI::PositiveNumber);
}

RunConfig resolve_config(const CommonArgs& args) {
  RunConfig cfg = load_run_config(args.config_path, args.overrides);
  if (!args.out_dir.empty()) cfg.output_dir = args.out_dir;
  if (!args.seed_list.empty()) apply_config_entry(cfg, "run.seeds", args.seed_list);
  if (!args.mode_list.empty()) apply_config_entry(cfg, "run.modes", args.mode_list);
  return cfg;
}

std::vector<RunJob> expand_jobs(const RunConfig& cfg, const std::vector<std::string>& variants) {
  std::vector<RunJob> jobs;
  for (const auto& variant : variants) {
    for (const Mode mode : cfg.modes) {
      for (const std::uint64_t seed : cfg.seeds) {
        RunJob job;
        job.trainer = cfg.trainer;
        job.trainer.mode = mode;
        job.trainer.seed = seed;
        job.variant = variant;
        if (variant == "no-prototype-replay") job.trainer.prototype_replay = false;
        else if (variant == "no-synthesis") job.trainer.synthesis_replay = false;
        else if (variant == "no-kd") job.trainer.distillation = false;
        else if (variant == "no-interpolation") job.trainer.interpolation = false;
        else if (variant == "no-partial-freeze") job.trainer.partial_freeze = false;

        std::string name = std::string(to_string(mode)) + "_s" + std::to_string(seed);
        if (variant != "full") name = variant + "_" + name;
        job.dir = fs::path(cfg.output_dir) / name;
        jobs.push_back(std::move(job));
      }
    }
  }
  // a single job writes straight into the output directory
  if (jobs.size() == 1) jobs[0].dir = cfg.output_dir;
  return jobs;
}

int cmd_run(const CommonArgs& args) {
  const RunConfig cfg = resolve_config(args);
  const TaskStream stream = cfg.build_stream();
  const auto jobs = expand_jobs(cfg, {"full"});
  execute_jobs(cfg, stream, jobs, args.parallel);
  std::ofstream os(fs::path(cfg.output_dir) / "metrics.csv", std::ios::trunc | std::ios::binary);
  write_metrics_csv(os, collect_metrics(jobs));
  return kExitOk;
}

int cmd_ablate(const CommonArgs& args, const std::vector<std::string>& off_flags) {
  static const std::vector<std::string> known = {
      "prototype-replay", "synthesis", "kd", "interpolation", "partial-freeze"};
  std::vector<std::string> variants{"full"};
  for (std::string flag : off_flags) {
    if (flag.rfind("no-", 0) == 0) flag = flag.substr(3);
    if (std::find(known.begin(), known.end(), flag) == known.end()) {
      throw ConfigError("unknown ablation component: '" + flag + "'");
    }
    variants.push_back("no-" + flag);
  }
  const RunConfig cfg = resolve_config(args);
  const TaskStream stream = cfg.build_stream();
  const auto jobs = expand_jobs(cfg, variants);
  execute_jobs(cfg, stream, jobs, args.parallel);
  const bool plain_run = variants.size() == 1;
  std::ofstream os(fs::path(cfg.output_dir) / (plain_run ? "metrics.csv" : "ablation.csv"),
                   std::ios::trunc | std::ios::binary);
  write_metrics_csv(os, collect_metrics(jobs), !plain_run);
  return kExitOk;
}

int cmd_dump_embeddings(const std::string& checkpoint_path, const std::string& memory_path,
                        const std::string& data_path, const std::string& out_path,
                        int per_class, std::uint64_t seed) {
  const ModelState state = ModelState::load_checkpoint_file(checkpoint_path);
  const PrototypeMemory memory = PrototypeMemory::read_binary_file(memory_path);
  if (memory.dimension() != state.encoder().architecture().output_dim) {
    throw ArchitectureMismatchError("dump-embeddings: memory dimension " +
                                    std::to_string(memory.dimension()) +
                                    " != model embedding dimension");
  }
  const Dataset data = load_csv(data_path, state.encoder().architecture().input_dim);

  std::ofstream os(out_path, std::ios::trunc | std::ios::binary);
  if (!os) throw IoError("cannot open for writing: " + out_path);
  write_embedding_csv_header(os, memory.dimension());

  // extracted representations of every stored class present in the data
  const Matrix z = state.encoder().forward(data.features);
  std::vector<int> kept_ids;
  std::vector<Index> kept_rows;
  for (Index i = 0; i < z.rows(); ++i) {
    const int label = data.labels[static_cast<std::size_t>(i)];
    if (memory.contains(label)) {
      kept_ids.push_back(label);
      kept_rows.push_back(i);
    }
  }
  Matrix extracted(static_cast<Index>(kept_rows.size()), z.cols());
  for (std::size_t i = 0; i < kept_rows.size(); ++i) {
    extracted.row(static_cast<Index>(i)) = normalize(z.row(kept_rows[i]).transpose()).transpose();
  }
  write_embedding_csv_rows(os, extracted, kept_ids, "extracted");

  Rng rng(seed);
  const SyntheticBatch synth = synthesize(memory, static_cast<std::size_t>(per_class),
                                          kDefaultKappa, rng);
  write_embedding_csv_rows(os, synth.embeddings, synth.class_ids, "synthetic");
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"class-incremental learning engine (prototype condensation + synthetic replay)"};
  app.require_subcommand(1);

  CommonArgs run_args;
  CLI::App* run = app.add_subcommand("run", "train and evaluate each (mode, seed) pair");
  add_common(run, run_args);

  CommonArgs ablate_args;
  std::vector<std::string> off_flags;
  CLI::App* ablate = app.add_subcommand("ablate", "component ablation matrix");
  add_common(ablate, ablate_args);
  ablate->add_option("--off", off_flags,
                     "component to disable (prototype-replay, synthesis, kd, interpolation, "
                     "partial-freeze; repeatable). interpolation off is beta = 1.0");

  std::string ckpt_path, memory_path, data_path, dump_out = "embeddings.csv";
  int per_class = 100;
  std::uint64_t dump_seed = 1;
  CLI::App* dump = app.add_subcommand("dump-embeddings",
                                      "write extracted + synthetic embeddings as CSV");
  dump->add_option("--checkpoint", ckpt_path, "model checkpoint")->required();
  dump->add_option("--memory", memory_path, "prototype memory file")->required();
  dump->add_option("--data", data_path, "dataset CSV")->required();
  dump->add_option("--out", dump_out, "output CSV path");
  dump->add_option("--per-class", per_class, "synthetic samples per stored class")
      ->check(CLI::PositiveNumber);
  dump->add_option("--seed", dump_seed, "synthesis seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitConfig;
  }

  try {
    if (run->parsed()) return cmd_run(run_args);
    if (ablate->parsed()) return cmd_ablate(ablate_args, off_flags);
    if (dump->parsed()) {
      return cmd_dump_embeddings(ckpt_path, memory_path, data_path, dump_out, per_class,
                                 dump_seed);
    }
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return kExitConfig;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitRuntime;
  }
  return kExitConfig;
}
