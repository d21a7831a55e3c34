#include <catch2/catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "yono/config.hpp"
#include "yono/report.hpp"

using namespace yono;
using Catch::Approx;

namespace {

RunConfig parse(const std::string& text, const std::vector<std::string>& overrides = {}) {
  namespace fs = std::filesystem;
  const fs::path dir = fs::temp_directory_path() / "yono_config_test";
  fs::create_directories(dir);
  const fs::path path = dir / "cfg.txt";
  std::ofstream os(path);
  os << text;
  os.close();
  return load_run_config(path.string(), overrides);
}

}  // namespace

TEST_CASE("config parsing", "[config]") {
  SECTION("typed keys land in the right places") {
    const RunConfig cfg = parse(
        "# a comment\n"
        "dataset.classes = 6\n"
        "dataset.input_dim = 12\n"
        "stream.phases = 3\n"
        "trainer.epochs = 9\n"
        "trainer.lambda = 0.7\n"
        "trainer.hidden_dims = 32, 16\n"
        "run.modes = naive, yono+\n"
        "run.seeds = 4,5\n"
        "output.dir = /tmp/somewhere\n");
    CHECK(cfg.blobs.n_classes == 6);
    CHECK(cfg.blobs.input_dim == 12);
    CHECK(cfg.phases == 3);
    CHECK(cfg.trainer.epochs == 9);
    CHECK(cfg.trainer.lambda == 0.7);
    CHECK(cfg.trainer.hidden_dims == std::vector<Index>{32, 16});
    REQUIRE(cfg.modes.size() == 2);
    CHECK(cfg.modes[0] == Mode::naive);
    CHECK(cfg.modes[1] == Mode::yono_plus);
    CHECK(cfg.seeds == std::vector<std::uint64_t>{4, 5});
    CHECK(cfg.output_dir == "/tmp/somewhere");
  }

  SECTION("unknown keys are rejected by name") {
    try {
      parse("trainer.unknown_knob = 3\n");
      FAIL("expected ConfigError");
    } catch (const ConfigError& e) {
      CHECK(std::string(e.what()).find("trainer.unknown_knob") != std::string::npos);
    }
  }

  SECTION("type errors name the key") {
    try {
      parse("trainer.epochs = banana\n");
      FAIL("expected ConfigError");
    } catch (const ConfigError& e) {
      CHECK(std::string(e.what()).find("trainer.epochs") != std::string::npos);
    }
  }

  SECTION("missing file names the path") {
    try {
      load_run_config("/nonexistent/path.cfg");
      FAIL("expected ConfigError");
    } catch (const ConfigError& e) {
      CHECK(std::string(e.what()).find("/nonexistent/path.cfg") != std::string::npos);
    }
  }

  SECTION("--set overrides win") {
    const RunConfig cfg =
        parse("trainer.epochs = 9\n", {"trainer.epochs=11", "trainer.beta=0.4"});
    CHECK(cfg.trainer.epochs == 11);
    CHECK(cfg.trainer.beta == 0.4);
  }

  SECTION("bad override syntax") {
    CHECK_THROWS_AS(parse("", {"no_equals_sign"}), ConfigError);
  }

  SECTION("unknown mode") {
    CHECK_THROWS_AS(parse("run.modes = yolo\n"), ConfigError);
  }

  SECTION("defaults mirror the desk-scale operating point") {
    const RunConfig cfg = parse("");
    CHECK(cfg.trainer.epochs == 40);
    CHECK(cfg.trainer.batch_size == 64);
    CHECK(cfg.trainer.lambda == 0.6);
    CHECK(cfg.trainer.arcface.margin == 0.25);
    CHECK(cfg.trainer.beta == 0.6);
    CHECK(cfg.trainer.optimizer.learning_rate == 0.01);
    CHECK(cfg.trainer.optimizer.frozen_rate == 0.001);
    CHECK(cfg.trainer.kappa == 1.96);
    CHECK(cfg.trainer.weights.distillation == 30.0);
    CHECK(cfg.trainer.mean_shift_iterations == 5);
  }
}

TEST_CASE("shipped configuration fixtures parse and validate", "[config]") {
  for (const char* name : {"/configs/desk.cfg", "/configs/fullscale.cfg"}) {
    const RunConfig cfg = load_run_config(std::string(YONO_SOURCE_DIR) + name);
    CHECK_NOTHROW(cfg.trainer.validate());
    CHECK_NOTHROW(cfg.blobs.validate());
    CHECK(cfg.blobs.n_classes % cfg.phases == 0);
  }
  const RunConfig desk = load_run_config(std::string(YONO_SOURCE_DIR) + "/configs/desk.cfg");
  CHECK(desk.blobs.n_classes == 10);
  CHECK(desk.phases == 5);
  CHECK(desk.trainer.epochs == 40);
}

TEST_CASE("run record json round trip", "[config]") {
  RunRecord rec;
  rec.mode = "yono+";
  rec.seed = 42;
  TaskResult t;
  t.task_id = 0;
  t.classes = {1, 3};
  t.epoch_losses = {2.5, 1.25, 0.9};
  t.checkpoint = "out/model.ckpt";
  rec.tasks.push_back(t);
  rec.accuracy.append_row({0.95});
  rec.accuracy.append_row({0.9, 0.85});
  rec.average_accuracy = 0.875;
  rec.average_forgetting = 0.05;
  rec.all_phase_mean_accuracy = 0.9125;
  rec.wall_seconds = 1.5;

  const Json j = run_record_to_json(rec, config_echo(RunConfig{}));
  const RunRecord back = run_record_from_json(j);
  CHECK(back.mode == rec.mode);
  CHECK(back.seed == rec.seed);
  REQUIRE(back.tasks.size() == 1);
  CHECK(back.tasks[0].classes == t.classes);
  CHECK(back.tasks[0].epoch_losses == t.epoch_losses);
  CHECK(back.accuracy.at(1, 1) == 0.85);
  CHECK(back.average_accuracy == rec.average_accuracy);
  CHECK(back.average_forgetting == rec.average_forgetting);
  CHECK(back.wall_seconds == rec.wall_seconds);
}

TEST_CASE("metrics csv round trip", "[config]") {
  std::vector<MetricsRow> rows{{"yono", 1, 0.8123456789012345, 0.1, 0.85, "full"},
                               {"yono+", 2, 0.9, 0.05, 0.92, "no-kd"}};
  SECTION("plain table") {
    std::stringstream ss;
    write_metrics_csv(ss, rows, false);
    const auto back = read_metrics_csv(ss);
    REQUIRE(back.size() == 2);
    CHECK(back[0].mode == "yono");
    CHECK(back[0].average_accuracy == rows[0].average_accuracy);
    CHECK(back[1].seed == 2);
  }
  SECTION("with variant column") {
    std::stringstream ss;
    write_metrics_csv(ss, rows, true);
    const auto back = read_metrics_csv(ss);
    REQUIRE(back.size() == 2);
    CHECK(back[1].variant == "no-kd");
  }
}
