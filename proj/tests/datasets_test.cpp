#include <catch2/catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>
#include <set>

#include "yono/datasets.hpp"

using namespace yono;
using Catch::Approx;

namespace {

/// Nearest-center oracle accuracy (the classifiability reference).
double nearest_center_accuracy(const Dataset& ds) {
  std::map<int, Vector> centers;
  std::map<int, int> counts;
  for (Index i = 0; i < ds.size(); ++i) {
    const int y = ds.labels[static_cast<std::size_t>(i)];
    auto [it, fresh] = centers.try_emplace(y, Vector::Zero(ds.dim()));
    it->second += ds.features.row(i).transpose();
    counts[y]++;
  }
  for (auto& [y, c] : centers) c /= counts[y];
  Index correct = 0;
  for (Index i = 0; i < ds.size(); ++i) {
    int best = -1;
    double bestd = 0.0;
    for (const auto& [y, c] : centers) {
      const double d = (ds.features.row(i).transpose() - c).squaredNorm();
      if (best < 0 || d < bestd) {
        best = y;
        bestd = d;
      }
    }
    correct += best == ds.labels[static_cast<std::size_t>(i)];
  }
  return static_cast<double>(correct) / static_cast<double>(ds.size());
}

}  // namespace

TEST_CASE("generate_blobs", "[datasets]") {
  SECTION("well-separated blobs are trivially classifiable") {
    SyntheticBlobSpec spec;
    spec.n_classes = 2;
    spec.samples_per_class = 200;
    spec.input_dim = 8;
    spec.center_separation = 10.0;
    spec.within_class_std = 0.1;
    spec.seed = 1;
    CHECK(nearest_center_accuracy(generate_blobs(spec)) > 0.99);
  }

  SECTION("overlapping blobs are near chance") {
    SyntheticBlobSpec spec;
    spec.n_classes = 4;
    spec.samples_per_class = 500;
    spec.input_dim = 8;
    spec.center_separation = 0.01;
    spec.within_class_std = 10.0;
    spec.seed = 2;
    CHECK(nearest_center_accuracy(generate_blobs(spec)) < 0.25 + 0.05);
  }

  SECTION("same seed, same data") {
    SyntheticBlobSpec spec;
    spec.seed = 33;
    spec.n_classes = 3;
    spec.samples_per_class = 10;
    const Dataset a = generate_blobs(spec);
    const Dataset b = generate_blobs(spec);
    CHECK((a.features - b.features).cwiseAbs().maxCoeff() == 0.0);
    CHECK(a.labels == b.labels);
  }

  SECTION("invalid spec") {
    SyntheticBlobSpec spec;
    spec.within_class_std = 0.0;
    CHECK_THROWS_AS(generate_blobs(spec), InvalidSpecError);
  }
}

TEST_CASE("split_stream", "[datasets]") {
  SyntheticBlobSpec spec;
  spec.n_classes = 10;
  spec.samples_per_class = 50;
  spec.input_dim = 4;
  spec.seed = 3;
  const Dataset data = generate_blobs(spec);

  SECTION("zero-base: 10 classes over 5 phases") {
    const TaskStream stream = split_stream(data, 5, 0, 11);
    REQUIRE(stream.tasks.size() == 5);
    std::set<int> seen;
    for (const auto& task : stream.tasks) {
      CHECK(task.classes.size() == 2);
      for (int cls : task.classes) CHECK(seen.insert(cls).second);  // disjoint
      // per-class 80/20 split
      CHECK(task.train.size() == 2 * 40);
      CHECK(task.test.size() == 2 * 10);
      for (Index i = 0; i < task.train.size(); ++i) {
        CHECK(std::count(task.classes.begin(), task.classes.end(),
                         task.train.labels[static_cast<std::size_t>(i)]) == 1);
      }
    }
    CHECK(seen.size() == 10);
  }

  SECTION("half-base: 5 base classes then 5 single-class phases") {
    const TaskStream stream = split_stream(data, 6, 5, 11);
    REQUIRE(stream.tasks.size() == 6);
    CHECK(stream.tasks[0].classes.size() == 5);
    for (std::size_t t = 1; t < 6; ++t) CHECK(stream.tasks[t].classes.size() == 1);
  }

  SECTION("indivisible splits are rejected") {
    CHECK_THROWS_AS(split_stream(data, 3, 0, 11), IndivisibleClassesError);
    CHECK_THROWS_AS(split_stream(data, 4, 5, 11), IndivisibleClassesError);
  }

  SECTION("train and test partition each class's data") {
    const TaskStream stream = split_stream(data, 5, 0, 7);
    for (const auto& task : stream.tasks) {
      CHECK(task.train.size() + task.test.size() ==
            static_cast<Index>(task.classes.size()) * 50);
      // row-level disjointness via exact feature match counts
      std::set<std::pair<double, double>> train_keys;
      for (Index i = 0; i < task.train.size(); ++i) {
        train_keys.insert({task.train.features(i, 0), task.train.features(i, 1)});
      }
      for (Index i = 0; i < task.test.size(); ++i) {
        CHECK(train_keys.count({task.test.features(i, 0), task.test.features(i, 1)}) == 0);
      }
    }
  }

  SECTION("same seed builds identical streams") {
    const TaskStream a = split_stream(data, 5, 0, 13);
    const TaskStream b = split_stream(data, 5, 0, 13);
    REQUIRE(a.tasks.size() == b.tasks.size());
    for (std::size_t t = 0; t < a.tasks.size(); ++t) {
      CHECK(a.tasks[t].classes == b.tasks[t].classes);
      CHECK((a.tasks[t].train.features - b.tasks[t].train.features).cwiseAbs().maxCoeff() ==
            0.0);
      CHECK(a.tasks[t].train.labels == b.tasks[t].train.labels);
    }
  }

  SECTION("different order seeds permute the classes") {
    const TaskStream a = split_stream(data, 5, 0, 1);
    const TaskStream b = split_stream(data, 5, 0, 2);
    bool any_difference = false;
    for (std::size_t t = 0; t < 5; ++t) {
      if (a.tasks[t].classes != b.tasks[t].classes) any_difference = true;
    }
    CHECK(any_difference);
  }
}

TEST_CASE("csv io", "[datasets]") {
  namespace fs = std::filesystem;
  const fs::path dir = fs::temp_directory_path() / "yono_csv_test";
  fs::create_directories(dir);

  SECTION("round trip") {
    SyntheticBlobSpec spec;
    spec.n_classes = 3;
    spec.samples_per_class = 5;
    spec.input_dim = 2;
    const Dataset ds = generate_blobs(spec);
    const std::string path = (dir / "ok.csv").string();
    {
      std::ofstream os(path);
      write_csv(os, ds);
    }
    const Dataset back = load_csv(path, 2);
    REQUIRE(back.size() == ds.size());
    CHECK(back.labels == ds.labels);
    CHECK((back.features - ds.features).cwiseAbs().maxCoeff() == 0.0);
  }

  SECTION("malformed row names the line") {
    const std::string path = (dir / "bad.csv").string();
    {
      std::ofstream os(path);
      os << "f0,f1,label\n1.0,2.0,0\nx,2.0,1\n";
    }
    try {
      load_csv(path, 2);
      FAIL("expected ParseError");
    } catch (const ParseError& e) {
      CHECK(std::string(e.what()).find("line 3") != std::string::npos);
    }
  }

  SECTION("header-only file is an empty-dataset error") {
    const std::string path = (dir / "empty.csv").string();
    {
      std::ofstream os(path);
      os << "f0,f1,label\n";
    }
    CHECK_THROWS_AS(load_csv(path, 2), EmptyDatasetError);
  }

  SECTION("header width mismatch") {
    const std::string path = (dir / "width.csv").string();
    {
      std::ofstream os(path);
      os << "f0,f1,f2,label\n1,2,3,0\n";
    }
    CHECK_THROWS_AS(load_csv(path, 2), DimensionMismatchError);
  }

  SECTION("missing file") {
    CHECK_THROWS_AS(load_csv((dir / "nope.csv").string(), 2), IoError);
  }
}
