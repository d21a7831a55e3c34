#pragma once

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "yono/geometry.hpp"

namespace yono {

struct Dataset {
  Matrix features;          // n x d
  std::vector<int> labels;  // n

  Index size() const { return features.rows(); }
  Index dim() const { return features.cols(); }

  std::vector<int> distinct_labels() const {
    std::set<int> s(labels.begin(), labels.end());
    return std::vector<int>(s.begin(), s.end());
  }
};

/// Gaussian class clusters, a desk-scale stand-in for image benchmarks.
struct SyntheticBlobSpec {
  int n_classes = 10;
  int samples_per_class = 500;
  Index input_dim = 32;
  double center_separation = 6.0;  // radius of the sphere the centers sit on
  double within_class_std = 1.0;
  std::uint64_t seed = 7;

  void validate() const {
    if (n_classes < 1 || samples_per_class < 1 || input_dim < 1) {
      throw InvalidSpecError("SyntheticBlobSpec: counts and dims must be >= 1");
    }
    if (!(center_separation > 0.0) || !(within_class_std > 0.0)) {
      throw InvalidSpecError("SyntheticBlobSpec: separation and std must be positive");
    }
  }
};

inline Dataset generate_blobs(const SyntheticBlobSpec& spec) {
  spec.validate();
  Rng rng(spec.seed);
  std::vector<Vector> centers;
  centers.reserve(static_cast<std::size_t>(spec.n_classes));
  for (int k = 0; k < spec.n_classes; ++k) {
    Vector dir(spec.input_dim);
    for (Index i = 0; i < spec.input_dim; ++i) dir[i] = rng.normal();
    centers.push_back(normalize(dir) * spec.center_separation);
  }
  Dataset ds;
  const Index n = static_cast<Index>(spec.n_classes) * spec.samples_per_class;
  ds.features.resize(n, spec.input_dim);
  ds.labels.reserve(static_cast<std::size_t>(n));
  Index row = 0;
  for (int k = 0; k < spec.n_classes; ++k) {
    for (int s = 0; s < spec.samples_per_class; ++s) {
      for (Index i = 0; i < spec.input_dim; ++i) {
        ds.features(row, i) = centers[static_cast<std::size_t>(k)][i] +
                              rng.normal(0.0, spec.within_class_std);
      }
      ds.labels.push_back(k);
      ++row;
    }
  }
  return ds;
}

struct Task {
  int task_id = -1;
  std::vector<int> classes;
  Dataset train;
  Dataset test;
};

/// Ordered tasks over pairwise-disjoint class subsets.
struct TaskStream {
  std::vector<Task> tasks;
  Index input_dim = 0;
  std::uint64_t order_seed = 0;

  std::vector<int> all_classes() const {
    std::vector<int> out;
    for (const auto& t : tasks) out.insert(out.end(), t.classes.begin(), t.classes.end());
    return out;
  }
};

/// Splits a labeled dataset into a class-incremental stream.
///
/// Class ids are permuted by order_seed, then grouped contiguously:
/// zero-base (base_classes = 0) gives n_classes/phases per task; otherwise
/// task 1 holds base_classes and the remainder splits evenly over the other
/// phases - 1 tasks. Each class gets a deterministic 80/20 train/test split.
inline TaskStream split_stream(const Dataset& data, int phases, int base_classes,
                               std::uint64_t order_seed, double test_fraction = 0.2) {
  if (phases < 1) throw InvalidSpecError("split_stream: phases must be >= 1");
  const auto class_ids = data.distinct_labels();
  const int n_classes = static_cast<int>(class_ids.size());
  if (n_classes == 0) throw EmptyDatasetError("split_stream: dataset has no samples");

  std::vector<int> per_task_counts;
  if (base_classes == 0) {
    if (n_classes % phases != 0) {
      throw IndivisibleClassesError("split_stream: " + std::to_string(n_classes) +
                                    " classes not divisible into " + std::to_string(phases) +
                                    " phases");
    }
    per_task_counts.assign(static_cast<std::size_t>(phases), n_classes / phases);
  } else {
    if (phases < 2 || base_classes >= n_classes) {
      throw InvalidSpecError("split_stream: base split needs phases >= 2 and room after task 1");
    }
    const int rest = n_classes - base_classes;
    if (rest % (phases - 1) != 0) {
      throw IndivisibleClassesError("split_stream: " + std::to_string(rest) +
                                    " remaining classes not divisible into " +
                                    std::to_string(phases - 1) + " phases");
    }
    per_task_counts.push_back(base_classes);
    for (int t = 1; t < phases; ++t) per_task_counts.push_back(rest / (phases - 1));
  }

  // fixed random class order
  std::vector<int> order = class_ids;
  Rng order_rng(order_seed);
  shuffle(order, order_rng);

  // per-class row indices in dataset order
  std::map<int, std::vector<Index>> rows_of;
  for (Index i = 0; i < data.size(); ++i) {
    rows_of[data.labels[static_cast<std::size_t>(i)]].push_back(i);
  }

  TaskStream stream;
  stream.input_dim = data.dim();
  stream.order_seed = order_seed;
  std::size_t cursor = 0;
  for (int t = 0; t < phases; ++t) {
    Task task;
    task.task_id = t;
    for (int c = 0; c < per_task_counts[static_cast<std::size_t>(t)]; ++c) {
      task.classes.push_back(order[cursor++]);
    }
    std::sort(task.classes.begin(), task.classes.end());

    std::vector<Index> train_rows;
    std::vector<Index> test_rows;
    for (int cls : task.classes) {
      std::vector<Index> rows = rows_of.at(cls);
      Rng split_rng(order_seed ^ (0x5851f42d4c957f2dULL * static_cast<std::uint64_t>(cls + 1)));
      shuffle(rows, split_rng);
      const std::size_t n_test = static_cast<std::size_t>(
          static_cast<double>(rows.size()) * test_fraction);
      for (std::size_t i = 0; i < rows.size(); ++i) {
        (i < n_test ? test_rows : train_rows).push_back(rows[i]);
      }
    }
    const auto take = [&](const std::vector<Index>& idx) {
      Dataset out;
      out.features.resize(static_cast<Index>(idx.size()), data.dim());
      out.labels.reserve(idx.size());
      for (std::size_t i = 0; i < idx.size(); ++i) {
        out.features.row(static_cast<Index>(i)) = data.features.row(idx[i]);
        out.labels.push_back(data.labels[static_cast<std::size_t>(idx[i])]);
      }
      return out;
    };
    task.train = take(train_rows);
    task.test = take(test_rows);
    stream.tasks.push_back(std::move(task));
  }
  return stream;
}

/// CSV schema: mandatory header f0,...,f{d-1},label; floats in decimal,
/// labels nonnegative integers. Row order is preserved.
inline Dataset load_csv(const std::string& path, Index input_dim) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open for reading: " + path);
  std::string line;
  if (!std::getline(is, line)) {
    throw ParseError(path + ": empty file (header required)");
  }
  {
    Index cols = 1;
    for (char ch : line) cols += (ch == ',');
    if (cols != input_dim + 1) {
      throw DimensionMismatchError(path + ": header has " + std::to_string(cols) +
                                   " columns, expected " + std::to_string(input_dim + 1));
    }
  }
  std::vector<Vector> rows;
  std::vector<int> labels;
  std::size_t lineno = 1;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string field;
    Vector row(input_dim);
    try {
      std::size_t pos = 0;
      for (Index i = 0; i < input_dim; ++i) {
        if (!std::getline(ss, field, ',')) throw std::invalid_argument("missing field");
        row[i] = std::stod(field, &pos);
        if (pos != field.size()) throw std::invalid_argument("trailing junk");
      }
      if (!std::getline(ss, field, ',')) throw std::invalid_argument("missing label");
      const int label = std::stoi(field, &pos);
      if (pos != field.size() || label < 0) throw std::invalid_argument("bad label");
      labels.push_back(label);
    } catch (const std::exception&) {
      throw ParseError(path + ": malformed row at line " + std::to_string(lineno));
    }
    rows.push_back(std::move(row));
  }
  if (rows.empty()) {
    throw EmptyDatasetError(path + ": no data rows after the header");
  }
  Dataset ds;
  ds.features.resize(static_cast<Index>(rows.size()), input_dim);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    ds.features.row(static_cast<Index>(i)) = rows[i].transpose();
  }
  ds.labels = std::move(labels);
  return ds;
}

inline void write_csv(std::ostream& os, const Dataset& ds) {
  for (Index i = 0; i < ds.dim(); ++i) os << (i ? ",f" : "f") << i;
  os << ",label\n";
  char buf[64];
  for (Index r = 0; r < ds.size(); ++r) {
    for (Index c = 0; c < ds.dim(); ++c) {
      std::snprintf(buf, sizeof(buf), "%.17g", ds.features(r, c));
      os << buf << ',';
    }
    os << ds.labels[static_cast<std::size_t>(r)] << '\n';
  }
}

}  // namespace yono
