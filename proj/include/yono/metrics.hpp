#pragma once

#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "yono/datasets.hpp"
#include "yono/encoder.hpp"

namespace yono {

/// Lower-triangular accuracy table: at(i, j) is the accuracy on task j's
/// test split after training phase i, defined for j <= i only.
class AccuracyMatrix {
 public:
  void append_row(std::vector<double> row) {
    if (row.size() != rows_.size() + 1) {
      throw IncompleteMatrixError("AccuracyMatrix: phase " + std::to_string(rows_.size()) +
                                  " row must have " + std::to_string(rows_.size() + 1) +
                                  " entries");
    }
    for (double v : row) {
      if (!(v >= 0.0 && v <= 1.0)) {
        throw IncompleteMatrixError("AccuracyMatrix: accuracy outside [0, 1]");
      }
    }
    rows_.push_back(std::move(row));
  }

  std::size_t phases() const { return rows_.size(); }

  double at(std::size_t phase, std::size_t task) const {
    if (phase >= rows_.size() || task > phase) {
      throw IncompleteMatrixError("AccuracyMatrix: entry (" + std::to_string(phase) + ", " +
                                  std::to_string(task) + ") undefined");
    }
    return rows_[phase][task];
  }

  const std::vector<std::vector<double>>& rows() const { return rows_; }

  /// CSV: rows = after-task phase, columns = task; blank above the diagonal.
  void write_csv(std::ostream& os) const {
    os << "phase";
    for (std::size_t j = 0; j < rows_.size(); ++j) os << ",task_" << j;
    os << '\n';
    char buf[64];
    for (std::size_t i = 0; i < rows_.size(); ++i) {
      os << i;
      for (std::size_t j = 0; j < rows_.size(); ++j) {
        os << ',';
        if (j <= i) {
          std::snprintf(buf, sizeof(buf), "%.17g", rows_[i][j]);
          os << buf;
        }
      }
      os << '\n';
    }
  }

  static AccuracyMatrix read_csv(std::istream& is) {
    std::string line;
    if (!std::getline(is, line)) throw ParseError("accuracy csv: missing header");
    AccuracyMatrix m;
    std::size_t lineno = 1;
    while (std::getline(is, line)) {
      ++lineno;
      if (line.empty()) continue;
      std::stringstream ss(line);
      std::string field;
      std::getline(ss, field, ',');  // phase index
      std::vector<double> row;
      while (std::getline(ss, field, ',')) {
        if (field.empty()) break;
        try {
          row.push_back(std::stod(field));
        } catch (const std::exception&) {
          throw ParseError("accuracy csv: malformed line " + std::to_string(lineno));
        }
      }
      m.append_row(std::move(row));
    }
    return m;
  }

 private:
  std::vector<std::vector<double>> rows_;
};

/// Per-task accuracies of `state` on the given test splits, predicting over
/// every class the model has registered (no task identifier at inference).
inline std::vector<double> evaluate(const ModelState& state,
                                    const std::vector<const Dataset*>& test_sets) {
  std::vector<double> row;
  row.reserve(test_sets.size());
  for (const Dataset* ds : test_sets) {
    if (ds == nullptr || ds->size() == 0) {
      throw MissingTestSetError("evaluate: missing or empty test set for task " +
                                std::to_string(row.size()));
    }
    const auto pred = state.classify(ds->features);
    Index correct = 0;
    for (Index i = 0; i < ds->size(); ++i) {
      correct += pred[static_cast<std::size_t>(i)] == ds->labels[static_cast<std::size_t>(i)];
    }
    row.push_back(static_cast<double>(correct) / static_cast<double>(ds->size()));
  }
  return row;
}

/// Mean of the final row: (1/T) sum_j A[T][j].
inline double average_accuracy(const AccuracyMatrix& a) {
  if (a.phases() == 0) throw IncompleteMatrixError("average_accuracy: empty matrix");
  const auto& last = a.rows().back();
  double sum = 0.0;
  for (double v : last) sum += v;
  return sum / static_cast<double>(last.size());
}

/// (1/(T-1)) sum_{j<T} [ max_{i in {j..T-1}} A[i][j] - A[T][j] ]
/// (1-based as written; phases and tasks are 0-based here).
inline double average_forgetting(const AccuracyMatrix& a) {
  const std::size_t T = a.phases();
  if (T < 2) throw TooFewTasksError("average_forgetting: needs at least 2 phases");
  double sum = 0.0;
  for (std::size_t j = 0; j + 1 < T; ++j) {
    double best = 0.0;
    for (std::size_t i = j; i + 1 < T; ++i) {
      best = std::max(best, a.at(i, j));
    }
    sum += best - a.at(T - 1, j);
  }
  return sum / static_cast<double>(T - 1);
}

/// Secondary summary: mean over phases of each phase's average accuracy.
inline double all_phase_mean_accuracy(const AccuracyMatrix& a) {
  if (a.phases() == 0) throw IncompleteMatrixError("all_phase_mean_accuracy: empty matrix");
  double sum = 0.0;
  for (const auto& row : a.rows()) {
    double rsum = 0.0;
    for (double v : row) rsum += v;
    sum += rsum / static_cast<double>(row.size());
  }
  return sum / static_cast<double>(a.phases());
}

}  // namespace yono
