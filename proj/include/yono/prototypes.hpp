#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "yono/binary_io.hpp"
#include "yono/geometry.hpp"

namespace yono {

/// One condensed class prototype: a unit direction plus the statistics of
/// the class samples' cosines to it at condensation time.
struct Prototype {
  int class_id = -1;
  int task_id = -1;
  std::int64_t n_samples = 0;
  double cos_mean = 0.0;  // mu_k
  double cos_std = 0.0;   // sigma_k
  Vector direction;       // p_k, unit norm
};

/// Softmax over cosines c(z_i, p): the attention weights that steer the
/// mean-shift step. Rows of `embeddings` are samples.
inline Vector attention_weights(const Matrix& embeddings, const Vector& p) {
  if (embeddings.rows() == 0) {
    throw EmptyClassError("attention_weights: empty embedding list");
  }
  const Index n = embeddings.rows();
  Vector logits(n);
  for (Index i = 0; i < n; ++i) {
    logits[i] = cosine(embeddings.row(i).transpose(), p);
  }
  const double top = logits.maxCoeff();
  Vector w = (logits.array() - top).exp();
  w /= w.sum();
  return w;
}

/// One attentional mean-shift update of the prototype:
///   p <- normalize((1 - lambda) p + lambda * sum_i a_i z_i/||z_i||).
inline Vector mean_shift_step(const Vector& p, const Matrix& embeddings, double lambda) {
  const Vector a = attention_weights(embeddings, p);
  Vector target = Vector::Zero(p.size());
  for (Index i = 0; i < embeddings.rows(); ++i) {
    target += a[i] * normalize(embeddings.row(i).transpose());
  }
  return normalize((1.0 - lambda) * p + lambda * target);
}

struct CondenseOptions {
  double lambda = 0.6;
  int iterations = 5;  // R
  // Full-batch below the threshold, shuffled mini-batches above it.
  Index minibatch_threshold = 1024;
  Index minibatch_size = 256;
};

/// Runs R mean-shift iterations from the (normalized) class mean, then
/// measures the mean/stddev of sample-to-prototype cosines.
///
/// sigma is the raw population statistic: a single-sample class yields
/// cos_mean = 1, cos_std = 0. Sampling-time regularization of these values
/// belongs to the synthesis boundary.
inline Prototype condense_class(const Matrix& embeddings, int class_id, int task_id,
                                const CondenseOptions& opts, Rng& rng,
                                const std::optional<Vector>& init = std::nullopt) {
  const Index n = embeddings.rows();
  if (n == 0) {
    throw EmptyClassError("condense_class: no samples for class " + std::to_string(class_id));
  }

  Vector p;
  if (init.has_value()) {
    p = normalize(*init);
  } else {
    Vector mean = Vector::Zero(embeddings.cols());
    for (Index i = 0; i < n; ++i) {
      mean += normalize(embeddings.row(i).transpose());
    }
    p = normalize(mean);
  }

  for (int r = 0; r < opts.iterations; ++r) {
    if (n <= opts.minibatch_threshold) {
      p = mean_shift_step(p, embeddings, opts.lambda);
    } else {
      std::vector<Index> order(static_cast<std::size_t>(n));
      for (Index i = 0; i < n; ++i) order[static_cast<std::size_t>(i)] = i;
      shuffle(order, rng);
      for (Index start = 0; start < n; start += opts.minibatch_size) {
        const Index count = std::min(opts.minibatch_size, n - start);
        Matrix batch(count, embeddings.cols());
        for (Index i = 0; i < count; ++i) {
          batch.row(i) = embeddings.row(order[static_cast<std::size_t>(start + i)]);
        }
        p = mean_shift_step(p, batch, opts.lambda);
      }
    }
  }

  double sum = 0.0;
  double sumsq = 0.0;
  for (Index i = 0; i < n; ++i) {
    const double c = cosine(embeddings.row(i).transpose(), p);
    sum += c;
    sumsq += c * c;
  }
  const double mu = sum / static_cast<double>(n);
  const double var = std::max(0.0, sumsq / static_cast<double>(n) - mu * mu);

  Prototype proto;
  proto.class_id = class_id;
  proto.task_id = task_id;
  proto.n_samples = n;
  proto.cos_mean = mu;
  proto.cos_std = std::sqrt(var);
  proto.direction = p;
  return proto;
}

/// The persistent "one prototype per class" store.
class PrototypeMemory {
 public:
  PrototypeMemory() = default;
  explicit PrototypeMemory(Index dim) : dim_(dim) {}

  Index dimension() const { return dim_; }
  std::size_t size() const { return records_.size(); }
  bool empty() const { return records_.empty(); }
  bool contains(int class_id) const { return records_.count(class_id) > 0; }

  const Prototype& at(int class_id) const {
    auto it = records_.find(class_id);
    if (it == records_.end()) {
      throw UnknownClassError("PrototypeMemory: no prototype for class " +
                              std::to_string(class_id));
    }
    return it->second;
  }

  /// Insert-or-overwrite; entries of other classes are untouched.
  void save(const Prototype& proto) {
    if (dim_ == 0) {
      dim_ = proto.direction.size();
    } else if (proto.direction.size() != dim_) {
      throw DimensionMismatchError("PrototypeMemory: prototype dimension " +
                                   std::to_string(proto.direction.size()) +
                                   " != memory dimension " + std::to_string(dim_));
    }
    records_[proto.class_id] = proto;
  }

  void save(const std::vector<Prototype>& protos) {
    for (const auto& p : protos) save(p);
  }

  /// Ascending class ids.
  std::vector<int> class_ids() const {
    std::vector<int> ids;
    ids.reserve(records_.size());
    for (const auto& [id, _] : records_) ids.push_back(id);
    return ids;
  }

  const std::map<int, Prototype>& records() const { return records_; }

  PrototypeMemory subset(const std::vector<int>& ids) const {
    PrototypeMemory out(dim_);
    for (int id : ids) out.save(at(id));
    return out;
  }

  // --- persistence ---------------------------------------------------
  // Binary: magic, u32 version, u32 dimension, u64 count, then per record
  // (i32 class_id, i32 task_id, i64 n_samples, f64 mu, f64 sigma,
  //  dimension x f64 direction), little-endian, records sorted by class id.

  void write_binary(std::ostream& os) const {
    detail::write_magic(os, kMagic);
    detail::write_raw<std::uint32_t>(os, kVersion);
    detail::write_raw<std::uint32_t>(os, static_cast<std::uint32_t>(dim_));
    detail::write_raw<std::uint64_t>(os, records_.size());
    for (const auto& [id, p] : records_) {
      detail::write_raw<std::int32_t>(os, p.class_id);
      detail::write_raw<std::int32_t>(os, p.task_id);
      detail::write_raw<std::int64_t>(os, p.n_samples);
      detail::write_raw<double>(os, p.cos_mean);
      detail::write_raw<double>(os, p.cos_std);
      for (Index i = 0; i < dim_; ++i) detail::write_raw<double>(os, p.direction[i]);
    }
  }

  void write_binary_file(const std::string& path) const {
    auto os = detail::open_out(path);
    write_binary(os);
    if (!os) throw IoError("short write: " + path);
  }

  static PrototypeMemory read_binary(std::istream& is) {
    detail::expect_magic(is, kMagic, "prototype memory");
    const auto version = detail::read_raw<std::uint32_t>(is, "version");
    if (version != kVersion) {
      throw ParseError("prototype memory: unsupported format version " +
                       std::to_string(version));
    }
    const auto dim = detail::read_raw<std::uint32_t>(is, "dimension");
    const auto count = detail::read_raw<std::uint64_t>(is, "count");
    PrototypeMemory mem(static_cast<Index>(dim));
    for (std::uint64_t r = 0; r < count; ++r) {
      Prototype p;
      p.class_id = detail::read_raw<std::int32_t>(is, "class_id");
      p.task_id = detail::read_raw<std::int32_t>(is, "task_id");
      p.n_samples = detail::read_raw<std::int64_t>(is, "n_samples");
      p.cos_mean = detail::read_raw<double>(is, "cos_mean");
      p.cos_std = detail::read_raw<double>(is, "cos_std");
      p.direction.resize(static_cast<Index>(dim));
      for (std::uint32_t i = 0; i < dim; ++i) {
        p.direction[static_cast<Index>(i)] = detail::read_raw<double>(is, "direction");
      }
      if (std::abs(p.direction.norm() - 1.0) > 1e-6) {
        throw ParseError("prototype memory: non-unit direction for class " +
                         std::to_string(p.class_id));
      }
      mem.save(p);
    }
    return mem;
  }

  static PrototypeMemory read_binary_file(const std::string& path) {
    auto is = detail::open_in(path);
    return read_binary(is);
  }

  /// Lossless text form: one record per line, 17 significant digits.
  void write_text(std::ostream& os) const {
    char buf[64];
    for (const auto& [id, p] : records_) {
      os << p.class_id << ' ' << p.task_id << ' ' << p.n_samples;
      const auto put = [&](double v) {
        std::snprintf(buf, sizeof(buf), "%.17g", v);
        os << ' ' << buf;
      };
      put(p.cos_mean);
      put(p.cos_std);
      for (Index i = 0; i < dim_; ++i) put(p.direction[i]);
      os << '\n';
    }
  }

  void write_text_file(const std::string& path) const {
    std::ofstream os(path, std::ios::trunc);
    if (!os) throw IoError("cannot open for writing: " + path);
    write_text(os);
  }

 private:
  static constexpr char kMagic[9] = "YONOPROT";
  static constexpr std::uint32_t kVersion = 1;

  Index dim_ = 0;
  std::map<int, Prototype> records_;
};

}  // namespace yono
