#pragma once

#include <istream>
#include <map>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "yono/geometry.hpp"
#include "yono/prototypes.hpp"

namespace yono {

/// Synthetic replay embeddings with their class labels. Rows are unit norm.
struct SyntheticBatch {
  Matrix embeddings;           // n x m
  std::vector<int> class_ids;  // n
  int source_task = -1;

  Index size() const { return embeddings.rows(); }
};

/// Sampling spread floor for degenerate (e.g. single-sample) prototypes.
inline constexpr double kSigmaFloor = 1e-4;

/// Builds the cosine-sampling spec for one prototype.
///
/// The measured cos_std is the default spread. When no usable spread was
/// measured (e.g. a single-sample class) the fallback is (1 - mu)/kappa,
/// floored at kSigmaFloor. The mean is nudged off +-1 and the spread shrunk
/// as needed so the truncation support stays inside (-1, 1).
inline TruncatedGaussianSpec sampling_spec(const Prototype& proto, double kappa) {
  if (!(kappa > 0.0)) {
    throw InvalidSpecError("sampling_spec: kappa must be positive");
  }
  double mu = proto.cos_mean;
  double sigma = proto.cos_std;
  if (!(sigma > 0.0) || !std::isfinite(sigma)) {
    sigma = (1.0 - mu) / kappa;
    if (!(sigma > 0.0) || !std::isfinite(sigma)) sigma = kSigmaFloor;
  }
  const double margin = 1e-9;
  if (mu - kappa * sigma <= -1.0 + margin || mu + kappa * sigma >= 1.0 - margin) {
    double room = (std::min(1.0 - mu, 1.0 + mu) - margin) / kappa;
    if (!(room > 0.0)) {
      // mu hugs +-1 (e.g. a single-sample class): pull it in far enough for
      // the floor spread
      mu = std::clamp(mu, -1.0 + kappa * kSigmaFloor + 2.0 * margin,
                      1.0 - kappa * kSigmaFloor - 2.0 * margin);
      room = (std::min(1.0 - mu, 1.0 + mu) - margin) / kappa;
    }
    sigma = std::min(sigma, room);
  }
  return TruncatedGaussianSpec{mu, sigma, kappa};
}

/// Generates replay embeddings from stored prototypes.
///
/// Per item of class k: draw a cosine value from the prototype's truncated
/// Gaussian, build v on the unit sphere around the canonical axis
/// u = e1 with <u, v> equal to that value, and rotate v by the class's
/// cached R(p_k, u) so that <z', p_k> is the drawn cosine.
class Synthesizer {
 public:
  explicit Synthesizer(const PrototypeMemory& memory, double kappa = kDefaultKappa)
      : memory_(&memory), kappa_(kappa) {
    if (memory.empty()) {
      throw EmptyMemoryError("Synthesizer: prototype memory is empty");
    }
    const Index m = memory.dimension();
    Vector axis = Vector::Zero(m);
    axis[0] = 1.0;
    for (const auto& [id, proto] : memory.records()) {
      specs_.emplace(id, sampling_spec(proto, kappa_));
      rotations_.emplace(id, rotation_from_axis(proto.direction, axis));
    }
  }

  /// per_class items for every stored class, classes in ascending id order.
  SyntheticBatch per_class(std::size_t per_class, Rng& rng) const {
    if (per_class == 0) {
      throw InvalidSpecError("Synthesizer: per_class must be >= 1");
    }
    const Index m = memory_->dimension();
    const auto ids = memory_->class_ids();
    SyntheticBatch batch;
    batch.embeddings.resize(static_cast<Index>(ids.size() * per_class), m);
    batch.class_ids.reserve(ids.size() * per_class);
    Index row = 0;
    for (int id : ids) {
      for (std::size_t i = 0; i < per_class; ++i) {
        batch.embeddings.row(row++) = draw(id, rng).transpose();
        batch.class_ids.push_back(id);
      }
    }
    return batch;
  }

  /// batch_size items with labels uniform over stored classes (with
  /// replacement).
  SyntheticBatch minibatch(std::size_t batch_size, Rng& rng) const {
    const auto ids = memory_->class_ids();
    SyntheticBatch batch;
    batch.embeddings.resize(static_cast<Index>(batch_size), memory_->dimension());
    batch.class_ids.reserve(batch_size);
    for (std::size_t i = 0; i < batch_size; ++i) {
      const int id = ids[static_cast<std::size_t>(rng.below(ids.size()))];
      batch.embeddings.row(static_cast<Index>(i)) = draw(id, rng).transpose();
      batch.class_ids.push_back(id);
    }
    return batch;
  }

  double kappa() const { return kappa_; }

 private:
  Vector draw(int class_id, Rng& rng) const {
    const auto& spec = specs_.at(class_id);
    const double a = sample_truncated_gaussian(spec, rng, 1)[0];
    const Vector v = sample_sphere_neighbor(a, memory_->dimension(), rng);
    return rotations_.at(class_id) * v;
  }

  const PrototypeMemory* memory_;
  double kappa_;
  std::map<int, TruncatedGaussianSpec> specs_;
  std::map<int, Matrix> rotations_;
};

inline SyntheticBatch synthesize(const PrototypeMemory& memory, std::size_t per_class,
                                 double kappa, Rng& rng) {
  return Synthesizer(memory, kappa).per_class(per_class, rng);
}

inline SyntheticBatch synthesize_minibatch(const PrototypeMemory& memory,
                                           std::size_t batch_size, Rng& rng) {
  return Synthesizer(memory).minibatch(batch_size, rng);
}

// --- embedding dump (CSV) ----------------------------------------------
// Schema: class_id,kind,c0..c{m-1} with kind in {synthetic, extracted}.

inline void write_embedding_csv_header(std::ostream& os, Index m) {
  os << "class_id,kind";
  for (Index i = 0; i < m; ++i) os << ",c" << i;
  os << '\n';
}

inline void write_embedding_csv_rows(std::ostream& os, const Matrix& embeddings,
                                     const std::vector<int>& class_ids,
                                     const std::string& kind) {
  char buf[64];
  for (Index r = 0; r < embeddings.rows(); ++r) {
    os << class_ids[static_cast<std::size_t>(r)] << ',' << kind;
    for (Index c = 0; c < embeddings.cols(); ++c) {
      std::snprintf(buf, sizeof(buf), "%.17g", embeddings(r, c));
      os << ',' << buf;
    }
    os << '\n';
  }
}

struct EmbeddingDump {
  Matrix embeddings;
  std::vector<int> class_ids;
  std::vector<std::string> kinds;
};

/// Reader for the dump format (round-trip counterpart of the writers).
inline EmbeddingDump read_embedding_csv(std::istream& is) {
  std::string line;
  if (!std::getline(is, line)) {
    throw ParseError("embedding csv: missing header");
  }
  Index m = -1;  // from header: class_id,kind,c0..c{m-1}
  {
    Index cols = 1;
    for (char ch : line) cols += (ch == ',');
    m = cols - 2;
    if (m < 1) throw ParseError("embedding csv: malformed header");
  }
  EmbeddingDump dump;
  std::vector<Vector> rows;
  std::size_t lineno = 1;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string field;
    if (!std::getline(ss, field, ',')) break;
    Vector row(m);
    try {
      dump.class_ids.push_back(std::stoi(field));
      if (!std::getline(ss, field, ',')) throw std::invalid_argument("kind");
      dump.kinds.push_back(field);
      for (Index i = 0; i < m; ++i) {
        if (!std::getline(ss, field, ',')) throw std::invalid_argument("coords");
        row[i] = std::stod(field);
      }
    } catch (const std::exception&) {
      throw ParseError("embedding csv: malformed line " + std::to_string(lineno));
    }
    rows.push_back(std::move(row));
  }
  dump.embeddings.resize(static_cast<Index>(rows.size()), m);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    dump.embeddings.row(static_cast<Index>(i)) = rows[i].transpose();
  }
  return dump;
}

}  // namespace yono
