#pragma once

#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "yono/binary_io.hpp"
#include "yono/geometry.hpp"

namespace yono {

enum class Nonlinearity { rectifier, identity };

inline const char* to_string(Nonlinearity n) {
  return n == Nonlinearity::rectifier ? "rectifier" : "identity";
}

struct EncoderArchitecture {
  Index input_dim = 0;
  std::vector<Index> hidden_dims;
  Index output_dim = 0;  // embedding dimension m
  Nonlinearity nonlinearity = Nonlinearity::rectifier;

  bool operator==(const EncoderArchitecture&) const = default;

  void validate() const {
    if (input_dim < 1 || output_dim < 1) {
      throw InvalidSpecError("EncoderArchitecture: dims must be >= 1");
    }
    for (Index h : hidden_dims) {
      if (h < 1) throw InvalidSpecError("EncoderArchitecture: dims must be >= 1");
    }
  }

  /// (out, in) per affine layer.
  std::vector<std::pair<Index, Index>> layer_shapes() const {
    std::vector<std::pair<Index, Index>> shapes;
    Index in = input_dim;
    for (Index h : hidden_dims) {
      shapes.emplace_back(h, in);
      in = h;
    }
    shapes.emplace_back(output_dim, in);
    return shapes;
  }
};

struct EncoderGradients {
  std::vector<Matrix> weights;
  std::vector<Vector> biases;
};

/// Cached activations of one forward pass; consumed by backward().
struct ForwardCache {
  Matrix input;
  std::vector<Matrix> pre_activations;   // per layer, n x out
  std::vector<Matrix> post_activations;  // per non-final layer, n x out
};

/// The feature extractor F(.;theta): affine layers with an elementwise
/// nonlinearity between them (none after the last). Embeddings are NOT
/// normalized here; cosine-based consumers normalize where the math says so.
class Encoder {
 public:
  struct Layer {
    Matrix weight;  // out x in
    Vector bias;    // out
  };

  explicit Encoder(EncoderArchitecture arch) : arch_(std::move(arch)) {
    arch_.validate();
    for (const auto& [out, in] : arch_.layer_shapes()) {
      layers_.push_back({Matrix::Zero(out, in), Vector::Zero(out)});
    }
  }

  /// Gaussian init, std 1/sqrt(fan_in), zero biases.
  static Encoder random_init(EncoderArchitecture arch, Rng& rng) {
    Encoder enc(std::move(arch));
    for (auto& layer : enc.layers_) {
      const double std = 1.0 / std::sqrt(static_cast<double>(layer.weight.cols()));
      for (Index r = 0; r < layer.weight.rows(); ++r) {
        for (Index c = 0; c < layer.weight.cols(); ++c) {
          layer.weight(r, c) = rng.normal(0.0, std);
        }
      }
    }
    return enc;
  }

  const EncoderArchitecture& architecture() const { return arch_; }
  const std::vector<Layer>& layers() const { return layers_; }
  std::vector<Layer>& layers() { return layers_; }

  Index parameter_count() const {
    Index n = 0;
    for (const auto& l : layers_) n += l.weight.size() + l.bias.size();
    return n;
  }

  /// Batch forward; rows of `inputs` are samples.
  Matrix forward(const Matrix& inputs) const {
    check_input(inputs);
    Matrix x = inputs;
    for (std::size_t i = 0; i < layers_.size(); ++i) {
      x = affine(layers_[i], x);
      if (i + 1 < layers_.size()) x = activate(x);
    }
    return x;
  }

  Matrix forward(const Matrix& inputs, ForwardCache& cache) const {
    check_input(inputs);
    cache.input = inputs;
    cache.pre_activations.clear();
    cache.post_activations.clear();
    Matrix x = inputs;
    for (std::size_t i = 0; i < layers_.size(); ++i) {
      x = affine(layers_[i], x);
      cache.pre_activations.push_back(x);
      if (i + 1 < layers_.size()) {
        x = activate(x);
        cache.post_activations.push_back(x);
      }
    }
    return x;
  }

  /// Reverse-mode pass. `grad_embeddings` is dLoss/dF(x), n x m.
  EncoderGradients backward(const ForwardCache& cache, const Matrix& grad_embeddings) const {
    if (cache.pre_activations.size() != layers_.size()) {
      throw StaleCacheError("Encoder::backward: cache does not match this architecture");
    }
    if (grad_embeddings.rows() != cache.input.rows() ||
        grad_embeddings.cols() != arch_.output_dim) {
      throw StaleCacheError("Encoder::backward: gradient shape does not match cached batch");
    }
    EncoderGradients grads;
    grads.weights.resize(layers_.size());
    grads.biases.resize(layers_.size());

    Matrix delta = grad_embeddings;  // n x out of the layer at hand
    for (std::size_t li = layers_.size(); li-- > 0;) {
      if (li + 1 < layers_.size()) {
        delta = backprop_activation(delta, cache.pre_activations[li]);
      }
      const Matrix& layer_in = li == 0 ? cache.input : cache.post_activations[li - 1];
      grads.weights[li] = delta.transpose() * layer_in;
      grads.biases[li] = delta.colwise().sum().transpose();
      if (li > 0) {
        delta = delta * layers_[li].weight;  // n x in
      }
    }
    return grads;
  }

 private:
  void check_input(const Matrix& inputs) const {
    if (inputs.cols() != arch_.input_dim) {
      throw ShapeMismatchError("Encoder::forward: input dim " +
                               std::to_string(inputs.cols()) + " != architecture dim " +
                               std::to_string(arch_.input_dim));
    }
  }

  static Matrix affine(const Layer& l, const Matrix& x) {
    Matrix y = x * l.weight.transpose();
    y.rowwise() += l.bias.transpose();
    return y;
  }

  Matrix activate(const Matrix& x) const {
    if (arch_.nonlinearity == Nonlinearity::identity) return x;
    return x.cwiseMax(0.0);
  }

  Matrix backprop_activation(const Matrix& delta, const Matrix& pre) const {
    if (arch_.nonlinearity == Nonlinearity::identity) return delta;
    return ((pre.array() > 0.0).cast<double>() * delta.array()).matrix();
  }

  EncoderArchitecture arch_;
  std::vector<Layer> layers_;
};

/// theta = (1 - beta) * theta_prev + beta * theta_curr, elementwise.
inline Encoder interpolate(const Encoder& previous, const Encoder& current, double beta) {
  if (!(previous.architecture() == current.architecture())) {
    throw ArchitectureMismatchError("interpolate: architectures differ");
  }
  Encoder out = current;
  for (std::size_t i = 0; i < out.layers().size(); ++i) {
    out.layers()[i].weight =
        (1.0 - beta) * previous.layers()[i].weight + beta * current.layers()[i].weight;
    out.layers()[i].bias =
        (1.0 - beta) * previous.layers()[i].bias + beta * current.layers()[i].bias;
  }
  return out;
}

struct OptimizerConfig {
  double learning_rate = 0.01;  // eta
  double frozen_rate = 0.001;   // eta' for rows of previously seen classes
  double lr_decay = 0.1;
  int lr_decay_every = 20;  // epochs
  double momentum = 0.0;

  void validate() const {
    if (!(learning_rate >= 0.0) || !(frozen_rate >= 0.0)) {
      throw InvalidSpecError("OptimizerConfig: rates must be nonnegative");
    }
    if (frozen_rate > learning_rate) {
      throw InvalidSpecError("OptimizerConfig: frozen_rate must not exceed learning_rate");
    }
    if (momentum < 0.0 || momentum >= 1.0) {
      throw InvalidSpecError("OptimizerConfig: momentum must be in [0, 1)");
    }
  }

  /// The schedule applies to eta only; eta' stays fixed.
  double rate_at_epoch(int epoch) const {
    return learning_rate * std::pow(lr_decay, epoch / lr_decay_every);
  }
};

/// Encoder parameters plus the cosine-classifier row matrix and the
/// class -> row registry.
class ModelState {
 public:
  ModelState(const EncoderArchitecture& arch, Rng& rng)
      : encoder_(Encoder::random_init(arch, rng)),
        classifier_(0, arch.output_dim) {}

  explicit ModelState(Encoder enc)
      : encoder_(std::move(enc)), classifier_(0, encoder_.architecture().output_dim) {}

  const Encoder& encoder() const { return encoder_; }
  Encoder& encoder() { return encoder_; }
  const Matrix& classifier() const { return classifier_; }
  Matrix& classifier() { return classifier_; }
  const std::map<int, Index>& registry() const { return registry_; }

  Index row_of(int class_id) const {
    auto it = registry_.find(class_id);
    if (it == registry_.end()) {
      throw UnknownClassError("ModelState: class " + std::to_string(class_id) +
                              " not registered");
    }
    return it->second;
  }

  bool knows(int class_id) const { return registry_.count(class_id) > 0; }

  /// Class ids in row order.
  std::vector<int> classes_by_row() const {
    std::vector<int> ids(static_cast<std::size_t>(classifier_.rows()));
    for (const auto& [id, row] : registry_) ids[static_cast<std::size_t>(row)] = id;
    return ids;
  }

  /// Appends one zero-mean Gaussian row (std 1/sqrt(m)) per new class,
  /// ascending class id. Existing rows are untouched.
  void expand_classifier(const std::set<int>& new_classes, Rng& rng) {
    for (int id : new_classes) {
      if (registry_.count(id)) {
        throw DuplicateClassError("expand_classifier: class " + std::to_string(id) +
                                  " already registered");
      }
    }
    const Index m = classifier_.cols();
    const Index old_rows = classifier_.rows();
    classifier_.conservativeResize(old_rows + static_cast<Index>(new_classes.size()), m);
    const double std = 1.0 / std::sqrt(static_cast<double>(m));
    Index row = old_rows;
    for (int id : new_classes) {
      for (Index c = 0; c < m; ++c) classifier_(row, c) = rng.normal(0.0, std);
      registry_[id] = row;
      ++row;
    }
  }

  /// Deep copy; the live state never aliases it (value semantics).
  ModelState snapshot() const { return *this; }

  /// Bitwise parameter equality (snapshot comparison support).
  bool equals(const ModelState& other) const {
    const auto same = [](const auto& a, const auto& b) {
      return a.rows() == b.rows() && a.cols() == b.cols() &&
             std::memcmp(a.data(), b.data(), sizeof(double) * a.size()) == 0;
    };
    if (!(encoder_.architecture() == other.encoder_.architecture())) return false;
    for (std::size_t li = 0; li < encoder_.layers().size(); ++li) {
      if (!same(encoder_.layers()[li].weight, other.encoder_.layers()[li].weight)) return false;
      if (!same(encoder_.layers()[li].bias, other.encoder_.layers()[li].bias)) return false;
    }
    return same(classifier_, other.classifier_) && registry_ == other.registry_;
  }

  /// Cosine argmax over all registered rows. The embedding norm scales every
  /// score equally, so only row norms are divided out.
  std::vector<int> classify(const Matrix& inputs) const {
    const Matrix z = encoder_.forward(inputs);
    Matrix rows_n = classifier_;
    for (Index r = 0; r < rows_n.rows(); ++r) {
      const double n = rows_n.row(r).norm();
      if (n > kZeroNormTol) rows_n.row(r) /= n;
    }
    const Matrix scores = z * rows_n.transpose();  // n x classes
    const auto ids = classes_by_row();
    std::vector<int> out(static_cast<std::size_t>(z.rows()));
    for (Index i = 0; i < z.rows(); ++i) {
      Index best;
      scores.row(i).maxCoeff(&best);
      out[static_cast<std::size_t>(i)] = ids[static_cast<std::size_t>(best)];
    }
    return out;
  }

  // --- checkpoint ------------------------------------------------------
  // magic, u32 version, architecture (u32 input, u32 n_hidden, u32...,
  // u32 output, u32 nonlinearity), per layer W row-major + b as f64, then
  // u32 classifier rows, rows as f64, and (i32 class_id, u32 row) pairs.

  void save_checkpoint(std::ostream& os) const {
    detail::write_magic(os, kMagic);
    detail::write_raw<std::uint32_t>(os, kVersion);
    const auto& arch = encoder_.architecture();
    detail::write_raw<std::uint32_t>(os, static_cast<std::uint32_t>(arch.input_dim));
    detail::write_raw<std::uint32_t>(os, static_cast<std::uint32_t>(arch.hidden_dims.size()));
    for (Index h : arch.hidden_dims) {
      detail::write_raw<std::uint32_t>(os, static_cast<std::uint32_t>(h));
    }
    detail::write_raw<std::uint32_t>(os, static_cast<std::uint32_t>(arch.output_dim));
    detail::write_raw<std::uint32_t>(os, arch.nonlinearity == Nonlinearity::rectifier ? 0 : 1);
    for (const auto& layer : encoder_.layers()) {
      for (Index r = 0; r < layer.weight.rows(); ++r) {
        for (Index c = 0; c < layer.weight.cols(); ++c) {
          detail::write_raw<double>(os, layer.weight(r, c));
        }
      }
      for (Index r = 0; r < layer.bias.size(); ++r) {
        detail::write_raw<double>(os, layer.bias[r]);
      }
    }
    detail::write_raw<std::uint32_t>(os, static_cast<std::uint32_t>(classifier_.rows()));
    for (Index r = 0; r < classifier_.rows(); ++r) {
      for (Index c = 0; c < classifier_.cols(); ++c) {
        detail::write_raw<double>(os, classifier_(r, c));
      }
    }
    for (const auto& [id, row] : registry_) {
      detail::write_raw<std::int32_t>(os, id);
      detail::write_raw<std::uint32_t>(os, static_cast<std::uint32_t>(row));
    }
  }

  void save_checkpoint_file(const std::string& path) const {
    auto os = detail::open_out(path);
    save_checkpoint(os);
    if (!os) throw IoError("short write: " + path);
  }

  static ModelState load_checkpoint(std::istream& is) {
    detail::expect_magic(is, kMagic, "model checkpoint");
    const auto version = detail::read_raw<std::uint32_t>(is, "version");
    if (version != kVersion) {
      throw ParseError("checkpoint: unsupported format version " + std::to_string(version));
    }
    EncoderArchitecture arch;
    arch.input_dim = detail::read_raw<std::uint32_t>(is, "input_dim");
    const auto n_hidden = detail::read_raw<std::uint32_t>(is, "hidden count");
    for (std::uint32_t i = 0; i < n_hidden; ++i) {
      arch.hidden_dims.push_back(detail::read_raw<std::uint32_t>(is, "hidden dim"));
    }
    arch.output_dim = detail::read_raw<std::uint32_t>(is, "output_dim");
    arch.nonlinearity = detail::read_raw<std::uint32_t>(is, "nonlinearity") == 0
                            ? Nonlinearity::rectifier
                            : Nonlinearity::identity;
    Encoder enc(arch);
    for (auto& layer : enc.layers()) {
      for (Index r = 0; r < layer.weight.rows(); ++r) {
        for (Index c = 0; c < layer.weight.cols(); ++c) {
          layer.weight(r, c) = detail::read_raw<double>(is, "weight");
        }
      }
      for (Index r = 0; r < layer.bias.size(); ++r) {
        layer.bias[r] = detail::read_raw<double>(is, "bias");
      }
    }
    ModelState state(std::move(enc));
    const auto rows = detail::read_raw<std::uint32_t>(is, "classifier rows");
    state.classifier_.resize(rows, arch.output_dim);
    for (Index r = 0; r < state.classifier_.rows(); ++r) {
      for (Index c = 0; c < state.classifier_.cols(); ++c) {
        state.classifier_(r, c) = detail::read_raw<double>(is, "classifier row");
      }
    }
    for (std::uint32_t i = 0; i < rows; ++i) {
      const int id = detail::read_raw<std::int32_t>(is, "registry class");
      const auto row = detail::read_raw<std::uint32_t>(is, "registry row");
      state.registry_[id] = static_cast<Index>(row);
    }
    return state;
  }

  static ModelState load_checkpoint_file(const std::string& path) {
    auto is = detail::open_in(path);
    return load_checkpoint(is);
  }

 private:
  static constexpr char kMagic[9] = "YONOCKPT";
  static constexpr std::uint32_t kVersion = 1;

  Encoder encoder_;
  Matrix classifier_;
  std::map<int, Index> registry_;
};

/// Momentum buffers; unused (and empty) at momentum = 0.
struct SgdState {
  std::vector<Matrix> vel_weights;
  std::vector<Vector> vel_biases;
  Matrix vel_classifier;
};

/// One SGD step with partial freezing: theta and current-class classifier
/// rows move at `eta`, rows of earlier classes at `eta_old`.
inline void sgd_step(ModelState& state, const EncoderGradients& grads,
                     const Matrix& classifier_grads, const std::set<int>& current_classes,
                     double eta, double eta_old, double momentum = 0.0,
                     SgdState* sgd = nullptr) {
  auto& layers = state.encoder().layers();
  if (grads.weights.size() != layers.size() || grads.biases.size() != layers.size()) {
    throw ShapeMismatchError("sgd_step: encoder gradient layer count mismatch");
  }
  if (classifier_grads.rows() != state.classifier().rows() ||
      classifier_grads.cols() != state.classifier().cols()) {
    throw ShapeMismatchError("sgd_step: classifier gradient shape mismatch");
  }

  const bool use_momentum = momentum > 0.0 && sgd != nullptr;
  if (use_momentum) {
    if (sgd->vel_weights.size() != layers.size()) {
      sgd->vel_weights.clear();
      sgd->vel_biases.clear();
      for (const auto& l : layers) {
        sgd->vel_weights.push_back(Matrix::Zero(l.weight.rows(), l.weight.cols()));
        sgd->vel_biases.push_back(Vector::Zero(l.bias.size()));
      }
    }
    if (sgd->vel_classifier.rows() != state.classifier().rows()) {
      Matrix grown = Matrix::Zero(state.classifier().rows(), state.classifier().cols());
      if (sgd->vel_classifier.rows() > 0) {
        grown.topRows(sgd->vel_classifier.rows()) = sgd->vel_classifier;
      }
      sgd->vel_classifier = std::move(grown);
    }
  }

  for (std::size_t i = 0; i < layers.size(); ++i) {
    if (layers[i].weight.rows() != grads.weights[i].rows() ||
        layers[i].weight.cols() != grads.weights[i].cols()) {
      throw ShapeMismatchError("sgd_step: weight gradient shape mismatch");
    }
    if (use_momentum) {
      sgd->vel_weights[i] = momentum * sgd->vel_weights[i] + grads.weights[i];
      sgd->vel_biases[i] = momentum * sgd->vel_biases[i] + grads.biases[i];
      layers[i].weight -= eta * sgd->vel_weights[i];
      layers[i].bias -= eta * sgd->vel_biases[i];
    } else {
      layers[i].weight -= eta * grads.weights[i];
      layers[i].bias -= eta * grads.biases[i];
    }
  }

  const auto ids = state.classes_by_row();
  for (Index r = 0; r < state.classifier().rows(); ++r) {
    const bool current = current_classes.count(ids[static_cast<std::size_t>(r)]) > 0;
    const double rate = current ? eta : eta_old;
    if (use_momentum) {
      sgd->vel_classifier.row(r) =
          momentum * sgd->vel_classifier.row(r) + classifier_grads.row(r);
      state.classifier().row(r) -= rate * sgd->vel_classifier.row(r);
    } else {
      state.classifier().row(r) -= rate * classifier_grads.row(r);
    }
  }
}

}  // namespace yono
