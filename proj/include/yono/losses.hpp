#pragma once

#include <cmath>
#include <map>
#include <string>
#include <vector>

#include "yono/encoder.hpp"
#include "yono/geometry.hpp"
#include "yono/prototypes.hpp"
#include "yono/synthesis.hpp"

namespace yono {

struct ArcfaceConfig {
  double margin = 0.25;            // delta, additive angle penalty
  double temperature = 1.0 / 16;   // tau

  void validate() const {
    if (margin < 0.0 || margin >= kHalfPi) {
      throw InvalidSpecError("ArcfaceConfig: margin must be in [0, pi/2)");
    }
    if (!(temperature > 0.0)) {
      throw InvalidSpecError("ArcfaceConfig: temperature must be positive");
    }
  }

  static constexpr double kHalfPi = 1.57079632679489662;
};

/// Class-indexed anchor rows: stored prototypes or classifier rows.
/// Rows are used unnormalized; the cosine normalizes.
class AnchorSet {
 public:
  AnchorSet(std::vector<int> class_ids, Matrix rows)
      : ids_(std::move(class_ids)), rows_(std::move(rows)) {
    if (static_cast<Index>(ids_.size()) != rows_.rows()) {
      throw DimensionMismatchError("AnchorSet: id/row count mismatch");
    }
    for (std::size_t i = 0; i < ids_.size(); ++i) {
      if (!index_.emplace(ids_[i], static_cast<Index>(i)).second) {
        throw DuplicateClassError("AnchorSet: duplicate class " + std::to_string(ids_[i]));
      }
      if (rows_.row(static_cast<Index>(i)).norm() <= kZeroNormTol) {
        throw ZeroVectorError("AnchorSet: zero anchor row for class " +
                              std::to_string(ids_[i]));
      }
    }
  }

  /// All stored prototypes, ascending class id.
  static AnchorSet from_memory(const PrototypeMemory& memory) {
    const auto ids = memory.class_ids();
    Matrix rows(static_cast<Index>(ids.size()), memory.dimension());
    for (std::size_t i = 0; i < ids.size(); ++i) {
      rows.row(static_cast<Index>(i)) = memory.at(ids[i]).direction.transpose();
    }
    return AnchorSet(ids, std::move(rows));
  }

  Index size() const { return rows_.rows(); }
  Index dimension() const { return rows_.cols(); }
  const std::vector<int>& class_ids() const { return ids_; }
  const Matrix& rows() const { return rows_; }

  Index index_of(int class_id) const {
    auto it = index_.find(class_id);
    if (it == index_.end()) {
      throw UnknownClassError("AnchorSet: unknown class " + std::to_string(class_id));
    }
    return it->second;
  }

 private:
  std::vector<int> ids_;
  std::map<int, Index> index_;
  Matrix rows_;
};

inline AnchorSet classifier_anchors(const ModelState& state) {
  return AnchorSet(state.classes_by_row(), state.classifier());
}

/// A scalar objective with the gradients the trainer consumes. Zero-sized
/// gradient blocks mean "no gradient flows to this group".
struct LossValue {
  double value = 0.0;
  Matrix grad_embeddings;  // n x m
  Matrix grad_anchors;     // anchors x m, aligned with the AnchorSet
};

namespace detail {

/// Value and gradients of one arcface term:
///   -log softmax_k over logits { cos(theta_k + delta)/tau, c(z, a_l)/tau }.
/// The margined angle is clamped to [0, pi]; every cosine is clamped to
/// [-1, 1] before arccos, so the value is always finite.
struct ArcfaceTerm {
  double value = 0.0;
  Vector grad_z;
  Matrix grad_anchors;  // zero-sized when with_anchor_grads is false
};

inline ArcfaceTerm arcface_term(const Vector& z, const AnchorSet& anchors, int target_class,
                                const ArcfaceConfig& cfg, bool with_z_grad,
                                bool with_anchor_grads) {
  const Index k = anchors.index_of(target_class);
  const Index K = anchors.size();
  const double zn = z.norm();
  if (zn <= kZeroNormTol) {
    throw ZeroVectorError("arcface: zero embedding");
  }
  const double tau = cfg.temperature;

  Vector an(K);
  Vector cos_all(K);
  for (Index l = 0; l < K; ++l) {
    an[l] = anchors.rows().row(l).norm();
    cos_all[l] = std::clamp(z.dot(anchors.rows().row(l).transpose()) / (zn * an[l]), -1.0, 1.0);
  }

  // logits, with the margin applied to the target only
  Vector logits = cos_all / tau;
  double dlogit_dcos_k;  // d s_k / d c_k
  if (cfg.margin == 0.0) {
    dlogit_dcos_k = 1.0 / tau;
  } else {
    const double theta = std::acos(cos_all[k]);
    const double phi = theta + cfg.margin;
    if (phi >= kPi) {
      logits[k] = -1.0 / tau;
      dlogit_dcos_k = 0.0;  // clamped at cos = -1
    } else {
      logits[k] = std::cos(phi) / tau;
      const double sin_theta = std::sqrt(std::max(1.0 - cos_all[k] * cos_all[k], 0.0));
      dlogit_dcos_k = std::sin(phi) / (tau * std::max(sin_theta, 1e-12));
    }
  }

  const double top = logits.maxCoeff();
  const Vector expv = (logits.array() - top).exp();
  const double sum = expv.sum();
  ArcfaceTerm term;
  term.value = std::log(sum) + top - logits[k];

  if (!with_z_grad && !with_anchor_grads) return term;

  // dL/d c_l via the softmax
  Vector dcos(K);
  for (Index l = 0; l < K; ++l) {
    const double p = expv[l] / sum;
    dcos[l] = (l == k) ? (p - 1.0) * dlogit_dcos_k : p / tau;
  }

  if (with_z_grad) {
    term.grad_z = Vector::Zero(z.size());
    for (Index l = 0; l < K; ++l) {
      // grad_z c_l = (a_l / ||a_l|| - c_l z / ||z||) / ||z||
      term.grad_z +=
          dcos[l] * (anchors.rows().row(l).transpose() / an[l] - cos_all[l] * z / zn) / zn;
    }
  }
  if (with_anchor_grads) {
    term.grad_anchors = Matrix::Zero(K, z.size());
    for (Index l = 0; l < K; ++l) {
      term.grad_anchors.row(l) =
          dcos[l] * (z.transpose() / (zn * an[l]) -
                     cos_all[l] * anchors.rows().row(l) / (an[l] * an[l]));
    }
  }
  return term;
}

}  // namespace detail

/// Single-sample arcface with gradients for the embedding and every anchor.
inline LossValue arcface(const Vector& z, const AnchorSet& anchors, int target_class,
                         const ArcfaceConfig& cfg) {
  const auto term = detail::arcface_term(z, anchors, target_class, cfg, true, true);
  LossValue out;
  out.value = term.value;
  out.grad_embeddings = term.grad_z.transpose();
  out.grad_anchors = term.grad_anchors;
  return out;
}

/// L_{t,P}: mean arcface of each sample against its class prototype, with
/// all stored prototypes as the anchor set. Prototypes are constants here;
/// gradients flow to the embeddings only.
inline LossValue prototype_loss(const Matrix& embeddings, const std::vector<int>& labels,
                                const AnchorSet& prototype_anchors, const ArcfaceConfig& cfg) {
  const Index n = embeddings.rows();
  if (n == 0) throw EmptyClassError("prototype_loss: empty batch");
  if (static_cast<Index>(labels.size()) != n) {
    throw DimensionMismatchError("prototype_loss: label count mismatch");
  }
  LossValue out;
  out.grad_embeddings = Matrix::Zero(n, embeddings.cols());
  for (Index i = 0; i < n; ++i) {
    const auto term = detail::arcface_term(embeddings.row(i).transpose(), prototype_anchors,
                                           labels[static_cast<std::size_t>(i)], cfg, true, false);
    out.value += term.value / static_cast<double>(n);
    out.grad_embeddings.row(i) = term.grad_z.transpose() / static_cast<double>(n);
  }
  return out;
}

namespace detail {

/// Shared body of the two classifier losses: mean arcface of the current
/// batch plus mean arcface of a replay batch of constant embeddings.
inline LossValue classifier_loss(const Matrix& embeddings, const std::vector<int>& labels,
                                 const Matrix& replay_embeddings,
                                 const std::vector<int>& replay_labels,
                                 const AnchorSet& classifier, const ArcfaceConfig& cfg) {
  const Index n = embeddings.rows();
  if (n == 0) throw EmptyClassError("classifier_loss: empty batch");
  LossValue out;
  out.grad_embeddings = Matrix::Zero(n, embeddings.cols());
  out.grad_anchors = Matrix::Zero(classifier.size(), classifier.dimension());
  for (Index i = 0; i < n; ++i) {
    const auto term = arcface_term(embeddings.row(i).transpose(), classifier,
                                   labels[static_cast<std::size_t>(i)], cfg, true, true);
    out.value += term.value / static_cast<double>(n);
    out.grad_embeddings.row(i) = term.grad_z.transpose() / static_cast<double>(n);
    out.grad_anchors += term.grad_anchors / static_cast<double>(n);
  }
  const Index nr = replay_embeddings.rows();
  for (Index i = 0; i < nr; ++i) {
    const auto term = arcface_term(replay_embeddings.row(i).transpose(), classifier,
                                   replay_labels[static_cast<std::size_t>(i)], cfg, false, true);
    out.value += term.value / static_cast<double>(nr);
    out.grad_anchors += term.grad_anchors / static_cast<double>(nr);
  }
  return out;
}

}  // namespace detail

/// L_{t,C}: current-task term plus replay of the stored prototypes
/// themselves (one term per stored class, weight 1/|C_{1:t-1}|).
inline LossValue classifier_loss_yono(const Matrix& embeddings, const std::vector<int>& labels,
                                      const PrototypeMemory& replay,
                                      const AnchorSet& classifier, const ArcfaceConfig& cfg) {
  const auto ids = replay.class_ids();
  Matrix replay_rows(static_cast<Index>(ids.size()), classifier.dimension());
  std::vector<int> replay_labels;
  replay_labels.reserve(ids.size());
  for (std::size_t i = 0; i < ids.size(); ++i) {
    replay_rows.row(static_cast<Index>(i)) = replay.at(ids[i]).direction.transpose();
    replay_labels.push_back(ids[i]);
  }
  return detail::classifier_loss(embeddings, labels, replay_rows, replay_labels, classifier, cfg);
}

/// L_{t,C+}: current-task term plus replay of synthesized embeddings
/// (weight 1/|D'_t|).
inline LossValue classifier_loss_yono_plus(const Matrix& embeddings,
                                           const std::vector<int>& labels,
                                           const SyntheticBatch& synthetic,
                                           const AnchorSet& classifier,
                                           const ArcfaceConfig& cfg) {
  return detail::classifier_loss(embeddings, labels, synthetic.embeddings, synthetic.class_ids,
                                 classifier, cfg);
}

/// L_{t,KD} in embedding space: mean squared distance between the two
/// encoders' outputs; the gradient targets the current embeddings.
inline LossValue kd_embedding_loss(const Matrix& current, const Matrix& previous) {
  if (current.rows() != previous.rows() || current.cols() != previous.cols()) {
    throw ShapeMismatchError("kd_embedding_loss: embedding shape mismatch");
  }
  if (current.rows() == 0) throw EmptyClassError("kd_embedding_loss: empty batch");
  const double n = static_cast<double>(current.rows());
  const Matrix diff = current - previous;
  LossValue out;
  out.value = diff.squaredNorm() / n;
  out.grad_embeddings = (2.0 / n) * diff;
  return out;
}

struct KdLossValue {
  double value = 0.0;
  EncoderGradients encoder_grads;  // w.r.t. the current parameters only
};

/// The parameter-space KD objective: distance between F(x;theta) and
/// F(x;theta_prev), differentiated through the current encoder.
inline KdLossValue kd_loss(const Matrix& inputs, const Encoder& current,
                           const Encoder& previous) {
  if (!(current.architecture() == previous.architecture())) {
    throw ArchitectureMismatchError("kd_loss: encoder architectures differ");
  }
  ForwardCache cache;
  const Matrix z_cur = current.forward(inputs, cache);
  const Matrix z_prev = previous.forward(inputs);
  const LossValue emb = kd_embedding_loss(z_cur, z_prev);
  KdLossValue out;
  out.value = emb.value;
  out.encoder_grads = current.backward(cache, emb.grad_embeddings);
  return out;
}

struct LossWeights {
  double prototype = 1.0;
  double classifier = 1.0;
  double distillation = 30.0;
};

/// Weighted sum of the parts; gradients are the weighted sums of the
/// parts' gradients. Pass kd = nullptr when there is no teacher (t = 1).
inline LossValue total_loss(const LossValue& proto_part, const LossValue& classifier_part,
                            const LossValue* kd_part, const LossWeights& weights) {
  LossValue out;
  out.value = weights.prototype * proto_part.value + weights.classifier * classifier_part.value;
  const auto accumulate = [&](const Matrix& grad, double weight) {
    if (grad.size() == 0) return;
    if (out.grad_embeddings.size() == 0) {
      out.grad_embeddings = weight * grad;
    } else if (grad.rows() != out.grad_embeddings.rows()) {
      throw ShapeMismatchError("total_loss: component gradients cover different batches");
    } else {
      out.grad_embeddings += weight * grad;
    }
  };
  accumulate(proto_part.grad_embeddings, weights.prototype);
  accumulate(classifier_part.grad_embeddings, weights.classifier);
  out.grad_anchors = weights.classifier * classifier_part.grad_anchors;
  if (kd_part != nullptr) {
    out.value += weights.distillation * kd_part->value;
    accumulate(kd_part->grad_embeddings, weights.distillation);
  }
  return out;
}

}  // namespace yono
