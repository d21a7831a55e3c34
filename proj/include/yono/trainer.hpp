#pragma once

#include <chrono>
#include <limits>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "yono/datasets.hpp"
#include "yono/encoder.hpp"
#include "yono/losses.hpp"
#include "yono/metrics.hpp"
#include "yono/prototypes.hpp"
#include "yono/synthesis.hpp"

namespace yono {

enum class Mode { naive, yono, yono_plus, joint_oracle };

inline const char* to_string(Mode m) {
  switch (m) {
    case Mode::naive: return "naive";
    case Mode::yono: return "yono";
    case Mode::yono_plus: return "yono+";
    case Mode::joint_oracle: return "joint";
  }
  return "?";
}

inline Mode mode_from_string(const std::string& s) {
  if (s == "naive") return Mode::naive;
  if (s == "yono") return Mode::yono;
  if (s == "yono+" || s == "yono_plus") return Mode::yono_plus;
  if (s == "joint" || s == "joint_oracle") return Mode::joint_oracle;
  throw ConfigError("unknown mode: " + s);
}

struct TrainerConfig {
  Mode mode = Mode::yono_plus;
  int epochs = 40;
  int mean_shift_iterations = 5;  // R
  Index batch_size = 64;
  double lambda = 0.6;            // mean-shift step size
  double beta = 0.6;              // model interpolation
  double kappa = kDefaultKappa;   // truncation half-width
  ArcfaceConfig arcface;
  OptimizerConfig optimizer;
  LossWeights weights;
  std::vector<Index> hidden_dims{64, 64};
  Index embedding_dim = 16;
  std::uint64_t seed = 1;

  // Component toggles; NAIVE mode forces the first four off.
  bool prototype_replay = true;
  bool synthesis_replay = true;
  bool distillation = true;
  bool interpolation = true;
  bool partial_freeze = true;

  void validate() const {
    if (epochs < 1) throw InvalidSpecError("TrainerConfig: epochs must be >= 1");
    if (mean_shift_iterations < 1) {
      throw InvalidSpecError("TrainerConfig: mean_shift_iterations must be >= 1");
    }
    if (batch_size < 1) throw InvalidSpecError("TrainerConfig: batch_size must be >= 1");
    if (!(lambda > 0.0) || lambda > 1.0) {
      throw InvalidSpecError("TrainerConfig: lambda must be in (0, 1]");
    }
    if (beta < 0.0 || beta > 1.0) {
      throw InvalidSpecError("TrainerConfig: beta must be in [0, 1]");
    }
    if (!(kappa > 0.0)) throw InvalidSpecError("TrainerConfig: kappa must be positive");
    if (weights.prototype < 0.0 || weights.classifier < 0.0 || weights.distillation < 0.0) {
      throw InvalidSpecError("TrainerConfig: loss weights must be nonnegative");
    }
    arcface.validate();
    optimizer.validate();
    if (embedding_dim < 2) throw InvalidSpecError("TrainerConfig: embedding_dim must be >= 2");
  }

  /// Copy with the toggles a mode implies.
  TrainerConfig resolved() const {
    TrainerConfig cfg = *this;
    if (cfg.mode == Mode::naive) {
      cfg.prototype_replay = false;
      cfg.synthesis_replay = false;
      cfg.distillation = false;
      cfg.interpolation = false;
      cfg.partial_freeze = false;
    }
    if (cfg.mode != Mode::yono_plus) cfg.synthesis_replay = false;
    return cfg;
  }

  EncoderArchitecture architecture(Index input_dim) const {
    return EncoderArchitecture{input_dim, hidden_dims, embedding_dim,
                               Nonlinearity::rectifier};
  }
};

struct TaskResult {
  int task_id = -1;
  std::vector<int> classes;
  std::vector<double> epoch_losses;  // mean total loss per epoch
  std::string checkpoint;            // filled by the harness when saved
};

struct RunRecord {
  std::string mode;
  std::uint64_t seed = 0;
  std::vector<TaskResult> tasks;
  AccuracyMatrix accuracy;
  double average_accuracy = 0.0;
  double average_forgetting = 0.0;  // NaN for single-phase runs
  double all_phase_mean_accuracy = 0.0;
  double wall_seconds = 0.0;
};

namespace detail {

/// Condenses every class of the task from the current encoder's embeddings
/// and overwrites the memory entries.
inline void condense_task_prototypes(const Encoder& encoder, const Task& task,
                                     PrototypeMemory& memory, const TrainerConfig& cfg,
                                     Rng& rng) {
  const Matrix z = encoder.forward(task.train.features);
  CondenseOptions opts;
  opts.lambda = cfg.lambda;
  opts.iterations = cfg.mean_shift_iterations;
  for (int cls : task.classes) {
    std::vector<Index> rows;
    for (Index i = 0; i < z.rows(); ++i) {
      if (task.train.labels[static_cast<std::size_t>(i)] == cls) rows.push_back(i);
    }
    if (rows.empty()) {
      throw EmptyClassError("train_task: class " + std::to_string(cls) + " has no samples");
    }
    Matrix class_z(static_cast<Index>(rows.size()), z.cols());
    for (std::size_t i = 0; i < rows.size(); ++i) {
      class_z.row(static_cast<Index>(i)) = z.row(rows[i]);
    }
    memory.save(condense_class(class_z, cls, task.task_id, opts, rng));
  }
}

/// Anchor set for L_{t,P}: the full memory when the prototype component is
/// on, otherwise only the current task's freshly condensed prototypes.
inline AnchorSet prototype_anchors(const PrototypeMemory& memory, const Task& task,
                                   bool use_stored) {
  if (use_stored) return AnchorSet::from_memory(memory);
  return AnchorSet::from_memory(memory.subset(task.classes));
}

}  // namespace detail

/// Algorithm-1 body for one task: per epoch, condense + save prototypes,
/// then step over current-task mini-batches with the mode's replay source;
/// after the epochs, interpolate against the previous model.
///
/// `previous_model` is the post-interpolation snapshot of task t-1 (the KD
/// teacher and interpolation target); pass nullptr at t = 1.
inline TaskResult train_task(ModelState& state, const Task& task, PrototypeMemory& memory,
                             const TrainerConfig& raw_cfg, const ModelState* previous_model,
                             Rng& rng) {
  const TrainerConfig cfg = raw_cfg.resolved();
  cfg.validate();

  for (int cls : task.classes) {
    if (state.knows(cls)) {
      throw ClassCollisionError("train_task: class " + std::to_string(cls) +
                                " already trained (CIL contract)");
    }
  }
  const std::set<int> current_classes(task.classes.begin(), task.classes.end());
  state.expand_classifier(current_classes, rng);

  // Replay sources see C_{1:t-1} only; a snapshot taken before this task's
  // prototypes are saved.
  const PrototypeMemory old_memory = memory;
  const bool have_teacher = previous_model != nullptr;
  const bool use_kd = cfg.distillation && have_teacher;
  const bool replay_protos = cfg.prototype_replay && !old_memory.empty();
  std::optional<Synthesizer> synth;
  if (cfg.synthesis_replay && replay_protos) {
    synth.emplace(old_memory, cfg.kappa);
  }

  const Index n = task.train.size();
  const Index steps = (n + cfg.batch_size - 1) / cfg.batch_size;

  TaskResult result;
  result.task_id = task.task_id;
  result.classes = task.classes;

  SgdState sgd;
  std::vector<Index> order(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) order[static_cast<std::size_t>(i)] = i;

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    detail::condense_task_prototypes(state.encoder(), task, memory, cfg, rng);
    const AnchorSet proto_anchors =
        detail::prototype_anchors(memory, task, cfg.prototype_replay);

    const double eta = cfg.optimizer.rate_at_epoch(epoch);
    const double eta_old = cfg.partial_freeze ? cfg.optimizer.frozen_rate : eta;

    shuffle(order, rng);
    double epoch_loss = 0.0;
    for (Index step = 0; step < steps; ++step) {
      const Index start = step * cfg.batch_size;
      const Index count = std::min(cfg.batch_size, n - start);
      Matrix x(count, task.train.dim());
      std::vector<int> y(static_cast<std::size_t>(count));
      for (Index i = 0; i < count; ++i) {
        const Index r = order[static_cast<std::size_t>(start + i)];
        x.row(i) = task.train.features.row(r);
        y[static_cast<std::size_t>(i)] = task.train.labels[static_cast<std::size_t>(r)];
      }

      ForwardCache cache;
      const Matrix z = state.encoder().forward(x, cache);
      const AnchorSet w = classifier_anchors(state);

      const LossValue proto_part = prototype_loss(z, y, proto_anchors, cfg.arcface);

      LossValue classifier_part;
      if (synth.has_value()) {
        // replay budget matches the current batch, split evenly over old
        // classes
        const std::size_t per_class = std::max<std::size_t>(
            1, static_cast<std::size_t>(cfg.batch_size) / old_memory.size());
        classifier_part =
            classifier_loss_yono_plus(z, y, synth->per_class(per_class, rng), w, cfg.arcface);
      } else if (replay_protos) {
        // all stored prototypes, or a uniform subset when they outnumber
        // the batch
        if (static_cast<Index>(old_memory.size()) <= cfg.batch_size) {
          classifier_part = classifier_loss_yono(z, y, old_memory, w, cfg.arcface);
        } else {
          std::vector<int> ids = old_memory.class_ids();
          shuffle(ids, rng);
          ids.resize(static_cast<std::size_t>(cfg.batch_size));
          classifier_part = classifier_loss_yono(z, y, old_memory.subset(ids), w, cfg.arcface);
        }
      } else {
        classifier_part =
            classifier_loss_yono(z, y, PrototypeMemory(state.classifier().cols()), w,
                                 cfg.arcface);
      }

      LossValue kd_part;
      const LossValue* kd_ptr = nullptr;
      if (use_kd) {
        kd_part = kd_embedding_loss(z, previous_model->encoder().forward(x));
        kd_ptr = &kd_part;
      }

      const LossValue total = total_loss(proto_part, classifier_part, kd_ptr, cfg.weights);
      if (!std::isfinite(total.value)) {
        throw Error("train_task: loss diverged (non-finite) at task " +
                    std::to_string(task.task_id) + ", epoch " + std::to_string(epoch) +
                    "; lower the learning rate or the input scale");
      }
      epoch_loss += total.value;

      const EncoderGradients enc_grads = state.encoder().backward(cache, total.grad_embeddings);
      Matrix w_grads = Matrix::Zero(state.classifier().rows(), state.classifier().cols());
      const auto& anchor_ids = w.class_ids();
      for (Index a = 0; a < total.grad_anchors.rows(); ++a) {
        w_grads.row(state.row_of(anchor_ids[static_cast<std::size_t>(a)])) +=
            total.grad_anchors.row(a);
      }
      sgd_step(state, enc_grads, w_grads, current_classes, eta, eta_old,
               cfg.optimizer.momentum, &sgd);
    }
    result.epoch_losses.push_back(epoch_loss / static_cast<double>(steps));
  }

  if (cfg.interpolation && have_teacher) {
    state.encoder() = interpolate(previous_model->encoder(), state.encoder(), cfg.beta);
  }
  return result;
}

/// Trains the stream in order and evaluates after every task on all tasks
/// seen so far, predictions ranging over C_{1:t}.
///
/// JOINT_ORACLE trains a single model on the union of all tasks and fills
/// each row with that model's per-task accuracies (the upper-bound
/// baseline; forgetting is 0 by construction).
inline RunRecord run_stream(const TaskStream& stream, const TrainerConfig& raw_cfg,
                            std::optional<ModelState>* final_state = nullptr,
                            PrototypeMemory* final_memory = nullptr) {
  const auto t_start = std::chrono::steady_clock::now();
  const TrainerConfig cfg = raw_cfg.resolved();
  cfg.validate();
  if (stream.tasks.empty()) throw EmptyDatasetError("run_stream: empty task stream");
  {
    std::set<int> seen;
    for (const auto& task : stream.tasks) {
      for (int cls : task.classes) {
        if (!seen.insert(cls).second) {
          throw ClassCollisionError("run_stream: class " + std::to_string(cls) +
                                    " appears in more than one task");
        }
      }
    }
  }

  Rng rng(cfg.seed);
  ModelState state(cfg.architecture(stream.input_dim), rng);
  PrototypeMemory memory(cfg.embedding_dim);

  RunRecord record;
  record.mode = to_string(cfg.mode);
  record.seed = cfg.seed;

  if (cfg.mode == Mode::joint_oracle) {
    Task joint;
    joint.task_id = 0;
    Index total = 0;
    for (const auto& t : stream.tasks) total += t.train.size();
    joint.train.features.resize(total, stream.input_dim);
    Index row = 0;
    for (const auto& t : stream.tasks) {
      joint.classes.insert(joint.classes.end(), t.classes.begin(), t.classes.end());
      for (Index i = 0; i < t.train.size(); ++i) {
        joint.train.features.row(row++) = t.train.features.row(i);
        joint.train.labels.push_back(t.train.labels[static_cast<std::size_t>(i)]);
      }
    }
    std::sort(joint.classes.begin(), joint.classes.end());
    record.tasks.push_back(train_task(state, joint, memory, cfg, nullptr, rng));

    std::vector<const Dataset*> all_tests;
    for (const auto& t : stream.tasks) all_tests.push_back(&t.test);
    const std::vector<double> acc = evaluate(state, all_tests);
    for (std::size_t i = 0; i < stream.tasks.size(); ++i) {
      record.accuracy.append_row(
          std::vector<double>(acc.begin(), acc.begin() + static_cast<long>(i + 1)));
    }
  } else {
    std::optional<ModelState> teacher;
    std::vector<const Dataset*> tests;
    for (const auto& task : stream.tasks) {
      record.tasks.push_back(
          train_task(state, task, memory, cfg, teacher ? &*teacher : nullptr, rng));
      teacher = state.snapshot();  // post-interpolation model for task t+1
      tests.push_back(&task.test);
      record.accuracy.append_row(evaluate(state, tests));
    }
  }

  record.average_accuracy = average_accuracy(record.accuracy);
  record.all_phase_mean_accuracy = all_phase_mean_accuracy(record.accuracy);
  record.average_forgetting = record.accuracy.phases() >= 2
                                  ? average_forgetting(record.accuracy)
                                  : std::numeric_limits<double>::quiet_NaN();
  record.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();

  if (final_state != nullptr) *final_state = state;
  if (final_memory != nullptr) *final_memory = memory;
  return record;
}

}  // namespace yono
