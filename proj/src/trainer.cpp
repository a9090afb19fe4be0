#include "ramcg/trainer.hpp"

#include <algorithm>

namespace ramcg {

const char* to_string(AblationMode m) {
  switch (m) {
    case AblationMode::None: return "none";
    case AblationMode::NoEncoder: return "no_encoder";
    case AblationMode::PlainGcnEncoder: return "plain_gcn";
  }
  return "none";
}

const char* to_string(BaselineKind b) {
  switch (b) {
    case BaselineKind::RamCg: return "ramcg";
    case BaselineKind::Retrained: return "retrained";
    case BaselineKind::Joint: return "joint";
  }
  return "ramcg";
}

AblationMode ablation_from_string(const std::string& s) {
  if (s == "none") return AblationMode::None;
  if (s == "no_encoder") return AblationMode::NoEncoder;
  if (s == "plain_gcn") return AblationMode::PlainGcnEncoder;
  throw ConfigError("unknown ablation mode '" + s + "' (none|no_encoder|plain_gcn)");
}

BaselineKind baseline_from_string(const std::string& s) {
  if (s == "ramcg") return BaselineKind::RamCg;
  if (s == "retrained") return BaselineKind::Retrained;
  if (s == "joint") return BaselineKind::Joint;
  throw ConfigError("unknown baseline '" + s + "' (ramcg|retrained|joint)");
}

void TrainPlan::validate() const {
  if (epochs_per_task < 1) throw ConfigError("plan: epochs_per_task must be >= 1");
  if (lr <= 0.0) throw ConfigError("plan: lr must be > 0");
  if (channels < 1) throw ConfigError("plan: channels must be >= 1");
  if (stack < 1) throw ConfigError("plan: stack must be >= 1");
  if (d_enc < 1) throw ConfigError("plan: d_enc must be >= 1");
  if (select_ratio <= 0.0 || select_ratio > 100.0)
    throw ConfigError("plan: select_ratio must be in (0,100]");
  if (leaky_slope < 0.0) throw ConfigError("plan: leaky_slope must be >= 0");
}

TaskProvider sequence_provider(const TaskSequence& seq) {
  return [&seq](int t) -> const TaskGraph& {
    if (t < 0 || t >= seq.num_tasks())
      throw ProtocolError("task index " + std::to_string(t) + " out of range");
    return seq.tasks[static_cast<size_t>(t)];
  };
}

Var RamCgModel::features_forward(Tape& t, const TaskGraph& g) {
  Var x = t.constant(g.features);
  switch (ablation) {
    case AblationMode::None: return encoder_forward(t, x, g.csr, encoder);
    case AblationMode::NoEncoder: return x;
    case AblationMode::PlainGcnEncoder: return plain_gcn_forward(t, x, g.csr, gcn);
  }
  return x;
}

Var RamCgModel::logits_forward(Tape& t, Var h, const Bitmask& mask) {
  Var f_out = masked_forward(t, h, backbone, mask);
  return matmul(t, f_out, t.param(classifier));
}

std::vector<Parameter*> RamCgModel::encoder_parameters() {
  switch (ablation) {
    case AblationMode::None: return encoder.parameters();
    case AblationMode::NoEncoder: return {};
    case AblationMode::PlainGcnEncoder: return gcn.parameters();
  }
  return {};
}

std::vector<Parameter*> RamCgModel::parameters() {
  std::vector<Parameter*> out = encoder_parameters();
  for (auto& w : backbone.weights) out.push_back(&w);
  for (auto& s : backbone.scores) out.push_back(&s);
  out.push_back(&classifier);
  return out;
}

uint64_t RamCgModel::encoder_digest() const {
  switch (ablation) {
    case AblationMode::None: return encoder.digest();
    case AblationMode::NoEncoder: return 0;
    case AblationMode::PlainGcnEncoder: {
      uint64_t h = digest_matrix(gcn.layer1.value);
      return digest_matrix(gcn.layer2.value, h);
    }
  }
  return 0;
}

RamCgModel make_model(const TrainPlan& plan, int feature_dim, int num_classes) {
  plan.validate();
  Rng rng(plan.seed);
  RamCgModel m;
  m.ablation = plan.ablation;
  m.num_classes = num_classes;
  m.leaky_slope = plan.leaky_slope;

  int backbone_in = plan.d_enc;
  if (plan.ablation == AblationMode::None) {
    RelationEncoderConfig ec;
    ec.channels = plan.channels;
    ec.stack = plan.stack;
    ec.d_in = feature_dim;
    ec.d_out = plan.d_enc;
    ec.d_hid = plan.d_hid;
    ec.leaky_slope = plan.leaky_slope;
    m.encoder = make_relation_encoder(ec, rng);
  } else if (plan.ablation == AblationMode::PlainGcnEncoder) {
    m.gcn = make_plain_gcn(feature_dim, plan.d_enc, plan.leaky_slope, rng);
  } else {
    backbone_in = feature_dim;
  }

  m.backbone = make_backbone({backbone_in, plan.d_enc, plan.d_enc}, plan.leaky_slope, rng);
  m.classifier = glorot_uniform("classifier.weight", plan.d_enc, num_classes, rng);
  m.registry = TaskMaskRegistry(m.backbone.n_theta());
  return m;
}

Scalar masked_accuracy(const Mat& logits, const std::vector<int>& labels,
                       const std::vector<uint8_t>& mask, int valid_cols) {
  long correct = 0;
  long total = 0;
  for (Index r = 0; r < logits.rows(); ++r) {
    if (!mask[static_cast<size_t>(r)]) continue;
    int best = 0;
    for (int c = 1; c < valid_cols; ++c)
      if (logits(r, c) > logits(r, best)) best = c;
    if (best == labels[static_cast<size_t>(r)]) ++correct;
    ++total;
  }
  if (total == 0) throw DataError("accuracy: empty mask");
  return static_cast<Scalar>(correct) / static_cast<Scalar>(total);
}

namespace {

struct Snapshot {
  std::vector<Mat> values;
};

Snapshot take_snapshot(const std::vector<Parameter*>& params) {
  Snapshot s;
  for (const Parameter* p : params) s.values.push_back(p->value);
  return s;
}

void restore_snapshot(const Snapshot& s, const std::vector<Parameter*>& params) {
  for (size_t i = 0; i < params.size(); ++i) params[i]->value = s.values[i];
}

Var task_logp(Tape& tape, Var logits, const TaskGraph& g, int model_classes) {
  Var sliced = logits;
  if (g.num_classes < model_classes) sliced = slice_cols(tape, logits, 0, g.num_classes);
  return log_softmax_rows(tape, sliced);
}

}  // namespace

ContinualRun::ContinualRun(TaskProvider provider, int num_tasks, int feature_dim,
                           int num_classes, TrainPlan plan)
    : provider_(std::move(provider)),
      num_tasks_(num_tasks),
      plan_(plan),
      model_(make_model(plan, feature_dim, num_classes)),
      h_cache_(static_cast<size_t>(num_tasks)) {
  if (num_tasks_ < 1) throw ConfigError("run: need at least one task");
}

Var ContinualRun::frozen_features(Tape& tape, const TaskGraph& g, int task_index) {
  // encoder parameters are fixed after task 0, so the representation can be
  // computed once per task
  auto& slot = h_cache_[static_cast<size_t>(task_index)];
  if (!slot.has_value()) {
    Tape scratch;
    Var h = model_.features_forward(scratch, g);
    slot = scratch.value(h);
  }
  return tape.constant(*slot);
}

void ContinualRun::train_task(int t) {
  if (t != trained_)
    throw ProtocolError("train_task: expected task " + std::to_string(trained_) + ", got " +
                        std::to_string(t));
  if (t >= num_tasks_) throw ProtocolError("train_task: task index beyond sequence");
  plan_.validate();

  const TaskGraph& g = provider_(t);
  const bool first_task = (t == 0);
  const auto train_mask = g.split_mask(Split::Train);
  const auto val_mask = g.split_mask(Split::Val);
  const bool has_val = g.count_split(Split::Val) > 0;

  const Bitmask union_prev = model_.registry.union_mask();

  // fresh optimizer state per task
  std::vector<Parameter*> adam_params;
  for (auto& w : model_.backbone.weights) adam_params.push_back(&w);
  for (auto& s : model_.backbone.scores) adam_params.push_back(&s);
  if (first_task) {
    for (Parameter* p : model_.encoder_parameters()) adam_params.push_back(p);
    adam_params.push_back(&model_.classifier);
  }
  std::vector<AdamState> adam_state;
  for (Parameter* p : adam_params) adam_state.push_back(make_adam_state(*p));
  AdamConfig adam_cfg{plan_.lr, plan_.adam_beta1, plan_.adam_beta2, plan_.adam_eps};

  std::vector<Parameter*> snapshot_params = adam_params;
  Snapshot best;
  Scalar best_val = -1.0;

  const size_t n_weight_layers = model_.backbone.weights.size();

  for (int epoch = 1; epoch <= plan_.epochs_per_task; ++epoch) {
    const Bitmask phi = select_topc(model_.backbone, plan_.select_ratio);
    const Bitmask xi = trainable_set(phi, union_prev);

    Tape tape;
    Var h = first_task ? model_.features_forward(tape, g) : frozen_features(tape, g, t);
    Var logits = model_.logits_forward(tape, h, phi);
    Var logp = task_logp(tape, logits, g, model_.num_classes);
    Var loss = nll(tape, logp, g.labels, train_mask);

    for (Parameter* p : model_.parameters()) p->zero_grad();
    tape.backward(loss);

    const Scalar loss_value = tape.value(loss)(0, 0);
    if (epoch == 1) {
      loss_first_.push_back(loss_value);
      loss_last_.push_back(loss_value);
    } else {
      loss_last_.back() = loss_value;
    }

    for (size_t i = 0; i < adam_params.size(); ++i) {
      Parameter* p = adam_params[i];
      const uint8_t* keep = nullptr;
      std::vector<uint8_t> keep_buf;
      if (i < n_weight_layers) {
        keep_buf = xi.slice(model_.backbone.layer_offset(i), static_cast<size_t>(p->size()));
        keep = keep_buf.data();
      }
      adam_update(*p, adam_state[i], adam_cfg, epoch, keep);
    }

    if (plan_.early_keep && has_val) {
      const Scalar val_acc =
          masked_accuracy(tape.value(logits), g.labels, val_mask, g.num_classes);
      if (val_acc > best_val) {
        best_val = val_acc;
        best = take_snapshot(snapshot_params);
      }
    }
  }

  if (plan_.early_keep && has_val && !best.values.empty())
    restore_snapshot(best, snapshot_params);

  if (first_task) {
    if (model_.ablation == AblationMode::None) model_.encoder.set_frozen(true);
    if (model_.ablation == AblationMode::PlainGcnEncoder) {
      model_.gcn.layer1.trainable = false;
      model_.gcn.layer2.trainable = false;
    }
    model_.classifier.trainable = false;
  }

  model_.registry.commit(t, select_topc(model_.backbone, plan_.select_ratio));
  ++trained_;
}

Scalar ContinualRun::evaluate_task(int t) {
  if (t >= trained_) throw ProtocolError("evaluate: task " + std::to_string(t) + " not committed");
  const TaskGraph& g = provider_(t);
  Tape tape;
  Var h = frozen_features(tape, g, t);
  Var logits = model_.logits_forward(tape, h, model_.registry.task_mask(t));
  return masked_accuracy(tape.value(logits), g.labels, g.split_mask(Split::Test), g.num_classes);
}

std::vector<Scalar> ContinualRun::evaluate_all() {
  std::vector<Scalar> row;
  for (int t = 0; t < trained_; ++t) row.push_back(evaluate_task(t));
  return row;
}

void ContinualRun::run_all() {
  for (int t = 0; t < num_tasks_; ++t) {
    train_task(t);
    rmatrix_.push_row(evaluate_all());
  }
}

namespace {

/// Shared trainer for the two GCN baselines.
struct GcnModel {
  PlainGcn gcn;
  Parameter classifier;
  int num_classes;

  std::vector<Parameter*> parameters() { return {&gcn.layer1, &gcn.layer2, &classifier}; }

  Mat logits(const TaskGraph& g) {
    Tape tape;
    Var h = plain_gcn_forward(tape, tape.constant(g.features), g.csr, gcn);
    Var out = matmul(tape, h, tape.param(classifier));
    return tape.value(out);
  }
};

GcnModel make_gcn_model(const TrainPlan& plan, int feature_dim, int num_classes) {
  Rng rng(plan.seed);
  GcnModel m;
  m.gcn = make_plain_gcn(feature_dim, plan.d_enc, plan.leaky_slope, rng);
  m.classifier = glorot_uniform("classifier.weight", plan.d_enc, num_classes, rng);
  m.num_classes = num_classes;
  return m;
}

Scalar gcn_test_accuracy(GcnModel& m, const TaskGraph& g) {
  return masked_accuracy(m.logits(g), g.labels, g.split_mask(Split::Test), g.num_classes);
}

}  // namespace

BaselineResult run_retrained_baseline(const TaskSequence& seq, const TrainPlan& plan) {
  plan.validate();
  GcnModel model = make_gcn_model(plan, seq.feature_dim, seq.max_classes());
  AdamConfig adam_cfg{plan.lr, plan.adam_beta1, plan.adam_beta2, plan.adam_eps};

  BaselineResult result;
  for (int t = 0; t < seq.num_tasks(); ++t) {
    const TaskGraph& g = seq.tasks[static_cast<size_t>(t)];
    const auto train_mask = g.split_mask(Split::Train);
    const auto val_mask = g.split_mask(Split::Val);
    const bool has_val = g.count_split(Split::Val) > 0;

    auto params = model.parameters();
    std::vector<AdamState> state;
    for (Parameter* p : params) state.push_back(make_adam_state(*p));

    Snapshot best;
    Scalar best_val = -1.0;
    for (int epoch = 1; epoch <= plan.epochs_per_task; ++epoch) {
      Tape tape;
      Var h = plain_gcn_forward(tape, tape.constant(g.features), g.csr, model.gcn);
      Var logits = matmul(tape, h, tape.param(model.classifier));
      Var logp = task_logp(tape, logits, g, model.num_classes);
      Var loss = nll(tape, logp, g.labels, train_mask);
      for (Parameter* p : params) p->zero_grad();
      tape.backward(loss);
      for (size_t i = 0; i < params.size(); ++i)
        adam_update(*params[i], state[i], adam_cfg, epoch);

      if (plan.early_keep && has_val) {
        const Scalar val_acc =
            masked_accuracy(tape.value(logits), g.labels, val_mask, g.num_classes);
        if (val_acc > best_val) {
          best_val = val_acc;
          best = take_snapshot(params);
        }
      }
    }
    if (plan.early_keep && has_val && !best.values.empty()) restore_snapshot(best, params);

    std::vector<Scalar> row;
    for (int j = 0; j <= t; ++j)
      row.push_back(gcn_test_accuracy(model, seq.tasks[static_cast<size_t>(j)]));
    result.rmatrix.push_row(std::move(row));
  }
  for (int j = 0; j < seq.num_tasks(); ++j)
    result.accuracies.push_back(result.rmatrix.at(seq.num_tasks() - 1, j));
  return result;
}

BaselineResult run_joint_baseline(const TaskSequence& seq, const TrainPlan& plan) {
  plan.validate();
  GcnModel model = make_gcn_model(plan, seq.feature_dim, seq.max_classes());
  AdamConfig adam_cfg{plan.lr, plan.adam_beta1, plan.adam_beta2, plan.adam_eps};

  auto params = model.parameters();
  std::vector<AdamState> state;
  for (Parameter* p : params) state.push_back(make_adam_state(*p));

  const Scalar inv_tasks = 1.0 / static_cast<Scalar>(seq.num_tasks());
  Snapshot best;
  Scalar best_val = -1.0;
  bool any_val = false;
  for (const auto& g : seq.tasks) any_val = any_val || g.count_split(Split::Val) > 0;

  for (int epoch = 1; epoch <= plan.epochs_per_task; ++epoch) {
    Tape tape;
    Var total{};
    std::vector<Var> logits_per_task;
    for (const auto& g : seq.tasks) {
      Var h = plain_gcn_forward(tape, tape.constant(g.features), g.csr, model.gcn);
      Var logits = matmul(tape, h, tape.param(model.classifier));
      logits_per_task.push_back(logits);
      Var logp = task_logp(tape, logits, g, model.num_classes);
      Var loss = scale(tape, nll(tape, logp, g.labels, g.split_mask(Split::Train)), inv_tasks);
      total = total.id < 0 ? loss : add(tape, total, loss);
    }
    for (Parameter* p : params) p->zero_grad();
    tape.backward(total);
    for (size_t i = 0; i < params.size(); ++i) adam_update(*params[i], state[i], adam_cfg, epoch);

    if (plan.early_keep && any_val) {
      Scalar val_sum = 0.0;
      int val_tasks = 0;
      for (size_t k = 0; k < seq.tasks.size(); ++k) {
        const auto& g = seq.tasks[k];
        if (g.count_split(Split::Val) == 0) continue;
        val_sum += masked_accuracy(tape.value(logits_per_task[k]), g.labels,
                                   g.split_mask(Split::Val), g.num_classes);
        ++val_tasks;
      }
      const Scalar val_acc = val_sum / static_cast<Scalar>(val_tasks);
      if (val_acc > best_val) {
        best_val = val_acc;
        best = take_snapshot(params);
      }
    }
  }
  if (plan.early_keep && any_val && !best.values.empty()) restore_snapshot(best, params);

  BaselineResult result;
  for (const auto& g : seq.tasks) result.accuracies.push_back(gcn_test_accuracy(model, g));
  return result;
}

}  // namespace ramcg
