#pragma once

#include "ramcg/masking.hpp"
#include "ramcg/metrics.hpp"
#include "ramcg/relation.hpp"
#include "ramcg/synth.hpp"

#include <functional>
#include <optional>

namespace ramcg {

enum class AblationMode { None, NoEncoder, PlainGcnEncoder };
enum class BaselineKind { RamCg, Retrained, Joint };

const char* to_string(AblationMode m);
const char* to_string(BaselineKind b);
AblationMode ablation_from_string(const std::string& s);
BaselineKind baseline_from_string(const std::string& s);

struct TrainPlan {
  int epochs_per_task = 200;
  Scalar lr = 0.0065;
  int channels = 6;
  int stack = 2;
  int d_enc = 16;
  int d_hid = 0;  // 0: same as channel output dim
  Scalar select_ratio = 70.0;  // percent of backbone weights per task mask
  Scalar leaky_slope = 0.2;
  Scalar adam_beta1 = 0.9;
  Scalar adam_beta2 = 0.999;
  Scalar adam_eps = 1e-8;
  AblationMode ablation = AblationMode::None;
  BaselineKind baseline = BaselineKind::RamCg;
  bool early_keep = true;
  uint64_t seed = 1;
  bool deterministic = true;
  bool use_bias = false;           // reserved, biases not implemented
  bool extra_self_channel = false;  // reserved

  void validate() const;
};

/// Supplies task graphs by index. Training of task t must request only index
/// t; tests audit this.
using TaskProvider = std::function<const TaskGraph&(int)>;

TaskProvider sequence_provider(const TaskSequence& seq);

/// The full model: encoder variant per ablation mode, score-masked backbone,
/// and linear classifier shared by all tasks.
struct RamCgModel {
  AblationMode ablation = AblationMode::None;
  RelationEncoder encoder;  // ablation None
  PlainGcn gcn;             // ablation PlainGcnEncoder
  MaskedBackbone backbone;
  Parameter classifier;
  TaskMaskRegistry registry;
  int num_classes = 0;
  Scalar leaky_slope = 0.2;

  /// Node representation entering the backbone.
  Var features_forward(Tape& t, const TaskGraph& g);
  /// Backbone under the given mask, then the classifier. Full-width logits.
  Var logits_forward(Tape& t, Var h, const Bitmask& mask);

  std::vector<Parameter*> encoder_parameters();
  std::vector<Parameter*> parameters();  // encoder + backbone + scores + classifier
  uint64_t encoder_digest() const;
  uint64_t classifier_digest() const { return digest_matrix(classifier.value); }
};

RamCgModel make_model(const TrainPlan& plan, int feature_dim, int num_classes);

/// Argmax accuracy over the first valid_cols columns, restricted to masked
/// rows. Ties resolve to the lower class index.
Scalar masked_accuracy(const Mat& logits, const std::vector<int>& labels,
                       const std::vector<uint8_t>& mask, int valid_cols);

/// Task-incremental protocol driver. Call train_task(0..T-1) in order,
/// collecting an evaluation row after each, or use run_all().
class ContinualRun {
 public:
  ContinualRun(TaskProvider provider, int num_tasks, int feature_dim, int num_classes,
               TrainPlan plan);

  /// Trains task t (0-based) and commits its mask. Task 0 also trains the
  /// encoder and classifier; both are frozen afterwards.
  void train_task(int t);

  /// Accuracy on the test mask of every committed task, via its stored mask.
  std::vector<Scalar> evaluate_all();

  /// Single committed task (logits argmax accuracy, no gradients).
  Scalar evaluate_task(int t);

  void run_all();

  const RMatrix& rmatrix() const { return rmatrix_; }
  RamCgModel& model() { return model_; }
  const TrainPlan& plan() const { return plan_; }
  int tasks_trained() const { return trained_; }

  Scalar first_epoch_loss(int t) const { return loss_first_.at(static_cast<size_t>(t)); }
  Scalar last_epoch_loss(int t) const { return loss_last_.at(static_cast<size_t>(t)); }

 private:
  Var frozen_features(Tape& t, const TaskGraph& g, int task_index);

  TaskProvider provider_;
  int num_tasks_;
  TrainPlan plan_;
  RamCgModel model_;
  RMatrix rmatrix_;
  int trained_ = 0;
  std::vector<Scalar> loss_first_, loss_last_;
  std::vector<std::optional<Mat>> h_cache_;  // per task, valid once encoder is frozen
};

/// Result of a baseline run over the same sequence.
struct BaselineResult {
  RMatrix rmatrix;                  // retrained: full lower triangle
  std::vector<Scalar> accuracies;   // joint: final per-task accuracy
};

/// Plain 2-layer graph convolution + classifier trained task by task with no
/// forgetting countermeasures.
BaselineResult run_retrained_baseline(const TaskSequence& seq, const TrainPlan& plan);

/// One model trained on the union of all tasks' training nodes, evaluated per
/// task.
BaselineResult run_joint_baseline(const TaskSequence& seq, const TrainPlan& plan);

}  // namespace ramcg
