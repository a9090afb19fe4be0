#pragma once

#include "ramcg/graph.hpp"

#include <string>
#include <vector>

namespace ramcg {

/// Generator for a task stream where the edge-building rule (hidden relation
/// affinity) is stable across tasks while the relation-to-label weights and
/// the class feature means shift.
struct SynthStreamConfig {
  int num_tasks = 6;
  int nodes_per_task = 300;
  int num_relations = 4;
  int num_classes = 3;
  int feature_dim = 12;

  /// Per-relation edge probability scale; a single entry broadcasts to all
  /// relations.
  std::vector<Scalar> edge_prob = {0.05};

  /// Per-task class-by-relation weight matrices (C x R). Empty means derive a
  /// shifted default (per-task relation permutation) from the seed; see
  /// default_relation_weights.
  std::vector<Mat> relation_class_weights;

  /// If true (and relation_class_weights is empty), the derived weights
  /// permute the relation-to-class assignment per task. If false, all tasks
  /// share the same assignment (a no-shift stream).
  bool relation_shift = true;

  Scalar drift = 1.0;           // per-task class feature-mean drift magnitude
  Scalar mean_separation = 1.5; // distance scale of the shared base class means
  Scalar feature_noise = 1.0;   // stddev of per-node feature noise
  Scalar label_noise = 0.4;     // stddev of the per-node class-propensity blend
  Scalar affinity_sharpness = 2.5;
  uint64_t seed = 1;

  void validate() const;
};

/// Side information the model never sees: the hidden relation of each
/// generated edge (aligned with TaskGraph::edges) plus per-node realized
/// relation mixes, kept for diagnostics and tests.
struct SynthHidden {
  std::vector<std::vector<int>> edge_relation;  // per task, per edge
  std::vector<Mat> node_relation_mix;           // per task, n x R
};

struct SynthStream {
  TaskSequence sequence;
  SynthHidden hidden;
  std::vector<std::string> warnings;  // degenerate-config notes for the manifest
};

/// C x R weight matrices for each task; when shift is on, the
/// relation-to-class assignment is permuted per task (seeded), guaranteeing
/// the mapping differs across tasks.
std::vector<Mat> default_relation_weights(int num_tasks, int num_classes, int num_relations,
                                          bool shift, uint64_t seed);

/// Pure function of cfg (including seed): identical output for identical cfg.
SynthStream synth_stream(const SynthStreamConfig& cfg);

/// Writes the sequence plus hidden-relation diagnostics and manifest notes.
void save_synth_stream(const SynthStream& stream, const std::filesystem::path& dir,
                       const std::vector<std::string>& provenance);

}  // namespace ramcg
