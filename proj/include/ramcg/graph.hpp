#pragma once

#include "ramcg/common.hpp"

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

namespace ramcg {

constexpr int kUnlabeled = -1;

enum class Split : uint8_t { None = 0, Train, Val, Test };

/// Symmetric adjacency in CSR layout, one self-loop per node.
struct Csr {
  std::vector<int> offsets;  // n+1 entries
  std::vector<int> targets;  // sorted within each row

  int num_nodes() const { return static_cast<int>(offsets.size()) - 1; }
  int num_entries() const { return static_cast<int>(targets.size()); }
  int degree(int u) const { return offsets[u + 1] - offsets[u]; }
};

/// One task's graph: features, adjacency, partial labels, split masks.
struct TaskGraph {
  int num_nodes = 0;
  int num_classes = 0;
  Mat features;                           // n x D
  std::vector<std::pair<int, int>> edges;  // undirected input pairs, canonical u<v or u==v
  Csr csr;
  std::vector<int> labels;   // per node, kUnlabeled for unlabeled
  std::vector<Split> split;  // per node

  std::vector<uint8_t> split_mask(Split s) const;
  int count_split(Split s) const;
  /// Throws DataError on any violated structural invariant.
  void validate() const;
};

/// Ordered disjoint tasks sharing a feature dimension.
struct TaskSequence {
  std::vector<TaskGraph> tasks;
  int feature_dim = 0;

  int num_tasks() const { return static_cast<int>(tasks.size()); }
  int max_classes() const;
  /// Loader/generator-level invariants (length >= 2, per-task validity).
  void validate() const;
};

/// Sorted, deduplicated, symmetric CSR with an injected self-loop per node.
Csr build_csr(const std::vector<std::pair<int, int>>& edges, int n);

/// Deterministic split of the labeled set: first task 60/20/20 train/val/test,
/// later tasks 30/20/50; counts rounded down, remainder to test.
std::vector<Split> make_splits(int task_index, int n, const std::vector<int>& labels,
                               int num_classes, uint64_t seed);

TaskGraph load_task_dir(const std::filesystem::path& dir);
void save_task_dir(const TaskGraph& g, const std::filesystem::path& dir);

/// Directory of task_000, task_001, ... subdirectories listed by manifest.tsv.
TaskSequence load_sequence_dir(const std::filesystem::path& dir);
void save_sequence_dir(const TaskSequence& seq, const std::filesystem::path& dir,
                       const std::vector<std::string>& manifest_notes = {});

}  // namespace ramcg
