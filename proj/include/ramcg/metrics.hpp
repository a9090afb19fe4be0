#pragma once

#include "ramcg/common.hpp"

#include <filesystem>
#include <vector>

namespace ramcg {

/// Lower-triangular accuracy matrix: entry (i, j), j <= i, is accuracy on
/// task j's test set after training through task i. Rows and tasks are
/// 1-based in reports, 0-based here.
class RMatrix {
 public:
  void push_row(std::vector<Scalar> row);
  int num_steps() const { return static_cast<int>(rows_.size()); }
  /// R_{step, task}, both 0-based, task <= step.
  Scalar at(int step, int task) const;
  const std::vector<Scalar>& row(int step) const;

 private:
  std::vector<std::vector<Scalar>> rows_;
};

/// Mean accuracy over all tasks seen by step T (1-based T).
Scalar acc_at(const RMatrix& r, int T);

/// Mean accuracy change on earlier tasks relative to their just-trained
/// value; requires T >= 2 (1-based T).
Scalar bwf_at(const RMatrix& r, int T);

/// Writes rmatrix.tsv (row i holds i tab-separated values) and metrics.tsv
/// (step, acc, bwf; bwf blank at step 1), 6 decimal digits.
void emit_report(const RMatrix& r, const std::filesystem::path& dir);

RMatrix load_rmatrix(const std::filesystem::path& file);

}  // namespace ramcg
