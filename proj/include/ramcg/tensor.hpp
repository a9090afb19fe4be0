#pragma once

#include "ramcg/common.hpp"

#include <functional>
#include <string>
#include <vector>

namespace ramcg {

/// Trainable weight matrix with its accumulated gradient.
struct Parameter {
  std::string name;
  Mat value;
  Mat grad;
  bool trainable = true;

  Parameter() = default;
  Parameter(std::string n, Mat v, bool train = true)
      : name(std::move(n)), value(std::move(v)), grad(Mat::Zero(value.rows(), value.cols())), trainable(train) {}

  void zero_grad() { grad.setZero(); }
  Index size() const { return value.size(); }
};

Parameter glorot_uniform(std::string name, Index rows, Index cols, Rng& rng);
Parameter uniform_init(std::string name, Index rows, Index cols, Scalar lo, Scalar hi, Rng& rng);

/// Handle to a node on a Tape.
struct Var {
  int id = -1;
};

/// Record of one forward pass. Operations append nodes; backward() replays
/// them in reverse, accumulating gradients into bound Parameters.
class Tape {
 public:
  using BackFn = std::function<void(Tape&, int self)>;

  /// Leaf with no gradient tracking.
  Var constant(Mat v);

  /// Leaf whose gradient is queryable after backward (not bound to a Parameter).
  Var input(Mat v);

  /// Leaf bound to a Parameter; backward() accumulates into p.grad.
  Var param(Parameter& p);

  const Mat& value(Var v) const { return nodes_[check(v)].value; }
  const Mat& grad(Var v) const { return nodes_[check(v)].grad; }

  /// Reverse pass from a 1x1 loss node. Node gradients are reset first, so
  /// repeated calls accumulate linearly into Parameter gradients.
  void backward(Var loss);

  size_t num_nodes() const { return nodes_.size(); }

  /// Appends an op node. Throws NumericalError if the output is not finite.
  Var record(const char* op, Mat out, BackFn back);

  Mat& grad_ref(int id) { return nodes_[static_cast<size_t>(id)].grad; }
  const Mat& value_ref(int id) const { return nodes_[static_cast<size_t>(id)].value; }

 private:
  struct Node {
    Mat value;
    Mat grad;
    BackFn back;
  };

  size_t check(Var v) const;

  std::vector<Node> nodes_;
  std::vector<std::pair<int, Parameter*>> bindings_;
};

// ---- operations ----

/// C = A * B. Backward: dA += dC * B^T, dB += A^T * dC.
Var matmul(Tape& t, Var a, Var b);

/// Elementwise sum of same-shape tensors.
Var add(Tape& t, Var a, Var b);

/// Multiply by a compile-time-constant scalar.
Var scale(Tape& t, Var x, Scalar k);

/// Columns of a followed by columns of b (equal row counts).
Var concat_cols(Tape& t, Var a, Var b);

/// Elementwise max(x, slope*x), slope >= 0.
Var leaky_relu(Tape& t, Var x, Scalar slope);

/// Logistic sigmoid, branch form stable for large |x|.
Var sigmoid(Tape& t, Var x);

/// Sum of all entries, as a 1x1 tensor.
Var sum(Tape& t, Var x);

/// out.row(i) = x.row(rows[i]). Backward scatter-adds by row index.
Var gather_rows(Tape& t, Var x, std::vector<int> rows);

/// Softmax within each contiguous segment [offsets[s], offsets[s+1]) of a
/// column vector of length offsets.back(). Max-shifted internally.
Var segment_softmax(Tape& t, Var values, std::vector<int> offsets);

/// out.row(u) = sum over entries e in [offsets[u], offsets[u+1]) of
/// weights(e) * feats.row(targets[e]). weights is Ex1.
Var weighted_neighbor_sum(Tape& t, Var weights, Var feats, std::vector<int> offsets,
                          std::vector<int> targets);

/// Columns [c0, c1) of x.
Var slice_cols(Tape& t, Var x, Index c0, Index c1);

/// Masked weight with straight-through score gradients:
/// out = keep ? w : 0; backward: dW += dOut (kept entries), dS += dOut .* w.
/// keep is row-major over w's entries, one byte per entry.
Var select_mask_st(Tape& t, Var w, Var s, std::vector<uint8_t> keep);

/// Row-wise log softmax.
Var log_softmax_rows(Tape& t, Var x);

/// Mean negative log likelihood of labels over masked rows.
/// loss = -(1/|mask|) * sum over masked u of logp(u, labels[u]).
Var nll(Tape& t, Var logp, const std::vector<int>& labels, const std::vector<uint8_t>& mask);

/// Central-difference gradient of f with respect to p (independent oracle;
/// does not touch the tape machinery).
Mat fd_gradient(const std::function<Scalar()>& f, Parameter& p, Scalar eps = 1e-6);

/// Max relative error between two same-shape matrices, relative to
/// max(|a|, |b|, floor).
Scalar max_rel_error(const Mat& a, const Mat& b, Scalar floor = 1e-6);

}  // namespace ramcg
