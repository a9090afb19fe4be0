#include "ramcg/tensor.hpp"

#include <cmath>

namespace ramcg {

Parameter glorot_uniform(std::string name, Index rows, Index cols, Rng& rng) {
  const Scalar bound = std::sqrt(6.0 / static_cast<Scalar>(rows + cols));
  return uniform_init(std::move(name), rows, cols, -bound, bound, rng);
}

Parameter uniform_init(std::string name, Index rows, Index cols, Scalar lo, Scalar hi, Rng& rng) {
  Mat v(rows, cols);
  for (Index r = 0; r < rows; ++r)
    for (Index c = 0; c < cols; ++c) v(r, c) = rng.uniform(lo, hi);
  return Parameter(std::move(name), std::move(v));
}

size_t Tape::check(Var v) const {
  if (v.id < 0 || static_cast<size_t>(v.id) >= nodes_.size())
    throw ProtocolError("tape: handle does not belong to this tape");
  return static_cast<size_t>(v.id);
}

Var Tape::constant(Mat v) {
  nodes_.push_back(Node{std::move(v), Mat(), nullptr});
  return Var{static_cast<int>(nodes_.size() - 1)};
}

Var Tape::input(Mat v) {
  nodes_.push_back(Node{std::move(v), Mat(), nullptr});
  return Var{static_cast<int>(nodes_.size() - 1)};
}

Var Tape::param(Parameter& p) {
  Var v = input(p.value);
  if (p.trainable) bindings_.emplace_back(v.id, &p);
  return v;
}

Var Tape::record(const char* op, Mat out, BackFn back) {
  if (!out.allFinite())
    throw NumericalError(std::string(op) + ": non-finite value in output");
  nodes_.push_back(Node{std::move(out), Mat(), std::move(back)});
  return Var{static_cast<int>(nodes_.size() - 1)};
}

void Tape::backward(Var loss) {
  const size_t li = check(loss);
  const Mat& lv = nodes_[li].value;
  if (lv.rows() != 1 || lv.cols() != 1)
    throw DimensionError("backward: loss must be 1x1, got " + shape_str(lv));
  for (auto& n : nodes_) n.grad = Mat::Zero(n.value.rows(), n.value.cols());
  nodes_[li].grad(0, 0) = 1.0;
  for (size_t i = nodes_.size(); i-- > 0;) {
    if (nodes_[i].back) nodes_[i].back(*this, static_cast<int>(i));
  }
  for (auto& [id, p] : bindings_) p->grad += nodes_[static_cast<size_t>(id)].grad;
}

Var matmul(Tape& t, Var a, Var b) {
  const Mat& A = t.value(a);
  const Mat& B = t.value(b);
  if (A.cols() != B.rows())
    throw DimensionError("matmul: inner extents differ, " + shape_str(A) + " vs " + shape_str(B));
  Mat C = A * B;
  return t.record("matmul", std::move(C), [a, b](Tape& tp, int self) {
    const Mat& G = tp.grad_ref(self);
    tp.grad_ref(a.id) += G * tp.value_ref(b.id).transpose();
    tp.grad_ref(b.id) += tp.value_ref(a.id).transpose() * G;
  });
}

Var add(Tape& t, Var a, Var b) {
  const Mat& A = t.value(a);
  const Mat& B = t.value(b);
  if (A.rows() != B.rows() || A.cols() != B.cols())
    throw DimensionError("add: shapes differ, " + shape_str(A) + " vs " + shape_str(B));
  return t.record("add", A + B, [a, b](Tape& tp, int self) {
    const Mat& G = tp.grad_ref(self);
    tp.grad_ref(a.id) += G;
    tp.grad_ref(b.id) += G;
  });
}

Var scale(Tape& t, Var x, Scalar k) {
  return t.record("scale", t.value(x) * k, [x, k](Tape& tp, int self) {
    tp.grad_ref(x.id) += tp.grad_ref(self) * k;
  });
}

Var concat_cols(Tape& t, Var a, Var b) {
  const Mat& A = t.value(a);
  const Mat& B = t.value(b);
  if (A.rows() != B.rows())
    throw DimensionError("concat_cols: row counts differ, " + shape_str(A) + " vs " + shape_str(B));
  Mat C(A.rows(), A.cols() + B.cols());
  C.leftCols(A.cols()) = A;
  C.rightCols(B.cols()) = B;
  const Index ac = A.cols();
  const Index bc = B.cols();
  return t.record("concat_cols", std::move(C), [a, b, ac, bc](Tape& tp, int self) {
    const Mat& G = tp.grad_ref(self);
    tp.grad_ref(a.id) += G.leftCols(ac);
    tp.grad_ref(b.id) += G.rightCols(bc);
  });
}

Var leaky_relu(Tape& t, Var x, Scalar slope) {
  if (slope < 0.0) throw DimensionError("leaky_relu: slope must be >= 0");
  const Mat& X = t.value(x);
  Mat Y = X.unaryExpr([slope](Scalar v) { return v > 0.0 ? v : slope * v; });
  return t.record("leaky_relu", std::move(Y), [x, slope](Tape& tp, int self) {
    const Mat& G = tp.grad_ref(self);
    const Mat& X = tp.value_ref(x.id);
    tp.grad_ref(x.id) += G.cwiseProduct(
        X.unaryExpr([slope](Scalar v) { return v > 0.0 ? Scalar(1.0) : slope; }));
  });
}

Var sigmoid(Tape& t, Var x) {
  const Mat& X = t.value(x);
  Mat Y = X.unaryExpr([](Scalar v) {
    if (v >= 0.0) return 1.0 / (1.0 + std::exp(-v));
    const Scalar e = std::exp(v);
    return e / (1.0 + e);
  });
  Var out = t.record("sigmoid", std::move(Y), [x](Tape& tp, int self) {
    const Mat& G = tp.grad_ref(self);
    const Mat& Y = tp.value_ref(self);
    tp.grad_ref(x.id) += G.cwiseProduct(Y.cwiseProduct(Mat::Ones(Y.rows(), Y.cols()) - Y));
  });
  return out;
}

Var sum(Tape& t, Var x) {
  Mat s(1, 1);
  s(0, 0) = t.value(x).sum();
  return t.record("sum", std::move(s), [x](Tape& tp, int self) {
    tp.grad_ref(x.id).array() += tp.grad_ref(self)(0, 0);
  });
}

Var gather_rows(Tape& t, Var x, std::vector<int> rows) {
  const Mat& X = t.value(x);
  Mat Y(static_cast<Index>(rows.size()), X.cols());
  for (size_t i = 0; i < rows.size(); ++i) {
    if (rows[i] < 0 || rows[i] >= X.rows())
      throw DimensionError("gather_rows: index " + std::to_string(rows[i]) + " out of range for " +
                           shape_str(X));
    Y.row(static_cast<Index>(i)) = X.row(rows[i]);
  }
  return t.record("gather_rows", std::move(Y), [x, rows = std::move(rows)](Tape& tp, int self) {
    const Mat& G = tp.grad_ref(self);
    Mat& dX = tp.grad_ref(x.id);
    for (size_t i = 0; i < rows.size(); ++i) dX.row(rows[i]) += G.row(static_cast<Index>(i));
  });
}

Var segment_softmax(Tape& t, Var values, std::vector<int> offsets) {
  const Mat& V = t.value(values);
  if (V.cols() != 1)
    throw DimensionError("segment_softmax: expected column vector, got " + shape_str(V));
  if (offsets.empty() || offsets.back() != V.rows())
    throw DimensionError("segment_softmax: offsets do not cover " + std::to_string(V.rows()) +
                         " values");
  Mat Y(V.rows(), 1);
  for (size_t s = 0; s + 1 < offsets.size(); ++s) {
    const int lo = offsets[s];
    const int hi = offsets[s + 1];
    if (hi <= lo) continue;
    Scalar mx = V(lo, 0);
    for (int e = lo + 1; e < hi; ++e) mx = std::max(mx, V(e, 0));
    Scalar z = 0.0;
    for (int e = lo; e < hi; ++e) {
      Y(e, 0) = std::exp(V(e, 0) - mx);
      z += Y(e, 0);
    }
    for (int e = lo; e < hi; ++e) Y(e, 0) /= z;
  }
  return t.record("segment_softmax", std::move(Y),
                  [values, offsets = std::move(offsets)](Tape& tp, int self) {
                    const Mat& G = tp.grad_ref(self);
                    const Mat& Y = tp.value_ref(self);
                    Mat& dV = tp.grad_ref(values.id);
                    for (size_t s = 0; s + 1 < offsets.size(); ++s) {
                      const int lo = offsets[s];
                      const int hi = offsets[s + 1];
                      Scalar dot = 0.0;
                      for (int e = lo; e < hi; ++e) dot += Y(e, 0) * G(e, 0);
                      for (int e = lo; e < hi; ++e) dV(e, 0) += Y(e, 0) * (G(e, 0) - dot);
                    }
                  });
}

Var weighted_neighbor_sum(Tape& t, Var weights, Var feats, std::vector<int> offsets,
                          std::vector<int> targets) {
  const Mat& W = t.value(weights);
  const Mat& H = t.value(feats);
  if (W.cols() != 1 || W.rows() != static_cast<Index>(targets.size()))
    throw DimensionError("weighted_neighbor_sum: weights " + shape_str(W) + " vs " +
                         std::to_string(targets.size()) + " entries");
  const Index n = static_cast<Index>(offsets.size()) - 1;
  Mat Y = Mat::Zero(n, H.cols());
  for (Index u = 0; u < n; ++u)
    for (int e = offsets[u]; e < offsets[u + 1]; ++e) Y.row(u) += W(e, 0) * H.row(targets[e]);
  return t.record(
      "weighted_neighbor_sum", std::move(Y),
      [weights, feats, offsets = std::move(offsets), targets = std::move(targets)](Tape& tp,
                                                                                   int self) {
        const Mat& G = tp.grad_ref(self);
        const Mat& W = tp.value_ref(weights.id);
        const Mat& H = tp.value_ref(feats.id);
        Mat& dW = tp.grad_ref(weights.id);
        Mat& dH = tp.grad_ref(feats.id);
        const Index n = static_cast<Index>(offsets.size()) - 1;
        for (Index u = 0; u < n; ++u)
          for (int e = offsets[u]; e < offsets[u + 1]; ++e) {
            dW(e, 0) += G.row(u).dot(H.row(targets[e]));
            dH.row(targets[e]) += W(e, 0) * G.row(u);
          }
      });
}

Var slice_cols(Tape& t, Var x, Index c0, Index c1) {
  const Mat& X = t.value(x);
  if (c0 < 0 || c1 > X.cols() || c0 >= c1)
    throw DimensionError("slice_cols: [" + std::to_string(c0) + "," + std::to_string(c1) +
                         ") invalid for " + shape_str(X));
  Mat Y = X.middleCols(c0, c1 - c0);
  return t.record("slice_cols", std::move(Y), [x, c0, c1](Tape& tp, int self) {
    tp.grad_ref(x.id).middleCols(c0, c1 - c0) += tp.grad_ref(self);
  });
}

Var select_mask_st(Tape& t, Var w, Var s, std::vector<uint8_t> keep) {
  const Mat& W = t.value(w);
  const Mat& S = t.value(s);
  if (W.rows() != S.rows() || W.cols() != S.cols())
    throw DimensionError("select_mask_st: weight " + shape_str(W) + " vs scores " + shape_str(S));
  if (static_cast<Index>(keep.size()) != W.size())
    throw DimensionError("select_mask_st: mask length " + std::to_string(keep.size()) +
                         " vs weight " + shape_str(W));
  Mat Y(W.rows(), W.cols());
  size_t k = 0;
  for (Index r = 0; r < W.rows(); ++r)
    for (Index c = 0; c < W.cols(); ++c, ++k) Y(r, c) = keep[k] ? W(r, c) : Scalar(0.0);
  return t.record("select_mask_st", std::move(Y),
                  [w, s, keep = std::move(keep)](Tape& tp, int self) {
                    const Mat& G = tp.grad_ref(self);
                    const Mat& W = tp.value_ref(w.id);
                    Mat& dW = tp.grad_ref(w.id);
                    Mat& dS = tp.grad_ref(s.id);
                    size_t k = 0;
                    for (Index r = 0; r < W.rows(); ++r)
                      for (Index c = 0; c < W.cols(); ++c, ++k) {
                        if (keep[k]) dW(r, c) += G(r, c);
                        dS(r, c) += G(r, c) * W(r, c);
                      }
                  });
}

Var log_softmax_rows(Tape& t, Var x) {
  const Mat& X = t.value(x);
  Mat Y(X.rows(), X.cols());
  for (Index r = 0; r < X.rows(); ++r) {
    const Scalar mx = X.row(r).maxCoeff();
    Scalar z = 0.0;
    for (Index c = 0; c < X.cols(); ++c) z += std::exp(X(r, c) - mx);
    const Scalar lz = std::log(z) + mx;
    for (Index c = 0; c < X.cols(); ++c) Y(r, c) = X(r, c) - lz;
  }
  return t.record("log_softmax_rows", std::move(Y), [x](Tape& tp, int self) {
    const Mat& G = tp.grad_ref(self);
    const Mat& Y = tp.value_ref(self);
    Mat& dX = tp.grad_ref(x.id);
    for (Index r = 0; r < Y.rows(); ++r) {
      const Scalar gsum = G.row(r).sum();
      for (Index c = 0; c < Y.cols(); ++c) dX(r, c) += G(r, c) - std::exp(Y(r, c)) * gsum;
    }
  });
}

Var nll(Tape& t, Var logp, const std::vector<int>& labels, const std::vector<uint8_t>& mask) {
  const Mat& L = t.value(logp);
  if (static_cast<Index>(labels.size()) != L.rows() || static_cast<Index>(mask.size()) != L.rows())
    throw DimensionError("nll: labels/mask length vs logp " + shape_str(L));
  Index count = 0;
  Scalar acc = 0.0;
  for (Index r = 0; r < L.rows(); ++r) {
    if (!mask[static_cast<size_t>(r)]) continue;
    const int y = labels[static_cast<size_t>(r)];
    if (y < 0 || y >= L.cols())
      throw DimensionError("nll: label " + std::to_string(y) + " out of range for " + shape_str(L));
    acc -= L(r, y);
    ++count;
  }
  if (count == 0) throw DataError("nll: empty mask");
  Mat out(1, 1);
  out(0, 0) = acc / static_cast<Scalar>(count);
  return t.record("nll", std::move(out), [logp, labels, mask, count](Tape& tp, int self) {
    const Scalar g = tp.grad_ref(self)(0, 0);
    Mat& dL = tp.grad_ref(logp.id);
    for (Index r = 0; r < dL.rows(); ++r) {
      if (!mask[static_cast<size_t>(r)]) continue;
      dL(r, labels[static_cast<size_t>(r)]) -= g / static_cast<Scalar>(count);
    }
  });
}

Mat fd_gradient(const std::function<Scalar()>& f, Parameter& p, Scalar eps) {
  Mat g(p.value.rows(), p.value.cols());
  for (Index r = 0; r < p.value.rows(); ++r)
    for (Index c = 0; c < p.value.cols(); ++c) {
      const Scalar saved = p.value(r, c);
      p.value(r, c) = saved + eps;
      const Scalar fp = f();
      p.value(r, c) = saved - eps;
      const Scalar fm = f();
      p.value(r, c) = saved;
      g(r, c) = (fp - fm) / (2.0 * eps);
    }
  return g;
}

Scalar max_rel_error(const Mat& a, const Mat& b, Scalar floor) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw DimensionError("max_rel_error: " + shape_str(a) + " vs " + shape_str(b));
  Scalar worst = 0.0;
  for (Index r = 0; r < a.rows(); ++r)
    for (Index c = 0; c < a.cols(); ++c) {
      const Scalar denom = std::max({std::abs(a(r, c)), std::abs(b(r, c)), floor});
      worst = std::max(worst, std::abs(a(r, c) - b(r, c)) / denom);
    }
  return worst;
}

}  // namespace ramcg
