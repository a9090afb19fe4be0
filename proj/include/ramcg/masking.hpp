#pragma once

#include "ramcg/tensor.hpp"

#include <string>
#include <vector>

namespace ramcg {

/// Fixed-length bit vector over the backbone's flattened weight index space.
class Bitmask {
 public:
  Bitmask() = default;
  explicit Bitmask(size_t n) : bits_(n, 0) {}

  size_t size() const { return bits_.size(); }
  size_t count() const;
  bool test(size_t i) const { return bits_[i] != 0; }
  void set(size_t i, bool v = true) { bits_[i] = v ? 1 : 0; }

  Bitmask operator&(const Bitmask& o) const;
  Bitmask operator|(const Bitmask& o) const;
  /// this AND NOT o.
  Bitmask and_not(const Bitmask& o) const;
  bool intersects(const Bitmask& o) const;
  bool operator==(const Bitmask& o) const { return bits_ == o.bits_; }

  /// Contiguous slice [off, off+len) as per-entry keep flags.
  std::vector<uint8_t> slice(size_t off, size_t len) const;

  std::string to_hex() const;
  static Bitmask from_hex(size_t n, const std::string& hex);

 private:
  std::vector<uint8_t> bits_;
};

/// Backbone f: dense layers with per-weight importance scores, plus the
/// flattened index space the masks live in.
struct MaskedBackbone {
  std::vector<Parameter> weights;  // layer l: d_l x d_{l+1}
  std::vector<Parameter> scores;   // same shapes, one score per weight
  Scalar leaky_slope = 0.2;

  size_t n_theta() const;
  /// Flat offset of layer l within the index space (layer-major, row-major
  /// within a layer).
  size_t layer_offset(size_t l) const;
  uint64_t weights_digest() const;
  /// Digest restricted to entries under the given mask.
  uint64_t weights_digest(const Bitmask& m) const;
};

/// widths = {d_in, w1, w2, ..., d_out_of_f}; two hidden layers of width d
/// means widths {d_in, d, d}.
MaskedBackbone make_backbone(const std::vector<int>& widths, Scalar leaky_slope, Rng& rng,
                             Scalar score_init = 0.01);

/// Exactly ceil(c/100 * n_theta) indices of largest |score|, ties broken by
/// lower flattened index.
Bitmask select_topc(const MaskedBackbone& b, Scalar c_percent);

/// Forward through f with weights gated by the mask; score gradients flow via
/// the straight-through estimator.
Var masked_forward(Tape& t, Var h, MaskedBackbone& b, const Bitmask& mask);

/// Weights the next task may train: selected but not yet claimed.
Bitmask trainable_set(const Bitmask& phi_next, const Bitmask& union_prev);

/// Immutable per-task masks and their running union.
class TaskMaskRegistry {
 public:
  explicit TaskMaskRegistry(size_t n_theta) : n_(n_theta), union_(n_theta) {}
  TaskMaskRegistry() = default;

  /// Task ids are sequential from 0; recommitting is an error.
  void commit(int task, const Bitmask& mask);
  int num_committed() const { return static_cast<int>(masks_.size()); }
  const Bitmask& task_mask(int task) const;
  const Bitmask& union_mask() const { return union_; }
  size_t n_theta() const { return n_; }

 private:
  size_t n_ = 0;
  std::vector<Bitmask> masks_;
  Bitmask union_;
};

/// Adam state for one parameter tensor.
struct AdamState {
  Mat m;
  Mat v;
};

struct AdamConfig {
  Scalar lr = 0.0065;
  Scalar beta1 = 0.9;
  Scalar beta2 = 0.999;
  Scalar eps = 1e-8;
};

/// One Adam update on p from p.grad. When keep is non-null, entries with
/// keep[i]==0 are skipped entirely: no moment update, no value change.
/// step_count is 1-based.
void adam_update(Parameter& p, AdamState& st, const AdamConfig& cfg, long step_count,
                 const uint8_t* keep = nullptr);

AdamState make_adam_state(const Parameter& p);

}  // namespace ramcg
