#include "ramcg/masking.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace ramcg {

size_t Bitmask::count() const {
  size_t c = 0;
  for (uint8_t b : bits_) c += b;
  return c;
}

Bitmask Bitmask::operator&(const Bitmask& o) const {
  if (o.size() != size()) throw DimensionError("bitmask: length mismatch");
  Bitmask out(size());
  for (size_t i = 0; i < size(); ++i) out.bits_[i] = bits_[i] & o.bits_[i];
  return out;
}

Bitmask Bitmask::operator|(const Bitmask& o) const {
  if (o.size() != size()) throw DimensionError("bitmask: length mismatch");
  Bitmask out(size());
  for (size_t i = 0; i < size(); ++i) out.bits_[i] = bits_[i] | o.bits_[i];
  return out;
}

Bitmask Bitmask::and_not(const Bitmask& o) const {
  if (o.size() != size()) throw DimensionError("bitmask: length mismatch");
  Bitmask out(size());
  for (size_t i = 0; i < size(); ++i) out.bits_[i] = bits_[i] & static_cast<uint8_t>(!o.bits_[i]);
  return out;
}

bool Bitmask::intersects(const Bitmask& o) const {
  if (o.size() != size()) throw DimensionError("bitmask: length mismatch");
  for (size_t i = 0; i < size(); ++i)
    if (bits_[i] && o.bits_[i]) return true;
  return false;
}

std::vector<uint8_t> Bitmask::slice(size_t off, size_t len) const {
  if (off + len > size()) throw DimensionError("bitmask: slice out of range");
  return std::vector<uint8_t>(bits_.begin() + static_cast<long>(off),
                              bits_.begin() + static_cast<long>(off + len));
}

std::string Bitmask::to_hex() const {
  static const char* digits = "0123456789abcdef";
  std::string out;
  out.reserve((size() + 3) / 4);
  for (size_t i = 0; i < size(); i += 4) {
    int nib = 0;
    for (size_t j = 0; j < 4 && i + j < size(); ++j)
      if (bits_[i + j]) nib |= 1 << j;
    out.push_back(digits[nib]);
  }
  return out;
}

Bitmask Bitmask::from_hex(size_t n, const std::string& hex) {
  if (hex.size() != (n + 3) / 4) throw DataError("bitmask: hex length vs n_theta mismatch");
  Bitmask out(n);
  for (size_t i = 0; i < n; i += 4) {
    const char c = hex[i / 4];
    int nib;
    if (c >= '0' && c <= '9')
      nib = c - '0';
    else if (c >= 'a' && c <= 'f')
      nib = c - 'a' + 10;
    else
      throw DataError("bitmask: bad hex digit");
    for (size_t j = 0; j < 4 && i + j < n; ++j) out.bits_[i + j] = (nib >> j) & 1;
  }
  return out;
}

size_t MaskedBackbone::n_theta() const {
  size_t n = 0;
  for (const auto& w : weights) n += static_cast<size_t>(w.size());
  return n;
}

size_t MaskedBackbone::layer_offset(size_t l) const {
  size_t off = 0;
  for (size_t i = 0; i < l; ++i) off += static_cast<size_t>(weights[i].size());
  return off;
}

uint64_t MaskedBackbone::weights_digest() const {
  uint64_t h = 0xcbf29ce484222325ULL;
  for (const auto& w : weights) h = digest_matrix(w.value, h);
  return h;
}

uint64_t MaskedBackbone::weights_digest(const Bitmask& m) const {
  uint64_t h = 0xcbf29ce484222325ULL;
  size_t k = 0;
  for (const auto& w : weights)
    for (Index r = 0; r < w.value.rows(); ++r)
      for (Index c = 0; c < w.value.cols(); ++c, ++k) {
        if (!m.test(k)) continue;
        const Scalar v = w.value(r, c);
        h = fnv1a(&v, sizeof(v), h);
      }
  return h;
}

MaskedBackbone make_backbone(const std::vector<int>& widths, Scalar leaky_slope, Rng& rng,
                             Scalar score_init) {
  if (widths.size() < 2) throw ConfigError("backbone: need at least input and one layer width");
  MaskedBackbone b;
  b.leaky_slope = leaky_slope;
  for (size_t l = 0; l + 1 < widths.size(); ++l) {
    const std::string tag = "backbone.l" + std::to_string(l);
    b.weights.push_back(glorot_uniform(tag + ".weight", widths[l], widths[l + 1], rng));
    b.scores.push_back(
        uniform_init(tag + ".score", widths[l], widths[l + 1], -score_init, score_init, rng));
  }
  return b;
}

Bitmask select_topc(const MaskedBackbone& b, Scalar c_percent) {
  if (c_percent <= 0.0 || c_percent > 100.0)
    throw ConfigError("select_topc: ratio must be in (0, 100]");
  const size_t n = b.n_theta();
  std::vector<Scalar> mag(n);
  size_t k = 0;
  for (const auto& s : b.scores)
    for (Index r = 0; r < s.value.rows(); ++r)
      for (Index c = 0; c < s.value.cols(); ++c, ++k) mag[k] = std::abs(s.value(r, c));

  const size_t keep =
      static_cast<size_t>(std::ceil(c_percent / 100.0 * static_cast<Scalar>(n)));
  std::vector<size_t> order(n);
  std::iota(order.begin(), order.end(), size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](size_t a, size_t bb) {
    if (mag[a] != mag[bb]) return mag[a] > mag[bb];
    return a < bb;
  });

  Bitmask out(n);
  for (size_t i = 0; i < keep && i < n; ++i) out.set(order[i]);
  return out;
}

Var masked_forward(Tape& t, Var h, MaskedBackbone& b, const Bitmask& mask) {
  if (mask.size() != b.n_theta())
    throw DimensionError("masked_forward: mask length " + std::to_string(mask.size()) +
                         " vs n_theta " + std::to_string(b.n_theta()));
  Var x = h;
  for (size_t l = 0; l < b.weights.size(); ++l) {
    auto keep = mask.slice(b.layer_offset(l), static_cast<size_t>(b.weights[l].size()));
    Var w_eff = select_mask_st(t, t.param(b.weights[l]), t.param(b.scores[l]), std::move(keep));
    x = leaky_relu(t, matmul(t, x, w_eff), b.leaky_slope);
  }
  return x;
}

Bitmask trainable_set(const Bitmask& phi_next, const Bitmask& union_prev) {
  return phi_next.and_not(union_prev);
}

void TaskMaskRegistry::commit(int task, const Bitmask& mask) {
  if (task != static_cast<int>(masks_.size()))
    throw ProtocolError("mask registry: expected commit of task " +
                        std::to_string(masks_.size()) + ", got " + std::to_string(task));
  if (mask.size() != n_) throw DimensionError("mask registry: mask length mismatch");
  masks_.push_back(mask);
  union_ = union_ | mask;
}

const Bitmask& TaskMaskRegistry::task_mask(int task) const {
  if (task < 0 || task >= static_cast<int>(masks_.size()))
    throw ProtocolError("mask registry: task " + std::to_string(task) + " not committed");
  return masks_[static_cast<size_t>(task)];
}

AdamState make_adam_state(const Parameter& p) {
  return AdamState{Mat::Zero(p.value.rows(), p.value.cols()),
                   Mat::Zero(p.value.rows(), p.value.cols())};
}

void adam_update(Parameter& p, AdamState& st, const AdamConfig& cfg, long step_count,
                 const uint8_t* keep) {
  const Scalar bc1 = 1.0 - std::pow(cfg.beta1, static_cast<Scalar>(step_count));
  const Scalar bc2 = 1.0 - std::pow(cfg.beta2, static_cast<Scalar>(step_count));
  size_t k = 0;
  for (Index r = 0; r < p.value.rows(); ++r)
    for (Index c = 0; c < p.value.cols(); ++c, ++k) {
      if (keep && !keep[k]) continue;
      const Scalar g = p.grad(r, c);
      st.m(r, c) = cfg.beta1 * st.m(r, c) + (1.0 - cfg.beta1) * g;
      st.v(r, c) = cfg.beta2 * st.v(r, c) + (1.0 - cfg.beta2) * g * g;
      const Scalar mhat = st.m(r, c) / bc1;
      const Scalar vhat = st.v(r, c) / bc2;
      p.value(r, c) -= cfg.lr * mhat / (std::sqrt(vhat) + cfg.eps);
    }
}

}  // namespace ramcg
