#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>

namespace ramcg {

using Scalar = double;
using Mat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Index = Eigen::Index;

/// Shape contract violated (e.g. inner extents of a product disagree).
struct DimensionError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Malformed or inconsistent on-disk data.
struct DataError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Non-finite value produced where the contract requires finite ones.
struct NumericalError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Invalid configuration or unknown key.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Operation invoked out of protocol order (e.g. evaluating an uncommitted task).
struct ProtocolError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

inline uint64_t splitmix64(uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Seeded RNG with self-contained distributions so that streams are
/// reproducible independent of the standard library's <random> distributions.
class Rng {
 public:
  explicit Rng(uint64_t seed) : seed_(seed), eng_(splitmix64(seed)) {}

  uint64_t next_u64() { return eng_(); }

  /// Uniform in [0, 1).
  Scalar uniform() { return static_cast<Scalar>(next_u64() >> 11) * 0x1.0p-53; }

  Scalar uniform(Scalar lo, Scalar hi) { return lo + (hi - lo) * uniform(); }

  /// Uniform integer in [0, n).
  int uniform_int(int n) { return static_cast<int>(next_u64() % static_cast<uint64_t>(n)); }

  /// Standard normal via Box-Muller.
  Scalar normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    Scalar u1 = uniform();
    Scalar u2 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const Scalar r = std::sqrt(-2.0 * std::log(u1));
    const Scalar a = 2.0 * M_PI * u2;
    spare_ = r * std::sin(a);
    has_spare_ = true;
    return r * std::cos(a);
  }

  /// Independent substream derived from this RNG's seed and a stream tag.
  Rng fork(uint64_t stream) const { return Rng(splitmix64(seed_ ^ (stream * 0x9e3779b97f4a7c15ULL))); }

  uint64_t seed() const { return seed_; }

 private:
  uint64_t seed_;
  std::mt19937_64 eng_;
  bool has_spare_ = false;
  Scalar spare_ = 0.0;
};

/// FNV-1a over a byte range.
inline uint64_t fnv1a(const void* data, size_t len, uint64_t h = 0xcbf29ce484222325ULL) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (size_t i = 0; i < len; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline uint64_t digest_matrix(const Mat& m, uint64_t h = 0xcbf29ce484222325ULL) {
  for (Index r = 0; r < m.rows(); ++r)
    for (Index c = 0; c < m.cols(); ++c) {
      Scalar v = m(r, c);
      h = fnv1a(&v, sizeof(v), h);
    }
  return h;
}

inline std::string shape_str(Index rows, Index cols) {
  return std::to_string(rows) + "x" + std::to_string(cols);
}

inline std::string shape_str(const Mat& m) { return shape_str(m.rows(), m.cols()); }

}  // namespace ramcg
