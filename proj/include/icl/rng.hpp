#pragma once

#include <array>
#include <cstdint>
#include <initializer_list>
#include <limits>
#include <random>

#include <Eigen/Dense>

namespace icl {

/// Philox4x32-10 counter-based generator.
///
/// A stream is identified by a 64-bit key derived from (seed, ids...). Two
/// streams with different ids never share state, so replicas can be generated
/// in any order (or concurrently) and still reproduce bit-for-bit.
class Rng {
 public:
  using result_type = std::uint64_t;

  explicit Rng(std::uint64_t seed = 0) : key_(mix(seed, 0x9e3779b97f4a7c15ULL)) {}

  /// Independent substream addressed by ids (e.g. {task, sequence, index}).
  static Rng stream(std::uint64_t seed, std::initializer_list<std::uint64_t> ids) {
    Rng r;
    std::uint64_t k = mix(seed, 0x243f6a8885a308d3ULL);
    for (std::uint64_t id : ids) k = mix(k, id);
    r.key_ = k;
    return r;
  }

  /// Child stream of this generator's key; does not advance *this.
  Rng substream(std::uint64_t id) const {
    Rng r;
    r.key_ = mix(key_, id ^ 0x13198a2e03707344ULL);
    return r;
  }

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

  result_type operator()() {
    if (idx_ >= 2) refill();
    return buf_[idx_++];
  }

  double uniform() { return std::uniform_real_distribution<double>(0.0, 1.0)(*this); }
  double uniform(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(*this); }
  double normal() { return normal_(*this); }
  std::size_t index(std::size_t n) {
    return std::uniform_int_distribution<std::size_t>(0, n - 1)(*this);
  }

  Eigen::VectorXd normal_vector(Eigen::Index n) {
    Eigen::VectorXd v(n);
    for (Eigen::Index i = 0; i < n; ++i) v[i] = normal();
    return v;
  }

  Eigen::MatrixXd normal_matrix(Eigen::Index rows, Eigen::Index cols) {
    Eigen::MatrixXd m(rows, cols);
    for (Eigen::Index j = 0; j < cols; ++j)
      for (Eigen::Index i = 0; i < rows; ++i) m(i, j) = normal();
    return m;
  }

  /// Uniform point on the unit sphere in R^n.
  Eigen::VectorXd unit_sphere(Eigen::Index n) {
    Eigen::VectorXd v;
    do {
      v = normal_vector(n);
    } while (v.norm() == 0.0);
    return v / v.norm();
  }

  /// Uniform point in the closed ball of the given radius.
  Eigen::VectorXd ball(Eigen::Index n, double radius = 1.0) {
    const double r = radius * std::pow(uniform(), 1.0 / static_cast<double>(n));
    return r * unit_sphere(n);
  }

  std::uint64_t key() const { return key_; }

 private:
  static std::uint64_t mix(std::uint64_t a, std::uint64_t b) {
    // SplitMix64 finalizer over a ^ rotated b.
    std::uint64_t z = a ^ (b + 0x9e3779b97f4a7c15ULL + (a << 6) + (a >> 2));
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  void refill() {
    std::array<std::uint32_t, 4> ctr{
        static_cast<std::uint32_t>(counter_), static_cast<std::uint32_t>(counter_ >> 32), 0u, 0u};
    std::array<std::uint32_t, 2> k{static_cast<std::uint32_t>(key_),
                                   static_cast<std::uint32_t>(key_ >> 32)};
    for (int round = 0; round < 10; ++round) {
      const std::uint64_t p0 = std::uint64_t{0xD2511F53u} * ctr[0];
      const std::uint64_t p1 = std::uint64_t{0xCD9E8D57u} * ctr[2];
      ctr = {static_cast<std::uint32_t>(p1 >> 32) ^ ctr[1] ^ k[0], static_cast<std::uint32_t>(p1),
             static_cast<std::uint32_t>(p0 >> 32) ^ ctr[3] ^ k[1], static_cast<std::uint32_t>(p0)};
      k[0] += 0x9E3779B9u;
      k[1] += 0xBB67AE85u;
    }
    ++counter_;
    buf_[0] = (std::uint64_t{ctr[0]} << 32) | ctr[1];
    buf_[1] = (std::uint64_t{ctr[2]} << 32) | ctr[3];
    idx_ = 0;
  }

  std::uint64_t key_ = 0;
  std::uint64_t counter_ = 0;
  std::array<std::uint64_t, 2> buf_{};
  int idx_ = 2;
  std::normal_distribution<double> normal_{0.0, 1.0};
};

}  // namespace icl
