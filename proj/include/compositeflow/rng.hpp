#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Core>

namespace compositeflow {

/// Purpose tags separating the random streams drawn from one master seed.
/// Streams keyed by distinct purposes never overlap.
enum class StreamPurpose : std::uint64_t {
  kGradientNoise = 1,
  kMinibatch = 2,
  kSdeNoise = 3,
  kPowerIteration = 4,
  kDataGeneration = 5,
  kInitialPoint = 6,
  kBootstrap = 7,
};

/// splitmix64 finalizer; the one mixing function used everywhere seeds are
/// derived (per-seed ensemble streams, per-step noise, data generation).
inline std::uint64_t mix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// Derives the i-th worker seed from a master seed.
inline std::uint64_t derive_seed(std::uint64_t master_seed, std::uint64_t index) {
  return mix64(master_seed ^ mix64(index));
}

/// Counter-based deterministic random stream keyed by
/// (seed, purpose, step_index). Values are pure functions of the key and a
/// draw counter, so streams are reproducible and sharable across workers
/// without state.
class RandomStream {
 public:
  RandomStream(std::uint64_t seed, StreamPurpose purpose, std::uint64_t step_index)
      : key_(mix64(seed ^ mix64(static_cast<std::uint64_t>(purpose) ^
                                mix64(step_index)))) {}

  /// i-th raw 64-bit word of the stream.
  std::uint64_t bits(std::uint64_t i) const { return mix64(key_ ^ mix64(i)); }

  /// i-th uniform draw in (0, 1).
  double uniform(std::uint64_t i) const {
    // 53 mantissa bits, offset by half an ulp so 0 is never returned.
    return (static_cast<double>(bits(i) >> 11) + 0.5) * 0x1.0p-53;
  }

  /// i-th standard normal draw via Box-Muller (cosine branch); each draw
  /// consumes the uniform pair (2i, 2i+1).
  double normal(std::uint64_t i) const;

  /// Vector of n i.i.d. standard normals, draws [offset, offset + n).
  Eigen::VectorXd normal_vector(Eigen::Index n, std::uint64_t offset = 0) const;

  /// k distinct indices drawn uniformly without replacement from [0, n),
  /// via partial Fisher-Yates. Requires k <= n.
  std::vector<std::size_t> sample_without_replacement(std::size_t n, std::size_t k) const;

 private:
  std::uint64_t key_;
};

/// In-order pairwise summation; the mandated reduction for ensemble means so
/// results do not depend on accumulation order or worker count.
double pairwise_sum(const double* data, std::size_t n);
double pairwise_sum(const std::vector<double>& v);
double pairwise_mean(const std::vector<double>& v);

}  // namespace compositeflow
