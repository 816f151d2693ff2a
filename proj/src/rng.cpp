#include "compositeflow/rng.hpp"

#include <cmath>
#include <numbers>

#include "compositeflow/errors.hpp"

namespace compositeflow {

double RandomStream::normal(std::uint64_t i) const {
  const double u1 = uniform(2 * i);
  const double u2 = uniform(2 * i + 1);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

Eigen::VectorXd RandomStream::normal_vector(Eigen::Index n, std::uint64_t offset) const {
  Eigen::VectorXd v(n);
  for (Eigen::Index j = 0; j < n; ++j) {
    v[j] = normal(offset + static_cast<std::uint64_t>(j));
  }
  return v;
}

std::vector<std::size_t> RandomStream::sample_without_replacement(std::size_t n,
                                                                  std::size_t k) const {
  if (k > n) {
    throw UsageError("sample_without_replacement: k exceeds population size");
  }
  std::vector<std::size_t> pool(n);
  for (std::size_t i = 0; i < n; ++i) pool[i] = i;
  for (std::size_t i = 0; i < k; ++i) {
    const std::size_t j = i + static_cast<std::size_t>(bits(i) % (n - i));
    std::swap(pool[i], pool[j]);
  }
  pool.resize(k);
  return pool;
}

double pairwise_sum(const double* data, std::size_t n) {
  if (n == 0) return 0.0;
  if (n == 1) return data[0];
  if (n == 2) return data[0] + data[1];
  const std::size_t half = n / 2;
  return pairwise_sum(data, half) + pairwise_sum(data + half, n - half);
}

double pairwise_sum(const std::vector<double>& v) { return pairwise_sum(v.data(), v.size()); }

double pairwise_mean(const std::vector<double>& v) {
  if (v.empty()) throw UsageError("pairwise_mean: empty input");
  return pairwise_sum(v) / static_cast<double>(v.size());
}

}  // namespace compositeflow
