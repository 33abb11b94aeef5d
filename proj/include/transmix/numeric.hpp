#ifndef TRANSMIX_NUMERIC_HPP
#define TRANSMIX_NUMERIC_HPP

#include <cmath>
#include <complex>
#include <cstddef>
#include <span>
#include <vector>

namespace transmix {

using Complex = std::complex<double>;

namespace detail {

inline constexpr std::size_t kPairwiseLeaf = 32;

/// Pairwise (cascade) summation. Error grows like O(log n) instead of O(n).
template <class T>
T pairwise_sum(std::span<const T> values) {
  const std::size_t n = values.size();
  if (n <= kPairwiseLeaf) {
    T acc{};
    for (const T& v : values) acc += v;
    return acc;
  }
  const std::size_t half = n / 2;
  return pairwise_sum(values.first(half)) + pairwise_sum(values.subspan(half));
}

template <class T>
T pairwise_sum(const std::vector<T>& values) {
  return pairwise_sum(std::span<const T>(values));
}

inline double softplus(double x) {
  // log(1 + e^x) without overflow
  return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

inline double sigmoid(double x) {
  if (x >= 0.0) {
    const double e = std::exp(-x);
    return 1.0 / (1.0 + e);
  }
  const double e = std::exp(x);
  return e / (1.0 + e);
}

inline double clamp_to(double x, double lo, double hi) {
  return x < lo ? lo : (x > hi ? hi : x);
}

}  // namespace detail
}  // namespace transmix

#endif  // TRANSMIX_NUMERIC_HPP
