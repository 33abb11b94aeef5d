#ifndef TRANSMIX_ECF_HPP
#define TRANSMIX_ECF_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "transmix/errors.hpp"
#include "transmix/numeric.hpp"

namespace transmix {

/// Observed series Y_1..Y_n, n >= 2, all finite.
class Series {
 public:
  Series() = default;
  explicit Series(std::vector<double> y) : y_(std::move(y)) {
    if (y_.size() < 2) {
      throw InsufficientData("series needs at least 2 observations, got " + std::to_string(y_.size()));
    }
    for (double v : y_) {
      if (!std::isfinite(v)) throw InvalidParameter("series contains a non-finite value");
    }
  }

  [[nodiscard]] std::size_t size() const { return y_.size(); }
  [[nodiscard]] std::span<const double> values() const { return y_; }
  [[nodiscard]] const std::vector<double>& data() const { return y_; }
  double operator[](std::size_t i) const { return y_[i]; }

 private:
  std::vector<double> y_;
};

/// Empirical characteristic function of consecutive pairs tabulated on a
/// tensor grid, with the two axis restrictions cached.
struct EcfGrid {
  std::vector<double> nodes1;
  std::vector<double> nodes2;
  /// values[a * nodes2.size() + b] = ecf(nodes1[a], nodes2[b]).
  std::vector<Complex> values;
  std::vector<Complex> axis1;  ///< ecf(nodes1[a], 0)
  std::vector<Complex> axis2;  ///< ecf(0, nodes2[b])
  std::size_t n = 0;

  [[nodiscard]] Complex at(std::size_t a, std::size_t b) const { return values[a * nodes2.size() + b]; }
};

/// (1/n) * sum_{j=1}^{n-1} exp(i (t1 Y_j + t2 Y_{j+1})). The 1/n scaling with
/// n-1 summands is deliberate: the value at the origin is (n-1)/n.
inline Complex ecf_at(const Series& s, double t1, double t2) {
  const std::size_t n = s.size();
  if (n < 2) throw InsufficientData("ecf needs at least 2 observations");
  std::vector<Complex> terms(n - 1);
  for (std::size_t j = 0; j + 1 < n; ++j) terms[j] = std::polar(1.0, t1 * s[j] + t2 * s[j + 1]);
  return detail::pairwise_sum(terms) / static_cast<double>(n);
}

namespace detail {

inline constexpr std::size_t kEcfChunk = 1024;

// Pairwise sum of the products (c1 + i s1)(c2 + i s2) over one chunk.
inline Complex chunk_product_sum(std::span<const double> c1, std::span<const double> s1,
                                 std::span<const double> c2, std::span<const double> s2) {
  const std::size_t len = c1.size();
  if (len <= kPairwiseLeaf) {
    double re = 0.0;
    double im = 0.0;
    for (std::size_t j = 0; j < len; ++j) {
      re += c1[j] * c2[j] - s1[j] * s2[j];
      im += c1[j] * s2[j] + s1[j] * c2[j];
    }
    return {re, im};
  }
  const std::size_t h = len / 2;
  return chunk_product_sum(c1.first(h), s1.first(h), c2.first(h), s2.first(h)) +
         chunk_product_sum(c1.subspan(h), s1.subspan(h), c2.subspan(h), s2.subspan(h));
}

}  // namespace detail

/// Tabulates the empirical characteristic function on nodes1 x nodes2.
/// The data are processed in fixed chunks whose partial sums are combined
/// pairwise, so memory stays bounded and the result does not depend on n's
/// factorization into chunks beyond rounding at the 1e-15 level.
inline EcfGrid ecf_grid(const Series& s, std::span<const double> nodes1, std::span<const double> nodes2) {
  const std::size_t n = s.size();
  if (n < 2) throw InsufficientData("ecf needs at least 2 observations");
  if (nodes1.empty() || nodes2.empty()) throw InvalidParameter("ecf grid needs nonempty node vectors");

  const std::size_t na = nodes1.size();
  const std::size_t nb = nodes2.size();
  const std::size_t pairs = n - 1;
  const std::size_t chunks = (pairs + detail::kEcfChunk - 1) / detail::kEcfChunk;

  std::vector<std::vector<Complex>> partial(na * nb, std::vector<Complex>(chunks));
  std::vector<std::vector<Complex>> partial1(na, std::vector<Complex>(chunks));
  std::vector<std::vector<Complex>> partial2(nb, std::vector<Complex>(chunks));

  std::vector<double> c1(na * detail::kEcfChunk), s1(na * detail::kEcfChunk);
  std::vector<double> c2(nb * detail::kEcfChunk), s2(nb * detail::kEcfChunk);
  std::vector<double> ones(detail::kEcfChunk, 1.0), zeros(detail::kEcfChunk, 0.0);

  for (std::size_t c = 0; c < chunks; ++c) {
    const std::size_t begin = c * detail::kEcfChunk;
    const std::size_t len = std::min(detail::kEcfChunk, pairs - begin);
    for (std::size_t a = 0; a < na; ++a) {
      for (std::size_t j = 0; j < len; ++j) {
        const double arg = nodes1[a] * s[begin + j];
        c1[a * detail::kEcfChunk + j] = std::cos(arg);
        s1[a * detail::kEcfChunk + j] = std::sin(arg);
      }
    }
    for (std::size_t b = 0; b < nb; ++b) {
      for (std::size_t j = 0; j < len; ++j) {
        const double arg = nodes2[b] * s[begin + j + 1];
        c2[b * detail::kEcfChunk + j] = std::cos(arg);
        s2[b * detail::kEcfChunk + j] = std::sin(arg);
      }
    }
    const std::span<const double> one_span(ones.data(), len);
    const std::span<const double> zero_span(zeros.data(), len);
    for (std::size_t a = 0; a < na; ++a) {
      const std::span<const double> ca(c1.data() + a * detail::kEcfChunk, len);
      const std::span<const double> sa(s1.data() + a * detail::kEcfChunk, len);
      partial1[a][c] = detail::chunk_product_sum(ca, sa, one_span, zero_span);
      for (std::size_t b = 0; b < nb; ++b) {
        const std::span<const double> cb(c2.data() + b * detail::kEcfChunk, len);
        const std::span<const double> sb(s2.data() + b * detail::kEcfChunk, len);
        partial[a * nb + b][c] = detail::chunk_product_sum(ca, sa, cb, sb);
      }
    }
    for (std::size_t b = 0; b < nb; ++b) {
      const std::span<const double> cb(c2.data() + b * detail::kEcfChunk, len);
      const std::span<const double> sb(s2.data() + b * detail::kEcfChunk, len);
      partial2[b][c] = detail::chunk_product_sum(one_span, zero_span, cb, sb);
    }
  }

  const auto dn = static_cast<double>(n);
  EcfGrid grid;
  grid.nodes1.assign(nodes1.begin(), nodes1.end());
  grid.nodes2.assign(nodes2.begin(), nodes2.end());
  grid.n = n;
  grid.values.resize(na * nb);
  grid.axis1.resize(na);
  grid.axis2.resize(nb);
  for (std::size_t i = 0; i < na * nb; ++i) grid.values[i] = detail::pairwise_sum(partial[i]) / dn;
  for (std::size_t a = 0; a < na; ++a) grid.axis1[a] = detail::pairwise_sum(partial1[a]) / dn;
  for (std::size_t b = 0; b < nb; ++b) grid.axis2[b] = detail::pairwise_sum(partial2[b]) / dn;
  return grid;
}

inline EcfGrid ecf_grid(const Series& s, const std::vector<double>& nodes1, const std::vector<double>& nodes2) {
  return ecf_grid(s, std::span<const double>(nodes1), std::span<const double>(nodes2));
}

}  // namespace transmix

#endif  // TRANSMIX_ECF_HPP
