#pragma once

#include <cstddef>
#include <cstdint>

#include "d2ml/matrix.hpp"
#include "d2ml/panel.hpp"
#include "d2ml/rng.hpp"

namespace d2ml::testing {

inline DenseMatrix random_normal(std::size_t r, std::size_t c, Rng& rng) {
  DenseMatrix m(r, c);
  for (double& v : m.values()) v = rng.normal();
  return m;
}

/// A'A + eps I for a random n x n A.
inline DenseMatrix random_spd(std::size_t n, Rng& rng, double eps = 1e-3) {
  const DenseMatrix a = random_normal(n, n, rng);
  DenseMatrix s = a.transpose() * a;
  for (std::size_t i = 0; i < n; ++i) s(i, i) += eps;
  return s;
}

/// x1 ~ N(0,1), x2 = 0.5 x1 + u with u ~ N(0,1): covariance [[1,0.5],[0.5,1.25]].
inline Panel bivariate_panel(std::size_t t, std::uint64_t seed) {
  Rng rng(seed);
  DenseMatrix d(t, 2);
  for (std::size_t r = 0; r < t; ++r) {
    d(r, 0) = rng.normal();
    d(r, 1) = 0.5 * d(r, 0) + rng.normal();
  }
  return Panel(std::move(d), {{"a", "x"}, {"b", "x"}});
}

}  // namespace d2ml::testing
