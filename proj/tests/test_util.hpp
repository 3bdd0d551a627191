#pragma once

#include <cstdint>

#include "psdsense/core.hpp"
#include "psdsense/rng.hpp"

namespace testutil {

using namespace psdsense;

template <typename Scalar>
Scalar draw(Philox& g) {
  if constexpr (is_complex_v<Scalar>) {
    const double re = g.normal();
    return Scalar(re, g.normal());
  } else {
    return g.normal();
  }
}

template <typename Scalar>
Mat<Scalar> gaussian(Eigen::Index rows, Eigen::Index cols, std::uint64_t seed) {
  Philox g(seed, 0x7e57);
  Mat<Scalar> a(rows, cols);
  for (Eigen::Index j = 0; j < cols; ++j) {
    for (Eigen::Index i = 0; i < rows; ++i) a(i, j) = draw<Scalar>(g);
  }
  return a;
}

template <typename Scalar>
Hermitian<Scalar> random_hermitian(Eigen::Index n, std::uint64_t seed) {
  return Hermitian<Scalar>(gaussian<Scalar>(n, n, seed));
}

template <typename Scalar>
Hermitian<Scalar> random_psd(Eigen::Index n, Eigen::Index r, std::uint64_t seed) {
  const Mat<Scalar> g = gaussian<Scalar>(n, r, seed);
  return Hermitian<Scalar>(g * g.adjoint());
}

inline double rel_err(double a, double b) { return std::abs(a - b) / std::max(1.0, std::abs(b)); }

}  // namespace testutil
