#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "psdsense/core.hpp"
#include "psdsense/sensing.hpp"

namespace psdsense {

/// Empirical RIP-l2/l1 estimate over random unit-Frobenius rank-r probes.
///
/// ratio_k = ||A(X_k)||_1, alpha = median(ratio), delta_hat =
/// max_k |ratio_k / alpha - 1|. Sampling only visits finitely many
/// directions, so delta_hat is a lower bound on the true constant.
struct RipEstimate {
  Eigen::Index r = 0;
  Eigen::Index samples = 0;
  Real alpha = 0.0;
  Real delta_hat = 0.0;
  Real ratio_min = 0.0;
  Real ratio_median = 0.0;
  Real ratio_max = 0.0;
  std::vector<Real> ratios;
  static constexpr const char* bound_note =
      "empirical lower bound: the true delta_r is at least this value";
};

/// Rank-r probe k of a seeded sequence: even k are PSD (G G^H), odd k have
/// a mixed-sign spectrum (Q diag(s) Q^H with Q orthonormal, s Gaussian).
/// Always scaled to unit Frobenius norm.
template <typename Scalar>
Hermitian<Scalar> rip_probe(Eigen::Index n, Eigen::Index r, std::uint64_t seed, std::uint64_t k);

template <typename Scalar>
std::vector<Real> rip_ratios(const SensingMap<Scalar>& map, Eigen::Index r, Eigen::Index samples,
                             std::uint64_t seed);

Real median(std::vector<Real> values);

/// max_k |ratio_k / alpha - 1|.
Real delta_from_ratios(const std::vector<Real>& ratios, Real alpha);

template <typename Scalar>
RipEstimate estimate_rip_l2l1(const SensingMap<Scalar>& map, Eigen::Index r, Eigen::Index samples,
                              std::uint64_t seed);

struct CorollaryReport {
  Eigen::Index r = 0;
  Eigen::Index gamma = 0;
  Real alpha = 0.0;  // shared calibration: median of the rank-2r ratios
  Real delta_gamma_r = 0.0;
  Real delta_2r = 0.0;
  Real slack = 0.05;
  bool holds = false;
  std::string warning;
};

/// Compares delta_hat(gamma r) against gamma * delta_hat(2r) + slack with a
/// shared alpha. A violation is reported as a sampling warning only.
template <typename Scalar>
CorollaryReport check_corollary_scaling(const SensingMap<Scalar>& map, Eigen::Index r,
                                        Eigen::Index gamma, Eigen::Index samples,
                                        std::uint64_t seed);

}  // namespace psdsense
