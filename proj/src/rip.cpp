#include "psdsense/rip.hpp"

#include <algorithm>
#include <cmath>

#include "psdsense/rng.hpp"

namespace psdsense {

template <typename Scalar>
Hermitian<Scalar> rip_probe(Eigen::Index n, Eigen::Index r, std::uint64_t seed, std::uint64_t k) {
  Philox rng(seed, stream_id(StreamTag::rip_probe, k));
  Mat<Scalar> g(n, r);
  for (Eigen::Index j = 0; j < r; ++j) {
    for (Eigen::Index i = 0; i < n; ++i) {
      if constexpr (is_complex_v<Scalar>) {
        const Real re = rng.normal();
        const Real im = rng.normal();
        g(i, j) = Scalar(re, im);
      } else {
        g(i, j) = rng.normal();
      }
    }
  }
  Mat<Scalar> x;
  if (k % 2 == 0) {
    x = g * g.adjoint();
  } else {
    Eigen::HouseholderQR<Mat<Scalar>> qr(g);
    const Mat<Scalar> q = qr.householderQ() * Mat<Scalar>::Identity(n, r);
    RealVec s(r);
    for (Eigen::Index j = 0; j < r; ++j) s(j) = rng.normal();
    x = q * s.asDiagonal() * q.adjoint();
  }
  x /= x.norm();
  return Hermitian<Scalar>(x);
}

template <typename Scalar>
std::vector<Real> rip_ratios(const SensingMap<Scalar>& map, Eigen::Index r, Eigen::Index samples,
                             std::uint64_t seed) {
  if (r < 1 || r > map.n()) {
    throw InvalidArgument("rip: rank " + std::to_string(r) + " outside [1, " +
                          std::to_string(map.n()) + "]");
  }
  if (samples < 100) throw InvalidArgument("rip: need at least 100 samples");
  std::vector<Real> ratios;
  ratios.reserve(static_cast<std::size_t>(samples));
  for (Eigen::Index k = 0; k < samples; ++k) {
    const auto x = rip_probe<Scalar>(map.n(), r, seed, static_cast<std::uint64_t>(k));
    ratios.push_back(map.apply_raw(x.matrix()).template lpNorm<1>());
  }
  return ratios;
}

Real median(std::vector<Real> values) {
  if (values.empty()) throw InvalidArgument("median of an empty set");
  const std::size_t mid = values.size() / 2;
  std::nth_element(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(mid), values.end());
  const Real upper = values[mid];
  if (values.size() % 2 == 1) return upper;
  const Real lower = *std::max_element(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(mid));
  return 0.5 * (lower + upper);
}

Real delta_from_ratios(const std::vector<Real>& ratios, Real alpha) {
  Real d = 0.0;
  for (Real v : ratios) d = std::max(d, std::abs(v / alpha - 1.0));
  return d;
}

template <typename Scalar>
RipEstimate estimate_rip_l2l1(const SensingMap<Scalar>& map, Eigen::Index r, Eigen::Index samples,
                              std::uint64_t seed) {
  Real scale = 0.0;
  for (const auto& a : map.matrices()) scale = std::max(scale, a.matrix().cwiseAbs().maxCoeff());
  if (scale == 0.0) throw InvalidArgument("rip: all measurement matrices are zero");

  RipEstimate est;
  est.r = r;
  est.samples = samples;
  est.ratios = rip_ratios(map, r, samples, seed);
  est.alpha = median(est.ratios);
  if (!(est.alpha > 0.0)) throw NumericalError("rip: median ratio is zero; map annihilates probes");
  est.delta_hat = delta_from_ratios(est.ratios, est.alpha);
  est.ratio_min = *std::min_element(est.ratios.begin(), est.ratios.end());
  est.ratio_max = *std::max_element(est.ratios.begin(), est.ratios.end());
  est.ratio_median = est.alpha;
  return est;
}

template <typename Scalar>
CorollaryReport check_corollary_scaling(const SensingMap<Scalar>& map, Eigen::Index r,
                                        Eigen::Index gamma, Eigen::Index samples,
                                        std::uint64_t seed) {
  if (r < 1 || gamma < 1 || gamma * r > map.n() || 2 * r > map.n()) {
    throw InvalidArgument("corollary check: need gamma*r <= n and 2r <= n (n=" +
                          std::to_string(map.n()) + ", r=" + std::to_string(r) +
                          ", gamma=" + std::to_string(gamma) + ")");
  }
  CorollaryReport rep;
  rep.r = r;
  rep.gamma = gamma;
  const auto ratios_2r = rip_ratios(map, 2 * r, samples, seed);
  const auto ratios_gr = rip_ratios(map, gamma * r, samples, seed);
  rep.alpha = median(ratios_2r);
  if (!(rep.alpha > 0.0)) throw NumericalError("rip: median ratio is zero; map annihilates probes");
  rep.delta_2r = delta_from_ratios(ratios_2r, rep.alpha);
  rep.delta_gamma_r = delta_from_ratios(ratios_gr, rep.alpha);
  rep.holds = rep.delta_gamma_r <= static_cast<Real>(gamma) * rep.delta_2r + rep.slack;
  if (!rep.holds) {
    rep.warning = "delta_hat(" + std::to_string(gamma * r) + ") exceeds " + std::to_string(gamma) +
                  " * delta_hat(" + std::to_string(2 * r) +
                  ") + slack; estimates are lower bounds, treat as a sampling artifact";
  }
  return rep;
}

#define PSDSENSE_INSTANTIATE_RIP(S)                                                              \
  template Hermitian<S> rip_probe<S>(Eigen::Index, Eigen::Index, std::uint64_t, std::uint64_t);  \
  template std::vector<Real> rip_ratios(const SensingMap<S>&, Eigen::Index, Eigen::Index,        \
                                        std::uint64_t);                                          \
  template RipEstimate estimate_rip_l2l1(const SensingMap<S>&, Eigen::Index, Eigen::Index,       \
                                         std::uint64_t);                                         \
  template CorollaryReport check_corollary_scaling(const SensingMap<S>&, Eigen::Index,           \
                                                   Eigen::Index, Eigen::Index, std::uint64_t);

PSDSENSE_INSTANTIATE_RIP(Real)
PSDSENSE_INSTANTIATE_RIP(Complex)

}  // namespace psdsense
