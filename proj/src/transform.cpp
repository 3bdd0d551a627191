#include "psdsense/transform.hpp"

#include <algorithm>
#include <cmath>

namespace psdsense {

const char* to_string(TraceStatus s) {
  switch (s) {
    case TraceStatus::pass: return "pass";
    case TraceStatus::trace_mismatch: return "trace_mismatch";
    case TraceStatus::infeasible: return "infeasible";
  }
  return "infeasible";
}

template <typename Scalar>
SensingMap<Scalar> WhitenedProblem<Scalar>::whitened_map() const {
  MapProvenance prov;
  prov.family = Family::custom;
  prov.seed = source.seed;
  return SensingMap<Scalar>(M, prov);
}

namespace {

template <typename Scalar>
bool positive_definite(const Mat<Scalar>& b, Real rel_margin, RealVec& values,
                       Mat<Scalar>& vectors) {
  detail::eig_sorted<Scalar>(b, values, vectors);
  const Real scale = values.cwiseAbs().maxCoeff();
  return scale > 0.0 && values(values.size() - 1) > rel_margin * scale;
}

}  // namespace

template <typename Scalar>
RealVec find_phi(const SensingMap<Scalar>& map, const FindPhiOptions& opts) {
  const Eigen::Index m = map.m();
  RealVec phi = RealVec::Ones(m);
  RealVec values;
  Mat<Scalar> vectors;
  if (positive_definite<Scalar>(Hermitian<Scalar>(map.adjoint_raw(phi)).matrix(), opts.rel_margin,
                                values, vectors)) {
    return phi;
  }

  // lambda_min(sum phi_i A_i) is concave in phi with supergradient
  // g_i = v^H A_i v (v a bottom eigenvector); it is also positively
  // homogeneous, so the ascent is confined to the unit ball.
  phi /= phi.norm();
  for (int k = 0; k < opts.max_iters; ++k) {
    const Mat<Scalar> b = Hermitian<Scalar>(map.adjoint_raw(phi)).matrix();
    if (positive_definite<Scalar>(b, opts.rel_margin, values, vectors)) return phi;
    const Vec<Scalar> v = vectors.col(vectors.cols() - 1);
    RealVec g(m);
    for (Eigen::Index i = 0; i < m; ++i) {
      g(i) = std::real(v.dot(map.matrix(i).matrix() * v));
    }
    const Real gnorm = g.norm();
    if (gnorm == 0.0) break;
    phi += (1.0 / std::sqrt(k + 1.0)) * g / gnorm;
    const Real pn = phi.norm();
    if (pn > 1.0) phi /= pn;
  }
  throw NumericalError(
      "find_phi: no positive span certificate found (no weighted sum of the measurement "
      "matrices is positive definite)");
}

template <typename Scalar>
WhitenedProblem<Scalar> whiten(const SensingMap<Scalar>& map, const RealVec& b,
                               const RealVec& phi) {
  if (phi.size() != map.m() || b.size() != map.m()) {
    throw InvalidArgument("whiten: phi and b must have length m=" + std::to_string(map.m()));
  }
  WhitenedProblem<Scalar> wp;
  wp.phi = phi;
  wp.b = b;
  wp.source = map.provenance();
  wp.B = adjoint(map, phi);
  wp.V = cholesky(wp.B);
  const auto lower = wp.V.template triangularView<Eigen::Lower>();
  wp.M.reserve(static_cast<std::size_t>(map.m()));
  for (const auto& a : map.matrices()) {
    // M = V^{-1} A V^{-H} = V^{-1} (V^{-1} A)^H for Hermitian A.
    Mat<Scalar> w = lower.solve(a.matrix());
    Mat<Scalar> wh = w.adjoint();
    wp.M.emplace_back(lower.solve(wh));
  }
  wp.c = phi.dot(b);
  return wp;
}

template <typename Scalar>
Hermitian<Scalar> to_Y(const WhitenedProblem<Scalar>& wp, const Hermitian<Scalar>& x) {
  return Hermitian<Scalar>(wp.V.adjoint() * x.matrix() * wp.V);
}

template <typename Scalar>
Hermitian<Scalar> from_Y(const WhitenedProblem<Scalar>& wp, const Hermitian<Scalar>& y) {
  const auto lower = wp.V.template triangularView<Eigen::Lower>();
  // W = V^{-H} Y, then X = W V^{-1} = (V^{-H} W^H)^H.
  Mat<Scalar> w = lower.adjoint().solve(y.matrix());
  Mat<Scalar> wh = w.adjoint();
  Mat<Scalar> xh = lower.adjoint().solve(wh);
  return Hermitian<Scalar>(xh.adjoint());
}

template <typename Scalar>
Real relative_residual(const SensingMap<Scalar>& map, const RealVec& b, const Mat<Scalar>& x) {
  const Real rn = (map.apply_raw(x) - b).norm();
  const Real bn = b.norm();
  return bn > 0.0 ? rn / bn : rn;
}

template <typename Scalar>
bool is_psd(const Hermitian<Scalar>& x, Real rel_tol) {
  const RealVec ev = eig_herm(x).eigenvalues;
  return ev(ev.size() - 1) >= -rel_tol * std::max(ev(0), 0.0);
}

template <typename Scalar>
TraceReport verify_trace_invariance(const WhitenedProblem<Scalar>& wp,
                                    const SensingMap<Scalar>& map, const Hermitian<Scalar>& x,
                                    Real tol_feas) {
  TraceReport rep;
  rep.c = wp.c;
  rep.tolerance = 1e-6 * (1.0 + std::abs(wp.c));
  rep.residual = relative_residual(map, wp.b, x.matrix());
  rep.trace_y = to_Y(wp, x).trace();
  rep.deviation = std::abs(rep.trace_y - wp.c);
  rep.psd = is_psd(x);
  if (rep.residual > tol_feas) {
    rep.status = TraceStatus::infeasible;
  } else {
    rep.status = rep.deviation <= rep.tolerance ? TraceStatus::pass : TraceStatus::trace_mismatch;
  }
  return rep;
}

#define PSDSENSE_INSTANTIATE_TRANSFORM(S)                                                     \
  template struct WhitenedProblem<S>;                                                         \
  template RealVec find_phi(const SensingMap<S>&, const FindPhiOptions&);                     \
  template WhitenedProblem<S> whiten(const SensingMap<S>&, const RealVec&, const RealVec&);   \
  template Hermitian<S> to_Y(const WhitenedProblem<S>&, const Hermitian<S>&);                 \
  template Hermitian<S> from_Y(const WhitenedProblem<S>&, const Hermitian<S>&);               \
  template Real relative_residual(const SensingMap<S>&, const RealVec&, const Mat<S>&);       \
  template bool is_psd(const Hermitian<S>&, Real);                                            \
  template TraceReport verify_trace_invariance(const WhitenedProblem<S>&, const SensingMap<S>&, \
                                               const Hermitian<S>&, Real);

PSDSENSE_INSTANTIATE_TRANSFORM(Real)
PSDSENSE_INSTANTIATE_TRANSFORM(Complex)

}  // namespace psdsense
