#pragma once

#include <string>
#include <vector>

#include "psdsense/core.hpp"
#include "psdsense/sensing.hpp"

namespace psdsense {

/// Certificate bundle for the change of variables Y = V^H X V.
///
/// B = sum_i phi_i A_i = V V^H (V lower triangular), M_i = V^{-1} A_i V^{-H},
/// c = sum_i phi_i b_i. Every X with A(X) = b satisfies Tr(V^H X V) = c, so
/// all feasible PSD points of the whitened problem share the trace c.
template <typename Scalar>
struct WhitenedProblem {
  RealVec phi;
  Hermitian<Scalar> B;
  Mat<Scalar> V;
  std::vector<Hermitian<Scalar>> M;
  Real c = 0.0;
  RealVec b;
  MapProvenance source;

  /// The whitened map Y -> (<M_i, Y>)_i as a custom-family SensingMap.
  SensingMap<Scalar> whitened_map() const;
};

struct FindPhiOptions {
  int max_iters = 2000;
  /// B counts as positive definite once lambda_min(B) > rel_margin * lambda_max(|B|).
  Real rel_margin = 1e-10;
};

/// Returns phi with sum_i phi_i A_i positive definite. Tries phi = 1 first,
/// then a projected-subgradient ascent on lambda_min over the unit ball.
template <typename Scalar>
RealVec find_phi(const SensingMap<Scalar>& map, const FindPhiOptions& opts = {});

template <typename Scalar>
WhitenedProblem<Scalar> whiten(const SensingMap<Scalar>& map, const RealVec& b,
                               const RealVec& phi);

/// Y = V^H X V.
template <typename Scalar>
Hermitian<Scalar> to_Y(const WhitenedProblem<Scalar>& wp, const Hermitian<Scalar>& x);

/// X = V^{-H} Y V^{-1}.
template <typename Scalar>
Hermitian<Scalar> from_Y(const WhitenedProblem<Scalar>& wp, const Hermitian<Scalar>& y);

template <typename Scalar>
Real trace_constant(const WhitenedProblem<Scalar>& wp) {
  return wp.c;
}

enum class TraceStatus { pass, trace_mismatch, infeasible };
const char* to_string(TraceStatus s);

struct TraceReport {
  TraceStatus status = TraceStatus::infeasible;
  Real residual = 0.0;   // ||A(X) - b|| / ||b||
  Real trace_y = 0.0;    // Tr(V^H X V)
  Real c = 0.0;
  Real deviation = 0.0;  // |trace_y - c|
  Real tolerance = 0.0;  // 1e-6 (1 + |c|)
  bool psd = false;      // lambda_min >= -1e-8 lambda_max
  bool pass() const { return status == TraceStatus::pass; }
};

/// Checks |Tr(V^H X V) - c| <= 1e-6 (1 + |c|). Points whose relative
/// feasibility residual exceeds tol_feas are reported as infeasible.
template <typename Scalar>
TraceReport verify_trace_invariance(const WhitenedProblem<Scalar>& wp,
                                    const SensingMap<Scalar>& map, const Hermitian<Scalar>& x,
                                    Real tol_feas = 1e-6);

/// Relative residual ||A(X) - b|| / ||b|| (absolute when b = 0).
template <typename Scalar>
Real relative_residual(const SensingMap<Scalar>& map, const RealVec& b, const Mat<Scalar>& x);

/// lambda_min(X) >= -rel_tol * max(lambda_max(X), 0).
template <typename Scalar>
bool is_psd(const Hermitian<Scalar>& x, Real rel_tol = 1e-8);

}  // namespace psdsense
