#pragma once

#include <optional>
#include <string>
#include <vector>

#include "psdsense/core.hpp"
#include "psdsense/sensing.hpp"

namespace psdsense {

/// Shared knobs for the recovery solvers.
///
/// tol_resid stops a solver once ||b - A(X_k)||_2 / ||b||_2 falls below it.
/// eta = nullopt selects the automatic step size; rank_budget = nullopt
/// means "full" (no rank constraint / square factor).
struct SolverConfig {
  int max_iters = 20000;
  Real tol_resid = 1e-10;
  std::optional<Real> eta;
  std::optional<Eigen::Index> rank_budget;
  std::uint64_t seed = 0;
  // Spectral initialization source: "pinv" uses A*(G^+ b) (the minimum-norm
  // least-squares point), "adjoint" uses A*(b) / s.
  std::string init = "pinv";

  // nuclear_min: Douglas-Rachford with prox step lambda, geometric
  // continuation lambda <- decay * lambda every stage_iters iterations down
  // to lambda_min_ratio * lambda0. lambda0 is relative to ||A^+(b)||_2.
  bool psd_constrained = true;
  Real lambda0 = 1.0;
  Real lambda_decay = 0.5;
  Real lambda_min_ratio = 1e-2;
  int stage_iters = 200;

  void validate() const;
};

template <typename Scalar>
struct SolverReport {
  std::string solver;
  Hermitian<Scalar> x_hat;
  int iters = 0;
  bool converged = false;
  std::vector<Real> resid_history;  // relative residual per iteration
  Real objective_value = 0.0;
  Real wall_ms = 0.0;
  int descent_violations = 0;
  std::vector<std::string> notes;

  // Filled in by score().
  Real dist_full = -1.0;
  Real dist_rank1 = -1.0;

  Real final_residual() const { return resid_history.empty() ? 0.0 : resid_history.back(); }
  /// First iteration whose residual is <= tol, or -1.
  int iters_to_residual(Real tol) const;
};

/// Fills dist_full = ||X_hat - X*||_F and dist_rank1 = ||best_rank_r(X_hat) - X*||_F.
template <typename Scalar>
void score(SolverReport<Scalar>& report, const GroundTruth<Scalar>& truth);

/// Raised when a descent method blows up; carries the residual history.
class DivergenceError : public NumericalError {
 public:
  DivergenceError(const std::string& what, std::vector<Real> history)
      : NumericalError(what), history_(std::move(history)) {}
  const std::vector<Real>& history() const { return history_; }

 private:
  std::vector<Real> history_;
};

/// Orthogonal projection onto {X : A(X) = b} in the Hermitian matrices:
/// X - A*(G^+ (A(X) - b)), with G the Gram matrix of the map and G^+ cut at
/// 1e-10 lambda_max(G).
template <typename Scalar>
class AffineProjector {
 public:
  AffineProjector(const SensingMap<Scalar>& map, const RealVec& b);

  Mat<Scalar> project(const Mat<Scalar>& x) const;
  /// Minimum-norm solution A*(G^+ b).
  Mat<Scalar> min_norm_point() const;
  Real gram_lambda_max() const { return lambda_max_; }
  Real gram_condition() const { return pinv_.condition; }
  Eigen::Index gram_rank() const { return pinv_.rank; }

 private:
  const SensingMap<Scalar>* map_;
  RealVec b_;
  PseudoInverse pinv_;
  Real lambda_max_ = 0.0;
};

template <typename Scalar>
struct SpectralInit {
  Mat<Scalar> x0;  // psd_rank_project(A*(b) / s, k)
  Mat<Scalar> u0;  // n x k factor, U0 U0^H = x0
  Real scale = 0.0;  // s
  Real eta = 0.0;    // automatic FGD step
};

/// Spectral initialization with k = r (or n when r is nullopt).
template <typename Scalar>
SpectralInit<Scalar> spectral_init(const SensingMap<Scalar>& map, const RealVec& b,
                                   std::optional<Eigen::Index> r, const std::string& kind = "pinv");

/// Factored gradient descent U <- U - eta A*(A(U U^H) - b) U.
template <typename Scalar>
SolverReport<Scalar> fgd(const SensingMap<Scalar>& map, const RealVec& b, const SolverConfig& cfg);

/// Projected gradient descent onto the PSD cone (rank-constrained when
/// cfg.rank_budget is set). Starts at x0 when given, otherwise at 0.
template <typename Scalar>
SolverReport<Scalar> pgd_psd(const SensingMap<Scalar>& map, const RealVec& b,
                             const SolverConfig& cfg,
                             const std::optional<Hermitian<Scalar>>& x0 = std::nullopt);

/// Plain gradient descent on g from 0 with no projection.
template <typename Scalar>
SolverReport<Scalar> gd_unconstrained(const SensingMap<Scalar>& map, const RealVec& b,
                                      const SolverConfig& cfg);

/// min ||X||_* s.t. A(X) = b (and X PSD when cfg.psd_constrained).
template <typename Scalar>
SolverReport<Scalar> nuclear_min(const SensingMap<Scalar>& map, const RealVec& b,
                                 const SolverConfig& cfg);

/// min ||X||_F s.t. A(X) = b, X PSD, via Dykstra's alternating projections from 0.
template <typename Scalar>
SolverReport<Scalar> min_fro_norm(const SensingMap<Scalar>& map, const RealVec& b,
                                  const SolverConfig& cfg);

/// Minimum-Frobenius-norm solution of A(X) = b over all Hermitian X.
template <typename Scalar>
SolverReport<Scalar> unconstrained_ls(const SensingMap<Scalar>& map, const RealVec& b);

/// g(X) = 1/2 ||b - A(X)||^2 and its gradient A*(A(X) - b).
template <typename Scalar>
Real objective_g(const SensingMap<Scalar>& map, const RealVec& b, const Mat<Scalar>& x);

template <typename Scalar>
Mat<Scalar> gradient_g(const SensingMap<Scalar>& map, const RealVec& b, const Mat<Scalar>& x);

/// Solver names accepted by run_solver: fgd, fgd_full, pgd_psd, nuclear_min,
/// min_fro_norm, unconstrained_ls, gd_unconstrained.
const std::vector<std::string>& solver_names();

/// Dispatches by name. fgd uses truth_rank as its factor width unless
/// cfg.rank_budget says otherwise; fgd_full uses a square factor.
template <typename Scalar>
SolverReport<Scalar> run_solver(const std::string& name, const SensingMap<Scalar>& map,
                                const RealVec& b, SolverConfig cfg, Eigen::Index truth_rank);

}  // namespace psdsense
