#include "psdsense/solvers.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <sstream>

#include "psdsense/transform.hpp"

namespace psdsense {

void SolverConfig::validate() const {
  if (max_iters < 1) throw InvalidArgument("solver: max_iters must be >= 1");
  if (!(tol_resid > 0.0)) throw InvalidArgument("solver: tol_resid must be positive");
  if (eta && !(*eta > 0.0)) throw InvalidArgument("solver: eta must be positive");
  if (rank_budget && *rank_budget < 1) throw InvalidArgument("solver: rank_budget must be >= 1");
  if (!(lambda0 > 0.0) || !(lambda_decay > 0.0 && lambda_decay <= 1.0) ||
      !(lambda_min_ratio > 0.0 && lambda_min_ratio <= 1.0) || stage_iters < 1) {
    throw InvalidArgument("solver: invalid lambda schedule");
  }
  if (init != "pinv" && init != "adjoint") {
    throw InvalidArgument("solver: init must be 'pinv' or 'adjoint', got '" + init + "'");
  }
}

template <typename Scalar>
int SolverReport<Scalar>::iters_to_residual(Real tol) const {
  for (std::size_t k = 0; k < resid_history.size(); ++k) {
    if (resid_history[k] <= tol) return static_cast<int>(k);
  }
  return -1;
}

template <typename Scalar>
void score(SolverReport<Scalar>& report, const GroundTruth<Scalar>& truth) {
  report.dist_full = fro_dist(report.x_hat, truth.x_star);
  report.dist_rank1 = fro_dist(best_rank_r(report.x_hat, truth.r), truth.x_star);
}

namespace {

using Clock = std::chrono::steady_clock;

Real elapsed_ms(Clock::time_point start) {
  return std::chrono::duration<Real, std::milli>(Clock::now() - start).count();
}

Real rel(Real resid_norm, Real b_norm) { return b_norm > 0.0 ? resid_norm / b_norm : resid_norm; }

template <typename Scalar>
Mat<Scalar> project_psd_raw(const Mat<Scalar>& z, std::optional<Eigen::Index> rank) {
  RealVec values;
  Mat<Scalar> vectors;
  detail::eig_sorted<Scalar>(z, values, vectors);
  values = values.cwiseMax(0.0);
  if (rank && *rank < values.size()) values.tail(values.size() - *rank).setZero();
  return detail::spectral_map<Scalar>(values, vectors);
}

Real lambda_max_of(const RealMat& g) {
  Eigen::SelfAdjointEigenSolver<RealMat> es(g, Eigen::EigenvaluesOnly);
  if (es.info() != Eigen::Success) throw NumericalError("gram eigenvalues did not converge");
  return es.eigenvalues().maxCoeff();
}

/// ||A||^2 = lambda_max(G). When m exceeds the real dimension d of the
/// Hermitian space, uses the d x d operator R^T R instead, R being the
/// m x d realified measurement matrix, which has the same nonzero spectrum.
template <typename Scalar>
Real operator_norm_sq(const SensingMap<Scalar>& map) {
  const Eigen::Index n = map.n();
  const Eigen::Index d = is_complex_v<Scalar> ? 2 * n * n : n * n;
  if (map.m() <= d) return lambda_max_of(map.gram());
  RealMat r(map.m(), d);
  for (Eigen::Index i = 0; i < map.m(); ++i) {
    const Mat<Scalar>& a = map.matrix(i).matrix();
    for (Eigen::Index k = 0; k < n * n; ++k) {
      const Scalar v = a.data()[k];
      r(i, k) = std::real(v);
      if constexpr (is_complex_v<Scalar>) r(i, n * n + k) = std::imag(v);
    }
  }
  return lambda_max_of(r.transpose() * r);
}

/// Counts g increases beyond 1e-12 over the final 80% of the run.
int count_descent_violations(const std::vector<Real>& g_history) {
  int count = 0;
  const auto start = static_cast<std::size_t>(0.2 * static_cast<double>(g_history.size()));
  for (std::size_t k = std::max<std::size_t>(start, 1); k < g_history.size(); ++k) {
    if (g_history[k] > g_history[k - 1] + 1e-12) ++count;
  }
  return count;
}

void note_descent(std::vector<std::string>& notes, int violations) {
  if (violations > 0) {
    notes.push_back("objective increased on " + std::to_string(violations) +
                    " iterations after burn-in");
  }
}

}  // namespace

template <typename Scalar>
AffineProjector<Scalar>::AffineProjector(const SensingMap<Scalar>& map, const RealVec& b)
    : map_(&map), b_(b) {
  if (b.size() != map.m()) {
    throw InvalidArgument("affine projector: b has length " + std::to_string(b.size()) +
                          ", expected " + std::to_string(map.m()));
  }
  const RealMat g = map.gram();
  pinv_ = symmetric_pinv(g, 1e-10);
  lambda_max_ = lambda_max_of(g);
  if (pinv_.rank == 0) throw NumericalError("affine projector: Gram matrix is zero");
}

template <typename Scalar>
Mat<Scalar> AffineProjector<Scalar>::project(const Mat<Scalar>& x) const {
  const RealVec r = map_->apply_raw(x) - b_;
  return x - map_->adjoint_raw(pinv_.pinv * r);
}

template <typename Scalar>
Mat<Scalar> AffineProjector<Scalar>::min_norm_point() const {
  return map_->adjoint_raw(pinv_.pinv * b_);
}

template <typename Scalar>
Real objective_g(const SensingMap<Scalar>& map, const RealVec& b, const Mat<Scalar>& x) {
  return 0.5 * (map.apply_raw(x) - b).squaredNorm();
}

template <typename Scalar>
Mat<Scalar> gradient_g(const SensingMap<Scalar>& map, const RealVec& b, const Mat<Scalar>& x) {
  return map.adjoint_raw(map.apply_raw(x) - b);
}

template <typename Scalar>
SpectralInit<Scalar> spectral_init(const SensingMap<Scalar>& map, const RealVec& b,
                                   std::optional<Eigen::Index> r, const std::string& kind) {
  const Eigen::Index n = map.n();
  const Eigen::Index k = r.value_or(n);
  if (k < 1 || k > n) {
    throw InvalidArgument("spectral_init: rank " + std::to_string(k) + " outside [1, " +
                          std::to_string(n) + "]");
  }
  if (b.size() != map.m()) throw InvalidArgument("spectral_init: b length does not match m");
  SpectralInit<Scalar> out;
  Mat<Scalar> seed_matrix;
  if (kind == "adjoint") {
    Real s = 0.0;
    for (const auto& a : map.matrices()) s += a.matrix().squaredNorm();
    s /= static_cast<Real>(map.m());
    out.scale = s;
    seed_matrix = map.adjoint_raw(b) / s;
  } else if (kind == "pinv") {
    out.scale = 1.0;
    seed_matrix = map.adjoint_raw(symmetric_pinv(map.gram()).pinv * b);
  } else {
    throw InvalidArgument("spectral_init: unknown kind '" + kind + "' (expected pinv|adjoint)");
  }

  RealVec values;
  Mat<Scalar> vectors;
  detail::eig_sorted<Scalar>(seed_matrix, values, vectors);
  values = values.cwiseMax(0.0);
  values.tail(n - k).setZero();
  out.x0 = detail::spectral_map<Scalar>(values, vectors);
  out.u0 = vectors.leftCols(k) * values.head(k).cwiseSqrt().asDiagonal();

  // Step from the Lipschitz constant of U -> A*(A(UU^H) - b) U near X0:
  // 2 ||A||^2 ||X0||_2.
  const Real lmax = operator_norm_sq(map);
  out.eta = 1.0 / (2.0 * lmax * values(0) + std::numeric_limits<Real>::epsilon());
  return out;
}

template <typename Scalar>
SolverReport<Scalar> fgd(const SensingMap<Scalar>& map, const RealVec& b, const SolverConfig& cfg) {
  cfg.validate();
  const auto start = Clock::now();
  SolverReport<Scalar> rep;
  rep.solver = cfg.rank_budget ? "fgd" : "fgd_full";
  const auto init = spectral_init(map, b, cfg.rank_budget, cfg.init);
  Mat<Scalar> u = init.u0;
  const Real eta = cfg.eta.value_or(init.eta);
  const Real bn = b.norm();

  std::vector<Real> g_hist;
  int above = 0;
  Mat<Scalar> x;
  for (int it = 0;; ++it) {
    x = u * u.adjoint();
    const RealVec res = map.apply_raw(x) - b;
    const Real rn = res.norm();
    if (!std::isfinite(rn)) {
      throw DivergenceError("fgd: residual became non-finite at iteration " + std::to_string(it),
                            rep.resid_history);
    }
    rep.resid_history.push_back(rel(rn, bn));
    g_hist.push_back(0.5 * rn * rn);
    rep.iters = it;
    if (rep.resid_history.back() <= cfg.tol_resid) {
      rep.converged = true;
      break;
    }
    above = rep.resid_history.back() > 10.0 * rep.resid_history.front() ? above + 1 : 0;
    if (above >= 50) {
      throw DivergenceError("fgd: residual above 10x its initial value for 50 iterations (eta=" +
                                std::to_string(eta) + ")",
                            rep.resid_history);
    }
    if (it == cfg.max_iters) break;
    u -= eta * (map.adjoint_raw(res) * u);
  }
  rep.x_hat = Hermitian<Scalar>(x);
  rep.objective_value = g_hist.back();
  rep.descent_violations = count_descent_violations(g_hist);
  note_descent(rep.notes, rep.descent_violations);
  rep.wall_ms = elapsed_ms(start);
  return rep;
}

namespace {

template <typename Scalar>
SolverReport<Scalar> gradient_loop(const SensingMap<Scalar>& map, const RealVec& b,
                                   const SolverConfig& cfg, Mat<Scalar> x, bool project,
                                   std::string name) {
  cfg.validate();
  const auto start = Clock::now();
  SolverReport<Scalar> rep;
  rep.solver = std::move(name);
  if (cfg.rank_budget && (*cfg.rank_budget > map.n())) {
    throw InvalidArgument(rep.solver + ": rank_budget exceeds n");
  }
  const Real lipschitz = operator_norm_sq(map);
  const Real eta_safe = 1.0 / lipschitz;
  const Real bn = b.norm();
  const auto step_to = [&](const Mat<Scalar>& z) {
    return project ? project_psd_raw<Scalar>(z, cfg.rank_budget) : z;
  };

  // Fixed eta when configured. Otherwise each step proposes the
  // Barzilai-Borwein length ||s||^2 / ||A s||^2 and halves it until the
  // quadratic majorization ||A d||^2 <= ||d||^2 / eta holds, which makes
  // every step a descent step; eta = 1/||A||^2 always passes.
  Real eta = cfg.eta.value_or(eta_safe);
  RealVec ax = map.apply_raw(x);
  std::vector<Real> g_hist;
  int above = 0;
  for (int it = 0;; ++it) {
    const RealVec res = ax - b;
    const Real rn = res.norm();
    if (!std::isfinite(rn)) {
      throw DivergenceError(rep.solver + ": residual became non-finite", rep.resid_history);
    }
    rep.resid_history.push_back(rel(rn, bn));
    g_hist.push_back(0.5 * rn * rn);
    rep.iters = it;
    if (rep.resid_history.back() <= cfg.tol_resid) {
      rep.converged = true;
      break;
    }
    above = rep.resid_history.back() > 10.0 * rep.resid_history.front() ? above + 1 : 0;
    if (above >= 50) {
      throw DivergenceError(rep.solver + ": residual above 10x its initial value for 50 iterations",
                            rep.resid_history);
    }
    if (it == cfg.max_iters) break;
    const Mat<Scalar> grad = map.adjoint_raw(res);
    Mat<Scalar> next = step_to(x - eta * grad);
    RealVec a_next = map.apply_raw(next);
    if (!cfg.eta) {
      for (;;) {
        const Real dn2 = (next - x).squaredNorm();
        const Real adn2 = (a_next - ax).squaredNorm();
        if (adn2 * eta <= dn2 * (1.0 + 1e-12) || eta <= eta_safe) break;
        eta = std::max(0.5 * eta, eta_safe);
        next = step_to(x - eta * grad);
        a_next = map.apply_raw(next);
      }
      const Real sn2 = (next - x).squaredNorm();
      const Real asn2 = (a_next - ax).squaredNorm();
      eta = asn2 > 0.0 ? std::clamp(sn2 / asn2, eta_safe, 1e6 * eta_safe) : eta_safe;
    }
    x = std::move(next);
    ax = std::move(a_next);
  }
  rep.x_hat = Hermitian<Scalar>(x);
  rep.objective_value = g_hist.back();
  rep.descent_violations = count_descent_violations(g_hist);
  note_descent(rep.notes, rep.descent_violations);
  rep.wall_ms = elapsed_ms(start);
  return rep;
}

}  // namespace

template <typename Scalar>
SolverReport<Scalar> pgd_psd(const SensingMap<Scalar>& map, const RealVec& b,
                             const SolverConfig& cfg, const std::optional<Hermitian<Scalar>>& x0) {
  if (b.size() != map.m()) throw InvalidArgument("pgd_psd: b length does not match m");
  Mat<Scalar> x = x0 ? x0->matrix() : Mat<Scalar>::Zero(map.n(), map.n());
  if (x.rows() != map.n()) throw InvalidArgument("pgd_psd: x0 dimension does not match map");
  return gradient_loop(map, b, cfg, std::move(x), true, "pgd_psd");
}

template <typename Scalar>
SolverReport<Scalar> gd_unconstrained(const SensingMap<Scalar>& map, const RealVec& b,
                                      const SolverConfig& cfg) {
  if (b.size() != map.m()) throw InvalidArgument("gd_unconstrained: b length does not match m");
  return gradient_loop(map, b, cfg, Mat<Scalar>(Mat<Scalar>::Zero(map.n(), map.n())), false,
                       "gd_unconstrained");
}

template <typename Scalar>
SolverReport<Scalar> nuclear_min(const SensingMap<Scalar>& map, const RealVec& b,
                                 const SolverConfig& cfg) {
  cfg.validate();
  const auto start = Clock::now();
  SolverReport<Scalar> rep;
  rep.solver = "nuclear_min";
  const AffineProjector<Scalar> proj(map, b);

  // Douglas-Rachford on f = ||.||_* (+ PSD indicator) and the affine
  // indicator: x = prox_{lambda f}(z), y = P_aff(2x - z), z += y - x.
  Mat<Scalar> z = proj.min_norm_point();
  if (relative_residual(map, b, z) > 1e-6) {
    std::ostringstream os;
    os << "nuclear_min: affine projection failed to reach the constraint set (Gram condition "
       << proj.gram_condition() << ", rank " << proj.gram_rank() << " of " << map.m() << ")";
    throw NumericalError(os.str());
  }
  RealVec values;
  Mat<Scalar> vectors;
  detail::eig_sorted<Scalar>(z, values, vectors);
  const Real scale = std::max(values.cwiseAbs().maxCoeff(), std::numeric_limits<Real>::min());
  Real lambda = cfg.lambda0 * scale;
  const Real lambda_floor = cfg.lambda_min_ratio * lambda;

  Mat<Scalar> x = Mat<Scalar>::Zero(map.n(), map.n());
  for (int it = 0;; ++it) {
    detail::eig_sorted<Scalar>(z, values, vectors);
    if (cfg.psd_constrained) {
      values = (values.array() - lambda).cwiseMax(0.0);
    } else {
      values = values.unaryExpr([lambda](Real v) {
        return v > lambda ? v - lambda : (v < -lambda ? v + lambda : 0.0);
      });
    }
    x = detail::spectral_map<Scalar>(values, vectors);
    const Real r = relative_residual(map, b, x);
    rep.resid_history.push_back(r);
    rep.iters = it;
    const Mat<Scalar> y = proj.project(2.0 * x - z);
    const Real gap = (x - y).norm();
    if (r <= cfg.tol_resid && gap <= cfg.tol_resid * std::max(x.norm(), 1.0)) {
      rep.converged = true;
      break;
    }
    if (it == cfg.max_iters) break;
    z += y - x;
    if ((it + 1) % cfg.stage_iters == 0) lambda = std::max(lambda * cfg.lambda_decay, lambda_floor);
  }
  rep.x_hat = Hermitian<Scalar>(x);
  rep.objective_value = nuclear_norm(rep.x_hat);
  if (!rep.converged) rep.notes.push_back("iteration budget exhausted before convergence");
  rep.wall_ms = elapsed_ms(start);
  return rep;
}

template <typename Scalar>
SolverReport<Scalar> min_fro_norm(const SensingMap<Scalar>& map, const RealVec& b,
                                  const SolverConfig& cfg) {
  cfg.validate();
  const auto start = Clock::now();
  SolverReport<Scalar> rep;
  rep.solver = "min_fro_norm";
  const AffineProjector<Scalar> proj(map, b);
  const Eigen::Index n = map.n();

  // Dykstra from 0: the limit is the projection of 0 onto affine-set ∩ PSD cone.
  Mat<Scalar> x = Mat<Scalar>::Zero(n, n);
  Mat<Scalar> p = Mat<Scalar>::Zero(n, n);
  Mat<Scalar> q = Mat<Scalar>::Zero(n, n);
  for (int it = 0;; ++it) {
    const Mat<Scalar> y = proj.project(x + p);
    p += x - y;
    const Mat<Scalar> xn = project_psd_raw<Scalar>(y + q, std::nullopt);
    q += y - xn;
    x = xn;
    const Real r = relative_residual(map, b, x);
    rep.resid_history.push_back(r);
    rep.iters = it + 1;
    if (r <= cfg.tol_resid && (x - y).norm() <= cfg.tol_resid * std::max(x.norm(), 1.0)) {
      rep.converged = true;
      break;
    }
    if (it + 1 >= cfg.max_iters) break;
  }
  rep.x_hat = Hermitian<Scalar>(x);
  rep.objective_value = x.norm();
  if (!rep.converged) rep.notes.push_back("partial: iteration budget exhausted before convergence");
  rep.wall_ms = elapsed_ms(start);
  return rep;
}

template <typename Scalar>
SolverReport<Scalar> unconstrained_ls(const SensingMap<Scalar>& map, const RealVec& b) {
  const auto start = Clock::now();
  SolverReport<Scalar> rep;
  rep.solver = "unconstrained_ls";
  const AffineProjector<Scalar> proj(map, b);
  rep.x_hat = Hermitian<Scalar>(proj.min_norm_point());
  rep.resid_history.push_back(relative_residual(map, b, rep.x_hat.matrix()));
  rep.iters = 1;
  rep.converged = true;
  rep.objective_value = rep.x_hat.matrix().norm();
  rep.wall_ms = elapsed_ms(start);
  return rep;
}

const std::vector<std::string>& solver_names() {
  static const std::vector<std::string> names = {"fgd",          "fgd_full",
                                                 "pgd_psd",      "nuclear_min",
                                                 "min_fro_norm", "unconstrained_ls",
                                                 "gd_unconstrained"};
  return names;
}

template <typename Scalar>
SolverReport<Scalar> run_solver(const std::string& name, const SensingMap<Scalar>& map,
                                const RealVec& b, SolverConfig cfg, Eigen::Index truth_rank) {
  if (name == "fgd") {
    if (!cfg.rank_budget) cfg.rank_budget = truth_rank;
    return fgd(map, b, cfg);
  }
  if (name == "fgd_full") {
    cfg.rank_budget.reset();
    return fgd(map, b, cfg);
  }
  if (name == "pgd_psd") return pgd_psd(map, b, cfg);
  if (name == "nuclear_min") return nuclear_min(map, b, cfg);
  if (name == "min_fro_norm") return min_fro_norm(map, b, cfg);
  if (name == "unconstrained_ls") return unconstrained_ls(map, b);
  if (name == "gd_unconstrained") return gd_unconstrained(map, b, cfg);
  throw InvalidArgument("unknown solver '" + name + "'");
}

#define PSDSENSE_INSTANTIATE_SOLVERS(S)                                                          \
  template struct SolverReport<S>;                                                               \
  template class AffineProjector<S>;                                                             \
  template void score(SolverReport<S>&, const GroundTruth<S>&);                                  \
  template Real objective_g(const SensingMap<S>&, const RealVec&, const Mat<S>&);                \
  template Mat<S> gradient_g(const SensingMap<S>&, const RealVec&, const Mat<S>&);               \
  template SpectralInit<S> spectral_init(const SensingMap<S>&, const RealVec&,                   \
                                         std::optional<Eigen::Index>, const std::string&);                           \
  template SolverReport<S> fgd(const SensingMap<S>&, const RealVec&, const SolverConfig&);       \
  template SolverReport<S> pgd_psd(const SensingMap<S>&, const RealVec&, const SolverConfig&,    \
                                   const std::optional<Hermitian<S>>&);                          \
  template SolverReport<S> gd_unconstrained(const SensingMap<S>&, const RealVec&,                \
                                            const SolverConfig&);                                \
  template SolverReport<S> nuclear_min(const SensingMap<S>&, const RealVec&,                     \
                                       const SolverConfig&);                                     \
  template SolverReport<S> min_fro_norm(const SensingMap<S>&, const RealVec&,                    \
                                        const SolverConfig&);                                    \
  template SolverReport<S> unconstrained_ls(const SensingMap<S>&, const RealVec&);               \
  template SolverReport<S> run_solver(const std::string&, const SensingMap<S>&, const RealVec&,  \
                                      SolverConfig, Eigen::Index);

PSDSENSE_INSTANTIATE_SOLVERS(Real)
PSDSENSE_INSTANTIATE_SOLVERS(Complex)

}  // namespace psdsense
