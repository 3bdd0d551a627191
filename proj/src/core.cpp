#include "psdsense/core.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <vector>

namespace psdsense {

const char* to_string(Field f) { return f == Field::real ? "real" : "complex"; }

Field parse_field(const std::string& s) {
  if (s == "real") return Field::real;
  if (s == "complex") return Field::complex;
  throw InvalidArgument("unknown field '" + s + "' (expected real|complex)");
}

namespace detail {

template <typename Scalar>
void eig_sorted(const Mat<Scalar>& m, RealVec& values, Mat<Scalar>& vectors) {
  const Eigen::Index n = m.rows();
  Eigen::SelfAdjointEigenSolver<Mat<Scalar>> solver(m);
  if (solver.info() != Eigen::Success) {
    std::ostringstream os;
    os << "eig_herm: no convergence for " << n << "x" << n << " matrix with Frobenius norm "
       << m.norm() << (m.allFinite() ? "" : " (contains non-finite entries)");
    throw NumericalError(os.str());
  }
  // Eigen returns ascending order; flip to descending.
  values = solver.eigenvalues().reverse();
  vectors = solver.eigenvectors().rowwise().reverse();
  for (Eigen::Index j = 0; j < n; ++j) {
    auto col = vectors.col(j);
    const Real cutoff = 1e-12 * col.cwiseAbs().maxCoeff();
    for (Eigen::Index k = 0; k < n; ++k) {
      const Real mag = std::abs(col(k));
      if (mag > cutoff) {
        if constexpr (is_complex_v<Scalar>) {
          col *= std::conj(col(k)) / mag;
        } else if (col(k) < 0) {
          col = -col;
        }
        break;
      }
    }
  }
}

template <typename Scalar>
Mat<Scalar> spectral_map(const RealVec& values, const Mat<Scalar>& vectors) {
  Mat<Scalar> out = vectors * values.asDiagonal() * vectors.adjoint();
  Mat<Scalar> adj = out.adjoint();
  out = (out + adj) * Real(0.5);
  return out;
}

template void eig_sorted(const Mat<Real>&, RealVec&, Mat<Real>&);
template void eig_sorted(const Mat<Complex>&, RealVec&, Mat<Complex>&);
template Mat<Real> spectral_map(const RealVec&, const Mat<Real>&);
template Mat<Complex> spectral_map(const RealVec&, const Mat<Complex>&);

}  // namespace detail

template <typename Scalar>
EigenDecomposition<Scalar> eig_herm(const Hermitian<Scalar>& m) {
  EigenDecomposition<Scalar> out;
  detail::eig_sorted(m.matrix(), out.eigenvalues, out.eigenvectors);
  return out;
}

template <typename Scalar>
Hermitian<Scalar> psd_project(const Hermitian<Scalar>& m) {
  auto ed = eig_herm(m);
  return Hermitian<Scalar>(
      detail::spectral_map<Scalar>(ed.eigenvalues.cwiseMax(0.0), ed.eigenvectors));
}

template <typename Scalar>
Hermitian<Scalar> psd_rank_project(const Hermitian<Scalar>& m, Eigen::Index r) {
  if (r < 1 || r > m.dim()) {
    throw InvalidArgument("psd_rank_project: rank " + std::to_string(r) + " outside [1, " +
                          std::to_string(m.dim()) + "]");
  }
  auto ed = eig_herm(m);
  RealVec kept = ed.eigenvalues.cwiseMax(0.0);
  kept.tail(m.dim() - r).setZero();
  return Hermitian<Scalar>(detail::spectral_map<Scalar>(kept, ed.eigenvectors));
}

template <typename Scalar>
Mat<Scalar> cholesky(const Hermitian<Scalar>& b) {
  const Eigen::Index n = b.dim();
  const auto& a = b.matrix();
  Mat<Scalar> v = Mat<Scalar>::Zero(n, n);
  for (Eigen::Index j = 0; j < n; ++j) {
    Real d = std::real(a(j, j));
    for (Eigen::Index k = 0; k < j; ++k) d -= std::norm(v(j, k));
    if (!(d > 0.0)) throw NotPositiveDefinite(j, d);
    const Real djj = std::sqrt(d);
    v(j, j) = Scalar(djj);
    for (Eigen::Index i = j + 1; i < n; ++i) {
      Scalar s = a(i, j);
      for (Eigen::Index k = 0; k < j; ++k) s -= v(i, k) * Eigen::numext::conj(v(j, k));
      v(i, j) = s / djj;
    }
  }
  return v;
}

template <typename Scalar>
Real nuclear_norm(const Hermitian<Scalar>& m) {
  return eig_herm(m).eigenvalues.cwiseAbs().sum();
}

template <typename Scalar>
Hermitian<Scalar> best_rank_r(const Hermitian<Scalar>& m, Eigen::Index r) {
  if (r < 1 || r > m.dim()) {
    throw InvalidArgument("best_rank_r: rank " + std::to_string(r) + " outside [1, " +
                          std::to_string(m.dim()) + "]");
  }
  auto ed = eig_herm(m);
  const Eigen::Index n = m.dim();
  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) order[static_cast<std::size_t>(i)] = i;
  std::stable_sort(order.begin(), order.end(), [&](Eigen::Index x, Eigen::Index y) {
    return std::abs(ed.eigenvalues(x)) > std::abs(ed.eigenvalues(y));
  });
  RealVec kept = RealVec::Zero(n);
  for (Eigen::Index k = 0; k < r; ++k) {
    const auto idx = order[static_cast<std::size_t>(k)];
    kept(idx) = ed.eigenvalues(idx);
  }
  return Hermitian<Scalar>(detail::spectral_map<Scalar>(kept, ed.eigenvectors));
}

template <typename Scalar>
Eigen::Index numerical_rank(const Hermitian<Scalar>& m, Real rel_tol) {
  const RealVec ev = eig_herm(m).eigenvalues;
  const Real top = ev.cwiseAbs().maxCoeff();
  if (top == 0.0) return 0;
  return (ev.array().abs() > rel_tol * top).count();
}

PseudoInverse symmetric_pinv(const RealMat& g, Real rel_cutoff) {
  RealVec values;
  RealMat vectors;
  detail::eig_sorted<Real>(g, values, vectors);
  PseudoInverse out;
  const Real top = values.size() > 0 ? values(0) : 0.0;
  RealVec inv = RealVec::Zero(values.size());
  Real smallest_kept = top;
  if (top > 0.0) {
    for (Eigen::Index i = 0; i < values.size(); ++i) {
      if (values(i) > rel_cutoff * top) {
        inv(i) = 1.0 / values(i);
        smallest_kept = values(i);
        ++out.rank;
      }
    }
  }
  out.pinv = vectors * inv.asDiagonal() * vectors.transpose();
  out.condition = out.rank > 0 ? top / smallest_kept : 0.0;
  return out;
}

#define PSDSENSE_INSTANTIATE_CORE(S)                                        \
  template EigenDecomposition<S> eig_herm(const Hermitian<S>&);             \
  template Hermitian<S> psd_project(const Hermitian<S>&);                   \
  template Hermitian<S> psd_rank_project(const Hermitian<S>&, Eigen::Index); \
  template Mat<S> cholesky(const Hermitian<S>&);                            \
  template Real nuclear_norm(const Hermitian<S>&);                          \
  template Hermitian<S> best_rank_r(const Hermitian<S>&, Eigen::Index);     \
  template Eigen::Index numerical_rank(const Hermitian<S>&, Real);

PSDSENSE_INSTANTIATE_CORE(Real)
PSDSENSE_INSTANTIATE_CORE(Complex)

}  // namespace psdsense
