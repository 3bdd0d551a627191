#pragma once

#include <Eigen/Dense>

#include <complex>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <type_traits>

namespace psdsense {

// ---------------------------------------------------------------------------
// Errors
// ---------------------------------------------------------------------------

/// Base for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Bad arguments or configuration (CLI exit code 2).
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

/// A numerical procedure failed (CLI exit code 3).
class NumericalError : public Error {
 public:
  using Error::Error;
};

/// Cholesky hit a nonpositive pivot.
class NotPositiveDefinite : public NumericalError {
 public:
  NotPositiveDefinite(Eigen::Index pivot, double value)
      : NumericalError("cholesky: nonpositive pivot " + std::to_string(value) +
                       " at index " + std::to_string(pivot)),
        pivot_(pivot),
        value_(value) {}
  Eigen::Index pivot() const { return pivot_; }
  double value() const { return value_; }

 private:
  Eigen::Index pivot_;
  double value_;
};

// ---------------------------------------------------------------------------
// Scalar fields
// ---------------------------------------------------------------------------

using Real = double;
using Complex = std::complex<double>;

enum class Field { real, complex };

template <typename Scalar>
inline constexpr bool is_complex_v = !std::is_same_v<Scalar, Real>;

template <typename Scalar>
inline constexpr Field field_of_v = is_complex_v<Scalar> ? Field::complex : Field::real;

const char* to_string(Field f);
Field parse_field(const std::string& s);

template <typename Scalar>
using Mat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using Vec = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
using RealVec = Eigen::VectorXd;
using RealMat = Eigen::MatrixXd;

// ---------------------------------------------------------------------------
// HermitianMatrix
// ---------------------------------------------------------------------------

/// Dense n x n Hermitian (symmetric when Scalar is real) matrix.
///
/// Every constructor symmetrizes its input as (M + M^H) / 2, so the stored
/// entries satisfy entries(i, j) == conj(entries(j, i)) exactly and the
/// diagonal is real. Downstream code relies on this and never rechecks.
template <typename Scalar>
class Hermitian {
 public:
  using MatrixType = Mat<Scalar>;

  Hermitian() = default;

  template <typename Derived>
  explicit Hermitian(const Eigen::MatrixBase<Derived>& m) : m_(m) {
    if (m_.rows() != m_.cols()) {
      throw InvalidArgument("Hermitian: matrix is " + std::to_string(m_.rows()) + "x" +
                            std::to_string(m_.cols()) + ", not square");
    }
    symmetrize();
  }

  static Hermitian zero(Eigen::Index n) { return Hermitian(MatrixType::Zero(n, n)); }
  static Hermitian identity(Eigen::Index n) { return Hermitian(MatrixType::Identity(n, n)); }

  Eigen::Index dim() const { return m_.rows(); }
  const MatrixType& matrix() const { return m_; }
  Scalar operator()(Eigen::Index i, Eigen::Index j) const { return m_(i, j); }

  Real trace() const { return std::real(m_.trace()); }

  friend Hermitian operator+(const Hermitian& a, const Hermitian& b) {
    return Hermitian(a.m_ + b.m_);
  }
  friend Hermitian operator-(const Hermitian& a, const Hermitian& b) {
    return Hermitian(a.m_ - b.m_);
  }
  friend Hermitian operator*(Real s, const Hermitian& a) { return Hermitian(s * a.m_); }

 private:
  void symmetrize() {
    MatrixType adj = m_.adjoint();
    m_ = (m_ + adj) * Real(0.5);
    for (Eigen::Index i = 0; i < m_.rows(); ++i) m_(i, i) = Scalar(std::real(m_(i, i)));
  }

  MatrixType m_;
};

using RealHermitian = Hermitian<Real>;
using ComplexHermitian = Hermitian<Complex>;

// ---------------------------------------------------------------------------
// Kernels
// ---------------------------------------------------------------------------

/// Eigenvalues sorted descending; eigenvector columns orthonormal with the
/// first nonnegligible component of each column real and positive.
template <typename Scalar>
struct EigenDecomposition {
  RealVec eigenvalues;
  Mat<Scalar> eigenvectors;

  Mat<Scalar> reconstruct() const {
    return eigenvectors * eigenvalues.asDiagonal() * eigenvectors.adjoint();
  }
};

/// Real inner product <A, B> = Re Tr(A^H B).
template <typename DerivedA, typename DerivedB>
Real inner(const Eigen::MatrixBase<DerivedA>& a, const Eigen::MatrixBase<DerivedB>& b) {
  return std::real(a.derived().cwiseProduct(b.derived().conjugate()).sum());
}

template <typename Scalar>
Real inner(const Hermitian<Scalar>& a, const Hermitian<Scalar>& b) {
  return inner(a.matrix(), b.matrix());
}

template <typename Scalar>
EigenDecomposition<Scalar> eig_herm(const Hermitian<Scalar>& m);

/// Nearest PSD matrix in Frobenius norm: Q max(Lambda, 0) Q^H.
template <typename Scalar>
Hermitian<Scalar> psd_project(const Hermitian<Scalar>& m);

/// Keeps the r largest eigenvalues clipped at zero, zeroes the rest.
template <typename Scalar>
Hermitian<Scalar> psd_rank_project(const Hermitian<Scalar>& m, Eigen::Index r);

/// Lower-triangular V with V V^H = B and a strictly positive diagonal.
template <typename Scalar>
Mat<Scalar> cholesky(const Hermitian<Scalar>& b);

template <typename Scalar>
Real nuclear_norm(const Hermitian<Scalar>& m);

template <typename Scalar>
Real fro_norm(const Hermitian<Scalar>& m) {
  return m.matrix().norm();
}

template <typename Scalar>
Real fro_dist(const Hermitian<Scalar>& a, const Hermitian<Scalar>& b) {
  return (a.matrix() - b.matrix()).norm();
}

/// Keeps the r eigenvalues of largest magnitude.
template <typename Scalar>
Hermitian<Scalar> best_rank_r(const Hermitian<Scalar>& m, Eigen::Index r);

template <typename Scalar>
Real min_eigenvalue(const Hermitian<Scalar>& m) {
  return eig_herm(m).eigenvalues.minCoeff();
}

template <typename Scalar>
Real max_eigenvalue(const Hermitian<Scalar>& m) {
  return eig_herm(m).eigenvalues.maxCoeff();
}

/// Number of eigenvalues with |lambda| above rel_tol * max |lambda|.
template <typename Scalar>
Eigen::Index numerical_rank(const Hermitian<Scalar>& m, Real rel_tol = 1e-10);

/// Moore-Penrose pseudo-inverse of a symmetric PSD real matrix with the
/// eigenvalue cutoff rel_cutoff * lambda_max. Also reports the condition
/// number of the retained spectrum.
struct PseudoInverse {
  RealMat pinv;
  Eigen::Index rank = 0;
  Real condition = 0.0;
};
PseudoInverse symmetric_pinv(const RealMat& g, Real rel_cutoff = 1e-10);

/// Raw-matrix kernels used inside solver loops, where wrapping each iterate
/// in a Hermitian would only add copies. Inputs must already be Hermitian.
namespace detail {
template <typename Scalar>
void eig_sorted(const Mat<Scalar>& m, RealVec& values, Mat<Scalar>& vectors);

template <typename Scalar>
Mat<Scalar> spectral_map(const RealVec& values, const Mat<Scalar>& vectors);
}  // namespace detail

}  // namespace psdsense
