#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "psdsense/core.hpp"

namespace psdsense {

enum class Family { wishart, rank_one_gaussian, pauli, custom };

const char* to_string(Family f);
Family parse_family(const std::string& s);

enum class WishartMethod { direct, bartlett };
enum class SignRule { random, plus };

struct WishartConfig {
  Eigen::Index n = 0;
  Eigen::Index p = 0;  // degrees of freedom, must exceed n + 1
  Real sigma2 = 1.0;
  std::uint64_t seed = 0;
  // bartlett draws L L^T with a chi-square diagonal; same law as direct.
  WishartMethod method = WishartMethod::direct;

  void validate() const;
};

struct PauliConfig {
  int q = 1;  // qubits; n = 2^q
  Eigen::Index m = 1;
  std::uint64_t seed = 0;
  SignRule sign_rule = SignRule::random;

  void validate() const;
};

/// Everything needed to regenerate a map from its seed.
struct MapProvenance {
  Family family = Family::custom;
  std::uint64_t seed = 0;
  Eigen::Index p = 0;
  Real sigma2 = 1.0;
  WishartMethod wishart_method = WishartMethod::direct;
  int q = 0;
  SignRule sign_rule = SignRule::random;
};

/// The linear map X -> (<A_1, X>, ..., <A_m, X>) together with its adjoint.
///
/// The measurement matrices are cached as the rows of an m x n^2 operator
/// (conj(vec A_i)^T), so apply and adjoint are single dense mat-vecs with a
/// fixed summation order.
template <typename Scalar>
class SensingMap {
 public:
  SensingMap() = default;
  SensingMap(std::vector<Hermitian<Scalar>> matrices, MapProvenance provenance = {});

  Eigen::Index n() const { return n_; }
  Eigen::Index m() const { return static_cast<Eigen::Index>(matrices_.size()); }
  static constexpr Field field() { return field_of_v<Scalar>; }
  Family family() const { return provenance_.family; }
  const MapProvenance& provenance() const { return provenance_; }
  const std::vector<Hermitian<Scalar>>& matrices() const { return matrices_; }
  const Hermitian<Scalar>& matrix(Eigen::Index i) const {
    return matrices_[static_cast<std::size_t>(i)];
  }

  /// Labels for Pauli maps ("+XZ", "-IY", ...); empty otherwise.
  std::vector<std::string> labels;
  /// Non-fatal conditions noticed at generation time.
  std::vector<std::string> warnings;

  /// Unchecked kernels for solver loops; x must be Hermitian.
  RealVec apply_raw(const Mat<Scalar>& x) const;
  Mat<Scalar> adjoint_raw(const RealVec& y) const;

  /// Gram matrix G_ij = <A_i, A_j>.
  RealMat gram() const;

 private:
  Eigen::Index n_ = 0;
  std::vector<Hermitian<Scalar>> matrices_;
  MapProvenance provenance_;
  Mat<Scalar> rows_;  // m x n^2, row i = conj(vec(A_i))^T
};

template <typename Scalar>
struct GroundTruth {
  Hermitian<Scalar> x_star;
  Eigen::Index r = 0;
  bool normalized = false;
  std::uint64_t seed = 0;
};

/// X* = G G^H for an n x r Gaussian G, optionally scaled to unit trace.
template <typename Scalar>
GroundTruth<Scalar> gen_ground_truth(Eigen::Index n, Eigen::Index r, bool normalized,
                                     std::uint64_t seed);

/// A_i = Z_i^T Z_i, Z_i a p x n matrix of i.i.d. N(0, sigma2) entries.
template <typename Scalar>
SensingMap<Scalar> gen_wishart(const WishartConfig& cfg, Eigen::Index m);

/// A_i = b b^T / (2 sqrt(n)), b ~ N(0, I_n).
template <typename Scalar>
SensingMap<Scalar> gen_rank_one_gaussian(Eigen::Index n, Eigen::Index m, std::uint64_t seed);

/// A_i = (I +- P_i) / 2 for random non-identity Pauli strings P_i on q qubits.
SensingMap<Complex> gen_pauli(const PauliConfig& cfg);

/// Pauli string matrix for a base-4 code (digit j of q: 0=I, 1=X, 2=Y, 3=Z,
/// most significant digit = first tensor factor).
Mat<Complex> pauli_string_matrix(std::uint64_t code, int q);
std::string pauli_string_label(std::uint64_t code, int q);

/// b_i = Re Tr(A_i^H X). Throws if Tr(A_i^H X) has an imaginary part above
/// 1e-9 ||A_i||_F ||X||_F or on dimension mismatch.
template <typename Scalar>
RealVec apply(const SensingMap<Scalar>& map, const Hermitian<Scalar>& x);

/// sum_i y_i A_i.
template <typename Scalar>
Hermitian<Scalar> adjoint(const SensingMap<Scalar>& map, const RealVec& y);

/// Regenerates a map from its provenance (n and m come from the caller).
template <typename Scalar>
SensingMap<Scalar> regenerate(const MapProvenance& prov, Eigen::Index n, Eigen::Index m);

/// Casts a real map into the complex field.
SensingMap<Complex> to_complex(const SensingMap<Real>& map);

}  // namespace psdsense
