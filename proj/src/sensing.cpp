#include "psdsense/sensing.hpp"

#include <cmath>
#include <set>

#include "psdsense/rng.hpp"

namespace psdsense {

const char* to_string(Family f) {
  switch (f) {
    case Family::wishart: return "wishart";
    case Family::rank_one_gaussian: return "rank_one_gaussian";
    case Family::pauli: return "pauli";
    case Family::custom: return "custom";
  }
  return "custom";
}

Family parse_family(const std::string& s) {
  if (s == "wishart") return Family::wishart;
  if (s == "rank_one_gaussian") return Family::rank_one_gaussian;
  if (s == "pauli") return Family::pauli;
  if (s == "custom") return Family::custom;
  throw InvalidArgument("unknown family '" + s + "'");
}

void WishartConfig::validate() const {
  if (n < 1) throw InvalidArgument("wishart: n must be >= 1");
  if (p <= n + 1) {
    throw InvalidArgument("wishart: degrees of freedom p=" + std::to_string(p) +
                          " must exceed n+1=" + std::to_string(n + 1));
  }
  if (!(sigma2 > 0.0)) throw InvalidArgument("wishart: sigma2 must be positive");
}

void PauliConfig::validate() const {
  if (q < 1) throw InvalidArgument("pauli: q must be >= 1");
  if (q > 12) throw InvalidArgument("pauli: q=" + std::to_string(q) + " exceeds the limit of 12");
  if (m < 1) throw InvalidArgument("pauli: m must be >= 1");
}

namespace {

template <typename Scalar>
Scalar draw_scalar(Philox& rng) {
  if constexpr (is_complex_v<Scalar>) {
    const Real re = rng.normal();
    const Real im = rng.normal();
    return Scalar(re, im) / std::sqrt(2.0);
  } else {
    return rng.normal();
  }
}

}  // namespace

template <typename Scalar>
SensingMap<Scalar>::SensingMap(std::vector<Hermitian<Scalar>> matrices, MapProvenance provenance)
    : matrices_(std::move(matrices)), provenance_(provenance) {
  if (matrices_.empty()) throw InvalidArgument("SensingMap: no measurement matrices");
  n_ = matrices_.front().dim();
  const Eigen::Index nn = n_ * n_;
  rows_.resize(static_cast<Eigen::Index>(matrices_.size()), nn);
  for (std::size_t i = 0; i < matrices_.size(); ++i) {
    if (matrices_[i].dim() != n_) {
      throw InvalidArgument("SensingMap: matrix " + std::to_string(i) + " has dimension " +
                            std::to_string(matrices_[i].dim()) + ", expected " +
                            std::to_string(n_));
    }
    rows_.row(static_cast<Eigen::Index>(i)) =
        Eigen::Map<const Vec<Scalar>>(matrices_[i].matrix().data(), nn).conjugate().transpose();
  }
}

template <typename Scalar>
RealVec SensingMap<Scalar>::apply_raw(const Mat<Scalar>& x) const {
  Eigen::Map<const Vec<Scalar>> v(x.data(), x.size());
  return (rows_ * v).real();
}

template <typename Scalar>
Mat<Scalar> SensingMap<Scalar>::adjoint_raw(const RealVec& y) const {
  Vec<Scalar> acc = rows_.adjoint() * y.template cast<Scalar>();
  return Eigen::Map<const Mat<Scalar>>(acc.data(), n_, n_);
}

template <typename Scalar>
RealMat SensingMap<Scalar>::gram() const {
  return (rows_ * rows_.adjoint()).real();
}

template <typename Scalar>
GroundTruth<Scalar> gen_ground_truth(Eigen::Index n, Eigen::Index r, bool normalized,
                                     std::uint64_t seed) {
  if (n < 1 || r < 1 || r > n) {
    throw InvalidArgument("gen_ground_truth: need 1 <= r <= n, got n=" + std::to_string(n) +
                          " r=" + std::to_string(r));
  }
  Philox rng(seed, stream_id(StreamTag::ground_truth, 0));
  Mat<Scalar> g(n, r);
  for (Eigen::Index j = 0; j < r; ++j)
    for (Eigen::Index i = 0; i < n; ++i) g(i, j) = draw_scalar<Scalar>(rng);
  Mat<Scalar> x = g * g.adjoint();
  if (normalized) x /= std::real(x.trace());
  return {Hermitian<Scalar>(x), r, normalized, seed};
}

template <typename Scalar>
SensingMap<Scalar> gen_wishart(const WishartConfig& cfg, Eigen::Index m) {
  cfg.validate();
  if (m < 1) throw InvalidArgument("gen_wishart: m must be >= 1");
  const Real sigma = std::sqrt(cfg.sigma2);
  const Eigen::Index n = cfg.n;
  std::vector<Hermitian<Scalar>> mats;
  mats.reserve(static_cast<std::size_t>(m));
  for (Eigen::Index i = 0; i < m; ++i) {
    Philox rng(cfg.seed, stream_id(StreamTag::sensing, static_cast<std::uint64_t>(i)));
    RealMat a;
    if (cfg.method == WishartMethod::direct) {
      RealMat z(cfg.p, n);
      for (Eigen::Index c = 0; c < n; ++c)
        for (Eigen::Index rr = 0; rr < cfg.p; ++rr) z(rr, c) = sigma * rng.normal();
      a = z.transpose() * z;
    } else {
      // Bartlett: lower-triangular L, L_jj^2 ~ sigma2 chi2_{p-j+1} (1-based j),
      // L_kj ~ N(0, sigma2) below the diagonal; A = L L^T.
      RealMat l = RealMat::Zero(n, n);
      for (Eigen::Index j = 0; j < n; ++j) {
        const Eigen::Index dof = cfg.p - j;
        Real chi2 = 0.0;
        for (Eigen::Index k = 0; k < dof; ++k) {
          const Real g = rng.normal();
          chi2 += g * g;
        }
        l(j, j) = sigma * std::sqrt(chi2);
        for (Eigen::Index k = j + 1; k < n; ++k) l(k, j) = sigma * rng.normal();
      }
      a = l * l.transpose();
    }
    mats.emplace_back(a.template cast<Scalar>());
  }
  MapProvenance prov;
  prov.family = Family::wishart;
  prov.seed = cfg.seed;
  prov.p = cfg.p;
  prov.sigma2 = cfg.sigma2;
  prov.wishart_method = cfg.method;
  return SensingMap<Scalar>(std::move(mats), prov);
}

template <typename Scalar>
SensingMap<Scalar> gen_rank_one_gaussian(Eigen::Index n, Eigen::Index m, std::uint64_t seed) {
  if (n < 1 || m < 1) throw InvalidArgument("gen_rank_one_gaussian: n and m must be >= 1");
  const Real scale = 1.0 / (2.0 * std::sqrt(static_cast<Real>(n)));
  std::vector<Hermitian<Scalar>> mats;
  mats.reserve(static_cast<std::size_t>(m));
  for (Eigen::Index i = 0; i < m; ++i) {
    Philox rng(seed, stream_id(StreamTag::sensing, static_cast<std::uint64_t>(i)));
    RealVec b(n);
    for (Eigen::Index k = 0; k < n; ++k) b(k) = rng.normal();
    mats.emplace_back((scale * b * b.transpose()).template cast<Scalar>());
  }
  MapProvenance prov;
  prov.family = Family::rank_one_gaussian;
  prov.seed = seed;
  SensingMap<Scalar> map(std::move(mats), prov);
  if (m >= n) {
    Mat<Scalar> sum = Mat<Scalar>::Zero(n, n);
    for (const auto& a : map.matrices()) sum += a.matrix();
    if (!(min_eigenvalue(Hermitian<Scalar>(sum)) > 0.0)) {
      map.warnings.push_back("sum of measurement matrices is not positive definite");
    }
  }
  return map;
}

Mat<Complex> pauli_string_matrix(std::uint64_t code, int q) {
  static const Complex i1(0.0, 1.0);
  Mat<Complex> single[4];
  single[0] = Mat<Complex>::Identity(2, 2);
  single[1].resize(2, 2);
  single[1] << 0.0, 1.0, 1.0, 0.0;
  single[2].resize(2, 2);
  single[2] << 0.0, -i1, i1, 0.0;
  single[3].resize(2, 2);
  single[3] << 1.0, 0.0, 0.0, -1.0;

  Mat<Complex> out = Mat<Complex>::Ones(1, 1);
  for (int j = 0; j < q; ++j) {
    const auto digit = (code >> (2 * j)) & 3u;
    const Mat<Complex>& s = single[digit];
    Mat<Complex> next(out.rows() * 2, out.cols() * 2);
    for (Eigen::Index r = 0; r < 2; ++r)
      for (Eigen::Index c = 0; c < 2; ++c)
        next.block(r * out.rows(), c * out.cols(), out.rows(), out.cols()) = s(r, c) * out;
    out = std::move(next);
  }
  return out;
}

std::string pauli_string_label(std::uint64_t code, int q) {
  static const char letters[4] = {'I', 'X', 'Y', 'Z'};
  std::string s;
  for (int j = q - 1; j >= 0; --j) s.push_back(letters[(code >> (2 * j)) & 3u]);
  return s;
}

SensingMap<Complex> gen_pauli(const PauliConfig& cfg) {
  cfg.validate();
  const std::uint64_t dictionary = (std::uint64_t{1} << (2 * cfg.q)) - 1;  // non-identity strings
  const bool with_replacement = static_cast<std::uint64_t>(cfg.m) > dictionary;
  const Eigen::Index n = Eigen::Index{1} << cfg.q;
  std::set<std::uint64_t> used;
  std::vector<Hermitian<Complex>> mats;
  std::vector<std::string> labels;
  mats.reserve(static_cast<std::size_t>(cfg.m));
  for (Eigen::Index i = 0; i < cfg.m; ++i) {
    Philox rng(cfg.seed, stream_id(StreamTag::sensing, static_cast<std::uint64_t>(i)));
    std::uint64_t code = 0;
    int sign = 1;
    do {
      code = 1 + rng.uniform_int(dictionary);
      if (cfg.sign_rule == SignRule::random) sign = (rng.next_u32() & 1u) ? -1 : 1;
    } while (!with_replacement && used.count(code) != 0);
    used.insert(code);
    Mat<Complex> a = Mat<Complex>::Identity(n, n) + Real(sign) * pauli_string_matrix(code, cfg.q);
    mats.emplace_back(a * 0.5);
    labels.push_back((sign > 0 ? "+" : "-") + pauli_string_label(code, cfg.q));
  }
  MapProvenance prov;
  prov.family = Family::pauli;
  prov.seed = cfg.seed;
  prov.q = cfg.q;
  prov.sign_rule = cfg.sign_rule;
  SensingMap<Complex> map(std::move(mats), prov);
  map.labels = std::move(labels);
  if (with_replacement) {
    map.warnings.push_back("m exceeds the " + std::to_string(dictionary) +
                           "-string Pauli dictionary; sampled with replacement");
  }
  return map;
}

template <typename Scalar>
RealVec apply(const SensingMap<Scalar>& map, const Hermitian<Scalar>& x) {
  if (x.dim() != map.n()) {
    throw InvalidArgument("apply: matrix dimension " + std::to_string(x.dim()) +
                          " does not match map dimension " + std::to_string(map.n()));
  }
  RealVec b(map.m());
  const Real xnorm = x.matrix().norm();
  for (Eigen::Index i = 0; i < map.m(); ++i) {
    const auto& a = map.matrix(i).matrix();
    const Scalar t = a.cwiseProduct(x.matrix().conjugate()).sum();
    // Tr(A^H X) = conj(sum A .* conj(X)); only the imaginary part's size matters here.
    if constexpr (is_complex_v<Scalar>) {
      if (std::abs(std::imag(t)) > 1e-9 * a.norm() * xnorm + 1e-300) {
        throw NumericalError("apply: Tr(A_" + std::to_string(i) +
                             "^H X) has imaginary part " + std::to_string(std::imag(t)) +
                             "; inputs are not Hermitian");
      }
    }
    b(i) = std::real(t);
  }
  return b;
}

template <typename Scalar>
Hermitian<Scalar> adjoint(const SensingMap<Scalar>& map, const RealVec& y) {
  if (y.size() != map.m()) {
    throw InvalidArgument("adjoint: vector length " + std::to_string(y.size()) +
                          " does not match m=" + std::to_string(map.m()));
  }
  return Hermitian<Scalar>(map.adjoint_raw(y));
}

template <typename Scalar>
SensingMap<Scalar> regenerate(const MapProvenance& prov, Eigen::Index n, Eigen::Index m) {
  switch (prov.family) {
    case Family::wishart: {
      WishartConfig cfg;
      cfg.n = n;
      cfg.p = prov.p;
      cfg.sigma2 = prov.sigma2;
      cfg.seed = prov.seed;
      cfg.method = prov.wishart_method;
      return gen_wishart<Scalar>(cfg, m);
    }
    case Family::rank_one_gaussian:
      return gen_rank_one_gaussian<Scalar>(n, m, prov.seed);
    case Family::pauli:
      if constexpr (is_complex_v<Scalar>) {
        PauliConfig cfg;
        cfg.q = prov.q;
        cfg.m = m;
        cfg.seed = prov.seed;
        cfg.sign_rule = prov.sign_rule;
        if ((Eigen::Index{1} << cfg.q) != n) {
          throw InvalidArgument("regenerate: pauli map with q=" + std::to_string(cfg.q) +
                                " cannot have n=" + std::to_string(n));
        }
        return gen_pauli(cfg);
      } else {
        throw InvalidArgument("regenerate: pauli maps require the complex field");
      }
    case Family::custom:
      break;
  }
  throw InvalidArgument("regenerate: custom maps carry explicit matrices");
}

SensingMap<Complex> to_complex(const SensingMap<Real>& map) {
  std::vector<Hermitian<Complex>> mats;
  mats.reserve(map.matrices().size());
  for (const auto& a : map.matrices()) mats.emplace_back(a.matrix().cast<Complex>());
  SensingMap<Complex> out(std::move(mats), map.provenance());
  out.labels = map.labels;
  out.warnings = map.warnings;
  return out;
}

#define PSDSENSE_INSTANTIATE_SENSING(S)                                                      \
  template class SensingMap<S>;                                                              \
  template GroundTruth<S> gen_ground_truth<S>(Eigen::Index, Eigen::Index, bool, std::uint64_t); \
  template SensingMap<S> gen_wishart<S>(const WishartConfig&, Eigen::Index);                 \
  template SensingMap<S> gen_rank_one_gaussian<S>(Eigen::Index, Eigen::Index, std::uint64_t); \
  template RealVec apply(const SensingMap<S>&, const Hermitian<S>&);                         \
  template Hermitian<S> adjoint(const SensingMap<S>&, const RealVec&);                       \
  template SensingMap<S> regenerate<S>(const MapProvenance&, Eigen::Index, Eigen::Index);

PSDSENSE_INSTANTIATE_SENSING(Real)
PSDSENSE_INSTANTIATE_SENSING(Complex)

}  // namespace psdsense
