#include <doctest.h>

#include "psdsense/solvers.hpp"
#include "psdsense/transform.hpp"
#include "test_util.hpp"

using namespace psdsense;
using testutil::random_hermitian;
using testutil::random_psd;

namespace {

SensingMap<Real> wishart_map(Eigen::Index n, Eigen::Index m, std::uint64_t seed) {
  WishartConfig cfg;
  cfg.n = n;
  cfg.p = n + 2;
  cfg.seed = seed;
  return gen_wishart<Real>(cfg, m);
}

// Signs of eigenvalues at a relative threshold.
std::array<int, 3> inertia(const RealVec& ev, Real tol) {
  std::array<int, 3> out{0, 0, 0};
  const Real scale = ev.cwiseAbs().maxCoeff();
  for (Eigen::Index i = 0; i < ev.size(); ++i) {
    if (ev(i) > tol * scale) ++out[0];
    else if (ev(i) < -tol * scale) ++out[1];
    else ++out[2];
  }
  return out;
}

}  // namespace

TEST_CASE("find_phi accepts all-ones for PSD families") {
  const auto w = wishart_map(5, 12, 1);
  CHECK(find_phi(w) == RealVec::Ones(12));

  const auto g = gen_rank_one_gaussian<Real>(8, 32, 5);
  const RealVec phi = find_phi(g);
  CHECK(phi == RealVec::Ones(32));
  CHECK(min_eigenvalue(adjoint(g, phi)) > 0.0);
}

TEST_CASE("find_phi rejects a singular span") {
  Mat<Real> a(2, 2), z = Mat<Real>::Zero(2, 2);
  a << 1, 0, 0, 0;
  const SensingMap<Real> map({Hermitian<Real>(a), Hermitian<Real>(z)});
  CHECK_THROWS_AS(find_phi(map), NumericalError);
}

TEST_CASE("find_phi falls back to a search for indefinite maps") {
  // A_1 = diag(1, -1) and A_2 = diag(-1, 3): all-ones gives diag(0, 2),
  // but phi = (2, 1) gives diag(1, 1).
  Mat<Real> a1(2, 2), a2(2, 2);
  a1 << 1, 0, 0, -1;
  a2 << -1, 0, 0, 3;
  const SensingMap<Real> map({Hermitian<Real>(a1), Hermitian<Real>(a2)});
  const RealVec phi = find_phi(map);
  CHECK(min_eigenvalue(adjoint(map, phi)) > 0.0);
}

TEST_CASE("whiten with a single identity measurement") {
  const SensingMap<Real> map({Hermitian<Real>::identity(3)});
  RealVec b(1);
  b << 2.5;
  const auto wp = whiten(map, b, RealVec::Ones(1));
  CHECK((wp.V - Mat<Real>::Identity(3, 3)).norm() < 1e-15);
  CHECK((wp.M[0].matrix() - Mat<Real>::Identity(3, 3)).norm() < 1e-15);
  CHECK(wp.c == 2.5);
  const auto x = random_hermitian<Real>(3, 4);
  CHECK(fro_dist(to_Y(wp, x), x) < 1e-14);
  CHECK(fro_dist(from_Y(wp, x), x) < 1e-14);
}

TEST_CASE_TEMPLATE("whitening identities", Scalar, Real, Complex) {
  const auto rmap = wishart_map(6, 20, 3);
  SensingMap<Scalar> map;
  if constexpr (is_complex_v<Scalar>) map = to_complex(rmap);
  else map = rmap;

  const auto truth = gen_ground_truth<Scalar>(6, 2, false, 9);
  const RealVec b = psdsense::apply(map, truth.x_star);
  const RealVec phi = find_phi(map);
  const auto wp = whiten(map, b, phi);

  const Real bnorm = wp.B.matrix().norm();
  CHECK((wp.B.matrix() - adjoint(map, phi).matrix()).norm() <= 1e-10 * bnorm);
  CHECK((wp.V * wp.V.adjoint() - wp.B.matrix()).norm() <= 1e-10 * bnorm);
  CHECK(wp.V.isLowerTriangular());
  CHECK(min_eigenvalue(wp.B) > 0.0);
  CHECK(wp.c == phi.dot(b));

  Mat<Scalar> sum = Mat<Scalar>::Zero(6, 6);
  for (Eigen::Index i = 0; i < map.m(); ++i) sum += phi(i) * wp.M[static_cast<std::size_t>(i)].matrix();
  CHECK((sum - Mat<Scalar>::Identity(6, 6)).norm() <= 1e-8);

  // Change of variables: M(V^H X* V) = b.
  const auto wmap = wp.whitened_map();
  const RealVec bw = psdsense::apply(wmap, to_Y(wp, truth.x_star));
  CHECK((bw - b).norm() <= 1e-8 * (1.0 + b.norm()));

  // Round trip on a PSD point.
  const auto x = random_psd<Scalar>(6, 6, 17);
  CHECK(fro_dist(from_Y(wp, to_Y(wp, x)), x) <= 1e-10 * fro_norm(x));
}

TEST_CASE("congruence preserves inertia and rank") {
  const auto map = wishart_map(6, 20, 4);
  const auto wp = whiten(map, RealVec::Zero(20), find_phi(map));
  for (std::uint64_t seed : {21u, 22u, 23u}) {
    const auto x = random_hermitian<Real>(6, seed);
    const auto y = to_Y(wp, x);
    CHECK(inertia(eig_herm(x).eigenvalues, 1e-10) == inertia(eig_herm(y).eigenvalues, 1e-10));
  }
  const auto low = random_psd<Real>(6, 2, 30);
  CHECK(numerical_rank(to_Y(wp, low)) == 2);
  CHECK(is_psd(to_Y(wp, low)));
}

TEST_CASE("trace invariance over feasible PSD points") {
  // m = 12 < n(n+1)/2 = 21, so the affine set has a nontrivial null space.
  const Eigen::Index n = 6, m = 12;
  const auto map = wishart_map(n, m, 8);
  const auto truth = gen_ground_truth<Real>(n, n, false, 2);  // full rank, interior of the cone
  const RealVec b = psdsense::apply(map, truth.x_star);
  const auto wp = whiten(map, b, find_phi(map));

  const auto at_truth = verify_trace_invariance(wp, map, truth.x_star);
  CHECK(at_truth.pass());
  CHECK(at_truth.psd);
  CHECK(at_truth.deviation <= 1e-6 * (1.0 + std::abs(wp.c)));

  // Null-space perturbations: N = H - A*(G^+ A(H)) so that A(N) = 0.
  const AffineProjector<Real> null_proj(map, RealVec::Zero(m));
  const Real lmin = min_eigenvalue(truth.x_star);
  int checked = 0;
  for (std::uint64_t seed = 40; seed < 50; ++seed) {
    const Mat<Real> h = random_hermitian<Real>(n, seed).matrix();
    Mat<Real> nmat = null_proj.project(h);
    REQUIRE(psdsense::apply(map, Hermitian<Real>(nmat)).norm() < 1e-8 * nmat.norm());
    nmat *= 0.5 * lmin / nmat.norm();
    const Hermitian<Real> x(truth.x_star.matrix() + nmat);
    if (!is_psd(x)) continue;
    ++checked;
    const auto rep = verify_trace_invariance(wp, map, x);
    CHECK(rep.pass());
    CHECK(fro_dist(x, truth.x_star) > 1e-3);
  }
  CHECK(checked == 10);

  const auto doubled = verify_trace_invariance(wp, map, 2.0 * truth.x_star);
  CHECK(doubled.status == TraceStatus::infeasible);
  CHECK(doubled.residual == doctest::Approx(1.0).epsilon(1e-9));
  CHECK_FALSE(doubled.pass());
}

TEST_CASE("whiten validates lengths") {
  const auto map = wishart_map(4, 8, 1);
  CHECK_THROWS_AS(whiten(map, RealVec::Zero(7), RealVec::Ones(8)), InvalidArgument);
  CHECK_THROWS_AS(whiten(map, RealVec::Zero(8), RealVec::Ones(3)), InvalidArgument);
}
