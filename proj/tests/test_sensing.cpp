#include <doctest.h>

#include <cstring>
#include <set>

#include "psdsense/rng.hpp"
#include "psdsense/sensing.hpp"
#include "test_util.hpp"

using namespace psdsense;

TEST_CASE("Philox4x32-10 known answers") {
  using B = std::array<std::uint32_t, 4>;
  CHECK(Philox::block({0, 0, 0, 0}, {0, 0}) == B{0x6627e8d5, 0xe169c58d, 0xbc57ac4c, 0x9b00dbd8});
  CHECK(Philox::block({0xffffffff, 0xffffffff, 0xffffffff, 0xffffffff}, {0xffffffff, 0xffffffff}) ==
        B{0x408f276d, 0x41c83b0e, 0xa20bc7c6, 0x6d5451fd});
  CHECK(Philox::block({0x243f6a88, 0x85a308d3, 0x13198a2e, 0x03707344}, {0xa4093822, 0x299f31d0}) ==
        B{0xd16cfe09, 0x94fdcceb, 0x5001e420, 0x24126ea1});
}

TEST_CASE("Philox streams are reproducible and distinct") {
  Philox a(5, 1), b(5, 1), c(5, 2), d(6, 1);
  std::vector<std::uint32_t> xa, xb, xc, xd;
  for (int i = 0; i < 16; ++i) {
    xa.push_back(a.next_u32());
    xb.push_back(b.next_u32());
    xc.push_back(c.next_u32());
    xd.push_back(d.next_u32());
  }
  CHECK(xa == xb);
  CHECK(xa != xc);
  CHECK(xa != xd);
  CHECK(derive_seed(1, 2) == derive_seed(1, 2));
  CHECK(derive_seed(1, 2) != derive_seed(1, 3));
  CHECK(derive_seed(1, 2) != derive_seed(2, 2));
}

TEST_CASE("Philox normals have unit variance") {
  Philox g(42, 0);
  double s = 0, s2 = 0;
  const int n = 200000;
  for (int i = 0; i < n; ++i) {
    const double x = g.normal();
    s += x;
    s2 += x * x;
  }
  CHECK(std::abs(s / n) < 0.01);
  CHECK(std::abs(s2 / n - 1.0) < 0.01);
  for (int i = 0; i < 1000; ++i) {
    const double u = g.uniform();
    CHECK((u > 0.0 && u < 1.0));
  }
}

TEST_CASE("gen_ground_truth") {
  const auto t = gen_ground_truth<Real>(2, 2, true, 1);
  CHECK(std::abs(t.x_star.trace() - 1.0) <= 1e-12);
  CHECK(eig_herm(t.x_star).eigenvalues.minCoeff() > 0);

  const auto s = gen_ground_truth<Real>(15, 1, false, 3);
  const RealVec ev = eig_herm(s.x_star).eigenvalues;
  CHECK((ev.array() > 1e-12 * ev(0)).count() == 1);
  CHECK(std::abs(ev.sum() - s.x_star.trace()) <= 1e-10 * (1 + s.x_star.trace()));

  const auto c = gen_ground_truth<Complex>(8, 3, true, 4);
  const RealVec evc = eig_herm(c.x_star).eigenvalues;
  CHECK((evc.array() > 1e-12 * evc(0)).count() == 3);
  CHECK(evc.minCoeff() > -1e-12);
  CHECK(c.x_star.matrix().imag().norm() > 0.0);

  const auto again = gen_ground_truth<Complex>(8, 3, true, 4);
  CHECK(again.x_star.matrix() == c.x_star.matrix());
}

TEST_CASE("gen_wishart: definiteness and moments") {
  WishartConfig cfg{4, 8, 1.0, 11, WishartMethod::direct};
  const auto map = gen_wishart<Real>(cfg, 2000);
  RealMat mean = RealMat::Zero(4, 4);
  double tr = 0;
  for (const auto& a : map.matrices()) {
    CHECK(min_eigenvalue(a) > 0);
    mean += a.matrix();
    tr += a.trace();
  }
  mean /= 2000.0;
  tr /= 2000.0;
  // E[A] = p sigma^2 I.
  for (int i = 0; i < 4; ++i) CHECK(std::abs(mean(i, i) - 8.0) < 0.05 * 8.0);
  CHECK((mean - 8.0 * RealMat::Identity(4, 4)).cwiseAbs().maxCoeff() < 0.05 * 8.0);
  CHECK(std::abs(tr - 32.0) < 0.03 * 32.0);
  CHECK(map.family() == Family::wishart);
}

TEST_CASE("gen_wishart: Bartlett sampling matches the direct moments") {
  WishartConfig cfg{4, 8, 2.0, 12, WishartMethod::bartlett};
  const auto map = gen_wishart<Real>(cfg, 2000);
  double tr = 0;
  RealMat mean = RealMat::Zero(4, 4);
  for (const auto& a : map.matrices()) {
    tr += a.trace();
    mean += a.matrix();
  }
  mean /= 2000.0;
  CHECK(std::abs(tr / 2000.0 - 64.0) < 0.03 * 64.0);
  CHECK((mean - 16.0 * RealMat::Identity(4, 4)).cwiseAbs().maxCoeff() < 0.05 * 16.0);
}

TEST_CASE("gen_wishart rejects p <= n + 1") {
  WishartConfig cfg{4, 5, 1.0, 0, WishartMethod::direct};
  CHECK_THROWS_AS(gen_wishart<Real>(cfg, 3), InvalidArgument);
  cfg.p = 6;
  CHECK_NOTHROW(gen_wishart<Real>(cfg, 3));
  cfg.sigma2 = 0;
  CHECK_THROWS_AS(gen_wishart<Real>(cfg, 3), InvalidArgument);
}

TEST_CASE("gen_rank_one_gaussian") {
  const Eigen::Index n = 16;
  const auto map = gen_rank_one_gaussian<Real>(n, 2000, 9);
  double tr = 0;
  for (const auto& a : map.matrices()) {
    CHECK(numerical_rank(a) == 1);
    CHECK(min_eigenvalue(a) >= -1e-12 * max_eigenvalue(a));
    tr += a.trace();
  }
  // Tr(b b^T) / (2 sqrt n) = ||b||^2 / (2 sqrt n), whose mean is sqrt(n) / 2.
  CHECK(std::abs(tr / 2000.0 - 2.0) < 0.05 * 2.0);

  // Explicit scaling: A = b b^T / (2 sqrt n) means A / Tr(A) = b b^T / ||b||^2.
  const auto& a0 = map.matrix(0).matrix();
  const RealVec b = eig_herm(map.matrix(0)).eigenvectors.col(0) * std::sqrt(a0.trace() * 2.0 * 4.0);
  CHECK((b * b.transpose() / (2.0 * 4.0) - a0).norm() < 1e-10 * a0.norm());
}

TEST_CASE("rank-one Gaussian sums are positive definite for m >= n") {
  const auto map = gen_rank_one_gaussian<Real>(8, 32, 5);
  CHECK(min_eigenvalue(adjoint(map, RealVec::Ones(32))) > 0);
  CHECK(map.warnings.empty());
  const auto few = gen_rank_one_gaussian<Real>(8, 4, 5);
  CHECK(few.warnings.empty());  // only checked once m >= n
}

TEST_CASE("Pauli strings and projectors") {
  // Code digits: 0 = I, 1 = X, 2 = Y, 3 = Z.
  const Mat<Complex> z = pauli_string_matrix(3, 1);
  const Mat<Complex> x = pauli_string_matrix(1, 1);
  const Mat<Complex> id = Mat<Complex>::Identity(2, 2);
  Mat<Complex> pz = (id + z) / 2.0;
  Mat<Complex> px = (id + x) / 2.0;
  Mat<Complex> e1(2, 2), e2(2, 2);
  e1 << 1, 0, 0, 0;
  e2 << 0.5, 0.5, 0.5, 0.5;
  CHECK((pz - e1).norm() < 1e-15);
  CHECK((px - e2).norm() < 1e-15);
  CHECK(pauli_string_label(0b0110, 2) == "XY");

  // X (x) Z has first tensor factor X.
  const Mat<Complex> xz = pauli_string_matrix(1 * 4 + 3, 2);
  Mat<Complex> kron(4, 4);
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j) kron.block(2 * i, 2 * j, 2, 2) = x(i, j) * z;
  CHECK((xz - kron).norm() < 1e-15);
}

TEST_CASE("gen_pauli maps") {
  PauliConfig cfg{2, 10, 3, SignRule::random};
  const auto map = gen_pauli(cfg);
  CHECK(map.n() == 4);
  std::set<std::string> strings;
  for (Eigen::Index i = 0; i < map.m(); ++i) {
    const auto& a = map.matrix(i).matrix();
    CHECK(std::abs(map.matrix(i).trace() - 2.0) < 1e-12);
    CHECK((a * a - a).norm() <= 1e-10);
    strings.insert(map.labels[i].substr(1));
    CHECK(map.labels[i].substr(1) != "II");
  }
  CHECK(strings.size() == 10);

  cfg.sign_rule = SignRule::plus;
  for (const auto& l : gen_pauli(cfg).labels) CHECK(l[0] == '+');

  PauliConfig over{1, 5, 1, SignRule::random};  // only 3 non-identity strings
  const auto dup = gen_pauli(over);
  CHECK(dup.m() == 5);
  CHECK(!dup.warnings.empty());

  PauliConfig big{13, 1, 0, SignRule::random};
  CHECK_THROWS_AS(gen_pauli(big), InvalidArgument);
}

TEST_CASE("apply") {
  std::vector<Hermitian<Real>> mats = {Hermitian<Real>::identity(3)};
  const SensingMap<Real> map(mats);
  const auto x = testutil::random_hermitian<Real>(3, 2);
  CHECK(psdsense::apply(map, x)(0) == doctest::Approx(x.trace()));
  CHECK(psdsense::apply(map, Hermitian<Real>::zero(3))(0) == 0.0);
  CHECK_THROWS_AS(psdsense::apply(map, Hermitian<Real>::identity(4)), InvalidArgument);

  PauliConfig cfg{3, 20, 1, SignRule::random};
  const auto pm = gen_pauli(cfg);
  const auto a = testutil::random_hermitian<Complex>(8, 5);
  const auto b = testutil::random_hermitian<Complex>(8, 6);
  const RealVec lhs = psdsense::apply(pm, a + b);
  const RealVec rhs = psdsense::apply(pm, a) + psdsense::apply(pm, b);
  CHECK((lhs - rhs).norm() <= 1e-10 * (1 + lhs.norm()));
}

TEST_CASE("adjoint") {
  WishartConfig cfg{8, 10, 1.0, 5, WishartMethod::direct};
  const auto map = gen_wishart<Real>(cfg, 20);
  RealVec e1 = RealVec::Zero(20);
  e1(0) = 1;
  CHECK(adjoint(map, e1).matrix() == map.matrix(0).matrix());
  CHECK(adjoint(map, RealVec::Zero(20)).matrix().norm() == 0.0);
  CHECK_THROWS_AS(adjoint(map, RealVec::Zero(19)), InvalidArgument);

  for (std::uint64_t s = 0; s < 5; ++s) {
    const auto x = testutil::random_hermitian<Real>(8, 50 + s);
    const RealVec y = testutil::gaussian<Real>(20, 1, 60 + s);
    const Real lhs = psdsense::apply(map, x).dot(y);
    const Real rhs = inner(x, adjoint(map, y));
    CHECK(std::abs(lhs - rhs) <= 1e-10 * (1 + std::abs(lhs)));
  }

  PauliConfig pc{3, 30, 2, SignRule::random};
  const auto pm = gen_pauli(pc);
  const auto x = testutil::random_hermitian<Complex>(8, 70);
  const RealVec y = testutil::gaussian<Real>(30, 1, 71);
  CHECK(std::abs(psdsense::apply(pm, x).dot(y) - inner(x, adjoint(pm, y))) <= 1e-10 * (1 + y.norm()));
}

TEST_CASE("generation is reproducible and regenerable") {
  WishartConfig cfg{5, 8, 1.5, 77, WishartMethod::direct};
  const auto a = gen_wishart<Real>(cfg, 12);
  const auto b = gen_wishart<Real>(cfg, 12);
  const auto x = gen_ground_truth<Real>(5, 1, false, 3);
  const RealVec ba = psdsense::apply(a, x.x_star);
  const RealVec bb = psdsense::apply(b, x.x_star);
  CHECK(std::memcmp(ba.data(), bb.data(), sizeof(double) * 12) == 0);

  const auto r = regenerate<Real>(a.provenance(), 5, 12);
  for (Eigen::Index i = 0; i < 12; ++i) CHECK(r.matrix(i).matrix() == a.matrix(i).matrix());

  // A_i depends only on (seed, i): a longer map shares its prefix.
  const auto longer = gen_wishart<Real>(cfg, 20);
  for (Eigen::Index i = 0; i < 12; ++i) CHECK(longer.matrix(i).matrix() == a.matrix(i).matrix());

  PauliConfig pc{3, 16, 9, SignRule::random};
  const auto p1 = gen_pauli(pc);
  const auto p2 = regenerate<Complex>(p1.provenance(), 8, 16);
  CHECK(p1.labels == p2.labels);
}

TEST_CASE("wishart sums are positive definite") {
  WishartConfig cfg{6, 9, 1.0, 8, WishartMethod::direct};
  const auto map = gen_wishart<Real>(cfg, 15);
  CHECK(min_eigenvalue(adjoint(map, RealVec::Ones(15))) > 0);
}
