#include <doctest.h>

#include <filesystem>

#include "psdsense/io.hpp"
#include "psdsense/transform.hpp"
#include "test_util.hpp"

using namespace psdsense;

TEST_CASE("base64 of float64 arrays") {
  CHECK(base64_encode({1.0}) == "AAAAAAAA8D8=");
  CHECK(base64_encode({}).empty());
  const std::vector<double> xs{0.0, -2.5, 1e-300, 3.141592653589793, -0.0};
  const auto back = base64_decode(base64_encode(xs));
  REQUIRE(back.size() == xs.size());
  for (std::size_t i = 0; i < xs.size(); ++i) CHECK(std::memcmp(&back[i], &xs[i], 8) == 0);
  CHECK_THROWS_AS(base64_decode("abc"), InvalidArgument);
  CHECK_THROWS_AS(base64_decode("AAAA"), InvalidArgument);  // 3 bytes is not a float64
}

TEST_CASE_TEMPLATE("matrix encoding round trip", Scalar, Real, Complex) {
  const Mat<Scalar> a = testutil::gaussian<Scalar>(3, 4, 2);
  const Mat<Scalar> b = decode_matrix<Scalar>(encode_matrix<Scalar>(a), 3, 4);
  CHECK(a == b);
  CHECK_THROWS_AS(decode_matrix<Scalar>(encode_matrix<Scalar>(a), 4, 4), InvalidArgument);
}

TEST_CASE("row-major layout with re,im pairs") {
  Mat<Complex> a(1, 2);
  a << Complex(1.0, 2.0), Complex(3.0, 4.0);
  CHECK(base64_decode(encode_matrix<Complex>(a)) == std::vector<double>{1.0, 2.0, 3.0, 4.0});
  Mat<Real> r(2, 2);
  r << 1, 2, 3, 4;
  CHECK(base64_decode(encode_matrix<Real>(r)) == std::vector<double>{1, 2, 3, 4});
}

TEST_CASE("maps regenerate from their recorded seed") {
  WishartConfig cfg;
  cfg.n = 4;
  cfg.p = 7;
  cfg.sigma2 = 0.5;
  cfg.seed = 99;
  const auto map = gen_wishart<Real>(cfg, 9);
  const json j = map_to_json(map);
  CHECK(j["family"] == "wishart");
  CHECK(j["config"]["p"] == 7);
  CHECK_FALSE(j.contains("matrices"));
  const auto back = map_from_json<Real>(json::parse(j.dump()));
  REQUIRE(back.m() == 9);
  for (Eigen::Index i = 0; i < 9; ++i) CHECK(back.matrix(i).matrix() == map.matrix(i).matrix());

  PauliConfig pc{3, 12, 4, SignRule::random};
  const auto pmap = gen_pauli(pc);
  const auto pj = map_to_json(pmap, true);
  CHECK(pj["matrices"].size() == 12);
  const auto pback = map_from_json<Complex>(json::parse(pj.dump()));
  CHECK(pback.labels == pmap.labels);
  for (Eigen::Index i = 0; i < 12; ++i) CHECK(pback.matrix(i).matrix() == pmap.matrix(i).matrix());

  CHECK_THROWS_AS(map_from_json<Real>(pj), InvalidArgument);
}

TEST_CASE("custom maps always carry their matrices") {
  const SensingMap<Real> map({Hermitian<Real>::identity(2)});
  const json j = map_to_json(map);
  CHECK(j.contains("matrices"));
  CHECK(map_from_json<Real>(j).matrix(0).matrix() == Mat<Real>::Identity(2, 2));
}

TEST_CASE("ground truth round trip and regeneration") {
  const auto t = gen_ground_truth<Complex>(5, 2, true, 17);
  json j = truth_to_json(t);
  CHECK(truth_from_json<Complex>(j).x_star.matrix() == t.x_star.matrix());
  j.erase("x_star");
  CHECK(truth_from_json<Complex>(j).x_star.matrix() == t.x_star.matrix());
}

TEST_CASE("whitened and report containers") {
  WishartConfig cfg;
  cfg.n = 3;
  cfg.p = 5;
  cfg.seed = 1;
  const auto map = gen_wishart<Real>(cfg, 6);
  const RealVec b = RealVec::LinSpaced(6, 1.0, 2.0);
  const auto wp = whiten(map, b, find_phi(map));
  const json w = whitened_to_json(wp, 3, true);
  CHECK(w["c"] == wp.c);
  CHECK(w["phi"].size() == 6);
  CHECK(w["matrices"].size() == 6);
  CHECK(decode_matrix<Real>(w["V"].get<std::string>(), 3, 3) == wp.V);

  SolverReport<Real> rep;
  rep.solver = "pgd_psd";
  rep.x_hat = Hermitian<Real>::identity(3);
  rep.resid_history = {1.0, 0.5};
  const json r = report_to_json(rep);
  CHECK(r["final_residual"] == 0.5);
  CHECK(r.contains("x_hat"));
  CHECK_FALSE(report_to_json(rep, false).contains("x_hat"));
  CHECK(resid_csv(rep.resid_history) == "iter,residual\n0,1\n1,0.5\n");
  CHECK(ratios_csv({2.0}) == "k,ratio\n0,2\n");
}

TEST_CASE("FNV-1a and file helpers") {
  CHECK(fnv1a64("") == 0xcbf29ce484222325ull);
  CHECK(fnv1a64("a") == 0xaf63dc4c8601ec8cull);
  CHECK(hex64(0xabcull) == "0000000000000abc");

  const auto dir = std::filesystem::temp_directory_path() / "psdsense_io_test" / "nested";
  std::filesystem::remove_all(dir.parent_path());
  write_text(dir / "x.txt", "hello\n");
  CHECK(read_text(dir / "x.txt") == "hello\n");
  CHECK_THROWS_AS(read_text(dir / "missing.txt"), InvalidArgument);
  std::filesystem::remove_all(dir.parent_path());
}
