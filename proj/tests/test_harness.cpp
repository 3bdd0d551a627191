#include <doctest.h>

#include <atomic>
#include <filesystem>

#include "psdsense/harness.hpp"

using namespace psdsense;

namespace {

ExperimentSpec small_fig1() {
  ExperimentSpec s = default_spec("fig1");
  s.n = 6;
  s.m_sweep = {8, 30};
  s.trials = 2;
  s.seed = 3;
  return s;
}

}  // namespace

TEST_CASE("default specs validate") {
  for (const auto& name : experiment_names()) {
    const auto s = default_spec(name);
    CHECK_NOTHROW(s.validate());
    CHECK(s.name == name);
  }
  CHECK(default_spec("table1").grid.size() == 2);
  CHECK(default_spec("table1", true).grid.size() == 4);
  CHECK(default_spec("fig1").m_sweep.front() == 10);
  CHECK_THROWS_AS(default_spec("table9"), InvalidArgument);
}

TEST_CASE("spec validation") {
  auto s = small_fig1();
  s.trials = 0;
  CHECK_THROWS_AS(s.validate(), InvalidArgument);
  s = small_fig1();
  s.solvers = {"cvx"};
  CHECK_THROWS_AS(s.validate(), InvalidArgument);
  s = small_fig1();
  s.r = 7;
  CHECK_THROWS_AS(s.validate(), InvalidArgument);
  s = small_fig1();
  s.family = Family::wishart;
  s.wishart_p = 7;
  CHECK_THROWS_AS(s.validate(), InvalidArgument);
  auto t = default_spec("table1");
  t.field = Field::real;
  CHECK_THROWS_AS(t.validate(), InvalidArgument);
  t = default_spec("table1");
  t.grid.clear();
  CHECK_THROWS_AS(t.validate(), InvalidArgument);
}

TEST_CASE("config overrides") {
  auto s = default_spec("table1");
  apply_config(s, json::parse(R"({"grid": [[3, 40]], "trials": 2,
      "solver": {"eta": 0.5, "rank_budget": "full", "max_iters": 50}})"));
  CHECK(s.grid.size() == 1);
  CHECK(s.grid[0].first == 3);
  CHECK(s.trials == 2);
  CHECK(s.solver.eta == 0.5);
  CHECK_FALSE(s.solver.rank_budget.has_value());
  apply_config(s, json::parse(R"({"solver": {"eta": "auto", "rank_budget": 2}})"));
  CHECK_FALSE(s.solver.eta.has_value());
  CHECK(s.solver.rank_budget == 2);

  CHECK_THROWS_AS(apply_config(s, json::parse(R"({"bogus": 1})")), InvalidArgument);
  CHECK_THROWS_AS(apply_config(s, json::parse(R"({"name": "fig1"})")), InvalidArgument);
  CHECK_THROWS_AS(apply_config(s, json::parse(R"({"trials": "many"})")), InvalidArgument);
  CHECK_THROWS_AS(apply_config(s, json::parse(R"({"solver": {"tolerance": 1}})")), InvalidArgument);

  // The manifest's spec echo feeds back as a config.
  const auto orig = default_spec("certificate");
  auto copy = default_spec("certificate");
  copy.n = 99;
  apply_config(copy, to_json(orig));
  CHECK(to_json(copy) == to_json(orig));
}

TEST_CASE("csv round trip and wall-time stripping") {
  ResultRow row;
  row.experiment = "fig1";
  row.n2 = 36;
  row.m = 8;
  row.solver = "pgd_psd";
  row.trial = 1;
  row.dist_full = 1.25e-3;
  row.dist_rank1 = 2.5e-4;
  row.iters = 17;
  row.wall_ms = 3.5;
  const std::string csv = to_csv({row});
  CHECK(csv.rfind(std::string(csv_header()) + "\n", 0) == 0);
  const auto back = parse_csv(csv);
  REQUIRE(back.size() == 1);
  CHECK(back[0].solver == "pgd_psd");
  CHECK(back[0].dist_full == doctest::Approx(1.25e-3));
  CHECK(back[0].iters == 17);
  CHECK(back[0].wall_ms == doctest::Approx(3.5));

  ResultRow slow = row;
  slow.wall_ms = 900.0;
  CHECK(to_csv({row}) != to_csv({slow}));
  CHECK(strip_wall_time(to_csv({row})) == strip_wall_time(to_csv({slow})));
  CHECK(strip_wall_time(to_csv({row})).find("wall_ms") == std::string::npos);
  CHECK_THROWS_AS(parse_csv("a,b\n1,2\n"), InvalidArgument);
}

TEST_CASE("parallel_for visits every index and rethrows the first failure") {
  std::vector<std::atomic<int>> seen(40);
  parallel_for(40, 3, [&](std::size_t k) { seen[k]++; });
  for (auto& s : seen) CHECK(s.load() == 1);
  try {
    parallel_for(10, 4, [](std::size_t k) {
      if (k == 7 || k == 3) throw InvalidArgument("task " + std::to_string(k));
    });
    FAIL("expected an exception");
  } catch (const InvalidArgument& e) {
    CHECK(std::string(e.what()) == "task 3");
  }
}

TEST_CASE("fig1 runs are deterministic across reruns and thread counts") {
  auto s = small_fig1();
  const auto a = run_experiment(s);
  s.threads = 3;
  const auto b = run_experiment(s);
  CHECK(a.rows.size() == 2 * 2 * 3);
  CHECK(strip_wall_time(to_csv(a.rows)) == strip_wall_time(to_csv(b.rows)));
  CHECK(a.instances.size() == 4);
  CHECK(a.svg.rfind("<svg", 0) == 0);

  // Row order: grid point, trial, solver.
  CHECK(a.rows[0].m == 8);
  CHECK(a.rows[0].trial == 0);
  CHECK(a.rows.back().m == 30);
  CHECK(a.rows.back().trial == 1);

  s.seed = 4;
  const auto c = run_experiment(s);
  CHECK(strip_wall_time(to_csv(a.rows)) != strip_wall_time(to_csv(c.rows)));
}

TEST_CASE("write_outputs records hashes of every artifact") {
  const auto dir = std::filesystem::temp_directory_path() / "psdsense_harness_test";
  std::filesystem::remove_all(dir);
  const auto res = run_experiment(small_fig1());
  const auto paths = write_outputs(res, dir);
  CHECK(paths.size() == 4);
  const json manifest = json::parse(read_text(dir / "fig1_manifest.json"));
  for (const auto& file : {"fig1.csv", "fig1_summary.json", "fig1.svg"}) {
    REQUIRE(std::filesystem::exists(dir / file));
    CHECK(manifest["artifacts"][file] == hex64(fnv1a64(read_text(dir / file))));
  }
  CHECK(manifest["spec"]["seed"] == 3);
  CHECK(manifest["instances"].size() == 4);
  CHECK(manifest["csv_hash_without_wall_ms"] ==
        hex64(fnv1a64(strip_wall_time(read_text(dir / "fig1.csv")))));
  std::filesystem::remove_all(dir);
}

TEST_CASE("small Pauli tables") {
  auto t1 = default_spec("table1");
  t1.grid = {{2, 10}};
  t1.trials = 1;
  const auto r1 = run_experiment(t1);
  CHECK(r1.rows.size() == 3);
  REQUIRE(r1.summary["checks"].size() == 1);
  CHECK(r1.summary["checks"][0].contains("nuclear_le_min_fro"));

  auto t2 = default_spec("table2");
  t2.grid = {{2, 10}};
  t2.trials = 1;
  const auto r2 = run_experiment(t2);
  REQUIRE(r2.summary["checks"].size() == 1);
  CHECK(r2.summary["checks"][0].contains("fgd_r_faster"));
  for (const auto& row : r2.rows) CHECK(row.n2 == 16);
}

TEST_CASE("small certificate and rip study") {
  auto c = default_spec("certificate");
  c.n = 4;
  c.m_sweep = {20};
  c.trials = 2;
  c.rip_samples = 100;
  c.small_m = 6;
  const auto rc = run_experiment(c);
  const auto& totals = rc.summary["totals"];
  CHECK(totals["instances"] == 2);
  CHECK(totals["trace_all_pass"] == true);
  CHECK(totals["c_agree"] == 2);

  auto r = default_spec("rip_study");
  r.n = 4;
  r.m_sweep = {40};
  r.rip_samples = 100;
  r.rip_ranks = {1, 2};
  r.gamma = 2;
  const auto rr = run_experiment(r);
  REQUIRE(rr.summary["estimates"].size() == 1);
  CHECK(rr.summary["estimates"][0]["whitened"].size() == 2);
  CHECK(rr.summary["estimates"][0].contains("corollary"));
  REQUIRE(rr.extra_files.size() == 1);
  CHECK(rr.extra_files[0].first == "rip_study_ratios_r1.csv");
}

TEST_CASE("svg rendering") {
  const std::vector<ResultRow> rows = [] {
    std::vector<ResultRow> v;
    for (int t = 0; t < 3; ++t) {
      ResultRow a;
      a.solver = "pgd_psd";
      a.m = 10;
      a.dist_full = 1.0 + t;
      v.push_back(a);
      a.m = 20;
      a.dist_full = 0.0;
      v.push_back(a);
    }
    return v;
  }();
  const auto series = series_from_rows(rows);
  REQUIRE(series.size() == 1);
  CHECK(series[0].x == std::vector<double>{10, 20});
  CHECK(series[0].y == std::vector<double>{2.0, 0.0});
  const std::string svg = render_svg(series, "t", "m", "err");
  CHECK(svg.find("<polyline") != std::string::npos);
  CHECK(svg.find("pgd_psd") != std::string::npos);
  CHECK(svg.find("nan") == std::string::npos);
  CHECK(svg.find("inf") == std::string::npos);
}
