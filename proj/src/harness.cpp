#include "psdsense/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <limits>
#include <map>
#include <sstream>
#include <thread>

#include "psdsense/rip.hpp"
#include "psdsense/rng.hpp"
#include "psdsense/transform.hpp"

namespace psdsense {

namespace {

constexpr Real kResidualMark = 1e-4;

bool is_table(const std::string& name) { return name == "table1" || name == "table2"; }

// --- instances -------------------------------------------------------------

template <typename Scalar>
struct Instance {
  SensingMap<Scalar> map;
  GroundTruth<Scalar> truth;
  RealVec b;
  std::uint64_t map_seed = 0;
  std::uint64_t truth_seed = 0;
};

// Map seeds are keyed by (grid point, trial); the ground truth only by
// trial, so one trial compares every m of a sweep against the same X*.
std::uint64_t map_seed_for(const ExperimentSpec& spec, std::size_t point, int trial) {
  return derive_seed(spec.seed,
                     stream_id(StreamTag::sensing, (std::uint64_t(point) << 16) | unsigned(trial)));
}

std::uint64_t truth_seed_for(const ExperimentSpec& spec, int trial) {
  return derive_seed(spec.seed, stream_id(StreamTag::ground_truth, unsigned(trial)));
}

template <typename Scalar>
SensingMap<Scalar> make_map(const ExperimentSpec& spec, Eigen::Index n, Eigen::Index m, int q,
                            std::uint64_t seed) {
  switch (spec.family) {
    case Family::wishart: {
      WishartConfig cfg;
      cfg.n = n;
      cfg.p = spec.wishart_p > 0 ? spec.wishart_p : n + 2;
      cfg.seed = seed;
      return gen_wishart<Scalar>(cfg, m);
    }
    case Family::rank_one_gaussian: return gen_rank_one_gaussian<Scalar>(n, m, seed);
    case Family::pauli:
      if constexpr (is_complex_v<Scalar>) {
        PauliConfig cfg;
        cfg.q = q;
        cfg.m = m;
        cfg.seed = seed;
        return gen_pauli(cfg);
      }
      break;
    case Family::custom: break;
  }
  throw InvalidArgument(std::string("experiment: cannot generate family ") +
                        to_string(spec.family) + " in the " + to_string(field_of_v<Scalar>) +
                        " field");
}

template <typename Scalar>
Instance<Scalar> make_instance(const ExperimentSpec& spec, Eigen::Index n, Eigen::Index m, int q,
                               std::size_t point, int trial) {
  Instance<Scalar> inst;
  inst.map_seed = map_seed_for(spec, point, trial);
  inst.truth_seed = truth_seed_for(spec, trial);
  inst.map = make_map<Scalar>(spec, n, m, q, inst.map_seed);
  inst.truth = gen_ground_truth<Scalar>(n, spec.r, spec.normalized, inst.truth_seed);
  inst.b = psdsense::apply(inst.map, inst.truth.x_star);
  return inst;
}

json instance_record(const ExperimentSpec& spec, std::size_t point, int trial, Eigen::Index n,
                     Eigen::Index m, int q) {
  json j = {{"point", point},
            {"trial", trial},
            {"family", to_string(spec.family)},
            {"field", to_string(spec.field)},
            {"n", n},
            {"m", m},
            {"map_seed", map_seed_for(spec, point, trial)},
            {"truth_seed", truth_seed_for(spec, trial)},
            {"r", spec.r},
            {"normalized", spec.normalized}};
  if (spec.family == Family::pauli) j["q"] = q;
  if (spec.family == Family::wishart) j["p"] = spec.wishart_p > 0 ? spec.wishart_p : n + 2;
  return j;
}

template <typename Scalar>
Real energy_fraction(const Hermitian<Scalar>& x) {
  const RealVec ev = eig_herm(x).eigenvalues;
  const Real tr = ev.sum();
  return tr > 0.0 ? ev(0) / tr : 0.0;
}

template <typename Scalar>
ResultRow make_row(const ExperimentSpec& spec, const Instance<Scalar>& inst,
                   SolverReport<Scalar>& rep, int trial) {
  score(rep, inst.truth);
  ResultRow row;
  row.experiment = spec.name;
  row.n2 = inst.map.n() * inst.map.n();
  row.m = inst.map.m();
  row.solver = rep.solver;
  row.trial = trial;
  row.dist_full = rep.dist_full;
  row.dist_rank1 = rep.dist_rank1;
  row.iters = rep.iters;
  row.wall_ms = rep.wall_ms;
  row.trial_seed = inst.map_seed;
  row.converged = rep.converged;
  row.final_residual = rep.final_residual();
  row.energy_fraction = energy_fraction(rep.x_hat);
  row.iters_to_1e4 = rep.iters_to_residual(kResidualMark);
  return row;
}

struct TaskOutput {
  std::vector<ResultRow> rows;
  json failures = json::array();
  json detail;
};

json failure(const std::string& solver, std::size_t point, int trial, const std::exception& e) {
  return {{"point", point}, {"trial", trial}, {"solver", solver}, {"error", e.what()}};
}

template <typename Scalar>
TaskOutput solve_all(const ExperimentSpec& spec, const Instance<Scalar>& inst, std::size_t point,
                     int trial) {
  TaskOutput out;
  for (const auto& name : spec.solvers) {
    try {
      auto rep = run_solver<Scalar>(name, inst.map, inst.b, spec.solver, inst.truth.r);
      rep.solver = name;
      out.rows.push_back(make_row(spec, inst, rep, trial));
    } catch (const Error& e) {
      out.failures.push_back(failure(name, point, trial, e));
    }
  }
  return out;
}

// --- summaries ---------------------------------------------------------------

Real median_of(std::vector<Real> v) { return v.empty() ? 0.0 : median(std::move(v)); }

json summarize_rows(const ExperimentSpec& spec, const std::vector<ResultRow>& rows) {
  // Group by (n2, m, solver) in first-appearance order.
  std::vector<std::tuple<Eigen::Index, Eigen::Index, std::string>> keys;
  std::map<std::tuple<Eigen::Index, Eigen::Index, std::string>, std::vector<const ResultRow*>>
      groups;
  for (const auto& r : rows) {
    auto key = std::make_tuple(r.n2, r.m, r.solver);
    if (!groups.count(key)) keys.push_back(key);
    groups[key].push_back(&r);
  }
  const int unreached = spec.solver.max_iters + 1;
  json out = json::array();
  for (const auto& key : keys) {
    const auto& g = groups[key];
    std::vector<Real> df, d1, it, wall, energy, mark;
    int converged = 0, reached = 0;
    for (const ResultRow* r : g) {
      df.push_back(r->dist_full);
      d1.push_back(r->dist_rank1);
      it.push_back(r->iters);
      wall.push_back(r->wall_ms);
      energy.push_back(r->energy_fraction);
      mark.push_back(r->iters_to_1e4 >= 0 ? r->iters_to_1e4 : unreached);
      converged += r->converged;
      reached += r->iters_to_1e4 >= 0;
    }
    out.push_back({{"n2", std::get<0>(key)},
                   {"m", std::get<1>(key)},
                   {"solver", std::get<2>(key)},
                   {"trials", g.size()},
                   {"median_dist_full", median_of(df)},
                   {"median_dist_rank1", median_of(d1)},
                   {"median_iters", median_of(it)},
                   {"median_wall_ms", median_of(wall)},
                   {"median_energy_fraction", median_of(energy)},
                   {"median_iters_to_1e-4", median_of(mark)},
                   {"reached_1e-4", reached},
                   {"converged", converged}});
  }
  return out;
}

const json* find_group(const json& groups, Eigen::Index n2, Eigen::Index m,
                       const std::string& solver) {
  for (const auto& g : groups) {
    if (g["n2"] == n2 && g["m"] == m && g["solver"] == solver) return &g;
  }
  return nullptr;
}

// --- generic grid runner -------------------------------------------------------

struct GridPoint {
  Eigen::Index n;
  Eigen::Index m;
  int q;
};

std::vector<GridPoint> grid_points(const ExperimentSpec& spec) {
  std::vector<GridPoint> pts;
  if (is_table(spec.name)) {
    for (const auto& [q, m] : spec.grid) pts.push_back({Eigen::Index{1} << q, m, q});
  } else {
    for (auto m : spec.m_sweep) pts.push_back({spec.n, m, 0});
  }
  return pts;
}

template <typename Scalar, typename Task>
ExperimentResult run_grid(const ExperimentSpec& spec, Task task) {
  spec.validate();
  const auto pts = grid_points(spec);
  const std::size_t count = pts.size() * static_cast<std::size_t>(spec.trials);
  std::vector<TaskOutput> outputs(count);
  parallel_for(count, spec.threads, [&](std::size_t k) {
    const std::size_t point = k / spec.trials;
    const int trial = static_cast<int>(k % spec.trials);
    const auto& p = pts[point];
    const auto inst = make_instance<Scalar>(spec, p.n, p.m, p.q, point, trial);
    outputs[k] = task(inst, point, trial);
  });

  ExperimentResult res;
  res.spec = spec;
  json failures = json::array();
  json details = json::array();
  for (std::size_t k = 0; k < count; ++k) {
    const std::size_t point = k / spec.trials;
    const int trial = static_cast<int>(k % spec.trials);
    res.instances.push_back(instance_record(spec, point, trial, pts[point].n, pts[point].m,
                                            pts[point].q));
    for (auto& row : outputs[k].rows) res.rows.push_back(std::move(row));
    for (auto& f : outputs[k].failures) failures.push_back(std::move(f));
    if (!outputs[k].detail.is_null()) details.push_back(std::move(outputs[k].detail));
  }
  res.summary["experiment"] = spec.name;
  res.summary["groups"] = summarize_rows(spec, res.rows);
  res.summary["failures"] = std::move(failures);
  if (!details.empty()) res.summary["instances"] = std::move(details);
  return res;
}

template <typename Scalar>
ExperimentResult run_solvers_grid(const ExperimentSpec& spec) {
  return run_grid<Scalar>(spec, [&](const Instance<Scalar>& inst, std::size_t point, int trial) {
    return solve_all(spec, inst, point, trial);
  });
}

ExperimentResult dispatch_solvers_grid(const ExperimentSpec& spec) {
  return spec.field == Field::complex ? run_solvers_grid<Complex>(spec)
                                      : run_solvers_grid<Real>(spec);
}

// --- certificate -----------------------------------------------------------------

template <typename Scalar>
json trace_json(const TraceReport& t) {
  return {{"status", to_string(t.status)}, {"residual", t.residual}, {"trace_y", t.trace_y},
          {"deviation", t.deviation},      {"tolerance", t.tolerance}, {"psd", t.psd}};
}

template <typename Scalar>
TaskOutput certify_instance(const ExperimentSpec& spec, const Instance<Scalar>& inst,
                            std::size_t point, int trial) {
  TaskOutput out;
  json& d = out.detail;
  d = {{"point", point}, {"trial", trial}, {"m", inst.map.m()}};
  RealVec phi;
  try {
    phi = find_phi(inst.map);
  } catch (const NumericalError& e) {
    d["skipped"] = e.what();
    return out;
  }
  const auto wp = whiten(inst.map, inst.b, phi);
  const Real c_truth = to_Y(wp, inst.truth.x_star).trace();
  d["c"] = wp.c;
  d["c_from_truth"] = c_truth;
  d["c_agree"] = std::abs(c_truth - wp.c) <= 1e-8 * (1.0 + std::abs(wp.c));

  std::map<std::string, Hermitian<Scalar>> estimates;
  json checks = json::object();
  int checked = 0, passed = 0;
  for (const auto& name : spec.solvers) {
    try {
      auto rep = run_solver<Scalar>(name, inst.map, inst.b, spec.solver, inst.truth.r);
      rep.solver = name;
      const auto tr = verify_trace_invariance(wp, inst.map, rep.x_hat);
      json cj = trace_json<Scalar>(tr);
      const bool eligible = tr.status != TraceStatus::infeasible && tr.psd;
      cj["checked"] = eligible;
      if (eligible) {
        ++checked;
        passed += tr.pass();
      }
      checks[name] = cj;
      estimates.emplace(name, rep.x_hat);
      out.rows.push_back(make_row(spec, inst, rep, trial));
    } catch (const Error& e) {
      out.failures.push_back(failure(name, point, trial, e));
    }
  }
  d["trace_checks"] = checks;
  d["trace_checked"] = checked;
  d["trace_passed"] = passed;

  const Real tol = 1e-2 * (1.0 + inst.truth.x_star.matrix().norm());
  const std::vector<std::string> trio = {"nuclear_min", "min_fro_norm", "pgd_psd"};
  json pairs = json::array();
  Real worst = 0.0;
  bool complete = true;
  for (std::size_t a = 0; a < trio.size(); ++a) {
    for (std::size_t b = a + 1; b < trio.size(); ++b) {
      auto ia = estimates.find(trio[a]);
      auto ib = estimates.find(trio[b]);
      if (ia == estimates.end() || ib == estimates.end()) {
        complete = false;
        continue;
      }
      const Real dist = fro_dist(ia->second, ib->second);
      worst = std::max(worst, dist);
      pairs.push_back({{"a", trio[a]}, {"b", trio[b]}, {"dist", dist}});
    }
  }
  d["pairwise"] = pairs;
  d["pairwise_max"] = worst;
  d["pairwise_tolerance"] = tol;
  d["singleton_agreement"] = complete && worst <= tol;

  const Eigen::Index rip_rank = std::min<Eigen::Index>(4 * spec.r, inst.map.n());
  const auto est = estimate_rip_l2l1(wp.whitened_map(), rip_rank, spec.rip_samples,
                                     derive_seed(inst.map_seed, stream_id(StreamTag::rip_probe, 0)));
  d["whitened_rip"] = rip_to_json(est);

  // Below n(n+1)/2 measurements the least-squares solution is feasible but
  // generally leaves the PSD cone, so it is outside the certified set.
  if (spec.small_m > 0) {
    const auto small = make_instance<Scalar>(spec, inst.map.n(), spec.small_m, 0,
                                             point + 0x8000, trial);
    const auto ls = unconstrained_ls(small.map, small.b);
    const auto swp = whiten(small.map, small.b, find_phi(small.map));
    const auto tr = verify_trace_invariance(swp, small.map, ls.x_hat);
    json sj = trace_json<Scalar>(tr);
    sj["m"] = spec.small_m;
    sj["lambda_min"] = min_eigenvalue(ls.x_hat);
    sj["in_certified_set"] = tr.pass() && tr.psd;
    d["small_m_least_squares"] = sj;
  }
  return out;
}

template <typename Scalar>
ExperimentResult run_certificate_impl(const ExperimentSpec& spec) {
  ExperimentResult res = run_grid<Scalar>(
      spec, [&](const Instance<Scalar>& inst, std::size_t point, int trial) {
    return certify_instance(spec, inst, point, trial);
  });
  int checked = 0, passed = 0, skipped = 0, agree = 0, c_agree = 0, left = 0, total = 0;
  Real worst_ratio = 0.0, worst_delta = 0.0;
  for (const auto& d : res.summary.value("instances", json::array())) {
    if (d.contains("skipped")) {
      ++skipped;
      continue;
    }
    ++total;
    checked += d["trace_checked"].get<int>();
    passed += d["trace_passed"].get<int>();
    agree += d["singleton_agreement"].get<bool>();
    c_agree += d["c_agree"].get<bool>();
    worst_ratio = std::max(worst_ratio, d["pairwise_max"].get<Real>() /
                                            d["pairwise_tolerance"].get<Real>());
    worst_delta = std::max(worst_delta, d["whitened_rip"]["delta_hat"].get<Real>());
    if (d.contains("small_m_least_squares")) {
      left += !d["small_m_least_squares"]["in_certified_set"].get<bool>();
    }
  }
  res.summary["totals"] = {{"instances", total},
                           {"skipped", skipped},
                           {"trace_checked", checked},
                           {"trace_passed", passed},
                           {"trace_all_pass", checked > 0 && passed == checked},
                           {"singleton_agreement", agree},
                           {"singleton_all_pass", total > 0 && agree == total},
                           {"worst_pairwise_over_tolerance", worst_ratio},
                           {"c_agree", c_agree},
                           {"max_whitened_delta_4r", worst_delta},
                           {"small_m_least_squares_outside", left}};
  return res;
}

// --- rip study ---------------------------------------------------------------------

template <typename Scalar>
ExperimentResult run_rip_impl(const ExperimentSpec& spec) {
  spec.validate();
  ExperimentResult res;
  res.spec = spec;
  res.summary["experiment"] = spec.name;
  json entries = json::array();
  std::vector<json> slots(spec.m_sweep.size() * static_cast<std::size_t>(spec.trials));
  std::vector<std::vector<Real>> first_ratios(slots.size());
  parallel_for(slots.size(), spec.threads, [&](std::size_t k) {
    const std::size_t point = k / spec.trials;
    const int trial = static_cast<int>(k % spec.trials);
    const auto inst = make_instance<Scalar>(spec, spec.n, spec.m_sweep[point], 0, point, trial);
    const auto wp = whiten(inst.map, inst.b, find_phi(inst.map));
    const auto white = wp.whitened_map();
    const std::uint64_t seed = derive_seed(inst.map_seed, stream_id(StreamTag::rip_probe, 0));
    json raw = json::array(), whitened = json::array();
    for (auto r : spec.rip_ranks) {
      raw.push_back(rip_to_json(estimate_rip_l2l1(inst.map, r, spec.rip_samples, seed)));
      const auto est = estimate_rip_l2l1(white, r, spec.rip_samples, seed);
      if (r == spec.r) first_ratios[k] = est.ratios;
      whitened.push_back(rip_to_json(est));
    }
    json j = {{"point", point}, {"trial", trial}, {"m", inst.map.m()},
              {"raw", raw},     {"whitened", whitened}};
    if (spec.gamma * spec.r <= spec.n && 2 * spec.r <= spec.n) {
      j["corollary"] = corollary_to_json(
          check_corollary_scaling(white, spec.r, spec.gamma, spec.rip_samples, seed));
    }
    slots[k] = std::move(j);
  });
  for (std::size_t k = 0; k < slots.size(); ++k) {
    const std::size_t point = k / spec.trials;
    const int trial = static_cast<int>(k % spec.trials);
    res.instances.push_back(instance_record(spec, point, trial, spec.n, spec.m_sweep[point], 0));
    entries.push_back(std::move(slots[k]));
  }
  res.summary["estimates"] = std::move(entries);
  if (!first_ratios.empty() && !first_ratios[0].empty()) {
    res.extra_files.emplace_back("rip_study_ratios_r" + std::to_string(spec.r) + ".csv",
                                 ratios_csv(first_ratios[0]));
  }
  return res;
}

// --- svg -------------------------------------------------------------------------

std::string xml_escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

std::string format_num(double v) {
  std::ostringstream ss;
  ss << v;
  return ss.str();
}

}  // namespace

// --- spec -------------------------------------------------------------------------

const std::vector<std::string>& experiment_names() {
  static const std::vector<std::string> names = {"fig1", "table1", "table2", "certificate",
                                                 "rip_study"};
  return names;
}

void ExperimentSpec::validate() const {
  const auto& names = experiment_names();
  if (std::find(names.begin(), names.end(), name) == names.end()) {
    throw InvalidArgument("unknown experiment '" + name + "'");
  }
  if (trials < 1) throw InvalidArgument(name + ": trials must be >= 1");
  if (threads < 1) throw InvalidArgument(name + ": threads must be >= 1");
  if (r < 1) throw InvalidArgument(name + ": r must be >= 1");
  solver.validate();
  for (const auto& s : solvers) {
    const auto& known = solver_names();
    if (std::find(known.begin(), known.end(), s) == known.end()) {
      throw InvalidArgument(name + ": unknown solver '" + s + "'");
    }
  }
  if (is_table(name)) {
    if (grid.empty()) throw InvalidArgument(name + ": grid must be nonempty");
    if (family != Family::pauli || field != Field::complex) {
      throw InvalidArgument(name + ": tables use the Pauli family in the complex field");
    }
    for (const auto& [q, m] : grid) {
      if (q < 1 || q > 12 || m < 1) throw InvalidArgument(name + ": invalid grid point");
      if (r > (Eigen::Index{1} << q)) throw InvalidArgument(name + ": r exceeds n");
    }
    return;
  }
  if (m_sweep.empty()) throw InvalidArgument(name + ": m_sweep must be nonempty");
  for (auto m : m_sweep) {
    if (m < 1) throw InvalidArgument(name + ": m values must be positive");
  }
  if (n < 1 || r > n) throw InvalidArgument(name + ": need 1 <= r <= n");
  if (family == Family::pauli || family == Family::custom) {
    throw InvalidArgument(name + ": family must be wishart or rank_one_gaussian");
  }
  if (family == Family::wishart && wishart_p != 0 && wishart_p <= n + 1) {
    throw InvalidArgument(name + ": wishart_p must exceed n + 1");
  }
  if (name == "rip_study" || name == "certificate") {
    if (rip_samples < 100) throw InvalidArgument(name + ": rip_samples must be >= 100");
  }
  if (name == "rip_study") {
    if (rip_ranks.empty()) throw InvalidArgument(name + ": rip_ranks must be nonempty");
    for (auto k : rip_ranks) {
      if (k < 1 || k > n) throw InvalidArgument(name + ": rip ranks must lie in [1, n]");
    }
    if (gamma < 1) throw InvalidArgument(name + ": gamma must be >= 1");
  }
}

ExperimentSpec default_spec(const std::string& name, bool large) {
  ExperimentSpec s;
  s.name = name;
  s.large = large;
  if (name == "fig1") {
    s.family = Family::rank_one_gaussian;
    s.n = 15;
    for (Eigen::Index m = 10; m <= 130; m += 10) s.m_sweep.push_back(m);
    s.solvers = {"unconstrained_ls", "pgd_psd", "min_fro_norm"};
  } else if (name == "table1" || name == "table2") {
    s.family = Family::pauli;
    s.field = Field::complex;
    s.normalized = true;
    // At 1e-10 every solver sits on the roundoff floor of the affine
    // projection and the table comparisons become noise.
    s.solver.tol_resid = 1e-8;
    s.grid = {{4, 128}, {5, 288}};
    if (large) {
      s.grid.push_back({6, 640});
      s.grid.push_back({7, 1536});
    }
    s.solvers = name == "table1" ? std::vector<std::string>{"nuclear_min", "min_fro_norm", "pgd_psd"}
                                 : std::vector<std::string>{"pgd_psd", "fgd", "fgd_full"};
  } else if (name == "certificate") {
    s.family = Family::wishart;
    s.n = 10;
    s.wishart_p = 12;
    s.m_sweep = {150};
    s.trials = 20;
    s.solvers = {"nuclear_min", "min_fro_norm", "pgd_psd", "fgd", "unconstrained_ls"};
  } else if (name == "rip_study") {
    s.family = Family::wishart;
    s.n = 8;
    s.m_sweep = {200};
    s.trials = 1;
    s.rip_ranks = {1, 2, 3, 4};
  } else {
    throw InvalidArgument("unknown experiment '" + name + "'");
  }
  return s;
}

void apply_solver_config(SolverConfig& c, const json& config) {
  if (!config.is_object()) throw InvalidArgument("config: solver settings must be an object");
  try {
    for (const auto& [k, x] : config.items()) {
      if (k == "max_iters") {
        c.max_iters = x.get<int>();
      } else if (k == "tol_resid") {
        c.tol_resid = x.get<Real>();
      } else if (k == "eta") {
        c.eta = x.is_string() && x == "auto" ? std::nullopt : std::optional<Real>(x.get<Real>());
      } else if (k == "rank_budget") {
        c.rank_budget = x.is_string() && x == "full"
                            ? std::nullopt
                            : std::optional<Eigen::Index>(x.get<Eigen::Index>());
      } else if (k == "seed") {
        c.seed = x.get<std::uint64_t>();
      } else if (k == "init") {
        c.init = x.get<std::string>();
      } else if (k == "psd_constrained") {
        c.psd_constrained = x.get<bool>();
      } else if (k == "lambda0") {
        c.lambda0 = x.get<Real>();
      } else if (k == "lambda_decay") {
        c.lambda_decay = x.get<Real>();
      } else if (k == "lambda_min_ratio") {
        c.lambda_min_ratio = x.get<Real>();
      } else if (k == "stage_iters") {
        c.stage_iters = x.get<int>();
      } else {
        throw InvalidArgument("config: unknown solver key '" + k + "'");
      }
    }
  } catch (const json::exception& e) {
    throw InvalidArgument(std::string("config: ") + e.what());
  }
}

void apply_config(ExperimentSpec& s, const json& config) {
  if (!config.is_object()) throw InvalidArgument("config: expected a JSON object");
  try {
    for (const auto& [key, v] : config.items()) {
      if (key == "name") {
        if (v.get<std::string>() != s.name) {
          throw InvalidArgument("config: names experiment '" + v.get<std::string>() +
                                "' but '" + s.name + "' was requested");
        }
      } else if (key == "family") {
        s.family = parse_family(v.get<std::string>());
      } else if (key == "field") {
        s.field = parse_field(v.get<std::string>());
      } else if (key == "n") {
        s.n = v.get<Eigen::Index>();
      } else if (key == "m_sweep") {
        s.m_sweep = v.get<std::vector<Eigen::Index>>();
      } else if (key == "grid") {
        s.grid.clear();
        for (const auto& p : v) s.grid.push_back({p.at(0).get<int>(), p.at(1).get<Eigen::Index>()});
      } else if (key == "r") {
        s.r = v.get<Eigen::Index>();
      } else if (key == "trials") {
        s.trials = v.get<int>();
      } else if (key == "seed") {
        s.seed = v.get<std::uint64_t>();
      } else if (key == "normalized") {
        s.normalized = v.get<bool>();
      } else if (key == "wishart_p") {
        s.wishart_p = v.get<Eigen::Index>();
      } else if (key == "solvers") {
        s.solvers = v.get<std::vector<std::string>>();
      } else if (key == "rip_samples") {
        s.rip_samples = v.get<Eigen::Index>();
      } else if (key == "rip_ranks") {
        s.rip_ranks = v.get<std::vector<Eigen::Index>>();
      } else if (key == "gamma") {
        s.gamma = v.get<Eigen::Index>();
      } else if (key == "small_m") {
        s.small_m = v.get<Eigen::Index>();
      } else if (key == "threads") {
        s.threads = v.get<int>();
      } else if (key == "large") {
        s.large = v.get<bool>();
      } else if (key == "solver") {
        apply_solver_config(s.solver, v);
      } else {
        throw InvalidArgument("config: unknown key '" + key + "'");
      }
    }
  } catch (const json::exception& e) {
    throw InvalidArgument(std::string("config: ") + e.what());
  }
}

json to_json(const ExperimentSpec& s) {
  json grid = json::array();
  for (const auto& [q, m] : s.grid) grid.push_back({q, m});
  json solver = {{"max_iters", s.solver.max_iters},
                 {"tol_resid", s.solver.tol_resid},
                 {"eta", s.solver.eta ? json(*s.solver.eta) : json("auto")},
                 {"rank_budget", s.solver.rank_budget ? json(*s.solver.rank_budget) : json("full")},
                 {"seed", s.solver.seed},
                 {"init", s.solver.init},
                 {"psd_constrained", s.solver.psd_constrained},
                 {"lambda0", s.solver.lambda0},
                 {"lambda_decay", s.solver.lambda_decay},
                 {"lambda_min_ratio", s.solver.lambda_min_ratio},
                 {"stage_iters", s.solver.stage_iters}};
  return {{"name", s.name},
          {"family", to_string(s.family)},
          {"field", to_string(s.field)},
          {"n", s.n},
          {"m_sweep", s.m_sweep},
          {"grid", grid},
          {"r", s.r},
          {"trials", s.trials},
          {"seed", s.seed},
          {"normalized", s.normalized},
          {"wishart_p", s.wishart_p},
          {"solvers", s.solvers},
          {"solver", solver},
          {"rip_samples", s.rip_samples},
          {"rip_ranks", s.rip_ranks},
          {"gamma", s.gamma},
          {"small_m", s.small_m},
          {"threads", s.threads},
          {"large", s.large}};
}

// --- csv ---------------------------------------------------------------------------

const char* csv_header() { return "experiment,n2,m,solver,trial,dist_full,dist_rank1,iters,wall_ms"; }

std::string to_csv(const std::vector<ResultRow>& rows) {
  std::string out = std::string(csv_header()) + "\n";
  char buf[256];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "%s,%lld,%lld,%s,%d,%.6e,%.6e,%d,%.3f\n", r.experiment.c_str(),
                  static_cast<long long>(r.n2), static_cast<long long>(r.m), r.solver.c_str(),
                  r.trial, r.dist_full, r.dist_rank1, r.iters, r.wall_ms);
    out += buf;
  }
  return out;
}

std::vector<ResultRow> parse_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || line != csv_header()) {
    throw InvalidArgument(std::string("csv: expected header '") + csv_header() + "'");
  }
  std::vector<ResultRow> rows;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::stringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ',')) f.push_back(cell);
    if (f.size() != 9) throw InvalidArgument("csv: line " + std::to_string(lineno) + " has " +
                                             std::to_string(f.size()) + " fields");
    try {
      ResultRow r;
      r.experiment = f[0];
      r.n2 = std::stoll(f[1]);
      r.m = std::stoll(f[2]);
      r.solver = f[3];
      r.trial = std::stoi(f[4]);
      r.dist_full = std::stod(f[5]);
      r.dist_rank1 = std::stod(f[6]);
      r.iters = std::stoi(f[7]);
      r.wall_ms = std::stod(f[8]);
      rows.push_back(std::move(r));
    } catch (const std::logic_error&) {
      throw InvalidArgument("csv: malformed number on line " + std::to_string(lineno));
    }
  }
  return rows;
}

std::string strip_wall_time(const std::string& csv) {
  std::istringstream in(csv);
  std::string line, out;
  while (std::getline(in, line)) {
    const auto cut = line.rfind(',');
    out += (cut == std::string::npos ? line : line.substr(0, cut)) + "\n";
  }
  return out;
}

// --- runners ---------------------------------------------------------------------------

ExperimentResult run_fig1(const ExperimentSpec& spec) {
  auto res = dispatch_solvers_grid(spec);
  const auto series = series_from_rows(res.rows);
  res.svg = render_svg(series, "Recovery error vs. number of measurements (n = " +
                                   std::to_string(spec.n) + ")",
                       "m", "median ||X_hat - X*||_F");
  return res;
}

ExperimentResult run_table1(const ExperimentSpec& spec) {
  auto res = dispatch_solvers_grid(spec);
  json checks = json::array();
  for (const auto& [q, m] : spec.grid) {
    const Eigen::Index n = Eigen::Index{1} << q;
    const json* nuc = find_group(res.summary["groups"], n * n, m, "nuclear_min");
    const json* fro = find_group(res.summary["groups"], n * n, m, "min_fro_norm");
    if (!nuc || !fro) continue;
    checks.push_back({{"n2", n * n},
                      {"m", m},
                      {"nuclear_le_min_fro",
                       (*nuc)["median_dist_full"].get<Real>() <= (*fro)["median_dist_full"].get<Real>()}});
  }
  res.summary["checks"] = std::move(checks);
  return res;
}

ExperimentResult run_table2(const ExperimentSpec& spec) {
  auto res = dispatch_solvers_grid(spec);
  json checks = json::array();
  for (const auto& [q, m] : spec.grid) {
    const Eigen::Index n = Eigen::Index{1} << q;
    const json* r = find_group(res.summary["groups"], n * n, m, "fgd");
    const json* full = find_group(res.summary["groups"], n * n, m, "fgd_full");
    if (!r || !full) continue;
    // Runs that never reach the mark count as max_iters + 1.
    checks.push_back({{"n2", n * n},
                      {"m", m},
                      {"fgd_r_iters_to_1e-4", (*r)["median_iters_to_1e-4"]},
                      {"fgd_full_iters_to_1e-4", (*full)["median_iters_to_1e-4"]},
                      {"fgd_r_faster", (*r)["median_iters_to_1e-4"].get<Real>() <
                                           (*full)["median_iters_to_1e-4"].get<Real>()},
                      {"fgd_full_energy_fraction", (*full)["median_energy_fraction"]}});
  }
  res.summary["checks"] = std::move(checks);
  return res;
}

ExperimentResult run_certificate(const ExperimentSpec& spec) {
  return spec.field == Field::complex ? run_certificate_impl<Complex>(spec)
                                      : run_certificate_impl<Real>(spec);
}

ExperimentResult run_rip_study(const ExperimentSpec& spec) {
  return spec.field == Field::complex ? run_rip_impl<Complex>(spec) : run_rip_impl<Real>(spec);
}

ExperimentResult run_experiment(const ExperimentSpec& spec) {
  if (spec.name == "fig1") return run_fig1(spec);
  if (spec.name == "table1") return run_table1(spec);
  if (spec.name == "table2") return run_table2(spec);
  if (spec.name == "certificate") return run_certificate(spec);
  if (spec.name == "rip_study") return run_rip_study(spec);
  throw InvalidArgument("unknown experiment '" + spec.name + "'");
}

std::vector<std::filesystem::path> write_outputs(const ExperimentResult& res,
                                                 const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  const std::string& name = res.spec.name;
  std::vector<std::pair<std::string, std::string>> files;
  if (!res.rows.empty()) files.emplace_back(name + ".csv", to_csv(res.rows));
  files.emplace_back(name + "_summary.json", res.summary.dump(2) + "\n");
  if (!res.svg.empty()) files.emplace_back(name + ".svg", res.svg);
  for (const auto& f : res.extra_files) files.push_back(f);

  json manifest;
  manifest["experiment"] = name;
  manifest["spec"] = to_json(res.spec);
  manifest["seeds"] =
      "map_seed = derive_seed(seed, stream_id(sensing, point << 16 | trial)); "
      "truth_seed = derive_seed(seed, stream_id(ground_truth, trial))";
  manifest["instances"] = res.instances;
  json hashes = json::object();
  std::vector<std::filesystem::path> written;
  for (const auto& [file, text] : files) {
    write_text(dir / file, text);
    written.push_back(dir / file);
    hashes[file] = hex64(fnv1a64(text));
  }
  manifest["artifacts"] = hashes;
  if (!res.rows.empty()) {
    manifest["csv_hash_without_wall_ms"] = hex64(fnv1a64(strip_wall_time(to_csv(res.rows))));
  }
  write_text(dir / (name + "_manifest.json"), manifest.dump(2) + "\n");
  written.push_back(dir / (name + "_manifest.json"));
  return written;
}

// --- workers ---------------------------------------------------------------------------

void parallel_for(std::size_t count, int threads, const std::function<void(std::size_t)>& fn) {
  const std::size_t workers = std::min<std::size_t>(std::max(threads, 1), count);
  if (workers <= 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::exception_ptr> errors(count);
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i; (i = next.fetch_add(1)) < count;) {
        try {
          fn(i);
        } catch (...) {
          errors[i] = std::current_exception();
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

// --- plotting ------------------------------------------------------------------------

std::vector<Series> series_from_rows(const std::vector<ResultRow>& rows) {
  std::vector<std::string> order;
  std::map<std::string, std::map<Eigen::Index, std::vector<Real>>> data;
  for (const auto& r : rows) {
    if (!data.count(r.solver)) order.push_back(r.solver);
    data[r.solver][r.m].push_back(r.dist_full);
  }
  std::vector<Series> out;
  for (const auto& name : order) {
    Series s;
    s.name = name;
    for (const auto& [m, v] : data[name]) {
      s.x.push_back(static_cast<double>(m));
      s.y.push_back(median(v));
    }
    out.push_back(std::move(s));
  }
  return out;
}

std::string render_svg(const std::vector<Series>& series, const std::string& title,
                       const std::string& xlabel, const std::string& ylabel) {
  constexpr double W = 720, H = 480, L = 80, R = 170, T = 40, B = 60;
  double xmin = std::numeric_limits<double>::infinity(), xmax = -xmin;
  double ymin = xmin, ymax = -xmin;
  for (const auto& s : series) {
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      xmin = std::min(xmin, s.x[i]);
      xmax = std::max(xmax, s.x[i]);
      if (s.y[i] > 0.0 && std::isfinite(s.y[i])) {
        ymin = std::min(ymin, s.y[i]);
        ymax = std::max(ymax, s.y[i]);
      }
    }
  }
  if (!std::isfinite(xmin)) xmin = 0, xmax = 1;
  if (xmax == xmin) xmax = xmin + 1;
  if (!std::isfinite(ymin)) ymin = 1e-1, ymax = 1;
  const int lo = static_cast<int>(std::floor(std::log10(ymin)));
  int hi = static_cast<int>(std::ceil(std::log10(ymax)));
  if (hi <= lo) hi = lo + 1;
  const auto px = [&](double x) { return L + (x - xmin) / (xmax - xmin) * (W - L - R); };
  const auto py = [&](double y) {
    const double ly = y > 0.0 && std::isfinite(y) ? std::clamp(std::log10(y), double(lo), double(hi))
                                                   : double(lo);
    return T + (hi - ly) / (hi - lo) * (H - T - B);
  };
  static const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e",
                                 "#9467bd", "#8c564b", "#e377c2"};

  std::ostringstream svg;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H
      << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  svg << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  svg << "<text x=\"" << (L + (W - L - R) / 2) << "\" y=\"24\" text-anchor=\"middle\" font-size=\"14\">"
      << xml_escape(title) << "</text>\n";
  for (int e = lo; e <= hi; ++e) {
    const double y = py(std::pow(10.0, e));
    svg << "<line x1=\"" << L << "\" y1=\"" << y << "\" x2=\"" << (W - R) << "\" y2=\"" << y
        << "\" stroke=\"#ddd\"/>\n";
    svg << "<text x=\"" << (L - 8) << "\" y=\"" << (y + 4) << "\" text-anchor=\"end\">1e" << e
        << "</text>\n";
  }
  for (int k = 0; k <= 6; ++k) {
    const double xv = xmin + (xmax - xmin) * k / 6.0;
    const double x = px(xv);
    svg << "<line x1=\"" << x << "\" y1=\"" << (H - B) << "\" x2=\"" << x << "\" y2=\""
        << (H - B + 5) << "\" stroke=\"black\"/>\n";
    svg << "<text x=\"" << x << "\" y=\"" << (H - B + 18) << "\" text-anchor=\"middle\">"
        << format_num(std::round(xv * 100) / 100) << "</text>\n";
  }
  svg << "<rect x=\"" << L << "\" y=\"" << T << "\" width=\"" << (W - L - R) << "\" height=\""
      << (H - T - B) << "\" fill=\"none\" stroke=\"black\"/>\n";
  svg << "<text x=\"" << (L + (W - L - R) / 2) << "\" y=\"" << (H - 16)
      << "\" text-anchor=\"middle\">" << xml_escape(xlabel) << "</text>\n";
  svg << "<text transform=\"translate(18," << (T + (H - T - B) / 2)
      << ") rotate(-90)\" text-anchor=\"middle\">" << xml_escape(ylabel) << "</text>\n";
  for (std::size_t i = 0; i < series.size(); ++i) {
    const auto& s = series[i];
    const char* color = colors[i % (sizeof colors / sizeof *colors)];
    svg << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"2\" points=\"";
    for (std::size_t k = 0; k < s.x.size(); ++k) {
      svg << (k ? " " : "") << px(s.x[k]) << "," << py(s.y[k]);
    }
    svg << "\"/>\n";
    for (std::size_t k = 0; k < s.x.size(); ++k) {
      svg << "<circle cx=\"" << px(s.x[k]) << "\" cy=\"" << py(s.y[k]) << "\" r=\"3\" fill=\""
          << color << "\"/>\n";
    }
    const double ly = T + 10 + 20 * static_cast<double>(i);
    svg << "<line x1=\"" << (W - R + 12) << "\" y1=\"" << ly << "\" x2=\"" << (W - R + 36)
        << "\" y2=\"" << ly << "\" stroke=\"" << color << "\" stroke-width=\"2\"/>\n";
    svg << "<text x=\"" << (W - R + 42) << "\" y=\"" << (ly + 4) << "\">" << xml_escape(s.name)
        << "</text>\n";
  }
  svg << "</svg>\n";
  return svg.str();
}

}  // namespace psdsense
