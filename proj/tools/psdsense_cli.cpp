// Command-line front end: instance generation, single solves, whitening,
// RIP estimates, the named experiments and CSV plotting.

#include <cstdio>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "psdsense/harness.hpp"
#include "psdsense/io.hpp"
#include "psdsense/rip.hpp"
#include "psdsense/rng.hpp"
#include "psdsense/transform.hpp"

namespace fs = std::filesystem;
using namespace psdsense;

namespace {

constexpr int kInvalidConfig = 2;
constexpr int kNumericalFailure = 3;

struct Globals {
  std::uint64_t seed = 0;
  std::string out = "out";
  std::string config;
  std::string field = "real";
  int threads = 1;
};

json load_config(const Globals& g) {
  if (g.config.empty()) return json::object();
  try {
    return json::parse(read_text(g.config));
  } catch (const json::parse_error& e) {
    throw InvalidArgument("config " + g.config + ": " + e.what());
  }
}

SolverConfig solver_config(const Globals& g) {
  SolverConfig cfg;
  const json j = load_config(g);
  if (j.contains("solver")) apply_solver_config(cfg, j.at("solver"));
  cfg.seed = g.seed;
  return cfg;
}

json load_instance(const std::string& path) {
  try {
    return json::parse(read_text(path));
  } catch (const json::parse_error& e) {
    throw InvalidArgument("instance " + path + ": " + e.what());
  }
}

bool is_complex_instance(const json& inst) {
  return parse_field(inst.at("map").at("field").get<std::string>()) == Field::complex;
}

RealVec vec_from(const json& j) {
  const auto v = j.get<std::vector<double>>();
  return Eigen::Map<const RealVec>(v.data(), static_cast<Eigen::Index>(v.size()));
}

// --- gen ----------------------------------------------------------------------

struct GenOptions {
  std::string family = "rank_one_gaussian";
  Eigen::Index n = 15;
  Eigen::Index m = 60;
  int q = 4;
  Eigen::Index p = 0;
  double sigma2 = 1.0;
  Eigen::Index r = 1;
  bool normalized = false;
  bool plus_sign = false;
  bool matrices = false;
};

template <typename Scalar>
json gen_instance(const GenOptions& o, std::uint64_t seed) {
  const Family family = parse_family(o.family);
  SensingMap<Scalar> map;
  const std::uint64_t map_seed = derive_seed(seed, stream_id(StreamTag::sensing, 0));
  const std::uint64_t truth_seed = derive_seed(seed, stream_id(StreamTag::ground_truth, 0));
  Eigen::Index n = o.n;
  if (family == Family::wishart) {
    WishartConfig cfg{o.n, o.p > 0 ? o.p : o.n + 2, o.sigma2, map_seed, WishartMethod::direct};
    map = gen_wishart<Scalar>(cfg, o.m);
  } else if (family == Family::rank_one_gaussian) {
    map = gen_rank_one_gaussian<Scalar>(o.n, o.m, map_seed);
  } else if (family == Family::pauli) {
    if constexpr (is_complex_v<Scalar>) {
      PauliConfig cfg{o.q, o.m, map_seed, o.plus_sign ? SignRule::plus : SignRule::random};
      map = gen_pauli(cfg);
      n = map.n();
    }
  } else {
    throw InvalidArgument("gen: custom maps cannot be generated");
  }
  const auto truth = gen_ground_truth<Scalar>(n, o.r, o.normalized, truth_seed);
  const RealVec b = psdsense::apply(map, truth.x_star);
  return {{"map", map_to_json(map, o.matrices)},
          {"truth", truth_to_json(truth)},
          {"b", std::vector<double>(b.data(), b.data() + b.size())}};
}

int cmd_gen(const Globals& g, const GenOptions& o) {
  const bool complex = o.family == "pauli" || parse_field(g.field) == Field::complex;
  const json inst = complex ? gen_instance<Complex>(o, g.seed) : gen_instance<Real>(o, g.seed);
  const fs::path path = fs::path(g.out) / "instance.json";
  write_text(path, inst.dump(2) + "\n");
  std::cout << "wrote " << path.string() << " (" << inst["map"]["family"].get<std::string>()
            << ", n=" << inst["map"]["n"] << ", m=" << inst["map"]["m"] << ")\n";
  return 0;
}

// --- solve ----------------------------------------------------------------------

template <typename Scalar>
int solve_impl(const Globals& g, const json& inst, const std::string& solver) {
  const auto map = map_from_json<Scalar>(inst.at("map"));
  const auto truth = truth_from_json<Scalar>(inst.at("truth"));
  const RealVec b = vec_from(inst.at("b"));
  auto rep = run_solver<Scalar>(solver, map, b, solver_config(g), truth.r);
  rep.solver = solver;
  score(rep, truth);
  const fs::path dir(g.out);
  write_text(dir / ("report_" + solver + ".json"), report_to_json(rep).dump(2) + "\n");
  write_text(dir / ("resid_" + solver + ".csv"), resid_csv(rep.resid_history));
  std::printf("%s: dist_full=%.3e dist_rank1=%.3e iters=%d converged=%s residual=%.3e\n",
              solver.c_str(), rep.dist_full, rep.dist_rank1, rep.iters,
              rep.converged ? "yes" : "no", rep.final_residual());
  return 0;
}

int cmd_solve(const Globals& g, const std::string& instance, const std::string& solver) {
  const json inst = load_instance(instance);
  return is_complex_instance(inst) ? solve_impl<Complex>(g, inst, solver)
                                   : solve_impl<Real>(g, inst, solver);
}

// --- whiten ---------------------------------------------------------------------

template <typename Scalar>
int whiten_impl(const Globals& g, const json& inst, bool matrices) {
  const auto map = map_from_json<Scalar>(inst.at("map"));
  const auto truth = truth_from_json<Scalar>(inst.at("truth"));
  const RealVec b = vec_from(inst.at("b"));
  const auto wp = whiten(map, b, find_phi(map));
  const auto check = verify_trace_invariance(wp, map, truth.x_star);
  json j = whitened_to_json(wp, map.n(), matrices);
  j["truth_trace_check"] = {{"status", to_string(check.status)},
                            {"trace_y", check.trace_y},
                            {"deviation", check.deviation},
                            {"tolerance", check.tolerance}};
  const fs::path path = fs::path(g.out) / "whitened.json";
  write_text(path, j.dump(2) + "\n");
  std::printf("c=%.12g  Tr(V^H X* V)=%.12g  check=%s  wrote %s\n", wp.c, check.trace_y,
              to_string(check.status), path.string().c_str());
  return 0;
}

int cmd_whiten(const Globals& g, const std::string& instance, bool matrices) {
  const json inst = load_instance(instance);
  return is_complex_instance(inst) ? whiten_impl<Complex>(g, inst, matrices)
                                   : whiten_impl<Real>(g, inst, matrices);
}

// --- rip --------------------------------------------------------------------------

struct RipOptions {
  std::string instance;
  Eigen::Index r = 1;
  Eigen::Index samples = 500;
  Eigen::Index gamma = 0;
  bool raw = false;
};

template <typename Scalar>
int rip_impl(const Globals& g, const json& inst, const RipOptions& o) {
  auto map = map_from_json<Scalar>(inst.at("map"));
  if (!o.raw) {
    const RealVec b = vec_from(inst.at("b"));
    map = whiten(map, b, find_phi(map)).whitened_map();
  }
  const auto est = estimate_rip_l2l1(map, o.r, o.samples, g.seed);
  json j = rip_to_json(est);
  j["map"] = o.raw ? "raw" : "whitened";
  if (o.gamma > 0) {
    j["corollary"] = corollary_to_json(check_corollary_scaling(map, o.r, o.gamma, o.samples, g.seed));
  }
  const fs::path dir(g.out);
  write_text(dir / "rip.json", j.dump(2) + "\n");
  write_text(dir / ("rip_ratios_r" + std::to_string(o.r) + ".csv"), ratios_csv(est.ratios));
  std::printf("r=%lld samples=%lld alpha=%.6g delta_hat=%.4f (%s)\n",
              static_cast<long long>(o.r), static_cast<long long>(o.samples), est.alpha,
              est.delta_hat, RipEstimate::bound_note);
  if (j.contains("corollary")) {
    const auto& c = j["corollary"];
    std::printf("corollary gamma=%lld: delta(gamma r)=%.4f <= %lld * delta(2r)=%.4f + %.2f: %s\n",
                static_cast<long long>(o.gamma), c["delta_gamma_r"].get<double>(),
                static_cast<long long>(o.gamma), c["delta_2r"].get<double>(),
                c["slack"].get<double>(), c["holds"].get<bool>() ? "holds" : "violated (warning)");
  }
  return 0;
}

int cmd_rip(const Globals& g, const RipOptions& o) {
  const json inst = load_instance(o.instance);
  return is_complex_instance(inst) ? rip_impl<Complex>(g, inst, o) : rip_impl<Real>(g, inst, o);
}

// --- exp ----------------------------------------------------------------------------

struct ExpOptions {
  std::string name;
  int trials = 0;
  bool large = false;
};

int cmd_exp(const Globals& g, const ExpOptions& o, bool seed_given, bool field_given) {
  ExperimentSpec spec = default_spec(o.name, o.large);
  apply_config(spec, load_config(g));
  if (seed_given) spec.seed = g.seed;
  if (field_given) spec.field = parse_field(g.field);
  if (o.trials > 0) spec.trials = o.trials;
  spec.threads = g.threads;
  spec.out_dir = g.out;
  spec.validate();
  const auto res = run_experiment(spec);
  for (const auto& path : write_outputs(res, spec.out_dir)) {
    std::cout << "wrote " << path.string() << "\n";
  }
  if (res.summary.contains("groups")) {
    for (const auto& grp : res.summary["groups"]) {
      std::printf("n2=%-6lld m=%-5lld %-18s median dist_full=%.3e dist_rank1=%.3e iters=%.0f\n",
                  grp["n2"].get<long long>(), grp["m"].get<long long>(),
                  grp["solver"].get<std::string>().c_str(), grp["median_dist_full"].get<double>(),
                  grp["median_dist_rank1"].get<double>(), grp["median_iters"].get<double>());
    }
  }
  for (const char* key : {"checks", "totals"}) {
    if (res.summary.contains(key)) std::cout << key << ": " << res.summary[key].dump() << "\n";
  }
  if (!res.summary.value("failures", json::array()).empty()) {
    std::cerr << "solver failures: " << res.summary["failures"].dump() << "\n";
  }
  return 0;
}

// --- plot ---------------------------------------------------------------------------

int cmd_plot(const Globals& g, const std::string& csv, std::string title) {
  const auto rows = parse_csv(read_text(csv));
  if (title.empty()) title = fs::path(csv).stem().string();
  const fs::path path = fs::path(g.out) / (fs::path(csv).stem().string() + ".svg");
  write_text(path, render_svg(series_from_rows(rows), title, "m", "median ||X_hat - X*||_F"));
  std::cout << "wrote " << path.string() << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Low-rank PSD matrix sensing laboratory"};
  app.require_subcommand(1);
  app.fallthrough();  // global flags may follow the subcommand
  Globals g;
  auto* seed_opt = app.add_option("--seed", g.seed, "Base seed")->capture_default_str();
  app.add_option("--out", g.out, "Output directory")->capture_default_str();
  app.add_option("--config", g.config, "JSON config file");
  auto* field_opt = app.add_option("--field", g.field, "Scalar field")
                        ->check(CLI::IsMember({"real", "complex"}))
                        ->capture_default_str();
  app.add_option("--threads", g.threads, "Worker threads")->check(CLI::PositiveNumber);

  GenOptions gen;
  auto* gen_cmd = app.add_subcommand("gen", "Generate a sensing map, ground truth and measurements");
  gen_cmd->add_option("--family", gen.family)
      ->check(CLI::IsMember({"wishart", "rank_one_gaussian", "pauli"}))
      ->capture_default_str();
  gen_cmd->add_option("-n", gen.n, "Dimension (ignored for pauli)")->capture_default_str();
  gen_cmd->add_option("-m", gen.m, "Measurements")->capture_default_str();
  gen_cmd->add_option("-q", gen.q, "Qubits (pauli)")->capture_default_str();
  gen_cmd->add_option("-p", gen.p, "Wishart degrees of freedom (default n + 2)");
  gen_cmd->add_option("--sigma2", gen.sigma2, "Wishart variance")->capture_default_str();
  gen_cmd->add_option("-r", gen.r, "Rank of X*")->capture_default_str();
  gen_cmd->add_flag("--normalized", gen.normalized, "Scale X* to unit trace");
  gen_cmd->add_flag("--plus-sign", gen.plus_sign, "Pauli projectors (I + P)/2 only");
  gen_cmd->add_flag("--matrices", gen.matrices, "Embed matrices instead of relying on the seed");

  std::string instance, solver = "pgd_psd";
  auto* solve_cmd = app.add_subcommand("solve", "Run one solver on an instance");
  solve_cmd->add_option("instance", instance, "instance.json from gen")->required();
  solve_cmd->add_option("--solver", solver)
      ->check(CLI::IsMember(solver_names()))
      ->capture_default_str();

  bool whiten_matrices = false;
  auto* whiten_cmd = app.add_subcommand("whiten", "Build the whitening certificate");
  whiten_cmd->add_option("instance", instance)->required();
  whiten_cmd->add_flag("--matrices", whiten_matrices, "Write the whitened M_i");

  RipOptions rip;
  auto* rip_cmd = app.add_subcommand("rip", "Estimate RIP-l2/l1 constants");
  rip_cmd->add_option("instance", rip.instance)->required();
  rip_cmd->add_option("-r", rip.r)->capture_default_str();
  rip_cmd->add_option("--samples", rip.samples)->capture_default_str();
  rip_cmd->add_option("--gamma", rip.gamma, "Also run the scaling check with this gamma");
  rip_cmd->add_flag("--raw", rip.raw, "Use the map as is instead of the whitened map");

  ExpOptions exp;
  auto* exp_cmd = app.add_subcommand("exp", "Run a named experiment");
  exp_cmd->add_option("name", exp.name)->required()->check(CLI::IsMember(experiment_names()));
  exp_cmd->add_option("--trials", exp.trials, "Override the trial count");
  exp_cmd->add_flag("--large", exp.large, "Include the large Pauli rows (slow)");

  std::string csv, title;
  auto* plot_cmd = app.add_subcommand("plot", "Render a result CSV as SVG");
  plot_cmd->add_option("csv", csv)->required();
  plot_cmd->add_option("--title", title);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kInvalidConfig;
  }

  try {
    if (*gen_cmd) return cmd_gen(g, gen);
    if (*solve_cmd) return cmd_solve(g, instance, solver);
    if (*whiten_cmd) return cmd_whiten(g, instance, whiten_matrices);
    if (*rip_cmd) return cmd_rip(g, rip);
    if (*exp_cmd) return cmd_exp(g, exp, seed_opt->count() > 0, field_opt->count() > 0);
    if (*plot_cmd) return cmd_plot(g, csv, title);
  } catch (const InvalidArgument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kInvalidConfig;
  } catch (const json::exception& e) {
    std::cerr << "error: malformed input: " << e.what() << "\n";
    return kInvalidConfig;
  } catch (const NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return kNumericalFailure;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
