#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "psdsense/io.hpp"
#include "psdsense/solvers.hpp"

namespace psdsense {

/// One named experiment. Fields that do not apply to an experiment are
/// ignored by it; default_spec fills in the desk-scale defaults.
struct ExperimentSpec {
  std::string name;  // fig1, table1, table2, certificate, rip_study
  Family family = Family::rank_one_gaussian;
  Field field = Field::real;
  Eigen::Index n = 15;
  std::vector<Eigen::Index> m_sweep;           // fig1, certificate, rip_study
  std::vector<std::pair<int, Eigen::Index>> grid;  // (q, m) for the Pauli tables
  Eigen::Index r = 1;
  int trials = 5;
  std::uint64_t seed = 0;
  bool normalized = false;
  Eigen::Index wishart_p = 0;  // 0 means n + 2
  std::vector<std::string> solvers;
  SolverConfig solver;

  // certificate / rip_study
  Eigen::Index rip_samples = 500;
  std::vector<Eigen::Index> rip_ranks;
  Eigen::Index gamma = 3;
  Eigen::Index small_m = 30;  // certificate: undersampled least-squares probe

  int threads = 1;
  bool large = false;
  std::filesystem::path out_dir;

  void validate() const;
};

const std::vector<std::string>& experiment_names();

/// Desk-scale defaults; large adds the bigger Pauli rows to the tables.
ExperimentSpec default_spec(const std::string& name, bool large = false);

/// Overrides spec fields from a JSON object; unknown keys are rejected.
void apply_config(ExperimentSpec& spec, const json& config);
/// Same for the "solver" object alone; "auto" and "full" select the defaults.
void apply_solver_config(SolverConfig& cfg, const json& config);
json to_json(const ExperimentSpec& spec);

struct ResultRow {
  std::string experiment;
  Eigen::Index n2 = 0;
  Eigen::Index m = 0;
  std::string solver;
  int trial = 0;
  Real dist_full = 0.0;
  Real dist_rank1 = 0.0;
  int iters = 0;
  Real wall_ms = 0.0;
  std::uint64_t trial_seed = 0;

  // Not part of the CSV; reported in the summary JSON.
  bool converged = false;
  Real final_residual = 0.0;
  Real energy_fraction = 0.0;  // lambda_max(X_hat) / Tr(X_hat)
  int iters_to_1e4 = -1;       // first iteration with residual <= 1e-4
};

/// experiment,n2,m,solver,trial,dist_full,dist_rank1,iters,wall_ms
const char* csv_header();
std::string to_csv(const std::vector<ResultRow>& rows);
std::vector<ResultRow> parse_csv(const std::string& text);
/// The CSV with the wall_ms column removed; equal across reruns of one spec.
std::string strip_wall_time(const std::string& csv);

struct ExperimentResult {
  ExperimentSpec spec;
  std::vector<ResultRow> rows;
  json summary;
  json instances = json::array();  // regeneration record per (grid point, trial)
  std::string svg;                 // fig1 only
  std::vector<std::pair<std::string, std::string>> extra_files;  // name, contents
};

ExperimentResult run_fig1(const ExperimentSpec& spec);
ExperimentResult run_table1(const ExperimentSpec& spec);
ExperimentResult run_table2(const ExperimentSpec& spec);
ExperimentResult run_certificate(const ExperimentSpec& spec);
ExperimentResult run_rip_study(const ExperimentSpec& spec);
ExperimentResult run_experiment(const ExperimentSpec& spec);

/// Writes <name>.csv, <name>_summary.json, <name>.svg (fig1), any extra
/// files and <name>_manifest.json with the spec echo and FNV-1a hashes of
/// every artifact. Returns the written paths.
std::vector<std::filesystem::path> write_outputs(const ExperimentResult& result,
                                                 const std::filesystem::path& dir);

/// Runs fn(0..count-1) on up to `threads` workers. Exceptions are rethrown
/// after all workers finish, lowest index first.
void parallel_for(std::size_t count, int threads, const std::function<void(std::size_t)>& fn);

struct Series {
  std::string name;
  std::vector<double> x;
  std::vector<double> y;
};

/// Line plot with a log-scale y axis. Non-positive y values are clamped to
/// the bottom of the axis.
std::string render_svg(const std::vector<Series>& series, const std::string& title,
                       const std::string& xlabel, const std::string& ylabel);

/// Median dist_full per (solver, m) from a result CSV, one series per solver.
std::vector<Series> series_from_rows(const std::vector<ResultRow>& rows);

}  // namespace psdsense
