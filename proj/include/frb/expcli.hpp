//==============================================================================
// expcli.hpp
// Experiment drivers behind the `frb` command line. A run reads one JSON config,
// writes manifest.json (status "running") before any result, then its CSV files,
// then rewrites the manifest with status "complete" or "failed".
//
// Config keys (unknown keys anywhere are errors):
//   experiment      covariance | regularity | simulate | energy | convergence | paracontrolled | admissible_scan
//   seed            master seed (default 0); ensemble member m uses Philox path index m
//   ensemble_size   >= 1 (default 1)
//   threads         worker threads (default 1); results do not depend on it
//   output_dir      default "frb_out"
//   solver          {gamma, T, dt, N, equation: burgers|dp, picard_tol, picard_max_iters, s_work}
//   noise           {variant: white|mollified|band_limited|roughened, epsilon, n_band, beta}
//   params          experiment-specific, see the run_* functions
//==============================================================================
#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include <json.hpp>

#include "frb/dynamics.hpp"
#include "frb/noise.hpp"

namespace frb::exp {

using json = nlohmann::ordered_json;

enum class Experiment { Covariance, Regularity, Simulate, Energy, Convergence, Paracontrolled, AdmissibleScan };

std::string to_string(Experiment e);
Experiment experiment_from_string(const std::string& s);

struct ExperimentConfig {
    Experiment experiment = Experiment::Simulate;
    std::uint64_t seed = 0;
    int ensemble_size = 1;
    int threads = 1;
    std::string output_dir = "frb_out";
    SolverConfig solver;
    NoiseConfig noise;  // gamma, dt, n_steps, grid and seed mirror the solver and master seed
    json params = json::object();

    /// Throws Error(Config).
    void validate() const;
};

/// Strict parse: unknown or mistyped keys throw Error(Config). Params are checked against the experiment.
ExperimentConfig config_from_json(const json& j);
/// Full echo including defaults; config_from_json(config_to_json(c)) reproduces c.
json config_to_json(const ExperimentConfig& c);
/// Reads a config file, or a manifest (its "config" member), so manifests replay directly.
ExperimentConfig load_config(const std::filesystem::path& file);

/// FNV-1a 64 of the compact config echo, as 16 hex digits.
std::string config_hash(const ExperimentConfig& c);

/// Dispatches on cfg.experiment. Returns the per-experiment summary (also stored in the manifest).
/// Errors propagate after the manifest is marked failed.
json run_experiment(const ExperimentConfig& cfg);

// Individual drivers; each writes into cfg.output_dir and returns its summary.

/// params: modes [1,4,16], lag_steps [0,1,2,4]. Uses the stationary Y. CSV: covariance.csv, decay.csv.
json run_covariance(const ExperimentConfig& cfg);
/// params: lag_steps [1,2,4,8,16,32,64], temporal true, spatial true. CSV: exponents.csv, blocks.csv, temporal.csv.
json run_regularity(const ExperimentConfig& cfg);
/// params: u0 [[k, re, im], ...]. CSV: runs.csv, trajectory.csv, field.csv.
json run_simulate(const ExperimentConfig& cfg);
/// params: u0, refinements 2, gronwall true. CSV: order.csv, ledger.csv, gronwall.csv.
json run_energy(const ExperimentConfig& cfg);
/// params: u0, rungs 3, zero_noise false. noise.variant must be mollified; noise.epsilon is the first rung.
/// CSV: ladder.csv.
json run_convergence(const ExperimentConfig& cfg);
/// params: u0, regularity true, cross_check false. CSV: runs.csv, exponents.csv.
json run_paracontrolled(const ExperimentConfig& cfg);
/// params: n_band [8,16,32,64,128], zero_noise false. Uses noise.beta. CSV: scan.csv.
json run_admissible_scan(const ExperimentConfig& cfg);

/// u1(t) = int_0^t P(t - s) d_x(X^2)(s) ds.
TimePath first_iterate(const TimePath& X, double gamma);

/// Grid and step used by the admissible scan at band level n_band.
int scan_grid_size(const ExperimentConfig& cfg, int n_band);
double scan_dt(const ExperimentConfig& cfg, int n_band);

}  // namespace frb::exp
