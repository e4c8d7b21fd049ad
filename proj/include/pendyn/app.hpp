#pragma once

#include <pendyn/config.hpp>
#include <pendyn/diagnostics.hpp>
#include <pendyn/problems.hpp>

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace pendyn {

enum ExitCode : int { kExitOk = 0, kExitValidation = 1, kExitRuntime = 2 };

struct ValidationResult {
  std::string problem;
  HypothesisReport hypotheses;
  std::optional<OracleResult> oracle;
  std::optional<AnchorCheck> anchor_check;
  /// Set when the oracle failed; empty when it succeeded or is unavailable.
  std::string oracle_error;
  /// Set when no oracle applies to the problem (not a failure).
  std::string oracle_skipped;
  std::vector<std::pair<std::string, PropertyReport>> properties;

  bool pass() const;
};

/// Hypotheses, oracle certificate and sampled operator properties; no integration.
ValidationResult validate_experiment(const ExperimentConfig& cfg);
std::string to_text(const ValidationResult& v);
nlohmann::ordered_json to_json(const ValidationResult& v);

struct RunResult {
  ProblemInstance instance;
  std::optional<OracleResult> oracle;
  TrajectoryRecord record;
  LemmaConstants constants{};
  std::vector<ViolationReport> monitors;
  std::optional<EnergyBoundCheck> energy;
  std::optional<ConvergenceReport> report;
  /// Empty without an anchor.
  std::vector<LyapunovSample> lyapunov;
  std::vector<std::string> notes;
};

/// Integrate and diagnose. Throws IntegrationError when the integrator fails.
RunResult run_experiment(const ExperimentConfig& cfg);

nlohmann::ordered_json diagnostics_json(const ExperimentConfig& cfg, const RunResult& r);

/// trajectory.csv, monitors.csv, ergodic.csv (csv); diagnostics.json,
/// hypotheses.json (json); plotdata/{distance,energy,residual}.tsv (plotdata).
void write_artifacts(const ExperimentConfig& cfg, const RunResult& r, const std::filesystem::path& dir);

struct RunOptions {
  bool force = false;
  std::optional<std::filesystem::path> out;
};

int cmd_validate(const ExperimentConfig& cfg, std::ostream& out);
int cmd_run(const ExperimentConfig& cfg, const RunOptions& opts, std::ostream& out, std::ostream& err);

struct SweepSpec {
  std::string param;
  std::vector<double> values;
  /// final_distance, final_velocity or ergodic_distance
  std::string metric = "final_distance";
  unsigned jobs = 1;
};

struct SweepRow {
  std::size_t index = 0;
  double value = 0.0;
  /// ok, hypothesis-failed or runtime-error
  std::string status;
  std::optional<double> metric;
  std::string verdict;
  std::string message;
};

/// Runs every value (up to spec.jobs at a time); each run writes its
/// artifacts to out_dir/run-NNN. Rows come back in value order.
std::vector<SweepRow> run_sweep(const ExperimentConfig& cfg, const SweepSpec& spec, bool force,
                                const std::filesystem::path& out_dir);

int cmd_sweep(const ExperimentConfig& cfg, const SweepSpec& spec, const RunOptions& opts, std::ostream& out,
              std::ostream& err);

int cmd_gallery(std::ostream& out);

}  // namespace pendyn
