#pragma once

#include <pendyn/diagnostics.hpp>
#include <pendyn/dynamics.hpp>
#include <pendyn/problems.hpp>
#include <pendyn/schedules.hpp>

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <optional>
#include <set>
#include <string>

namespace pendyn {

/// Config problems: kParse for malformed text (with line/column), kInvalidArgument
/// for schema violations (with the offending key path).
class ConfigError : public Error {
 public:
  using Error::Error;
};

struct OutputConfig {
  std::filesystem::path directory = "out";
  /// Subset of {"csv", "json", "plotdata"}.
  std::set<std::string> formats = {"csv", "json", "plotdata"};
};

/// Experiment description. Schema (unknown keys are rejected everywhere):
///
///   problem:    {name: gallery name, u0?: [..], v0?: [..]}
///               | {components: {A, D, B, u0, v0, C?}}
///   schedules:  {lambda: {family: "power", c0, p}, beta: {...},
///                gamma: {kind: "constant", g0} | {kind: "decay-to-floor", g0, g_inf, rate}}
///   integrator: {mode: "fixed" | "adaptive", dt, rel_tol?, abs_tol?, t_end,
///                sample_stride?, max_dt?}
///   outputs?:   {directory?, formats?: [..]}
///   verdict?:   {strong_tol?, ergodic_tol?}
///   seed?:      nonnegative integer
///
/// Numbers may be written as the string "sqrt2".
struct ExperimentConfig {
  std::string problem_name;             // "custom" for inline components
  nlohmann::json components;            // inline components, null for gallery problems
  std::optional<Vec> u0;
  std::optional<Vec> v0;
  ScheduleSet schedules;
  IntegratorConfig integrator;
  OutputConfig outputs;
  ConvergenceOptions verdict;
  std::uint64_t seed = 0;
};

ExperimentConfig parse_config(const std::string& text);
ExperimentConfig load_config(const std::filesystem::path& path);

/// Builds the problem with the config's schedules and initial data.
ProblemInstance build_instance(const ExperimentConfig& cfg);

/// Overrides one scalar by dotted name: lambda.c0, lambda.p, beta.c0, beta.p,
/// gamma.g0, gamma.floor, gamma.rate, integrator.t_end, integrator.dt,
/// integrator.rel_tol, integrator.abs_tol.
void apply_override(ExperimentConfig& cfg, const std::string& param, double value);

/// Parses a number or "sqrt2".
double parse_scalar(const std::string& text);

nlohmann::ordered_json to_json(const ExperimentConfig& cfg);

}  // namespace pendyn
