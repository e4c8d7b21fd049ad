#pragma once

#include <pendyn/core.hpp>
#include <pendyn/diagnostics.hpp>
#include <pendyn/dynamics.hpp>

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace pendyn {

enum class OracleMethod { kAffineKkt, kGridRefinement };

const char* to_string(OracleMethod m);

struct ProblemInstance {
  std::string name;
  std::string description;
  SystemSpec spec;
  OracleMethod oracle = OracleMethod::kAffineKkt;
  /// A strongly monotone with modulus `modulus`.
  bool strongly_monotone = false;
  double modulus = 0.0;
  /// Known limit of the trajectory; anchors the oracle when zeros are not unique.
  std::optional<Vec> known_limit;
};

struct OracleResult {
  AnchorPoint anchor;
  OracleMethod method = OracleMethod::kAffineKkt;
  bool unique = true;
  std::vector<std::string> notes;
  /// Grid refinement only: levels used and the last objective gap between levels.
  int levels = 0;
  double level_gap = 0.0;
};

/// λ = (1+t)^-0.75, β = (1+t)^0.5, γ ≡ √2.
ScheduleSet default_schedules();

/// A = ∂f, D = ∇g, B = ∇ψ. When `C` is given it must equal zer ∇ψ (kPairing).
ProblemInstance build_bilevel_quadratic(std::string name, ProxDescriptor f, CocoerciveMap g,
                                        CocoerciveMap psi, ScheduleSet schedules, Vec u0, Vec v0,
                                        std::optional<ConstraintSet> C = std::nullopt);

/// Joint stationarity + feasibility solve for affine data:
///   [M  Eᵀ] [x]   [−q]
///   [E  0 ] [μ] = [ e]
/// with A + D = x ↦ Mx + q and C = {Ex = e}. A singular system yields the
/// solution closest to u0 and is flagged non-unique. Throws kUnsupported for
/// non-affine data, kOracleFailure for an inconsistent system.
OracleResult affine_kkt_oracle(const SystemSpec& spec);

struct GridOptions {
  int points_per_axis = 21;
  double initial_half_width = 10.0;
  double gap_tol = 1e-10;
  double width_tol = 1e-9;
  int max_levels = 40;
};

/// Nested-grid minimization of f + g over C in two dimensions (C a line or
/// the whole plane), with each level 10× finer around the previous argmin.
/// The certificate (v, p) is recovered from first-order conditions at the
/// grid minimizer.
OracleResult grid_refinement_oracle(const SystemSpec& spec, const GridOptions& opts = {});

/// Oracle of the instance's preferred method; the certificate is checked with
/// verify_anchor at 1e-8 (kOracleFailure otherwise). For non-unique zeros the
/// anchor moves to the instance's known limit when it has one.
OracleResult kkt_oracle(const ProblemInstance& inst);

/// The two-dimensional gallery:
///   min-norm-on-line, strongly-monotone-projection, l1-on-line,
///   affine-inclusion, unconstrained-forward-backward, feasibility-on-line,
///   trivial (A = D = B = 0, u0 = (1, 0), v0 = (0, 1)).
std::vector<ProblemInstance> gallery(const ScheduleSet& schedules = default_schedules());

/// Throws kInvalidArgument listing the known names.
ProblemInstance find_instance(const std::string& name, const ScheduleSet& schedules = default_schedules());

/// Random n-dimensional counterparts of the affine-KKT instances (names get a
/// "-n<dim>" suffix).
std::vector<ProblemInstance> scaled_gallery(Index n, std::uint64_t seed,
                                            const ScheduleSet& schedules = default_schedules());

}  // namespace pendyn
