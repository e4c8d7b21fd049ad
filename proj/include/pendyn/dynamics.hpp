#pragma once

#include <pendyn/core.hpp>
#include <pendyn/operators.hpp>
#include <pendyn/schedules.hpp>

#include <cstddef>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace pendyn {

struct SystemState {
  double t = 0.0;
  Vec x;  // position
  Vec v;  // velocity
};

/// ẍ + γ(t)ẋ + x = J_{λ(t)A}(x − λ(t)D(x) − λ(t)β(t)B(x)),  x(0) = u0, ẋ(0) = v0.
class SystemSpec {
 public:
  SystemSpec(ResolventOperator A, CocoerciveMap D, CocoerciveMap B, ScheduleSet schedules,
             Vec u0, Vec v0);

  const ResolventOperator& A() const noexcept { return A_; }
  const CocoerciveMap& D() const noexcept { return D_; }
  const CocoerciveMap& B() const noexcept { return B_; }
  const ScheduleSet& schedules() const noexcept { return schedules_; }
  const Vec& u0() const noexcept { return u0_; }
  const Vec& v0() const noexcept { return v0_; }
  Index dim() const noexcept { return A_.dim(); }

  /// C = zer B
  const ConstraintSet& constraint_set() const noexcept { return C_; }
  const HypothesisReport& hypotheses() const noexcept { return hypotheses_; }
  /// False when any hypothesis fails; integration is still allowed.
  bool supported_regime() const noexcept { return hypotheses_.all_pass(); }

  SystemSpec with_initial(Vec u0, Vec v0) const;
  SystemSpec with_schedules(ScheduleSet s) const;

 private:
  ResolventOperator A_;
  CocoerciveMap D_;
  CocoerciveMap B_;
  ScheduleSet schedules_;
  Vec u0_;
  Vec v0_;
  ConstraintSet C_;
  HypothesisReport hypotheses_;
};

/// Forward-backward point u − λD(u) − λβB(u) fed to the resolvent.
Vec forward_point(const SystemSpec& spec, double t, const Vec& u);

/// F(t, u, v) = (v, −γv − u + J_{λA}(u − λD(u) − λβB(u))). One resolvent call.
std::pair<Vec, Vec> rhs(const SystemSpec& spec, double t, const Vec& u, const Vec& v);

/// L(t) = √5 + 2γ + √2(1 + λL_D + λβL_B), the Lipschitz constant of F(t, ·).
double lipschitz_bound(const SystemSpec& spec, double t);

/// ‖x − J_{λA}(x − λD(x) − λβB(x))‖
double stationarity_residual(const SystemSpec& spec, double t, const Vec& x);

/// Classical RK4 step; throws kNonFinite carrying the starting state.
SystemState step_rk4(const SystemSpec& spec, const SystemState& s, double dt);

enum class StepMode { kFixed, kAdaptive };

struct IntegratorConfig {
  StepMode mode = StepMode::kFixed;
  /// Fixed step, or the initial trial step in adaptive mode.
  double dt = 1e-3;
  double rel_tol = 1e-8;
  double abs_tol = 1e-8;
  double t_end = 1.0;
  /// Store every sample_stride-th accepted step (plus the initial and final states).
  std::size_t sample_stride = 1;
  double max_dt = 10.0;
  double min_dt = 1e-12;
};

void validate(const IntegratorConfig& cfg);

/// Receives the initial state and every accepted step.
class StepSink {
 public:
  virtual ~StepSink() = default;
  virtual void on_step(const SystemSpec& spec, const SystemState& s) = 0;
  /// Extra columns appended to each stored sample.
  virtual std::vector<std::string> columns() const { return {}; }
  virtual void append_values(std::vector<double>& out) const { (void)out; }
};

struct Sample {
  double t = 0.0;
  Vec x;
  Vec v;
  std::vector<double> extra;
};

struct IntegrationStats {
  std::size_t accepted = 0;
  std::size_t rejected = 0;
  std::size_t rhs_evaluations = 0;
  double smallest_step = 0.0;
  double largest_step = 0.0;
};

struct TrajectoryRecord {
  Index dim = 0;
  std::vector<std::string> extra_columns;
  std::vector<Sample> samples;
  IntegrationStats stats;
  std::vector<std::string> warnings;

  const Sample& final_sample() const { return samples.back(); }
};

/// Failure during integration; carries everything produced before it.
class IntegrationError : public Error {
 public:
  IntegrationError(ErrorCode code, const std::string& what, SystemState last_good,
                   TrajectoryRecord partial)
      : Error(code, what), last_good_(std::move(last_good)), partial_(std::move(partial)) {}

  const SystemState& last_good() const noexcept { return last_good_; }
  const TrajectoryRecord& partial() const noexcept { return partial_; }

 private:
  SystemState last_good_;
  TrajectoryRecord partial_;
};

/// Integrates from (0, u0, v0) to t_end.
///
/// Adaptive mode uses step doubling: one RK4 step of size h against two of
/// size h/2, per-component tolerance abs_tol + rel_tol·|y_i| on the Richardson
/// estimate |y_half − y_full| / 15. Rejected steps halve h and reuse the first
/// half step as the next full step, so rhs_evaluations = 12·accepted + 8·rejected.
/// Fixed mode uses 4 evaluations per step.
TrajectoryRecord integrate(const SystemSpec& spec, const IntegratorConfig& cfg,
                           std::span<StepSink* const> sinks = {});

}  // namespace pendyn
