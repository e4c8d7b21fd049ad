#pragma once

#include <pendyn/core.hpp>
#include <pendyn/dynamics.hpp>

#include <json.hpp>

#include <array>
#include <optional>
#include <string>
#include <vector>

namespace pendyn {

/// A point of gr(A + D + N_C): w = v + D(x*) + p with v ∈ A(x*), p ∈ N_C(x*).
struct AnchorPoint {
  Vec x_star;
  Vec w;
  Vec v;
  Vec p;
};

/// Anchor with w = 0, so x* is a zero of A + D + N_C.
AnchorPoint zero_anchor(const SystemSpec& spec, Vec x_star, Vec v, Vec p);

struct AnchorCheck {
  bool in_constraint = false;
  bool v_in_A = false;
  bool p_in_normal_cone = false;
  double decomposition_residual = 0.0;  // ‖v + D(x*) + p − w‖
  bool pass() const;
};

AnchorCheck verify_anchor(const SystemSpec& spec, const AnchorPoint& anchor, double tol = 1e-8);

struct LemmaConstants {
  double eps0;
  double a;
  double b;
  double c;
};

/// ε₀ = √((1+L_B)² + 1) − (1 + L_B); a = ε₀/(1+ε₀); b = 2(1+ε₀)/ε₀;
/// c = (2 + 3ε₀)/(4(1+ε₀)).
LemmaConstants lemma_constants(double lipschitz_b);

/// a < 1 − 1/√2 and 1/2 < c < 3/4 − √2/8, strictly by `margin`.
bool remark_inequalities_hold(const LemmaConstants& k, double margin = 1e-12);

/// L_B used for the constants; B ≡ 0 is 1/L-cocoercive for every L > 0, so 1 stands in.
double constants_lipschitz_b(const SystemSpec& spec);

// ---------------------------------------------------------------------------
// Running integrals on the accepted-step grid
// ---------------------------------------------------------------------------

/// Trapezoid accumulation of ∫λ, ∫λx, ∫‖ẋ‖², ∫λβ‖Bx‖² and, given an anchor,
/// ∫λβ<Bx, x − x*>.
class RunningIntegrals : public StepSink {
 public:
  /// Throws kDimensionMismatch when x_star is not in R^dim.
  explicit RunningIntegrals(Index dim, std::optional<Vec> x_star = std::nullopt);

  void on_step(const SystemSpec& spec, const SystemState& s) override;
  std::vector<std::string> columns() const override;
  void append_values(std::vector<double>& out) const override;

  double int_lambda() const noexcept { return int_lambda_; }
  const Vec& int_lambda_x() const noexcept { return int_lambda_x_; }
  double int_velocity_sq() const noexcept { return int_v2_; }
  double int_penalty_sq() const noexcept { return int_pen_sq_; }
  double int_penalty_pairing() const noexcept { return int_pen_pair_; }
  std::size_t steps() const noexcept { return steps_; }
  Index dim() const noexcept { return dim_; }

 private:
  struct Point {
    double t;
    double lambda;
    Vec lambda_x;
    double v2;
    double pen_sq;
    double pen_pair;
  };
  Point evaluate(const SystemSpec& spec, const SystemState& s) const;

  std::optional<Vec> x_star_;
  std::optional<Point> prev_;
  Index dim_ = 0;
  std::size_t steps_ = 0;
  double int_lambda_ = 0.0;
  Vec int_lambda_x_;
  double int_v2_ = 0.0;
  double int_pen_sq_ = 0.0;
  double int_pen_pair_ = 0.0;
};

/// x̃(t) = ∫λx / ∫λ. Throws kInvalidArgument while ∫λ = 0.
Vec ergodic_average(const RunningIntegrals& acc);

// ---------------------------------------------------------------------------
// Lyapunov quantities and lemma monitors
// ---------------------------------------------------------------------------

struct LyapunovSample {
  double t;
  double h;          // ½‖x − x*‖²
  double h_dot;      // <ẋ, x − x*>
  double h_ddot_fd;  // finite difference of h (NaN at the endpoints)
  double energy;     // ḣ + γh + cγ‖ẋ‖²
  double residual;
  double bx_norm2;   // ‖B(x)‖²
  double pairing;    // <B(x), x − x*>
};

/// One entry per stored sample. Derivatives use three-point differences on the
/// (possibly nonuniform) sample grid.
std::vector<LyapunovSample> lyapunov_samples(const SystemSpec& spec, const AnchorPoint& anchor,
                                             const TrajectoryRecord& record,
                                             const LemmaConstants& k);

enum class LemmaInequality { kBase, kEpsilon, kAfterT0, kAfterT1 };

const char* to_string(LemmaInequality which);

struct MonitorPoint {
  double t;
  double lhs;
  double rhs;
  double violation;  // max(0, lhs − rhs)
  double tol;        // 1e-3 (1 + ‖(x, ẋ)‖)
};

struct ViolationReport {
  LemmaInequality which = LemmaInequality::kBase;
  std::vector<MonitorPoint> points;
  double max_violation = 0.0;
  /// Share of evaluated points with violation > tol.
  double violation_fraction = 0.0;
  /// Start of the validity window (0 for the base and epsilon forms).
  std::optional<double> t_start;
  std::string threshold_rule;
  /// The whole record lies before the validity window.
  bool pre_asymptotic = false;
};

/// Inequality on h, ḣ, ḧ valid for every t ≥ 0 along the trajectory.
ViolationReport base_monitor(const SystemSpec& spec, const AnchorPoint& anchor,
                             const TrajectoryRecord& record);

/// Epsilon form with ε = ε₀ for all t, the (a, b, c) form from t₀ (first sample
/// with λβ < 1/L_B), or the energy form from t₁ (additionally λ ≤ 1/(b L_D)).
ViolationReport lemma_monitor(const SystemSpec& spec, const AnchorPoint& anchor,
                              const LemmaConstants& k, const TrajectoryRecord& record,
                              LemmaInequality mode = LemmaInequality::kAfterT1);

struct EnergyBoundCheck {
  std::optional<double> t1;
  /// max over t ≥ t₁ of E(t) − [max_{s ≤ t₁} E(s) + ∫_{t₁}^t (penalty gap + bλ²‖Dx*+v‖²)].
  double max_excess = 0.0;
  /// max over t ≥ t₁ of E(t) − max_{t₁ ≤ s < t} E(s)
  double max_jump = 0.0;
  double tol = 0.0;
  bool pass = false;
};

EnergyBoundCheck energy_bound_check(const SystemSpec& spec, const AnchorPoint& anchor,
                                    const LemmaConstants& k, const TrajectoryRecord& record);

// ---------------------------------------------------------------------------
// Convergence report
// ---------------------------------------------------------------------------

struct CauchyCheck {
  std::string name;
  /// Increments over [T/8, T/4], [T/4, T/2], [T/2, T].
  std::array<double, 3> increments{};
  double total = 0.0;
  bool pass = false;
};

struct ConvergenceOptions {
  double strong_tol = 1e-2;
  double ergodic_tol = 6e-2;
};

struct ConvergenceReport {
  bool suppressed = false;
  double t_end = 0.0;
  double final_velocity_norm = 0.0;
  double final_h_dot = 0.0;
  double final_distance = 0.0;
  std::optional<double> ergodic_distance;
  double distance_quarter = 0.0;  // ‖x(T/4) − x*‖
  double distance_half = 0.0;
  double tail_slope = 0.0;        // d log‖x − x*‖ / d log t over [T/2, T]
  double tail_monotone_fraction = 0.0;
  std::vector<CauchyCheck> integrals;
  std::string verdict;
  std::vector<std::string> notes;

  const CauchyCheck* find(const std::string& name) const;
};

/// Dyadic-window Cauchy test: each increment ≤ half the previous one (up to a
/// round-off floor).
CauchyCheck dyadic_cauchy(const std::string& name, const std::vector<double>& t,
                          const std::vector<double>& running);

ConvergenceReport convergence_report(const SystemSpec& spec, const AnchorPoint& anchor,
                                     const TrajectoryRecord& record,
                                     const ConvergenceOptions& opts = {});

nlohmann::ordered_json to_json(const ConvergenceReport& r);
nlohmann::ordered_json to_json(const ViolationReport& r);
nlohmann::ordered_json to_json(const EnergyBoundCheck& r);
nlohmann::ordered_json to_json(const LemmaConstants& k);

}  // namespace pendyn
