#pragma once

#include <pendyn/core.hpp>
#include <pendyn/operators.hpp>

#include <json.hpp>

#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace pendyn {

/// c0 (1 + t)^p, used for λ(t) and β(t).
class PowerSchedule {
 public:
  PowerSchedule(double c0, double p);

  double c0() const noexcept { return c0_; }
  double exponent() const noexcept { return p_; }

  double value(double t) const;
  double derivative(double t) const;

  friend bool operator==(const PowerSchedule&, const PowerSchedule&) = default;

 private:
  double c0_;
  double p_;
};

struct Integrability {
  bool in_l1;
  bool in_l2;
  bool limit_zero;
};

/// Decided from the exponent alone: L¹ iff p < −1, L² iff p < −1/2, → 0 iff p < 0.
Integrability classify_integrability(const PowerSchedule& s);

/// γ(t): constant g0, or g∞ + (g0 − g∞) e^{−ρt}.
class DampingSchedule {
 public:
  static DampingSchedule constant(double g0);
  static DampingSchedule decay_to_floor(double g0, double g_inf, double rate);

  bool is_constant() const noexcept { return rate_ == 0.0; }
  double g0() const noexcept { return g0_; }
  double g_inf() const noexcept { return g_inf_; }
  double rate() const noexcept { return rate_; }

  double value(double t) const;
  double derivative(double t) const;
  /// inf_{t ≥ 0} γ(t)
  double infimum() const;
  /// γ̇ ≤ 0 on [0, ∞)
  bool nonincreasing() const;

  friend bool operator==(const DampingSchedule&, const DampingSchedule&) = default;

 private:
  DampingSchedule(double g0, double g_inf, double rate)
      : g0_(g0), g_inf_(g_inf), rate_(rate) {}

  double g0_;
  double g_inf_;
  double rate_;
};

struct ScheduleSet {
  PowerSchedule lambda;
  PowerSchedule beta;
  DampingSchedule gamma;
  /// Lipschitz constant of B, copied from the map.
  double lipschitz_b = 0.0;
};

struct HypothesisCheck {
  bool pass = false;
  std::string reason;
};

struct HypothesisReport {
  HypothesisCheck h1;
  HypothesisCheck h3_l2_not_l1;
  HypothesisCheck lambda_limit_zero;
  HypothesisCheck limsup_lb;
  HypothesisCheck gamma_floor;
  HypothesisCheck gamma_nonincreasing;
  HypothesisCheck fitz_integrable;

  /// lim λ(t)β(t)
  ExtendedReal lambda_beta_limit = ExtendedReal::finite(0.0);
  /// Exponent of the penalty integrand λ/β (meaningful for quadratic B).
  std::optional<double> fitz_exponent;

  bool all_pass() const;
  /// (name, check) pairs in a fixed order.
  std::vector<std::pair<std::string, const HypothesisCheck*>> entries() const;
  std::vector<std::string> failures() const;
};

HypothesisReport verify_hypotheses(const ScheduleSet& s, const CocoerciveMap& B);

nlohmann::ordered_json to_json(const HypothesisReport& r);
std::string to_text(const HypothesisReport& r);

/// ψ*(p/β) − σ_C(p/β) for B = ∇ψ, ψ = ½(<a,·> − b)². It bounds the Fitzpatrick
/// gap sup_{u∈C} φ_B(u, p/β) − σ_C(p/β) from above since φ_∇ψ ≤ ψ ⊕ ψ*.
/// Equals (s/β)²/2 when p = s·a and +∞ when p ∉ span(a).
ExtendedReal fitz_gap_quadratic(const CocoerciveMap& B, double beta_val, const Vec& p);

struct FitzVerdict {
  bool integrable = false;
  double exponent = 0.0;
  std::string trace;
};

/// Integrability of t ↦ λβ·gap(p/β) = (s²/2)·λ/β, a power with exponent
/// p_λ − p_β. With p given and zero the integrand vanishes.
FitzVerdict fitz_gap_exponent(const ScheduleSet& s, const CocoerciveMap& B,
                              const std::optional<Vec>& p = std::nullopt);

}  // namespace pendyn
