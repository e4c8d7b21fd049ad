#include <pendyn/schedules.hpp>

#include <cmath>
#include <sstream>

namespace pendyn {

namespace {

const double kSqrt2 = std::sqrt(2.0);
// γ ≡ √2 is allowed; accept values typed with ~12 digits.
constexpr double kFloorSlack = 1e-12;

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(6);
  os << v;
  return os.str();
}

}  // namespace

PowerSchedule::PowerSchedule(double c0, double p) : c0_(c0), p_(p) {
  require_positive(c0, "schedule scale c0");
  if (!std::isfinite(p)) throw Error(ErrorCode::kInvalidArgument, "schedule exponent must be finite");
}

double PowerSchedule::value(double t) const { return c0_ * std::pow(1.0 + t, p_); }

double PowerSchedule::derivative(double t) const {
  return c0_ * p_ * std::pow(1.0 + t, p_ - 1.0);
}

Integrability classify_integrability(const PowerSchedule& s) {
  const double p = s.exponent();
  return {p < -1.0, p < -0.5, p < 0.0};
}

DampingSchedule DampingSchedule::constant(double g0) {
  require_positive(g0, "damping g0");
  return DampingSchedule(g0, g0, 0.0);
}

DampingSchedule DampingSchedule::decay_to_floor(double g0, double g_inf, double rate) {
  require_positive(g0, "damping g0");
  require_positive(g_inf, "damping g_inf");
  require_positive(rate, "damping rate");
  return DampingSchedule(g0, g_inf, rate);
}

double DampingSchedule::value(double t) const {
  if (rate_ == 0.0) return g0_;
  return g_inf_ + (g0_ - g_inf_) * std::exp(-rate_ * t);
}

double DampingSchedule::derivative(double t) const {
  if (rate_ == 0.0) return 0.0;
  return -rate_ * (g0_ - g_inf_) * std::exp(-rate_ * t);
}

double DampingSchedule::infimum() const { return std::min(g0_, g_inf_); }

bool DampingSchedule::nonincreasing() const { return rate_ == 0.0 || g0_ >= g_inf_; }

// ---------------------------------------------------------------------------

bool HypothesisReport::all_pass() const {
  for (const auto& [name, check] : entries()) {
    if (!check->pass) return false;
  }
  return true;
}

std::vector<std::pair<std::string, const HypothesisCheck*>> HypothesisReport::entries() const {
  return {
      {"h1", &h1},
      {"h3_l2_not_l1", &h3_l2_not_l1},
      {"lambda_limit_zero", &lambda_limit_zero},
      {"limsup_lb", &limsup_lb},
      {"gamma_floor", &gamma_floor},
      {"gamma_nonincreasing", &gamma_nonincreasing},
      {"fitz_integrable", &fitz_integrable},
  };
}

std::vector<std::string> HypothesisReport::failures() const {
  std::vector<std::string> out;
  for (const auto& [name, check] : entries()) {
    if (!check->pass) out.push_back(name);
  }
  return out;
}

HypothesisReport verify_hypotheses(const ScheduleSet& s, const CocoerciveMap& B) {
  HypothesisReport r;
  const double pl = s.lambda.exponent();
  const double pb = s.beta.exponent();

  r.h1.pass = true;
  r.h1.reason = "lambda, beta: c0 (1+t)^p with c0 > 0; gamma: constant or exponential decay; "
                "all positive and continuous on [0, inf)";

  const Integrability li = classify_integrability(s.lambda);
  {
    std::ostringstream os;
    os << "p_lambda = " << fmt(pl) << "; 2 p_lambda = " << fmt(2 * pl)
       << (li.in_l2 ? " < -1: lambda in L2" : " >= -1: lambda not in L2")
       << "; p_lambda" << (li.in_l1 ? " < -1: lambda in L1" : " >= -1: lambda not in L1");
    r.h3_l2_not_l1.pass = li.in_l2 && !li.in_l1;
    r.h3_l2_not_l1.reason = os.str();
  }
  r.lambda_limit_zero.pass = li.limit_zero;
  r.lambda_limit_zero.reason =
      "p_lambda = " + fmt(pl) + (li.limit_zero ? " < 0: lambda -> 0" : " >= 0: lambda does not tend to 0");

  {
    std::ostringstream os;
    const double e = pl + pb;
    const double lb = s.lipschitz_b;
    if (B.is_zero()) {
      r.limsup_lb.pass = true;
      r.lambda_beta_limit = e < 0   ? ExtendedReal::finite(0.0)
                            : e == 0 ? ExtendedReal::finite(s.lambda.c0() * s.beta.c0())
                                     : ExtendedReal::infinity();
      os << "B = 0: the penalty term vanishes and 1/L_B = +inf";
    } else if (e < 0) {
      r.limsup_lb.pass = true;
      r.lambda_beta_limit = ExtendedReal::finite(0.0);
      os << "p_lambda + p_beta = " << fmt(e) << " < 0: lambda*beta -> 0 < 1/L_B = " << fmt(1.0 / lb);
    } else if (e == 0) {
      const double lim = s.lambda.c0() * s.beta.c0();
      r.lambda_beta_limit = ExtendedReal::finite(lim);
      r.limsup_lb.pass = lim < 1.0 / lb;
      os << "p_lambda + p_beta = 0: lambda*beta -> c0_lambda*c0_beta = " << fmt(lim)
         << (r.limsup_lb.pass ? " < " : " >= ") << "1/L_B = " << fmt(1.0 / lb);
    } else {
      r.limsup_lb.pass = false;
      r.lambda_beta_limit = ExtendedReal::infinity();
      os << "p_lambda + p_beta = " << fmt(e) << " > 0: lambda*beta diverges to +inf >= 1/L_B = "
         << fmt(1.0 / lb);
    }
    r.limsup_lb.reason = os.str();
  }

  {
    const double floor = s.gamma.infimum();
    r.gamma_floor.pass = floor >= kSqrt2 - kFloorSlack;
    r.gamma_floor.reason = "inf gamma = " + fmt(floor) +
                           (r.gamma_floor.pass ? " >= sqrt(2)" : " is below sqrt(2) = 1.41421");
  }
  r.gamma_nonincreasing.pass = s.gamma.nonincreasing();
  if (s.gamma.is_constant()) {
    r.gamma_nonincreasing.reason = "gamma constant: derivative 0";
  } else {
    r.gamma_nonincreasing.reason =
        "gamma' = -rate (g0 - g_inf) e^{-rate t}; g0 = " + fmt(s.gamma.g0()) +
        (r.gamma_nonincreasing.pass ? " >= " : " < ") + "g_inf = " + fmt(s.gamma.g_inf());
  }

  try {
    const FitzVerdict fv = fitz_gap_exponent(s, B);
    r.fitz_integrable.pass = fv.integrable;
    r.fitz_integrable.reason = fv.trace;
    if (!B.is_zero()) r.fitz_exponent = fv.exponent;
  } catch (const Error& e) {
    r.fitz_integrable.pass = false;
    r.fitz_integrable.reason = e.what();
  }
  return r;
}

nlohmann::ordered_json to_json(const HypothesisReport& r) {
  nlohmann::ordered_json j;
  for (const auto& [name, check] : r.entries()) {
    j[name] = {{"pass", check->pass}, {"reason", check->reason}};
  }
  j["lambda_beta_limit"] = r.lambda_beta_limit.is_finite()
                               ? nlohmann::ordered_json(r.lambda_beta_limit.value())
                               : nlohmann::ordered_json("+inf");
  if (r.fitz_exponent) {
    j["fitz_exponent"] = *r.fitz_exponent;
  } else {
    j["fitz_exponent"] = nullptr;
  }
  j["all_pass"] = r.all_pass();
  return j;
}

std::string to_text(const HypothesisReport& r) {
  std::ostringstream os;
  os << "hypotheses\n";
  for (const auto& [name, check] : r.entries()) {
    os << "  " << (check->pass ? "PASS" : "FAIL") << "  ";
    os << name;
    for (std::size_t k = name.size(); k < 20; ++k) os << ' ';
    os << check->reason << '\n';
  }
  os << "  lim lambda*beta = " << to_string(r.lambda_beta_limit) << '\n';
  return os.str();
}

// ---------------------------------------------------------------------------

ExtendedReal fitz_gap_quadratic(const CocoerciveMap& B, double beta_val, const Vec& p) {
  const auto* q = std::get_if<CocoerciveMap::QuadraticPenalty>(&B.kind());
  if (!q) {
    throw Error(ErrorCode::kUnsupported,
                "closed-form Fitzpatrick gap needs a gradient-quadratic-penalty map, got " + B.name());
  }
  require_positive(beta_val, "beta value");
  require_dim(p, B.dim(), "fitz_gap_quadratic p");
  const double s = q->a.dot(p) / q->a.squaredNorm();
  if ((p - s * q->a).norm() > 1e-9) return ExtendedReal::infinity();
  const double u = s / beta_val;
  return ExtendedReal::finite(0.5 * u * u);
}

FitzVerdict fitz_gap_exponent(const ScheduleSet& s, const CocoerciveMap& B,
                              const std::optional<Vec>& p) {
  FitzVerdict v;
  const double pl = s.lambda.exponent();
  const double pb = s.beta.exponent();
  v.exponent = pl - pb;
  if (B.is_zero()) {
    v.integrable = true;
    v.trace = "B = 0: C = H, ran N_C = {0}, integrand identically 0";
    return v;
  }
  if (!std::holds_alternative<CocoerciveMap::QuadraticPenalty>(B.kind())) {
    throw Error(ErrorCode::kUnsupported,
                "Fitzpatrick integrability is decided only for gradient-quadratic-penalty maps, got " +
                    B.name());
  }
  if (p && p->norm() == 0.0) {
    v.integrable = true;
    v.trace = "p = 0: integrand identically 0";
    return v;
  }
  std::ostringstream os;
  os << "integrand (s^2/2) lambda/beta has exponent p_lambda - p_beta = " << fmt(pl) << " - ("
     << fmt(pb) << ") = " << fmt(v.exponent);
  v.integrable = v.exponent < -1.0;
  os << (v.integrable ? " < -1: integrable" : " >= -1: not integrable");
  v.trace = os.str();
  return v;
}

}  // namespace pendyn
