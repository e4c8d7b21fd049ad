#include <pendyn/diagnostics.hpp>

#include <algorithm>
#include <cmath>
#include <limits>

namespace pendyn {

namespace {

const double kNaN = std::numeric_limits<double>::quiet_NaN();

double monitor_tol(const Vec& x, const Vec& v) {
  return 1e-3 * (1.0 + std::sqrt(x.squaredNorm() + v.squaredNorm()));
}

/// sup_u φ_B(u, q/β_val) − σ_C(q/β_val) bounded through ψ*; zero for q = 0.
double penalty_gap(const SystemSpec& spec, double beta_val, const Vec& q) {
  if (q.norm() == 0.0) return 0.0;
  const ExtendedReal g = fitz_gap_quadratic(spec.B(), beta_val, q);
  if (g.is_infinite()) {
    throw Error(ErrorCode::kInvalidArgument, "anchor p is not in ran N_C (gap is +inf)");
  }
  return g.value();
}

/// Three-point first and second derivatives at interior index i of a
/// nonuniform grid.
struct Stencil {
  double w_prev, w_mid, w_next;  // first derivative weights
  double s_prev, s_mid, s_next;  // second derivative weights
};

std::optional<Stencil> stencil(const std::vector<Sample>& s, std::size_t i) {
  const double h1 = s[i].t - s[i - 1].t;
  const double h2 = s[i + 1].t - s[i].t;
  if (!(h1 > 0.0) || !(h2 > 0.0)) return std::nullopt;
  const double den = h1 * h2 * (h1 + h2);
  Stencil st;
  st.w_next = h1 * h1 / den;
  st.w_prev = -h2 * h2 / den;
  st.w_mid = (h2 * h2 - h1 * h1) / den;
  st.s_next = 2.0 * h1 / den;
  st.s_prev = 2.0 * h2 / den;
  st.s_mid = -2.0 * (h1 + h2) / den;
  return st;
}

double half_sq_dist(const Vec& x, const Vec& y) { return 0.5 * (x - y).squaredNorm(); }

/// Pointwise quantities shared by the monitors.
struct Terms {
  double t, lam, beta, gamma;
  Vec x, xd, xdd;
  double h, hd, hdd;
  Vec dx_diff;  // D(x) − D(x*)
  Vec Bx;
  double tol;
};

std::vector<Terms> interior_terms(const SystemSpec& spec, const AnchorPoint& anchor,
                                  const TrajectoryRecord& record) {
  const auto& smp = record.samples;
  if (smp.size() < 3) {
    throw Error(ErrorCode::kInsufficientSamples,
                "lemma monitors need at least 3 consecutive samples, got " + std::to_string(smp.size()));
  }
  const ScheduleSet& s = spec.schedules();
  const Vec dxs = spec.D()(anchor.x_star);
  std::vector<Terms> out;
  out.reserve(smp.size() - 2);
  for (std::size_t i = 1; i + 1 < smp.size(); ++i) {
    const auto st = stencil(smp, i);
    if (!st) continue;
    Terms tm;
    tm.t = smp[i].t;
    tm.lam = s.lambda.value(tm.t);
    tm.beta = s.beta.value(tm.t);
    tm.gamma = s.gamma.value(tm.t);
    tm.x = smp[i].x;
    tm.xd = smp[i].v;
    tm.xdd = st->w_prev * smp[i - 1].v + st->w_mid * smp[i].v + st->w_next * smp[i + 1].v;
    const double hp = half_sq_dist(smp[i - 1].x, anchor.x_star);
    tm.h = half_sq_dist(smp[i].x, anchor.x_star);
    const double hn = half_sq_dist(smp[i + 1].x, anchor.x_star);
    tm.hd = tm.xd.dot(tm.x - anchor.x_star);
    tm.hdd = st->s_prev * hp + st->s_mid * tm.h + st->s_next * hn;
    tm.dx_diff = spec.D()(tm.x) - dxs;
    tm.Bx = spec.B()(tm.x);
    tm.tol = monitor_tol(tm.x, tm.xd);
    out.push_back(std::move(tm));
  }
  return out;
}

void finish(ViolationReport& r) {
  std::size_t bad = 0;
  for (const auto& p : r.points) {
    r.max_violation = std::max(r.max_violation, p.violation);
    if (p.violation > p.tol) ++bad;
  }
  r.violation_fraction = r.points.empty() ? 0.0 : static_cast<double>(bad) / r.points.size();
}

/// λ(1/L − λ)‖D(x) − D(x*)‖², zero whenever the difference vanishes.
double d_coercive_term(double lam, double lipschitz_d, const Vec& dx_diff) {
  const double sq = dx_diff.squaredNorm();
  if (sq == 0.0) return 0.0;
  return lam * (1.0 / lipschitz_d - lam) * sq;
}

bool before_t0(const SystemSpec& spec, double lam_beta) {
  if (spec.B().is_zero()) return false;
  return !(lam_beta < 1.0 / spec.B().lipschitz());
}

bool before_t1(const SystemSpec& spec, const LemmaConstants& k, double lam, double lam_beta) {
  if (before_t0(spec, lam_beta)) return true;
  if (spec.D().is_zero() || spec.D().lipschitz() == 0.0) return false;
  return !(lam <= 1.0 / (k.b * spec.D().lipschitz()));
}

std::vector<double> column_or_empty(const TrajectoryRecord& r, const std::string& name) {
  const auto it = std::find(r.extra_columns.begin(), r.extra_columns.end(), name);
  if (it == r.extra_columns.end()) return {};
  const auto idx = static_cast<std::size_t>(it - r.extra_columns.begin());
  std::vector<double> out;
  out.reserve(r.samples.size());
  for (const auto& s : r.samples) out.push_back(s.extra.at(idx));
  return out;
}

std::vector<double> cumulative_trapezoid(const std::vector<double>& t, const std::vector<double>& f) {
  std::vector<double> out(t.size(), 0.0);
  for (std::size_t i = 1; i < t.size(); ++i) {
    out[i] = out[i - 1] + 0.5 * (t[i] - t[i - 1]) * (f[i] + f[i - 1]);
  }
  return out;
}

double interpolate(const std::vector<double>& t, const std::vector<double>& y, double at) {
  if (at <= t.front()) return y.front();
  if (at >= t.back()) return y.back();
  const auto it = std::upper_bound(t.begin(), t.end(), at);
  const auto j = static_cast<std::size_t>(it - t.begin());
  const double w = (at - t[j - 1]) / (t[j] - t[j - 1]);
  return (1.0 - w) * y[j - 1] + w * y[j];
}

}  // namespace

// ---------------------------------------------------------------------------

AnchorPoint zero_anchor(const SystemSpec& spec, Vec x_star, Vec v, Vec p) {
  return AnchorPoint{std::move(x_star), Vec::Zero(spec.dim()), std::move(v), std::move(p)};
}

bool AnchorCheck::pass() const {
  return in_constraint && v_in_A && p_in_normal_cone && decomposition_residual <= 1e-8;
}

AnchorCheck verify_anchor(const SystemSpec& spec, const AnchorPoint& anchor, double tol) {
  const Index n = spec.dim();
  require_dim(anchor.x_star, n, "anchor x*");
  require_dim(anchor.w, n, "anchor w");
  require_dim(anchor.v, n, "anchor v");
  require_dim(anchor.p, n, "anchor p");
  AnchorCheck c;
  c.in_constraint = spec.constraint_set().contains(anchor.x_star, 1e-9);
  c.v_in_A = graph_member(spec.A(), anchor.x_star, anchor.v, tol);
  c.p_in_normal_cone = c.in_constraint && normal_cone_member(spec.constraint_set(), anchor.x_star, anchor.p);
  c.decomposition_residual = (anchor.v + spec.D()(anchor.x_star) + anchor.p - anchor.w).norm();
  return c;
}

LemmaConstants lemma_constants(double lipschitz_b) {
  require_positive(lipschitz_b, "L_B");
  const double s = 1.0 + lipschitz_b;
  // √(s² + 1) − s written without cancellation
  const double eps0 = 1.0 / (std::sqrt(s * s + 1.0) + s);
  return {eps0, eps0 / (1.0 + eps0), 2.0 * (1.0 + eps0) / eps0,
          (2.0 + 3.0 * eps0) / (4.0 * (1.0 + eps0))};
}

bool remark_inequalities_hold(const LemmaConstants& k, double margin) {
  const double a_max = 1.0 - 1.0 / std::sqrt(2.0);
  const double c_max = 0.75 - std::sqrt(2.0) / 8.0;
  return k.a < a_max - margin && k.c > 0.5 + margin && k.c < c_max - margin;
}

double constants_lipschitz_b(const SystemSpec& spec) {
  return spec.B().lipschitz() > 0.0 ? spec.B().lipschitz() : 1.0;
}

// ---------------------------------------------------------------------------

RunningIntegrals::RunningIntegrals(Index dim, std::optional<Vec> x_star)
    : x_star_(std::move(x_star)), dim_(dim), int_lambda_x_(Vec::Zero(dim)) {
  if (x_star_) require_dim(*x_star_, dim, "RunningIntegrals x*");
}

RunningIntegrals::Point RunningIntegrals::evaluate(const SystemSpec& spec, const SystemState& s) const {
  const ScheduleSet& sch = spec.schedules();
  Point p;
  p.t = s.t;
  p.lambda = sch.lambda.value(s.t);
  p.lambda_x = p.lambda * s.x;
  p.v2 = s.v.squaredNorm();
  const double lb = p.lambda * sch.beta.value(s.t);
  if (spec.B().is_zero()) {
    p.pen_sq = 0.0;
    p.pen_pair = 0.0;
  } else {
    const Vec bx = spec.B()(s.x);
    p.pen_sq = lb * bx.squaredNorm();
    p.pen_pair = x_star_ ? lb * bx.dot(s.x - *x_star_) : 0.0;
  }
  return p;
}

void RunningIntegrals::on_step(const SystemSpec& spec, const SystemState& s) {
  Point cur = evaluate(spec, s);
  require_dim(s.x, dim_, "RunningIntegrals state");
  if (prev_) {
    const double dt = cur.t - prev_->t;
    if (dt < 0.0) throw Error(ErrorCode::kInvalidArgument, "RunningIntegrals: time went backwards");
    int_lambda_ += 0.5 * dt * (cur.lambda + prev_->lambda);
    int_lambda_x_ += 0.5 * dt * (cur.lambda_x + prev_->lambda_x);
    int_v2_ += 0.5 * dt * (cur.v2 + prev_->v2);
    int_pen_sq_ += 0.5 * dt * (cur.pen_sq + prev_->pen_sq);
    int_pen_pair_ += 0.5 * dt * (cur.pen_pair + prev_->pen_pair);
    ++steps_;
  }
  prev_ = std::move(cur);
}

std::vector<std::string> RunningIntegrals::columns() const {
  std::vector<std::string> c = {"int_lambda", "int_v2", "int_lb_Bx2"};
  if (x_star_) c.emplace_back("int_lb_pair");
  for (Index i = 0; i < dim_; ++i) c.push_back("xbar_" + std::to_string(i));
  return c;
}

void RunningIntegrals::append_values(std::vector<double>& out) const {
  out.push_back(int_lambda_);
  out.push_back(int_v2_);
  out.push_back(int_pen_sq_);
  if (x_star_) out.push_back(int_pen_pair_);
  if (int_lambda_ > 0.0) {
    const Vec xb = int_lambda_x_ / int_lambda_;
    for (Index i = 0; i < xb.size(); ++i) out.push_back(xb[i]);
  } else if (prev_) {
    // t = 0: x̃ is defined by continuity as x(0)
    const Vec x0 = prev_->lambda_x / prev_->lambda;
    for (Index i = 0; i < x0.size(); ++i) out.push_back(x0[i]);
  }
}

Vec ergodic_average(const RunningIntegrals& acc) {
  if (!(acc.int_lambda() > 0.0)) {
    throw Error(ErrorCode::kInvalidArgument, "ergodic average undefined: integral of lambda is 0");
  }
  return acc.int_lambda_x() / acc.int_lambda();
}

// ---------------------------------------------------------------------------

std::vector<LyapunovSample> lyapunov_samples(const SystemSpec& spec, const AnchorPoint& anchor,
                                             const TrajectoryRecord& record, const LemmaConstants& k) {
  const auto& smp = record.samples;
  std::vector<LyapunovSample> out;
  out.reserve(smp.size());
  const ScheduleSet& s = spec.schedules();
  for (std::size_t i = 0; i < smp.size(); ++i) {
    const Vec d = smp[i].x - anchor.x_star;
    LyapunovSample ls;
    ls.t = smp[i].t;
    ls.h = 0.5 * d.squaredNorm();
    ls.h_dot = smp[i].v.dot(d);
    ls.h_ddot_fd = kNaN;
    if (i > 0 && i + 1 < smp.size()) {
      if (const auto st = stencil(smp, i)) {
        ls.h_ddot_fd = st->s_prev * half_sq_dist(smp[i - 1].x, anchor.x_star) + st->s_mid * ls.h +
                       st->s_next * half_sq_dist(smp[i + 1].x, anchor.x_star);
      }
    }
    const double g = s.gamma.value(ls.t);
    ls.energy = ls.h_dot + g * ls.h + k.c * g * smp[i].v.squaredNorm();
    ls.residual = stationarity_residual(spec, ls.t, smp[i].x);
    const Vec bx = spec.B()(smp[i].x);
    ls.bx_norm2 = bx.squaredNorm();
    ls.pairing = bx.dot(d);
    out.push_back(ls);
  }
  return out;
}

const char* to_string(LemmaInequality which) {
  switch (which) {
    case LemmaInequality::kBase: return "base";
    case LemmaInequality::kEpsilon: return "epsilon";
    case LemmaInequality::kAfterT0: return "after-t0";
    case LemmaInequality::kAfterT1: return "after-t1";
  }
  return "?";
}

ViolationReport base_monitor(const SystemSpec& spec, const AnchorPoint& anchor,
                             const TrajectoryRecord& record) {
  ViolationReport r;
  r.which = LemmaInequality::kBase;
  r.t_start = 0.0;
  r.threshold_rule = "valid for all t >= 0";
  const auto terms = interior_terms(spec, anchor, record);
  const double ld = spec.D().lipschitz();
  const Vec dv = spec.D()(anchor.x_star) + anchor.v;
  for (const auto& tm : terms) {
    const double lhs = tm.hdd + tm.gamma * tm.hd + d_coercive_term(tm.lam, ld, tm.dx_diff) -
                       tm.xd.squaredNorm();
    const double lb = tm.lam * tm.beta;
    const double rhs = lb * penalty_gap(spec, tm.beta, anchor.p) + tm.lam * tm.lam * dv.squaredNorm() +
                       tm.lam * anchor.w.dot(anchor.x_star - tm.x) + 0.5 * lb * lb * tm.Bx.squaredNorm();
    r.points.push_back({tm.t, lhs, rhs, std::max(0.0, lhs - rhs), tm.tol});
  }
  finish(r);
  return r;
}

ViolationReport lemma_monitor(const SystemSpec& spec, const AnchorPoint& anchor,
                              const LemmaConstants& k, const TrajectoryRecord& record,
                              LemmaInequality mode) {
  if (mode == LemmaInequality::kBase) return base_monitor(spec, anchor, record);
  ViolationReport r;
  r.which = mode;
  const auto terms = interior_terms(spec, anchor, record);
  const double ld = spec.D().lipschitz();
  const double lbip = spec.B().lipschitz();
  const Vec dv = spec.D()(anchor.x_star) + anchor.v;
  const double eps = k.eps0;

  switch (mode) {
    case LemmaInequality::kEpsilon: r.threshold_rule = "valid for all t >= 0 (eps = eps0)"; break;
    case LemmaInequality::kAfterT0: r.threshold_rule = "t0: first sample with lambda*beta < 1/L_B"; break;
    default:
      r.threshold_rule = "t1: first sample with lambda*beta < 1/L_B and lambda <= 1/(b L_D)";
      break;
  }

  bool started = mode == LemmaInequality::kEpsilon;
  if (started) r.t_start = 0.0;
  for (const auto& tm : terms) {
    const double lb = tm.lam * tm.beta;
    if (!started) {
      const bool before = mode == LemmaInequality::kAfterT0 ? before_t0(spec, lb) : before_t1(spec, k, tm.lam, lb);
      if (before) continue;
      started = true;
      r.t_start = tm.t;
    }
    const Vec acc = tm.xdd + tm.gamma * tm.xd;  // ẍ + γẋ
    const Vec d = tm.x - anchor.x_star;
    const double bx2 = tm.Bx.squaredNorm();
    const double pair = tm.Bx.dot(d);
    double lhs = tm.hdd + tm.gamma * tm.hd;
    double rhs = 0.0;
    if (mode == LemmaInequality::kEpsilon) {
      lhs += (1.0 + 2.0 * eps) / (2.0 + 2.0 * eps) * acc.squaredNorm() - tm.xd.squaredNorm() +
             eps * lb / (1.0 + eps) * pair;
      if (bx2 > 0.0) rhs += lb * ((1.0 + eps) / 2.0 * lb - 1.0 / ((1.0 + eps) * lbip)) * bx2;
      const Vec dxv = spec.D()(tm.x) + anchor.v;
      rhs += tm.lam * dxv.dot(anchor.x_star - acc - tm.x);
    } else if (mode == LemmaInequality::kAfterT0) {
      lhs += k.c * acc.squaredNorm() + k.a * lb * (pair + bx2);
      const double dsq = tm.dx_diff.squaredNorm();
      if (dsq > 0.0) rhs += (k.b * tm.lam * tm.lam - tm.lam / ld) * dsq;
      rhs += tm.lam * dv.dot(anchor.x_star - tm.x) + k.b * tm.lam * tm.lam * dv.squaredNorm() +
             tm.xd.squaredNorm();
    } else {
      lhs += k.c * acc.squaredNorm() + k.a * lb * (0.5 * pair + bx2);
      rhs += 0.5 * k.a * lb * penalty_gap(spec, 0.5 * k.a * tm.beta, anchor.p) +
             k.b * tm.lam * tm.lam * dv.squaredNorm() + tm.lam * anchor.w.dot(anchor.x_star - tm.x) +
             tm.xd.squaredNorm();
    }
    r.points.push_back({tm.t, lhs, rhs, std::max(0.0, lhs - rhs), tm.tol});
  }
  r.pre_asymptotic = !started;
  finish(r);
  return r;
}

EnergyBoundCheck energy_bound_check(const SystemSpec& spec, const AnchorPoint& anchor,
                                    const LemmaConstants& k, const TrajectoryRecord& record) {
  EnergyBoundCheck out;
  const auto ly = lyapunov_samples(spec, anchor, record, k);
  const auto& smp = record.samples;
  const ScheduleSet& s = spec.schedules();
  const Vec dv = spec.D()(anchor.x_star) + anchor.v;

  std::size_t i1 = smp.size();
  for (std::size_t i = 0; i < smp.size(); ++i) {
    const double lam = s.lambda.value(smp[i].t);
    if (!before_t1(spec, k, lam, lam * s.beta.value(smp[i].t))) {
      i1 = i;
      break;
    }
  }
  if (i1 == smp.size()) {
    out.pass = true;  // nothing after t₁ to check
    return out;
  }
  out.t1 = smp[i1].t;

  auto integrand = [&](std::size_t i) {
    const double t = smp[i].t;
    const double lam = s.lambda.value(t);
    const double beta = s.beta.value(t);
    return 0.5 * k.a * lam * beta * penalty_gap(spec, 0.5 * k.a * beta, anchor.p) +
           k.b * lam * lam * dv.squaredNorm();
  };

  double base = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i <= i1; ++i) base = std::max(base, ly[i].energy);
  double accumulated = 0.0;
  double running_max = base;
  out.max_excess = -std::numeric_limits<double>::infinity();
  out.max_jump = -std::numeric_limits<double>::infinity();
  double prev_f = integrand(i1);
  bool ok = true;
  for (std::size_t i = i1; i < smp.size(); ++i) {
    const double tol = monitor_tol(smp[i].x, smp[i].v);
    out.tol = std::max(out.tol, tol);
    if (i > i1) {
      const double f = integrand(i);
      accumulated += 0.5 * (smp[i].t - smp[i - 1].t) * (f + prev_f);
      prev_f = f;
      const double jump = ly[i].energy - running_max;
      out.max_jump = std::max(out.max_jump, jump);
      running_max = std::max(running_max, ly[i].energy);
    }
    const double excess = ly[i].energy - (base + accumulated);
    out.max_excess = std::max(out.max_excess, excess);
    if (excess > tol) ok = false;
  }
  if (out.max_jump == -std::numeric_limits<double>::infinity()) out.max_jump = 0.0;
  out.pass = ok;
  return out;
}

// ---------------------------------------------------------------------------

const CauchyCheck* ConvergenceReport::find(const std::string& name) const {
  for (const auto& c : integrals) {
    if (c.name == name) return &c;
  }
  return nullptr;
}

CauchyCheck dyadic_cauchy(const std::string& name, const std::vector<double>& t,
                          const std::vector<double>& running) {
  CauchyCheck c;
  c.name = name;
  if (t.size() < 2 || t.size() != running.size()) {
    throw Error(ErrorCode::kInsufficientSamples, "dyadic Cauchy check needs a sampled running integral");
  }
  const double T = t.back();
  const double i8 = interpolate(t, running, T / 8.0);
  const double i4 = interpolate(t, running, T / 4.0);
  const double i2 = interpolate(t, running, T / 2.0);
  const double i1 = running.back();
  c.increments = {i4 - i8, i2 - i4, i1 - i2};
  c.total = i1;
  const double floor = 1e-14 * (1.0 + std::abs(i1));
  auto shrinks = [&](double prev, double next) { return std::abs(next) <= 0.5 * std::abs(prev) + floor; };
  c.pass = shrinks(c.increments[0], c.increments[1]) && shrinks(c.increments[1], c.increments[2]);
  return c;
}

ConvergenceReport convergence_report(const SystemSpec& spec, const AnchorPoint& anchor,
                                     const TrajectoryRecord& record, const ConvergenceOptions& opts) {
  const auto& smp = record.samples;
  if (smp.size() < 3) {
    throw Error(ErrorCode::kInsufficientSamples, "convergence report needs at least 3 samples");
  }
  ConvergenceReport r;
  r.suppressed = !spec.supported_regime();
  const Sample& last = smp.back();
  r.t_end = last.t;
  r.final_velocity_norm = last.v.norm();
  r.final_h_dot = last.v.dot(last.x - anchor.x_star);
  r.final_distance = (last.x - anchor.x_star).norm();

  std::vector<double> t, dist;
  t.reserve(smp.size());
  for (const auto& s : smp) {
    t.push_back(s.t);
    dist.push_back((s.x - anchor.x_star).norm());
  }
  r.distance_quarter = interpolate(t, dist, r.t_end / 4.0);
  r.distance_half = interpolate(t, dist, r.t_end / 2.0);

  // tail fit of log distance against log(1 + t)
  {
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    std::size_t n = 0, mono = 0, pairs = 0;
    for (std::size_t i = 0; i < smp.size(); ++i) {
      if (t[i] < r.t_end / 2.0) continue;
      if (i > 0 && t[i - 1] >= r.t_end / 2.0) {
        ++pairs;
        if (dist[i] <= dist[i - 1]) ++mono;
      }
      if (dist[i] <= 0.0) continue;
      const double lx = std::log1p(t[i]);
      const double ly = std::log(dist[i]);
      sx += lx;
      sy += ly;
      sxx += lx * lx;
      sxy += lx * ly;
      ++n;
    }
    const double den = n * sxx - sx * sx;
    r.tail_slope = n >= 2 && den != 0.0 ? (n * sxy - sx * sy) / den : 0.0;
    r.tail_monotone_fraction = pairs ? static_cast<double>(mono) / pairs : 1.0;
  }

  // running integrals: from sink columns when present, else trapezoid over samples
  auto running = [&](const std::string& col, auto&& integrand) {
    auto c = column_or_empty(record, col);
    if (!c.empty()) return c;
    std::vector<double> f;
    f.reserve(smp.size());
    for (const auto& s : smp) f.push_back(integrand(s));
    return cumulative_trapezoid(t, f);
  };
  const ScheduleSet& sch = spec.schedules();
  auto v2 = running("int_v2", [](const Sample& s) { return s.v.squaredNorm(); });
  auto pen = running("int_lb_Bx2", [&](const Sample& s) {
    return sch.lambda.value(s.t) * sch.beta.value(s.t) * spec.B()(s.x).squaredNorm();
  });
  auto pair = running("int_lb_pair", [&](const Sample& s) {
    return sch.lambda.value(s.t) * sch.beta.value(s.t) * spec.B()(s.x).dot(s.x - anchor.x_star);
  });
  std::vector<double> acc2(smp.size(), 0.0);
  for (std::size_t i = 1; i + 1 < smp.size(); ++i) {
    if (const auto st = stencil(smp, i)) {
      acc2[i] = (st->w_prev * smp[i - 1].v + st->w_mid * smp[i].v + st->w_next * smp[i + 1].v).squaredNorm();
    }
  }
  if (smp.size() >= 3) {
    acc2.front() = acc2[1];
    acc2.back() = acc2[smp.size() - 2];
  }
  r.integrals.push_back(dyadic_cauchy("int_xdot_sq", t, v2));
  r.integrals.push_back(dyadic_cauchy("int_xddot_fd_sq", t, cumulative_trapezoid(t, acc2)));
  r.integrals.push_back(dyadic_cauchy("int_lb_Bx_sq", t, pen));
  r.integrals.push_back(dyadic_cauchy("int_lb_Bx_pairing", t, pair));

  // ergodic average
  {
    auto il = column_or_empty(record, "int_lambda");
    if (!il.empty() && il.back() > 0.0) {
      Vec xb(spec.dim());
      for (Index i = 0; i < spec.dim(); ++i) {
        xb[i] = column_or_empty(record, "xbar_" + std::to_string(i)).back();
      }
      r.ergodic_distance = (xb - anchor.x_star).norm();
    } else {
      std::vector<double> lam;
      for (const auto& s : smp) lam.push_back(sch.lambda.value(s.t));
      const double den = cumulative_trapezoid(t, lam).back();
      Vec num = Vec::Zero(spec.dim());
      for (std::size_t i = 1; i < smp.size(); ++i) {
        num += 0.5 * (t[i] - t[i - 1]) * (lam[i] * smp[i].x + lam[i - 1] * smp[i - 1].x);
      }
      if (den > 0.0) r.ergodic_distance = (num / den - anchor.x_star).norm();
    }
  }

  r.notes.push_back("finite-horizon evidence only: limits as t -> inf are not certified");
  if (r.suppressed) {
    r.verdict = "suppressed";
    r.notes.push_back("unsupported regime: hypotheses failed, verdicts suppressed");
    return r;
  }
  const bool tail_ok = r.final_distance <= r.distance_half + 1e-12;
  if (r.final_distance <= opts.strong_tol && tail_ok) {
    r.verdict = "strong";
  } else if (r.ergodic_distance && *r.ergodic_distance <= opts.ergodic_tol) {
    r.verdict = "ergodic";
  } else {
    r.verdict = "none";
  }
  return r;
}

// ---------------------------------------------------------------------------

nlohmann::ordered_json to_json(const ConvergenceReport& r) {
  nlohmann::ordered_json j;
  j["verdict"] = r.verdict;
  j["suppressed"] = r.suppressed;
  j["t_end"] = r.t_end;
  j["final_velocity_norm"] = r.final_velocity_norm;
  j["final_h_dot"] = r.final_h_dot;
  j["final_distance"] = r.final_distance;
  j["distance_quarter"] = r.distance_quarter;
  j["distance_half"] = r.distance_half;
  j["ergodic_distance"] = r.ergodic_distance ? nlohmann::ordered_json(*r.ergodic_distance) : nullptr;
  j["tail_slope"] = r.tail_slope;
  j["tail_monotone_fraction"] = r.tail_monotone_fraction;
  auto& arr = j["integrals"] = nlohmann::ordered_json::array();
  for (const auto& c : r.integrals) {
    arr.push_back({{"name", c.name},
                   {"total", c.total},
                   {"increments", {c.increments[0], c.increments[1], c.increments[2]}},
                   {"cauchy_pass", c.pass}});
  }
  j["notes"] = r.notes;
  return j;
}

nlohmann::ordered_json to_json(const ViolationReport& r) {
  nlohmann::ordered_json j;
  j["inequality"] = to_string(r.which);
  j["points"] = r.points.size();
  j["max_violation"] = r.max_violation;
  j["violation_fraction"] = r.violation_fraction;
  j["t_start"] = r.t_start ? nlohmann::ordered_json(*r.t_start) : nullptr;
  j["threshold_rule"] = r.threshold_rule;
  j["pre_asymptotic"] = r.pre_asymptotic;
  return j;
}

nlohmann::ordered_json to_json(const EnergyBoundCheck& r) {
  nlohmann::ordered_json j;
  j["t1"] = r.t1 ? nlohmann::ordered_json(*r.t1) : nullptr;
  j["max_excess"] = r.max_excess;
  j["max_jump"] = r.max_jump;
  j["tol"] = r.tol;
  j["pass"] = r.pass;
  return j;
}

nlohmann::ordered_json to_json(const LemmaConstants& k) {
  return {{"eps0", k.eps0}, {"a", k.a}, {"b", k.b}, {"c", k.c}};
}

}  // namespace pendyn
