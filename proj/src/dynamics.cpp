#include <pendyn/dynamics.hpp>

#include <algorithm>
#include <cmath>
#include <optional>
#include <sstream>

namespace pendyn {

namespace {

const double kSqrt2 = std::sqrt(2.0);
const double kSqrt5 = std::sqrt(5.0);

void check_output(const Vec& w, const char* block, double t) {
  for (Index i = 0; i < w.size(); ++i) {
    if (!std::isfinite(w[i])) {
      std::ostringstream os;
      os << "rhs produced a non-finite value in " << block << " component " << i << " at t = " << t;
      throw Error(ErrorCode::kNonFinite, os.str());
    }
  }
}

}  // namespace

SystemSpec::SystemSpec(ResolventOperator A, CocoerciveMap D, CocoerciveMap B,
                       ScheduleSet schedules, Vec u0, Vec v0)
    : A_(std::move(A)),
      D_(std::move(D)),
      B_(std::move(B)),
      schedules_(std::move(schedules)),
      u0_(std::move(u0)),
      v0_(std::move(v0)),
      C_(B_.zero_set()) {
  const Index n = A_.dim();
  if (D_.dim() != n || B_.dim() != n) {
    throw Error(ErrorCode::kDimensionMismatch, "A, D and B must share one dimension");
  }
  require_dim(u0_, n, "u0");
  require_dim(v0_, n, "v0");
  require_finite(u0_, "u0");
  require_finite(v0_, "v0");
  schedules_.lipschitz_b = B_.lipschitz();
  hypotheses_ = verify_hypotheses(schedules_, B_);
}

SystemSpec SystemSpec::with_initial(Vec u0, Vec v0) const {
  return SystemSpec(A_, D_, B_, schedules_, std::move(u0), std::move(v0));
}

SystemSpec SystemSpec::with_schedules(ScheduleSet s) const {
  return SystemSpec(A_, D_, B_, std::move(s), u0_, v0_);
}

Vec forward_point(const SystemSpec& spec, double t, const Vec& u) {
  const ScheduleSet& s = spec.schedules();
  const double lam = s.lambda.value(t);
  Vec z = u;
  if (!spec.D().is_zero()) z -= lam * spec.D()(u);
  if (!spec.B().is_zero()) z -= lam * s.beta.value(t) * spec.B()(u);
  return z;
}

std::pair<Vec, Vec> rhs(const SystemSpec& spec, double t, const Vec& u, const Vec& v) {
  if (t < 0.0) throw Error(ErrorCode::kInvalidArgument, "rhs: t must be >= 0");
  require_dim(u, spec.dim(), "rhs position");
  require_dim(v, spec.dim(), "rhs velocity");
  const ScheduleSet& s = spec.schedules();
  const Vec z = forward_point(spec, t, u);
  check_output(z, "forward point", t);
  Vec acc = -s.gamma.value(t) * v - u + resolvent(spec.A(), s.lambda.value(t), z);
  check_output(v, "position derivative", t);
  check_output(acc, "velocity derivative", t);
  return {v, std::move(acc)};
}

double lipschitz_bound(const SystemSpec& spec, double t) {
  const ScheduleSet& s = spec.schedules();
  const double lam = s.lambda.value(t);
  return kSqrt5 + 2.0 * s.gamma.value(t) +
         kSqrt2 * (1.0 + lam * spec.D().lipschitz() + lam * s.beta.value(t) * spec.B().lipschitz());
}

double stationarity_residual(const SystemSpec& spec, double t, const Vec& x) {
  require_dim(x, spec.dim(), "stationarity_residual point");
  const double lam = spec.schedules().lambda.value(t);
  return (x - resolvent(spec.A(), lam, forward_point(spec, t, x))).norm();
}

SystemState step_rk4(const SystemSpec& spec, const SystemState& s, double dt) {
  if (!(dt > 0.0)) throw Error(ErrorCode::kInvalidArgument, "step_rk4: dt must be positive");
  const double h2 = 0.5 * dt;
  const auto [k1x, k1v] = rhs(spec, s.t, s.x, s.v);
  const auto [k2x, k2v] = rhs(spec, s.t + h2, s.x + h2 * k1x, s.v + h2 * k1v);
  const auto [k3x, k3v] = rhs(spec, s.t + h2, s.x + h2 * k2x, s.v + h2 * k2v);
  const auto [k4x, k4v] = rhs(spec, s.t + dt, s.x + dt * k3x, s.v + dt * k3v);
  SystemState out;
  out.t = s.t + dt;
  out.x = s.x + (dt / 6.0) * (k1x + 2.0 * k2x + 2.0 * k3x + k4x);
  out.v = s.v + (dt / 6.0) * (k1v + 2.0 * k2v + 2.0 * k3v + k4v);
  if (!out.x.allFinite() || !out.v.allFinite()) {
    std::ostringstream os;
    os << "RK4 step from t = " << s.t << " with dt = " << dt << " produced a non-finite state";
    throw Error(ErrorCode::kNonFinite, os.str());
  }
  return out;
}

void validate(const IntegratorConfig& cfg) {
  if (!(cfg.t_end >= 0.0) || !std::isfinite(cfg.t_end)) {
    throw Error(ErrorCode::kInvalidArgument, "t_end must be finite and >= 0");
  }
  require_positive(cfg.dt, "integrator dt");
  if (cfg.mode == StepMode::kAdaptive) {
    require_positive(cfg.rel_tol, "integrator rel_tol");
    require_positive(cfg.abs_tol, "integrator abs_tol");
  }
  if (cfg.sample_stride < 1) throw Error(ErrorCode::kInvalidArgument, "sample_stride must be >= 1");
  require_positive(cfg.max_dt, "integrator max_dt");
  require_positive(cfg.min_dt, "integrator min_dt");
}

namespace {

class Recorder {
 public:
  Recorder(const SystemSpec& spec, const IntegratorConfig& cfg, std::span<StepSink* const> sinks)
      : spec_(spec), stride_(cfg.sample_stride), sinks_(sinks) {
    record_.dim = spec.dim();
    for (const StepSink* s : sinks_) {
      for (auto& c : s->columns()) record_.extra_columns.push_back(std::move(c));
    }
  }

  void initial(const SystemState& s) {
    offer(s);
    store(s);
  }

  void accepted(const SystemState& s, double h, bool last) {
    IntegrationStats& st = record_.stats;
    ++st.accepted;
    st.smallest_step = st.accepted == 1 ? h : std::min(st.smallest_step, h);
    st.largest_step = std::max(st.largest_step, h);
    offer(s);
    if (last || st.accepted % stride_ == 0) store(s);
  }

  TrajectoryRecord& record() { return record_; }

 private:
  void offer(const SystemState& s) {
    for (StepSink* sink : sinks_) sink->on_step(spec_, s);
  }

  void store(const SystemState& s) {
    Sample smp{s.t, s.x, s.v, {}};
    for (const StepSink* sink : sinks_) sink->append_values(smp.extra);
    record_.samples.push_back(std::move(smp));
  }

  const SystemSpec& spec_;
  std::size_t stride_;
  std::span<StepSink* const> sinks_;
  TrajectoryRecord record_;
};

double error_ratio(const SystemState& fine, const SystemState& coarse, const IntegratorConfig& cfg) {
  double worst = 0.0;
  auto scan = [&](const Vec& a, const Vec& b) {
    for (Index i = 0; i < a.size(); ++i) {
      const double err = std::abs(a[i] - b[i]) / 15.0;
      const double tol = cfg.abs_tol + cfg.rel_tol * std::abs(a[i]);
      worst = std::max(worst, err / tol);
    }
  };
  scan(fine.x, coarse.x);
  scan(fine.v, coarse.v);
  return worst;
}

void stability_guard(const SystemSpec& spec, const IntegratorConfig& cfg, TrajectoryRecord& rec) {
  double max_l = 0.0;
  constexpr int kProbe = 64;
  for (int k = 0; k <= kProbe; ++k) {
    max_l = std::max(max_l, lipschitz_bound(spec, cfg.t_end * k / kProbe));
  }
  if (cfg.dt > 0.25 / max_l) {
    std::ostringstream os;
    os << "fixed step dt = " << cfg.dt << " exceeds 0.25 / max L(t) = " << 0.25 / max_l;
    rec.warnings.push_back(os.str());
  }
}

}  // namespace

TrajectoryRecord integrate(const SystemSpec& spec, const IntegratorConfig& cfg,
                           std::span<StepSink* const> sinks) {
  validate(cfg);
  Recorder rec(spec, cfg, sinks);
  if (!spec.supported_regime()) {
    rec.record().warnings.push_back("unsupported regime: hypotheses failed (" +
                                    [&] {
                                      std::string s;
                                      for (const auto& f : spec.hypotheses().failures()) {
                                        s += (s.empty() ? "" : ", ") + f;
                                      }
                                      return s;
                                    }() +
                                    ")");
  }

  SystemState state{0.0, spec.u0(), spec.v0()};
  rec.initial(state);
  IntegrationStats& stats = rec.record().stats;
  const double t_end = cfg.t_end;
  if (t_end == 0.0) return std::move(rec.record());

  auto fail = [&](const Error& e) -> IntegrationError {
    return IntegrationError(e.code(), e.what(), state, rec.record());
  };

  if (cfg.mode == StepMode::kFixed) {
    stability_guard(spec, cfg, rec.record());
    const auto steps = static_cast<std::size_t>(std::ceil(t_end / cfg.dt - 1e-9));
    for (std::size_t k = 1; k <= steps; ++k) {
      const double t_next = k == steps ? t_end : static_cast<double>(k) * cfg.dt;
      const double h = t_next - state.t;
      try {
        SystemState next = step_rk4(spec, state, h);
        stats.rhs_evaluations += 4;
        next.t = t_next;
        state = std::move(next);
      } catch (const Error& e) {
        throw fail(e);
      }
      rec.accepted(state, h, k == steps);
    }
    return std::move(rec.record());
  }

  double h = std::min({cfg.dt, cfg.max_dt, t_end});
  std::optional<SystemState> reused_full;
  while (state.t < t_end) {
    const double remaining = t_end - state.t;
    bool last = false;
    if (h >= remaining * (1.0 - 1e-12)) {
      h = remaining;
      last = true;
    }
    try {
      SystemState full;
      if (reused_full) {
        full = std::move(*reused_full);
        reused_full.reset();
      } else {
        full = step_rk4(spec, state, h);
        stats.rhs_evaluations += 4;
      }
      SystemState half = step_rk4(spec, state, 0.5 * h);
      SystemState fine = step_rk4(spec, half, 0.5 * h);
      stats.rhs_evaluations += 8;

      const double ratio = error_ratio(fine, full, cfg);
      if (ratio <= 1.0) {
        fine.t = last ? t_end : state.t + h;
        state = std::move(fine);
        rec.accepted(state, h, last);
        const double grow = ratio == 0.0 ? 2.0 : std::clamp(0.9 * std::pow(ratio, -0.2), 0.5, 2.0);
        h = std::min(h * grow, cfg.max_dt);
      } else {
        ++stats.rejected;
        h *= 0.5;
        if (h < cfg.min_dt) {
          std::ostringstream os;
          os << "adaptive step underflow at t = " << state.t << " (dt = " << h << " < "
             << cfg.min_dt << ")";
          throw Error(ErrorCode::kStepUnderflow, os.str());
        }
        reused_full = std::move(half);
      }
    } catch (const IntegrationError&) {
      throw;
    } catch (const Error& e) {
      throw fail(e);
    }
  }
  return std::move(rec.record());
}

}  // namespace pendyn
