#include <pendyn/diagnostics.hpp>

#include <doctest.h>

#include "support/oracles.hpp"

#include <cmath>

using namespace pendyn;

namespace {

Vec v2(double a, double b) {
  Vec v(2);
  v << a, b;
  return v;
}

ScheduleSet schedules(double g = std::sqrt(2.0)) {
  return {PowerSchedule(1.0, -0.75), PowerSchedule(1.0, 0.5), DampingSchedule::constant(g), 0.0};
}

// A = ∇½‖x − (2,0)‖², C = {x1 + x2 = 1}: x* = (1.5, −0.5), v = (−0.5, −0.5), p = (0.5, 0.5)
SystemSpec projection_system(double g = std::sqrt(2.0)) {
  return SystemSpec(ResolventOperator::subdifferential(ProxDescriptor::quadratic_shift(v2(2, 0), 1.0), 2, 1.0),
                    CocoerciveMap::zero(2), CocoerciveMap::quadratic_penalty(v2(1, 1), 1.0), schedules(g),
                    v2(0, 0), v2(0, 0));
}

AnchorPoint projection_anchor(const SystemSpec& s) {
  return zero_anchor(s, v2(1.5, -0.5), v2(-0.5, -0.5), v2(0.5, 0.5));
}

// same data with A split into D = ∇½‖x − (2,0)‖² and A = 0, so the t₁ rule involves L_D
SystemSpec forward_backward_system() {
  return SystemSpec(ResolventOperator::zero(2), CocoerciveMap::gradient_affine(Mat::Identity(2, 2), v2(-2, 0)),
                    CocoerciveMap::quadratic_penalty(v2(1, 1), 1.0), schedules(), v2(0, 0), v2(0, 0));
}

IntegratorConfig fixed(double dt, double t_end, std::size_t stride = 1) {
  IntegratorConfig c;
  c.dt = dt;
  c.t_end = t_end;
  c.sample_stride = stride;
  return c;
}

}  // namespace

TEST_CASE("lemma constants") {
  for (double lb : {0.1, 1.0, 2.0, 10.0, 1e3}) {
    CAPTURE(lb);
    const auto k = lemma_constants(lb);
    const double s = 1.0 + lb;
    // ε₀ is the positive root of ε² + 2sε − 1
    CHECK(k.eps0 * k.eps0 + 2 * s * k.eps0 - 1.0 == doctest::Approx(0.0).epsilon(1e-12).scale(1));
    CHECK(k.eps0 > 0.0);
    CHECK(k.a * (1 + k.eps0) == doctest::Approx(k.eps0));
    CHECK(k.b * k.eps0 == doctest::Approx(2 * (1 + k.eps0)));
    CHECK(k.c == doctest::Approx(0.5 + k.eps0 / (4 * (1 + k.eps0))));
    CHECK(remark_inequalities_hold(k));
  }
  const auto k2 = lemma_constants(2.0);
  CHECK(k2.eps0 == doctest::Approx(std::sqrt(10.0) - 3.0));
  CHECK_THROWS_AS(lemma_constants(0.0), Error);
  CHECK_FALSE(remark_inequalities_hold({0.5, 0.4, 1.0, 0.6}));
}

TEST_CASE("constants use L_B = 1 when B vanishes") {
  const SystemSpec s(ResolventOperator::zero(2), CocoerciveMap::zero(2), CocoerciveMap::zero(2), schedules(),
                     v2(0, 0), v2(0, 0));
  CHECK(constants_lipschitz_b(s) == 1.0);
  CHECK(constants_lipschitz_b(projection_system()) == 2.0);
}

TEST_CASE("anchor verification") {
  const auto s = projection_system();
  CHECK(verify_anchor(s, projection_anchor(s)).pass());
  auto off = projection_anchor(s);
  off.x_star = v2(1.0, 1.0);
  CHECK_FALSE(verify_anchor(s, off).in_constraint);
  auto wrong_v = projection_anchor(s);
  wrong_v.v = v2(1, 1);
  const auto c = verify_anchor(s, wrong_v);
  CHECK_FALSE(c.v_in_A);
  CHECK(c.decomposition_residual > 1.0);
  auto wrong_p = projection_anchor(s);
  wrong_p.p = v2(1, -1);
  CHECK_FALSE(verify_anchor(s, wrong_p).p_in_normal_cone);
}

TEST_CASE("running integrals match closed forms on the free system") {
  const double g = std::sqrt(2.0);
  const SystemSpec s(ResolventOperator::zero(2), CocoerciveMap::zero(2), CocoerciveMap::zero(2), schedules(g),
                     v2(1, 0), v2(0, 1));
  RunningIntegrals acc(2);
  StepSink* sinks[] = {&acc};
  const double T = 20.0;
  const auto rec = integrate(s, fixed(1e-3, T, 100), sinks);
  CHECK(acc.steps() == 20000);
  CHECK(acc.int_lambda() == doctest::Approx(4.0 * (std::pow(1 + T, 0.25) - 1.0)).epsilon(1e-7));
  CHECK(acc.int_velocity_sq() == doctest::Approx((1 - std::exp(-2 * g * T)) / (2 * g)).epsilon(2e-6));
  CHECK(acc.int_penalty_sq() == 0.0);
  const double ilx = oracle::simpson(
      [&](double t) { return std::pow(1 + t, -0.75) * oracle::damped_free(0.0, 1.0, g, t).first; }, 0, T, 20000);
  CHECK(acc.int_lambda_x()[1] == doctest::Approx(ilx).epsilon(1e-7));
  CHECK(acc.int_lambda_x()[0] == doctest::Approx(acc.int_lambda()));
  const Vec xb = ergodic_average(acc);
  CHECK(xb[0] == doctest::Approx(1.0));
  CHECK(xb[1] == doctest::Approx(ilx / acc.int_lambda()).epsilon(1e-7));

  // the stored columns carry the running values
  CHECK(rec.extra_columns == std::vector<std::string>{"int_lambda", "int_v2", "int_lb_Bx2", "xbar_0", "xbar_1"});
  CHECK(rec.samples.front().extra == std::vector<double>{0, 0, 0, 1, 0});
  CHECK(rec.samples.back().extra[0] == acc.int_lambda());

  RunningIntegrals empty(2);
  CHECK_THROWS_AS(RunningIntegrals(3, v2(0, 0)), Error);
  CHECK_THROWS_AS(ergodic_average(empty), Error);
}

TEST_CASE("penalty integrals agree with a trapezoid over the stored samples") {
  const auto s = projection_system();
  RunningIntegrals acc(2, v2(1.5, -0.5));
  StepSink* sinks[] = {&acc};
  const auto rec = integrate(s, fixed(0.01, 30.0), sinks);
  double sq = 0, pair = 0;
  auto f = [&](const Sample& x) {
    const double lb = s.schedules().lambda.value(x.t) * s.schedules().beta.value(x.t);
    const Vec bx = s.B()(x.x);
    return std::pair{lb * bx.squaredNorm(), lb * bx.dot(x.x - v2(1.5, -0.5))};
  };
  for (std::size_t i = 1; i < rec.samples.size(); ++i) {
    const double h = rec.samples[i].t - rec.samples[i - 1].t;
    const auto [a1, b1] = f(rec.samples[i - 1]);
    const auto [a2, b2] = f(rec.samples[i]);
    sq += 0.5 * h * (a1 + a2);
    pair += 0.5 * h * (b1 + b2);
  }
  CHECK(acc.int_penalty_sq() == doctest::Approx(sq).epsilon(1e-12));
  CHECK(acc.int_penalty_pairing() == doctest::Approx(pair).epsilon(1e-12));
  CHECK(rec.extra_columns.size() == 6);
}

TEST_CASE("Lyapunov samples") {
  const auto s = projection_system();
  const auto anchor = projection_anchor(s);
  const auto k = lemma_constants(2.0);
  const auto rec = integrate(s, fixed(0.01, 10.0));
  const auto ly = lyapunov_samples(s, anchor, rec, k);
  REQUIRE(ly.size() == rec.samples.size());
  CHECK(std::isnan(ly.front().h_ddot_fd));
  CHECK(std::isnan(ly.back().h_ddot_fd));
  for (std::size_t i = 1; i + 1 < ly.size(); ++i) {
    const auto& x = rec.samples[i];
    const Vec d = x.x - anchor.x_star;
    CHECK(ly[i].h == doctest::Approx(0.5 * d.squaredNorm()));
    // central difference of h against the exact derivative <ẋ, x − x*>
    const double fd = (ly[i + 1].h - ly[i - 1].h) / (ly[i + 1].t - ly[i - 1].t);
    CHECK(std::abs(fd - ly[i].h_dot) <= 1e-3);
    // ḧ = ‖ẋ‖² + <ẍ, x − x*> with ẍ from the right-hand side
    const auto [dx, dv] = rhs(s, x.t, x.x, x.v);
    CHECK(std::abs(ly[i].h_ddot_fd - (x.v.squaredNorm() + dv.dot(d))) <= 1e-3);
    const double g = std::sqrt(2.0);
    CHECK(ly[i].energy == doctest::Approx(ly[i].h_dot + g * ly[i].h + k.c * g * x.v.squaredNorm()));
  }
}

TEST_CASE("lemma monitors hold along a computed trajectory") {
  const auto s = projection_system();
  const auto anchor = projection_anchor(s);
  const auto k = lemma_constants(2.0);
  const auto rec = integrate(s, fixed(0.01, 100.0));
  const auto m7 = base_monitor(s, anchor, rec);
  CHECK(m7.violation_fraction == 0.0);
  CHECK(m7.points.size() == rec.samples.size() - 2);
  CHECK(*m7.t_start == 0.0);
  for (auto mode : {LemmaInequality::kEpsilon, LemmaInequality::kAfterT0, LemmaInequality::kAfterT1}) {
    CAPTURE(to_string(mode));
    const auto m = lemma_monitor(s, anchor, k, rec, mode);
    CHECK(m.violation_fraction == 0.0);
    CHECK_FALSE(m.pre_asymptotic);
  }
  // λβ = (1 + t)^{-1/4} < 1/2 from t = 15
  const auto m9 = lemma_monitor(s, anchor, k, rec, LemmaInequality::kAfterT0);
  REQUIRE(m9.t_start);
  CHECK(*m9.t_start > 15.0);
  CHECK(*m9.t_start < 15.02);
  const auto e = energy_bound_check(s, anchor, k, rec);
  CHECK(e.pass);
  REQUIRE(e.t1);
  CHECK(*e.t1 == doctest::Approx(*m9.t_start));
}

TEST_CASE("t1 waits for lambda <= 1/(b L_D)") {
  const auto s = forward_backward_system();
  const auto anchor = zero_anchor(s, v2(1.5, -0.5), Vec::Zero(2), v2(0.5, 0.5));
  REQUIRE(verify_anchor(s, anchor).pass());
  const auto k = lemma_constants(2.0);
  const auto rec = integrate(s, fixed(0.01, 60.0));
  const auto m10 = lemma_monitor(s, anchor, k, rec, LemmaInequality::kAfterT1);
  // (1 + t)^{-3/4} <= 1/b
  const double t1 = std::pow(k.b, 4.0 / 3.0) - 1.0;
  REQUIRE(m10.t_start);
  CHECK(*m10.t_start >= t1);
  CHECK(*m10.t_start <= t1 + 0.011);
  CHECK(m10.violation_fraction == 0.0);
  CHECK(energy_bound_check(s, anchor, k, rec).pass);
}

TEST_CASE("monitors flag a trajectory that does not solve the system") {
  const SystemSpec s(ResolventOperator::zero(2), CocoerciveMap::zero(2), CocoerciveMap::zero(2), schedules(),
                     v2(1, 0), v2(1, 0));
  TrajectoryRecord rec;
  rec.dim = 2;
  for (int i = 0; i <= 100; ++i) {
    const double t = 0.01 * i;
    rec.samples.push_back({t, v2(std::exp(t), 0), v2(std::exp(t), 0), {}});
  }
  const auto anchor = zero_anchor(s, v2(0, 0), v2(0, 0), v2(0, 0));
  // h = e^{2t}/2: ḧ + γḣ − ‖ẋ‖² = γe^{2t} + e^{2t} while every right-hand term vanishes
  const auto m = base_monitor(s, anchor, rec);
  CHECK(m.violation_fraction == 1.0);
  CHECK(m.max_violation == doctest::Approx((std::sqrt(2.0) + 1.0) * std::exp(2 * 0.99)).epsilon(1e-3));
}

TEST_CASE("monitors need three samples") {
  const auto s = projection_system();
  TrajectoryRecord rec;
  rec.samples.push_back({0.0, v2(0, 0), v2(0, 0), {}});
  rec.samples.push_back({1.0, v2(0, 0), v2(0, 0), {}});
  CHECK_THROWS_AS(base_monitor(s, projection_anchor(s), rec), Error);
  CHECK_THROWS_AS(convergence_report(s, projection_anchor(s), rec), Error);
}

TEST_CASE("dyadic Cauchy check against closed-form increments") {
  std::vector<double> t, conv, div, flat;
  for (int i = 1; i <= 4000; ++i) {
    const double x = 0.25 * i;
    t.push_back(x);
    conv.push_back(1.0 - 1.0 / (x * x));  // ∫ 2/t³
    div.push_back(std::log(x));           // ∫ 1/t
    flat.push_back(3.0);
  }
  const double T = t.back();
  const auto c = dyadic_cauchy("conv", t, conv);
  CHECK(c.pass);
  CHECK(c.increments[2] == doctest::Approx(3.0 / (T * T)).epsilon(1e-9));
  CHECK(c.increments[1] / c.increments[2] == doctest::Approx(4.0));
  const auto d = dyadic_cauchy("div", t, div);
  CHECK_FALSE(d.pass);
  CHECK(d.increments[0] == doctest::Approx(std::log(2.0)));
  CHECK(dyadic_cauchy("flat", t, flat).pass);
  CHECK_THROWS_AS(dyadic_cauchy("x", {1.0}, {1.0}), Error);
}

TEST_CASE("convergence report on the projection problem") {
  const auto s = projection_system();
  const auto anchor = projection_anchor(s);
  RunningIntegrals acc(2, anchor.x_star);
  StepSink* sinks[] = {&acc};
  const auto rec = integrate(s, fixed(0.01, 200.0, 5), sinks);
  const auto r = convergence_report(s, anchor, rec);
  CHECK_FALSE(r.suppressed);
  CHECK(r.t_end == 200.0);
  CHECK(r.final_distance == doctest::Approx((rec.final_sample().x - anchor.x_star).norm()));
  CHECK(r.final_distance < r.distance_half);
  CHECK(r.distance_half < r.distance_quarter);
  CHECK(r.tail_slope < 0.0);
  REQUIRE(r.ergodic_distance);
  CHECK(*r.ergodic_distance == doctest::Approx((ergodic_average(acc) - anchor.x_star).norm()));
  CHECK(r.find("int_xdot_sq"));
  CHECK(r.find("int_lb_Bx_pairing"));
  CHECK(r.find("nothing") == nullptr);
  CHECK(r.integrals.size() == 4);
  CHECK((r.verdict == "strong" || r.verdict == "ergodic" || r.verdict == "none"));

  ConvergenceOptions loose;
  loose.strong_tol = 10.0;
  CHECK(convergence_report(s, anchor, rec, loose).verdict == "strong");
  ConvergenceOptions tight{1e-12, 1e-12};
  CHECK(convergence_report(s, anchor, rec, tight).verdict == "none");
  ConvergenceOptions erg{1e-12, 10.0};
  CHECK(convergence_report(s, anchor, rec, erg).verdict == "ergodic");

  const auto j = to_json(r);
  CHECK(j["verdict"] == r.verdict);
  CHECK(j.contains("integrals"));
}

TEST_CASE("verdicts are suppressed outside the supported regime") {
  const auto s = projection_system(1.0);
  const auto rec = integrate(s, fixed(0.01, 20.0));
  const auto r = convergence_report(s, projection_anchor(s), rec);
  CHECK(r.suppressed);
  CHECK(r.verdict == "suppressed");
}

TEST_CASE("report serialization") {
  const auto k = lemma_constants(2.0);
  CHECK(to_json(k)["eps0"] == k.eps0);
  EnergyBoundCheck e;
  e.t1 = 3.0;
  e.pass = true;
  CHECK(to_json(e)["pass"] == true);
  ViolationReport v;
  v.which = LemmaInequality::kAfterT0;
  CHECK(to_json(v)["pre_asymptotic"] == false);
}
