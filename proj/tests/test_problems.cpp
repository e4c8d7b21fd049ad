#include <pendyn/problems.hpp>

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

ErrorCode code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an Error");
  return ErrorCode::kInvalidArgument;
}

// zero of x ↦ Mx + q over the line x1 + x2 = 1: along x = (s, 1 − s) the
// residual must be parallel to (1, 1), i.e. (Mx + q)·(1, −1) = 0, affine in s
Vec line_zero(const Mat& M, const Vec& q) {
  auto r = [&](double s) {
    const Vec y = M * v2(s, 1 - s) + q;
    return y[0] - y[1];
  };
  const double r0 = r(0.0), r1 = r(1.0);
  const double s = -r0 / (r1 - r0);
  return v2(s, 1 - s);
}

}  // namespace

TEST_CASE("default schedules") {
  const auto s = default_schedules();
  CHECK(s.lambda == PowerSchedule(1.0, -0.75));
  CHECK(s.beta == PowerSchedule(1.0, 0.5));
  CHECK(s.gamma == DampingSchedule::constant(std::sqrt(2.0)));
}

TEST_CASE("gallery contents") {
  const auto g = gallery();
  std::vector<std::string> names;
  for (const auto& i : g) names.push_back(i.name);
  CHECK(names == std::vector<std::string>{"min-norm-on-line", "strongly-monotone-projection", "l1-on-line",
                                          "affine-inclusion", "unconstrained-forward-backward",
                                          "feasibility-on-line", "trivial"});
  for (const auto& i : g) {
    CAPTURE(i.name);
    CHECK(i.spec.dim() == 2);
    CHECK_FALSE(i.description.empty());
    CHECK(i.spec.supported_regime());
  }
  CHECK(find_instance("l1-on-line").oracle == OracleMethod::kGridRefinement);
  CHECK(find_instance("affine-inclusion").strongly_monotone);
  try {
    find_instance("nope");
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kInvalidArgument);
    CHECK(std::string(e.what()).find("min-norm-on-line") != std::string::npos);
  }
}

TEST_CASE("affine KKT oracle against line elimination") {
  const Mat I = Mat::Identity(2, 2);
  Mat Mi(2, 2);
  Mi << 0.1, 1.0, -1.0, 0.1;
  struct Case {
    const char* name;
    Mat M;
    Vec q;
  };
  const std::vector<Case> cases = {{"min-norm-on-line", I, v2(0, 0)},
                                   {"strongly-monotone-projection", I, v2(-2, 0)},
                                   {"affine-inclusion", Mi, v2(-1, 0.5)}};
  for (const auto& c : cases) {
    CAPTURE(c.name);
    const auto inst = find_instance(c.name);
    const auto r = affine_kkt_oracle(inst.spec);
    const Vec x = line_zero(c.M, c.q);
    CHECK((r.anchor.x_star - x).norm() <= 1e-10);
    CHECK(r.unique);
    CHECK(r.method == OracleMethod::kAffineKkt);
    // v ∈ A(x*), v + p = 0 with p normal to the line
    CHECK((r.anchor.v + inst.spec.D()(x) + r.anchor.p).norm() <= 1e-10);
    CHECK(std::abs(r.anchor.p[0] - r.anchor.p[1]) <= 1e-10);
    CHECK(verify_anchor(inst.spec, r.anchor).pass());
  }
  CHECK((affine_kkt_oracle(find_instance("min-norm-on-line").spec).anchor.x_star - v2(0.5, 0.5)).norm() <= 1e-12);
  CHECK((affine_kkt_oracle(find_instance("strongly-monotone-projection").spec).anchor.x_star - v2(1.5, -0.5)).norm() <=
        1e-12);
}

TEST_CASE("unconstrained forward-backward zero") {
  // (x − (1, −1)) + Qx + r = 0
  const auto inst = find_instance("unconstrained-forward-backward");
  const auto r = kkt_oracle(inst);
  const auto ref = oracle::cramer2(3.0, 0.5, 0.5, 2.0, 2.0, -1.5);
  CHECK(r.anchor.x_star[0] == doctest::Approx(ref[0]).epsilon(1e-12));
  CHECK(r.anchor.x_star[1] == doctest::Approx(ref[1]).epsilon(1e-12));
  CHECK(r.anchor.p.norm() <= 1e-12);
  CHECK(r.unique);
}

TEST_CASE("non-unique zeros") {
  const auto feas = kkt_oracle(find_instance("feasibility-on-line"));
  CHECK_FALSE(feas.unique);
  // projection of u0 = (1, 2) onto the line
  CHECK((feas.anchor.x_star - v2(0, 1)).norm() <= 1e-10);
  CHECK(feas.anchor.p.norm() <= 1e-10);

  const auto triv_inst = find_instance("trivial");
  const auto triv = kkt_oracle(triv_inst);
  CHECK_FALSE(triv.unique);
  CHECK((triv.anchor.x_star - v2(1.0, 1.0 / std::sqrt(2.0))).norm() <= 1e-14);
}

TEST_CASE("grid refinement matches the closed form on the l1 instance") {
  const auto inst = find_instance("l1-on-line");
  const auto r = grid_refinement_oracle(inst.spec);
  // |s| + |1 − s| + ½((s − 1.5)² + (−s)²) along x = (s, 1 − s)
  const double s = oracle::argmin_1d(
      [](double t) { return std::abs(t) + std::abs(1 - t) + 0.5 * ((t - 1.5) * (t - 1.5) + t * t); }, -5, 5);
  CHECK(std::abs(s - 0.75) <= 1e-6);
  CHECK((r.anchor.x_star - v2(0.75, 0.25)).norm() <= 1e-7);
  CHECK(r.method == OracleMethod::kGridRefinement);
  CHECK(r.levels > 1);
  CHECK(r.level_gap <= 1e-10);
  // x* interior to both orthants: v = sign(x*) = (1, 1), Dx* = x* − (1.5, 1), p = −(v + Dx*)
  CHECK((r.anchor.v - v2(1, 1)).norm() <= 1e-6);
  CHECK((r.anchor.p - v2(-0.25, -0.25)).norm() <= 1e-6);
  CHECK(verify_anchor(inst.spec, r.anchor).pass());
}

TEST_CASE("grid refinement agrees with the affine oracle where both apply") {
  for (const char* name : {"strongly-monotone-projection", "unconstrained-forward-backward", "min-norm-on-line"}) {
    CAPTURE(name);
    const auto inst = find_instance(name);
    const auto g = grid_refinement_oracle(inst.spec);
    const auto a = affine_kkt_oracle(inst.spec);
    CHECK((g.anchor.x_star - a.anchor.x_star).norm() <= 1e-7);
    CHECK(verify_anchor(inst.spec, g.anchor, 1e-6).pass());
  }
}

TEST_CASE("oracle preconditions") {
  CHECK(code_of([] { grid_refinement_oracle(find_instance("affine-inclusion").spec); }) == ErrorCode::kUnsupported);
  CHECK(code_of([] { affine_kkt_oracle(find_instance("l1-on-line").spec); }) == ErrorCode::kUnsupported);
  GridOptions bad;
  bad.points_per_axis = 4;
  CHECK(code_of([&] { grid_refinement_oracle(find_instance("l1-on-line").spec, bad); }) ==
        ErrorCode::kInvalidArgument);
  const auto n3 = scaled_gallery(3, 1);
  CHECK(code_of([&] { grid_refinement_oracle(n3[0].spec); }) == ErrorCode::kUnsupported);
}

TEST_CASE("bilevel builder checks the constraint pairing") {
  const auto psi = CocoerciveMap::quadratic_penalty(v2(1, 1), 1.0);
  CHECK(code_of([&] {
          build_bilevel_quadratic("x", ProxDescriptor::zero(), CocoerciveMap::zero(2), psi, default_schedules(),
                                  v2(0, 0), v2(0, 0), ConstraintSet::hyperplane(v2(1, 0), 1.0));
        }) == ErrorCode::kPairing);
  const auto ok = build_bilevel_quadratic("x", ProxDescriptor::zero(), CocoerciveMap::zero(2), psi,
                                          default_schedules(), v2(0, 0), v2(0, 0),
                                          ConstraintSet::hyperplane(v2(2, 2), 2.0));
  CHECK(ok.spec.dim() == 2);
  CHECK(code_of([&] {
          build_bilevel_quadratic("x", ProxDescriptor::zero(), CocoerciveMap::zero(3), psi, default_schedules(),
                                  v2(0, 0), v2(0, 0));
        }) == ErrorCode::kDimensionMismatch);
}

TEST_CASE("every gallery operator passes the sampled property checks") {
  for (const auto& inst : gallery()) {
    CAPTURE(inst.name);
    for (double lam : {0.1, 1.0, 10.0}) CHECK(check_firm_nonexpansiveness(inst.spec.A(), lam, 1000, 5).pass);
    CHECK(check_cocoercivity(inst.spec.D(), 1000, 6).pass);
    CHECK(check_cocoercivity(inst.spec.B(), 1000, 7).pass);
  }
}

TEST_CASE("scaled gallery in twenty dimensions") {
  const auto all = scaled_gallery(20, 99);
  REQUIRE(all.size() == 4);
  for (const auto& inst : all) {
    CAPTURE(inst.name);
    CHECK(inst.name.size() > 4);
    CHECK(inst.name.substr(inst.name.size() - 4) == "-n20");
    CHECK(inst.spec.dim() == 20);
    const auto r = kkt_oracle(inst);
    CHECK(r.unique);
    CHECK(verify_anchor(inst.spec, r.anchor).pass());
    CHECK(check_firm_nonexpansiveness(inst.spec.A(), 1.0, 1000, 3).pass);
    CHECK(check_cocoercivity(inst.spec.D(), 1000, 3).pass);
  }
  // closed forms: minimum norm point a / |a|² and projection c − ((<a,c> − 1)/|a|²) a
  const auto& psi = std::get<CocoerciveMap::QuadraticPenalty>(all[0].spec.B().kind());
  const Vec a = psi.a;
  CHECK((kkt_oracle(all[0]).anchor.x_star - a / a.squaredNorm()).norm() <= 1e-10);
  const auto& sh = std::get<ResolventOperator::Subdifferential>(all[1].spec.A().kind());
  const Vec c = std::get<QuadraticShift>(sh.f.kind()).center;
  const Vec proj = c - (a.dot(c) - 1.0) / a.squaredNorm() * a;
  CHECK((kkt_oracle(all[1]).anchor.x_star - proj).norm() <= 1e-10);

  // seeded: identical data for identical seeds
  const auto again = scaled_gallery(20, 99);
  CHECK(kkt_oracle(again[2]).anchor.x_star == kkt_oracle(all[2]).anchor.x_star);
  CHECK(code_of([] { scaled_gallery(0, 1); }) == ErrorCode::kInvalidArgument);
}

TEST_CASE("oracle method names") {
  CHECK(std::string(to_string(OracleMethod::kAffineKkt)) != std::string(to_string(OracleMethod::kGridRefinement)));
}
