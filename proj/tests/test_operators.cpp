#include <pendyn/operators.hpp>

#include <doctest.h>

#include "support/oracles.hpp"

#include <random>

using namespace pendyn;

namespace {

Vec v2(double a, double b) {
  Vec v(2);
  v << a, b;
  return v;
}

Mat m2(double a, double b, double c, double d) {
  Mat m(2, 2);
  m << a, b, c, d;
  return m;
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

std::vector<ResolventOperator> sample_operators() {
  return {
      ResolventOperator::zero(2),
      ResolventOperator::affine(Mat::Identity(2, 2), Vec::Zero(2)),
      ResolventOperator::affine(m2(0.1, 1, -1, 0.1), v2(-1, 0.5), 0.1),
      ResolventOperator::subdifferential(ProxDescriptor::zero(), 2),
      ResolventOperator::subdifferential(ProxDescriptor::l1(1.0), 2),
      ResolventOperator::subdifferential(ProxDescriptor::quadratic_shift(v2(2, 0), 1.0), 2, 1.0),
      ResolventOperator::subdifferential(ProxDescriptor::indicator(ConstraintSet::hyperplane(v2(1, 1), 1)), 2),
      ResolventOperator::subdifferential(ProxDescriptor::indicator(ConstraintSet::box(v2(0, 0), v2(1, 1))), 2),
  };
}

}  // namespace

TEST_CASE("resolvent of the zero operator is the identity") {
  CHECK(resolvent(ResolventOperator::zero(2), 1.0, v2(3, -2)).isApprox(v2(3, -2)));
}

TEST_CASE("affine resolvent solves (I + lambda M) p = x - lambda q") {
  const auto A = ResolventOperator::affine(Mat::Identity(2, 2), Vec::Zero(2));
  CHECK((resolvent(A, 1.0, v2(4, 0)) - v2(2, 0)).norm() < 1e-14);

  const auto B = ResolventOperator::affine(m2(2, 0, 0, 1), v2(1, 0));
  const Vec p = resolvent(B, 0.5, v2(1, 1));
  // (I + 0.5 M) = diag(2, 1.5), rhs = (1, 1) - 0.5 (1, 0)
  const auto ref = oracle::cramer2(2.0, 0.0, 0.0, 1.5, 0.5, 1.0);
  CHECK(p[0] == doctest::Approx(ref[0]).epsilon(1e-14));
  CHECK(p[1] == doctest::Approx(ref[1]).epsilon(1e-14));
  CHECK(p[0] == doctest::Approx(0.25));
  CHECK(p[1] == doctest::Approx(2.0 / 3.0));
}

TEST_CASE("affine construction rejects non-monotone matrices") {
  CHECK(code_of([] { ResolventOperator::affine(m2(-1, 0, 0, 1), Vec::Zero(2)); }) == ErrorCode::kInvalidArgument);
  // monotone but not 0.5-strongly monotone
  CHECK(code_of([] { ResolventOperator::affine(m2(0.1, 1, -1, 0.1), Vec::Zero(2), 0.5); }) ==
        ErrorCode::kInvalidArgument);
}

TEST_CASE("singular affine resolvent is reported") {
  const auto A = ResolventOperator::affine_unchecked(-Mat::Identity(2, 2), Vec::Zero(2));
  CHECK(code_of([&] { resolvent(A, 1.0, v2(1, 1)); }) == ErrorCode::kSingularSystem);
}

TEST_CASE("resolvent checks dimensions and lambda") {
  const auto A = ResolventOperator::zero(2);
  CHECK(code_of([&] { resolvent(A, 1.0, Vec::Zero(3)); }) == ErrorCode::kDimensionMismatch);
  CHECK(code_of([&] { resolvent(A, 0.0, Vec::Zero(2)); }) == ErrorCode::kInvalidArgument);
}

TEST_CASE("l1 prox is a soft threshold, matching brute-force minimization") {
  const Vec x = v2(1.5, -0.3);
  const Vec p = prox_scaled(ProxDescriptor::l1(1.0), 1.0, x);
  CHECK((p - v2(0.5, 0.0)).norm() < 1e-15);
  for (int i = 0; i < 2; ++i) {
    const double xi = x[i];
    const double y = oracle::argmin_1d([&](double t) { return std::abs(t) + 0.5 * (t - xi) * (t - xi); }, -5, 5);
    CHECK(std::abs(p[i] - y) <= 1e-6);
  }
}

TEST_CASE("indicator prox projects onto a hyperplane") {
  const auto C = ConstraintSet::hyperplane(v2(1, 1), 1.0);
  const Vec p = prox_scaled(ProxDescriptor::indicator(C), 3.0, v2(1, 1));
  CHECK((p - v2(0.5, 0.5)).norm() < 1e-15);
  // grid search along the line y = (s, 1 - s)
  const double s = oracle::argmin_1d(
      [](double t) { return (t - 1) * (t - 1) + (1 - t - 1) * (1 - t - 1); }, -5, 5);
  CHECK(std::abs(p[0] - s) <= 1e-6);
}

TEST_CASE("prox of the zero function and of a quadratic shift") {
  CHECK(prox_scaled(ProxDescriptor::zero(), 7.0, v2(2, 2)).isApprox(v2(2, 2)));
  const auto f = ProxDescriptor::quadratic_shift(v2(1, -1), 2.0);
  const Vec p = prox_scaled(f, 0.5, v2(3, 3));
  // (x + lambda mu z) / (1 + lambda mu)
  CHECK((p - (v2(3, 3) + v2(1, -1)) / 2.0).norm() < 1e-15);
}

TEST_CASE("box and affine-subspace projections") {
  const auto B = ConstraintSet::box(v2(0, 0), v2(1, 1));
  CHECK(B.project(v2(2, -1)).isApprox(v2(1, 0)));
  Mat A(1, 2);
  A << 1, 1;
  Vec b(1);
  b << 1;
  const auto S = ConstraintSet::affine_subspace(A, b);
  CHECK((S.project(v2(1, 1)) - v2(0.5, 0.5)).norm() < 1e-14);
  CHECK(code_of([] { ConstraintSet::box(v2(1, 0), v2(0, 1)); }) == ErrorCode::kInfeasible);
}

TEST_CASE("projection is idempotent") {
  std::mt19937_64 rng(7);
  std::normal_distribution<double> nd;
  const std::vector<ConstraintSet> sets = {ConstraintSet::hyperplane(v2(1, 2), 0.5),
                                           ConstraintSet::box(v2(-1, 0), v2(0.5, 2)),
                                           ConstraintSet::whole_space(2)};
  for (const auto& C : sets) {
    const auto f = ProxDescriptor::indicator(C);
    for (int k = 0; k < 100; ++k) {
      const Vec x = v2(3 * nd(rng), 3 * nd(rng));
      const Vec once = prox_scaled(f, 1.0, x);
      const Vec twice = prox_scaled(f, 1.0, once);
      CHECK((once - twice).cwiseAbs().maxCoeff() <= 1e-12);
    }
  }
}

TEST_CASE("yosida approximation") {
  CHECK(yosida(ResolventOperator::zero(2), 2.0, v2(1, 1)).norm() == 0.0);
  const auto I = ResolventOperator::affine(Mat::Identity(2, 2), Vec::Zero(2));
  CHECK((yosida(I, 1.0, v2(4, 0)) - v2(2, 0)).norm() < 1e-14);

  const Mat M = m2(2, 0, 0, 1);
  const Vec q = v2(1, 0);
  const auto A = ResolventOperator::affine(M, q);
  const Vec x = v2(1, 1);
  const double alpha = 0.5;
  // (I + alpha M)^{-1} (M x + q)
  const Vec mx = M * x + q;
  const auto ref = oracle::cramer2(1 + alpha * 2, 0, 0, 1 + alpha * 1, mx[0], mx[1]);
  const Vec y = yosida(A, alpha, x);
  CHECK(y[0] == doctest::Approx(ref[0]).epsilon(1e-13));
  CHECK(y[1] == doctest::Approx(ref[1]).epsilon(1e-13));
}

TEST_CASE("yosida norm is nonincreasing in alpha for linear monotone A") {
  const auto A = ResolventOperator::affine(m2(1, 2, -2, 0.5), Vec::Zero(2));
  const Vec x = v2(0.7, -1.3);
  double prev = std::numeric_limits<double>::infinity();
  for (double alpha : {0.1, 0.2, 0.5, 1.0, 2.0, 5.0, 10.0}) {
    const double n = yosida(A, alpha, x).norm();
    CHECK(n <= prev + 1e-10);
    prev = n;
  }
}

TEST_CASE("resolvent identity holds for every sample operator") {
  std::mt19937_64 rng(11);
  std::normal_distribution<double> nd;
  for (const auto& A : sample_operators()) {
    for (double lam : {0.1, 1.0, 4.0}) {
      const Vec x = v2(2 * nd(rng), 2 * nd(rng));
      const Vec p = resolvent(A, lam, x);
      // (x - p) / lambda is in A(p)
      CHECK(graph_member(A, p, (x - p) / lam, 1e-8));
      if (const auto* aff = std::get_if<ResolventOperator::Affine>(&A.kind())) {
        CHECK((p + lam * (aff->M * p + aff->q) - x).norm() <= 1e-10);
      }
      if (const auto* s = std::get_if<ResolventOperator::Subdifferential>(&A.kind())) {
        if (const auto* qs = std::get_if<QuadraticShift>(&s->f.kind())) {
          const Vec grad = qs->modulus * (p - qs->center);
          CHECK((grad + (p - x) / lam).norm() <= 1e-8);
        }
      }
    }
  }
}

TEST_CASE("support function") {
  const auto H = ConstraintSet::hyperplane(v2(1, 1), 1.0);
  const ExtendedReal s = support_function(H, v2(2, 2));
  REQUIRE(s.is_finite());
  CHECK(s.value() == doctest::Approx(2.0));
  // brute force: <y, u> along sampled points of the line is constant
  for (double t = -10; t <= 10; t += 0.5) CHECK(v2(t, 1 - t).dot(v2(2, 2)) == doctest::Approx(2.0));

  const auto B = ConstraintSet::box(v2(0, 0), v2(1, 1));
  double corner_max = -1e300;
  for (double a : {0.0, 1.0})
    for (double b : {0.0, 1.0}) corner_max = std::max(corner_max, v2(a, b).dot(v2(1, -1)));
  CHECK(support_function(B, v2(1, -1)).value() == doctest::Approx(corner_max));
  CHECK(corner_max == 1.0);

  CHECK(support_function(H, v2(1, -1)).is_infinite());
  CHECK(support_function(ConstraintSet::whole_space(2), v2(0, 1)).is_infinite());
  for (const auto& C : {H, B, ConstraintSet::whole_space(2)}) {
    CHECK(support_function(C, Vec::Zero(2)) == ExtendedReal::finite(0.0));
  }
}

TEST_CASE("normal cone membership") {
  const auto H = ConstraintSet::hyperplane(v2(1, 1), 1.0);
  CHECK(normal_cone_member(H, v2(0.5, 0.5), v2(3, 3)));
  CHECK_FALSE(normal_cone_member(H, v2(0.5, 0.5), v2(1, -1)));
  CHECK(normal_cone_member(H, v2(0.5, 0.5), Vec::Zero(2)));
  const auto B = ConstraintSet::box(v2(0, 0), v2(1, 1));
  CHECK(normal_cone_member(B, v2(1, 0.5), v2(2, 0)));
  CHECK_FALSE(normal_cone_member(B, v2(1, 0.5), v2(-2, 0)));
  CHECK(code_of([&] { normal_cone_member(H, v2(1, 1), Vec::Zero(2)); }) == ErrorCode::kInfeasible);
}

TEST_CASE("firm nonexpansiveness checker") {
  auto r = check_firm_nonexpansiveness(ResolventOperator::zero(2), 3.0, 200, 1);
  CHECK(r.pass);
  CHECK(r.max_violation <= 1e-12);
  r = check_firm_nonexpansiveness(ResolventOperator::affine(Mat::Identity(2, 2), Vec::Zero(2)), 1.0, 100, 1);
  CHECK(r.pass);
  CHECK(r.samples == 100);
  // M + Mᵀ indefinite, injected past construction
  const auto bad = ResolventOperator::affine_unchecked(m2(0, 2, 0, 0) - 0.5 * Mat::Identity(2, 2), Vec::Zero(2));
  r = check_firm_nonexpansiveness(bad, 1.0, 1000, 1);
  CHECK_FALSE(r.pass);
  CHECK(r.max_violation > 1e-3);
}

TEST_CASE("firm nonexpansiveness and cocoercivity on 1000 samples") {
  for (const auto& A : sample_operators()) {
    CAPTURE(A.name());
    CHECK(check_firm_nonexpansiveness(A, 0.7, 1000, 42).pass);
  }
  const std::vector<CocoerciveMap> maps = {CocoerciveMap::zero(2), CocoerciveMap::gradient_affine(Mat::Identity(2, 2), Vec::Zero(2)),
                                           CocoerciveMap::gradient_affine(m2(2, 0.5, 0.5, 1), v2(-1, 0.5)),
                                           CocoerciveMap::quadratic_penalty(v2(1, 1), 1.0)};
  for (const auto& B : maps) {
    CAPTURE(B.name());
    CHECK(check_cocoercivity(B, 1000, 42).pass);
  }
}

TEST_CASE("cocoercive maps: values, constants, zero sets") {
  const auto B = CocoerciveMap::quadratic_penalty(v2(1, 1), 1.0);
  CHECK(B.lipschitz() == doctest::Approx(2.0));
  CHECK((B(v2(1, 1)) - v2(1, 1)).norm() < 1e-15);
  CHECK(B.potential(v2(1, 1)) == doctest::Approx(0.5));
  CHECK(pairs_with(ConstraintSet::hyperplane(v2(2, 2), 2.0), B));
  CHECK_FALSE(pairs_with(ConstraintSet::hyperplane(v2(1, 1), 2.0), B));
  CHECK_FALSE(pairs_with(ConstraintSet::whole_space(2), B));
  CHECK(pairs_with(ConstraintSet::whole_space(2), CocoerciveMap::zero(2)));
  const auto G = CocoerciveMap::gradient_affine(m2(2, 0.5, 0.5, 1), Vec::Zero(2));
  const double lmax = (3.0 + std::sqrt(1.0 + 1.0)) / 2.0;  // eigenvalues of [[2,.5],[.5,1]]
  CHECK(G.lipschitz() == doctest::Approx(lmax));
  CHECK(code_of([] { CocoerciveMap::gradient_affine(m2(1, 1, 0, 1), Vec::Zero(2)); }) ==
        ErrorCode::kInvalidArgument);
  CHECK(code_of([] { CocoerciveMap::quadratic_penalty(Vec::Zero(2), 1.0); }) == ErrorCode::kInvalidArgument);
}

TEST_CASE("extended reals") {
  CHECK(ExtendedReal::infinity().is_infinite());
  CHECK(ExtendedReal::finite(2.5).value() == 2.5);
  CHECK(std::isinf(ExtendedReal::infinity().to_double()));
  CHECK(code_of([] { (void)ExtendedReal::infinity().value(); }) == ErrorCode::kInvalidArgument);
  CHECK(to_string(ExtendedReal::infinity()) == "+inf");
}
