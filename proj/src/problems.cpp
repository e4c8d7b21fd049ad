#include <pendyn/problems.hpp>

#include "overloaded.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <sstream>

namespace pendyn {

using detail::Overloaded;

namespace {

const double kSqrt2 = std::sqrt(2.0);
constexpr double kCertTol = 1e-8;
// |x_i| below this counts as sitting on the kink of |.|
constexpr double kKinkTol = 1e-7;

Vec vec2(double a, double b) {
  Vec v(2);
  v << a, b;
  return v;
}

struct AffinePart {
  Mat M;
  Vec q;
};

AffinePart affine_part_of(const ResolventOperator& A) {
  const Index n = A.dim();
  return std::visit(
      Overloaded{
          [&](const ResolventOperator::Zero&) -> AffinePart { return {Mat::Zero(n, n), Vec::Zero(n)}; },
          [&](const ResolventOperator::Affine& a) -> AffinePart { return {a.M, a.q}; },
          [&](const ResolventOperator::Subdifferential& s) -> AffinePart {
            return std::visit(
                Overloaded{
                    [&](const ZeroFunction&) -> AffinePart { return {Mat::Zero(n, n), Vec::Zero(n)}; },
                    [&](const QuadraticShift& f) -> AffinePart {
                      return {f.modulus * Mat::Identity(n, n), -f.modulus * f.center};
                    },
                    [&](const auto&) -> AffinePart {
                      throw Error(ErrorCode::kUnsupported,
                                  "affine KKT oracle: subdifferential of " + s.f.name() + " is not affine");
                    },
                },
                s.f.kind());
          },
      },
      A.kind());
}

AffinePart affine_part_of(const CocoerciveMap& D) {
  const Index n = D.dim();
  return std::visit(
      Overloaded{
          [&](const CocoerciveMap::Zero&) -> AffinePart { return {Mat::Zero(n, n), Vec::Zero(n)}; },
          [&](const CocoerciveMap::GradientAffine& g) -> AffinePart { return {g.Q, g.r}; },
          [&](const CocoerciveMap::QuadraticPenalty& p) -> AffinePart {
            return {p.a * p.a.transpose(), -p.b * p.a};
          },
      },
      D.kind());
}

/// C = zer B = {x : E x = e}
std::pair<Mat, Vec> constraint_rows(const CocoerciveMap& B) {
  const Index n = B.dim();
  return std::visit(
      Overloaded{
          [&](const CocoerciveMap::Zero&) -> std::pair<Mat, Vec> { return {Mat(0, n), Vec(0)}; },
          [&](const CocoerciveMap::GradientAffine& g) -> std::pair<Mat, Vec> { return {g.Q, -g.r}; },
          [&](const CocoerciveMap::QuadraticPenalty& p) -> std::pair<Mat, Vec> {
            Vec e(1);
            e << p.b;
            return {p.a.transpose(), e};
          },
      },
      B.kind());
}

// ---------------------------------------------------------------------------
// grid refinement

/// f + g with differences Φ(x) − Φ(y) evaluated in factored form, so grid
/// levels far below √eps still rank points correctly.
class Objective {
 public:
  explicit Objective(const SystemSpec& spec) : spec_(spec) {
    const auto* sub = std::get_if<ResolventOperator::Subdifferential>(&spec.A().kind());
    if (!sub && !std::holds_alternative<ResolventOperator::Zero>(spec.A().kind())) {
      throw Error(ErrorCode::kUnsupported, "grid refinement oracle needs A = subdifferential of a function");
    }
    if (sub) {
      f_ = sub->f;
      if (std::holds_alternative<Indicator>(f_->kind())) {
        throw Error(ErrorCode::kUnsupported, "grid refinement oracle does not handle indicator functions");
      }
    }
  }

  double diff(const Vec& x, const Vec& y) const {
    const Vec d = x - y;
    double out = 0.0;
    if (f_) {
      out += std::visit(Overloaded{
                            [](const ZeroFunction&) { return 0.0; },
                            [&](const L1Norm& f) {
                              double s = 0.0;
                              for (Index i = 0; i < x.size(); ++i) s += std::abs(x[i]) - std::abs(y[i]);
                              return f.weight * s;
                            },
                            [&](const QuadraticShift& f) {
                              return 0.5 * f.modulus * d.dot(x + y - 2.0 * f.center);
                            },
                            [](const Indicator&) { return 0.0; },
                        },
                        f_->kind());
    }
    out += std::visit(Overloaded{
                          [](const CocoerciveMap::Zero&) { return 0.0; },
                          [&](const CocoerciveMap::GradientAffine& g) {
                            return 0.5 * d.dot(g.Q * (x + y)) + g.r.dot(d);
                          },
                          [&](const CocoerciveMap::QuadraticPenalty& p) {
                            return 0.5 * p.a.dot(d) * (p.a.dot(x) + p.a.dot(y) - 2.0 * p.b);
                          },
                      },
                      spec_.D().kind());
    return out;
  }

  const std::optional<ProxDescriptor>& f() const { return f_; }

 private:
  const SystemSpec& spec_;
  std::optional<ProxDescriptor> f_;
};

/// x = base + P θ
struct Chart {
  Vec base;
  Mat P;
};

Chart chart_of(const ConstraintSet& C) {
  if (C.dim() != 2) {
    throw Error(ErrorCode::kUnsupported, "grid refinement oracle works in two dimensions only");
  }
  return std::visit(
      Overloaded{
          [](const Hyperplane& h) -> Chart {
            Mat P(2, 1);
            P << -h.a[1], h.a[0];
            P /= h.a.norm();
            return {h.b / h.a.squaredNorm() * h.a, P};
          },
          [](const WholeSpace&) -> Chart { return {Vec::Zero(2), Mat::Identity(2, 2)}; },
          [&](const auto&) -> Chart {
            throw Error(ErrorCode::kUnsupported, "grid refinement oracle needs C to be a line or the plane, got " +
                                                     C.name());
          },
      },
      C.kind());
}

struct GridLevel {
  Vec best;
  bool on_edge = false;
};

GridLevel scan(const Objective& obj, const Chart& ch, const Vec& center, double half_width, int m) {
  const Index k = ch.P.cols();
  const Vec x_center = ch.base + ch.P * center;
  GridLevel out;
  out.best = center;
  double best_val = 0.0;  // Φ(center) − Φ(center)
  std::vector<int> idx(static_cast<std::size_t>(k), 0);
  const auto coord = [&](int j) { return -half_width + 2.0 * half_width * j / (m - 1); };
  while (true) {
    Vec theta = center;
    for (Index a = 0; a < k; ++a) theta[a] += coord(idx[static_cast<std::size_t>(a)]);
    const double val = obj.diff(ch.base + ch.P * theta, x_center);
    if (val < best_val) {
      best_val = val;
      out.best = theta;
      out.on_edge = std::any_of(idx.begin(), idx.end(), [&](int j) { return j == 0 || j == m - 1; });
    }
    Index a = 0;
    while (a < k && ++idx[static_cast<std::size_t>(a)] == m) idx[static_cast<std::size_t>(a++)] = 0;
    if (a == k) break;
  }
  return out;
}

/// v ∈ ∂f(x*) and p ∈ N_C(x*) with v + D(x*) + p = 0, read off the first-order
/// conditions at the minimizer.
std::pair<Vec, Vec> certificate(const SystemSpec& spec, const Objective& obj, const Vec& x) {
  const Index n = x.size();
  const Vec dx = spec.D()(x);
  Vec v = Vec::Zero(n);
  std::vector<bool> free(static_cast<std::size_t>(n), false);
  double w = 0.0;
  if (const auto& f = obj.f()) {
    std::visit(Overloaded{
                   [](const ZeroFunction&) {},
                   [&](const QuadraticShift& q) { v = q.modulus * (x - q.center); },
                   [&](const L1Norm& l) {
                     w = l.weight;
                     for (Index i = 0; i < n; ++i) {
                       if (std::abs(x[i]) > kKinkTol) {
                         v[i] = l.weight * (x[i] > 0 ? 1.0 : -1.0);
                       } else {
                         free[static_cast<std::size_t>(i)] = true;
                       }
                     }
                   },
                   [](const Indicator&) {},
               },
               f->kind());
  }

  Vec a = Vec::Zero(n);
  if (const auto* h = std::get_if<Hyperplane>(&spec.constraint_set().kind())) a = h->a;

  double s = 0.0;
  if (a.norm() > 0.0) {
    double num = 0.0, den = 0.0;
    for (Index i = 0; i < n; ++i) {
      if (free[static_cast<std::size_t>(i)]) continue;
      num -= a[i] * (v[i] + dx[i]);
      den += a[i] * a[i];
    }
    if (den > 0.0) {
      s = num / den;
    } else {
      // every row free: pick the middle of the feasible multiplier interval
      double lo = -std::numeric_limits<double>::infinity();
      double hi = std::numeric_limits<double>::infinity();
      for (Index i = 0; i < n; ++i) {
        if (a[i] == 0.0) continue;
        double l = (-w - dx[i]) / a[i];
        double u = (w - dx[i]) / a[i];
        if (l > u) std::swap(l, u);
        lo = std::max(lo, l);
        hi = std::min(hi, u);
      }
      if (lo > hi + 1e-12) throw Error(ErrorCode::kOracleFailure, "grid oracle: no multiplier fits the l1 kinks");
      s = std::isfinite(lo) && std::isfinite(hi) ? 0.5 * (lo + hi) : (std::isfinite(lo) ? lo : hi);
    }
  }
  for (Index i = 0; i < n; ++i) {
    if (!free[static_cast<std::size_t>(i)]) continue;
    v[i] = -dx[i] - s * a[i];
    if (std::abs(v[i]) > w * (1.0 + 1e-9) + 1e-12) {
      throw Error(ErrorCode::kOracleFailure, "grid oracle: subgradient on a kink exceeds the l1 weight");
    }
  }
  return {v, s * a};
}

void check_certificate(const SystemSpec& spec, const OracleResult& r, const std::string& who) {
  const AnchorCheck c = verify_anchor(spec, r.anchor, kCertTol);
  if (!c.pass()) {
    std::ostringstream os;
    os << who << ": certificate check failed (x* in C: " << c.in_constraint << ", v in A(x*): " << c.v_in_A
       << ", p in N_C(x*): " << c.p_in_normal_cone << ", |v + D(x*) + p| = " << c.decomposition_residual << ")";
    throw Error(ErrorCode::kOracleFailure, os.str());
  }
}

}  // namespace

const char* to_string(OracleMethod m) {
  switch (m) {
    case OracleMethod::kAffineKkt: return "affine-kkt";
    case OracleMethod::kGridRefinement: return "grid-refinement";
  }
  return "?";
}

ScheduleSet default_schedules() {
  return {PowerSchedule(1.0, -0.75), PowerSchedule(1.0, 0.5), DampingSchedule::constant(kSqrt2), 0.0};
}

ProblemInstance build_bilevel_quadratic(std::string name, ProxDescriptor f, CocoerciveMap g,
                                        CocoerciveMap psi, ScheduleSet schedules, Vec u0, Vec v0,
                                        std::optional<ConstraintSet> C) {
  const Index n = g.dim();
  if (psi.dim() != n) throw Error(ErrorCode::kDimensionMismatch, "g and psi must share one dimension");
  if (const auto fd = f.dim(); fd && *fd != n) {
    throw Error(ErrorCode::kDimensionMismatch, "f and g must share one dimension");
  }
  if (C && !pairs_with(*C, psi)) {
    throw Error(ErrorCode::kPairing, "constraint set " + C->name() + " is not zer of " + psi.name());
  }
  const double eta = f.strong_convexity();
  const bool grid = std::holds_alternative<L1Norm>(f.kind());
  auto A = ResolventOperator::subdifferential(std::move(f), n, eta);
  ProblemInstance inst{std::move(name),
                       "bilevel: A = subdifferential of " + A.name() + ", D = " + g.name() + ", B = " + psi.name(),
                       SystemSpec(std::move(A), std::move(g), std::move(psi), std::move(schedules), std::move(u0),
                                  std::move(v0)),
                       grid ? OracleMethod::kGridRefinement : OracleMethod::kAffineKkt,
                       eta > 0.0,
                       eta,
                       std::nullopt};
  return inst;
}

OracleResult affine_kkt_oracle(const SystemSpec& spec) {
  const Index n = spec.dim();
  const AffinePart a = affine_part_of(spec.A());
  const AffinePart d = affine_part_of(spec.D());
  const auto [E, e] = constraint_rows(spec.B());
  const Index m = E.rows();

  Mat K = Mat::Zero(n + m, n + m);
  K.topLeftCorner(n, n) = a.M + d.M;
  K.topRightCorner(n, m) = E.transpose();
  K.bottomLeftCorner(m, n) = E;
  Vec rhs(n + m);
  rhs << -(a.q + d.q), e;

  Vec z = K.completeOrthogonalDecomposition().solve(rhs);
  if ((K * z - rhs).norm() > 1e-9 * (1.0 + rhs.norm())) {
    throw Error(ErrorCode::kOracleFailure, "affine KKT system is inconsistent: no zero of A + D + N_C");
  }

  OracleResult out;
  out.method = OracleMethod::kAffineKkt;
  Eigen::FullPivLU<Mat> lu(K);
  lu.setThreshold(1e-10);
  if (lu.rank() < K.rows()) {
    const Mat ker = lu.kernel();
    const Mat ker_x = ker.topRows(n);
    if (ker_x.norm() > 1e-10) {
      const Vec c = ker_x.completeOrthogonalDecomposition().solve(spec.u0() - z.head(n));
      z += ker * c;
      out.unique = false;
      out.notes.emplace_back("non-unique: returned the solution closest to u0");
    }
  }
  const Vec x = z.head(n);
  const Vec p = E.transpose() * z.tail(m);
  const Vec v = a.M * x + a.q;
  out.anchor = zero_anchor(spec, x, v, p);
  return out;
}

OracleResult grid_refinement_oracle(const SystemSpec& spec, const GridOptions& opts) {
  if (opts.points_per_axis < 3 || opts.points_per_axis % 2 == 0) {
    throw Error(ErrorCode::kInvalidArgument, "grid oracle needs an odd number (>= 3) of points per axis");
  }
  const Objective obj(spec);
  const Chart ch = chart_of(spec.constraint_set());
  const auto to_x = [&](const Vec& th) -> Vec { return ch.base + ch.P * th; };

  Vec center = ch.P.transpose() * (spec.u0() - ch.base);
  double W = opts.initial_half_width;
  OracleResult out;
  out.method = OracleMethod::kGridRefinement;

  // walk the coarse grid until its minimizer is interior
  GridLevel lvl = scan(obj, ch, center, W, opts.points_per_axis);
  for (int k = 0; lvl.on_edge && k < 64; ++k) {
    center = lvl.best;
    W *= 2.0;
    lvl = scan(obj, ch, center, W, opts.points_per_axis);
  }
  if (lvl.on_edge) throw Error(ErrorCode::kOracleFailure, "grid oracle: objective appears unbounded below");

  Vec best = lvl.best;
  double gap = std::numeric_limits<double>::infinity();
  int level = 0;
  while (level < opts.max_levels) {
    W = 2.0 * W / (opts.points_per_axis - 1);  // one old spacing
    lvl = scan(obj, ch, best, W, opts.points_per_axis);
    ++level;
    gap = std::abs(obj.diff(to_x(lvl.best), to_x(best)));
    best = lvl.best;
    if (gap <= opts.gap_tol && W <= opts.width_tol * (1.0 + best.norm())) break;
  }
  if (level == opts.max_levels) {
    throw Error(ErrorCode::kOracleFailure, "grid oracle: refinement did not settle");
  }
  out.levels = level;
  out.level_gap = gap;
  const Vec x = to_x(best);
  auto [v, p] = certificate(spec, obj, x);
  out.anchor = zero_anchor(spec, x, std::move(v), std::move(p));
  return out;
}

OracleResult kkt_oracle(const ProblemInstance& inst) {
  OracleResult r = inst.oracle == OracleMethod::kAffineKkt ? affine_kkt_oracle(inst.spec)
                                                           : grid_refinement_oracle(inst.spec);
  if (!r.unique && inst.known_limit && r.method == OracleMethod::kAffineKkt) {
    const AffinePart a = affine_part_of(inst.spec.A());
    const Vec& x = *inst.known_limit;
    const Vec v = a.M * x + a.q;
    const Vec p = -(v + inst.spec.D()(x));
    r.anchor = zero_anchor(inst.spec, x, v, p);
    r.notes.emplace_back("anchored at the known limit of the trajectory");
  }
  check_certificate(inst.spec, r, inst.name);
  return r;
}

std::vector<ProblemInstance> gallery(const ScheduleSet& schedules) {
  const Vec zero2 = Vec::Zero(2);
  const Vec a = vec2(1.0, 1.0);
  const auto psi = CocoerciveMap::quadratic_penalty(a, 1.0);
  const Mat I2 = Mat::Identity(2, 2);

  std::vector<ProblemInstance> out;
  out.push_back(build_bilevel_quadratic("min-norm-on-line", ProxDescriptor::zero(),
                                        CocoerciveMap::gradient_affine(I2, zero2), psi, schedules, zero2, zero2));
  out.back().description = "minimize 1/2 |x|^2 over the line x1 + x2 = 1";

  out.push_back(build_bilevel_quadratic("strongly-monotone-projection",
                                        ProxDescriptor::quadratic_shift(vec2(2.0, 0.0), 1.0),
                                        CocoerciveMap::zero(2), psi, schedules, zero2, zero2));
  out.back().description = "minimize 1/2 |x - (2, 0)|^2 over the line x1 + x2 = 1";

  out.push_back(build_bilevel_quadratic("l1-on-line", ProxDescriptor::l1(1.0),
                                        CocoerciveMap::gradient_affine(I2, -vec2(1.5, 1.0)), psi, schedules,
                                        zero2, zero2));
  out.back().description = "minimize |x|_1 + 1/2 |x - (1.5, 1)|^2 over the line x1 + x2 = 1";

  {
    Mat M(2, 2);
    M << 0.1, 1.0, -1.0, 0.1;
    ProblemInstance inst{"affine-inclusion",
                         "0 in Mx + q + N_C(x), M = [[0,1],[-1,0]] + 0.1 I, C the line x1 + x2 = 1",
                         SystemSpec(ResolventOperator::affine(M, vec2(-1.0, 0.5), 0.1), CocoerciveMap::zero(2),
                                    psi, schedules, zero2, zero2),
                         OracleMethod::kAffineKkt, true, 0.1, std::nullopt};
    out.push_back(std::move(inst));
  }

  {
    Mat Q(2, 2);
    Q << 2.0, 0.5, 0.5, 1.0;
    out.push_back(build_bilevel_quadratic("unconstrained-forward-backward",
                                          ProxDescriptor::quadratic_shift(vec2(1.0, -1.0), 1.0),
                                          CocoerciveMap::gradient_affine(Q, vec2(-1.0, 0.5)), CocoerciveMap::zero(2),
                                          schedules, zero2, zero2));
    out.back().description = "B = 0: forward-backward dynamics for 1/2 |x - (1, -1)|^2 + g, g quadratic";
  }

  out.push_back(build_bilevel_quadratic("feasibility-on-line", ProxDescriptor::zero(), CocoerciveMap::zero(2),
                                        psi, schedules, vec2(1.0, 2.0), zero2));
  out.back().description = "f = g = 0: every point of the line x1 + x2 = 1 solves; non-unique";

  {
    const Vec u0 = vec2(1.0, 0.0);
    const Vec v0 = vec2(0.0, 1.0);
    ProblemInstance inst{"trivial", "A = D = B = 0: x(t) = u0 + (v0 / g)(1 - exp(-g t)) for constant damping g",
                         SystemSpec(ResolventOperator::zero(2), CocoerciveMap::zero(2), CocoerciveMap::zero(2),
                                    schedules, u0, v0),
                         OracleMethod::kAffineKkt, false, 0.0, std::nullopt};
    if (schedules.gamma.is_constant()) inst.known_limit = u0 + v0 / schedules.gamma.g0();
    out.push_back(std::move(inst));
  }
  return out;
}

ProblemInstance find_instance(const std::string& name, const ScheduleSet& schedules) {
  auto all = gallery(schedules);
  for (auto& inst : all) {
    if (inst.name == name) return std::move(inst);
  }
  std::string known;
  for (const auto& inst : all) known += (known.empty() ? "" : ", ") + inst.name;
  throw Error(ErrorCode::kInvalidArgument, "unknown problem '" + name + "' (known: " + known + ")");
}

std::vector<ProblemInstance> scaled_gallery(Index n, std::uint64_t seed, const ScheduleSet& schedules) {
  if (n < 1) throw Error(ErrorCode::kInvalidArgument, "scaled gallery dimension must be >= 1");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  const auto rvec = [&] {
    Vec v(n);
    for (Index i = 0; i < n; ++i) v[i] = normal(rng);
    return v;
  };
  const auto rmat = [&] {
    Mat m(n, n);
    for (Index j = 0; j < n; ++j)
      for (Index i = 0; i < n; ++i) m(i, j) = normal(rng);
    return m;
  };
  const std::string sfx = "-n" + std::to_string(n);
  const Vec zero = Vec::Zero(n);
  const Mat I = Mat::Identity(n, n);
  const Vec a = rvec();
  const auto psi = CocoerciveMap::quadratic_penalty(a, 1.0);

  std::vector<ProblemInstance> out;
  out.push_back(build_bilevel_quadratic("min-norm-on-line" + sfx, ProxDescriptor::zero(),
                                        CocoerciveMap::gradient_affine(I, zero), psi, schedules, zero, zero));
  out.push_back(build_bilevel_quadratic("strongly-monotone-projection" + sfx,
                                        ProxDescriptor::quadratic_shift(rvec(), 1.0), CocoerciveMap::zero(n), psi,
                                        schedules, zero, zero));
  {
    const Mat G = rmat();
    const Mat M = 0.5 * (G - G.transpose()) / std::sqrt(static_cast<double>(n)) + 0.1 * I;
    out.push_back({"affine-inclusion" + sfx, "random skew-symmetric plus 0.1 I over a random hyperplane",
                   SystemSpec(ResolventOperator::affine(M, rvec(), 0.1), CocoerciveMap::zero(n), psi, schedules,
                              zero, zero),
                   OracleMethod::kAffineKkt, true, 0.1, std::nullopt});
  }
  {
    const Mat G = rmat();
    const Mat Q = G.transpose() * G / static_cast<double>(n);
    out.push_back(build_bilevel_quadratic("unconstrained-forward-backward" + sfx,
                                          ProxDescriptor::quadratic_shift(rvec(), 1.0),
                                          CocoerciveMap::gradient_affine(0.5 * (Q + Q.transpose()), rvec()),
                                          CocoerciveMap::zero(n), schedules, zero, zero));
  }
  return out;
}

}  // namespace pendyn
