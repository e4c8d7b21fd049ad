#include <pendyn/operators.hpp>

#include "overloaded.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

namespace pendyn {

using detail::Overloaded;

namespace {

constexpr double kPsdTol = 1e-10;
constexpr double kFeasTol = 1e-10;
constexpr double kNormalConeTol = 1e-9;
constexpr double kResolventResidualTol = 1e-8;

void require_square(const Mat& M, const char* what) {
  if (M.rows() != M.cols() || M.rows() == 0) {
    throw Error(ErrorCode::kDimensionMismatch,
                std::string(what) + " must be a nonempty square matrix");
  }
}

void require_finite(const Mat& M, const char* what) {
  if (!M.allFinite()) {
    throw Error(ErrorCode::kNonFinite, std::string(what) + " has non-finite entries");
  }
}

double soft_threshold(double x, double tau) {
  if (x > tau) return x - tau;
  if (x < -tau) return x + tau;
  return 0.0;
}

}  // namespace

// ---------------------------------------------------------------------------
// core.hpp helpers

const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidArgument: return "invalid-argument";
    case ErrorCode::kDimensionMismatch: return "dimension-mismatch";
    case ErrorCode::kNonFinite: return "non-finite";
    case ErrorCode::kSingularSystem: return "singular-system";
    case ErrorCode::kInfeasible: return "infeasible";
    case ErrorCode::kUnsupported: return "unsupported";
    case ErrorCode::kPairing: return "pairing";
    case ErrorCode::kInsufficientSamples: return "insufficient-samples";
    case ErrorCode::kStepUnderflow: return "step-underflow";
    case ErrorCode::kOracleFailure: return "oracle-failure";
    case ErrorCode::kParse: return "parse";
  }
  return "unknown";
}

ExtendedReal ExtendedReal::finite(double v) {
  if (!std::isfinite(v)) {
    throw Error(ErrorCode::kNonFinite, "ExtendedReal::finite given a non-finite value");
  }
  return ExtendedReal(false, v);
}

double ExtendedReal::value() const {
  if (infinite_) throw Error(ErrorCode::kInvalidArgument, "value() of +inf");
  return value_;
}

std::string to_string(const ExtendedReal& v) {
  if (v.is_infinite()) return "+inf";
  std::ostringstream os;
  os.precision(17);
  os << v.value();
  return os.str();
}

void require_dim(const Vec& x, Index n, const char* what) {
  if (x.size() != n) {
    std::ostringstream os;
    os << what << ": expected dimension " << n << ", got " << x.size();
    throw Error(ErrorCode::kDimensionMismatch, os.str());
  }
}

void require_finite(const Vec& x, const char* what) {
  if (!x.allFinite()) {
    throw Error(ErrorCode::kNonFinite, std::string(what) + " has non-finite coordinates");
  }
}

void require_positive(double v, const char* what) {
  if (!(v > 0.0) || !std::isfinite(v)) {
    throw Error(ErrorCode::kInvalidArgument, std::string(what) + " must be positive and finite");
  }
}

double min_symmetric_eigenvalue(const Mat& M) {
  const Mat S = 0.5 * (M + M.transpose());
  Eigen::SelfAdjointEigenSolver<Mat> es(S, Eigen::EigenvaluesOnly);
  return es.eigenvalues().minCoeff();
}

// ---------------------------------------------------------------------------
// ConstraintSet

ConstraintSet ConstraintSet::hyperplane(Vec a, double b) {
  if (a.size() == 0) throw Error(ErrorCode::kDimensionMismatch, "hyperplane normal is empty");
  require_finite(a, "hyperplane normal");
  if (!std::isfinite(b)) throw Error(ErrorCode::kNonFinite, "hyperplane offset is not finite");
  if (a.norm() == 0.0) {
    throw Error(ErrorCode::kInvalidArgument, "hyperplane normal must be nonzero");
  }
  const Index n = a.size();
  return ConstraintSet(Hyperplane{std::move(a), b}, n);
}

ConstraintSet ConstraintSet::affine_subspace(Mat A, Vec b) {
  if (A.cols() == 0 || A.rows() != b.size()) {
    throw Error(ErrorCode::kDimensionMismatch, "affine subspace: A is m x n, b must have m entries");
  }
  require_finite(A, "affine subspace matrix");
  require_finite(b, "affine subspace offset");
  Eigen::CompleteOrthogonalDecomposition<Mat> cod(A);
  const Vec y = cod.solve(b);
  if ((A * y - b).norm() > kFeasTol * (1.0 + b.norm())) {
    throw Error(ErrorCode::kInfeasible, "affine subspace is empty (A x = b inconsistent)");
  }
  const Index n = A.cols();
  return ConstraintSet(AffineSubspace{std::move(A), std::move(b)}, n);
}

ConstraintSet ConstraintSet::box(Vec lo, Vec hi) {
  if (lo.size() == 0 || lo.size() != hi.size()) {
    throw Error(ErrorCode::kDimensionMismatch, "box bounds must have equal nonzero dimension");
  }
  require_finite(lo, "box lower bound");
  require_finite(hi, "box upper bound");
  if ((lo.array() > hi.array()).any()) {
    throw Error(ErrorCode::kInfeasible, "box is empty (lo > hi in some coordinate)");
  }
  const Index n = lo.size();
  return ConstraintSet(Box{std::move(lo), std::move(hi)}, n);
}

ConstraintSet ConstraintSet::whole_space(Index n) {
  if (n < 1) throw Error(ErrorCode::kDimensionMismatch, "whole space needs n >= 1");
  return ConstraintSet(WholeSpace{n}, n);
}

std::string ConstraintSet::name() const {
  return std::visit(Overloaded{
                        [](const Hyperplane&) { return std::string("hyperplane"); },
                        [](const AffineSubspace&) { return std::string("affine-subspace"); },
                        [](const Box&) { return std::string("box"); },
                        [](const WholeSpace&) { return std::string("whole-space"); },
                    },
                    kind_);
}

bool ConstraintSet::contains(const Vec& x, double tol) const {
  require_dim(x, dim_, "ConstraintSet::contains");
  return std::visit(
      Overloaded{
          [&](const Hyperplane& h) {
            return std::abs(h.a.dot(x) - h.b) <= tol * std::max(1.0, h.a.norm());
          },
          [&](const AffineSubspace& s) {
            return (s.A * x - s.b).norm() <= tol * std::max(1.0, s.A.norm());
          },
          [&](const Box& bx) {
            return ((x.array() >= bx.lo.array() - tol) && (x.array() <= bx.hi.array() + tol)).all();
          },
          [](const WholeSpace&) { return true; },
      },
      kind_);
}

Vec ConstraintSet::project(const Vec& x) const {
  require_dim(x, dim_, "ConstraintSet::project");
  require_finite(x, "projection input");
  return std::visit(
      Overloaded{
          [&](const Hyperplane& h) -> Vec {
            return x - ((h.a.dot(x) - h.b) / h.a.squaredNorm()) * h.a;
          },
          [&](const AffineSubspace& s) -> Vec {
            // x − A⁺(Ax − b); A⁺ via the normal equations of the minimum-norm problem
            Eigen::CompleteOrthogonalDecomposition<Mat> cod(s.A);
            return x - cod.solve(s.A * x - s.b);
          },
          [&](const Box& bx) -> Vec { return x.cwiseMax(bx.lo).cwiseMin(bx.hi); },
          [&](const WholeSpace&) -> Vec { return x; },
      },
      kind_);
}

ExtendedReal support_function(const ConstraintSet& C, const Vec& u) {
  require_dim(u, C.dim(), "support_function");
  require_finite(u, "support_function direction");
  return std::visit(
      Overloaded{
          [&](const Hyperplane& h) {
            const double s = h.a.dot(u) / h.a.squaredNorm();
            if ((u - s * h.a).norm() > kFeasTol) return ExtendedReal::infinity();
            return ExtendedReal::finite(s * h.b);
          },
          [&](const AffineSubspace& sub) {
            // finite iff u ∈ range(Aᵀ); then σ(u) = <y, b> for any Aᵀy = u
            const Mat At = sub.A.transpose();
            Eigen::CompleteOrthogonalDecomposition<Mat> cod(At);
            const Vec y = cod.solve(u);
            if ((At * y - u).norm() > kFeasTol * (1.0 + u.norm())) {
              return ExtendedReal::infinity();
            }
            return ExtendedReal::finite(y.dot(sub.b));
          },
          [&](const Box& bx) {
            double s = 0.0;
            for (Index i = 0; i < u.size(); ++i) {
              s += std::max(u[i] * bx.lo[i], u[i] * bx.hi[i]);
            }
            return ExtendedReal::finite(s);
          },
          [&](const WholeSpace&) {
            return u.norm() == 0.0 ? ExtendedReal::finite(0.0) : ExtendedReal::infinity();
          },
      },
      C.kind());
}

bool normal_cone_member(const ConstraintSet& C, const Vec& x, const Vec& u) {
  require_dim(x, C.dim(), "normal_cone_member point");
  require_dim(u, C.dim(), "normal_cone_member direction");
  if (!C.contains(x, kNormalConeTol)) {
    throw Error(ErrorCode::kInfeasible, "normal_cone_member: x is not in C");
  }
  const ExtendedReal sigma = support_function(C, u);
  if (sigma.is_infinite()) return false;
  return sigma.value() - x.dot(u) <= kNormalConeTol;
}

// ---------------------------------------------------------------------------
// ProxDescriptor

ProxDescriptor ProxDescriptor::l1(double weight) {
  if (!(weight >= 0.0) || !std::isfinite(weight)) {
    throw Error(ErrorCode::kInvalidArgument, "l1 weight must be finite and >= 0");
  }
  return ProxDescriptor(L1Norm{weight});
}

ProxDescriptor ProxDescriptor::quadratic_shift(Vec center, double modulus) {
  require_positive(modulus, "quadratic-shift modulus");
  if (center.size() == 0) throw Error(ErrorCode::kDimensionMismatch, "quadratic-shift center is empty");
  require_finite(center, "quadratic-shift center");
  return ProxDescriptor(QuadraticShift{std::move(center), modulus});
}

ProxDescriptor ProxDescriptor::indicator(ConstraintSet set) {
  return ProxDescriptor(Indicator{std::move(set)});
}

std::string ProxDescriptor::name() const {
  return std::visit(Overloaded{
                        [](const ZeroFunction&) { return std::string("zero"); },
                        [](const L1Norm&) { return std::string("l1"); },
                        [](const QuadraticShift&) { return std::string("quadratic-shift"); },
                        [](const Indicator& i) { return "indicator(" + i.set.name() + ")"; },
                    },
                    kind_);
}

double ProxDescriptor::strong_convexity() const {
  if (const auto* q = std::get_if<QuadraticShift>(&kind_)) return q->modulus;
  return 0.0;
}

ExtendedReal ProxDescriptor::value(const Vec& x) const {
  return std::visit(
      Overloaded{
          [](const ZeroFunction&) { return ExtendedReal::finite(0.0); },
          [&](const L1Norm& f) { return ExtendedReal::finite(f.weight * x.lpNorm<1>()); },
          [&](const QuadraticShift& f) {
            require_dim(x, f.center.size(), "quadratic-shift value");
            return ExtendedReal::finite(0.5 * f.modulus * (x - f.center).squaredNorm());
          },
          [&](const Indicator& f) {
            return f.set.contains(x, kNormalConeTol) ? ExtendedReal::finite(0.0)
                                                     : ExtendedReal::infinity();
          },
      },
      kind_);
}

std::optional<Index> ProxDescriptor::dim() const {
  if (const auto* q = std::get_if<QuadraticShift>(&kind_)) return q->center.size();
  if (const auto* i = std::get_if<Indicator>(&kind_)) return i->set.dim();
  return std::nullopt;
}

Vec prox_scaled(const ProxDescriptor& f, double lambda, const Vec& x) {
  require_positive(lambda, "prox step lambda");
  require_finite(x, "prox input");
  return std::visit(
      Overloaded{
          [&](const ZeroFunction&) -> Vec { return x; },
          [&](const L1Norm& g) -> Vec {
            const double tau = lambda * g.weight;
            return x.unaryExpr([tau](double xi) { return soft_threshold(xi, tau); });
          },
          [&](const QuadraticShift& g) -> Vec {
            require_dim(x, g.center.size(), "prox_scaled(quadratic-shift)");
            const double lm = lambda * g.modulus;
            return (x + lm * g.center) / (1.0 + lm);
          },
          [&](const Indicator& g) -> Vec { return g.set.project(x); },
      },
      f.kind());
}

// ---------------------------------------------------------------------------
// ResolventOperator

ResolventOperator ResolventOperator::zero(Index n) {
  if (n < 1) throw Error(ErrorCode::kDimensionMismatch, "operator dimension must be >= 1");
  return ResolventOperator(Zero{}, n, 0.0);
}

ResolventOperator ResolventOperator::affine(Mat M, Vec q, double eta) {
  require_square(M, "affine operator matrix");
  require_dim(q, M.rows(), "affine operator offset");
  require_finite(M, "affine operator matrix");
  require_finite(q, "affine operator offset");
  if (!(eta >= 0.0) || !std::isfinite(eta)) {
    throw Error(ErrorCode::kInvalidArgument, "strong-monotonicity modulus must be >= 0");
  }
  // smallest eigenvalue of M + Mᵀ − 2ηI
  const double lo = 2.0 * (min_symmetric_eigenvalue(M) - eta);
  if (lo < -kPsdTol) {
    std::ostringstream os;
    os << "affine operator is not " << (eta > 0 ? "strongly " : "")
       << "monotone: smallest eigenvalue of M + M^T - 2 eta I is " << lo;
    throw Error(ErrorCode::kInvalidArgument, os.str());
  }
  const Index n = M.rows();
  return ResolventOperator(Affine{std::move(M), std::move(q)}, n, eta);
}

ResolventOperator ResolventOperator::affine_unchecked(Mat M, Vec q) {
  require_square(M, "affine operator matrix");
  require_dim(q, M.rows(), "affine operator offset");
  const Index n = M.rows();
  return ResolventOperator(Affine{std::move(M), std::move(q)}, n, 0.0);
}

ResolventOperator ResolventOperator::subdifferential(ProxDescriptor f, Index n, double eta) {
  if (n < 1) throw Error(ErrorCode::kDimensionMismatch, "operator dimension must be >= 1");
  if (const auto d = f.dim(); d && *d != n) {
    throw Error(ErrorCode::kDimensionMismatch, "prox descriptor dimension differs from operator dimension");
  }
  if (!(eta >= 0.0) || !std::isfinite(eta)) {
    throw Error(ErrorCode::kInvalidArgument, "strong-monotonicity modulus must be >= 0");
  }
  if (eta > f.strong_convexity()) {
    throw Error(ErrorCode::kInvalidArgument,
                "declared eta exceeds the strong convexity modulus of " + f.name());
  }
  return ResolventOperator(Subdifferential{std::move(f)}, n, eta);
}

std::string ResolventOperator::name() const {
  return std::visit(Overloaded{
                        [](const Zero&) { return std::string("zero"); },
                        [](const Affine&) { return std::string("affine"); },
                        [](const Subdifferential& s) { return "subdifferential(" + s.f.name() + ")"; },
                    },
                    kind_);
}

Vec resolvent(const ResolventOperator& A, double lambda, const Vec& x) {
  require_positive(lambda, "resolvent step lambda");
  require_dim(x, A.dim(), "resolvent input");
  require_finite(x, "resolvent input");
  return std::visit(
      Overloaded{
          [&](const ResolventOperator::Zero&) -> Vec { return x; },
          [&](const ResolventOperator::Affine& a) -> Vec {
            const Index n = a.M.rows();
            const Mat K = Mat::Identity(n, n) + lambda * a.M;
            const Vec rhs = x - lambda * a.q;
            const Vec p = K.partialPivLu().solve(rhs);
            const double residual = (K * p - rhs).norm();
            if (!p.allFinite() || residual > kResolventResidualTol * (1.0 + rhs.norm())) {
              std::ostringstream os;
              os << "resolvent: (I + lambda M) p = x - lambda q has residual " << residual
                 << "; M is not monotone";
              throw Error(ErrorCode::kSingularSystem, os.str());
            }
            return p;
          },
          [&](const ResolventOperator::Subdifferential& s) -> Vec {
            return prox_scaled(s.f, lambda, x);
          },
      },
      A.kind());
}

Vec yosida(const ResolventOperator& A, double alpha, const Vec& x) {
  require_positive(alpha, "Yosida parameter alpha");
  return (x - resolvent(A, alpha, x)) / alpha;
}

bool graph_member(const ResolventOperator& A, const Vec& x, const Vec& v, double tol) {
  require_dim(x, A.dim(), "graph_member point");
  require_dim(v, A.dim(), "graph_member value");
  return (resolvent(A, 1.0, x + v) - x).norm() <= tol;
}

// ---------------------------------------------------------------------------
// CocoerciveMap

CocoerciveMap CocoerciveMap::zero(Index n) {
  if (n < 1) throw Error(ErrorCode::kDimensionMismatch, "map dimension must be >= 1");
  return CocoerciveMap(Zero{}, n, 0.0);
}

CocoerciveMap CocoerciveMap::gradient_affine(Mat Q, Vec r) {
  require_square(Q, "gradient-affine matrix");
  require_dim(r, Q.rows(), "gradient-affine offset");
  require_finite(Q, "gradient-affine matrix");
  require_finite(r, "gradient-affine offset");
  if ((Q - Q.transpose()).norm() > kPsdTol * (1.0 + Q.norm())) {
    throw Error(ErrorCode::kInvalidArgument, "gradient-affine matrix must be symmetric");
  }
  Eigen::SelfAdjointEigenSolver<Mat> es(0.5 * (Q + Q.transpose()), Eigen::EigenvaluesOnly);
  if (es.eigenvalues().minCoeff() < -kPsdTol) {
    throw Error(ErrorCode::kInvalidArgument, "gradient-affine matrix must be positive semidefinite");
  }
  const double L = std::max(0.0, es.eigenvalues().maxCoeff());
  const Index n = Q.rows();
  return CocoerciveMap(GradientAffine{std::move(Q), std::move(r)}, n, L);
}

CocoerciveMap CocoerciveMap::quadratic_penalty(Vec a, double b) {
  if (a.size() == 0) throw Error(ErrorCode::kDimensionMismatch, "penalty normal is empty");
  require_finite(a, "penalty normal");
  if (!std::isfinite(b)) throw Error(ErrorCode::kNonFinite, "penalty offset is not finite");
  if (a.norm() == 0.0) throw Error(ErrorCode::kInvalidArgument, "penalty normal must be nonzero");
  const double L = a.squaredNorm();
  const Index n = a.size();
  return CocoerciveMap(QuadraticPenalty{std::move(a), b}, n, L);
}

Vec CocoerciveMap::operator()(const Vec& x) const {
  require_dim(x, dim_, "cocoercive map input");
  return std::visit(
      Overloaded{
          [&](const Zero&) -> Vec { return Vec::Zero(dim_); },
          [&](const GradientAffine& g) -> Vec { return g.Q * x + g.r; },
          [&](const QuadraticPenalty& p) -> Vec { return (p.a.dot(x) - p.b) * p.a; },
      },
      kind_);
}

double CocoerciveMap::potential(const Vec& x) const {
  require_dim(x, dim_, "cocoercive potential input");
  return std::visit(
      Overloaded{
          [](const Zero&) { return 0.0; },
          [&](const GradientAffine& g) { return 0.5 * x.dot(g.Q * x) + g.r.dot(x); },
          [&](const QuadraticPenalty& p) {
            const double r = p.a.dot(x) - p.b;
            return 0.5 * r * r;
          },
      },
      kind_);
}

std::string CocoerciveMap::name() const {
  return std::visit(Overloaded{
                        [](const Zero&) { return std::string("zero"); },
                        [](const GradientAffine&) { return std::string("gradient-affine"); },
                        [](const QuadraticPenalty&) { return std::string("gradient-quadratic-penalty"); },
                    },
                    kind_);
}

ConstraintSet CocoerciveMap::zero_set() const {
  return std::visit(
      Overloaded{
          [&](const Zero&) { return ConstraintSet::whole_space(dim_); },
          [&](const GradientAffine& g) { return ConstraintSet::affine_subspace(g.Q, -g.r); },
          [&](const QuadraticPenalty& p) { return ConstraintSet::hyperplane(p.a, p.b); },
      },
      kind_);
}

bool pairs_with(const ConstraintSet& C, const CocoerciveMap& B) {
  if (C.dim() != B.dim()) return false;
  if (B.is_zero()) return std::holds_alternative<WholeSpace>(C.kind());
  if (const auto* p = std::get_if<CocoerciveMap::QuadraticPenalty>(&B.kind())) {
    const auto* h = std::get_if<Hyperplane>(&C.kind());
    if (!h) return false;
    // same hyperplane up to scaling of (a, b)
    const double s = h->a.dot(p->a) / p->a.squaredNorm();
    return (h->a - s * p->a).norm() <= kFeasTol * (1.0 + h->a.norm()) &&
           std::abs(h->b - s * p->b) <= kFeasTol * (1.0 + std::abs(h->b));
  }
  return false;
}

// ---------------------------------------------------------------------------
// property checks

namespace {

Vec normal_sample(std::mt19937_64& rng, Index n) {
  std::normal_distribution<double> dist(0.0, 1.0);
  Vec x(n);
  for (Index i = 0; i < n; ++i) x[i] = dist(rng);
  return x;
}

}  // namespace

PropertyReport check_firm_nonexpansiveness(const ResolventOperator& A, double lambda,
                                           std::size_t sample_count, std::uint64_t seed) {
  if (sample_count < 1) throw Error(ErrorCode::kInvalidArgument, "sample_count must be >= 1");
  std::mt19937_64 rng(seed);
  PropertyReport report;
  report.max_violation = -std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < sample_count; ++k) {
    const Vec x = normal_sample(rng, A.dim());
    const Vec y = normal_sample(rng, A.dim());
    const Vec d = resolvent(A, lambda, x) - resolvent(A, lambda, y);
    report.max_violation = std::max(report.max_violation, d.squaredNorm() - (x - y).dot(d));
  }
  report.samples = sample_count;
  report.pass = report.max_violation <= 1e-9;
  return report;
}

PropertyReport check_cocoercivity(const CocoerciveMap& B, std::size_t sample_count,
                                  std::uint64_t seed) {
  if (sample_count < 1) throw Error(ErrorCode::kInvalidArgument, "sample_count must be >= 1");
  std::mt19937_64 rng(seed);
  PropertyReport report;
  report.max_violation = -std::numeric_limits<double>::infinity();
  const double inv_l = B.lipschitz() > 0.0 ? 1.0 / B.lipschitz() : 0.0;
  for (std::size_t k = 0; k < sample_count; ++k) {
    const Vec x = normal_sample(rng, B.dim());
    const Vec y = normal_sample(rng, B.dim());
    const Vec d = B(x) - B(y);
    report.max_violation = std::max(report.max_violation, inv_l * d.squaredNorm() - (x - y).dot(d));
  }
  report.samples = sample_count;
  report.pass = report.max_violation <= 1e-9;
  return report;
}

}  // namespace pendyn
