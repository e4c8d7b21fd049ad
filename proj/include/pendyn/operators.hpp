#pragma once

#include <pendyn/core.hpp>

#include <cstdint>
#include <optional>
#include <string>
#include <variant>

namespace pendyn {

// ---------------------------------------------------------------------------
// Constraint sets
// ---------------------------------------------------------------------------

struct Hyperplane {
  Vec a;  // nonzero normal
  double b;
};

/// {x : A x = b}
struct AffineSubspace {
  Mat A;
  Vec b;
};

struct Box {
  Vec lo;
  Vec hi;
};

struct WholeSpace {
  Index n;
};

class ConstraintSet {
 public:
  using Kind = std::variant<Hyperplane, AffineSubspace, Box, WholeSpace>;

  static ConstraintSet hyperplane(Vec a, double b);
  static ConstraintSet affine_subspace(Mat A, Vec b);
  static ConstraintSet box(Vec lo, Vec hi);
  static ConstraintSet whole_space(Index n);

  Index dim() const noexcept { return dim_; }
  const Kind& kind() const noexcept { return kind_; }
  std::string name() const;

  bool contains(const Vec& x, double tol = 1e-9) const;
  /// Euclidean projection.
  Vec project(const Vec& x) const;

 private:
  ConstraintSet(Kind kind, Index dim) : kind_(std::move(kind)), dim_(dim) {}

  Kind kind_;
  Index dim_;
};

/// σ_C(u) = sup_{y ∈ C} <y, u>.
ExtendedReal support_function(const ConstraintSet& C, const Vec& u);

/// u ∈ N_C(x) via σ_C(u) − <x, u> ≤ 1e-9. Throws kInfeasible when x ∉ C.
bool normal_cone_member(const ConstraintSet& C, const Vec& x, const Vec& u);

// ---------------------------------------------------------------------------
// Prox gallery
// ---------------------------------------------------------------------------

struct ZeroFunction {};

/// w‖x‖₁
struct L1Norm {
  double weight;
};

/// (μ/2)‖x − z‖²
struct QuadraticShift {
  Vec center;
  double modulus;
};

struct Indicator {
  ConstraintSet set;
};

class ProxDescriptor {
 public:
  using Kind = std::variant<ZeroFunction, L1Norm, QuadraticShift, Indicator>;

  static ProxDescriptor zero() { return ProxDescriptor(ZeroFunction{}); }
  static ProxDescriptor l1(double weight);
  static ProxDescriptor quadratic_shift(Vec center, double modulus);
  static ProxDescriptor indicator(ConstraintSet set);

  const Kind& kind() const noexcept { return kind_; }
  std::string name() const;

  /// Modulus of strong convexity (0 when not strongly convex).
  double strong_convexity() const;
  /// f(x), +∞ outside the domain of an indicator.
  ExtendedReal value(const Vec& x) const;
  /// Intrinsic dimension if the descriptor carries vector data.
  std::optional<Index> dim() const;

 private:
  explicit ProxDescriptor(Kind kind) : kind_(std::move(kind)) {}

  Kind kind_;
};

/// argmin_y f(y) + ‖y − x‖² / (2λ)
Vec prox_scaled(const ProxDescriptor& f, double lambda, const Vec& x);

// ---------------------------------------------------------------------------
// Maximally monotone operators through their resolvents
// ---------------------------------------------------------------------------

class ResolventOperator {
 public:
  struct Zero {};
  /// x ↦ M x + q
  struct Affine {
    Mat M;
    Vec q;
  };
  /// A = ∂f
  struct Subdifferential {
    ProxDescriptor f;
  };
  using Kind = std::variant<Zero, Affine, Subdifferential>;

  static ResolventOperator zero(Index n);
  /// Checks that M + Mᵀ − 2ηI is positive semidefinite (tolerance 1e-10).
  static ResolventOperator affine(Mat M, Vec q, double eta = 0.0);
  /// Skips the monotonicity check. Only for exercising the property checkers.
  static ResolventOperator affine_unchecked(Mat M, Vec q);
  static ResolventOperator subdifferential(ProxDescriptor f, Index n,
                                           double eta = 0.0);

  Index dim() const noexcept { return dim_; }
  /// Declared strong-monotonicity modulus.
  double eta() const noexcept { return eta_; }
  const Kind& kind() const noexcept { return kind_; }
  std::string name() const;

 private:
  ResolventOperator(Kind kind, Index dim, double eta)
      : kind_(std::move(kind)), dim_(dim), eta_(eta) {}

  Kind kind_;
  Index dim_;
  double eta_;
};

/// J_{λA}(x): the unique p with x ∈ p + λA(p).
Vec resolvent(const ResolventOperator& A, double lambda, const Vec& x);

/// A_α(x) = (x − J_{αA}(x)) / α
Vec yosida(const ResolventOperator& A, double alpha, const Vec& x);

/// v ∈ A(x), tested as ‖J_A(x + v) − x‖ ≤ tol.
bool graph_member(const ResolventOperator& A, const Vec& x, const Vec& v,
                  double tol = 1e-8);

/// Smallest eigenvalue of (M + Mᵀ) / 2.
double min_symmetric_eigenvalue(const Mat& M);

// ---------------------------------------------------------------------------
// Cocoercive single-valued maps (D and B)
// ---------------------------------------------------------------------------

class CocoerciveMap {
 public:
  struct Zero {};
  /// x ↦ Q x + r, Q symmetric PSD
  struct GradientAffine {
    Mat Q;
    Vec r;
  };
  /// x ↦ (<a, x> − b) a, the gradient of ½(<a, x> − b)²
  struct QuadraticPenalty {
    Vec a;
    double b;
  };
  using Kind = std::variant<Zero, GradientAffine, QuadraticPenalty>;

  static CocoerciveMap zero(Index n);
  static CocoerciveMap gradient_affine(Mat Q, Vec r);
  static CocoerciveMap quadratic_penalty(Vec a, double b);

  Vec operator()(const Vec& x) const;

  /// Lipschitz constant L; the map is (1/L)-cocoercive. Zero for the zero map.
  double lipschitz() const noexcept { return lipschitz_; }
  Index dim() const noexcept { return dim_; }
  const Kind& kind() const noexcept { return kind_; }
  bool is_zero() const noexcept { return std::holds_alternative<Zero>(kind_); }
  std::string name() const;

  /// Value of the convex potential whose gradient this map is.
  double potential(const Vec& x) const;

  /// zer of the map as a constraint set.
  ConstraintSet zero_set() const;

 private:
  CocoerciveMap(Kind kind, Index dim, double lipschitz)
      : kind_(std::move(kind)), dim_(dim), lipschitz_(lipschitz) {}

  Kind kind_;
  Index dim_;
  double lipschitz_;
};

/// True when C is exactly zer B for the penalty pairing.
bool pairs_with(const ConstraintSet& C, const CocoerciveMap& B);

// ---------------------------------------------------------------------------
// Sampled property checks
// ---------------------------------------------------------------------------

struct PropertyReport {
  double max_violation = 0.0;
  std::size_t samples = 0;
  bool pass = true;
};

/// max over seeded normal pairs of ‖Jx − Jy‖² − <x − y, Jx − Jy>; passes at
/// ≤ 1e-9.
PropertyReport check_firm_nonexpansiveness(const ResolventOperator& A,
                                           double lambda,
                                           std::size_t sample_count,
                                           std::uint64_t seed);

/// max over seeded normal pairs of (1/L)‖Bx − By‖² − <x − y, Bx − By>;
/// passes at ≤ 1e-9.
PropertyReport check_cocoercivity(const CocoerciveMap& B,
                                  std::size_t sample_count, std::uint64_t seed);

}  // namespace pendyn
