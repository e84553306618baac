#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include "olab/grid.hpp"

namespace olab {

enum class OperatorKind { TraceLinear, PucciPlus, PucciMinus, BellmanSup, FrozenShift };

const char* to_string(OperatorKind kind) noexcept;

// Where an operator is evaluated. `node` is the flat index on the problem grid
// when x is a grid node, -1 otherwise; nodal coefficient fields use it to skip
// interpolation.
struct Site {
  Point x{};
  std::ptrdiff_t node = -1;
};

using CoefficientFn = std::function<Hessian(const Point&)>;

namespace detail {
struct OperatorNode;
}

// F(M, x) from a closed catalog. Immutable; copies share state.
//
// Declared constants: lambda0 <= lambda1 are the ellipticity constants
// checked by verify_ellipticity, and (holder_alpha, holder_C, holder_C1) the
// modulus |F(M,x) - F(M,y)| <= C (|M|_F + C1) |x - y|^alpha.
class OperatorSpec {
 public:
  // Constant coefficient matrix; lambda0/lambda1 are its extreme eigenvalues.
  // Throws ValidationError unless A is positive definite.
  static OperatorSpec trace_linear(const Hessian& A);
  static OperatorSpec laplacian(int dim);
  // Variable coefficients. The caller declares the constants; they are
  // verified by sampling, not trusted.
  static OperatorSpec trace_linear(int dim, CoefficientFn A, double lambda0, double lambda1,
                                   double holder_alpha, double holder_C);
  static OperatorSpec pucci_plus(int dim, double lambda0, double lambda1);
  static OperatorSpec pucci_minus(int dim, double lambda0, double lambda1);
  // Pointwise max of TraceLinear members. Constants are the hull of the
  // members' constants.
  static OperatorSpec bellman_sup(std::vector<OperatorSpec> members);
  // base(H + S(x), x) - base(S(x), x) with S a nodal Hessian field on `grid`.
  // Hoelder constant is derived from base's constants and the sup norm and
  // Lipschitz constant of S.
  static OperatorSpec frozen_shift(const OperatorSpec& base, const Grid& grid,
                                   std::vector<Hessian> shift);

  OperatorKind kind() const noexcept;
  int dim() const noexcept;
  double lambda0() const noexcept;
  double lambda1() const noexcept;
  double holder_alpha() const noexcept;
  double holder_C() const noexcept;
  double holder_C1() const noexcept;
  bool spatially_varying() const noexcept;
  // Box used for sampling x in the property checks. [-1,1]^n unless the
  // operator carries a grid (FrozenShift) or set_domain was used.
  const std::vector<double>& domain_lo() const noexcept;
  const std::vector<double>& domain_hi() const noexcept;

  // Copies with different declared constants. The evaluation is unchanged.
  OperatorSpec with_ellipticity(double lambda0, double lambda1) const;
  OperatorSpec with_holder(double alpha, double C, double C1) const;
  OperatorSpec with_domain(std::vector<double> lo, std::vector<double> hi) const;

  // Throws NumericalError on non-finite H.
  double eval(const Hessian& H, const Site& site) const;
  double eval(const Hessian& H, const Point& x) const { return eval(H, Site{x, -1}); }

  // Value and a generalized gradient G = dF/dM, so the linearization is
  // F(H + dH) ~ F(H) + G.dot(dH). Pucci operators use weight lambda0 on zero
  // eigenvalues; BellmanSup uses its lowest-index active member.
  double eval_gradient(const Hessian& H, const Site& site, Hessian& G) const;

  const std::vector<OperatorSpec>& members() const;  // BellmanSup only
  const OperatorSpec& base() const;                  // FrozenShift only
  const std::vector<Hessian>& shift() const;         // FrozenShift only
  std::string describe() const;

 private:
  explicit OperatorSpec(std::shared_ptr<const detail::OperatorNode> node) : node_(std::move(node)) {}
  std::shared_ptr<const detail::OperatorNode> node_;
};

struct EllipticityViolation {
  Hessian M;
  Hessian N;
  Point x{};
  double lower_gap = 0.0;  // F(M+N) - F(M) - lambda0 tr N; negative is a violation
  double upper_gap = 0.0;  // lambda1 tr N - (F(M+N) - F(M)); negative is a violation
};

struct EllipticityReport {
  std::int64_t samples_tested = 0;
  std::int64_t violation_count = 0;
  std::vector<EllipticityViolation> violations;  // first few, at most 32
  double empirical_lambda0 = 0.0;  // min of (F(M+N) - F(M)) / tr N
  double empirical_lambda1 = 0.0;  // max of the same ratio
};

// Random symmetric M (entries in [-1,1] times a log-uniform magnitude up to
// 1e3), random positive definite N = Q diag(d) Q^T, random x in the sampling
// box. The first two samples are the fixed probes M = -2I, N = I and
// M = 2I, N = I. Deterministic in `seed`.
EllipticityReport verify_ellipticity(const OperatorSpec& op, std::int64_t n_samples,
                                     std::uint64_t seed);

struct HolderReport {
  std::int64_t samples_tested = 0;
  double max_ratio = 0.0;  // max |F(M,x) - F(M,y)| / ((|M|_F + C1) |x - y|^alpha)
  double holder_C = 0.0;
  double holder_alpha = 1.0;
  Point worst_x{};
  Point worst_y{};
  bool pass = true;
};

HolderReport verify_holder_x(const OperatorSpec& op, std::int64_t n_samples, std::uint64_t seed);

// Deterministic sampling helpers shared with the property tests.
class SampleRng {
 public:
  explicit SampleRng(std::uint64_t seed) : eng_(seed) {}
  // 53 random bits scaled to [0, 1); unlike std::uniform_real_distribution
  // this is identical across standard libraries.
  double uniform() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }
  double uniform(double a, double b) { return a + (b - a) * uniform(); }

 private:
  std::mt19937_64 eng_;
};

Hessian random_symmetric(SampleRng& rng, int dim, double scale);
// Q diag(d) Q^T with d in [dmin, dmax], Q a product of random Givens rotations.
Hessian random_positive_definite(SampleRng& rng, int dim, double dmin, double dmax);

}  // namespace olab
