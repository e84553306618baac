#include "olab/operators.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <optional>
#include <sstream>

#include "olab/error.hpp"
#include "olab/symeig.hpp"

namespace olab {

namespace detail {

struct OperatorNode {
  OperatorKind kind = OperatorKind::TraceLinear;
  int dim = 1;
  double lambda0 = 1.0, lambda1 = 1.0;  // declared constants
  double p0 = 1.0, p1 = 1.0;            // Pucci formula constants
  double alpha = 1.0, C = 0.0, C1 = 1.0;
  bool varying = false;
  std::vector<double> dlo, dhi;

  // TraceLinear
  Hessian A;
  CoefficientFn A_fn;

  // BellmanSup
  std::vector<OperatorSpec> members;

  // FrozenShift
  std::vector<OperatorSpec> base;  // exactly one entry
  std::optional<Grid> grid;
  std::vector<Hessian> shift;
  std::vector<double> base_at_shift;
};

}  // namespace detail

using detail::OperatorNode;

const char* to_string(OperatorKind kind) noexcept {
  switch (kind) {
    case OperatorKind::TraceLinear: return "trace_linear";
    case OperatorKind::PucciPlus: return "pucci_plus";
    case OperatorKind::PucciMinus: return "pucci_minus";
    case OperatorKind::BellmanSup: return "bellman_sup";
    case OperatorKind::FrozenShift: return "frozen_shift";
  }
  return "unknown";
}

namespace {

void check_dim(int dim) {
  if (dim < 1 || dim > kMaxDim) throw ValidationError("operator dimension must be 1, 2 or 3");
}

void check_constants(double l0, double l1) {
  if (!(l0 > 0.0) || !(l1 >= l0) || !std::isfinite(l1)) {
    std::ostringstream os;
    os << "ellipticity constants must satisfy 0 < lambda0 <= lambda1 < inf (got " << l0 << ", " << l1
       << ")";
    throw ValidationError(os.str());
  }
}

void default_domain(OperatorNode& n) {
  n.dlo.assign(n.dim, -1.0);
  n.dhi.assign(n.dim, 1.0);
}

// Pucci value and gradient from the eigen-decomposition. pos/neg are the
// weights on positive and on non-positive eigenvalues.
double pucci(const Hessian& H, double pos, double neg, Hessian* G) {
  const int n = H.dim();
  if (n == 1) {
    const double e = H(0, 0);
    if (!std::isfinite(e)) throw NumericalError("operator evaluated on a non-finite matrix");
    const double w = e > 0.0 ? pos : neg;
    if (G) {
      *G = Hessian(1);
      G->set(0, 0, w);
    }
    return w * e;
  }
  const SymEig eg = symmetric_eigen(H);
  double v = 0.0;
  if (G) *G = Hessian(n);
  for (int j = 0; j < n; ++j) {
    const double e = eg.values[j];
    const double w = e > 0.0 ? pos : neg;
    v += w * e;
    if (G) {
      for (int a = 0; a < n; ++a)
        for (int b = a; b < n; ++b)
          G->set(a, b, (*G)(a, b) + w * eg.vectors[a][j] * eg.vectors[b][j]);
    }
  }
  return v;
}

Hessian shift_at(const OperatorNode& n, const Site& site) {
  if (site.node >= 0) return n.shift[static_cast<std::size_t>(site.node)];
  const auto st = interpolation_stencil(*n.grid, site.x);
  Hessian S(n.dim);
  for (int i = 0; i < st.size; ++i) S = S + n.shift[st.node[i]] * st.weight[i];
  return S;
}

double eval_node(const OperatorNode& n, const Hessian& H, const Site& site, Hessian* G) {
  switch (n.kind) {
    case OperatorKind::TraceLinear: {
      if (!H.all_finite()) throw NumericalError("operator evaluated on a non-finite matrix");
      if (n.A_fn) {
        const Hessian A = n.A_fn(site.x);
        if (G) *G = A;
        return A.dot(H);
      }
      if (G) *G = n.A;
      return n.A.dot(H);
    }
    case OperatorKind::PucciPlus:
      return pucci(H, n.p1, n.p0, G);
    case OperatorKind::PucciMinus:
      return pucci(H, n.p0, n.p1, G);
    case OperatorKind::BellmanSup: {
      double best = 0.0;
      std::size_t arg = 0;
      for (std::size_t i = 0; i < n.members.size(); ++i) {
        const double v = n.members[i].eval(H, site);
        if (i == 0 || v > best) {
          best = v;
          arg = i;
        }
      }
      if (G) n.members[arg].eval_gradient(H, site, *G);
      return best;
    }
    case OperatorKind::FrozenShift: {
      const OperatorSpec& base = n.base.front();
      const Hessian S = shift_at(n, site);
      const double at_shift = site.node >= 0 ? n.base_at_shift[static_cast<std::size_t>(site.node)]
                                             : base.eval(S, site);
      const Hessian HS = H + S;
      const double v = G ? base.eval_gradient(HS, site, *G) : base.eval(HS, site);
      return v - at_shift;
    }
  }
  return 0.0;
}

}  // namespace

OperatorSpec OperatorSpec::trace_linear(const Hessian& A) {
  check_dim(A.dim());
  if (!A.all_finite()) throw ValidationError("coefficient matrix has non-finite entries");
  const auto ev = symmetric_eigenvalues(A);
  auto n = std::make_shared<OperatorNode>();
  n->kind = OperatorKind::TraceLinear;
  n->dim = A.dim();
  n->A = A;
  n->lambda0 = ev[0];
  n->lambda1 = ev[A.dim() - 1];
  if (!(n->lambda0 > 0.0)) throw ValidationError("coefficient matrix must be positive definite");
  default_domain(*n);
  return OperatorSpec(std::move(n));
}

OperatorSpec OperatorSpec::laplacian(int dim) {
  check_dim(dim);
  return trace_linear(Hessian::identity(dim));
}

OperatorSpec OperatorSpec::trace_linear(int dim, CoefficientFn A, double lambda0, double lambda1,
                                        double holder_alpha, double holder_C) {
  check_dim(dim);
  check_constants(lambda0, lambda1);
  if (!A) throw ValidationError("coefficient function is empty");
  if (!(holder_alpha > 0.0 && holder_alpha <= 1.0)) throw ValidationError("holder_alpha must lie in (0, 1]");
  if (!(holder_C >= 0.0)) throw ValidationError("holder_C must be nonnegative");
  auto n = std::make_shared<OperatorNode>();
  n->kind = OperatorKind::TraceLinear;
  n->dim = dim;
  n->A_fn = std::move(A);
  n->A = Hessian(dim);
  n->lambda0 = lambda0;
  n->lambda1 = lambda1;
  n->alpha = holder_alpha;
  n->C = holder_C;
  n->varying = true;
  default_domain(*n);
  return OperatorSpec(std::move(n));
}

OperatorSpec OperatorSpec::pucci_plus(int dim, double lambda0, double lambda1) {
  check_dim(dim);
  check_constants(lambda0, lambda1);
  auto n = std::make_shared<OperatorNode>();
  n->kind = OperatorKind::PucciPlus;
  n->dim = dim;
  n->lambda0 = n->p0 = lambda0;
  n->lambda1 = n->p1 = lambda1;
  default_domain(*n);
  return OperatorSpec(std::move(n));
}

OperatorSpec OperatorSpec::pucci_minus(int dim, double lambda0, double lambda1) {
  OperatorSpec op = pucci_plus(dim, lambda0, lambda1);
  auto n = std::make_shared<OperatorNode>(*op.node_);
  n->kind = OperatorKind::PucciMinus;
  return OperatorSpec(std::move(n));
}

OperatorSpec OperatorSpec::bellman_sup(std::vector<OperatorSpec> members) {
  if (members.empty()) throw ValidationError("bellman_sup needs at least one member");
  auto n = std::make_shared<OperatorNode>();
  n->kind = OperatorKind::BellmanSup;
  n->dim = members.front().dim();
  n->lambda0 = members.front().lambda0();
  n->lambda1 = members.front().lambda1();
  n->alpha = members.front().holder_alpha();
  for (std::size_t i = 0; i < members.size(); ++i) {
    const auto& m = members[i];
    if (m.kind() != OperatorKind::TraceLinear) {
      throw ValidationError("bellman_sup member " + std::to_string(i) + " is not trace_linear");
    }
    if (m.dim() != n->dim) throw ValidationError("bellman_sup members differ in dimension");
    n->lambda0 = std::min(n->lambda0, m.lambda0());
    n->lambda1 = std::max(n->lambda1, m.lambda1());
    n->alpha = std::min(n->alpha, m.holder_alpha());
    n->varying = n->varying || m.spatially_varying();
  }
  default_domain(*n);
  // On a box of diameter d, |x-y|^a_i <= max(1,d)^(a_i - a) |x-y|^a.
  double diam = 0.0;
  for (int a = 0; a < n->dim; ++a) diam += 4.0;
  diam = std::max(1.0, std::sqrt(diam));
  for (const auto& m : members) {
    n->C = std::max(n->C, m.holder_C() * std::pow(diam, m.holder_alpha() - n->alpha));
  }
  n->members = std::move(members);
  return OperatorSpec(std::move(n));
}

OperatorSpec OperatorSpec::frozen_shift(const OperatorSpec& base, const Grid& grid,
                                        std::vector<Hessian> shift) {
  if (base.dim() != grid.dim()) throw ValidationError("frozen_shift: operator and grid differ in dimension");
  if (shift.size() != grid.size()) throw ValidationError("frozen_shift: shift field size does not match grid");
  auto n = std::make_shared<OperatorNode>();
  n->kind = OperatorKind::FrozenShift;
  n->dim = base.dim();
  n->lambda0 = base.lambda0();
  n->lambda1 = base.lambda1();
  n->alpha = base.holder_alpha();
  n->C1 = base.holder_C1();
  n->varying = true;
  n->dlo = grid.lo_vector();
  n->dhi = grid.hi_vector();
  n->base_at_shift.resize(grid.size());
  double sup = 0.0;
  for (std::size_t k = 0; k < grid.size(); ++k) {
    if (!shift[k].all_finite()) throw ValidationError("frozen_shift: non-finite shift at node " + std::to_string(k));
    sup = std::max(sup, shift[k].frobenius_norm());
    n->base_at_shift[k] = base.eval(shift[k], Site{grid.node(k), static_cast<std::ptrdiff_t>(k)});
  }
  // Lipschitz constant of the multilinear interpolant of the shift.
  double lip2 = 0.0;
  for (int a = 0; a < grid.dim(); ++a) {
    double la = 0.0;
    for (std::size_t k = 0; k < grid.size(); ++k) {
      const Index idx = grid.unflat(k);
      if (idx[a] + 1 >= grid.count(a)) continue;
      la = std::max(la, (shift[k + grid.stride(a)] - shift[k]).frobenius_norm() / grid.h(a));
    }
    lip2 += la * la;
  }
  double diam2 = 0.0;
  for (int a = 0; a < grid.dim(); ++a) diam2 += (grid.hi(a) - grid.lo(a)) * (grid.hi(a) - grid.lo(a));
  const double diam = std::sqrt(diam2);
  const double lip_M = base.lambda1() * std::sqrt(double(grid.dim()));
  n->C = base.holder_C() * (2.0 + 2.0 * sup / n->C1) +
         2.0 * lip_M * std::sqrt(lip2) * std::pow(diam, 1.0 - n->alpha) / n->C1;
  n->base.push_back(base);
  n->grid = grid;
  n->shift = std::move(shift);
  return OperatorSpec(std::move(n));
}

OperatorKind OperatorSpec::kind() const noexcept { return node_->kind; }
int OperatorSpec::dim() const noexcept { return node_->dim; }
double OperatorSpec::lambda0() const noexcept { return node_->lambda0; }
double OperatorSpec::lambda1() const noexcept { return node_->lambda1; }
double OperatorSpec::holder_alpha() const noexcept { return node_->alpha; }
double OperatorSpec::holder_C() const noexcept { return node_->C; }
double OperatorSpec::holder_C1() const noexcept { return node_->C1; }
bool OperatorSpec::spatially_varying() const noexcept { return node_->varying; }
const std::vector<double>& OperatorSpec::domain_lo() const noexcept { return node_->dlo; }
const std::vector<double>& OperatorSpec::domain_hi() const noexcept { return node_->dhi; }

OperatorSpec OperatorSpec::with_ellipticity(double lambda0, double lambda1) const {
  check_constants(lambda0, lambda1);
  auto n = std::make_shared<OperatorNode>(*node_);
  n->lambda0 = lambda0;
  n->lambda1 = lambda1;
  return OperatorSpec(std::move(n));
}

OperatorSpec OperatorSpec::with_holder(double alpha, double C, double C1) const {
  if (!(alpha > 0.0 && alpha <= 1.0)) throw ValidationError("holder_alpha must lie in (0, 1]");
  if (!(C >= 0.0)) throw ValidationError("holder_C must be nonnegative");
  if (!(C1 > 0.0)) throw ValidationError("holder_C1 must be positive");
  auto n = std::make_shared<OperatorNode>(*node_);
  n->alpha = alpha;
  n->C = C;
  n->C1 = C1;
  return OperatorSpec(std::move(n));
}

OperatorSpec OperatorSpec::with_domain(std::vector<double> lo, std::vector<double> hi) const {
  if (lo.size() != static_cast<std::size_t>(dim()) || hi.size() != lo.size()) {
    throw ValidationError("operator domain has the wrong dimension");
  }
  auto n = std::make_shared<OperatorNode>(*node_);
  n->dlo = std::move(lo);
  n->dhi = std::move(hi);
  return OperatorSpec(std::move(n));
}

double OperatorSpec::eval(const Hessian& H, const Site& site) const {
  return eval_node(*node_, H, site, nullptr);
}

double OperatorSpec::eval_gradient(const Hessian& H, const Site& site, Hessian& G) const {
  return eval_node(*node_, H, site, &G);
}

const std::vector<OperatorSpec>& OperatorSpec::members() const {
  if (node_->kind != OperatorKind::BellmanSup) throw ValidationError("members() on a non-bellman operator");
  return node_->members;
}

const OperatorSpec& OperatorSpec::base() const {
  if (node_->kind != OperatorKind::FrozenShift) throw ValidationError("base() on a non-shifted operator");
  return node_->base.front();
}

const std::vector<Hessian>& OperatorSpec::shift() const {
  if (node_->kind != OperatorKind::FrozenShift) throw ValidationError("shift() on a non-shifted operator");
  return node_->shift;
}

std::string OperatorSpec::describe() const {
  std::ostringstream os;
  const auto& n = *node_;
  switch (n.kind) {
    case OperatorKind::TraceLinear:
      os << "trace_linear(" << (n.A_fn ? "variable" : "constant") << ", n=" << n.dim << ")";
      break;
    case OperatorKind::PucciPlus:
    case OperatorKind::PucciMinus:
      os << to_string(n.kind) << "(" << n.lambda0 << "," << n.lambda1 << ")";
      break;
    case OperatorKind::BellmanSup:
      os << "bellman_sup[";
      for (std::size_t i = 0; i < n.members.size(); ++i) os << (i ? "," : "") << n.members[i].describe();
      os << "]";
      break;
    case OperatorKind::FrozenShift:
      os << "frozen_shift(" << n.base.front().describe() << ")";
      break;
  }
  return os.str();
}

Hessian random_symmetric(SampleRng& rng, int dim, double scale) {
  Hessian M(dim);
  for (int i = 0; i < dim; ++i)
    for (int j = i; j < dim; ++j) M.set(i, j, scale * rng.uniform(-1.0, 1.0));
  return M;
}

Hessian random_positive_definite(SampleRng& rng, int dim, double dmin, double dmax) {
  double Q[kMaxDim][kMaxDim] = {};
  for (int i = 0; i < dim; ++i) Q[i][i] = 1.0;
  for (int p = 0; p < dim; ++p) {
    for (int q = p + 1; q < dim; ++q) {
      const double th = rng.uniform(0.0, 2.0 * std::numbers::pi);
      const double c = std::cos(th), s = std::sin(th);
      for (int k = 0; k < dim; ++k) {
        const double a = Q[k][p], b = Q[k][q];
        Q[k][p] = c * a - s * b;
        Q[k][q] = s * a + c * b;
      }
    }
  }
  double d[kMaxDim];
  for (int i = 0; i < dim; ++i) d[i] = rng.uniform(dmin, dmax);
  Hessian N(dim);
  for (int i = 0; i < dim; ++i) {
    for (int j = i; j < dim; ++j) {
      double s = 0.0;
      for (int k = 0; k < dim; ++k) s += Q[i][k] * d[k] * Q[j][k];
      N.set(i, j, s);
    }
  }
  return N;
}

namespace {

Point random_point(SampleRng& rng, const OperatorSpec& op) {
  Point x{0.0, 0.0, 0.0};
  for (int a = 0; a < op.dim(); ++a) x[a] = rng.uniform(op.domain_lo()[a], op.domain_hi()[a]);
  return x;
}

}  // namespace

EllipticityReport verify_ellipticity(const OperatorSpec& op, std::int64_t n_samples, std::uint64_t seed) {
  if (n_samples < 1) throw ValidationError("verify_ellipticity needs n_samples >= 1");
  SampleRng rng(seed);
  const int n = op.dim();
  EllipticityReport rep;
  rep.empirical_lambda0 = std::numeric_limits<double>::infinity();
  rep.empirical_lambda1 = -std::numeric_limits<double>::infinity();
  for (std::int64_t s = 0; s < n_samples; ++s) {
    Hessian M(n), N(n);
    if (s < 2) {
      M = Hessian::identity(n) * (s == 0 ? -2.0 : 2.0);
      N = Hessian::identity(n);
    } else {
      M = random_symmetric(rng, n, std::pow(10.0, 3.0 * rng.uniform()));
      const double sn = std::pow(10.0, rng.uniform(-2.0, 2.0));
      N = random_positive_definite(rng, n, 1e-3 * sn, sn);
    }
    const Point x = random_point(rng, op);
    const double dF = op.eval(M + N, x) - op.eval(M, x);
    const double tr = N.trace();
    const double tol = 1e-10 * op.lambda1() * (M.frobenius_norm() + N.frobenius_norm() + 1.0);
    EllipticityViolation v;
    v.lower_gap = dF - op.lambda0() * tr;
    v.upper_gap = op.lambda1() * tr - dF;
    rep.empirical_lambda0 = std::min(rep.empirical_lambda0, dF / tr);
    rep.empirical_lambda1 = std::max(rep.empirical_lambda1, dF / tr);
    ++rep.samples_tested;
    if (v.lower_gap < -tol || v.upper_gap < -tol) {
      ++rep.violation_count;
      if (rep.violations.size() < 32) {
        v.M = M;
        v.N = N;
        v.x = x;
        rep.violations.push_back(v);
      }
    }
  }
  return rep;
}

HolderReport verify_holder_x(const OperatorSpec& op, std::int64_t n_samples, std::uint64_t seed) {
  if (n_samples < 1) throw ValidationError("verify_holder_x needs n_samples >= 1");
  SampleRng rng(seed);
  HolderReport rep;
  rep.holder_C = op.holder_C();
  rep.holder_alpha = op.holder_alpha();
  const int n = op.dim();
  for (std::int64_t s = 0; s < n_samples; ++s) {
    const Hessian M = random_symmetric(rng, n, std::pow(10.0, 3.0 * rng.uniform()));
    const Point x = random_point(rng, op);
    const Point y = random_point(rng, op);
    Point d{};
    for (int a = 0; a < n; ++a) d[a] = x[a] - y[a];
    const double dist = norm(d, n);
    ++rep.samples_tested;
    if (dist == 0.0) continue;
    const double num = std::abs(op.eval(M, x) - op.eval(M, y));
    const double ratio = num / ((M.frobenius_norm() + op.holder_C1()) * std::pow(dist, op.holder_alpha()));
    if (ratio > rep.max_ratio) {
      rep.max_ratio = ratio;
      rep.worst_x = x;
      rep.worst_y = y;
    }
  }
  rep.pass = rep.max_ratio <= rep.holder_C * (1.0 + 1e-9) + 1e-12;
  return rep;
}

}  // namespace olab
