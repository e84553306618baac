#include "olab/solver.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "olab/discrete.hpp"
#include "olab/sparse.hpp"

namespace olab {

double ComplementarityReport::worst() const noexcept {
  return std::max({max_lower_violation, max_upper_violation, max_sign_violation_lower,
                   max_sign_violation_upper});
}

namespace {

struct Evaluation {
  std::vector<double> R;        // interior order
  std::vector<Hessian> G;       // interior order
  std::vector<double> dbeta;    // beta'(u - phi1) + beta'(phi2 - u)
  double max_norm = 0.0;
  double sumsq = 0.0;
};

class PenalizedSystem {
 public:
  PenalizedSystem(const ProblemSpec& p, const PenaltyFn& pen, StageRecord& st)
      : p_(p), pen_(pen), st_(st), col_of_(p.grid().size(), -1) {
    const auto& in = p.interior_nodes();
    for (std::size_t j = 0; j < in.size(); ++j) col_of_[in[j]] = static_cast<int>(j);
  }

  void evaluate(const std::vector<double>& u, Evaluation& ev) const {
    const auto& in = p_.interior_nodes();
    const auto phi1 = p_.phi1().values();
    const auto phi2 = p_.phi2().values();
    ev.R.resize(in.size());
    ev.G.resize(in.size(), Hessian(p_.grid().dim()));
    ev.dbeta.resize(in.size());
    ev.max_norm = 0.0;
    ev.sumsq = 0.0;
    double max_pen = 0.0;
    for (std::size_t j = 0; j < in.size(); ++j) {
      const std::size_t k = in[j];
      const double F = equation_residual(p_, u, k, &ev.G[j]);
      const double zl = u[k] - phi1[k];
      const double zu = phi2[k] - u[k];
      const double pen = pen_.value(zl) - pen_.value(zu);
      max_pen = std::max(max_pen, std::abs(pen));
      const double r = F - pen;
      ev.R[j] = r;
      ev.dbeta[j] = pen_.derivative(zl) + pen_.derivative(zu);
      ev.max_norm = std::max(ev.max_norm, std::abs(r));
      ev.sumsq += r * r;
    }
    if (!std::isfinite(ev.sumsq)) throw NumericalError("penalized residual is not finite");
    // Hard check, not an assert: the bounded ramp is the whole point.
    if (max_pen > 2.0 * pen_.bound() * (1.0 + 1e-12)) {
      std::ostringstream os;
      os << "penalty term " << max_pen << " exceeds 2B = " << 2.0 * pen_.bound();
      throw InvariantError(os.str());
    }
    st_.max_penalty_term = std::max(st_.max_penalty_term, max_pen);
    ++st_.penalty_checks;
  }

  CsrMatrix jacobian(const Evaluation& ev, bool with_penalty) const {
    const auto& in = p_.interior_nodes();
    CsrBuilder b(in.size());
    for (std::size_t j = 0; j < in.size(); ++j) {
      append_stencil_row(b, p_.grid(), ev.G[j], in[j], col_of_, with_penalty ? -ev.dbeta[j] : 0.0);
    }
    return b.finish();
  }

 private:
  const ProblemSpec& p_;
  const PenaltyFn& pen_;
  StageRecord& st_;
  std::vector<int> col_of_;
};

void add_step(const std::vector<std::size_t>& in, const std::vector<double>& u, const std::vector<double>& d,
              double t, std::vector<double>& out) {
  out = u;
  for (std::size_t j = 0; j < in.size(); ++j) out[in[j]] += t * d[j];
}

std::vector<double> negated(const std::vector<double>& v) {
  std::vector<double> r(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) r[i] = -v[i];
  return r;
}

}  // namespace

PenalizedSolve solve_penalized(const ProblemSpec& p, double eps, const ScalarField& init,
                               const PenaltyParams& params, double bound, LinearSolver& linear) {
  if (!(init.grid() == p.grid())) throw ValidationError("initial field lives on a different grid");
  const PenaltyFn pen(eps, bound);
  StageRecord st;
  st.eps = eps;
  PenalizedSystem sys(p, pen, st);
  const auto& in = p.interior_nodes();

  std::vector<double> u = p.apply_boundary({init.values().begin(), init.values().end()});
  Evaluation ev, trial;
  sys.evaluate(u, ev);
  // Progress is judged on the line-search merit 0.5 |R|_2^2; the max norm may
  // rise for a few steps while contact nodes switch.
  std::vector<double> best = u;
  double best_res = ev.max_norm;
  double best_merit = ev.sumsq;
  int stall = 0;
  std::vector<double> ut;

  while (ev.max_norm > params.newton_tol) {
    if (st.iterations >= params.max_newton) {
      std::ostringstream os;
      os << "Newton did not converge in " << params.max_newton << " iterations at eps=" << eps
         << " (best residual " << best_res << ")";
      throw DivergenceError(os.str(), best, eps, best_res);
    }
    linear.factorize(sys.jacobian(ev, true));
    const std::vector<double> d = linear.solve(negated(ev.R));
    bool accepted = false;
    double t = 1.0;
    for (int bt = 0; bt <= params.max_backtracks; ++bt, t *= 0.5) {
      add_step(in, u, d, t, ut);
      sys.evaluate(ut, trial);
      if (trial.sumsq <= (1.0 - 2.0 * params.armijo_c * t) * ev.sumsq) {
        accepted = true;
        break;
      }
    }
    if (!accepted) {
      // Picard sweep: linearized operator with the penalty term frozen.
      linear.factorize(sys.jacobian(ev, false));
      const std::vector<double> dp = linear.solve(negated(ev.R));
      add_step(in, u, dp, 1.0, ut);
      sys.evaluate(ut, trial);
      ++st.picard_steps;
    }
    u.swap(ut);
    std::swap(ev, trial);
    ++st.iterations;
    if (ev.sumsq < best_merit) {
      best_merit = ev.sumsq;
      best_res = ev.max_norm;
      best = u;
      stall = 0;
    } else if (++stall >= params.max_stall) {
      std::ostringstream os;
      os << "Newton stalled for " << stall << " iterations at eps=" << eps << " (best residual "
         << best_res << ")";
      throw DivergenceError(os.str(), best, eps, best_res);
    }
  }
  st.residual = ev.max_norm;
  const auto phi1 = p.phi1().values();
  const auto phi2 = p.phi2().values();
  for (std::size_t k = 0; k < u.size(); ++k) {
    st.lower_violation = std::max(st.lower_violation, phi1[k] - u[k]);
    st.upper_violation = std::max(st.upper_violation, u[k] - phi2[k]);
  }
  return PenalizedSolve{ScalarField(p.grid(), std::move(u)), st};
}

PenalizedSolve solve_penalized(const ProblemSpec& p, double eps, const ScalarField& init,
                               const PenaltyParams& params) {
  LinearSolver linear;
  return solve_penalized(p, eps, init, params, penalty_bound(p), linear);
}

std::vector<double> default_schedule(const Grid& grid, int stages) {
  if (stages < 1) throw ValidationError("schedule needs at least one stage");
  std::vector<double> s;
  double e = std::max(grid.max_h(), 0.1);
  for (int k = 0; k < stages; ++k, e *= 0.25) s.push_back(e);
  return s;
}

double default_tol_active(const ProblemSpec& p) {
  const double h = p.grid().max_h();
  return 10.0 * h * h * p.scale();
}

SolveResult solve_double_obstacle(const ProblemSpec& p, const std::vector<double>& schedule,
                                  const PenaltyParams& params) {
  if (schedule.empty()) throw ValidationError("eps schedule is empty");
  for (std::size_t i = 0; i < schedule.size(); ++i) {
    if (!(schedule[i] > 0.0) || !std::isfinite(schedule[i])) {
      throw ValidationError("eps schedule entry " + std::to_string(i) + " is not positive");
    }
    if (i > 0 && !(schedule[i] < schedule[i - 1])) {
      throw ValidationError("eps schedule must be strictly decreasing (entry " + std::to_string(i) + ")");
    }
  }
  const double B = penalty_bound(p);
  LinearSolver linear;
  ScalarField u = params.init == InitKind::Lower ? p.phi1() : p.phi2();
  SolveResult res{u, B, {}, {}, false, 0};
  for (double eps : schedule) {
    try {
      PenalizedSolve s = solve_penalized(p, eps, u, params, B, linear);
      u = std::move(s.u);
      res.eps_history.push_back(s.stage);
    } catch (const DivergenceError& e) {
      std::ostringstream os;
      os << "stage eps=" << eps << " diverged: " << e.what();
      throw DivergenceError(os.str(), e.best_iterate(), eps, e.residual());
    }
  }
  const double eps_final = schedule.back();
  double tol_active = params.tol_active > 0.0 ? params.tol_active : default_tol_active(p);
  tol_active = std::max(tol_active, 2.0 * eps_final);
  res.complementarity = residual_report(u, p, tol_active);
  const double comp_tol = params.comp_tol > 0.0 ? params.comp_tol : 2.0 * eps_final + 100.0 * params.newton_tol;
  res.u = std::move(u);
  res.converged = res.complementarity.worst() <= comp_tol;
  res.factorizations = linear.factorizations();
  return res;
}

ComplementarityReport residual_report(const ScalarField& u, const ProblemSpec& p, double tol_active) {
  if (!(u.grid() == p.grid())) throw ValidationError("field and problem live on different grids");
  ComplementarityReport r;
  r.tol_active = tol_active;
  const auto phi1 = p.phi1().values();
  const auto phi2 = p.phi2().values();
  for (std::size_t k = 0; k < u.size(); ++k) {
    r.max_lower_violation = std::max(r.max_lower_violation, phi1[k] - u[k]);
    r.max_upper_violation = std::max(r.max_upper_violation, u[k] - phi2[k]);
  }
  for (std::size_t k : p.interior_nodes()) {
    const double F = equation_residual(p, u.values(), k);
    if (u[k] > phi1[k] + tol_active) r.max_sign_violation_lower = std::max(r.max_sign_violation_lower, -F);
    if (u[k] < phi2[k] - tol_active) r.max_sign_violation_upper = std::max(r.max_sign_violation_upper, F);
  }
  return r;
}

}  // namespace olab
