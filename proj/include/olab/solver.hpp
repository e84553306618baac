#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "olab/error.hpp"
#include "olab/penalty.hpp"
#include "olab/problem.hpp"

namespace olab {

enum class InitKind { Lower, Upper };

struct PenaltyParams {
  double newton_tol = 1e-9;  // max-norm of the penalized residual
  int max_newton = 80;       // Newton iterations per stage
  int max_stall = 6;         // iterations without improving the best |R|_2
  double armijo_c = 1e-4;
  int max_backtracks = 30;
  // Complementarity tolerance for `converged`; <= 0 selects
  // 2 eps_final + 100 newton_tol.
  double comp_tol = -1.0;
  // Active-set margin for the sign checks; <= 0 selects 10 h^2 scale. The
  // value used is never below 2 eps_final.
  double tol_active = -1.0;
  InitKind init = InitKind::Lower;
};

struct ComplementarityReport {
  double max_lower_violation = 0.0;       // max (phi1 - u)+
  double max_upper_violation = 0.0;       // max (u - phi2)+
  double max_sign_violation_lower = 0.0;  // max (-(F - f))+ where u > phi1 + tol_active
  double max_sign_violation_upper = 0.0;  // max (F - f)+ where u < phi2 - tol_active
  double tol_active = 0.0;

  double worst() const noexcept;
};

struct StageRecord {
  double eps = 0.0;
  int iterations = 0;
  double residual = 0.0;           // final max-norm residual
  double max_penalty_term = 0.0;   // max over every evaluated iterate of |beta(u-phi1) - beta(phi2-u)|
  std::int64_t penalty_checks = 0; // iterates on which the bound was asserted
  int picard_steps = 0;
  double lower_violation = 0.0;    // max (phi1 - u_eps)+
  double upper_violation = 0.0;    // max (u_eps - phi2)+
};

struct PenalizedSolve {
  ScalarField u;
  StageRecord stage;
};

struct SolveResult {
  ScalarField u;
  double penalty_bound = 0.0;
  std::vector<StageRecord> eps_history;
  ComplementarityReport complementarity;
  bool converged = false;
  int factorizations = 0;
};

// Newton stagnation or iteration exhaustion. Carries the best iterate.
class DivergenceError : public Error {
 public:
  DivergenceError(const std::string& what, std::vector<double> best, double eps, double residual)
      : Error(what), best_(std::move(best)), eps_(eps), residual_(residual) {}
  const std::vector<double>& best_iterate() const noexcept { return best_; }
  double eps() const noexcept { return eps_; }
  double residual() const noexcept { return residual_; }

 private:
  std::vector<double> best_;
  double eps_;
  double residual_;
};

class LinearSolver;

// Damped Newton on F(D2u) - f - beta(u - phi1) + beta(phi2 - u) = 0 at
// interior nodes, u = g on the boundary. `init` boundary values are replaced
// by g. Throws InvariantError if the penalty term ever exceeds 2B.
PenalizedSolve solve_penalized(const ProblemSpec& problem, double eps, const ScalarField& init,
                               const PenaltyParams& params);
PenalizedSolve solve_penalized(const ProblemSpec& problem, double eps, const ScalarField& init,
                               const PenaltyParams& params, double bound, LinearSolver& linear);

// eps_k = max(h, 0.1) 4^-k, k < stages.
std::vector<double> default_schedule(const Grid& grid, int stages = 6);

// Continuation over a strictly decreasing positive schedule. Divergence is
// rethrown with the stage eps in the message.
SolveResult solve_double_obstacle(const ProblemSpec& problem, const std::vector<double>& schedule,
                                  const PenaltyParams& params = {});

ComplementarityReport residual_report(const ScalarField& u, const ProblemSpec& problem,
                                      double tol_active);

double default_tol_active(const ProblemSpec& problem);

}  // namespace olab
