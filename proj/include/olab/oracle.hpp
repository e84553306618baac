#pragma once

#include <string>
#include <vector>

#include "olab/error.hpp"
#include "olab/problem.hpp"

namespace olab {

struct PdasParams {
  double newton_tol = 1e-10;  // max-norm residual on the inactive set
  int max_newton = 60;
  int max_cycles = 100;
  double mu = 1.0;  // in units of lambda1 * sum_a 2 / h_a^2
};

struct PdasResult {
  ScalarField u;
  int cycles = 0;  // active-set updates until the sets repeated
  int newton_iterations = 0;
  std::vector<unsigned char> lower_active;  // per node
  std::vector<unsigned char> upper_active;
  // (|A1|, |A2|) after each update.
  std::vector<std::pair<std::size_t, std::size_t>> history;
};

class CyclingError : public Error {
 public:
  CyclingError(const std::string& what, std::vector<std::pair<std::size_t, std::size_t>> history)
      : Error(what), history_(std::move(history)) {}
  const std::vector<std::pair<std::size_t, std::size_t>>& history() const noexcept { return history_; }

 private:
  std::vector<std::pair<std::size_t, std::size_t>> history_;
};

// Primal-dual active set iteration with multiplier lambda = -(F(D2u) - f):
//   A1 = { lambda + m (phi1 - u) > 0 },  A2 = { -lambda + m (u - phi2) > 0 },
// m = mu lambda1 sum_a 2 / h_a^2,
// nodes with phi1 == phi2 always in A1. u is pinned on A1 / A2 and
// F(D2u) = f is solved by Newton on the rest. Starts from the unconstrained
// solve (lambda = 0). Throws CyclingError after max_cycles updates.
PdasResult solve_pdas(const ProblemSpec& problem, const PdasParams& params = {});

enum class ArcKind { Free, LowerContact, UpperContact };
const char* to_string(ArcKind kind) noexcept;

// u(x) = c0 + c1 x + c2 x^2 on [lo, hi].
struct Arc {
  double lo = 0.0, hi = 0.0;
  ArcKind kind = ArcKind::Free;
  double c0 = 0.0, c1 = 0.0, c2 = 0.0;
  double value(double x) const noexcept { return c0 + x * (c1 + x * c2); }
  double slope(double x) const noexcept { return c1 + 2.0 * c2 * x; }
};

struct Exact1D {
  std::vector<Arc> arcs;  // ordered, covering [lo, hi]
  double value(double x) const;
  ScalarField sample(const Grid& grid) const;
  std::string describe() const;
  // Endpoints of the lower and upper contact arcs, empty when absent.
  std::vector<std::pair<double, double>> contacts(ArcKind kind) const;
};

// Closed-form solution for n = 1, F = a u'' with constant a > 0, constant
// source, obstacles that are exactly quadratic on the nodes. Junctions are
// the roots of the tangency conditions, bracketed on a uniform scan and
// bisected to 1e-12. Throws ValidationError when the hypotheses fail and
// Error listing candidates when more than one assembly is consistent.
Exact1D exact_1d_solution(const ProblemSpec& problem);

}  // namespace olab
