#pragma once

#include "olab/problem.hpp"

namespace olab {

// Bounded ramp beta_eps: -B for z <= -eps, 0 for z >= eps, and the C1 cubic
// -B q((eps - z) / (2 eps)), q(t) = t^2 (3 - 2t), in between.
class PenaltyFn {
 public:
  // Throws ValidationError unless eps > 0 and bound >= 0.
  PenaltyFn(double eps, double bound);

  double eps() const noexcept { return eps_; }
  double bound() const noexcept { return bound_; }

  double value(double z) const noexcept {
    if (z >= eps_) return 0.0;
    if (z <= -eps_) return -bound_;
    const double t = (eps_ - z) / (2.0 * eps_);
    return -bound_ * t * t * (3.0 - 2.0 * t);
  }
  double derivative(double z) const noexcept {
    if (z >= eps_ || z <= -eps_) return 0.0;
    const double t = (eps_ - z) / (2.0 * eps_);
    return 3.0 * bound_ * t * (1.0 - t) / eps_;
  }

 private:
  double eps_;
  double bound_;
};

inline PenaltyFn build_penalty(double eps, double bound) { return PenaltyFn(eps, bound); }

// max over interior nodes of max(|F(D2 phi1) - f|, |F(D2 phi2) - f|).
double penalty_bound(const ProblemSpec& problem);

}  // namespace olab
