#include "olab/problem.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "olab/error.hpp"

namespace olab {

namespace {

std::string node_label(const Grid& g, std::size_t k) {
  std::ostringstream os;
  const Index idx = g.unflat(k);
  const Point p = g.node(idx);
  os << "node (";
  for (int a = 0; a < g.dim(); ++a) os << (a ? "," : "") << idx[a];
  os << ") at x=(";
  for (int a = 0; a < g.dim(); ++a) os << (a ? "," : "") << p[a];
  os << ")";
  return os.str();
}

}  // namespace

ProblemSpec::ProblemSpec(OperatorSpec op, ScalarField phi1, ScalarField phi2, std::vector<double> g,
                         std::optional<ScalarField> f, ProblemForm form)
    : op_(std::move(op)),
      phi1_(std::move(phi1)),
      phi2_(std::move(phi2)),
      g_(std::move(g)),
      f_(std::move(f)),
      form_(form) {
  const Grid& gr = phi1_.grid();
  if (!(phi2_.grid() == gr)) throw ValidationError("phi1 and phi2 live on different grids");
  if (f_ && !(f_->grid() == gr)) throw ValidationError("source f lives on a different grid");
  if (op_.dim() != gr.dim()) throw ValidationError("operator dimension does not match the grid");
  if (op_.kind() == OperatorKind::FrozenShift && op_.shift().size() != gr.size()) {
    throw ValidationError("shifted operator was built on a different grid");
  }
  for (std::size_t k = 0; k < gr.size(); ++k) {
    (gr.on_boundary(k) ? boundary_ : interior_).push_back(k);
  }
  if (g_.size() != boundary_.size()) {
    throw ValidationError("boundary data has " + std::to_string(g_.size()) + " values for " +
                          std::to_string(boundary_.size()) + " boundary nodes");
  }
  double worst = 0.0;
  std::size_t worst_k = 0, crossings = 0;
  for (std::size_t k = 0; k < gr.size(); ++k) {
    const double d = phi1_[k] - phi2_[k];
    if (d > 0.0) ++crossings;
    if (d > worst) {
      worst = d;
      worst_k = k;
    }
  }
  if (worst > 0.0) {
    std::ostringstream os;
    os << "obstacle ordering phi1 <= phi2 violated at " << crossings << " nodes; worst "
       << node_label(gr, worst_k) << " with phi1 - phi2 = " << worst;
    throw ValidationError(os.str());
  }
  worst = 0.0;
  for (std::size_t b = 0; b < boundary_.size(); ++b) {
    const std::size_t k = boundary_[b];
    if (!std::isfinite(g_[b])) throw ValidationError("boundary data is not finite at " + node_label(gr, k));
    const double d = std::max(phi1_[k] - g_[b], g_[b] - phi2_[k]);
    if (d > worst) {
      worst = d;
      worst_k = k;
    }
  }
  if (worst > 0.0) {
    std::ostringstream os;
    os << "boundary data outside [phi1, phi2]; worst " << node_label(gr, worst_k) << " by " << worst;
    throw ValidationError(os.str());
  }
  if (form_ == ProblemForm::Reduced) {
    for (std::size_t k = 0; k < gr.size(); ++k) {
      if (phi1_[k] != 0.0) {
        throw ValidationError("reduced form requires phi1 == 0; " + node_label(gr, k) + " has " +
                              std::to_string(phi1_[k]));
      }
    }
  }
}

ProblemSpec ProblemSpec::with_boundary_field(OperatorSpec op, ScalarField phi1, ScalarField phi2,
                                             const ScalarField& g, std::optional<ScalarField> f,
                                             ProblemForm form) {
  const Grid& gr = phi1.grid();
  if (!(g.grid() == gr)) throw ValidationError("boundary field lives on a different grid");
  std::vector<double> gb;
  for (std::size_t k = 0; k < gr.size(); ++k)
    if (gr.on_boundary(k)) gb.push_back(g[k]);
  return ProblemSpec(std::move(op), std::move(phi1), std::move(phi2), std::move(gb), std::move(f), form);
}

std::vector<double> ProblemSpec::apply_boundary(std::vector<double> values) const {
  for (std::size_t b = 0; b < boundary_.size(); ++b) values[boundary_[b]] = g_[b];
  return values;
}

double ProblemSpec::scale() const noexcept {
  double s = std::max(phi1_.max_abs(), phi2_.max_abs());
  for (double v : g_) s = std::max(s, std::abs(v));
  return std::max(s, 1e-300);
}

std::vector<Hessian> hessian_field(const ScalarField& field) {
  const Grid& g = field.grid();
  std::vector<Hessian> out(g.size(), Hessian(g.dim()));
  for (std::size_t k = 0; k < g.size(); ++k) {
    Index idx = g.unflat(k);
    for (int a = 0; a < g.dim(); ++a) idx[a] = std::clamp(idx[a], 1, g.count(a) - 2);
    out[k] = discrete_hessian(g, field.values(), g.flat(idx));
  }
  return out;
}

ProblemSpec reduce_problem(const ProblemSpec& p) {
  const Grid& gr = p.grid();
  std::vector<Hessian> D2 = hessian_field(p.phi1());
  std::vector<double> f(gr.size()), psi(gr.size());
  for (std::size_t k = 0; k < gr.size(); ++k) {
    f[k] = p.source(k) - p.op().eval(D2[k], p.site(k));
    psi[k] = p.phi2()[k] - p.phi1()[k];
  }
  std::vector<double> g = p.g();
  const auto& bn = p.boundary_nodes();
  for (std::size_t b = 0; b < bn.size(); ++b) g[b] -= p.phi1()[bn[b]];
  OperatorSpec op = OperatorSpec::frozen_shift(p.op(), gr, std::move(D2));
  return ProblemSpec(std::move(op), ScalarField::constant(gr, 0.0), ScalarField(gr, std::move(psi)),
                     std::move(g), ScalarField(gr, std::move(f)), ProblemForm::Reduced);
}

}  // namespace olab
