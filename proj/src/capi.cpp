#include "olab/olab.h"

#include <cstring>
#include <filesystem>
#include <new>
#include <string>

#include "olab/compare.hpp"
#include "olab/config.hpp"
#include "olab/error.hpp"
#include "olab/field_io.hpp"
#include "olab/oracle.hpp"
#include "olab/penalty.hpp"
#include "olab/run.hpp"
#include "olab/solver.hpp"

struct olab_config {
  olab::RunConfig cfg;
  olab::RunOverrides ov;
};

struct olab_run {
  olab::RunOutcome out;
  std::string output_dir;
};

struct olab_compare {
  olab::CompareResult result;
  std::string json;
  double max_field = 0.0;
};

struct olab_grid {
  olab::Grid grid;
};

struct olab_field {
  olab::ScalarField field;
};

struct olab_operator {
  olab::OperatorSpec op;
};

struct olab_problem {
  olab::ProblemSpec problem;
};

namespace {

thread_local std::string g_last_error;

olab_status fail(olab_status s, const std::string& msg) {
  g_last_error = msg;
  return s;
}

template <class F>
olab_status guard(F&& body) {
  try {
    body();
    return OLAB_OK;
  } catch (const olab::DivergenceError& e) {
    return fail(OLAB_ERR_DIVERGENCE, e.what());
  } catch (const olab::CyclingError& e) {
    return fail(OLAB_ERR_CYCLING, e.what());
  } catch (const olab::DomainError& e) {
    return fail(OLAB_ERR_DOMAIN, e.what());
  } catch (const olab::ValidationError& e) {
    return fail(OLAB_ERR_VALIDATION, e.what());
  } catch (const olab::NumericalError& e) {
    return fail(OLAB_ERR_NUMERICAL, e.what());
  } catch (const olab::InvariantError& e) {
    return fail(OLAB_ERR_INVARIANT, e.what());
  } catch (const std::filesystem::filesystem_error& e) {
    return fail(OLAB_ERR_IO, e.what());
  } catch (const std::bad_alloc&) {
    return fail(OLAB_ERR_INTERNAL, "out of memory");
  } catch (const std::exception& e) {
    return fail(OLAB_ERR_INTERNAL, e.what());
  } catch (...) {
    return fail(OLAB_ERR_INTERNAL, "unknown exception");
  }
}

#define OLAB_REQUIRE(cond)                                              \
  do {                                                                  \
    if (!(cond)) return fail(OLAB_ERR_ARGUMENT, "invalid argument: " #cond); \
  } while (0)

}  // namespace

extern "C" {

const char* olab_version(void) { return olab::kVersion; }

const char* olab_status_name(olab_status s) {
  switch (s) {
    case OLAB_OK: return "ok";
    case OLAB_ERR_ARGUMENT: return "argument";
    case OLAB_ERR_VALIDATION: return "validation";
    case OLAB_ERR_DOMAIN: return "domain";
    case OLAB_ERR_NUMERICAL: return "numerical";
    case OLAB_ERR_INVARIANT: return "invariant";
    case OLAB_ERR_DIVERGENCE: return "divergence";
    case OLAB_ERR_CYCLING: return "cycling";
    case OLAB_ERR_IO: return "io";
    case OLAB_ERR_INTERNAL: return "internal";
  }
  return "unknown";
}

const char* olab_last_error(void) { return g_last_error.c_str(); }

// ---- configs

olab_status olab_config_load(const char* path, olab_config** out) {
  OLAB_REQUIRE(path && out);
  return guard([&] { *out = new olab_config{olab::load_config(path), {}}; });
}

olab_status olab_config_parse(const char* text, const char* source_name, olab_config** out) {
  OLAB_REQUIRE(text && out);
  return guard([&] {
    *out = new olab_config{olab::parse_config(text, source_name ? source_name : ""), {}};
  });
}

void olab_config_free(olab_config* cfg) { delete cfg; }

olab_status olab_config_set_output_dir(olab_config* cfg, const char* dir) {
  OLAB_REQUIRE(cfg && dir && *dir);
  cfg->ov.output_dir = std::filesystem::path(dir);
  return OLAB_OK;
}

olab_status olab_config_set_solver(olab_config* cfg, const char* kind) {
  OLAB_REQUIRE(cfg && kind);
  if (std::strcmp(kind, "penalty") == 0) cfg->ov.solver = olab::SolverKind::Penalty;
  else if (std::strcmp(kind, "pdas") == 0) cfg->ov.solver = olab::SolverKind::Pdas;
  else return fail(OLAB_ERR_ARGUMENT, std::string("unknown solver \"") + kind + "\" (valid: penalty, pdas)");
  return OLAB_OK;
}

olab_status olab_config_set_grid_scale(olab_config* cfg, int k) {
  OLAB_REQUIRE(cfg);
  if (k < 1) return fail(OLAB_ERR_VALIDATION, "grid scale must be at least 1");
  cfg->ov.grid_scale = k;
  return OLAB_OK;
}

olab_status olab_config_set_seed(olab_config* cfg, uint64_t seed) {
  OLAB_REQUIRE(cfg);
  cfg->ov.seed = seed;
  return OLAB_OK;
}

const char* olab_config_name(const olab_config* cfg) { return cfg ? cfg->cfg.name.c_str() : ""; }

// ---- runs

static olab_status wrap_run(olab::RunOutcome (*fn)(const olab::RunConfig&, const olab::RunOverrides&),
                            const olab_config* cfg, olab_run** out) {
  OLAB_REQUIRE(cfg && out);
  return guard([&] {
    olab::RunOutcome r = fn(cfg->cfg, cfg->ov);
    std::string dir = r.output_dir.string();
    *out = new olab_run{std::move(r), std::move(dir)};
  });
}

olab_status olab_run_solve(const olab_config* cfg, olab_run** out) { return wrap_run(olab::run_solve, cfg, out); }

olab_status olab_run_diagnose(const olab_config* cfg, olab_run** out) {
  return wrap_run(olab::run_diagnose, cfg, out);
}

olab_status olab_run_convergence(const olab_config* cfg, double max_growth, olab_run** out) {
  OLAB_REQUIRE(cfg && out);
  return guard([&] {
    olab::RunOutcome r = olab::run_convergence(cfg->cfg, cfg->ov, max_growth > 0.0 ? max_growth : 0.10);
    std::string dir = r.output_dir.string();
    *out = new olab_run{std::move(r), std::move(dir)};
  });
}

void olab_run_free(olab_run* run) { delete run; }

int olab_run_exit_code(const olab_run* run) { return run ? run->out.exit_code : olab::kExitInternal; }
const char* olab_run_status(const olab_run* run) { return run ? run->out.status.c_str() : ""; }
const char* olab_run_message(const olab_run* run) { return run ? run->out.message.c_str() : ""; }
const char* olab_run_output_dir(const olab_run* run) { return run ? run->output_dir.c_str() : ""; }
size_t olab_run_artifact_count(const olab_run* run) { return run ? run->out.artifacts.size() : 0; }
const char* olab_run_artifact(const olab_run* run, size_t i) {
  return run && i < run->out.artifacts.size() ? run->out.artifacts[i].c_str() : nullptr;
}
size_t olab_run_failed_count(const olab_run* run) { return run ? run->out.failed_diagnostics.size() : 0; }
const char* olab_run_failed(const olab_run* run, size_t i) {
  return run && i < run->out.failed_diagnostics.size() ? run->out.failed_diagnostics[i].c_str() : nullptr;
}

// ---- compare

olab_status olab_compare_runs(const char* dir_a, const char* dir_b, double field_abs, double report_rel,
                              olab_compare** out) {
  OLAB_REQUIRE(dir_a && dir_b && out);
  return guard([&] {
    olab::CompareTolerances tol;
    if (field_abs > 0.0) tol.field_abs = field_abs;
    if (report_rel > 0.0) tol.report_rel = report_rel;
    auto* c = new olab_compare{olab::compare_runs(dir_a, dir_b, tol), {}, 0.0};
    for (const auto& f : c->result.fields) c->max_field = std::max(c->max_field, f.max_abs);
    c->json = c->result.to_json().dump(2);
    *out = c;
  });
}

void olab_compare_free(olab_compare* cmp) { delete cmp; }
int olab_compare_pass(const olab_compare* cmp) { return cmp && cmp->result.pass ? 1 : 0; }
double olab_compare_max_field_diff(const olab_compare* cmp) { return cmp ? cmp->max_field : 0.0; }
size_t olab_compare_differing_count(const olab_compare* cmp) { return cmp ? cmp->result.differing.size() : 0; }
const char* olab_compare_json(const olab_compare* cmp) { return cmp ? cmp->json.c_str() : ""; }

// ---- grids and fields

olab_status olab_grid_create(int dim, const double* lo, const double* hi, const int* counts, olab_grid** out) {
  OLAB_REQUIRE(lo && hi && counts && out);
  OLAB_REQUIRE(dim >= 1 && dim <= olab::kMaxDim);
  return guard([&] {
    const std::size_t n = static_cast<std::size_t>(dim);
    *out = new olab_grid{olab::Grid::build({lo, n}, {hi, n}, {counts, n})};
  });
}

void olab_grid_free(olab_grid* grid) { delete grid; }
int olab_grid_dim(const olab_grid* grid) { return grid ? grid->grid.dim() : 0; }
size_t olab_grid_size(const olab_grid* grid) { return grid ? grid->grid.size() : 0; }
double olab_grid_h(const olab_grid* grid, int axis) {
  return grid && axis >= 0 && axis < grid->grid.dim() ? grid->grid.h(axis) : 0.0;
}

olab_status olab_field_create(const olab_grid* grid, const double* values, size_t n, olab_field** out) {
  OLAB_REQUIRE(grid && values && out);
  return guard([&] {
    *out = new olab_field{olab::ScalarField(grid->grid, std::vector<double>(values, values + n))};
  });
}

olab_status olab_field_load(const char* stem, olab_field** out) {
  OLAB_REQUIRE(stem && out);
  return guard([&] { *out = new olab_field{olab::load_field(stem)}; });
}

olab_status olab_field_save(const olab_field* field, const char* stem) {
  OLAB_REQUIRE(field && stem);
  return guard([&] { olab::save_field(field->field, stem); });
}

void olab_field_free(olab_field* field) { delete field; }
size_t olab_field_size(const olab_field* field) { return field ? field->field.size() : 0; }
const double* olab_field_values(const olab_field* field) { return field ? field->field.values().data() : nullptr; }

olab_status olab_field_interpolate(const olab_field* field, const double* x, double* out) {
  OLAB_REQUIRE(field && x && out);
  return guard([&] {
    olab::Point p{};
    for (int a = 0; a < field->field.grid().dim(); ++a) p[a] = x[a];
    *out = olab::interpolate(field->field, p);
  });
}

// ---- operators

olab_status olab_operator_create(const char* kind, int dim, double lambda0, double lambda1, olab_operator** out) {
  OLAB_REQUIRE(kind && out);
  OLAB_REQUIRE(dim >= 1 && dim <= olab::kMaxDim);
  const std::string k = kind;
  if (k != "laplacian" && k != "pucci_plus" && k != "pucci_minus") {
    return fail(OLAB_ERR_ARGUMENT, "unknown operator \"" + k + "\" (valid: laplacian, pucci_plus, pucci_minus)");
  }
  return guard([&] {
    if (k == "laplacian") *out = new olab_operator{olab::OperatorSpec::laplacian(dim)};
    else if (k == "pucci_plus") *out = new olab_operator{olab::OperatorSpec::pucci_plus(dim, lambda0, lambda1)};
    else *out = new olab_operator{olab::OperatorSpec::pucci_minus(dim, lambda0, lambda1)};
  });
}

olab_status olab_operator_create_linear(int dim, const double* A, olab_operator** out) {
  OLAB_REQUIRE(A && out);
  OLAB_REQUIRE(dim >= 1 && dim <= olab::kMaxDim);
  return guard([&] {
    const olab::Hessian M = olab::Hessian::from_row_major(dim, {A, static_cast<std::size_t>(dim * dim)});
    *out = new olab_operator{olab::OperatorSpec::trace_linear(M)};
  });
}

void olab_operator_free(olab_operator* op) { delete op; }

olab_status olab_operator_eval(const olab_operator* op, const double* H, const double* x, double* out) {
  OLAB_REQUIRE(op && H && out);
  return guard([&] {
    const int n = op->op.dim();
    const olab::Hessian M = olab::Hessian::from_row_major(n, {H, static_cast<std::size_t>(n * n)});
    olab::Point p{};
    if (x)
      for (int a = 0; a < n; ++a) p[a] = x[a];
    *out = op->op.eval(M, p);
  });
}

// ---- problems and solves

olab_status olab_problem_create(const olab_operator* op, const olab_field* phi1, const olab_field* phi2,
                                const olab_field* g, const olab_field* f, int reduced, olab_problem** out) {
  OLAB_REQUIRE(op && phi1 && phi2 && g && out);
  return guard([&] {
    std::optional<olab::ScalarField> fs;
    if (f) fs = f->field;
    *out = new olab_problem{olab::ProblemSpec::with_boundary_field(
        op->op, phi1->field, phi2->field, g->field, std::move(fs),
        reduced ? olab::ProblemForm::Reduced : olab::ProblemForm::General)};
  });
}

void olab_problem_free(olab_problem* problem) { delete problem; }

olab_status olab_problem_reduce(const olab_problem* problem, olab_problem** out) {
  OLAB_REQUIRE(problem && out);
  return guard([&] { *out = new olab_problem{olab::reduce_problem(problem->problem)}; });
}

double olab_problem_penalty_bound(const olab_problem* problem) {
  return problem ? olab::penalty_bound(problem->problem) : 0.0;
}

olab_status olab_solve_penalty(const olab_problem* problem, const double* schedule, size_t n, int init_upper,
                               olab_field** out) {
  OLAB_REQUIRE(problem && out);
  OLAB_REQUIRE(!schedule || n > 0);
  return guard([&] {
    const std::vector<double> s = schedule ? std::vector<double>(schedule, schedule + n)
                                           : olab::default_schedule(problem->problem.grid());
    olab::PenaltyParams p;
    p.init = init_upper ? olab::InitKind::Upper : olab::InitKind::Lower;
    *out = new olab_field{olab::solve_double_obstacle(problem->problem, s, p).u};
  });
}

olab_status olab_solve_pdas(const olab_problem* problem, olab_field** out) {
  OLAB_REQUIRE(problem && out);
  return guard([&] { *out = new olab_field{olab::solve_pdas(problem->problem).u}; });
}

}  // extern "C"
