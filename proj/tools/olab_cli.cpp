// Command-line front end. Talks to the library only through olab.h.
#include <cstdio>
#include <memory>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "olab/olab.h"

namespace {

constexpr int kExitInternal = 1;
constexpr int kExitValidation = 2;
constexpr int kExitDivergence = 3;
constexpr int kExitDiagnosticFailure = 4;

int exit_for(olab_status s) {
  switch (s) {
    case OLAB_OK: return 0;
    case OLAB_ERR_ARGUMENT:
    case OLAB_ERR_VALIDATION:
    case OLAB_ERR_DOMAIN: return kExitValidation;
    case OLAB_ERR_DIVERGENCE:
    case OLAB_ERR_CYCLING: return kExitDivergence;
    default: return kExitInternal;
  }
}

int report_error(olab_status s) {
  std::fprintf(stderr, "olab: %s error: %s\n", olab_status_name(s), olab_last_error());
  return exit_for(s);
}

struct ConfigDeleter {
  void operator()(olab_config* c) const { olab_config_free(c); }
};
struct RunDeleter {
  void operator()(olab_run* r) const { olab_run_free(r); }
};
struct CompareDeleter {
  void operator()(olab_compare* c) const { olab_compare_free(c); }
};

struct RunArgs {
  std::string config;
  std::string out;
  std::string solver;
  int grid_scale = 1;
  std::optional<std::uint64_t> seed;
  double max_growth = 0.10;
};

void add_run_flags(CLI::App* sub, RunArgs& a) {
  sub->add_option("--config", a.config, "run config (JSON)")->required()->check(CLI::ExistingFile);
  sub->add_option("--out", a.out, "output directory (overrides output_dir)");
  sub->add_option("--solver", a.solver, "solver")->check(CLI::IsMember({"penalty", "pdas"}));
  sub->add_option("--grid-scale", a.grid_scale, "refine grid counts to (c - 1) k + 1")->check(CLI::PositiveNumber);
  sub->add_option("--seed", a.seed, "seed for sampling diagnostics");
}

int print_run(const olab_run* run) {
  const int code = olab_run_exit_code(run);
  std::printf("status: %s\n", olab_run_status(run));
  std::printf("output: %s\n", olab_run_output_dir(run));
  const size_t n = olab_run_artifact_count(run);
  for (size_t i = 0; i < n; ++i) std::printf("  %s\n", olab_run_artifact(run, i));
  std::printf("  manifest.json\n");
  const std::string msg = olab_run_message(run);
  if (!msg.empty()) std::fprintf(stderr, "olab: %s\n", msg.c_str());
  return code;
}

enum class Command { Solve, Diagnose, Convergence };

int run_command(Command cmd, const RunArgs& a) {
  olab_config* raw = nullptr;
  olab_status s = olab_config_load(a.config.c_str(), &raw);
  if (s != OLAB_OK) return report_error(s);
  std::unique_ptr<olab_config, ConfigDeleter> cfg(raw);
  if (!a.out.empty() && (s = olab_config_set_output_dir(cfg.get(), a.out.c_str())) != OLAB_OK) return report_error(s);
  if (!a.solver.empty() && (s = olab_config_set_solver(cfg.get(), a.solver.c_str())) != OLAB_OK)
    return report_error(s);
  if ((s = olab_config_set_grid_scale(cfg.get(), a.grid_scale)) != OLAB_OK) return report_error(s);
  if (a.seed && (s = olab_config_set_seed(cfg.get(), *a.seed)) != OLAB_OK) return report_error(s);

  olab_run* run_raw = nullptr;
  switch (cmd) {
    case Command::Solve: s = olab_run_solve(cfg.get(), &run_raw); break;
    case Command::Diagnose: s = olab_run_diagnose(cfg.get(), &run_raw); break;
    case Command::Convergence: s = olab_run_convergence(cfg.get(), a.max_growth, &run_raw); break;
  }
  if (s != OLAB_OK) return report_error(s);
  std::unique_ptr<olab_run, RunDeleter> run(run_raw);
  return print_run(run.get());
}

struct CompareArgs {
  std::string a, b;
  double field_tol = 1e-8;
  double report_tol = 1e-6;
  std::string json_out;
};

int compare_command(const CompareArgs& c) {
  olab_compare* raw = nullptr;
  const olab_status s = olab_compare_runs(c.a.c_str(), c.b.c_str(), c.field_tol, c.report_tol, &raw);
  if (s != OLAB_OK) return report_error(s);
  std::unique_ptr<olab_compare, CompareDeleter> cmp(raw);
  const char* js = olab_compare_json(cmp.get());
  if (!c.json_out.empty()) {
    std::FILE* f = std::fopen(c.json_out.c_str(), "wb");
    if (!f) {
      std::fprintf(stderr, "olab: cannot write %s\n", c.json_out.c_str());
      return kExitInternal;
    }
    std::fputs(js, f);
    std::fputc('\n', f);
    std::fclose(f);
  } else {
    std::printf("%s\n", js);
  }
  const bool pass = olab_compare_pass(cmp.get()) != 0;
  std::fprintf(stderr, "compare: %s (max field diff %.3e, %zu artifacts differ in bytes)\n", pass ? "pass" : "FAIL",
               olab_compare_max_field_diff(cmp.get()), olab_compare_differing_count(cmp.get()));
  return pass ? 0 : kExitDiagnosticFailure;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Double obstacle solver and free-boundary diagnostics"};
  app.set_version_flag("--version", std::string(olab_version()));
  app.require_subcommand(1);

  RunArgs solve_args, diag_args, conv_args;
  CompareArgs cmp_args;

  auto* solve = app.add_subcommand("solve", "solve a config and run its diagnostics");
  add_run_flags(solve, solve_args);
  auto* diagnose = app.add_subcommand("diagnose", "rerun diagnostics on a stored solution");
  add_run_flags(diagnose, diag_args);
  auto* conv = app.add_subcommand("convergence", "solve at grid scales 1, 2, 4 and fit the observed order");
  add_run_flags(conv, conv_args);
  conv->add_option("--max-growth", conv_args.max_growth, "allowed growth of the max second difference per level")
      ->check(CLI::PositiveNumber);
  auto* compare = app.add_subcommand("compare", "compare two output directories");
  compare->add_option("run_a", cmp_args.a, "first output directory")->required()->check(CLI::ExistingDirectory);
  compare->add_option("run_b", cmp_args.b, "second output directory")->required()->check(CLI::ExistingDirectory);
  compare->add_option("--field-tol", cmp_args.field_tol, "max-norm tolerance on fields")->check(CLI::PositiveNumber);
  compare->add_option("--report-tol", cmp_args.report_tol, "relative tolerance on report numbers")
      ->check(CLI::PositiveNumber);
  compare->add_option("--json", cmp_args.json_out, "write the diff report here instead of stdout");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitValidation;
  }

  if (solve->parsed()) return run_command(Command::Solve, solve_args);
  if (diagnose->parsed()) return run_command(Command::Diagnose, diag_args);
  if (conv->parsed()) return run_command(Command::Convergence, conv_args);
  if (compare->parsed()) return compare_command(cmp_args);
  return kExitValidation;
}
