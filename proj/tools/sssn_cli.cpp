// stokes-slip: mesh generation, single solves and Table-style sweeps for
// Stokes flow with stick-slip boundary conditions.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>

#include <CLI11.hpp>

#include "sssn/benchmark.hpp"

namespace {

int cmd_gen_mesh(int n, const std::string& out) {
  const auto mesh = sssn::tag_cube_boundary(sssn::generate_unit_cube_mesh(n));
  sssn::export_mesh(out, mesh);
  const auto sets = sssn::classify_nodes(mesh);
  std::cout << "wrote " << out << ": n_p=" << mesh.num_nodes() << " n_t=" << mesh.num_tets()
            << " n_s=" << sets.n_s() << '\n';
  return 0;
}

struct SolveArgs {
  std::string config, vtk, log, mesh;
  std::optional<double> g, kappa, nu, lambda, epsilon;
  std::optional<int> n;
  std::optional<std::string> preconditioner;
};

sssn::ProblemSpec load_spec(const std::string& config) {
  return config.empty() ? sssn::ProblemSpec{} : sssn::read_config(config);
}

int cmd_solve(const SolveArgs& a) {
  auto spec = load_spec(a.config);
  if (a.g) spec.g = *a.g;
  if (a.kappa) spec.kappa = *a.kappa;
  if (a.nu) spec.nu = *a.nu;
  if (a.lambda) spec.solver.lambda = *a.lambda;
  if (a.epsilon) spec.solver.epsilon = *a.epsilon;
  if (a.n) {
    spec.cube_n = *a.n;
    spec.mesh_path.clear();
  }
  if (!a.mesh.empty()) spec.mesh_path = a.mesh;
  if (a.preconditioner) sssn::apply_config_value(spec, "preconditioner", *a.preconditioner);
  if (!a.vtk.empty()) spec.vtk_output = a.vtk;

  const auto res = sssn::run_case(spec);
  const auto& rep = res.report;
  std::printf("n_p=%d n_t=%d n_s=%d\n", res.n_p, res.n_t, res.n_s);
  for (const auto& rec : rep.history) {
    std::printf("k=%2d  r=%.3e  it_in=%4d  slip/stick/trans=%d/%d/%d  %s\n", rec.k, rec.residual,
                rec.inner_iterations, rec.n_slip, rec.n_stick, rec.n_transition,
                sssn::to_string(rec.step));
  }
  std::printf("%s after %d outer / %d inner iterations, solve %.3f s\n",
              rep.converged ? "converged" : "NOT converged", rep.outer_iterations(),
              rep.inner_iterations(), rep.wall_seconds);
  if (res.errors) {
    std::printf("h=%.4f  |u-u_h|_L2=%.4e  |p-p_h|_L2=%.4e\n", res.errors->h,
                res.errors->velocity_l2, res.errors->pressure_l2);
  }
  if (!a.log.empty()) {
    std::ofstream out(a.log);
    if (!out) throw std::runtime_error("cannot open log file: " + a.log);
    sssn::write_iteration_log(out, rep.history);
  }
  if (!spec.vtk_output.empty()) {
    sssn::export_vtk(spec.vtk_output, res.mesh, rep.velocity, rep.pressure, res.problem,
                     rep.states);
  }
  return rep.converged ? 0 : 1;
}

struct SweepArgs {
  std::string config, out;
  std::vector<int> meshes{8, 10, 12};
  std::vector<double> g{0.0, 5.0, 10.0};
  bool no_cpu = false;
  int jobs = 1;
};

int cmd_sweep(const SweepArgs& a) {
  const auto spec = load_spec(a.config);
  sssn::SweepOptions opts;
  opts.timing = !a.no_cpu;
  opts.jobs = a.jobs;
  const auto rows = sssn::run_table_sweep(a.meshes, a.g, spec, opts);
  if (a.out.empty() || a.out == "-") {
    sssn::write_sweep_csv(std::cout, rows, a.g, opts);
  } else {
    std::ofstream out(a.out);
    if (!out) throw std::runtime_error("cannot open output file: " + a.out);
    sssn::write_sweep_csv(out, rows, a.g, opts);
  }
  bool all_ok = true;
  for (const auto& row : rows)
    for (std::size_t c = 0; c < row.cells.size(); ++c)
      if (!row.cells[c].ok) {
        all_ok = false;
        std::cerr << "n=" << row.n << " g=" << a.g[c] << ": " << row.cells[c].failure << '\n';
      }
  return all_ok ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Stokes flow with stick-slip boundary conditions"};
  app.require_subcommand(1);

  int gen_n = 8;
  std::string gen_out;
  auto* gen = app.add_subcommand("gen-mesh", "write a tagged unit cube mesh");
  gen->add_option("--n", gen_n, "subdivisions per axis")->required()->check(CLI::PositiveNumber);
  gen->add_option("--out", gen_out, "output mesh file")->required();

  SolveArgs sa;
  auto* sol = app.add_subcommand("solve", "solve one problem");
  sol->add_option("--config", sa.config, "key = value configuration file")->check(CLI::ExistingFile);
  sol->add_option("--g", sa.g, "slip bound");
  sol->add_option("--kappa", sa.kappa, "adhesion coefficient");
  sol->add_option("--nu", sa.nu, "kinematic viscosity");
  sol->add_option("--n", sa.n, "cube subdivisions");
  sol->add_option("--mesh", sa.mesh, "mesh file instead of the cube")->check(CLI::ExistingFile);
  sol->add_option("--lambda", sa.lambda, "prox parameter");
  sol->add_option("--epsilon", sa.epsilon, "relative residual tolerance");
  sol->add_option("--preconditioner", sa.preconditioner, "GMRES preconditioner: none, diagonal or mass");
  sol->add_option("--vtk", sa.vtk, "VTK output file");
  sol->add_option("--log", sa.log, "iteration CSV log");

  SweepArgs sw;
  auto* swp = app.add_subcommand("sweep", "run a mesh x g table on the cube");
  swp->add_option("--config", sw.config, "key = value configuration file")->check(CLI::ExistingFile);
  swp->add_option("--meshes", sw.meshes, "cube subdivisions")->delimiter(',');
  swp->add_option("--g", sw.g, "slip bounds")->delimiter(',');
  swp->add_option("--out", sw.out, "CSV output file (default stdout)");
  swp->add_flag("--no-cpu", sw.no_cpu, "omit the wall-clock columns");
  swp->add_option("--jobs", sw.jobs, "cases run in parallel")->check(CLI::PositiveNumber);

  CLI11_PARSE(app, argc, argv);

  try {
    if (*gen) return cmd_gen_mesh(gen_n, gen_out);
    if (*sol) return cmd_solve(sa);
    if (*swp) return cmd_sweep(sw);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 1;
}
