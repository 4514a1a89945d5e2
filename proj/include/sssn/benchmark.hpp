#pragma once

#include <functional>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "sssn/assembly.hpp"
#include "sssn/mesh.hpp"
#include "sssn/solver.hpp"

namespace sssn {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Closed-form manufactured solution on the unit cube.
struct ManufacturedFields {
  VectorField u;
  ScalarField p;
  std::function<Eigen::Matrix3d(const Point&)> grad_u;  // (i, j) = d u_i / d x_j
  VectorField f;                                         // -2 nu div eps(u) + grad p
  TractionField sigma_n;                                 // (2 nu eps(u) - p I) n
};

ManufacturedFields manufactured_fields(double nu);

struct ProblemSpec {
  // Cube with n subdivisions per axis unless mesh_path is set.
  int cube_n = 8;
  std::string mesh_path;
  double nu = 0.9;
  double kappa = 5.0;
  double g = 10.0;
  // Constant x-velocity prescribed on the Dirichlet faces of imported meshes.
  double inflow = 0.0;
  SolverConfig solver;
  std::string vtk_output;

  bool is_cube() const { return mesh_path.empty(); }
  /// Throws ConfigError when a field is out of range or the mesh file is missing.
  void validate() const;
};

/// Flat "key = value" text with '#' comments. Unknown keys are errors.
ProblemSpec parse_config(std::istream& in, const std::string& source = "<config>");
ProblemSpec read_config(const std::string& path);
/// Sets one key; used by the parser and for command-line overrides.
void apply_config_value(ProblemSpec& spec, const std::string& key, const std::string& value);

struct ErrorReport {
  double velocity_l2 = 0.0;
  double pressure_l2 = 0.0;  // after removing the mean difference
  double h = 0.0;            // largest element diameter
};

/// L2 errors of the nodal P1 fields (velocity 3 n_p, pressure n_p)
/// against the exact fields, degree 4 quadrature per element.
ErrorReport compute_errors(const TetMesh& mesh, const Vector& velocity, const Vector& pressure,
                           const VectorField& u_exact, const ScalarField& p_exact);

double mesh_size(const TetMesh& mesh);

TetMesh build_mesh(const ProblemSpec& spec);
StokesData stokes_data(const ProblemSpec& spec);

struct CaseResult {
  TetMesh mesh;
  SaddleProblem problem;
  SolveReport report;
  std::optional<ErrorReport> errors;  // cube problems only
  int n_p = 0, n_t = 0, n_s = 0;
};

CaseResult run_case(const ProblemSpec& spec);

/// Legacy ASCII unstructured grid with velocity, pressure, tangential speed
/// and slip state (0 slip, 1 stick, 2 transition, -1 off the slip boundary).
void write_vtk(std::ostream& out, const TetMesh& mesh, const Vector& velocity,
               const Vector& pressure, const SaddleProblem& problem,
               const std::vector<NodeState>& states);
void export_vtk(const std::string& path, const TetMesh& mesh, const Vector& velocity,
                const Vector& pressure, const SaddleProblem& problem,
                const std::vector<NodeState>& states);

struct SweepOptions {
  bool timing = true;  // CPU columns; off gives byte-identical output across runs
  int jobs = 1;
};

struct SweepCell {
  bool ok = false;
  int outer = 0, inner = 0;
  double seconds = 0.0;
  std::string failure;
};

struct SweepRow {
  int n = 0, n_p = 0, n_t = 0, n_s = 0;
  std::vector<SweepCell> cells;  // one per g
};

/// Runs every (mesh, g) pair on the cube and returns rows in the input order.
std::vector<SweepRow> run_table_sweep(const std::vector<int>& meshes,
                                      const std::vector<double>& g_values,
                                      const ProblemSpec& base, const SweepOptions& options = {});
void write_sweep_csv(std::ostream& out, const std::vector<SweepRow>& rows,
                     const std::vector<double>& g_values, const SweepOptions& options = {});

}  // namespace sssn
