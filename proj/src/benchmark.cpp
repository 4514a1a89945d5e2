#include "sssn/benchmark.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <numbers>
#include <sstream>
#include <thread>

#include "sssn/quadrature.hpp"

namespace sssn {

ManufacturedFields manufactured_fields(double nu) {
  using std::cos;
  using std::sin;
  constexpr double tpi = 2.0 * std::numbers::pi;
  constexpr double fpi2 = tpi * tpi;

  ManufacturedFields m;
  m.u = [](const Point& x) {
    const double z4 = 4.0 * x[2] * (1.0 - x[2]);
    return Eigen::Vector3d(z4 * sin(tpi * x[1]) * (1.0 - cos(tpi * x[0])),
                           z4 * sin(tpi * x[0]) * (cos(tpi * x[1]) - 1.0), 0.0);
  };
  m.p = [](const Point& x) {
    return tpi * (cos(tpi * x[1]) - cos(tpi * x[0]) - cos(tpi * x[2]));
  };
  m.grad_u = [](const Point& x) {
    const double z4 = 4.0 * x[2] * (1.0 - x[2]), dz4 = 4.0 * (1.0 - 2.0 * x[2]);
    const double sx = sin(tpi * x[0]), cx = cos(tpi * x[0]);
    const double sy = sin(tpi * x[1]), cy = cos(tpi * x[1]);
    Eigen::Matrix3d g = Eigen::Matrix3d::Zero();
    g(0, 0) = z4 * sy * tpi * sx;
    g(0, 1) = z4 * tpi * cy * (1.0 - cx);
    g(0, 2) = dz4 * sy * (1.0 - cx);
    g(1, 0) = z4 * tpi * cx * (cy - 1.0);
    g(1, 1) = -z4 * sx * tpi * sy;
    g(1, 2) = dz4 * sx * (cy - 1.0);
    return g;
  };
  m.f = [nu](const Point& x) -> Eigen::Vector3d {
    const double z4 = 4.0 * x[2] * (1.0 - x[2]);
    const double sx = sin(tpi * x[0]), cx = cos(tpi * x[0]);
    const double sy = sin(tpi * x[1]), cy = cos(tpi * x[1]);
    const double lap_x = fpi2 * z4 * sy * (2.0 * cx - 1.0) - 8.0 * sy * (1.0 - cx);
    const double lap_y = -fpi2 * z4 * sx * (2.0 * cy - 1.0) - 8.0 * sx * (cy - 1.0);
    const Eigen::Vector3d grad_p(fpi2 * sx, -fpi2 * sy, fpi2 * sin(tpi * x[2]));
    return Eigen::Vector3d(-nu * lap_x, -nu * lap_y, 0.0) + grad_p;
  };
  auto grad_u = m.grad_u;
  auto p = m.p;
  m.sigma_n = [nu, grad_u, p](const Point& x, const Eigen::Vector3d& n, int) {
    const Eigen::Matrix3d g = grad_u(x);
    const Eigen::Matrix3d sigma = nu * (g + g.transpose()) - p(x) * Eigen::Matrix3d::Identity();
    return (sigma * n).eval();
  };
  return m;
}

void ProblemSpec::validate() const {
  if (is_cube() && cube_n < 1) throw ConfigError("n must be at least 1");
  if (!(nu > 0.0) || !std::isfinite(nu)) throw ConfigError("nu must be positive");
  if (!(kappa >= 0.0) || !std::isfinite(kappa)) throw ConfigError("kappa must be nonnegative");
  if (!(g >= 0.0) || !std::isfinite(g)) throw ConfigError("g must be nonnegative");
  if (!std::isfinite(inflow)) throw ConfigError("inflow must be finite");
  if (!is_cube() && !std::filesystem::exists(mesh_path))
    throw ConfigError("mesh file not found: " + mesh_path);
  try {
    solver.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
}

namespace {

double to_double(const std::string& key, const std::string& value) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(value, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != value.size())
    throw ConfigError("value of '" + key + "' is not a number: '" + value + "'");
  return v;
}

int to_int(const std::string& key, const std::string& value) {
  const double v = to_double(key, value);
  if (v != std::floor(v) || std::abs(v) > 1e9)
    throw ConfigError("value of '" + key + "' is not an integer: '" + value + "'");
  return static_cast<int>(v);
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

}  // namespace

void apply_config_value(ProblemSpec& spec, const std::string& key, const std::string& value) {
  if (key == "geometry") {
    if (value == "cube") {
      spec.mesh_path.clear();
    } else if (value != "mesh") {
      throw ConfigError("geometry must be 'cube' or 'mesh', got '" + value + "'");
    }
  } else if (key == "n") {
    spec.cube_n = to_int(key, value);
  } else if (key == "mesh") {
    spec.mesh_path = value;
  } else if (key == "nu") {
    spec.nu = to_double(key, value);
  } else if (key == "kappa") {
    spec.kappa = to_double(key, value);
  } else if (key == "g") {
    spec.g = to_double(key, value);
  } else if (key == "inflow") {
    spec.inflow = to_double(key, value);
  } else if (key == "epsilon") {
    spec.solver.epsilon = to_double(key, value);
  } else if (key == "lambda") {
    spec.solver.lambda = to_double(key, value);
  } else if (key == "omega") {
    spec.solver.omega = to_double(key, value);
  } else if (key == "n_alpha") {
    spec.solver.n_alpha = to_int(key, value);
  } else if (key == "r_tol") {
    spec.solver.r_tol = to_double(key, value);
  } else if (key == "c_fact") {
    spec.solver.c_fact = to_double(key, value);
  } else if (key == "inner_tol") {
    spec.solver.initial_inner_tol = to_double(key, value);
  } else if (key == "max_outer") {
    spec.solver.max_outer = to_int(key, value);
  } else if (key == "preconditioner") {
    try {
      spec.solver.preconditioner = parse_preconditioner(value);
    } catch (const std::invalid_argument& e) {
      throw ConfigError(e.what());
    }
  } else if (key == "output") {
    spec.vtk_output = value;
  } else {
    throw ConfigError("unknown key '" + key + "'");
  }
}

ProblemSpec parse_config(std::istream& in, const std::string& source) {
  ProblemSpec spec;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError(source + ":" + std::to_string(lineno) + ": expected 'key = value'");
    const std::string key = trim(line.substr(0, eq)), value = trim(line.substr(eq + 1));
    if (key.empty() || value.empty())
      throw ConfigError(source + ":" + std::to_string(lineno) + ": empty key or value");
    try {
      apply_config_value(spec, key, value);
    } catch (const ConfigError& e) {
      throw ConfigError(source + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return spec;
}

ProblemSpec read_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);
  ProblemSpec spec = parse_config(in, path);
  // Relative mesh paths are taken relative to the config file.
  if (!spec.mesh_path.empty() && std::filesystem::path(spec.mesh_path).is_relative()) {
    const auto dir = std::filesystem::path(path).parent_path();
    spec.mesh_path = (dir / spec.mesh_path).string();
  }
  return spec;
}

double mesh_size(const TetMesh& mesh) {
  double h = 0.0;
  for (const auto& t : mesh.tets)
    for (int a = 0; a < 4; ++a)
      for (int b = a + 1; b < 4; ++b) h = std::max(h, (mesh.nodes[t[a]] - mesh.nodes[t[b]]).norm());
  return h;
}

ErrorReport compute_errors(const TetMesh& mesh, const Vector& velocity, const Vector& pressure,
                           const VectorField& u_exact, const ScalarField& p_exact) {
  if (velocity.size() != 3 * mesh.num_nodes() || pressure.size() != mesh.num_nodes())
    throw std::invalid_argument("compute_errors: field sizes do not match the mesh");
  const auto& rule = tet_rule(4);
  double eu = 0.0, dp = 0.0, dp2 = 0.0, volume = 0.0;
  for (int t = 0; t < mesh.num_tets(); ++t) {
    const auto& v = mesh.tets[t];
    const double vol = tet_volume(mesh, t);
    volume += vol;
    for (std::size_t q = 0; q < rule.points.size(); ++q) {
      const auto& l = rule.points[q];
      Point x = Point::Zero();
      Eigen::Vector3d uh = Eigen::Vector3d::Zero();
      double ph = 0.0;
      for (int a = 0; a < 4; ++a) {
        x += l[a] * mesh.nodes[v[a]];
        uh += l[a] * velocity.segment<3>(3 * v[a]);
        ph += l[a] * pressure[v[a]];
      }
      const double w = rule.weights[q] * vol;
      eu += w * (uh - u_exact(x)).squaredNorm();
      const double d = ph - p_exact(x);
      dp += w * d;
      dp2 += w * d * d;
    }
  }
  ErrorReport r;
  // the rule has negative weights, so a zero error can come out slightly negative
  r.velocity_l2 = std::sqrt(std::max(0.0, eu));
  // ||d - mean(d)||^2 = ||d||^2 - (int d)^2 / |Omega|
  r.pressure_l2 = std::sqrt(std::max(0.0, dp2 - dp * dp / volume));
  r.h = mesh_size(mesh);
  return r;
}

TetMesh build_mesh(const ProblemSpec& spec) {
  if (spec.is_cube()) return tag_cube_boundary(generate_unit_cube_mesh(spec.cube_n));
  return import_mesh(spec.mesh_path);
}

StokesData stokes_data(const ProblemSpec& spec) {
  const auto m = manufactured_fields(spec.nu);
  StokesData d;
  d.nu = spec.nu;
  const double kappa = spec.kappa, g = spec.g;
  d.kappa = [kappa](const Point&) { return kappa; };
  d.g = [g](const Point&) { return g; };
  d.f = m.f;
  d.sigma_n = m.sigma_n;
  if (spec.is_cube()) {
    d.u_dirichlet = m.u;
  } else {
    const double inflow = spec.inflow;
    d.u_dirichlet = [inflow](const Point&) { return Eigen::Vector3d(inflow, 0.0, 0.0); };
  }
  return d;
}

CaseResult run_case(const ProblemSpec& spec) {
  spec.validate();
  CaseResult out;
  out.mesh = build_mesh(spec);
  out.problem = assemble_problem(out.mesh, stokes_data(spec));
  out.n_p = out.problem.n_p();
  out.n_t = out.mesh.num_tets();
  out.n_s = out.problem.n_s();
  out.report = solve(out.problem, spec.solver);
  if (spec.is_cube() && out.report.converged) {
    const auto m = manufactured_fields(spec.nu);
    out.errors = compute_errors(out.mesh, out.report.velocity, out.report.pressure, m.u, m.p);
  }
  return out;
}

void write_vtk(std::ostream& out, const TetMesh& mesh, const Vector& velocity,
               const Vector& pressure, const SaddleProblem& problem,
               const std::vector<NodeState>& states) {
  const int np = mesh.num_nodes();
  if (velocity.size() != 3 * np || pressure.size() != np)
    throw std::invalid_argument("write_vtk: field sizes do not match the mesh");
  if (states.size() != problem.sets.slip.size())
    throw std::invalid_argument("write_vtk: one state per slip node expected");

  std::vector<double> speed(np, 0.0);
  std::vector<int> code(np, -1);
  for (std::size_t i = 0; i < problem.sets.slip.size(); ++i) {
    const int node = problem.sets.slip[i];
    speed[node] = (problem.frames[i].tangent * velocity.segment<3>(3 * node)).norm();
    code[node] = static_cast<int>(states[i]);
  }

  out << std::setprecision(12);
  out << "# vtk DataFile Version 3.0\nstokes slip solution\nASCII\nDATASET UNSTRUCTURED_GRID\n";
  out << "POINTS " << np << " double\n";
  for (const auto& x : mesh.nodes) out << x[0] << ' ' << x[1] << ' ' << x[2] << '\n';
  out << "CELLS " << mesh.num_tets() << ' ' << 5 * mesh.num_tets() << '\n';
  for (const auto& t : mesh.tets) out << "4 " << t[0] << ' ' << t[1] << ' ' << t[2] << ' ' << t[3] << '\n';
  out << "CELL_TYPES " << mesh.num_tets() << '\n';
  for (int t = 0; t < mesh.num_tets(); ++t) out << "10\n";
  out << "POINT_DATA " << np << '\n';
  out << "VECTORS velocity double\n";
  for (int i = 0; i < np; ++i)
    out << velocity[3 * i] << ' ' << velocity[3 * i + 1] << ' ' << velocity[3 * i + 2] << '\n';
  out << "SCALARS pressure double 1\nLOOKUP_TABLE default\n";
  for (int i = 0; i < np; ++i) out << pressure[i] << '\n';
  out << "SCALARS tangential_speed double 1\nLOOKUP_TABLE default\n";
  for (int i = 0; i < np; ++i) out << speed[i] << '\n';
  out << "SCALARS slip_state int 1\nLOOKUP_TABLE default\n";
  for (int i = 0; i < np; ++i) out << code[i] << '\n';
}

void export_vtk(const std::string& path, const TetMesh& mesh, const Vector& velocity,
                const Vector& pressure, const SaddleProblem& problem,
                const std::vector<NodeState>& states) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open VTK output file: " + path);
  write_vtk(out, mesh, velocity, pressure, problem, states);
  out.flush();
  if (!out) throw std::runtime_error("failed writing VTK output file: " + path);
}

std::vector<SweepRow> run_table_sweep(const std::vector<int>& meshes,
                                      const std::vector<double>& g_values,
                                      const ProblemSpec& base, const SweepOptions& options) {
  if (meshes.empty()) throw ConfigError("sweep needs at least one mesh");
  if (g_values.empty()) throw ConfigError("sweep needs at least one g value");
  for (int n : meshes)
    if (n < 1) throw ConfigError("sweep mesh size must be at least 1, got " + std::to_string(n));
  for (double g : g_values)
    if (!(g >= 0.0)) throw ConfigError("sweep g values must be nonnegative");

  std::vector<SweepRow> rows(meshes.size());
  for (std::size_t r = 0; r < meshes.size(); ++r) {
    rows[r].n = meshes[r];
    rows[r].cells.resize(g_values.size());
  }
  const std::size_t total = meshes.size() * g_values.size();

  auto run_one = [&](std::size_t idx) {
    const std::size_t r = idx / g_values.size(), c = idx % g_values.size();
    ProblemSpec spec = base;
    spec.mesh_path.clear();
    spec.cube_n = meshes[r];
    spec.g = g_values[c];
    SweepCell& cell = rows[r].cells[c];
    try {
      const CaseResult res = run_case(spec);
      if (c == 0) {
        rows[r].n_p = res.n_p;
        rows[r].n_t = res.n_t;
        rows[r].n_s = res.n_s;
      }
      cell.ok = res.report.converged;
      cell.outer = res.report.outer_iterations();
      cell.inner = res.report.inner_iterations();
      cell.seconds = res.report.wall_seconds;
      if (!cell.ok) cell.failure = "not converged";
    } catch (const std::exception& e) {
      cell.ok = false;
      cell.failure = e.what();
    }
  };

  const int jobs = std::max(1, std::min<int>(options.jobs, static_cast<int>(total)));
  if (jobs == 1) {
    for (std::size_t i = 0; i < total; ++i) run_one(i);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    for (int j = 0; j < jobs; ++j)
      pool.emplace_back([&] {
        for (std::size_t i = next++; i < total; i = next++) run_one(i);
      });
    for (auto& t : pool) t.join();
  }

  // Counts for rows whose first case failed before assembly finished.
  for (auto& row : rows) {
    if (row.n_p == 0) {
      const TetMesh mesh = generate_unit_cube_mesh(row.n);
      row.n_p = mesh.num_nodes();
      row.n_t = mesh.num_tets();
      row.n_s = classify_nodes(tag_cube_boundary(mesh)).n_s();
    }
  }
  return rows;
}

namespace {

std::string g_label(double g) {
  std::ostringstream s;
  s << g;
  return s.str();
}

}  // namespace

void write_sweep_csv(std::ostream& out, const std::vector<SweepRow>& rows,
                     const std::vector<double>& g_values, const SweepOptions& options) {
  out << "n,n_p,n_t,n_s";
  for (double g : g_values) {
    const auto l = g_label(g);
    out << ",It_g" << l << ",It_in_g" << l;
    if (options.timing) out << ",CPU_g" << l;
  }
  out << '\n';
  for (const auto& row : rows) {
    out << row.n << ',' << row.n_p << ',' << row.n_t << ',' << row.n_s;
    for (const auto& cell : row.cells) {
      if (cell.ok) {
        out << ',' << cell.outer << ',' << cell.inner;
        if (options.timing) out << ',' << std::fixed << std::setprecision(3) << cell.seconds
                                << std::defaultfloat;
      } else {
        out << ",FAIL,FAIL";
        if (options.timing) out << ",FAIL";
      }
    }
    out << '\n';
  }
}

}  // namespace sssn
