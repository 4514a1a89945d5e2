#pragma once

#include <functional>
#include <iosfwd>
#include <span>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include "sssn/mesh.hpp"

namespace sssn {

using SparseMatrix = Eigen::SparseMatrix<double, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;
using VectorField = std::function<Eigen::Vector3d(const Point&)>;
// Neumann traction evaluated at a boundary point with the outward unit
// normal and the label of the Neumann part.
using TractionField =
    std::function<Eigen::Vector3d(const Point&, const Eigen::Vector3d& normal, int label)>;

class AssemblyError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

using BubbleDivergence = Eigen::Matrix<double, 4, 3>;

/// Volume and constant barycentric gradients (one row per vertex).
struct ElementGeometry {
  double volume;
  Eigen::Matrix<double, 4, 3> grad;
};

/// Throws AssemblyError for elements with volume below 1e-14.
ElementGeometry element_geometry(const TetMesh& mesh, int tet);

// Exact integrals of the bubble 256 l1 l2 l3 l4 over a tet, as multiples of |T|.
inline constexpr double kBubbleMean = 32.0 / 105.0;
inline constexpr double kBubbleGradFactor = 256.0 * 256.0 * 24.0 / 362880.0;

/// Velocity dofs are numbered 3 * node + component over all mesh nodes.
struct ViscousStiffness {
  SparseMatrix linear;                 // 3 n_p x 3 n_p
  std::vector<Eigen::Matrix3d> bubble;  // per element, bubble x bubble
};

/// Symmetric gradient form 2 nu (eps(w), eps(v)) for the P1 part and the
/// element bubbles. The P1-bubble coupling vanishes identically.
ViscousStiffness assemble_viscous_stiffness(const TetMesh& mesh, double nu);

/// Lumped tangential adhesion kappa_i T^T T on the 3x3 diagonal block of
/// each slip node (3 n_p x 3 n_p, mesh dof numbering).
SparseMatrix assemble_adhesion_mass(const TetMesh& mesh, std::span<const SlipFrame> frames,
                                    const NodeSets& sets);

struct Divergence {
  SparseMatrix linear;                // n_p x 3 n_p, b(q, w) = -(q, div w)
  std::vector<BubbleDivergence> bubble;  // per element: local pressure node x component
};

Divergence assemble_divergence(const TetMesh& mesh);

/// P1 mass matrix (l_a, l_b) on the pressure nodes.
SparseMatrix assemble_pressure_mass(const TetMesh& mesh);

struct Load {
  Vector linear;                       // 3 n_p
  std::vector<Eigen::Vector3d> bubble;  // per element
};

/// Body force against P1 and bubble test functions, plus traction on the
/// Neumann faces against P1 traces. Degree 5 quadrature on both.
Load assemble_load(const TetMesh& mesh, const VectorField& f, const TractionField& sigma_n);

struct Condensed {
  SparseMatrix E;  // n_p x n_p, symmetric positive semidefinite
  Vector c;        // n_p
};

/// Static condensation of the bubble unknowns. With d = A_bb^{-1}(f_b - B_b^T p)
/// the divergence row becomes B u - E p - c = 0.
Condensed condense_bubbles(const TetMesh& mesh, std::span<const Eigen::Matrix3d> a_bubble,
                           std::span<const BubbleDivergence> b_bubble,
                           std::span<const Eigen::Vector3d> f_bubble);

/// Condensed algebraic problem in the unknown ordering (slip velocities,
/// remaining velocities, pressures). Blocks are views by index range,
/// stored explicitly for the solver.
struct SaddleProblem {
  SparseMatrix A_kappa;  // 3 n_u x 3 n_u
  SparseMatrix B;        // n_p x 3 n_u
  SparseMatrix E;        // n_p x n_p
  Vector b;              // 3 n_u
  Vector c;              // n_p
  std::vector<SlipFrame> frames;
  NodeSets sets;
  Vector dirichlet_velocity;  // 3 n_p, prescribed values (zero off the Dirichlet nodes)
  SparseMatrix pressure_mass;  // n_p x n_p P1 mass; empty unless assembled, used for preconditioning

  SparseMatrix A_NN, A_IN, A_II, B_N, B_I;

  int n_s() const { return sets.n_s(); }
  int n_u() const { return sets.n_u(); }
  int n_p() const { return sets.n_p(); }
  int slip_size() const { return 3 * n_s(); }
  int velocity_size() const { return 3 * n_u(); }
  int state_size() const { return 3 * n_u() + n_p(); }

  /// Recomputes the N/I blocks from A_kappa and B.
  void build_blocks();
};

/// Removes the Dirichlet velocity rows and columns, moves their
/// contribution into b and c, and renumbers velocities slip first.
SaddleProblem apply_dirichlet(const TetMesh& mesh, NodeSets sets, std::vector<SlipFrame> frames,
                              const SparseMatrix& a_full, const SparseMatrix& b_full,
                              SparseMatrix e, const Vector& load, Vector c,
                              const VectorField& u_dirichlet);

struct StokesData {
  double nu = 1.0;
  ScalarField kappa = [](const Point&) { return 0.0; };
  ScalarField g = [](const Point&) { return 0.0; };
  VectorField f = [](const Point&) { return Eigen::Vector3d::Zero().eval(); };
  TractionField sigma_n = [](const Point&, const Eigen::Vector3d&, int) {
    return Eigen::Vector3d::Zero().eval();
  };
  VectorField u_dirichlet = [](const Point&) { return Eigen::Vector3d::Zero().eval(); };
};

/// Full pipeline: classification, frames, assembly, condensation and
/// Dirichlet elimination.
SaddleProblem assemble_problem(const TetMesh& mesh, const StokesData& data);

/// Nodal velocities on all mesh nodes (3 n_p) from the unknown vector u,
/// with the Dirichlet values reinserted.
Vector full_velocity(const SaddleProblem& problem, const Vector& u);

/// "row col value" lines, zero-based.
void write_triplets(std::ostream& out, const SparseMatrix& m);

}  // namespace sssn
