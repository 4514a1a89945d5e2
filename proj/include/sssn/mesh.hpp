#pragma once

#include <array>
#include <functional>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace sssn {

using Point = Eigen::Vector3d;
using ScalarField = std::function<double(const Point&)>;

class MeshError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class BoundaryTag { Dirichlet, Neumann, Slip };

struct BoundaryFace {
  std::array<int, 3> nodes;
  BoundaryTag tag = BoundaryTag::Dirichlet;
  // Distinguishes several Neumann parts (N1, N2, ...); 0 means unlabeled.
  int label = 0;
};

/// Tetrahedral mesh with tagged boundary triangles. Node, tet and face
/// indices are zero-based.
struct TetMesh {
  std::vector<Point> nodes;
  std::vector<std::array<int, 4>> tets;
  std::vector<BoundaryFace> boundary_faces;

  int num_nodes() const { return static_cast<int>(nodes.size()); }
  int num_tets() const { return static_cast<int>(tets.size()); }
};

/// Signed volume of the tetrahedron (a, b, c, d).
double signed_volume(const Point& a, const Point& b, const Point& c, const Point& d);
double tet_volume(const TetMesh& mesh, int tet);

/// Structured mesh of the unit cube with n subdivisions per edge. Every
/// hexahedral cell is split into five tetrahedra; the central tetrahedron
/// always joins the grid points with even index sum, which keeps the face
/// diagonals of neighbouring cells conforming. All six cube faces are
/// emitted as outward oriented triangles tagged Dirichlet.
TetMesh generate_unit_cube_mesh(int n);

/// Tags the faces of a unit cube mesh: x2 = 1 slip, x1 = 0 and x1 = 1
/// Neumann (labels 1 and 2), x2 = 0, x3 = 0, x3 = 1 Dirichlet.
TetMesh tag_cube_boundary(TetMesh mesh);

/// Checks index bounds, positive tet volumes, that every boundary face is a
/// face of exactly one tet, that every exterior tet face is listed, and that
/// the boundary surface is closed. Throws MeshError naming the entity.
void validate_mesh(const TetMesh& mesh);

/// For each boundary face the vertex of its owning tet not on the face.
std::vector<int> opposite_vertices(const TetMesh& mesh);

/// Outward unit normal times area of boundary face f.
Eigen::Vector3d outward_area_vector(const TetMesh& mesh, int face, int opposite);

// Plain text mesh format:
//   tetmesh 1
//   nodes <n>   followed by n lines "x y z"
//   tets <n>    followed by n lines of four node indices
//   bfaces <m>  followed by m lines "i j k TAG", TAG in {D, N, S} (N may
//               carry a numeric label, e.g. N2)
// '#' starts a comment.
TetMesh read_mesh(std::istream& in);
void write_mesh(std::ostream& out, const TetMesh& mesh);
TetMesh import_mesh(const std::string& path);
void export_mesh(const std::string& path, const TetMesh& mesh);

/// Node classification. Dirichlet takes precedence over slip, slip over
/// Neumann. Unknown velocity nodes are ordered slip first, then remaining,
/// each group sorted by mesh id.
struct NodeSets {
  std::vector<int> dirichlet;
  std::vector<int> slip;
  std::vector<int> remaining;
  // Mesh node id -> position in the unknown ordering, -1 for Dirichlet nodes.
  std::vector<int> unknown_index;

  int n_p() const { return static_cast<int>(unknown_index.size()); }
  int n_s() const { return static_cast<int>(slip.size()); }
  int n_d() const { return static_cast<int>(dirichlet.size()); }
  int n_u() const { return static_cast<int>(slip.size() + remaining.size()); }
  // Mesh node id of unknown position k.
  int node_of_unknown(int k) const {
    return k < n_s() ? slip[k] : remaining[k - n_s()];
  }
};

NodeSets classify_nodes(const TetMesh& mesh);

/// Orthonormal frame at a slip node with the lumped slip and adhesion
/// weights g_i = mu_i g(x_i), kappa_i = mu_i kappa(x_i).
struct SlipFrame {
  Eigen::Matrix<double, 2, 3> tangent;
  Eigen::RowVector3d normal;
  double slip_weight = 0.0;
  double adhesion_weight = 0.0;
  double measure = 0.0;  // one third of the adjacent slip triangle areas

  Eigen::Matrix3d tangent_projector() const { return tangent.transpose() * tangent; }
  Eigen::Matrix3d normal_projector() const { return normal.transpose() * normal; }
};

/// Builds the frame from a unit normal: the first tangent is the coordinate
/// axis least aligned with the normal after one Gram-Schmidt step, the
/// second is normal x first.
SlipFrame frame_from_normal(const Eigen::Vector3d& normal);

std::vector<SlipFrame> compute_slip_frames(const TetMesh& mesh, const NodeSets& sets,
                                           const ScalarField& g, const ScalarField& kappa);

}  // namespace sssn
