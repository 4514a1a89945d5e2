#include "sssn/assembly.hpp"

#include <cmath>
#include <ostream>
#include <sstream>

#include "sssn/quadrature.hpp"

namespace sssn {

namespace {

using Triplet = Eigen::Triplet<double>;

SparseMatrix from_triplets(int rows, int cols, const std::vector<Triplet>& triplets) {
  SparseMatrix m(rows, cols);
  m.setFromTriplets(triplets.begin(), triplets.end());
  m.makeCompressed();
  return m;
}

std::string point_string(const Point& x) {
  std::ostringstream s;
  s.precision(17);
  s << '(' << x[0] << ", " << x[1] << ", " << x[2] << ')';
  return s.str();
}

// Rows [r0, r0 + nr) and columns [c0, c0 + nc) of a row-major matrix.
SparseMatrix slice(const SparseMatrix& m, int r0, int nr, int c0, int nc) {
  return m.block(r0, c0, nr, nc);
}

}  // namespace

ElementGeometry element_geometry(const TetMesh& mesh, int tet) {
  const auto& v = mesh.tets[tet];
  Eigen::Matrix3d jac;
  for (int k = 0; k < 3; ++k) jac.col(k) = mesh.nodes[v[k + 1]] - mesh.nodes[v[0]];
  const double det = jac.determinant();
  if (!(std::abs(det) / 6.0 >= 1e-14))
    throw AssemblyError("element " + std::to_string(tet) + " is degenerate (volume " +
                        std::to_string(det / 6.0) + ")");
  ElementGeometry geo;
  geo.volume = std::abs(det) / 6.0;
  const Eigen::Matrix3d inv = jac.inverse();  // rows: gradients of l1, l2, l3
  geo.grad.bottomRows<3>() = inv;
  geo.grad.row(0) = -inv.colwise().sum();
  return geo;
}

ViscousStiffness assemble_viscous_stiffness(const TetMesh& mesh, double nu) {
  if (!(nu > 0.0)) throw AssemblyError("viscosity must be positive");
  const int np = mesh.num_nodes();
  ViscousStiffness out;
  out.bubble.resize(mesh.tets.size());
  std::vector<Triplet> triplets;
  triplets.reserve(144 * mesh.tets.size());
  for (int t = 0; t < mesh.num_tets(); ++t) {
    const auto geo = element_geometry(mesh, t);
    const auto& v = mesh.tets[t];
    const Eigen::Matrix4d gg = geo.grad * geo.grad.transpose();
    // 2 nu eps(phi_a e_al) : eps(phi_b e_be) = nu (delta g_a.g_b + g_a,be g_b,al)
    for (int a = 0; a < 4; ++a)
      for (int b = 0; b < 4; ++b)
        for (int al = 0; al < 3; ++al)
          for (int be = 0; be < 3; ++be) {
            double val = geo.grad(a, be) * geo.grad(b, al);
            if (al == be) val += gg(a, b);
            triplets.emplace_back(3 * v[a] + al, 3 * v[b] + be, nu * geo.volume * val);
          }
    // int grad phi_b (x) grad phi_b = 256^2 * 24/9! |T| sum_k g_k g_k^T
    const Eigen::Matrix3d g2 = kBubbleGradFactor * geo.volume * geo.grad.transpose() * geo.grad;
    out.bubble[t] = nu * (g2.trace() * Eigen::Matrix3d::Identity() + g2);
  }
  out.linear = from_triplets(3 * np, 3 * np, triplets);
  return out;
}

SparseMatrix assemble_adhesion_mass(const TetMesh& mesh, std::span<const SlipFrame> frames,
                                    const NodeSets& sets) {
  if (frames.size() != sets.slip.size())
    throw AssemblyError("one slip frame per slip node expected");
  const int np = mesh.num_nodes();
  std::vector<Triplet> triplets;
  for (std::size_t k = 0; k < frames.size(); ++k) {
    const Eigen::Matrix3d block = frames[k].adhesion_weight * frames[k].tangent_projector();
    const int v = sets.slip[k];
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j)
        if (block(i, j) != 0.0) triplets.emplace_back(3 * v + i, 3 * v + j, block(i, j));
  }
  return from_triplets(3 * np, 3 * np, triplets);
}

Divergence assemble_divergence(const TetMesh& mesh) {
  const int np = mesh.num_nodes();
  Divergence out;
  out.bubble.resize(mesh.tets.size());
  std::vector<Triplet> triplets;
  triplets.reserve(48 * mesh.tets.size());
  for (int t = 0; t < mesh.num_tets(); ++t) {
    const auto geo = element_geometry(mesh, t);
    const auto& v = mesh.tets[t];
    // -(l_a, d_al l_b) = -|T|/4 g_b,al
    for (int a = 0; a < 4; ++a)
      for (int b = 0; b < 4; ++b)
        for (int al = 0; al < 3; ++al)
          triplets.emplace_back(v[a], 3 * v[b] + al, -0.25 * geo.volume * geo.grad(b, al));
    // -(l_a, d_al phi_b) = (d_al l_a, phi_b) since phi_b vanishes on the boundary
    out.bubble[t] = kBubbleMean * geo.volume * geo.grad;
  }
  out.linear = from_triplets(np, 3 * np, triplets);
  return out;
}

SparseMatrix assemble_pressure_mass(const TetMesh& mesh) {
  std::vector<Triplet> triplets;
  triplets.reserve(16 * mesh.tets.size());
  for (int t = 0; t < mesh.num_tets(); ++t) {
    const double vol = element_geometry(mesh, t).volume;
    const auto& v = mesh.tets[t];
    for (int a = 0; a < 4; ++a)
      for (int b = 0; b < 4; ++b) triplets.emplace_back(v[a], v[b], vol * (a == b ? 0.1 : 0.05));
  }
  return from_triplets(mesh.num_nodes(), mesh.num_nodes(), triplets);
}

Load assemble_load(const TetMesh& mesh, const VectorField& f, const TractionField& sigma_n) {
  const int np = mesh.num_nodes();
  Load out;
  out.linear = Vector::Zero(3 * np);
  out.bubble.assign(mesh.tets.size(), Eigen::Vector3d::Zero());
  const auto& vol_rule = tet_rule(5);
  for (int t = 0; t < mesh.num_tets(); ++t) {
    const auto geo = element_geometry(mesh, t);
    const auto& v = mesh.tets[t];
    for (std::size_t q = 0; q < vol_rule.points.size(); ++q) {
      const Eigen::Vector4d& lam = vol_rule.points[q];
      Point x = Point::Zero();
      for (int a = 0; a < 4; ++a) x += lam[a] * mesh.nodes[v[a]];
      const Eigen::Vector3d fx = f(x);
      if (!fx.allFinite())
        throw AssemblyError("non-finite body force at " + point_string(x) + " in element " +
                            std::to_string(t));
      const double w = vol_rule.weights[q] * geo.volume;
      for (int a = 0; a < 4; ++a) out.linear.segment<3>(3 * v[a]) += w * lam[a] * fx;
      out.bubble[t] += w * 256.0 * lam.prod() * fx;
    }
  }

  bool any_neumann = false;
  for (const auto& face : mesh.boundary_faces) any_neumann |= face.tag == BoundaryTag::Neumann;
  if (!any_neumann) return out;
  const auto opposite = opposite_vertices(mesh);
  const auto& tri_rule = triangle_rule(5);
  for (std::size_t fi = 0; fi < mesh.boundary_faces.size(); ++fi) {
    const auto& face = mesh.boundary_faces[fi];
    if (face.tag != BoundaryTag::Neumann) continue;
    const Eigen::Vector3d av = outward_area_vector(mesh, static_cast<int>(fi), opposite[fi]);
    const double area = av.norm();
    const Eigen::Vector3d normal = av / area;
    for (std::size_t q = 0; q < tri_rule.points.size(); ++q) {
      const Eigen::Vector3d& lam = tri_rule.points[q];
      Point x = Point::Zero();
      for (int a = 0; a < 3; ++a) x += lam[a] * mesh.nodes[face.nodes[a]];
      const Eigen::Vector3d s = sigma_n(x, normal, face.label);
      if (!s.allFinite())
        throw AssemblyError("non-finite traction at " + point_string(x) + " on boundary face " +
                            std::to_string(fi));
      const double w = tri_rule.weights[q] * area;
      for (int a = 0; a < 3; ++a) out.linear.segment<3>(3 * face.nodes[a]) += w * lam[a] * s;
    }
  }
  return out;
}

Condensed condense_bubbles(const TetMesh& mesh, std::span<const Eigen::Matrix3d> a_bubble,
                           std::span<const BubbleDivergence> b_bubble,
                           std::span<const Eigen::Vector3d> f_bubble) {
  const std::size_t nt = mesh.tets.size();
  if (a_bubble.size() != nt || b_bubble.size() != nt || f_bubble.size() != nt)
    throw AssemblyError("one bubble block per element expected");
  Condensed out;
  out.c = Vector::Zero(mesh.num_nodes());
  std::vector<Triplet> triplets;
  triplets.reserve(16 * nt);
  for (std::size_t t = 0; t < nt; ++t) {
    Eigen::LLT<Eigen::Matrix3d> llt(a_bubble[t]);
    if (llt.info() != Eigen::Success)
      throw AssemblyError("bubble block of element " + std::to_string(t) +
                          " is not positive definite");
    const Eigen::Matrix<double, 3, 4> ainv_bt = llt.solve(b_bubble[t].transpose());
    const Eigen::Matrix4d e_loc = b_bubble[t] * ainv_bt;
    const Eigen::Vector4d c_loc = -ainv_bt.transpose() * f_bubble[t];
    const auto& v = mesh.tets[t];
    for (int a = 0; a < 4; ++a) {
      out.c[v[a]] += c_loc[a];
      for (int b = 0; b < 4; ++b) triplets.emplace_back(v[a], v[b], 0.5 * (e_loc(a, b) + e_loc(b, a)));
    }
  }
  out.E = from_triplets(mesh.num_nodes(), mesh.num_nodes(), triplets);
  return out;
}

void SaddleProblem::build_blocks() {
  const int ns3 = slip_size(), ni3 = velocity_size() - slip_size();
  A_NN = slice(A_kappa, 0, ns3, 0, ns3);
  A_IN = slice(A_kappa, ns3, ni3, 0, ns3);
  A_II = slice(A_kappa, ns3, ni3, ns3, ni3);
  B_N = slice(B, 0, n_p(), 0, ns3);
  B_I = slice(B, 0, n_p(), ns3, ni3);
}

SaddleProblem apply_dirichlet(const TetMesh& mesh, NodeSets sets, std::vector<SlipFrame> frames,
                              const SparseMatrix& a_full, const SparseMatrix& b_full,
                              SparseMatrix e, const Vector& load, Vector c,
                              const VectorField& u_dirichlet) {
  const int np = mesh.num_nodes();
  if (sets.n_p() != np || a_full.rows() != 3 * np || b_full.rows() != np ||
      b_full.cols() != 3 * np || load.size() != 3 * np || c.size() != np)
    throw AssemblyError("inconsistent sizes in Dirichlet elimination");

  Vector ud = Vector::Zero(3 * np);
  for (int v : sets.dirichlet) {
    const Eigen::Vector3d val = u_dirichlet(mesh.nodes[v]);
    if (!val.allFinite())
      throw AssemblyError("Dirichlet datum not finite at node " + std::to_string(v));
    ud.segment<3>(3 * v) = val;
  }
  // full dof -> unknown dof, -1 for prescribed
  std::vector<int> dof(3 * np, -1);
  for (int v = 0; v < np; ++v) {
    const int k = sets.unknown_index[v];
    if (k >= 0)
      for (int al = 0; al < 3; ++al) dof[3 * v + al] = 3 * k + al;
  }

  SaddleProblem p;
  const int nu3 = 3 * sets.n_u();
  p.b = Vector::Zero(nu3);
  for (int r = 0; r < 3 * np; ++r)
    if (dof[r] >= 0) p.b[dof[r]] = load[r];

  std::vector<Triplet> ta, tb;
  ta.reserve(a_full.nonZeros());
  for (int r = 0; r < a_full.outerSize(); ++r) {
    if (dof[r] < 0) continue;
    for (SparseMatrix::InnerIterator it(a_full, r); it; ++it) {
      const int s = static_cast<int>(it.col());
      if (dof[s] >= 0) ta.emplace_back(dof[r], dof[s], it.value());
      else p.b[dof[r]] -= it.value() * ud[s];
    }
  }
  tb.reserve(b_full.nonZeros());
  for (int r = 0; r < b_full.outerSize(); ++r) {
    for (SparseMatrix::InnerIterator it(b_full, r); it; ++it) {
      const int s = static_cast<int>(it.col());
      if (dof[s] >= 0) tb.emplace_back(r, dof[s], it.value());
      else c[r] -= it.value() * ud[s];
    }
  }
  p.A_kappa = from_triplets(nu3, nu3, ta);
  p.B = from_triplets(np, nu3, tb);
  p.E = std::move(e);
  p.c = std::move(c);
  p.frames = std::move(frames);
  p.sets = std::move(sets);
  p.dirichlet_velocity = std::move(ud);
  p.build_blocks();
  return p;
}

SaddleProblem assemble_problem(const TetMesh& mesh, const StokesData& data) {
  NodeSets sets = classify_nodes(mesh);
  std::vector<SlipFrame> frames;
  if (sets.n_s() > 0) frames = compute_slip_frames(mesh, sets, data.g, data.kappa);
  auto viscous = assemble_viscous_stiffness(mesh, data.nu);
  SparseMatrix a_full = viscous.linear;
  if (!frames.empty()) a_full += assemble_adhesion_mass(mesh, frames, sets);
  auto div = assemble_divergence(mesh);
  auto load = assemble_load(mesh, data.f, data.sigma_n);
  auto cond = condense_bubbles(mesh, viscous.bubble, div.bubble, load.bubble);
  SaddleProblem p = apply_dirichlet(mesh, std::move(sets), std::move(frames), a_full, div.linear,
                                    std::move(cond.E), load.linear, std::move(cond.c),
                                    data.u_dirichlet);
  p.pressure_mass = assemble_pressure_mass(mesh);
  return p;
}

Vector full_velocity(const SaddleProblem& problem, const Vector& u) {
  Vector out = problem.dirichlet_velocity;
  const int nu = problem.n_u();
  for (int k = 0; k < nu; ++k)
    out.segment<3>(3 * problem.sets.node_of_unknown(k)) = u.segment<3>(3 * k);
  return out;
}

void write_triplets(std::ostream& out, const SparseMatrix& m) {
  const auto precision = out.precision(17);
  for (int r = 0; r < m.outerSize(); ++r)
    for (SparseMatrix::InnerIterator it(m, r); it; ++it)
      out << it.row() << ' ' << it.col() << ' ' << it.value() << '\n';
  out.precision(precision);
}

}  // namespace sssn
