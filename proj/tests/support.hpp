// Shared builders and independent oracles for the test binaries.
#pragma once

#include <cmath>
#include <numbers>
#include <random>

#include <Eigen/Dense>

#include "sssn/assembly.hpp"
#include "sssn/benchmark.hpp"
#include "sssn/linsolve.hpp"
#include "sssn/mesh.hpp"
#include "sssn/solver.hpp"
#include "sssn/stickslip.hpp"

namespace testing {

using sssn::Point;
using sssn::Vector;

inline Eigen::MatrixXd dense(const sssn::SparseMatrix& m) { return Eigen::MatrixXd(m); }

inline sssn::TetMesh cube(int n) { return sssn::tag_cube_boundary(sssn::generate_unit_cube_mesh(n)); }

/// Manufactured cube problem with constant kappa and g.
inline sssn::SaddleProblem cube_problem(int n, double g, double kappa = 5.0, double nu = 0.9) {
  sssn::ProblemSpec spec;
  spec.cube_n = n;
  spec.g = g;
  spec.kappa = kappa;
  spec.nu = nu;
  return sssn::assemble_problem(cube(n), sssn::stokes_data(spec));
}

/// Random unit normal and the derived frame with slip weight g.
inline sssn::SlipFrame random_frame(std::mt19937& rng, double g) {
  std::normal_distribution<double> nd;
  Eigen::Vector3d n(nd(rng), nd(rng), nd(rng));
  n.normalize();
  auto f = sssn::frame_from_normal(n);
  f.slip_weight = g;
  return f;
}

inline Vector random_vector(std::mt19937& rng, int n, double scale = 1.0) {
  std::normal_distribution<double> nd(0.0, scale);
  Vector v(n);
  for (int i = 0; i < n; ++i) v[i] = nd(rng);
  return v;
}

/// Prox of lambda q_i by direct minimisation of
///   1/2 |z - u|^2 + lambda g |T z|  over  N z = 0.
/// With z = T^T r d(theta) the radial problem is a scalar quadratic; the
/// angle is found by a grid search followed by golden-section refinement.
inline Eigen::Vector3d brute_force_prox(const Eigen::Vector3d& u, double lambda,
                                        const sssn::SlipFrame& frame) {
  const Eigen::Vector2d a = frame.tangent * u;
  const double lg = lambda * frame.slip_weight;
  auto best_r = [&](double th) {
    return std::max(0.0, a.dot(Eigen::Vector2d(std::cos(th), std::sin(th))) - lg);
  };
  auto objective = [&](double th) {
    const double r = best_r(th);
    const Eigen::Vector2d w = r * Eigen::Vector2d(std::cos(th), std::sin(th));
    return 0.5 * (frame.tangent.transpose() * w - u).squaredNorm() + lg * r;
  };
  constexpr int grid = 720;
  const double step = 2.0 * std::numbers::pi / grid;
  int arg = 0;
  double fbest = objective(0.0);
  for (int k = 1; k < grid; ++k) {
    const double f = objective(k * step);
    if (f < fbest) {
      fbest = f;
      arg = k;
    }
  }
  double lo = (arg - 1) * step, hi = (arg + 1) * step;
  const double phi = (std::sqrt(5.0) - 1.0) / 2.0;
  for (int it = 0; it < 200 && hi - lo > 1e-14; ++it) {
    const double m1 = hi - phi * (hi - lo), m2 = lo + phi * (hi - lo);
    if (objective(m1) < objective(m2)) hi = m2;
    else lo = m1;
  }
  const double th = 0.5 * (lo + hi);
  const Eigen::Vector2d w = best_r(th) * Eigen::Vector2d(std::cos(th), std::sin(th));
  return frame.tangent.transpose() * w;
}

/// Relative L2 norm of the P1 velocity difference over the mesh, by
/// degree-4 quadrature.
inline double relative_velocity_l2(const sssn::TetMesh& mesh, const Vector& a, const Vector& b) {
  const Vector zero_p = Vector::Zero(mesh.num_nodes());
  const auto diff = sssn::compute_errors(mesh, a - b, zero_p,
                                         [](const Point&) { return Eigen::Vector3d::Zero().eval(); },
                                         [](const Point&) { return 0.0; });
  const auto ref = sssn::compute_errors(mesh, b, zero_p,
                                        [](const Point&) { return Eigen::Vector3d::Zero().eval(); },
                                        [](const Point&) { return 0.0; });
  return diff.velocity_l2 / ref.velocity_l2;
}

/// GE membership check: linear rows on remaining velocities and pressures
/// vanish to tol, and -y_i lies in the subdifferential of q_i at u_i.
inline bool satisfies_ge(const sssn::SaddleProblem& problem, const Vector& x, double tol) {
  const Vector y = sssn::eval_H(problem, x);
  const int ns3 = problem.slip_size();
  if (y.tail(y.size() - ns3).cwiseAbs().maxCoeff() > tol) return false;
  for (int i = 0; i < problem.n_s(); ++i) {
    if (!sssn::subdifferential_contains(x.segment<3>(3 * i), -y.segment<3>(3 * i),
                                        problem.frames[i], tol))
      return false;
  }
  return true;
}

/// Rebuilds the tet mesh with all Slip faces retagged Dirichlet.
inline sssn::TetMesh no_slip_variant(sssn::TetMesh mesh) {
  for (auto& f : mesh.boundary_faces)
    if (f.tag == sssn::BoundaryTag::Slip) f.tag = sssn::BoundaryTag::Dirichlet;
  return mesh;
}

}  // namespace testing
