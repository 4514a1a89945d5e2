#pragma once

#include <span>
#include <vector>

#include <Eigen/Dense>

#include "sssn/mesh.hpp"

namespace sssn {

// Nonsmooth term q(u) = sum_i g_i |T^i u^i| + indicator(N^i u^i = 0) over the
// slip nodes; everything here acts on one 3-vector per slip node.

enum class NodeState { Slip = 0, Stick = 1, Transition = 2 };

const char* to_string(NodeState state);

/// Basis pair of one subspace in the SC derivative of the subdifferential:
/// P an orthogonal projector and W(I - P) = I - P.
struct ScdPair {
  Eigen::Matrix3d P;
  Eigen::Matrix3d W;
};

/// Closed-form prox of lambda q_i: soft thresholding of the tangential part.
Eigen::Vector3d prox_node(const Eigen::Vector3d& u, double lambda, const SlipFrame& frame);

/// Membership u_star in the subdifferential of q_i at u, up to tol.
bool subdifferential_contains(const Eigen::Vector3d& u, const Eigen::Vector3d& u_star,
                              const SlipFrame& frame, double tol);

/// 1e-12 max(1, g_i).
double state_tolerance(const SlipFrame& frame);

NodeState classify(const Eigen::Vector3d& z, const Eigen::Vector3d& z_star,
                   const SlipFrame& frame, double tol);

/// The pair used by the Newton step at a prox output z: the stick pair
/// (0, I) when |z| <= tol, otherwise the unique slip pair.
ScdPair sc_pair(const Eigen::Vector3d& z, const SlipFrame& frame, double tol = 0.0);

/// Prox of lambda q on a full state (slip velocities, remaining velocities,
/// pressures); identity outside the slip blocks.
Eigen::VectorXd prox_all(const Eigen::VectorXd& v, double lambda,
                         std::span<const SlipFrame> frames, const NodeSets& sets);

}  // namespace sssn
