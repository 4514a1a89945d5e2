#include "sssn/stickslip.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace sssn {

const char* to_string(NodeState state) {
  switch (state) {
    case NodeState::Slip: return "slip";
    case NodeState::Stick: return "stick";
    case NodeState::Transition: return "transition";
  }
  return "?";
}

Eigen::Vector3d prox_node(const Eigen::Vector3d& u, double lambda, const SlipFrame& frame) {
  const Eigen::Vector2d tu = frame.tangent * u;
  const double norm = tu.norm();
  const double threshold = lambda * frame.slip_weight;
  if (norm <= threshold) return Eigen::Vector3d::Zero();
  return (1.0 - threshold / norm) * (frame.tangent.transpose() * tu);
}

bool subdifferential_contains(const Eigen::Vector3d& u, const Eigen::Vector3d& u_star,
                              const SlipFrame& frame, double tol) {
  if (std::abs(frame.normal.dot(u)) > tol) return false;
  const Eigen::Vector2d tu = frame.tangent * u;
  const Eigen::Vector2d tstar = frame.tangent * u_star;
  const double g = frame.slip_weight;
  if (u.norm() <= tol) return tstar.norm() <= g + tol;
  if (tu.norm() == 0.0) return false;
  return (tstar - g * tu / tu.norm()).norm() <= tol;
}

double state_tolerance(const SlipFrame& frame) {
  return 1e-12 * std::max(1.0, frame.slip_weight);
}

NodeState classify(const Eigen::Vector3d& z, const Eigen::Vector3d& z_star,
                   const SlipFrame& frame, double tol) {
  if (z.norm() > tol) return NodeState::Slip;
  if ((frame.tangent * z_star).norm() < frame.slip_weight - tol) return NodeState::Stick;
  return NodeState::Transition;
}

ScdPair sc_pair(const Eigen::Vector3d& z, const SlipFrame& frame, double tol) {
  const Eigen::Vector2d tz = frame.tangent * z;
  const double norm = tz.norm();
  if (z.norm() <= tol || norm == 0.0)
    return {Eigen::Matrix3d::Zero(), Eigen::Matrix3d::Identity()};
  const Eigen::Vector2d dir = tz / norm;
  const Eigen::Matrix2d curvature =
      (frame.slip_weight / norm) * (Eigen::Matrix2d::Identity() - dir * dir.transpose());
  ScdPair pair;
  pair.P = frame.tangent_projector();
  pair.W = frame.tangent.transpose() * curvature * frame.tangent + frame.normal_projector();
  return pair;
}

Eigen::VectorXd prox_all(const Eigen::VectorXd& v, double lambda,
                         std::span<const SlipFrame> frames, const NodeSets& sets) {
  if (v.size() != 3 * sets.n_u() + sets.n_p())
    throw std::invalid_argument("state vector has size " + std::to_string(v.size()) +
                                ", expected " + std::to_string(3 * sets.n_u() + sets.n_p()));
  if (frames.size() != sets.slip.size())
    throw std::invalid_argument("one frame per slip node expected");
  Eigen::VectorXd out = v;
  for (std::size_t i = 0; i < frames.size(); ++i)
    out.segment<3>(3 * i) = prox_node(v.segment<3>(3 * i), lambda, frames[i]);
  return out;
}

}  // namespace sssn
