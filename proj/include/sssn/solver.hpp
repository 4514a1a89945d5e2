#pragma once

#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "sssn/assembly.hpp"
#include "sssn/linsolve.hpp"
#include "sssn/stickslip.hpp"

namespace sssn {

class SolverError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Right preconditioner of the reduced Newton system. Diagonal is Jacobi
/// scaling; PressureMass keeps Jacobi on the slip rows and uses a scaled
/// pressure mass solve on the pressure rows (falls back to Diagonal when
/// the problem carries no pressure mass matrix).
enum class Preconditioner { None, Diagonal, PressureMass };

const char* to_string(Preconditioner kind);
/// Accepts "none", "diagonal" and "mass"; throws std::invalid_argument otherwise.
Preconditioner parse_preconditioner(const std::string& name);

struct SolverConfig {
  double lambda = 2.0;
  double epsilon = 1e-8;  // stop when r <= epsilon r0
  double omega = 0.25;    // sufficient decrease factor
  int n_alpha = 10;       // max step halvings
  double r_tol = 0.95;
  double c_fact = 0.8;
  double initial_inner_tol = 1e-2;
  double inner_tol_floor = 1e-12;
  int max_outer = 100;
  int gmres_restart = 200;
  int gmres_max_iters = 2000;
  Preconditioner preconditioner = Preconditioner::PressureMass;

  /// Throws std::invalid_argument when a parameter is out of range.
  void validate() const;
};

/// Iterate x = (u_N, u_I, p_hat) with the cached quantities of the
/// approximation step at x.
struct SolverState {
  Vector x;
  Vector y;    // H(x)
  Vector z_n;  // prox outputs at the slip nodes
  Vector r_n;  // z_n - u_N
  double r = 0.0;
};

enum class StepKind { NewtonFull, NewtonDamped, DouglasRachford, Converged, Stopped };

const char* to_string(StepKind kind);

struct IterationRecord {
  int k = 0;
  double residual = 0.0;
  int inner_iterations = 0;
  int n_slip = 0;
  int n_stick = 0;
  int n_transition = 0;
  StepKind step = StepKind::Converged;
  int halvings = 0;         // j of the accepted step 2^{-j}
  double step_length = 0.0;
  double inner_tol = 0.0;
};

struct SolveReport {
  bool converged = false;
  Vector x;                 // final unknowns (u_N, u_I, p_hat)
  Vector velocity;          // 3 n_p, all mesh nodes, Dirichlet values included
  Vector pressure;          // n_p, p = -p_hat
  std::vector<NodeState> states;  // final state of every slip node
  std::vector<IterationRecord> history;
  double wall_seconds = 0.0;
  double initial_residual = 0.0;
  double final_residual = 0.0;

  /// Number of Newton/DR steps taken.
  int outer_iterations() const;
  int inner_iterations() const;
};

/// H(x) = [A, -B^T; B, E] x - (b; c).
Vector eval_H(const SaddleProblem& problem, const Vector& x);

/// z = prox_{lambda q}(x - lambda H(x)) on the slip blocks and the residual
/// r_lambda(x) = (1 + 1/lambda) |x - prox_{lambda q}(x - lambda H(x))|.
SolverState approximation_step(const SaddleProblem& problem, const Vector& x, double lambda);

/// Multiplier z* = (u - z)/lambda - y at slip node i; lies in the
/// subdifferential of q_i at z.
Eigen::Vector3d slip_multiplier(const SolverState& state, int i, double lambda);

struct NodeCensus {
  int slip = 0, stick = 0, transition = 0;
};
NodeCensus census(const SaddleProblem& problem, const SolverState& state, double lambda,
                  std::vector<NodeState>* states = nullptr);

std::vector<ScdPair> scd_pairs(const SaddleProblem& problem, const SolverState& state);

struct NewtonStep {
  Vector dx;
  int inner_iterations = 0;
  bool converged = false;
};

/// Solves the Newton system
///   [P A_NN + W   P A_IN^T   -P B_N^T] dx = [(W + P/lambda) r_N]
///   [A_IN         A_II       -B_I^T  ]      [-y_I              ]
///   [B_N          B_I         E      ]      [-w                ]
/// through the reduced (du_N, dp_hat) system and GMRES.
NewtonStep newton_direction(const SaddleProblem& problem, const SpdFactor& a_ii,
                            const SolverState& state, std::span<const ScdPair> pairs,
                            double lambda, double inner_tol, const GmresOptions& gmres_options);

struct LineSearchResult {
  bool accepted = false;
  int halvings = 0;
  double alpha = 0.0;
  SolverState trial;  // with cached H, prox and residual
  int trials = 0;
};

/// First j in 0..n_alpha with r(x + 2^{-j} dx) <= (1 - omega 2^{-j}) r(x).
LineSearchResult line_search(const SaddleProblem& problem, const SolverState& state,
                             const Vector& dx, double omega, int n_alpha, double lambda);

/// x+ = (I + lambda H)^{-1}(prox_{lambda q}(x - lambda H(x)) + lambda H(x)).
Vector douglas_rachford_step(const SaddleProblem& problem, const Vector& x, double lambda,
                             const ResolventFactor& resolvent);

SolveReport solve(const SaddleProblem& problem, const SolverConfig& config,
                  const std::optional<Vector>& x0 = std::nullopt);

/// CSV with columns k,res,it_in,n_slip,n_stick,n_trans,step_kind,step_len.
void write_iteration_log(std::ostream& out, const std::vector<IterationRecord>& history);

}  // namespace sssn
