#pragma once

#include <functional>
#include <memory>
#include <span>
#include <stdexcept>
#include <vector>

#include <Eigen/Sparse>

#include "sssn/assembly.hpp"
#include "sssn/stickslip.hpp"

namespace sssn {

class FactorizationError : public std::runtime_error {
 public:
  FactorizationError(const std::string& what, Eigen::Index pivot)
      : std::runtime_error(what), pivot_(pivot) {}
  /// Row of the original matrix where positivity failed, -1 if unknown.
  Eigen::Index pivot() const { return pivot_; }

 private:
  Eigen::Index pivot_;
};

/// Sparse Cholesky factor with a fill-reducing (AMD) ordering.
class SpdFactor {
 public:
  explicit SpdFactor(const SparseMatrix& a);
  ~SpdFactor();
  SpdFactor(SpdFactor&&) noexcept;
  SpdFactor& operator=(SpdFactor&&) noexcept;

  Eigen::Index size() const { return n_; }
  Vector solve(const Vector& y) const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
  Eigen::Index n_ = 0;
};

using LinearOperator = std::function<void(const Vector& in, Vector& out)>;

struct GmresOptions {
  double tol = 1e-6;  // relative residual
  int max_iters = 1000;
  int restart = 200;
  // Right preconditioner M^{-1} = diag(inverse_diagonal) when non-empty.
  Vector inverse_diagonal;
  // General right preconditioner out = M^{-1} in; takes precedence over the diagonal.
  std::function<void(const Vector& in, Vector& out)> preconditioner;
};

struct GmresResult {
  Vector x;
  int iterations = 0;
  bool converged = false;
  double relative_residual = 0.0;
  // Estimated relative residual after every inner iteration.
  std::vector<double> history;
};

/// Restarted GMRES with modified Gram-Schmidt and Givens rotations,
/// starting from x = 0. On max_iters the best iterate is returned with
/// converged = false.
GmresResult gmres(const LinearOperator& op, const Vector& rhs, const GmresOptions& options);

/// Newton matrix with the remaining velocities eliminated through the
/// A_II factor. Acts on (du_N, dp_hat) of size 3 n_s + n_p:
///   [P(A_NN - A_IN^T A_II^-1 A_IN) + W    -P(B_N^T - A_IN^T A_II^-1 B_I^T)]
///   [B_N - B_I A_II^-1 A_IN               E + B_I A_II^-1 B_I^T          ]
class ReducedOperator {
 public:
  ReducedOperator(const SaddleProblem& problem, const SpdFactor& a_ii,
                  std::span<const ScdPair> pairs);

  Eigen::Index size() const { return problem_.slip_size() + problem_.n_p(); }
  void apply(const Vector& v, Vector& out) const;

  const SaddleProblem& problem() const { return problem_; }
  const SpdFactor& factor() const { return a_ii_; }
  std::span<const ScdPair> pairs() const { return pairs_; }

 private:
  const SaddleProblem& problem_;
  const SpdFactor& a_ii_;
  std::span<const ScdPair> pairs_;
};

Vector reduced_apply(const ReducedOperator& op, const Vector& v);

/// The saddle matrix M = [A_kappa, -B^T; B, E] of the sign-flipped problem.
SparseMatrix saddle_matrix(const SaddleProblem& problem);

/// LU factor of I + lambda M for the resolvent of lambda H.
class ResolventFactor {
 public:
  ResolventFactor(const SaddleProblem& problem, double lambda);
  ~ResolventFactor();
  ResolventFactor(ResolventFactor&&) noexcept;
  ResolventFactor& operator=(ResolventFactor&&) noexcept;

  double lambda() const { return lambda_; }
  /// Solves (I + lambda M) x = y.
  Vector solve(const Vector& y) const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
  double lambda_;
};

}  // namespace sssn
