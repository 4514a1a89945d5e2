#include "sssn/linsolve.hpp"

#include <cmath>

#include <Eigen/OrderingMethods>
#include <Eigen/SparseCholesky>
#include <Eigen/SparseLU>

namespace sssn {

using ColMatrix = Eigen::SparseMatrix<double, Eigen::ColMajor>;

struct SpdFactor::Impl {
  Eigen::SimplicialLLT<ColMatrix, Eigen::Lower, Eigen::AMDOrdering<int>> llt;
};

SpdFactor::SpdFactor(const SparseMatrix& a) : impl_(std::make_unique<Impl>()), n_(a.rows()) {
  if (a.rows() != a.cols()) throw FactorizationError("Cholesky factor of a non-square matrix", -1);
  if (n_ == 0) return;
  const ColMatrix col = a;
  impl_->llt.compute(col);
  if (impl_->llt.info() == Eigen::Success) return;

  // Locate the failing pivot: an LDL^T with the same ordering does not stop
  // at nonpositive pivots.
  Eigen::SimplicialLDLT<ColMatrix, Eigen::Lower, Eigen::AMDOrdering<int>> ldlt(col);
  Eigen::Index pivot = -1;
  if (ldlt.info() == Eigen::Success) {
    const Vector d = ldlt.vectorD();
    const auto perm = ldlt.permutationP().indices();
    for (Eigen::Index k = 0; k < d.size(); ++k) {
      if (!(d[k] > 0.0)) {
        for (Eigen::Index i = 0; i < perm.size(); ++i)
          if (perm[i] == k) pivot = i;
        break;
      }
    }
  }
  throw FactorizationError("matrix is not positive definite (pivot " + std::to_string(pivot) + ")",
                           pivot);
}

SpdFactor::~SpdFactor() = default;
SpdFactor::SpdFactor(SpdFactor&&) noexcept = default;
SpdFactor& SpdFactor::operator=(SpdFactor&&) noexcept = default;

Vector SpdFactor::solve(const Vector& y) const {
  if (y.size() != n_) throw std::invalid_argument("Cholesky solve: dimension mismatch");
  if (n_ == 0) return Vector();
  return impl_->llt.solve(y);
}

GmresResult gmres(const LinearOperator& op, const Vector& rhs, const GmresOptions& options) {
  const Eigen::Index n = rhs.size();
  GmresResult res;
  res.x = Vector::Zero(n);
  const double rhs_norm = rhs.norm();
  if (rhs_norm == 0.0) {
    res.converged = true;
    return res;
  }
  const bool general = static_cast<bool>(options.preconditioner);
  const bool precond = general || options.inverse_diagonal.size() > 0;
  if (!general && precond && options.inverse_diagonal.size() != n)
    throw std::invalid_argument("gmres: preconditioner size mismatch");
  auto apply_precond = [&](const Vector& in, Vector& out) {
    if (general) options.preconditioner(in, out);
    else out = options.inverse_diagonal.cwiseProduct(in);
  };
  const int m = std::max(1, static_cast<int>(std::min<Eigen::Index>(options.restart, n)));
  const double target = options.tol * rhs_norm;

  Eigen::MatrixXd basis(n, m + 1);
  Eigen::MatrixXd hess = Eigen::MatrixXd::Zero(m + 1, m);
  Vector cs(m), sn(m), g(m + 1), w(n), tmp(n);

  Vector r = rhs;  // x = 0
  double beta = r.norm();
  bool broke_down = false;
  while (true) {
    basis.col(0) = r / beta;
    g.setZero();
    g[0] = beta;
    hess.setZero();
    int j = 0;
    for (; j < m && res.iterations < options.max_iters; ++j) {
      if (precond) {
        apply_precond(basis.col(j), tmp);
        op(tmp, w);
      } else {
        op(basis.col(j), w);
      }
      for (int i = 0; i <= j; ++i) {
        hess(i, j) = basis.col(i).dot(w);
        w -= hess(i, j) * basis.col(i);
      }
      hess(j + 1, j) = w.norm();
      const bool breakdown = hess(j + 1, j) <= 1e-14 * std::abs(hess(j, j)) ||
                             hess(j + 1, j) == 0.0;
      if (!breakdown) basis.col(j + 1) = w / hess(j + 1, j);
      for (int i = 0; i < j; ++i) {
        const double t = cs[i] * hess(i, j) + sn[i] * hess(i + 1, j);
        hess(i + 1, j) = -sn[i] * hess(i, j) + cs[i] * hess(i + 1, j);
        hess(i, j) = t;
      }
      const double denom = std::hypot(hess(j, j), hess(j + 1, j));
      cs[j] = hess(j, j) / denom;
      sn[j] = hess(j + 1, j) / denom;
      hess(j, j) = denom;
      hess(j + 1, j) = 0.0;
      g[j + 1] = -sn[j] * g[j];
      g[j] = cs[j] * g[j];
      ++res.iterations;
      res.history.push_back(std::abs(g[j + 1]) / rhs_norm);
      if (std::abs(g[j + 1]) <= target || breakdown) {
        broke_down = breakdown;
        ++j;
        break;
      }
    }
    // x += M^{-1} V y with H y = g on the leading j x j block.
    const Vector y = hess.topLeftCorner(j, j).triangularView<Eigen::Upper>().solve(g.head(j));
    Vector dx = basis.leftCols(j) * y;
    if (precond) {
      apply_precond(dx, tmp);
      dx = tmp;
    }
    res.x += dx;

    op(res.x, w);
    r = rhs - w;
    beta = r.norm();
    res.relative_residual = beta / rhs_norm;
    if (beta <= target) {
      res.converged = true;
      return res;
    }
    // Out of iterations, or a breakdown whose true residual is still above
    // target (stagnation).
    if (res.iterations >= options.max_iters || broke_down) return res;
  }
}

ReducedOperator::ReducedOperator(const SaddleProblem& problem, const SpdFactor& a_ii,
                                 std::span<const ScdPair> pairs)
    : problem_(problem), a_ii_(a_ii), pairs_(pairs) {
  if (pairs.size() != static_cast<std::size_t>(problem.n_s()))
    throw std::invalid_argument("reduced operator: one (P, W) pair per slip node expected");
  if (a_ii.size() != problem.A_II.rows())
    throw std::invalid_argument("reduced operator: factor does not match A_II");
}

void ReducedOperator::apply(const Vector& v, Vector& out) const {
  const int ns3 = problem_.slip_size(), np = problem_.n_p();
  if (v.size() != ns3 + np) throw std::invalid_argument("reduced operator: dimension mismatch");
  const auto vu = v.head(ns3);
  const auto vp = v.tail(np);
  // t = A_II^{-1} (A_IN vu - B_I^T vp)
  const Vector t = a_ii_.solve(problem_.A_IN * vu - problem_.B_I.transpose() * vp);
  const Vector top = problem_.A_NN * vu - problem_.B_N.transpose() * vp -
                     problem_.A_IN.transpose() * t;
  out.resize(ns3 + np);
  for (int i = 0; i < problem_.n_s(); ++i) {
    out.segment<3>(3 * i) =
        pairs_[i].P * top.segment<3>(3 * i) + pairs_[i].W * vu.segment<3>(3 * i);
  }
  out.tail(np) = problem_.B_N * vu + problem_.E * vp - problem_.B_I * t;
}

Vector reduced_apply(const ReducedOperator& op, const Vector& v) {
  Vector out;
  op.apply(v, out);
  return out;
}

SparseMatrix saddle_matrix(const SaddleProblem& problem) {
  const int nv = problem.velocity_size(), np = problem.n_p();
  std::vector<Eigen::Triplet<double>> t;
  t.reserve(problem.A_kappa.nonZeros() + 2 * problem.B.nonZeros() + problem.E.nonZeros());
  for (int r = 0; r < nv; ++r)
    for (SparseMatrix::InnerIterator it(problem.A_kappa, r); it; ++it)
      t.emplace_back(r, it.col(), it.value());
  for (int r = 0; r < np; ++r) {
    for (SparseMatrix::InnerIterator it(problem.B, r); it; ++it) {
      t.emplace_back(nv + r, it.col(), it.value());
      t.emplace_back(it.col(), nv + r, -it.value());
    }
    for (SparseMatrix::InnerIterator it(problem.E, r); it; ++it)
      t.emplace_back(nv + r, nv + it.col(), it.value());
  }
  SparseMatrix m(nv + np, nv + np);
  m.setFromTriplets(t.begin(), t.end());
  return m;
}

struct ResolventFactor::Impl {
  Eigen::SparseLU<ColMatrix, Eigen::COLAMDOrdering<int>> lu;
};

ResolventFactor::ResolventFactor(const SaddleProblem& problem, double lambda)
    : impl_(std::make_unique<Impl>()), lambda_(lambda) {
  if (!(lambda > 0.0)) throw std::invalid_argument("resolvent needs lambda > 0");
  ColMatrix m = saddle_matrix(problem);
  m *= lambda;
  ColMatrix id(m.rows(), m.cols());
  id.setIdentity();
  m += id;
  m.makeCompressed();
  impl_->lu.compute(m);
  if (impl_->lu.info() != Eigen::Success)
    throw FactorizationError("resolvent factorization failed: " + impl_->lu.lastErrorMessage(), -1);
}

ResolventFactor::~ResolventFactor() = default;
ResolventFactor::ResolventFactor(ResolventFactor&&) noexcept = default;
ResolventFactor& ResolventFactor::operator=(ResolventFactor&&) noexcept = default;

Vector ResolventFactor::solve(const Vector& y) const {
  Vector x = impl_->lu.solve(y);
  return x;
}

}  // namespace sssn
