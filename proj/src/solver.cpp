#include "sssn/solver.hpp"

#include <chrono>
#include <cmath>
#include <ostream>
#include <string>

namespace sssn {

void SolverConfig::validate() const {
  auto require = [](bool ok, const char* what) {
    if (!ok) throw std::invalid_argument(std::string("invalid solver configuration: ") + what);
  };
  require(lambda > 0.0 && std::isfinite(lambda), "lambda must be positive");
  require(epsilon > 0.0, "epsilon must be positive");
  require(omega > 0.0 && omega < 1.0, "omega must lie in (0, 1)");
  require(n_alpha >= 1, "n_alpha must be at least 1");
  require(r_tol > 0.0 && r_tol <= 1.0, "r_tol must lie in (0, 1]");
  require(c_fact > 0.0 && c_fact <= 1.0, "c_fact must lie in (0, 1]");
  require(initial_inner_tol > 0.0 && initial_inner_tol < 1.0, "initial inner tolerance in (0, 1)");
  require(inner_tol_floor > 0.0 && inner_tol_floor < 1.0, "inner tolerance floor in (0, 1)");
  require(max_outer >= 1, "max_outer must be at least 1");
  require(gmres_restart >= 1 && gmres_max_iters >= 1, "GMRES limits must be positive");
}

const char* to_string(StepKind kind) {
  switch (kind) {
    case StepKind::NewtonFull: return "newton";
    case StepKind::NewtonDamped: return "newton-damped";
    case StepKind::DouglasRachford: return "dr";
    case StepKind::Converged: return "converged";
    case StepKind::Stopped: return "stopped";
  }
  return "?";
}

const char* to_string(Preconditioner kind) {
  switch (kind) {
    case Preconditioner::None: return "none";
    case Preconditioner::Diagonal: return "diagonal";
    case Preconditioner::PressureMass: return "mass";
  }
  return "?";
}

Preconditioner parse_preconditioner(const std::string& name) {
  for (auto k : {Preconditioner::None, Preconditioner::Diagonal, Preconditioner::PressureMass})
    if (name == to_string(k)) return k;
  throw std::invalid_argument("preconditioner must be 'none', 'diagonal' or 'mass', got '" + name +
                              "'");
}

int SolveReport::outer_iterations() const {
  int n = 0;
  for (const auto& rec : history)
    if (rec.step != StepKind::Converged && rec.step != StepKind::Stopped) ++n;
  return n;
}

int SolveReport::inner_iterations() const {
  int n = 0;
  for (const auto& rec : history) n += rec.inner_iterations;
  return n;
}

Vector eval_H(const SaddleProblem& problem, const Vector& x) {
  const int nv = problem.velocity_size(), np = problem.n_p();
  if (x.size() != nv + np) throw std::invalid_argument("eval_H: state has wrong size");
  const auto u = x.head(nv);
  const auto p = x.tail(np);
  Vector y(nv + np);
  y.head(nv) = problem.A_kappa * u - problem.B.transpose() * p - problem.b;
  y.tail(np) = problem.B * u + problem.E * p - problem.c;
  return y;
}

SolverState approximation_step(const SaddleProblem& problem, const Vector& x, double lambda) {
  SolverState s;
  s.x = x;
  s.y = eval_H(problem, x);
  const int ns = problem.n_s(), ns3 = 3 * ns;
  s.z_n.resize(ns3);
  for (int i = 0; i < ns; ++i) {
    s.z_n.segment<3>(3 * i) =
        prox_node(x.segment<3>(3 * i) - lambda * s.y.segment<3>(3 * i), lambda, problem.frames[i]);
  }
  s.r_n = s.z_n - x.head(ns3);
  const double rest = s.y.tail(s.y.size() - ns3).squaredNorm();
  s.r = (1.0 + 1.0 / lambda) * std::sqrt(lambda * lambda * rest + s.r_n.squaredNorm());
  return s;
}

Eigen::Vector3d slip_multiplier(const SolverState& state, int i, double lambda) {
  return (state.x.segment<3>(3 * i) - state.z_n.segment<3>(3 * i)) / lambda -
         state.y.segment<3>(3 * i);
}

NodeCensus census(const SaddleProblem& problem, const SolverState& state, double lambda,
                  std::vector<NodeState>* states) {
  NodeCensus c;
  if (states) states->resize(problem.n_s());
  for (int i = 0; i < problem.n_s(); ++i) {
    const auto& frame = problem.frames[i];
    const NodeState st = classify(state.z_n.segment<3>(3 * i), slip_multiplier(state, i, lambda),
                                  frame, state_tolerance(frame));
    switch (st) {
      case NodeState::Slip: ++c.slip; break;
      case NodeState::Stick: ++c.stick; break;
      case NodeState::Transition: ++c.transition; break;
    }
    if (states) (*states)[i] = st;
  }
  return c;
}

std::vector<ScdPair> scd_pairs(const SaddleProblem& problem, const SolverState& state) {
  std::vector<ScdPair> pairs(problem.n_s());
  for (int i = 0; i < problem.n_s(); ++i) {
    const auto& frame = problem.frames[i];
    pairs[i] = sc_pair(state.z_n.segment<3>(3 * i), frame, state_tolerance(frame));
  }
  return pairs;
}

NewtonStep newton_direction(const SaddleProblem& problem, const SpdFactor& a_ii,
                            const SolverState& state, std::span<const ScdPair> pairs,
                            double lambda, double inner_tol, const GmresOptions& gmres_options) {
  const int ns = problem.n_s(), ns3 = 3 * ns, np = problem.n_p();
  const int ni3 = problem.velocity_size() - ns3;
  const auto y_i = state.y.segment(ns3, ni3);
  const auto w = state.y.tail(np);

  const Vector t = a_ii.solve(y_i);
  const Vector ain_t = problem.A_IN.transpose() * t;
  Vector rhs(ns3 + np);
  for (int i = 0; i < ns; ++i) {
    const auto& pw = pairs[i];
    rhs.segment<3>(3 * i) = (pw.W + pw.P / lambda) * state.r_n.segment<3>(3 * i) +
                            pw.P * ain_t.segment<3>(3 * i);
  }
  rhs.tail(np) = -w + problem.B_I * t;

  ReducedOperator op(problem, a_ii, pairs);
  GmresOptions opts = gmres_options;
  opts.tol = inner_tol;
  const auto res = gmres([&op](const Vector& in, Vector& out) { op.apply(in, out); }, rhs, opts);

  NewtonStep step;
  step.inner_iterations = res.iterations;
  step.converged = res.converged;
  step.dx.resize(problem.state_size());
  const auto du_n = res.x.head(ns3);
  const auto dp = res.x.tail(np);
  step.dx.head(ns3) = du_n;
  step.dx.segment(ns3, ni3) =
      a_ii.solve(-y_i - problem.A_IN * du_n + problem.B_I.transpose() * dp);
  step.dx.tail(np) = dp;
  return step;
}

LineSearchResult line_search(const SaddleProblem& problem, const SolverState& state,
                             const Vector& dx, double omega, int n_alpha, double lambda) {
  LineSearchResult out;
  double alpha = 1.0;
  for (int j = 0; j <= n_alpha; ++j, alpha *= 0.5) {
    SolverState trial = approximation_step(problem, state.x + alpha * dx, lambda);
    ++out.trials;
    if (trial.r <= (1.0 - omega * alpha) * state.r) {
      out.accepted = true;
      out.halvings = j;
      out.alpha = alpha;
      out.trial = std::move(trial);
      return out;
    }
  }
  return out;
}

Vector douglas_rachford_step(const SaddleProblem& problem, const Vector& x, double lambda,
                             const ResolventFactor& resolvent) {
  const Vector y = eval_H(problem, x);
  Vector v = prox_all(x - lambda * y, lambda, problem.frames, problem.sets) + lambda * y;
  // (I + lambda H) x+ = v  <=>  (I + lambda M) x+ = v + lambda (b; c)
  v.head(problem.velocity_size()) += lambda * problem.b;
  v.tail(problem.n_p()) += lambda * problem.c;
  return resolvent.solve(v);
}

namespace {

// diag(E + B_I diag(A_II)^{-1} B_I^T)
Vector pressure_schur_diagonal(const SaddleProblem& problem) {
  Vector d = problem.E.diagonal();
  const Vector a = problem.A_II.diagonal();
  for (int r = 0; r < problem.B_I.outerSize(); ++r)
    for (SparseMatrix::InnerIterator it(problem.B_I, r); it; ++it)
      d[r] += it.value() * it.value() / a[it.col()];
  return d;
}

Vector jacobi_scaling(const SaddleProblem& problem, std::span<const ScdPair> pairs,
                      const Vector& schur_diagonal) {
  const int ns3 = problem.slip_size();
  Vector d(ns3 + problem.n_p());
  for (int i = 0; i < problem.n_s(); ++i)
    for (int c = 0; c < 3; ++c) {
      const int k = 3 * i + c;
      const double v = pairs[i].P(c, c) * problem.A_NN.coeff(k, k) + pairs[i].W(c, c);
      d[k] = v > 0.0 ? 1.0 / v : 1.0;
    }
  for (int i = 0; i < problem.n_p(); ++i)
    d[ns3 + i] = schur_diagonal[i] > 0.0 ? 1.0 / schur_diagonal[i] : 1.0;
  return d;
}

}  // namespace

SolveReport solve(const SaddleProblem& problem, const SolverConfig& config,
                  const std::optional<Vector>& x0) {
  config.validate();
  const auto start = std::chrono::steady_clock::now();
  const double lambda = config.lambda;
  const int n = problem.state_size();
  if (x0 && x0->size() != n) throw std::invalid_argument("solve: starting point has wrong size");

  SolveReport report;
  SolverState state = approximation_step(problem, x0 ? *x0 : Vector::Zero(n), lambda);
  const double r0 = state.r;
  report.initial_residual = r0;

  const SpdFactor a_ii(problem.A_II);
  std::optional<ResolventFactor> resolvent;

  GmresOptions gmres_options;
  gmres_options.restart = config.gmres_restart;
  gmres_options.max_iters = config.gmres_max_iters;

  Vector schur_diagonal;
  const bool scaled = config.preconditioner != Preconditioner::None;
  if (scaled) schur_diagonal = pressure_schur_diagonal(problem);
  // Pressure rows: S^{-1} ~ s M_p^{-1}, s matching the trace of diag(S).
  std::optional<SpdFactor> mass;
  double mass_scale = 1.0;
  if (config.preconditioner == Preconditioner::PressureMass &&
      problem.pressure_mass.rows() == problem.n_p() && problem.n_p() > 0) {
    mass.emplace(problem.pressure_mass);
    mass_scale = problem.pressure_mass.diagonal().sum() / schur_diagonal.sum();
  }

  double inner_tol = config.initial_inner_tol;
  double prev_r = r0;
  for (int k = 0;; ++k) {
    if (!std::isfinite(state.r) || !state.x.allFinite())
      throw SolverError("non-finite iterate at iteration " + std::to_string(k));
    IterationRecord rec;
    rec.k = k;
    rec.residual = state.r;
    const auto counts = census(problem, state, lambda);
    rec.n_slip = counts.slip;
    rec.n_stick = counts.stick;
    rec.n_transition = counts.transition;

    if (state.r <= config.epsilon * r0) {
      rec.step = StepKind::Converged;
      report.history.push_back(rec);
      report.converged = true;
      break;
    }
    if (k >= config.max_outer) {
      rec.step = StepKind::Stopped;
      report.history.push_back(rec);
      break;
    }

    if (k > 0) {
      inner_tol = std::max(config.inner_tol_floor,
                           std::min(config.r_tol * prev_r / r0, config.c_fact * inner_tol));
    }
    rec.inner_tol = inner_tol;
    prev_r = state.r;

    const auto pairs = scd_pairs(problem, state);
    if (scaled) gmres_options.inverse_diagonal = jacobi_scaling(problem, pairs, schur_diagonal);
    if (mass) {
      const int ns3 = problem.slip_size();
      gmres_options.preconditioner = [&, ns3](const Vector& in, Vector& out) {
        out.resize(in.size());
        out.head(ns3) = gmres_options.inverse_diagonal.head(ns3).cwiseProduct(in.head(ns3));
        out.tail(problem.n_p()) = mass_scale * mass->solve(in.tail(problem.n_p()));
      };
    }
    const NewtonStep step =
        newton_direction(problem, a_ii, state, pairs, lambda, inner_tol, gmres_options);
    rec.inner_iterations = step.inner_iterations;

    bool accepted = false;
    if (step.converged && step.dx.allFinite()) {
      auto ls = line_search(problem, state, step.dx, config.omega, config.n_alpha, lambda);
      if (ls.accepted) {
        accepted = true;
        rec.step = ls.halvings == 0 ? StepKind::NewtonFull : StepKind::NewtonDamped;
        rec.halvings = ls.halvings;
        rec.step_length = ls.alpha;
        state = std::move(ls.trial);
      }
    }
    if (!accepted) {
      if (!resolvent) resolvent.emplace(problem, lambda);
      state = approximation_step(problem, douglas_rachford_step(problem, state.x, lambda, *resolvent),
                                 lambda);
      rec.step = StepKind::DouglasRachford;
      rec.step_length = 1.0;
    }
    report.history.push_back(rec);
  }

  report.final_residual = state.r;
  report.x = state.x;
  report.velocity = full_velocity(problem, state.x.head(problem.velocity_size()));
  report.pressure = -state.x.tail(problem.n_p());
  census(problem, state, lambda, &report.states);
  report.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return report;
}

void write_iteration_log(std::ostream& out, const std::vector<IterationRecord>& history) {
  const auto precision = out.precision(6);
  out << "k,res,it_in,n_slip,n_stick,n_trans,step_kind,step_len\n";
  out << std::scientific;
  for (const auto& rec : history) {
    out << rec.k << ',' << rec.residual << ',' << rec.inner_iterations << ',' << rec.n_slip << ','
        << rec.n_stick << ',' << rec.n_transition << ',' << to_string(rec.step) << ','
        << rec.step_length << '\n';
  }
  out << std::defaultfloat;
  out.precision(precision);
}

}  // namespace sssn
