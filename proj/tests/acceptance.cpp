// Acceptance run: one PASS/FAIL line per criterion, details indented below.
// Exit status is nonzero when any criterion fails.

#include <chrono>
#include <cstdio>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "mini_oracle.hpp"
#include "support.hpp"

using namespace sssn;

namespace {

// Pinned tolerances and limits.
constexpr double kCensusSeconds = 5.0;
constexpr double kCaseSeconds = 5.0;
constexpr int kOuterBand = 2;
constexpr double kInnerFactor = 2.0;
constexpr int kOuterSpread = 3;
constexpr double kStickEquivalence = 1e-8;
constexpr double kTailRatio = 0.1;
constexpr double kMinOrder = 1.5;
constexpr double kConvergenceSeconds = 120.0;
constexpr double kProxTol = 1e-6;
constexpr double kOptimalityTol = 1e-9;
constexpr double kScdTol = 1e-10;
constexpr double kCondensationTol = 1e-10;
constexpr double kResidualTol = 1e-10;
constexpr double kMonotoneTol = 1e-10;
constexpr double kHugeG = 1e6;

struct Outcome {
  bool pass = true;
  std::vector<std::string> notes;
  void note(const char* fmt, auto... args) {
    char buf[512];
    std::snprintf(buf, sizeof buf, fmt, args...);
    notes.emplace_back(buf);
  }
  void require(bool ok, const char* fmt, auto... args) {
    if (!ok) pass = false;
    char buf[512];
    std::snprintf(buf, sizeof buf, fmt, args...);
    notes.emplace_back(std::string(ok ? "ok   " : "FAIL ") + buf);
  }
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

struct CubeRun {
  int n = 0;
  double g = 0.0;
  SaddleProblem problem;
  SolveReport report;
  double seconds = 0.0;  // assembly and solve
};

// Problems assembled anywhere in this run, for the monotonicity check.
std::vector<std::pair<std::string, SaddleProblem>> g_assembled;

void remember(const std::string& name, const SaddleProblem& p) { g_assembled.emplace_back(name, p); }

CubeRun run_cube(int n, double g) {
  CubeRun run;
  run.n = n;
  run.g = g;
  const auto t0 = std::chrono::steady_clock::now();
  run.problem = testing::cube_problem(n, g);
  run.report = solve(run.problem, SolverConfig{});
  run.seconds = seconds_since(t0);
  return run;
}

const std::vector<double> kG = {0.0, 5.0, 10.0};
// Reference iteration counts, rows n = 8, 10, 12.
const std::map<double, std::vector<int>> kOuterRef = {{0.0, {4, 5, 5}}, {5.0, {6, 7, 6}}, {10.0, {4, 4, 4}}};
const std::map<double, std::vector<int>> kInnerRef = {
    {0.0, {70, 101, 104}}, {5.0, {83, 124, 120}}, {10.0, {72, 81, 75}}};

std::map<std::pair<int, double>, CubeRun>& cube_runs() {
  static std::map<std::pair<int, double>, CubeRun> runs;
  if (runs.empty()) {
    for (int n : {8, 10, 12, 14})
      for (double g : kG) runs.emplace(std::make_pair(n, g), run_cube(n, g));
    for (const auto& [key, run] : runs)
      if (key.first <= 10) remember("cube n=" + std::to_string(key.first) + " g=" + std::to_string(key.second), run.problem);
  }
  return runs;
}

Outcome mesh_census() {
  Outcome o;
  struct Row {
    int n, np, nt, ns;
  };
  const std::vector<Row> table = {{8, 729, 2560, 63},       {10, 1331, 5000, 99},     {12, 2197, 8640, 143},
                                  {14, 3375, 13720, 195},   {18, 6859, 29160, 323},   {20, 9261, 40000, 399},
                                  {22, 12167, 53240, 483},  {24, 15625, 69120, 575},  {26, 19683, 87880, 675}};
  const auto t0 = std::chrono::steady_clock::now();
  for (const auto& r : table) {
    const TetMesh m = testing::cube(r.n);
    const NodeSets s = classify_nodes(m);
    o.require(m.num_nodes() == r.np && m.num_tets() == r.nt && s.n_s() == r.ns,
              "n=%d: %d/%d/%d (expected %d/%d/%d)", r.n, m.num_nodes(), m.num_tets(), s.n_s(), r.np,
              r.nt, r.ns);
  }
  const double t = seconds_since(t0);
  o.require(t < kCensusSeconds, "total %.2f s (limit %.0f s)", t, kCensusSeconds);
  return o;
}

Outcome iteration_bands() {
  Outcome o;
  auto& runs = cube_runs();
  const int ns[] = {8, 10, 12};
  for (double g : kG)
    for (int row = 0; row < 3; ++row) {
      const CubeRun& r = runs.at({ns[row], g});
      const int outer = r.report.outer_iterations(), inner = r.report.inner_iterations();
      const int oref = kOuterRef.at(g)[row], iref = kInnerRef.at(g)[row];
      const bool ok = r.report.converged && std::abs(outer - oref) <= kOuterBand &&
                      inner >= iref / kInnerFactor && inner <= iref * kInnerFactor &&
                      r.seconds < kCaseSeconds;
      o.require(ok, "n=%d g=%g: It %d (ref %d +-%d), It_in %d (ref %d, band %.1f..%.0f), %.2f s", ns[row], g,
                outer, oref, kOuterBand, inner, iref, iref / kInnerFactor, iref * kInnerFactor, r.seconds);
    }
  return o;
}

Outcome mesh_independence() {
  Outcome o;
  auto& runs = cube_runs();
  for (double g : kG) {
    int lo = 1 << 30, hi = -1;
    std::string counts;
    bool all_conv = true;
    for (int n : {8, 10, 12, 14}) {
      const auto& r = runs.at({n, g});
      all_conv &= r.report.converged;
      const int it = r.report.outer_iterations();
      lo = std::min(lo, it);
      hi = std::max(hi, it);
      counts += std::to_string(it) + " ";
    }
    o.require(all_conv && hi - lo <= kOuterSpread, "g=%g: outer iterations over n=8..14: %sspread %d (limit %d)", g,
              counts.c_str(), hi - lo, kOuterSpread);
  }
  return o;
}

Outcome state_census() {
  Outcome o;
  auto& runs = cube_runs();
  for (int n : {8, 10, 12, 14})
    for (double g : kG) {
      const auto& r = runs.at({n, g});
      int c[3] = {0, 0, 0};
      for (NodeState s : r.report.states) ++c[static_cast<int>(s)];
      const int ns = r.problem.n_s();
      bool ok = r.report.converged;
      const char* want = "";
      if (g == 0.0) {
        ok &= c[0] == ns;
        want = "all slip";
      } else if (g == 10.0) {
        ok &= c[1] == ns;
        want = "all stick";
      } else {
        ok &= c[0] > 0 && c[1] > 0;
        want = "mixture";
      }
      o.require(ok, "n=%d g=%g: slip/stick/transition %d/%d/%d of %d (want %s)", n, g, c[0], c[1], c[2], ns, want);
    }
  return o;
}

Outcome stick_equivalence() {
  Outcome o;
  const int n = 8;
  const CubeRun& r = cube_runs().at({n, 10.0});
  ProblemSpec spec;
  spec.cube_n = n;
  const TetMesh ns_mesh = testing::no_slip_variant(testing::cube(n));
  const SaddleProblem q = assemble_problem(ns_mesh, stokes_data(spec));
  remember("no-slip cube n=8", q);
  SolverConfig c;
  c.epsilon = 1e-12;
  const SolveReport ref = solve(q, c);
  const double err = testing::relative_velocity_l2(ns_mesh, r.report.velocity, ref.velocity);
  // stick multiplier the no-slip solution needs in the g = 10 problem
  const SaddleProblem& full = r.problem;
  Vector x(full.state_size());
  for (int k = 0; k < full.n_u(); ++k) x.segment<3>(3 * k) = ref.velocity.segment<3>(3 * full.sets.node_of_unknown(k));
  x.tail(full.n_p()) = -ref.pressure;
  const Vector y = eval_H(full, x);
  double worst = 0.0;
  for (int i = 0; i < full.n_s(); ++i)
    worst = std::max(worst, (full.frames[i].tangent * y.segment<3>(3 * i)).norm() / full.frames[i].slip_weight);
  o.note("no-slip solution: max |T y_i| / g_i = %.3f (sticking everywhere needs <= 1)", worst);
  o.require(r.report.converged && ref.converged && err <= kStickEquivalence,
            "n=%d g=10 vs no-slip Dirichlet solve: relative velocity L2 difference %.3e (limit %.0e)", n, err,
            kStickEquivalence);
  return o;
}

Outcome superlinear_tail() {
  Outcome o;
  for (const auto& [key, r] : cube_runs()) {
    if (!r.report.converged) continue;
    // residual ratios over accepted Newton steps
    std::vector<double> ratios;
    const auto& h = r.report.history;
    for (std::size_t k = 0; k + 1 < h.size(); ++k)
      if (h[k].step == StepKind::NewtonFull || h[k].step == StepKind::NewtonDamped)
        ratios.push_back(h[k + 1].residual / h[k].residual);
    std::string text;
    for (double q : ratios) {
      char b[32];
      std::snprintf(b, sizeof b, "%.2e ", q);
      text += b;
    }
    bool ok = !ratios.empty() && ratios.back() <= kTailRatio;
    // decrease over the last three accepted steps when the run has three
    if (ratios.size() >= 3) {
      const std::size_t m = ratios.size();
      ok &= ratios[m - 1] < ratios[m - 2] && ratios[m - 2] < ratios[m - 3];
    }
    o.require(ok, "n=%d g=%g: ratios %s", key.first, key.second, text.c_str());
  }
  return o;
}

Outcome discretization_convergence() {
  Outcome o;
  const auto t0 = std::chrono::steady_clock::now();
  std::vector<double> err, h;
  for (int n : {4, 8, 16}) {
    ProblemSpec spec;
    spec.cube_n = n;
    spec.g = kHugeG;
    const CaseResult res = run_case(spec);
    if (n == 4) remember("cube n=4 g=1e6", res.problem);
    if (!res.report.converged || !res.errors) {
      o.require(false, "n=%d did not converge", n);
      return o;
    }
    err.push_back(res.errors->velocity_l2);
    h.push_back(res.errors->h);
    o.note("n=%d h=%.4f |u-u_h|=%.4e |p-p_h|=%.4e", n, res.errors->h, res.errors->velocity_l2,
           res.errors->pressure_l2);
  }
  const double order = std::log(err[1] / err[2]) / std::log(h[1] / h[2]);
  o.require(err[0] > err[1] && err[1] > err[2], "velocity error decreases monotonically over n = %d, %d, %d", 4, 8, 16);
  o.require(order >= kMinOrder, "observed order %.3f between n=8 and n=16 (min %.1f)", order, kMinOrder);
  const double t = seconds_since(t0);
  o.require(t < kConvergenceSeconds, "runtime %.1f s (limit %.0f s)", t, kConvergenceSeconds);
  return o;
}

Outcome prox_oracle() {
  Outcome o;
  std::mt19937 rng(20240);
  std::uniform_real_distribution<double> lam_d(0.05, 5.0), g_d(0.0, 4.0), s_d(0.05, 5.0);
  double worst = 0.0;
  int bad_opt = 0;
  const int samples = 1000;
  for (int k = 0; k < samples; ++k) {
    const SlipFrame f = testing::random_frame(rng, g_d(rng));
    const double lambda = lam_d(rng);
    const Vector u = testing::random_vector(rng, 3, s_d(rng));
    const Eigen::Vector3d z = prox_node(u, lambda, f);
    const Eigen::Vector3d ref = testing::brute_force_prox(u, lambda, f);
    worst = std::max(worst, (z - ref).norm() / std::max(1.0, u.norm()));
    if (!subdifferential_contains(z, (Eigen::Vector3d(u) - z) / lambda, f, kOptimalityTol)) ++bad_opt;
  }
  o.require(worst <= kProxTol, "%d samples: max |prox - oracle| %.2e (limit %.0e)", samples, worst, kProxTol);
  o.require(bad_opt == 0, "optimality (u - z)/lambda in subdifferential at %.0e: %d violations", kOptimalityTol,
            bad_opt);
  return o;
}

Outcome scd_algebra() {
  Outcome o;
  std::mt19937 rng(77);
  std::uniform_real_distribution<double> g_d(0.0, 6.0);
  const Eigen::Matrix3d I = Eigen::Matrix3d::Identity();
  double worst = 0.0;
  int rank_fail = 0, slip = 0, stick = 0;
  for (int k = 0; k < 1200; ++k) {
    const SlipFrame f = testing::random_frame(rng, g_d(rng));
    Eigen::Vector3d z = testing::random_vector(rng, 3);
    if (k % 3 == 0) z.setZero();
    z -= f.normal.transpose() * f.normal.dot(z);
    const ScdPair pr = sc_pair(z, f);
    ++(pr.P.isZero() ? stick : slip);
    const auto& P = pr.P;
    const auto& W = pr.W;
    const double min_eig =
        Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d>(0.5 * (W + W.transpose())).eigenvalues().minCoeff();
    for (double e : {(P * P - P).norm(), (W * (I - P) - (I - P)).norm(), (P * W - W * P).norm(),
                     (P * W - P * W * P).norm(), std::max(0.0, -min_eig)})
      worst = std::max(worst, e);
    Eigen::Matrix<double, 6, 3> st;
    st << P, W;
    if (Eigen::FullPivLU<Eigen::Matrix<double, 6, 3>>(st).rank() != 3) ++rank_fail;
  }
  o.require(worst <= kScdTol, "%d slip and %d stick pairs: max identity defect %.2e (limit %.0e)", slip, stick,
            worst, kScdTol);
  o.require(rank_fail == 0, "rank [P; W] = 3: %d failures", rank_fail);
  return o;
}

Outcome condensation() {
  Outcome o;
  for (bool perturb : {false, true}) {
    const TetMesh m = testing::small_neumann_mesh(perturb);
    const StokesData data = testing::rich_data();
    const SaddleProblem p = assemble_problem(m, data);
    remember(perturb ? "5-element perturbed" : "5-element", p);
    Vector rhs(p.state_size());
    rhs << p.b, p.c;
    const Vector x = testing::dense(saddle_matrix(p)).fullPivLu().solve(rhs);
    const Vector vel = full_velocity(p, x.head(p.velocity_size()));
    const Vector pres = -x.tail(p.n_p());
    const auto ref = testing::dense_mini_solve(m, data);
    const double ev = (vel - ref.velocity).norm() / ref.velocity.norm();
    const double ep = (pres - ref.pressure).norm() / ref.pressure.norm();
    o.require(ev <= kCondensationTol && ep <= kCondensationTol,
              "%d elements%s: relative velocity %.2e, pressure %.2e (limit %.0e)", m.num_tets(),
              perturb ? " (perturbed)" : "", ev, ep, kCondensationTol);
  }
  return o;
}

SaddleProblem single_node(double a, const Eigen::Vector3d& load, double g) {
  SaddleProblem p;
  p.sets.slip = {0};
  p.sets.unknown_index = {0};
  SlipFrame f = frame_from_normal(Eigen::Vector3d(0.0, 0.6, 0.8));
  f.slip_weight = g;
  p.frames = {f};
  p.A_kappa = (a * Eigen::MatrixXd::Identity(3, 3)).sparseView();
  p.B = SparseMatrix(1, 3);
  p.E = Eigen::MatrixXd::Ones(1, 1).sparseView();
  p.b = load;
  p.c = Vector::Ones(1);
  p.dirichlet_velocity = Vector::Zero(3);
  p.build_blocks();
  return p;
}

Outcome residual_characterization() {
  Outcome o;
  const double lambda = SolverConfig{}.lambda;
  std::mt19937 rng(5150);
  // closed-form solutions of single-node problems in all three states
  const double a = 2.0, g = 1.0;
  for (const Eigen::Vector3d& tangential_load :
       {Eigen::Vector3d(3.0, 0.5, 0.0), Eigen::Vector3d(0.3, 0.4, 0.0), Eigen::Vector3d(1.0, 0.0, 0.0)}) {
    SaddleProblem p = single_node(a, Eigen::Vector3d::Zero(), g);
    const auto& f = p.frames[0];
    const Eigen::Vector2d t = tangential_load.head<2>();
    const Eigen::Vector3d load = f.tangent.transpose() * t + 1.7 * f.normal.transpose();
    p.b = load;
    const double nt = t.norm();
    Vector x(4);
    x.head(3) = nt <= g ? Eigen::Vector3d::Zero().eval()
                        : Eigen::Vector3d(f.tangent.transpose() * ((nt - g) / a * t / nt));
    x[3] = 1.0;
    remember("single node", p);
    const double r = approximation_step(p, x, lambda).r;
    o.require(r <= kResidualTol && testing::satisfies_ge(p, x, kResidualTol),
              "single node |Tb|=%.2f: exact solution r=%.1e, GE holds", nt, r);
    const Vector xp = x + testing::random_vector(rng, 4, 1e-4);
    const double rp = approximation_step(p, xp, lambda).r;
    o.require(rp > kResidualTol && !testing::satisfies_ge(p, xp, kResidualTol),
              "single node |Tb|=%.2f: perturbed point r=%.1e, GE fails", nt, rp);
  }
  // solved cube instances
  for (int n : {2, 3})
    for (double gv : kG) {
      const SaddleProblem p = testing::cube_problem(n, gv);
      remember("cube n=" + std::to_string(n), p);
      SolverConfig c;
      c.epsilon = 1e-13;
      const SolveReport rep = solve(p, c);
      const double r = rep.final_residual;
      const bool ge = testing::satisfies_ge(p, rep.x, kResidualTol);
      o.require(rep.converged && r <= kResidualTol && ge, "cube n=%d g=%g: solved r=%.1e, GE %s", n, gv, r,
                ge ? "holds" : "fails");
      const Vector xp = rep.x + testing::random_vector(rng, p.state_size(), 1e-4);
      const double rp = approximation_step(p, xp, lambda).r;
      o.require(rp > kResidualTol && !testing::satisfies_ge(p, xp, kResidualTol),
                "cube n=%d g=%g: perturbed r=%.1e, GE fails", n, gv, rp);
    }
  return o;
}

Outcome monotonicity() {
  Outcome o;
  // the imported curved mesh as well
  TetMesh curved = testing::cube(4);
  for (auto& x : curved.nodes) x[1] += 0.15 * std::sin(std::numbers::pi * x[0]) * x[1];
  remember("curved n=4", assemble_problem(curved, stokes_data(ProblemSpec{})));
  std::mt19937 rng(99);
  for (const auto& [name, p] : g_assembled) {
    double worst = 0.0;
    for (int k = 0; k < 100; ++k) {
      const Vector x1 = testing::random_vector(rng, p.state_size());
      const Vector x2 = testing::random_vector(rng, p.state_size());
      const Vector d = x1 - x2;
      const double v = (eval_H(p, x1) - eval_H(p, x2)).dot(d) / d.squaredNorm();
      worst = std::min(worst, v);
    }
    if (worst < -kMonotoneTol) o.require(false, "%s: min <dH, dx>/|dx|^2 = %.2e", name.c_str(), worst);
  }
  o.require(o.pass, "%zu assembled problems x 100 random pairs: <H(x1)-H(x2), x1-x2> >= -%.0e |x1-x2|^2",
            g_assembled.size(), kMonotoneTol);
  return o;
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"mesh census", mesh_census},
      {"iteration bands", iteration_bands},
      {"mesh independence", mesh_independence},
      {"state census", state_census},
      {"stick equivalence", stick_equivalence},
      {"superlinear tail", superlinear_tail},
      {"discretization convergence", discretization_convergence},
      {"prox oracle", prox_oracle},
      {"SC pair algebra", scd_algebra},
      {"condensation exactness", condensation},
      {"residual characterization", residual_characterization},
      {"monotonicity", monotonicity},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o.require(false, "exception: %s", e.what());
    }
    std::printf("%s %2zu %s\n", o.pass ? "PASS" : "FAIL", i + 1, criteria[i].first.c_str());
    for (const auto& n : o.notes) std::printf("       %s\n", n.c_str());
    std::fflush(stdout);
    failed += !o.pass;
  }
  std::printf("%d of %zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
  return failed == 0 ? 0 : 1;
}
