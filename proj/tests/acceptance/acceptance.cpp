// Acceptance checks 1-10, or the ids given as arguments. Prints one PASS/FAIL
// line per criterion and exits nonzero when any criterion fails.

#include <chrono>
#include <cstdio>
#include <functional>
#include <iostream>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <thread>

#include "mimi/bcgd.hpp"
#include "mimi/experiments.hpp"
#include "mimi/selection.hpp"
#include "mimi/simulate.hpp"
#include "mimi/subsolvers.hpp"
#include "oracles.hpp"

using namespace mimi;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;
};

Matrix gauss(std::mt19937_64& rng, Eigen::Index r, Eigen::Index c, double scale = 1.0) {
  std::normal_distribution<double> n(0.0, scale);
  Matrix m(r, c);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = n(rng);
  return m;
}

Matrix uniform(std::mt19937_64& rng, Eigen::Index r, Eigen::Index c, double lo, double hi) {
  std::uniform_real_distribution<double> u(lo, hi);
  Matrix m(r, c);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = u(rng);
  return m;
}

std::string num(double v) {
  std::ostringstream s;
  s.precision(4);
  s << v;
  return s.str();
}

SolverConfig tight(double l1, double l2) {
  SolverConfig c;
  c.lambda1 = l1;
  c.lambda2 = l2;
  c.rel_tol = 1e-14;
  c.max_outer = 50000;
  c.lasso.tol = 1e-13;
  c.lasso.max_sweeps = 100000;
  c.nuclear.tol = 1e-13;
  c.nuclear.max_iter = 100000;
  return c;
}

int threads() { return static_cast<int>(std::max(1u, std::thread::hardware_concurrency())); }

// 1. Objective never increases across outer iterations.
Outcome descent() {
  std::mt19937_64 rng(101);
  double worst = -INFINITY;
  int failures = 0;
  long iterations = 0;
  for (int k = 0; k < 200; ++k) {
    auto inst = oracle::random_instance(rng, 40, 20, 0.3, 1.0, oracle::Types::Mixed);
    const auto anchors = lambda_anchors(inst.data, inst.links, inst.dict);
    std::uniform_real_distribution<double> frac(0.02, 1.0);
    SolverConfig c;
    c.lambda1 = frac(rng) * anchors.lambda1_max;
    c.lambda2 = frac(rng) * anchors.lambda2_max;
    try {
      const ModelFit m = fit(inst.data, inst.links, inst.dict, c);
      for (std::size_t t = 1; t < m.objective_trace.size(); ++t)
        worst = std::max(worst, m.objective_trace[t] - m.objective_trace[t - 1]);
      iterations += m.n_iter;
    } catch (const SolverError& e) {
      ++failures;
      std::cerr << "criterion 1 instance " << k << ": " << e.what() << '\n';
    }
  }
  return {failures == 0 && worst <= 1e-10,
          "200 instances, " + std::to_string(iterations) + " outer iterations, largest F_{t+1}-F_t " + num(worst) +
              ", aborted fits " + std::to_string(failures)};
}

// 2. Final objective matches an accelerated proximal-gradient reference.
Outcome global_optimum() {
  std::mt19937_64 rng(202);
  double worst = 0.0;
  for (int k = 0; k < 25; ++k) {
    auto inst = oracle::random_instance(rng, 8, 6, 0.5, 1.0, oracle::Types::Gaussian, 8, 6);
    const auto anchors = lambda_anchors(inst.data, inst.links, inst.dict);
    std::uniform_real_distribution<double> frac(0.05, 0.8);
    const double l1 = frac(rng) * anchors.lambda1_max;
    const double l2 = inst.dict.size() ? frac(rng) * anchors.lambda2_max : 0.0;
    const ModelFit m = fit(inst.data, inst.links, inst.dict, tight(l1, l2));
    const double ref = oracle::joint_proximal_gradient(inst.data, inst.links, inst.dict, l1, l2);
    const double F = objective(m.alpha_hat, m.L_hat, inst.data, inst.links, inst.dict, l1, l2);
    worst = std::max(worst, std::abs(F - ref) / std::max(1.0, std::abs(ref)));
  }
  return {worst <= 1e-5, "25 instances 8x6, largest relative gap " + num(worst)};
}

// 3. Analytic gradient against central differences.
Outcome gradient_check() {
  std::mt19937_64 rng(303);
  double worst = 0.0;
  for (int k = 0; k < 50; ++k) {
    auto inst = oracle::random_instance(rng, 20, 10, 0.3, 1.0, oracle::Types::Mixed);
    const Matrix X = gauss(rng, inst.data.rows(), inst.data.cols(), 0.7);
    const Matrix G = gradient(X, inst.data, inst.links);
    const Matrix fd = oracle::fd_gradient(X, inst.data, inst.links, 1e-6);
    worst = std::max(worst, (G - fd).cwiseAbs().maxCoeff() / std::max(1.0, G.cwiseAbs().maxCoeff()));
  }
  return {worst <= 1e-5, "50 instances, largest relative error " + num(worst)};
}

// 4. Subproblem oracles.
Outcome subproblems() {
  std::mt19937_64 rng(404);
  double kkt = 0.0, gap = 0.0;
  for (int k = 0; k < 10; ++k) {
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    std::vector<std::vector<AtomEntry>> atoms(2);
    for (auto& atom : atoms)
      for (Eigen::Index j = 0; j < 3; ++j)
        for (Eigen::Index i = 0; i < 3; ++i)
          if (u(rng) > 0.0) atom.push_back({i, j, u(rng)});
    if (atoms[0].empty() || atoms[1].empty()) {
      --k;
      continue;
    }
    const auto d = Dictionary::custom(3, 3, atoms);
    WeightedLassoProblem p{&d, uniform(rng, 3, 3, 0.1, 1.0), gauss(rng, 3, 3), 0.05, gauss(rng, 2, 1, 0.5),
                           std::uniform_real_distribution<double>(0.0, 1.0)(rng)};
    const auto r = solve_weighted_lasso(p, {.tol = 1e-10});
    kkt = std::max(kkt, weighted_lasso_kkt_residual(p, r.alpha));
    gap = std::max(gap, std::abs(weighted_lasso_objective(p, r.alpha) - oracle::lasso_grid_search(p).value));
  }
  double em = 0.0;
  for (int k = 0; k < 10; ++k) {
    const Matrix Z = gauss(rng, 7, 5);
    const double c = std::uniform_real_distribution<double>(0.1, 2.0)(rng);
    const double lam = std::uniform_real_distribution<double>(0.0, 3.0)(rng);
    const auto r = solve_weighted_nuclear({Matrix::Constant(7, 5, c), Z, lam});
    em = std::max(em, (r.L - oracle::svt_reference(Z, lam / (2.0 * c))).cwiseAbs().maxCoeff());
  }
  double lip = -INFINITY;
  for (int k = 0; k < 100; ++k) {
    const Matrix A = gauss(rng, 8, 6), B = A + gauss(rng, 8, 6, 0.5);
    const double lam = std::uniform_real_distribution<double>(0.0, 4.0)(rng);
    lip = std::max(lip, (soft_threshold_singular_values(A, lam) - soft_threshold_singular_values(B, lam)).norm() -
                            (A - B).norm());
  }
  return {kkt <= 1e-8 && gap <= 1e-5 && em <= 1e-10 && lip <= 1e-12,
          "(a) KKT " + num(kkt) + ", grid gap " + num(gap) + "; (b) EM vs SVT " + num(em) +
              "; (c) worst Lipschitz excess " + num(lip)};
}

// 5. Unpenalized fixed points.
Outcome fixed_points() {
  std::mt19937_64 rng(505);
  double worst_g = 0.0, worst_p = 0.0;
  for (int k = 0; k < 5; ++k) {
    const Eigen::Index m1 = 6 + k, m2 = 4 + k % 3;
    std::vector<Column> cols;
    for (Eigen::Index j = 0; j < m2; ++j)
      cols.push_back({"g", ColumnType::Numeric,
                      LinkSpec::gaussian(std::uniform_real_distribution<double>(0.5, 2.0)(rng))});
    const MixedDataFrame g(cols, gauss(rng, m1, m2, 2.0), Mask::Ones(m1, m2));
    const auto gl = g.links();
    const auto dict = oracle::random_dictionary(rng, m1, m2);
    const ModelFit mg = fit(g, gl, dict, tight(0.0, 0.0));
    for (Eigen::Index j = 0; j < m2; ++j)
      for (Eigen::Index i = 0; i < m1; ++i)
        worst_g = std::max(worst_g, std::abs(mg.X_hat(i, j) - g.value(i, j) / gl[static_cast<std::size_t>(j)].sigma2()));

    std::uniform_int_distribution<int> count(1, 12);
    Matrix Y(m1, m2);
    for (Eigen::Index i = 0; i < Y.size(); ++i) Y.data()[i] = count(rng);
    const MixedDataFrame pf(std::vector<Column>(static_cast<std::size_t>(m2), {"n", ColumnType::Count, LinkSpec::poisson()}),
                            Y, Mask::Ones(m1, m2));
    const auto pl = pf.links();
    const ModelFit mp = fit(pf, pl, Dictionary::none(m1, m2), tight(0.0, 0.0));
    worst_p = std::max(worst_p, (mp.X_hat.array() - Y.array().log()).abs().maxCoeff());
  }
  return {worst_g <= 1e-4 && worst_p <= 1e-4,
          "Gaussian max |X-Y/sigma2| " + num(worst_g) + ", Poisson max |X-log Y| " + num(worst_p)};
}

// 6. Anchors are zero thresholds.
Outcome anchors() {
  std::mt19937_64 rng(606);
  double worst_L = 0.0, worst_a = 0.0;
  int checked_alpha = 0;
  for (int k = 0; k < 20; ++k) {
    auto inst = oracle::random_instance(rng, 30, 15, 0.4, 1.0, oracle::Types::Mixed);
    const auto a = lambda_anchors(inst.data, inst.links, inst.dict);
    SolverConfig c;
    c.lambda1 = 1.01 * a.lambda1_max;
    c.update_alpha = false;
    worst_L = std::max(worst_L, fit(inst.data, inst.links, inst.dict, c).L_hat.cwiseAbs().maxCoeff());
    if (inst.dict.size() == 0) continue;
    c = {};
    c.lambda2 = 1.01 * a.lambda2_max;
    c.update_l = false;
    worst_a = std::max(worst_a, fit(inst.data, inst.links, inst.dict, c).alpha_hat.cwiseAbs().maxCoeff());
    ++checked_alpha;
  }
  return {worst_L <= 1e-8 && worst_a <= 1e-8,
          "20 instances (" + std::to_string(checked_alpha) + " with main effects), max |L| " + num(worst_L) +
              ", max |alpha| " + num(worst_a)};
}

std::map<std::string, double> medians(const ResultTable& summary, const std::string& metric,
                                      const std::vector<std::string>& keys) {
  std::map<std::string, double> out;
  for (std::size_t r = 0; r < summary.size(); ++r) {
    std::string k;
    for (const auto& key : keys) k += summary.at(r, key) + "|";
    out[k] = std::stod(summary.at(r, metric + "_median"));
  }
  return out;
}

// 7. Main-effect error ordering at s = r = 2.
Outcome estimation_ordering() {
  EstimationStudy s;
  s.s_list = {2};
  s.r_list = {2};
  s.n_reps = 20;
  s.threads = threads();
  const auto o = run_estimation_study(s);
  const auto med = medians(o.summary, "err_alpha", {"method"});
  const double ours = med.at("mimi|"), theirs = med.at("groupmean_svt|");
  return {ours < theirs, "300x30 s=2 r=2 p=0.8, median err_alpha mimi " + num(ours) + " vs group-mean+SVT " + num(theirs)};
}

// 8. Imputation orderings over missingness and ratio.
Outcome imputation_ordering() {
  ImputationStudy s;
  s.n_reps = 20;
  s.threads = threads();
  const auto o = run_imputation_study(s);
  const auto med = medians(o.summary, "imputation_mse", {"ratio", "missing_frac", "method"});
  int wins = 0;
  bool monotone = true;
  std::string worst;
  for (double ratio : s.ratios) {
    for (const char* method : {"mimi", "column_mean", "groupmean_svt"}) {
      double prev = -INFINITY;
      for (double miss : s.missing_fracs) {
        const std::string key = format_double(ratio) + "|" + format_double(miss) + "|" + method + "|";
        const double v = med.at(key);
        if (v < prev) {
          monotone = false;
          worst += std::string(" ") + method + "@ratio=" + format_double(ratio) + " miss=" +
                   format_double(miss) + " " + num(v) + "<" + num(prev);
        }
        prev = v;
      }
    }
    for (double miss : s.missing_fracs) {
      const std::string base = format_double(ratio) + "|" + format_double(miss) + "|";
      if (med.at(base + "mimi|") < med.at(base + "column_mean|")) ++wins;
    }
  }
  return {wins == 9 && monotone, "mimi below column mean in " + std::to_string(wins) +
                                     "/9 cells; nondecreasing in missingness: " + (monotone ? "yes" : "no" + worst)};
}

// 9. Rate slopes.
Outcome rates() {
  RateStudy s;
  s.n_reps = 20;
  s.threads = threads();
  const auto o = run_rate_study(s);
  const double sL = std::stod(o.slopes.at(0, "estimate"));
  const double sA = std::stod(o.slopes.at(1, "estimate"));
  const double ratio = std::stod(o.slopes.at(2, "estimate"));
  return {sL >= 0.7 && sL <= 1.3 && sA >= -0.3 && sA <= 0.3 && ratio >= 1.4 && ratio <= 2.8,
          "slope err_L " + num(sL) + " [0.7,1.3], slope err_alpha " + num(sA) + " [-0.3,0.3], p-halving ratio " +
              num(ratio) + " [1.4,2.8]"};
}

// 10. Determinism and round trips.
Outcome determinism() {
  bool ok = true;
  std::string notes;
  SimDesign d;
  d.m1 = 80;
  d.m2 = 12;
  d.layout = ColumnLayout::MixedGaussianBernoulli;
  d.seed = 77;
  const auto t1 = gen_ground_truth(d), t2 = gen_ground_truth(d);
  const auto links = design_links(d);
  const auto s1 = gen_observations(t1.X, d, links), s2 = gen_observations(t2.X, d, links);
  if (!(t1.X == t2.X && s1.data == s2.data && s1.complete == s2.complete)) {
    ok = false;
    notes += " simulate";
  }
  const auto dict = design_dictionary(d);
  SolverConfig c;
  c.lambda1 = 3.0;
  c.lambda2 = 2.0;
  const auto f1 = fit(s1.data, links, dict, c), f2 = fit(s2.data, links, dict, c);
  if (!(f1.X_hat == f2.X_hat && f1.objective_trace == f2.objective_trace)) {
    ok = false;
    notes += " fit";
  }
  EstimationStudy st;
  st.m1 = 40;
  st.m2 = 8;
  st.n_groups = 4;
  st.s_list = {2};
  st.r_list = {2};
  st.n_reps = 3;
  auto dump = [](const ResultTable& t) {
    std::ostringstream out;
    t.write_csv(out);
    return out.str();
  };
  const auto r1 = run_estimation_study(st);
  st.threads = threads();
  const auto r2 = run_estimation_study(st);
  const auto r3 = run_estimation_study(estimation_study_from_json(r1.manifest.at("parameters")));
  if (dump(r1.rows) != dump(r2.rows) || dump(r1.rows) != dump(r3.rows)) {
    ok = false;
    notes += " reproduce";
  }
  std::mt19937_64 rng(1010);
  int frames = 0;
  for (; frames < 100; ++frames) {
    auto inst = oracle::random_instance(rng, 25, 10, 0.2, 1.0, oracle::Types::Mixed);
    std::ostringstream out;
    write_csv(inst.data, out);
    std::istringstream in(out.str());
    if (!(read_csv(in, parse_schema(schema_to_json(inst.data))) == inst.data)) {
      ok = false;
      notes += " csv";
      break;
    }
  }
  return {ok, "simulate, fit and reproduce bit-identical; " + std::to_string(frames) + " CSV round trips" +
                  (ok ? "" : "; mismatch in" + notes)};
}

}  // namespace

int main(int argc, char** argv) {
  struct Criterion {
    int id;
    double budget_seconds;
    std::function<Outcome()> run;
  };
  const std::vector<Criterion> criteria{
      {1, 120, descent},       {2, 60, global_optimum},       {3, 10, gradient_check},
      {4, 30, subproblems},    {5, 10, fixed_points},         {6, 30, anchors},
      {7, 300, estimation_ordering}, {8, 600, imputation_ordering}, {9, 900, rates},
      {10, 30, determinism}};
  std::set<int> only;
  for (int a = 1; a < argc; ++a) only.insert(std::atoi(argv[a]));
  int failed = 0;
  for (const auto& c : criteria) {
    if (!only.empty() && !only.contains(c.id)) continue;
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("threw: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    const bool in_time = secs <= c.budget_seconds;
    const bool pass = o.pass && in_time;
    if (!pass) ++failed;
    std::printf("criterion %d %s: %s (%.1f s of %.0f s)\n", c.id, pass ? "PASS" : "FAIL", o.detail.c_str(), secs,
                c.budget_seconds);
    std::fflush(stdout);
  }
  return failed == 0 ? 0 : 1;
}
