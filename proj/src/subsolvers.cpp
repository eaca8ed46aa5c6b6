#include "mimi/subsolvers.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "mimi/error.hpp"

namespace mimi {

namespace {

double soft_threshold(double x, double t) {
  if (x > t) return x - t;
  if (x < -t) return x + t;
  return 0.0;
}

void validate(const WeightedLassoProblem& p) {
  if (p.dict == nullptr) throw InvalidInput("weighted Lasso needs a dictionary");
  const Dictionary& d = *p.dict;
  if (p.weights.rows() != d.rows() || p.weights.cols() != d.cols() ||
      p.targets.rows() != d.rows() || p.targets.cols() != d.cols())
    throw ShapeError("weights/targets do not match the dictionary shape");
  if (p.anchor.size() != d.size()) throw ShapeError("anchor length differs from the atom count");
  if (!(p.ridge > 0.0)) throw InvalidInput("ridge must be strictly positive");
  if (!(p.penalty >= 0.0)) throw InvalidInput("penalty must be nonnegative");
  if (!p.weights.allFinite() || (p.weights.array() < 0.0).any())
    throw InvalidInput("weights must be finite and nonnegative");
  if (!p.targets.allFinite()) throw InvalidInput("targets must be finite");
}

// Objective from the maintained residual R = Z − f_U(α).
double lasso_objective_from_residual(const WeightedLassoProblem& p, const Vector& alpha,
                                     const Matrix& R) {
  return (p.weights.array() * R.array().square()).sum() +
         p.ridge * (alpha - p.anchor).squaredNorm() + p.penalty * alpha.lpNorm<1>();
}

double kkt_from_residual(const WeightedLassoProblem& p, const Vector& alpha, const Matrix& R) {
  const Matrix WR = p.weights.cwiseProduct(R);
  const Vector grad = -2.0 * p.dict->adjoint(WR) + 2.0 * p.ridge * (alpha - p.anchor);
  double worst = 0.0;
  for (Eigen::Index k = 0; k < alpha.size(); ++k) {
    const double v = alpha(k) != 0.0 ? std::abs(grad(k) + p.penalty * (alpha(k) > 0 ? 1.0 : -1.0))
                                     : std::max(0.0, std::abs(grad(k)) - p.penalty);
    worst = std::max(worst, v);
  }
  return worst;
}

}  // namespace

double weighted_lasso_objective(const WeightedLassoProblem& prob, const Vector& alpha) {
  validate(prob);
  const Matrix R = prob.targets - prob.dict->apply(alpha);
  return lasso_objective_from_residual(prob, alpha, R);
}

double weighted_lasso_kkt_residual(const WeightedLassoProblem& prob, const Vector& alpha) {
  validate(prob);
  const Matrix R = prob.targets - prob.dict->apply(alpha);
  return kkt_from_residual(prob, alpha, R);
}

LassoResult solve_weighted_lasso(const WeightedLassoProblem& prob, const LassoOptions& options,
                                 const std::optional<Vector>& warm_start) {
  validate(prob);
  if (!(options.tol > 0.0)) throw InvalidInput("Lasso tolerance must be positive");
  const Dictionary& dict = *prob.dict;
  const Eigen::Index n = dict.size();

  LassoResult result;
  result.alpha = warm_start ? *warm_start : prob.anchor;
  if (result.alpha.size() != n) throw ShapeError("warm start length differs from the atom count");
  if (n == 0) {
    result.converged = true;
    return result;
  }
  Vector& alpha = result.alpha;

  // Quadratic coefficient of each coordinate: Σ W U_k² + ν > 0.
  Vector curvature(n);
  for (Eigen::Index k = 0; k < n; ++k) {
    double acc = 0.0;
    dict.for_each_entry(k, [&](Eigen::Index i, Eigen::Index j, double v) { acc += prob.weights(i, j) * v * v; });
    curvature(k) = acc + prob.ridge;
  }

  Matrix R = prob.targets - dict.apply(alpha);
  const double half_penalty = 0.5 * prob.penalty;

  auto update = [&](Eigen::Index k) {
    double inner = 0.0;
    dict.for_each_entry(k, [&](Eigen::Index i, Eigen::Index j, double v) { inner += prob.weights(i, j) * v * R(i, j); });
    const double old = alpha(k);
    const double b = inner + (curvature(k) - prob.ridge) * old + prob.ridge * prob.anchor(k);
    const double next = soft_threshold(b, half_penalty) / curvature(k);
    const double delta = next - old;
    if (delta != 0.0) {
      dict.for_each_entry(k, [&](Eigen::Index i, Eigen::Index j, double v) { R(i, j) -= delta * v; });
      alpha(k) = next;
    }
    return std::abs(delta) * std::sqrt(curvature(k));
  };

  double obj = lasso_objective_from_residual(prob, alpha, R);
  auto check_descent = [&]() {
    const double next = lasso_objective_from_residual(prob, alpha, R);
    if (next > obj + 1e-10 * (1.0 + std::abs(obj)))
      throw NumericError("coordinate descent increased the Lasso objective from " +
                         std::to_string(obj) + " to " + std::to_string(next));
    obj = next;
  };

  std::vector<Eigen::Index> active;
  while (result.sweeps < options.max_sweeps) {
    for (Eigen::Index k = 0; k < n; ++k) update(k);
    ++result.sweeps;
    check_descent();
    result.kkt_residual = kkt_from_residual(prob, alpha, R);
    if (result.kkt_residual <= options.tol) {
      result.converged = true;
      return result;
    }
    // Passes over the current support until it settles.
    active.clear();
    for (Eigen::Index k = 0; k < n; ++k)
      if (alpha(k) != 0.0) active.push_back(k);
    while (!active.empty() && result.sweeps < options.max_sweeps) {
      double biggest = 0.0;
      for (Eigen::Index k : active) biggest = std::max(biggest, update(k));
      ++result.sweeps;
      check_descent();
      if (biggest <= 0.1 * options.tol) break;
    }
  }
  result.kkt_residual = kkt_from_residual(prob, alpha, R);
  result.converged = result.kkt_residual <= options.tol;
  if (!result.converged && options.throw_on_max_iter)
    throw ConvergenceError("weighted Lasso did not converge in " + std::to_string(options.max_sweeps) +
                               " sweeps (KKT residual " + std::to_string(result.kkt_residual) + ")",
                           result.kkt_residual);
  return result;
}

Matrix soft_threshold_singular_values(const Matrix& A, double lambda, const SvdOptions& options) {
  return singular_value_threshold(A, lambda, options).value;
}

namespace {

void validate(const WeightedNuclearProblem& p) {
  if (p.weights.rows() != p.targets.rows() || p.weights.cols() != p.targets.cols())
    throw ShapeError("weights and targets differ in shape");
  if (!p.weights.allFinite() || (p.weights.array() <= 0.0).any())
    throw InvalidInput("weighted nuclear problem needs strictly positive finite weights");
  if (!p.targets.allFinite()) throw InvalidInput("targets must be finite");
  if (!(p.penalty >= 0.0)) throw InvalidInput("penalty must be nonnegative");
}

double weighted_fit(const WeightedNuclearProblem& p, const Matrix& L) {
  return (p.weights.array() * (p.targets - L).array().square()).sum();
}

}  // namespace

double weighted_nuclear_objective(const WeightedNuclearProblem& prob, const Matrix& L) {
  validate(prob);
  if (L.rows() != prob.targets.rows() || L.cols() != prob.targets.cols())
    throw ShapeError("L has the wrong shape");
  return weighted_fit(prob, L) + prob.penalty * nuclear_norm(L);
}

NuclearResult solve_weighted_nuclear(const WeightedNuclearProblem& prob, const NuclearOptions& options,
                                     const std::optional<Matrix>& warm_start) {
  validate(prob);
  if (!(options.tol > 0.0)) throw InvalidInput("EM tolerance must be positive");
  const Eigen::Index m1 = prob.targets.rows();
  const Eigen::Index m2 = prob.targets.cols();

  // Rescale into frequencies ω ∈ (0, 1]; the threshold absorbs the factor.
  const double w_max = prob.weights.maxCoeff();
  const Matrix omega = prob.weights / w_max;
  const double threshold = prob.penalty / (2.0 * w_max);
  const bool exact_svd = std::min(m1, m2) <= options.svd.full_svd_limit;

  NuclearResult result;
  Matrix L = warm_start ? *warm_start : Matrix::Zero(m1, m2);
  if (L.rows() != m1 || L.cols() != m2) throw ShapeError("warm start has the wrong shape");
  double obj = weighted_fit(prob, L) + (prob.penalty > 0.0 && warm_start ? prob.penalty * nuclear_norm(L) : 0.0);
  Eigen::Index rank_hint = 0;

  while (result.iterations < options.max_iter) {
    const Matrix blend = omega.cwiseProduct(prob.targets) + (1.0 - omega.array()).matrix().cwiseProduct(L);
    Thresholded next = singular_value_threshold(blend, threshold, options.svd, rank_hint);
    ++result.iterations;
    const double next_obj = weighted_fit(prob, next.value) + prob.penalty * next.nuclear_norm();
    if (exact_svd && next_obj > obj + 1e-9 * (1.0 + std::abs(obj)))
      throw NumericError("EM iteration increased the weighted nuclear objective from " +
                         std::to_string(obj) + " to " + std::to_string(next_obj));
    const double change = (next.value - L).norm();
    const double scale = std::max(1.0, L.norm());
    L = std::move(next.value);
    obj = next_obj;
    rank_hint = next.rank();
    result.rank = next.rank();
    result.last_change = change / scale;
    if (result.last_change <= options.tol) {
      result.converged = true;
      break;
    }
  }
  result.L = std::move(L);
  result.objective = obj;
  if (!result.converged && options.throw_on_max_iter)
    throw ConvergenceError("weighted soft-impute did not converge in " + std::to_string(options.max_iter) +
                               " iterations (relative change " + std::to_string(result.last_change) + ")",
                           result.last_change);
  return result;
}

}  // namespace mimi
