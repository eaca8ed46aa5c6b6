#pragma once

#include <optional>

#include "mimi/dictionary.hpp"
#include "mimi/linalg.hpp"
#include "mimi/types.hpp"

namespace mimi {

/// min_α Σ W_ij (Z_ij − f_U(α)_ij)² + ν‖α_t − α‖² + λ₂‖α‖₁
struct WeightedLassoProblem {
  const Dictionary* dict = nullptr;
  Matrix weights;  // W ≥ 0
  Matrix targets;  // Z
  double ridge = 1e-2;  // ν > 0
  Vector anchor;        // α_t
  double penalty = 0.0;  // λ₂
};

struct LassoOptions {
  double tol = 1e-10;  // KKT residual
  int max_sweeps = 10000;
  /// Throw ConvergenceError when max_sweeps runs out; otherwise return the
  /// last iterate.
  bool throw_on_max_iter = true;
};

struct LassoResult {
  Vector alpha;
  int sweeps = 0;
  double kkt_residual = 0.0;
  bool converged = false;
};

LassoResult solve_weighted_lasso(const WeightedLassoProblem& prob,
                                 const LassoOptions& options = {},
                                 const std::optional<Vector>& warm_start = std::nullopt);
double weighted_lasso_objective(const WeightedLassoProblem& prob, const Vector& alpha);
/// Largest violation of the subgradient optimality conditions.
double weighted_lasso_kkt_residual(const WeightedLassoProblem& prob, const Vector& alpha);

/// U·diag(max(σ − λ, 0))·Vᵀ.
Matrix soft_threshold_singular_values(const Matrix& A, double lambda,
                                      const SvdOptions& options = {});

/// min_L Σ W̃_ij (Z̃_ij − L_ij)² + λ₁‖L‖*
struct WeightedNuclearProblem {
  Matrix weights;  // W̃ > 0
  Matrix targets;  // Z̃
  double penalty = 0.0;  // λ₁
};

struct NuclearOptions {
  double tol = 1e-6;  // relative Frobenius change between EM iterates
  int max_iter = 100;
  bool throw_on_max_iter = true;
  SvdOptions svd;
};

struct NuclearResult {
  Matrix L;
  int iterations = 0;
  double last_change = 0.0;
  double objective = 0.0;
  Eigen::Index rank = 0;
  bool converged = false;
};

/// EM iterations of weighted soft-impute: with ω = W̃ / max W̃,
///   L ← SVT_{λ₁/(2 max W̃)}(ω⊙Z̃ + (1 − ω)⊙L).
NuclearResult solve_weighted_nuclear(const WeightedNuclearProblem& prob,
                                     const NuclearOptions& options = {},
                                     const std::optional<Matrix>& warm_start = std::nullopt);
double weighted_nuclear_objective(const WeightedNuclearProblem& prob, const Matrix& L);

}  // namespace mimi
