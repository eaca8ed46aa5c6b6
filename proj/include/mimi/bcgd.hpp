#pragma once

#include <optional>
#include <span>
#include <utility>
#include <vector>

#include <json.hpp>

#include "mimi/dictionary.hpp"
#include "mimi/error.hpp"
#include "mimi/expfam.hpp"
#include "mimi/mdf.hpp"
#include "mimi/subsolvers.hpp"

namespace mimi {

/// How the nuclear-norm term of the L-step model decrease is formed.
///   Symmetric: λ₁(‖L + d‖* − ‖L‖*), mirroring the α-step.
///   Literal:   λ₁(‖L + d‖* − ‖d‖*).
enum class GammaLForm { Symmetric, Literal };

struct SolverConfig {
  double lambda1 = 0.0;
  double lambda2 = 0.0;
  double nu = 1e-2;
  double tau_init = 1.0;
  double backtrack = 0.5;  // β
  double slope = 0.1;      // ζ
  double theta = 0.0;
  double rel_tol = 1e-6;   // stop when |ΔF| ≤ rel_tol·max(|F|, 1)
  int max_outer = 200;
  double min_step = 1e-12;
  double curvature_floor = 1e-10;
  GammaLForm gamma_l_form = GammaLForm::Symmetric;
  bool update_alpha = true;
  bool update_l = true;
  /// Optional post-hoc clip of α̂ and L̂ into [−a, a].
  std::optional<double> clip_box;
  LassoOptions lasso{.tol = 1e-9, .max_sweeps = 2000, .throw_on_max_iter = false};
  NuclearOptions nuclear{.tol = 1e-6, .max_iter = 100, .throw_on_max_iter = false, .svd = {}};

  /// Throws InvalidInput when a constant is outside its admissible range.
  void validate() const;
};

nlohmann::json to_json(const SolverConfig& config);
SolverConfig solver_config_from_json(const nlohmann::json& j, SolverConfig base = {});

/// Everything a fit needs besides the iterate.
struct Problem {
  const MixedDataFrame& data;
  std::span<const LinkSpec> links;
  const Dictionary& dict;
};

struct BcgdState {
  Vector alpha;
  Matrix L;
  Matrix X;  // f_U(α) + L
};

struct AlphaStepResult {
  Vector alpha;
  double tau = 0.0;
  double gamma = 0.0;
  bool moved = false;
};

struct LStepResult {
  Matrix L;
  double tau = 0.0;
  double gamma = 0.0;
  bool moved = false;
};

struct ModelFit {
  Vector alpha_hat;
  Matrix L_hat;
  Matrix X_hat;
  std::vector<double> objective_trace;  // F at the start and after each outer iteration
  std::vector<std::pair<double, double>> step_trace;  // accepted (τ_α, τ_L)
  std::vector<std::pair<double, double>> gamma_trace;  // (Γ_α, Γ_L)
  bool converged = false;
  int n_iter = 0;
  double wall_seconds = 0.0;
  SolverConfig config;
};

/// A step failed; `partial` carries the iterates and traces up to the failure.
class SolverError : public Error {
 public:
  SolverError(const std::string& what, ModelFit partial)
      : Error(what), partial_(std::move(partial)) {}
  const ModelFit& partial() const noexcept { return partial_; }

 private:
  ModelFit partial_;
};

/// F(α, L) = quasi_loglik_neg(f_U(α) + L) + λ₁‖L‖* + λ₂‖α‖₁.
double objective(const Vector& alpha, const Matrix& L, const MixedDataFrame& data,
                 std::span<const LinkSpec> links, const Dictionary& dict, double lambda1,
                 double lambda2);

BcgdState make_state(const Problem& problem, Vector alpha, Matrix L);

/// One proximal step on α from a weighted-Lasso model of f around X, followed
/// by an Armijo backtrack on f + λ₂‖·‖₁.
AlphaStepResult alpha_step(const Problem& problem, const BcgdState& state,
                           const SolverConfig& config);

/// One proximal step on L from a weighted soft-impute model of f around X,
/// followed by an Armijo backtrack on f + λ₁‖·‖*.
LStepResult l_step(const Problem& problem, const BcgdState& state, const SolverConfig& config);

struct WarmStart {
  Vector alpha;
  Matrix L;
};

/// Alternates alpha_step and l_step from (0, 0), or from `warm` when given.
ModelFit fit(const MixedDataFrame& data, std::span<const LinkSpec> links, const Dictionary& dict,
             const SolverConfig& config, const std::optional<WarmStart>& warm = std::nullopt);

/// Unobserved cells receive the predicted mean g_j'(X̂_ij); observed cells are
/// copied. Binary predictions are probabilities unless `round_binary`.
MixedDataFrame impute(const ModelFit& fit, const MixedDataFrame& data,
                      std::span<const LinkSpec> links, bool round_binary = false);

/// Report with config echo, traces, rank of L̂ (threshold 1e−7·σ_max),
/// ‖α̂‖₀ (threshold 1e−8) and wall time.
nlohmann::json fit_report(const ModelFit& fit);

}  // namespace mimi
