#pragma once

#include <cstdint>

#include <json.hpp>

#include "mimi/bcgd.hpp"
#include "mimi/dictionary.hpp"
#include "mimi/mdf.hpp"

namespace mimi {

enum class ColumnLayout { AllNumeric, MixedGaussianBernoulli };
enum class DesignDictionary { GroupEffects, RowColumn, Corruptions };

struct SimDesign {
  Eigen::Index m1 = 300;
  Eigen::Index m2 = 30;
  DesignDictionary dictionary = DesignDictionary::GroupEffects;
  int n_groups = 5;      // equal, contiguous groups
  Eigen::Index s = 2;    // nonzero main effects
  Eigen::Index r = 2;    // rank of L⁰
  double p_obs = 0.8;    // per-entry observation probability
  ColumnLayout layout = ColumnLayout::AllNumeric;
  double ratio = 1.0;    // ρ = ‖f_U(α⁰)‖_F / ‖L⁰‖_F; ignored when s = 0 or r = 0
  double max_abs = 2.5;  // target ‖X⁰‖_∞
  std::uint64_t seed = 1;

  /// Throws InvalidInput on inconsistent fields.
  void validate() const;
};

nlohmann::json to_json(const SimDesign& design);
SimDesign sim_design_from_json(const nlohmann::json& j, SimDesign base = {});

Dictionary design_dictionary(const SimDesign& design);
/// Gaussian(σ²=1) columns, or the first ⌈m2/2⌉ Gaussian and the rest Bernoulli.
Links design_links(const SimDesign& design);

struct GroundTruth {
  Vector alpha;
  Matrix L;
  Matrix X;
};

GroundTruth gen_ground_truth(const SimDesign& design);

/// Observed frame plus the complete draw, so imputation can be scored on the
/// cells the mask hides.
struct SimData {
  MixedDataFrame data;
  Matrix complete;
};

/// Samples Y_ij at natural parameter X⁰_ij and masks with independent
/// Bernoulli(p_obs). Noise and mask use separate streams of the design seed:
/// changing p_obs alone yields nested masks over the same Y.
SimData gen_observations(const Matrix& X0, const SimDesign& design, const Links& links);

struct ErrorMetrics {
  double err_alpha = 0.0;         // ‖α̂ − α⁰‖²
  double err_fU = 0.0;            // ‖f_U(α̂) − f_U(α⁰)‖_F²
  double err_L = 0.0;             // ‖L̂ − L⁰‖_F²
  double imputation_mse = 0.0;    // mean squared error of predicted means on hidden cells
  double imputation_error = 0.0;  // root of the summed squared error on hidden cells
  long n_hidden = 0;
};

/// `imputed` holds natural-scale predictions for every cell.
ErrorMetrics error_metrics(const Vector& alpha_hat, const Matrix& L_hat, const Matrix& imputed,
                           const Dictionary& dict, const GroundTruth& truth, const SimData& sim);
ErrorMetrics error_metrics(const ModelFit& fit, const Dictionary& dict, std::span<const LinkSpec> links,
                           const GroundTruth& truth, const SimData& sim);

struct SoftImputeOptions {
  double tol = 1e-6;
  int max_iter = 500;
  SvdOptions svd;
};

/// min_L Σ_{observed} (R_ij − L_ij)² + λ‖L‖* by soft-impute EM.
Matrix soft_impute(const Matrix& R, const Mask& mask, double lambda,
                   const SoftImputeOptions& options = {});

/// Group means per (group, column) followed by soft-impute on the observed
/// residuals. Values are used on their natural scale.
ModelFit baseline_group_mean_then_svt(const MixedDataFrame& data, const Dictionary& dict,
                                      double lambda, const SoftImputeOptions& options = {});

/// Observed column means at every cell (0 for an empty column).
Matrix column_mean_impute(const MixedDataFrame& data);

}  // namespace mimi
