#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <vector>

#include <json.hpp>

#include "mimi/bcgd.hpp"

namespace mimi {

/// Smallest penalties for which the corresponding block is zero at the
/// solution started from the zero model.
struct LambdaAnchors {
  double lambda1_max;  // ‖∇L(0)‖_op
  double lambda2_max;  // max_k |⟨U^k, ∇L(0)⟩|
};

LambdaAnchors lambda_anchors(const MixedDataFrame& data, std::span<const LinkSpec> links,
                             const Dictionary& dict);

struct LambdaGrid {
  std::vector<double> lambda1;  // strictly decreasing
  std::vector<double> lambda2;
  double lambda1_max = 0.0;
  double lambda2_max = 0.0;
  bool degenerate = false;  // an anchor was zero and its axis collapsed to {0}
};

/// Geometric grids from each anchor down `decades` decades.
LambdaGrid default_grid(const MixedDataFrame& data, std::span<const LinkSpec> links,
                        const Dictionary& dict, int n1, int n2, double decades = 3.0);

/// Which structural constant scales the λ₂ recipe for unequal groups.
enum class UmaxChoice { Max, Min };

/// Penalties with the scaling of the high-probability bounds:
///   λ₁ = c1·σ₊·√(β̂·log d),   λ₂ = c2·u·log d
/// with d = m1 + m2, β̂ from mask_stats, σ₊² the largest curvature bound of
/// the links over [−box, box] and u = u_max (or κ² with UmaxChoice::Min).
struct ScaledLambdas {
  double lambda1;
  double lambda2;
};

ScaledLambdas scaled_lambdas(const MixedDataFrame& data, std::span<const LinkSpec> links,
                             const Dictionary& dict, double c1, double c2,
                             double box = 0.0, UmaxChoice choice = UmaxChoice::Max);

/// Validation errors on held-out cells, all in the natural (mean) scale.
struct TypeBreakdown {
  double numeric_mse = 0.0;
  double binary_mse = 0.0;
  double binary_misclassification = 0.0;
  double count_mse = 0.0;
  double count_deviance = 0.0;
  long numeric_n = 0;
  long binary_n = 0;
  long count_n = 0;
};

struct CVCell {
  double lambda1 = 0.0;
  double lambda2 = 0.0;
  std::vector<double> fold_errors;
  double mean_error = 0.0;
  double sd_error = 0.0;
  TypeBreakdown breakdown;  // pooled over folds
};

struct CVReport {
  std::vector<CVCell> cells;  // λ₁-major, both axes descending
  std::size_t chosen = 0;
  int n_folds = 0;
  std::uint64_t seed = 0;
  double lambda1_max = 0.0;
  double lambda2_max = 0.0;
  SolverConfig config;

  const CVCell& best() const { return cells.at(chosen); }
};

/// Fold label (0..n_folds−1) of every observed cell in column-major order.
/// Redraws (up to `max_redraws`) until no fold removes every training
/// observation of a column that has any.
std::vector<int> assign_folds(const MixedDataFrame& data, int n_folds, std::uint64_t seed,
                              int max_redraws = 20);

/// Held-out error of predicted means against observed values on the cells
/// where `heldout` is 1.
double heldout_error(const Matrix& X_hat, const MixedDataFrame& data,
                     std::span<const LinkSpec> links, const Mask& heldout,
                     TypeBreakdown* breakdown = nullptr);

CVReport cross_validate(const MixedDataFrame& data, std::span<const LinkSpec> links,
                        const Dictionary& dict, const LambdaGrid& grid, int n_folds,
                        std::uint64_t seed, const SolverConfig& config, int threads = 1);

nlohmann::json cv_report_json(const CVReport& report);
/// Flat rows: lambda1,lambda2,fold,error.
void write_cv_csv(const CVReport& report, std::ostream& out);

}  // namespace mimi
