#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include <json.hpp>

#include "mimi/bcgd.hpp"
#include "mimi/parallel.hpp"
#include "mimi/simulate.hpp"
#include "mimi/table.hpp"

namespace mimi {

/// How each replicate picks its penalties.
///   Scaled: selection::scaled_lambdas with (c1, c2); the comparator's
///           soft-impute uses comparator_scale·λ₁ (its loss is a plain sum of
///           squares, twice the Gaussian quasi-likelihood).
///   CrossValidated: cross_validate over default_grid(grid_n1, grid_n2).
struct LambdaPolicy {
  enum class Mode { Scaled, CrossValidated };
  Mode mode = Mode::Scaled;
  double c1 = 0.5;
  double c2 = 0.08;
  double comparator_scale = 2.0;
  int n_folds = 5;
  int grid_n1 = 4;
  int grid_n2 = 4;
};

nlohmann::json to_json(const LambdaPolicy& policy);
LambdaPolicy lambda_policy_from_json(const nlohmann::json& j, LambdaPolicy base = {});

struct EstimationStudy {
  Eigen::Index m1 = 300;
  Eigen::Index m2 = 30;
  int n_groups = 5;
  std::vector<Eigen::Index> s_list{2, 5, 10, 20};
  std::vector<Eigen::Index> r_list{2, 5, 10, 20};
  double p_obs = 0.8;
  double ratio = 1.0;
  double max_abs = 2.5;
  int n_reps = 20;
  std::uint64_t seed = 1;
  LambdaPolicy lambdas;
  SolverConfig solver;
  int threads = 1;
};

struct ImputationStudy {
  Eigen::Index m1 = 150;
  Eigen::Index m2 = 30;
  int n_groups = 5;
  Eigen::Index s = 3;
  Eigen::Index r = 2;
  std::vector<double> missing_fracs{0.2, 0.4, 0.6};
  std::vector<double> ratios{0.2, 1.0, 5.0};
  double max_abs = 2.5;
  int n_reps = 20;
  std::uint64_t seed = 1;
  LambdaPolicy lambdas;
  SolverConfig solver;
  int threads = 1;
};

struct RateStudy {
  std::vector<Eigen::Index> sizes{100, 200, 400, 800};  // M = m1
  Eigen::Index m2 = 30;
  int n_groups = 5;
  Eigen::Index s = 2;
  Eigen::Index r = 2;
  double p_obs = 0.7;
  double ratio = 0.3;
  double max_abs = 10.0;
  /// Sizes at which the study is repeated with p_obs/2.
  std::vector<Eigen::Index> halving_sizes{200};
  int n_reps = 20;
  int n_bootstrap = 200;
  std::uint64_t seed = 1;
  LambdaPolicy lambdas;
  SolverConfig solver;
  int threads = 1;
};

nlohmann::json to_json(const EstimationStudy& study);
nlohmann::json to_json(const ImputationStudy& study);
nlohmann::json to_json(const RateStudy& study);
EstimationStudy estimation_study_from_json(const nlohmann::json& j);
ImputationStudy imputation_study_from_json(const nlohmann::json& j);
RateStudy rate_study_from_json(const nlohmann::json& j);

/// One row per replicate and method, a per-cell summary (median and IQR of
/// each metric) and the manifest that reproduces both.
struct StudyOutput {
  ResultTable rows;
  ResultTable summary;
  ResultTable slopes;  // rate study only
  nlohmann::json manifest;

  /// rows.csv, summary.csv, long.csv, slopes.csv (when present), manifest.json
  void write(const std::filesystem::path& dir) const;
  /// Metric/value pairs, one line per (row, metric).
  ResultTable long_format() const;
};

StudyOutput run_estimation_study(const EstimationStudy& study);
StudyOutput run_imputation_study(const ImputationStudy& study);
StudyOutput run_rate_study(const RateStudy& study);

/// Least-squares slope of log(y) on log(x).
double log_log_slope(const std::vector<double>& x, const std::vector<double>& y);

}  // namespace mimi
