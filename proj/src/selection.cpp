#include "mimi/selection.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>
#include <random>
#include <string>

#include "mimi/linalg.hpp"
#include "mimi/parallel.hpp"
#include "mimi/table.hpp"

namespace mimi {

LambdaAnchors lambda_anchors(const MixedDataFrame& data, std::span<const LinkSpec> links,
                             const Dictionary& dict) {
  if (dict.rows() != data.rows() || dict.cols() != data.cols())
    throw ShapeError("dictionary and data differ in shape");
  const Matrix G = gradient(Matrix::Zero(data.rows(), data.cols()), data, links);
  LambdaAnchors a{operator_norm(G), 0.0};
  if (dict.size() > 0) a.lambda2_max = dict.adjoint(G).lpNorm<Eigen::Infinity>();
  return a;
}

namespace {

std::vector<double> geometric(double top, int n, double decades) {
  if (top == 0.0) return {0.0};
  std::vector<double> out(static_cast<std::size_t>(n));
  for (int k = 0; k < n; ++k)
    out[static_cast<std::size_t>(k)] = n == 1 ? top : top * std::pow(10.0, -decades * k / (n - 1));
  return out;
}

}  // namespace

LambdaGrid default_grid(const MixedDataFrame& data, std::span<const LinkSpec> links,
                        const Dictionary& dict, int n1, int n2, double decades) {
  if (n1 < 1 || n2 < 1) throw InvalidInput("grid sizes must be at least 1");
  if (!(decades > 0.0)) throw InvalidInput("grid span must be positive");
  const LambdaAnchors a = lambda_anchors(data, links, dict);
  LambdaGrid g;
  g.lambda1_max = a.lambda1_max;
  g.lambda2_max = a.lambda2_max;
  g.lambda1 = geometric(a.lambda1_max, n1, decades);
  g.lambda2 = geometric(a.lambda2_max, n2, decades);
  g.degenerate = a.lambda1_max == 0.0 || a.lambda2_max == 0.0;
  return g;
}

ScaledLambdas scaled_lambdas(const MixedDataFrame& data, std::span<const LinkSpec> links,
                             const Dictionary& dict, double c1, double c2, double box,
                             UmaxChoice choice) {
  if (!(c1 >= 0.0) || !(c2 >= 0.0)) throw InvalidInput("scaling constants must be nonnegative");
  double sigma_sq = 0.0;
  for (const auto& link : links) sigma_sq = std::max(sigma_sq, link.curvature_bounds(box).sigma_max_sq);
  const MaskStats ms = mask_stats(data);
  const double log_d = std::log(static_cast<double>(data.rows() + data.cols()));
  const DictionaryMetadata meta = dict.metadata();
  const double u = choice == UmaxChoice::Max ? meta.u_max : meta.kappa_sq;
  return {c1 * std::sqrt(sigma_sq) * std::sqrt(ms.beta_hat * log_d), c2 * u * log_d};
}

std::vector<int> assign_folds(const MixedDataFrame& data, int n_folds, std::uint64_t seed, int max_redraws) {
  if (n_folds < 2) throw InvalidInput("cross-validation needs at least 2 folds");
  const auto n_obs = static_cast<std::size_t>(data.observed_count());
  if (n_obs < static_cast<std::size_t>(n_folds)) throw InvalidInput("fewer observed entries than folds");

  std::vector<Eigen::Index> column_of;
  column_of.reserve(n_obs);
  std::vector<long> per_column(static_cast<std::size_t>(data.cols()), 0);
  for (Eigen::Index j = 0; j < data.cols(); ++j)
    for (Eigen::Index i = 0; i < data.rows(); ++i)
      if (data.observed(i, j)) {
        column_of.push_back(j);
        ++per_column[static_cast<std::size_t>(j)];
      }

  std::vector<int> labels(n_obs);
  for (int attempt = 0; attempt <= max_redraws; ++attempt) {
    std::mt19937_64 rng(seed + static_cast<std::uint64_t>(attempt) * 0x9E3779B97F4A7C15ULL);
    for (std::size_t k = 0; k < n_obs; ++k) labels[k] = static_cast<int>(k % static_cast<std::size_t>(n_folds));
    for (std::size_t k = n_obs - 1; k > 0; --k) {
      std::uniform_int_distribution<std::size_t> pick(0, k);
      std::swap(labels[k], labels[pick(rng)]);
    }
    // held[f][j]: cells of column j in fold f
    std::vector<long> held(static_cast<std::size_t>(n_folds) * per_column.size(), 0);
    for (std::size_t k = 0; k < n_obs; ++k)
      ++held[static_cast<std::size_t>(labels[k]) * per_column.size() + static_cast<std::size_t>(column_of[k])];
    bool ok = true;
    for (int f = 0; f < n_folds && ok; ++f)
      for (std::size_t j = 0; j < per_column.size() && ok; ++j)
        if (per_column[j] > 0 && held[static_cast<std::size_t>(f) * per_column.size() + j] == per_column[j])
          ok = false;
    if (ok) return labels;
  }
  throw InvalidInput("could not draw " + std::to_string(n_folds) + " folds leaving every column observed in " +
                     "training after " + std::to_string(max_redraws) + " redraws");
}

double heldout_error(const Matrix& X_hat, const MixedDataFrame& data, std::span<const LinkSpec> links,
                     const Mask& heldout, TypeBreakdown* breakdown) {
  if (X_hat.rows() != data.rows() || X_hat.cols() != data.cols() || heldout.rows() != data.rows() ||
      heldout.cols() != data.cols())
    throw ShapeError("held-out error inputs differ in shape");
  const Matrix mean = predicted_means(X_hat, links);
  TypeBreakdown b;
  double sse = 0.0;
  long n = 0;
  for (Eigen::Index j = 0; j < data.cols(); ++j) {
    const ColumnType type = data.column(j).type;
    for (Eigen::Index i = 0; i < data.rows(); ++i) {
      if (!heldout(i, j)) continue;
      const double y = data.value(i, j);
      const double mu = mean(i, j);
      const double e2 = (y - mu) * (y - mu);
      sse += e2;
      ++n;
      switch (type) {
        case ColumnType::Numeric:
          b.numeric_mse += e2;
          ++b.numeric_n;
          break;
        case ColumnType::Binary:
          b.binary_mse += e2;
          b.binary_misclassification += ((mu >= 0.5) != (y == 1.0)) ? 1.0 : 0.0;
          ++b.binary_n;
          break;
        case ColumnType::Count: {
          b.count_mse += e2;
          const double m = std::max(mu, 1e-300);
          b.count_deviance += 2.0 * ((y > 0.0 ? y * std::log(y / m) : 0.0) - (y - m));
          ++b.count_n;
          break;
        }
      }
    }
  }
  if (n == 0) throw InvalidInput("no held-out cells");
  if (breakdown) *breakdown = b;
  return sse / static_cast<double>(n);
}

namespace {

void accumulate(TypeBreakdown& into, const TypeBreakdown& b) {
  into.numeric_mse += b.numeric_mse;
  into.binary_mse += b.binary_mse;
  into.binary_misclassification += b.binary_misclassification;
  into.count_mse += b.count_mse;
  into.count_deviance += b.count_deviance;
  into.numeric_n += b.numeric_n;
  into.binary_n += b.binary_n;
  into.count_n += b.count_n;
}

void normalize(TypeBreakdown& b) {
  auto div = [](double& v, long n) { v = n > 0 ? v / static_cast<double>(n) : 0.0; };
  div(b.numeric_mse, b.numeric_n);
  div(b.binary_mse, b.binary_n);
  div(b.binary_misclassification, b.binary_n);
  div(b.count_mse, b.count_n);
  div(b.count_deviance, b.count_n);
}

nlohmann::json breakdown_json(const TypeBreakdown& b) {
  return {{"numeric_mse", b.numeric_mse},
          {"numeric_n", b.numeric_n},
          {"binary_mse", b.binary_mse},
          {"binary_misclassification", b.binary_misclassification},
          {"binary_n", b.binary_n},
          {"count_mse", b.count_mse},
          {"count_deviance", b.count_deviance},
          {"count_n", b.count_n}};
}

}  // namespace

CVReport cross_validate(const MixedDataFrame& data, std::span<const LinkSpec> links, const Dictionary& dict,
                        const LambdaGrid& grid, int n_folds, std::uint64_t seed, const SolverConfig& config,
                        int threads) {
  if (grid.lambda1.empty() || grid.lambda2.empty()) throw InvalidInput("empty penalty grid");
  config.validate();
  const std::vector<int> labels = assign_folds(data, n_folds, seed);

  const std::size_t n1 = grid.lambda1.size(), n2 = grid.lambda2.size();
  const std::size_t n_cells = n1 * n2;
  std::vector<std::vector<double>> errors(static_cast<std::size_t>(n_folds), std::vector<double>(n_cells));
  std::vector<std::vector<TypeBreakdown>> parts(static_cast<std::size_t>(n_folds),
                                                std::vector<TypeBreakdown>(n_cells));

  parallel_for(static_cast<std::size_t>(n_folds), threads, [&](std::size_t f) {
    Mask train = data.mask();
    Mask held = Mask::Zero(data.rows(), data.cols());
    std::size_t k = 0;
    for (Eigen::Index j = 0; j < data.cols(); ++j)
      for (Eigen::Index i = 0; i < data.rows(); ++i)
        if (data.observed(i, j)) {
          if (labels[k] == static_cast<int>(f)) {
            train(i, j) = 0;
            held(i, j) = 1;
          }
          ++k;
        }
    if ((train.array() * held.array()).cast<int>().sum() != 0)
      throw NumericError("training and held-out cells overlap");
    const MixedDataFrame part = data.restricted(train);

    std::optional<WarmStart> row_start, warm;
    for (std::size_t a = 0; a < n1; ++a) {
      warm = row_start;
      for (std::size_t b = 0; b < n2; ++b) {
        SolverConfig c = config;
        c.lambda1 = grid.lambda1[a];
        c.lambda2 = grid.lambda2[b];
        const ModelFit m = fit(part, links, dict, c, warm);
        warm = WarmStart{m.alpha_hat, m.L_hat};
        if (b == 0) row_start = warm;
        const std::size_t cell = a * n2 + b;
        errors[f][cell] = heldout_error(m.X_hat, data, links, held, &parts[f][cell]);
      }
    }
  });

  CVReport report;
  report.n_folds = n_folds;
  report.seed = seed;
  report.lambda1_max = grid.lambda1_max;
  report.lambda2_max = grid.lambda2_max;
  report.config = config;
  for (std::size_t a = 0; a < n1; ++a)
    for (std::size_t b = 0; b < n2; ++b) {
      const std::size_t cell = a * n2 + b;
      CVCell c;
      c.lambda1 = grid.lambda1[a];
      c.lambda2 = grid.lambda2[b];
      for (int f = 0; f < n_folds; ++f) {
        c.fold_errors.push_back(errors[static_cast<std::size_t>(f)][cell]);
        accumulate(c.breakdown, parts[static_cast<std::size_t>(f)][cell]);
      }
      normalize(c.breakdown);
      c.mean_error = std::accumulate(c.fold_errors.begin(), c.fold_errors.end(), 0.0) / n_folds;
      double ss = 0.0;
      for (double e : c.fold_errors) ss += (e - c.mean_error) * (e - c.mean_error);
      c.sd_error = std::sqrt(ss / (n_folds - 1));
      report.cells.push_back(std::move(c));
    }
  for (std::size_t i = 1; i < report.cells.size(); ++i)
    if (report.cells[i].mean_error < report.cells[report.chosen].mean_error) report.chosen = i;
  return report;
}

nlohmann::json cv_report_json(const CVReport& report) {
  nlohmann::json cells = nlohmann::json::array();
  for (const auto& c : report.cells)
    cells.push_back({{"lambda1", c.lambda1},
                     {"lambda2", c.lambda2},
                     {"fold_errors", c.fold_errors},
                     {"mean_error", c.mean_error},
                     {"sd_error", c.sd_error},
                     {"breakdown", breakdown_json(c.breakdown)}});
  const CVCell& best = report.best();
  return {{"cells", cells},
          {"chosen", {{"lambda1", best.lambda1}, {"lambda2", best.lambda2}, {"mean_error", best.mean_error}}},
          {"n_folds", report.n_folds},
          {"seed", report.seed},
          {"lambda1_max", report.lambda1_max},
          {"lambda2_max", report.lambda2_max},
          {"config", to_json(report.config)}};
}

void write_cv_csv(const CVReport& report, std::ostream& out) {
  ResultTable t({"lambda1", "lambda2", "fold", "error"});
  for (const auto& c : report.cells)
    for (std::size_t f = 0; f < c.fold_errors.size(); ++f)
      t.add_row({format_double(c.lambda1), format_double(c.lambda2), std::to_string(f),
                 format_double(c.fold_errors[f])});
  t.write_csv(out);
}

}  // namespace mimi
