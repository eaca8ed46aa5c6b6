#include "mimi/simulate.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <string>

#include "mimi/linalg.hpp"

namespace mimi {

namespace {

// Independent streams of one design seed.
enum Stream : std::uint64_t { kTruth = 1, kNoise = 2, kMask = 3 };

std::mt19937_64 stream(std::uint64_t seed, Stream s) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(s)};
  return std::mt19937_64(seq);
}

const char* to_string(DesignDictionary d) {
  switch (d) {
    case DesignDictionary::GroupEffects:
      return "groups";
    case DesignDictionary::RowColumn:
      return "rowcol";
    case DesignDictionary::Corruptions:
      return "corruptions";
  }
  return "groups";
}

Eigen::Index atom_count(const SimDesign& d) {
  switch (d.dictionary) {
    case DesignDictionary::GroupEffects:
      return static_cast<Eigen::Index>(d.n_groups) * d.m2;
    case DesignDictionary::RowColumn:
      return d.m1 + d.m2;
    case DesignDictionary::Corruptions:
      return d.m1 * d.m2;
  }
  return 0;
}

}  // namespace

void SimDesign::validate() const {
  if (m1 < 1 || m2 < 1) throw InvalidInput("design dimensions must be positive");
  if (dictionary == DesignDictionary::GroupEffects && (n_groups < 1 || n_groups > m1))
    throw InvalidInput("number of groups must lie in [1, m1]");
  if (s < 0 || s > atom_count(*this)) throw InvalidInput("sparsity s exceeds the number of atoms");
  if (r < 0 || r > std::min(m1, m2)) throw InvalidInput("rank r exceeds min(m1, m2)");
  if (!(p_obs > 0.0 && p_obs <= 1.0)) throw InvalidInput("p_obs must lie in (0, 1]");
  if (!(ratio > 0.0) || !std::isfinite(ratio)) throw InvalidInput("ratio must be positive");
  if (!(max_abs > 0.0) || !std::isfinite(max_abs)) throw InvalidInput("max_abs must be positive");
  if (s == 0 && r == 0) throw InvalidInput("design has neither main effects nor interactions");
}

nlohmann::json to_json(const SimDesign& d) {
  return {{"m1", d.m1},
          {"m2", d.m2},
          {"dictionary", to_string(d.dictionary)},
          {"n_groups", d.n_groups},
          {"s", d.s},
          {"r", d.r},
          {"p_obs", d.p_obs},
          {"missing_frac", 1.0 - d.p_obs},
          {"layout", d.layout == ColumnLayout::AllNumeric ? "numeric" : "mixed"},
          {"ratio", d.ratio},
          {"max_abs", d.max_abs},
          {"seed", d.seed}};
}

SimDesign sim_design_from_json(const nlohmann::json& j, SimDesign d) {
  if (!j.is_object()) throw InvalidInput("design must be a JSON object");
  for (const auto& [key, value] : j.items()) {
    if (key == "m1") d.m1 = value.get<Eigen::Index>();
    else if (key == "m2") d.m2 = value.get<Eigen::Index>();
    else if (key == "dictionary") {
      const auto s = value.get<std::string>();
      if (s == "groups") d.dictionary = DesignDictionary::GroupEffects;
      else if (s == "rowcol") d.dictionary = DesignDictionary::RowColumn;
      else if (s == "corruptions") d.dictionary = DesignDictionary::Corruptions;
      else throw InvalidInput("unknown design dictionary '" + s + "'");
    } else if (key == "n_groups") d.n_groups = value.get<int>();
    else if (key == "s") d.s = value.get<Eigen::Index>();
    else if (key == "r") d.r = value.get<Eigen::Index>();
    else if (key == "p_obs") d.p_obs = value.get<double>();
    else if (key == "missing_frac") d.p_obs = 1.0 - value.get<double>();
    else if (key == "layout") {
      const auto s = value.get<std::string>();
      if (s == "numeric") d.layout = ColumnLayout::AllNumeric;
      else if (s == "mixed") d.layout = ColumnLayout::MixedGaussianBernoulli;
      else throw InvalidInput("layout must be 'numeric' or 'mixed'");
    } else if (key == "ratio") d.ratio = value.get<double>();
    else if (key == "max_abs") d.max_abs = value.get<double>();
    else if (key == "seed") d.seed = value.get<std::uint64_t>();
    else throw InvalidInput("unknown design field '" + key + "'");
  }
  d.validate();
  return d;
}

Dictionary design_dictionary(const SimDesign& d) {
  d.validate();
  switch (d.dictionary) {
    case DesignDictionary::GroupEffects: {
      std::vector<int> assignment(static_cast<std::size_t>(d.m1));
      for (Eigen::Index i = 0; i < d.m1; ++i)
        assignment[static_cast<std::size_t>(i)] = static_cast<int>(i * d.n_groups / d.m1);
      return Dictionary::group_effects(d.m1, d.m2, std::move(assignment));
    }
    case DesignDictionary::RowColumn:
      return Dictionary::row_column(d.m1, d.m2);
    case DesignDictionary::Corruptions: {
      std::vector<Cell> cells;
      for (Eigen::Index j = 0; j < d.m2; ++j)
        for (Eigen::Index i = 0; i < d.m1; ++i) cells.emplace_back(i, j);
      return Dictionary::corruptions(d.m1, d.m2, std::move(cells));
    }
  }
  throw InvalidInput("unknown design dictionary");
}

Links design_links(const SimDesign& d) {
  Links links(static_cast<std::size_t>(d.m2), LinkSpec::gaussian());
  if (d.layout == ColumnLayout::MixedGaussianBernoulli)
    for (Eigen::Index j = (d.m2 + 1) / 2; j < d.m2; ++j) links[static_cast<std::size_t>(j)] = LinkSpec::bernoulli();
  return links;
}

GroundTruth gen_ground_truth(const SimDesign& d) {
  const Dictionary dict = design_dictionary(d);
  auto rng = stream(d.seed, kTruth);
  std::normal_distribution<double> normal;
  const Eigen::Index n = dict.size();

  for (int attempt = 0; attempt < 100; ++attempt) {
    GroundTruth t;
    t.alpha = Vector::Zero(n);
    std::vector<Eigen::Index> idx(static_cast<std::size_t>(n));
    std::iota(idx.begin(), idx.end(), Eigen::Index{0});
    for (Eigen::Index k = 0; k < d.s; ++k) {
      std::uniform_int_distribution<Eigen::Index> pick(k, n - 1);
      std::swap(idx[static_cast<std::size_t>(k)], idx[static_cast<std::size_t>(pick(rng))]);
      t.alpha(idx[static_cast<std::size_t>(k)]) = normal(rng);
    }
    Matrix A(d.m1, d.r), B(d.m2, d.r);
    for (Eigen::Index c = 0; c < d.r; ++c)
      for (Eigen::Index i = 0; i < d.m1; ++i) A(i, c) = normal(rng);
    for (Eigen::Index c = 0; c < d.r; ++c)
      for (Eigen::Index j = 0; j < d.m2; ++j) B(j, c) = normal(rng);
    t.L = A * B.transpose();

    Matrix F = dict.apply(t.alpha);
    const double nF = F.norm(), nL = t.L.norm();
    if ((d.s > 0 && nF == 0.0) || (d.r > 0 && nL == 0.0)) continue;
    if (d.s > 0 && d.r > 0) {
      const double c = d.ratio * nL / nF;
      t.alpha *= c;
      F *= c;
    }
    const double top = (F + t.L).lpNorm<Eigen::Infinity>();
    if (top == 0.0) continue;
    const double c = d.max_abs / top;
    t.alpha *= c;
    t.L *= c;
    t.X = dict.apply(t.alpha) + t.L;
    return t;
  }
  throw NumericError("could not draw a nondegenerate ground truth");
}

SimData gen_observations(const Matrix& X0, const SimDesign& d, const Links& links) {
  if (X0.rows() != d.m1 || X0.cols() != d.m2) throw ShapeError("X0 does not match the design");
  if (!X0.allFinite()) throw InvalidInput("X0 must be finite");
  if (static_cast<Eigen::Index>(links.size()) != d.m2) throw ShapeError("expected one link per column");
  auto noise = stream(d.seed, kNoise);
  auto coin = stream(d.seed, kMask);
  std::normal_distribution<double> normal;
  std::uniform_real_distribution<double> unif(0.0, 1.0);

  Matrix Y(d.m1, d.m2);
  Mask M(d.m1, d.m2);
  std::vector<Column> columns;
  for (Eigen::Index j = 0; j < d.m2; ++j) {
    const LinkSpec& link = links[static_cast<std::size_t>(j)];
    Column col{"V" + std::to_string(j + 1), ColumnType::Numeric, link};
    if (link.kind() == LinkKind::Bernoulli) col.type = ColumnType::Binary;
    if (link.kind() == LinkKind::Poisson) col.type = ColumnType::Count;
    columns.push_back(col);
    for (Eigen::Index i = 0; i < d.m1; ++i) {
      const double x = X0(i, j);
      switch (link.kind()) {
        case LinkKind::Gaussian:
          Y(i, j) = link.gprime(x) + std::sqrt(link.sigma2()) * normal(noise);
          break;
        case LinkKind::Bernoulli:
          Y(i, j) = unif(noise) < link.gprime(x) ? 1.0 : 0.0;
          break;
        case LinkKind::Poisson: {
          std::poisson_distribution<long> pois(link.gprime(x));
          Y(i, j) = static_cast<double>(pois(noise));
          break;
        }
      }
      M(i, j) = unif(coin) < d.p_obs ? 1 : 0;
    }
  }
  return {MixedDataFrame(std::move(columns), Y, M), Y};
}

ErrorMetrics error_metrics(const Vector& alpha_hat, const Matrix& L_hat, const Matrix& imputed,
                           const Dictionary& dict, const GroundTruth& truth, const SimData& sim) {
  if (alpha_hat.size() != truth.alpha.size()) throw ShapeError("alpha estimate has the wrong length");
  if (L_hat.rows() != truth.L.rows() || L_hat.cols() != truth.L.cols() || imputed.rows() != truth.L.rows() ||
      imputed.cols() != truth.L.cols())
    throw ShapeError("estimate shapes differ from the truth");
  ErrorMetrics e;
  const Vector da = alpha_hat - truth.alpha;
  e.err_alpha = da.squaredNorm();
  e.err_fU = dict.apply(da).squaredNorm();
  e.err_L = (L_hat - truth.L).squaredNorm();
  double sse = 0.0;
  for (Eigen::Index j = 0; j < imputed.cols(); ++j)
    for (Eigen::Index i = 0; i < imputed.rows(); ++i)
      if (!sim.data.observed(i, j)) {
        const double r = imputed(i, j) - sim.complete(i, j);
        sse += r * r;
        ++e.n_hidden;
      }
  e.imputation_mse = e.n_hidden ? sse / static_cast<double>(e.n_hidden) : 0.0;
  e.imputation_error = std::sqrt(sse);
  return e;
}

ErrorMetrics error_metrics(const ModelFit& fit, const Dictionary& dict, std::span<const LinkSpec> links,
                           const GroundTruth& truth, const SimData& sim) {
  return error_metrics(fit.alpha_hat, fit.L_hat, predicted_means(fit.X_hat, links), dict, truth, sim);
}

Matrix soft_impute(const Matrix& R, const Mask& mask, double lambda, const SoftImputeOptions& options) {
  if (mask.rows() != R.rows() || mask.cols() != R.cols()) throw ShapeError("mask and residuals differ in shape");
  if (!(lambda >= 0.0)) throw InvalidInput("soft-impute penalty must be nonnegative");
  const Matrix observed = mask.cast<double>();
  const Matrix target = R.cwiseProduct(observed);
  if (!target.allFinite()) throw InvalidInput("observed residuals must be finite");
  Matrix L = Matrix::Zero(R.rows(), R.cols());
  Eigen::Index rank_hint = 0;
  for (int it = 0; it < options.max_iter; ++it) {
    const Matrix filled = target + (1.0 - observed.array()).matrix().cwiseProduct(L);
    Thresholded next = singular_value_threshold(filled, 0.5 * lambda, options.svd, rank_hint);
    const double change = (next.value - L).norm();
    const double scale = std::max(1.0, L.norm());
    L = std::move(next.value);
    rank_hint = next.rank();
    if (change <= options.tol * scale) break;
  }
  return L;
}

ModelFit baseline_group_mean_then_svt(const MixedDataFrame& data, const Dictionary& dict, double lambda,
                                      const SoftImputeOptions& options) {
  if (dict.kind() != DictionaryKind::GroupEffects)
    throw InvalidInput("the group-mean baseline needs a group-effects dictionary");
  if (dict.rows() != data.rows() || dict.cols() != data.cols()) throw ShapeError("dictionary and data differ in shape");
  const Eigen::Index m2 = data.cols();
  ModelFit out;
  out.alpha_hat = Vector::Zero(dict.size());
  const auto& groups = dict.group_members();
  for (std::size_t h = 0; h < groups.size(); ++h)
    for (Eigen::Index q = 0; q < m2; ++q) {
      double sum = 0.0;
      long n = 0;
      for (Eigen::Index i : groups[h])
        if (data.observed(i, q)) {
          sum += data.observed_value(i, q);
          ++n;
        }
      out.alpha_hat(static_cast<Eigen::Index>(h) * m2 + q) = n ? sum / static_cast<double>(n) : 0.0;
    }
  const Matrix F = dict.apply(out.alpha_hat);
  const Matrix R = data.filled(0.0) - F;
  out.L_hat = soft_impute(R, data.mask(), lambda, options);
  out.X_hat = F + out.L_hat;
  out.converged = true;
  out.config.lambda1 = lambda;
  return out;
}

Matrix column_mean_impute(const MixedDataFrame& data) {
  Matrix out(data.rows(), data.cols());
  for (Eigen::Index j = 0; j < data.cols(); ++j) {
    double sum = 0.0;
    long n = 0;
    for (Eigen::Index i = 0; i < data.rows(); ++i)
      if (data.observed(i, j)) {
        sum += data.observed_value(i, j);
        ++n;
      }
    out.col(j).setConstant(n ? sum / static_cast<double>(n) : 0.0);
  }
  return out;
}

}  // namespace mimi
