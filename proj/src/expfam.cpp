#include "mimi/expfam.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "mimi/error.hpp"
#include "mimi/mdf.hpp"

namespace mimi {

LinkSpec LinkSpec::gaussian(double sigma2) {
  if (!(sigma2 > 0.0) || !std::isfinite(sigma2))
    throw InvalidInput("Gaussian scale sigma2 must be positive and finite");
  return LinkSpec(LinkKind::Gaussian, sigma2, 1.0);
}

LinkSpec LinkSpec::bernoulli() { return LinkSpec(LinkKind::Bernoulli, 1.0, 1.0); }

LinkSpec LinkSpec::poisson(double rate_scale) {
  if (rate_scale == 0.0 || !std::isfinite(rate_scale))
    throw InvalidInput("Poisson rate scale must be nonzero and finite");
  return LinkSpec(LinkKind::Poisson, 1.0, rate_scale);
}

namespace {

double checked_exponent(double a, double x) {
  const double e = a * x;
  if (e > kPoissonExponentLimit)
    throw NumericError("Poisson natural parameter overflow: a*x = " + std::to_string(e));
  return e;
}

double logistic(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

}  // namespace

double LinkSpec::g(double x) const {
  switch (kind_) {
    case LinkKind::Gaussian:
      return 0.5 * sigma2_ * x * x;
    case LinkKind::Bernoulli:
      // log(1 + eˣ) = x + log(1 + e⁻ˣ) for positive x
      return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
    case LinkKind::Poisson:
      return std::exp(checked_exponent(rate_scale_, x));
  }
  return 0.0;
}

double LinkSpec::gprime(double x) const {
  switch (kind_) {
    case LinkKind::Gaussian:
      return sigma2_ * x;
    case LinkKind::Bernoulli:
      return logistic(x);
    case LinkKind::Poisson:
      return rate_scale_ * std::exp(checked_exponent(rate_scale_, x));
  }
  return 0.0;
}

double LinkSpec::gsecond(double x) const {
  switch (kind_) {
    case LinkKind::Gaussian:
      return sigma2_;
    case LinkKind::Bernoulli: {
      const double p = logistic(x);
      return p * (1.0 - p);
    }
    case LinkKind::Poisson:
      return rate_scale_ * rate_scale_ * std::exp(checked_exponent(rate_scale_, x));
  }
  return 0.0;
}

CurvatureBounds LinkSpec::curvature_bounds(double radius) const {
  if (!(radius >= 0.0)) throw InvalidInput("box radius must be nonnegative");
  switch (kind_) {
    case LinkKind::Gaussian:
      return {sigma2_, sigma2_, radius};
    case LinkKind::Bernoulli:
      // g'' is even and decreasing in |x|
      return {gsecond(radius), 0.25, radius};
    case LinkKind::Poisson: {
      const double lo = gsecond(-std::abs(radius));
      const double hi = gsecond(std::abs(radius));
      return {std::min(lo, hi), std::max(lo, hi), radius};
    }
  }
  return {0.0, 0.0, radius};
}

namespace {

void check_inputs(const Matrix& X, const MixedDataFrame& data, std::span<const LinkSpec> links) {
  if (X.rows() != data.rows() || X.cols() != data.cols())
    throw ShapeError("parameter matrix is " + std::to_string(X.rows()) + "x" +
                     std::to_string(X.cols()) + " but data is " + std::to_string(data.rows()) +
                     "x" + std::to_string(data.cols()));
  if (static_cast<Eigen::Index>(links.size()) != data.cols())
    throw ShapeError("expected one link per column");
  if (!X.allFinite()) throw InvalidInput("parameter matrix has non-finite entries");
}

}  // namespace

double quasi_loglik_neg(const Matrix& X, const MixedDataFrame& data,
                        std::span<const LinkSpec> links) {
  check_inputs(X, data, links);
  double total = 0.0;
  for (Eigen::Index j = 0; j < X.cols(); ++j) {
    const LinkSpec& link = links[static_cast<std::size_t>(j)];
    for (Eigen::Index i = 0; i < X.rows(); ++i) {
      if (!data.observed(i, j)) continue;
      const double x = X(i, j);
      total += -data.observed_value(i, j) * x + link.g(x);
    }
  }
  return total;
}

Matrix gradient(const Matrix& X, const MixedDataFrame& data, std::span<const LinkSpec> links) {
  check_inputs(X, data, links);
  Matrix G = Matrix::Zero(X.rows(), X.cols());
  for (Eigen::Index j = 0; j < X.cols(); ++j) {
    const LinkSpec& link = links[static_cast<std::size_t>(j)];
    for (Eigen::Index i = 0; i < X.rows(); ++i) {
      if (data.observed(i, j)) G(i, j) = link.gprime(X(i, j)) - data.observed_value(i, j);
    }
  }
  return G;
}

Matrix curvature_weights(const Matrix& X, const MixedDataFrame& data,
                         std::span<const LinkSpec> links) {
  check_inputs(X, data, links);
  Matrix W = Matrix::Zero(X.rows(), X.cols());
  for (Eigen::Index j = 0; j < X.cols(); ++j) {
    const LinkSpec& link = links[static_cast<std::size_t>(j)];
    for (Eigen::Index i = 0; i < X.rows(); ++i) {
      if (data.observed(i, j)) W(i, j) = 0.5 * link.gsecond(X(i, j));
    }
  }
  return W;
}

Matrix working_responses(const Matrix& X, const MixedDataFrame& data,
                         std::span<const LinkSpec> links, double curvature_floor) {
  check_inputs(X, data, links);
  Matrix Z = Matrix::Zero(X.rows(), X.cols());
  for (Eigen::Index j = 0; j < X.cols(); ++j) {
    const LinkSpec& link = links[static_cast<std::size_t>(j)];
    for (Eigen::Index i = 0; i < X.rows(); ++i) {
      if (!data.observed(i, j)) continue;
      const double curv = link.gsecond(X(i, j));
      if (curv < curvature_floor)
        throw NumericError("curvature " + std::to_string(curv) + " below floor at entry (" +
                           std::to_string(i) + ", " + std::to_string(j) + ")");
      Z(i, j) = (data.observed_value(i, j) - link.gprime(X(i, j))) / curv;
    }
  }
  return Z;
}

Matrix predicted_means(const Matrix& X, std::span<const LinkSpec> links) {
  if (static_cast<Eigen::Index>(links.size()) != X.cols())
    throw ShapeError("expected one link per column");
  Matrix out(X.rows(), X.cols());
  for (Eigen::Index j = 0; j < X.cols(); ++j) {
    const LinkSpec& link = links[static_cast<std::size_t>(j)];
    for (Eigen::Index i = 0; i < X.rows(); ++i) out(i, j) = link.gprime(X(i, j));
  }
  return out;
}

}  // namespace mimi
