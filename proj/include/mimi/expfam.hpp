#pragma once

#include <span>
#include <vector>

#include "mimi/types.hpp"

namespace mimi {

class MixedDataFrame;

enum class LinkKind { Gaussian, Bernoulli, Poisson };

/// Lower and upper bounds of g'' over the box [-box_radius, box_radius].
struct CurvatureBounds {
  double sigma_min_sq;
  double sigma_max_sq;
  double box_radius;
};

/// One canonical exponential-family member, identified by its log-partition
/// function g. The mean of an observation with natural parameter x is g'(x).
///
///   Gaussian(σ²):  g(x) = σ²x²/2
///   Bernoulli:     g(x) = log(1 + eˣ)
///   Poisson(a):    g(x) = exp(a·x)
class LinkSpec {
 public:
  static LinkSpec gaussian(double sigma2 = 1.0);
  static LinkSpec bernoulli();
  static LinkSpec poisson(double rate_scale = 1.0);

  LinkKind kind() const noexcept { return kind_; }
  double sigma2() const noexcept { return sigma2_; }
  double rate_scale() const noexcept { return rate_scale_; }

  double g(double x) const;
  double gprime(double x) const;
  double gsecond(double x) const;

  /// Exact extrema of g'' over [-radius, radius].
  CurvatureBounds curvature_bounds(double radius) const;

  bool operator==(const LinkSpec&) const = default;

 private:
  LinkSpec(LinkKind kind, double sigma2, double rate_scale)
      : kind_(kind), sigma2_(sigma2), rate_scale_(rate_scale) {}

  LinkKind kind_;
  double sigma2_;
  double rate_scale_;
};

using Links = std::vector<LinkSpec>;

/// a·x above this makes exp(a·x) overflow-prone; the Poisson link refuses it.
inline constexpr double kPoissonExponentLimit = 700.0;

/// Σ_{observed} −Y_ij·X_ij + g_j(X_ij).
double quasi_loglik_neg(const Matrix& X, const MixedDataFrame& data,
                        std::span<const LinkSpec> links);

/// Ω_ij·(g_j'(X_ij) − Y_ij); zero at unobserved entries.
Matrix gradient(const Matrix& X, const MixedDataFrame& data,
                std::span<const LinkSpec> links);

/// Ω_ij·g_j''(X_ij)/2.
Matrix curvature_weights(const Matrix& X, const MixedDataFrame& data,
                         std::span<const LinkSpec> links);

/// (Y_ij − g_j'(X_ij))/g_j''(X_ij) at observed entries, 0 elsewhere.
/// Throws NumericError when g'' drops below `curvature_floor`.
Matrix working_responses(const Matrix& X, const MixedDataFrame& data,
                         std::span<const LinkSpec> links,
                         double curvature_floor = 1e-10);

/// Entrywise mean g_j'(X_ij) for every cell, observed or not.
Matrix predicted_means(const Matrix& X, std::span<const LinkSpec> links);

}  // namespace mimi
