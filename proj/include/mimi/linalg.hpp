#pragma once

#include <cstdint>

#include "mimi/types.hpp"

namespace mimi {

/// SVD backend selection. Matrices whose smaller side is at most
/// `full_svd_limit` get an exact thin SVD; larger ones use a randomized range
/// finder with `oversampling` extra columns, grown until the spectrum below
/// the threshold is reached or `rank_cap` (0 = no cap) is hit.
struct SvdOptions {
  Eigen::Index full_svd_limit = 200;
  Eigen::Index oversampling = 10;
  Eigen::Index rank_cap = 0;
  int power_iterations = 2;
  std::uint64_t seed = 0x5eedULL;
};

struct ThinSvd {
  Matrix U;
  Vector sigma;  // descending
  Matrix V;
};

ThinSvd thin_svd(const Matrix& A);
Vector singular_values(const Matrix& A);
double nuclear_norm(const Matrix& A);
double operator_norm(const Matrix& A);
/// Number of singular values above rel_tol·σ_max.
Eigen::Index numerical_rank(const Matrix& A, double rel_tol = 1e-7);

/// Result of soft-thresholding the singular values: value = U·diag(σ−λ)₊·Vᵀ.
struct Thresholded {
  Matrix value;
  Vector shrunk;  // the positive (σ_i − λ) values
  Eigen::Index rank() const { return shrunk.size(); }
  double nuclear_norm() const { return shrunk.sum(); }
};

Thresholded singular_value_threshold(const Matrix& A, double lambda,
                                     const SvdOptions& options = {},
                                     Eigen::Index rank_hint = 0);

}  // namespace mimi
