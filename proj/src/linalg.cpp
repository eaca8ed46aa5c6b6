#include "mimi/linalg.hpp"

#include <algorithm>
#include <random>

#include <Eigen/QR>
#include <Eigen/SVD>

#include "mimi/error.hpp"

namespace mimi {

namespace {

void require_finite(const Matrix& A) {
  if (!A.allFinite()) throw InvalidInput("SVD of a matrix with non-finite entries");
}

}  // namespace

ThinSvd thin_svd(const Matrix& A) {
  require_finite(A);
  Eigen::BDCSVD<Matrix> svd(A, Eigen::ComputeThinU | Eigen::ComputeThinV);
  if (svd.info() != Eigen::Success) throw NumericError("SVD failed to converge");
  return {svd.matrixU(), svd.singularValues(), svd.matrixV()};
}

Vector singular_values(const Matrix& A) {
  require_finite(A);
  if (A.size() == 0) return Vector();
  Eigen::BDCSVD<Matrix> svd(A);
  if (svd.info() != Eigen::Success) throw NumericError("SVD failed to converge");
  return svd.singularValues();
}

double nuclear_norm(const Matrix& A) { return A.size() == 0 ? 0.0 : singular_values(A).sum(); }

double operator_norm(const Matrix& A) {
  if (A.size() == 0) return 0.0;
  const Vector s = singular_values(A);
  return s.size() ? s(0) : 0.0;
}

Eigen::Index numerical_rank(const Matrix& A, double rel_tol) {
  if (A.size() == 0) return 0;
  const Vector s = singular_values(A);
  if (s.size() == 0 || s(0) == 0.0) return 0;
  return (s.array() > rel_tol * s(0)).count();
}

namespace {

Thresholded shrink(const Matrix& U, const Vector& sigma, const Matrix& V, double lambda,
                   Eigen::Index rows, Eigen::Index cols) {
  Eigen::Index keep = 0;
  while (keep < sigma.size() && sigma(keep) > lambda) ++keep;
  Thresholded out;
  out.shrunk = (sigma.head(keep).array() - lambda).matrix();
  if (keep == 0) {
    out.value = Matrix::Zero(rows, cols);
  } else {
    out.value = U.leftCols(keep) * out.shrunk.asDiagonal() * V.leftCols(keep).transpose();
  }
  return out;
}

Thresholded randomized_threshold(const Matrix& A, double lambda, const SvdOptions& opt,
                                 Eigen::Index rank_hint) {
  const Eigen::Index min_dim = std::min(A.rows(), A.cols());
  const Eigen::Index cap = opt.rank_cap > 0 ? std::min(opt.rank_cap, min_dim) : min_dim;
  Eigen::Index k = std::min(cap, std::max<Eigen::Index>(rank_hint, 1) + opt.oversampling);
  std::mt19937_64 rng(opt.seed);
  std::normal_distribution<double> normal;
  while (true) {
    Matrix omega(A.cols(), k);
    for (Eigen::Index c = 0; c < omega.cols(); ++c)
      for (Eigen::Index r = 0; r < omega.rows(); ++r) omega(r, c) = normal(rng);
    Matrix Y = A * omega;
    Eigen::HouseholderQR<Matrix> qr(Y);
    Matrix Q = qr.householderQ() * Matrix::Identity(A.rows(), k);
    for (int q = 0; q < opt.power_iterations; ++q) {
      Matrix Z = A.transpose() * Q;
      Eigen::HouseholderQR<Matrix> qz(Z);
      Matrix Qz = qz.householderQ() * Matrix::Identity(A.cols(), k);
      Y = A * Qz;
      Eigen::HouseholderQR<Matrix> qy(Y);
      Q = qy.householderQ() * Matrix::Identity(A.rows(), k);
    }
    const Matrix B = Q.transpose() * A;
    Eigen::BDCSVD<Matrix> svd(B, Eigen::ComputeThinU | Eigen::ComputeThinV);
    if (svd.info() != Eigen::Success) throw NumericError("SVD failed to converge");
    const Vector& s = svd.singularValues();
    const bool reached = s.size() == 0 || s(s.size() - 1) <= lambda;
    if (reached || k >= cap) {
      const Matrix U = Q * svd.matrixU();
      return shrink(U, s, svd.matrixV(), lambda, A.rows(), A.cols());
    }
    k = std::min(cap, 2 * k);
  }
}

}  // namespace

Thresholded singular_value_threshold(const Matrix& A, double lambda, const SvdOptions& options,
                                     Eigen::Index rank_hint) {
  if (!(lambda >= 0.0)) throw InvalidInput("threshold must be nonnegative");
  require_finite(A);
  if (A.size() == 0) return {A, Vector()};
  if (std::min(A.rows(), A.cols()) <= options.full_svd_limit) {
    const ThinSvd svd = thin_svd(A);
    return shrink(svd.U, svd.sigma, svd.V, lambda, A.rows(), A.cols());
  }
  return randomized_threshold(A, lambda, options, rank_hint);
}

}  // namespace mimi
