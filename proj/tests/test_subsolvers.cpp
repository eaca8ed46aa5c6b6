#include <doctest.h>

#include <random>

#include "mimi/error.hpp"
#include "mimi/subsolvers.hpp"
#include "oracles.hpp"

using namespace mimi;

namespace {

Matrix gauss(std::mt19937_64& rng, Eigen::Index r, Eigen::Index c, double scale = 1.0) {
  std::normal_distribution<double> n(0.0, scale);
  Matrix m(r, c);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = n(rng);
  return m;
}

Matrix positive(std::mt19937_64& rng, Eigen::Index r, Eigen::Index c, double lo, double hi) {
  std::uniform_real_distribution<double> u(lo, hi);
  Matrix m(r, c);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = u(rng);
  return m;
}

std::vector<Cell> all_cells(Eigen::Index m1, Eigen::Index m2) {
  std::vector<Cell> c;
  for (Eigen::Index j = 0; j < m2; ++j)
    for (Eigen::Index i = 0; i < m1; ++i) c.emplace_back(i, j);
  return c;
}

}  // namespace

TEST_SUITE("subsolvers") {
  TEST_CASE("separable least squares") {
    std::mt19937_64 rng(1);
    const auto d = Dictionary::corruptions(4, 3, all_cells(4, 3));
    WeightedLassoProblem p{&d, Matrix::Ones(4, 3), gauss(rng, 4, 3), 1e-8, Vector::Zero(12), 0.0};
    const auto r = solve_weighted_lasso(p);
    CHECK(r.converged);
    for (Eigen::Index k = 0; k < 12; ++k)
      CHECK(std::abs(r.alpha(k) - p.targets(d.cells()[static_cast<std::size_t>(k)].first,
                                            d.cells()[static_cast<std::size_t>(k)].second)) <= 1e-4);
  }

  TEST_CASE("full shrinkage") {
    std::mt19937_64 rng(2);
    const auto d = Dictionary::row_column(5, 4);
    WeightedLassoProblem p{&d, positive(rng, 5, 4, 0.1, 1.0), gauss(rng, 5, 4), 0.5, Vector::Zero(9), 0.0};
    p.penalty = 2.0 * d.adjoint(p.weights.cwiseProduct(p.targets)).cwiseAbs().maxCoeff() + 1e-9;
    CHECK(solve_weighted_lasso(p).alpha.isZero(0.0));
  }

  TEST_CASE("two-atom problems against grid search") {
    std::mt19937_64 rng(3);
    for (int rep = 0; rep < 5; ++rep) {
      const auto d = Dictionary::custom(3, 3, {{{0, 0, 1.0}, {1, 1, 0.5}, {2, 0, -0.7}},
                                               {{0, 0, 0.4}, {2, 2, 1.0}, {1, 2, 0.9}}});
      WeightedLassoProblem p{&d, positive(rng, 3, 3, 0.2, 1.0), gauss(rng, 3, 3), 0.05,
                             gauss(rng, 2, 1, 0.5), std::uniform_real_distribution<double>(0.0, 1.0)(rng)};
      const auto r = solve_weighted_lasso(p);
      const auto grid = oracle::lasso_grid_search(p);
      const double f = weighted_lasso_objective(p, r.alpha);
      CHECK(std::abs(f - grid.value) <= 1e-5);
      CHECK(std::abs(r.alpha(0) - grid.a0) + std::abs(r.alpha(1) - grid.a1) <= 1e-3);
    }
  }

  TEST_CASE("KKT conditions on random problems") {
    std::mt19937_64 rng(4);
    for (int rep = 0; rep < 30; ++rep) {
      const Eigen::Index m1 = 4 + rep % 7, m2 = 3 + rep % 4;
      const auto d = oracle::random_dictionary(rng, m1, m2);
      if (d.size() == 0) continue;
      WeightedLassoProblem p{&d, positive(rng, m1, m2, 0.0, 1.0), gauss(rng, m1, m2), 0.01,
                             gauss(rng, d.size(), 1), 0.5};
      const auto r = solve_weighted_lasso(p, {.tol = 1e-9});
      CHECK(weighted_lasso_kkt_residual(p, r.alpha) <= 1e-9);
      // direct subgradient check
      const Matrix R = p.targets - d.apply(r.alpha);
      const Vector grad = -2.0 * d.adjoint(p.weights.cwiseProduct(R)) + 2.0 * p.ridge * (r.alpha - p.anchor);
      for (Eigen::Index k = 0; k < d.size(); ++k) {
        if (r.alpha(k) != 0.0)
          CHECK(std::abs(grad(k) + p.penalty * (r.alpha(k) > 0 ? 1.0 : -1.0)) <= 1e-8);
        else
          CHECK(std::abs(grad(k)) <= p.penalty + 1e-8);
      }
      const auto warm = solve_weighted_lasso(p, {.tol = 1e-9}, r.alpha);
      CHECK(warm.sweeps <= 2);
    }
  }

  TEST_CASE("lasso errors") {
    const auto d = Dictionary::row_column(3, 3);
    WeightedLassoProblem p{&d, Matrix::Ones(3, 3), Matrix::Ones(3, 3), 0.0, Vector::Zero(6), 0.1};
    CHECK_THROWS_AS(solve_weighted_lasso(p), InvalidInput);
    p.ridge = 1e-3;
    p.anchor = Vector::Zero(5);
    CHECK_THROWS_AS(solve_weighted_lasso(p), ShapeError);
    std::mt19937_64 rng(5);
    p.anchor = Vector::Zero(6);
    p.weights = positive(rng, 3, 3, 0.5, 1.0);
    p.targets = gauss(rng, 3, 3);
    try {
      solve_weighted_lasso(p, {.tol = 1e-15, .max_sweeps = 1});
      FAIL("expected non-convergence");
    } catch (const ConvergenceError& e) {
      CHECK(e.residual() > 0.0);
    }
  }

  TEST_CASE("singular value thresholding") {
    const Matrix D = Vector(Eigen::Vector3d(5, 3, 1)).asDiagonal();
    const Matrix expect = Vector(Eigen::Vector3d(3, 1, 0)).asDiagonal();
    CHECK((soft_threshold_singular_values(D, 2.0) - expect).norm() <= 1e-12);
    std::mt19937_64 rng(6);
    const Matrix A = gauss(rng, 6, 4);
    CHECK((soft_threshold_singular_values(A, 0.0) - A).norm() <= 1e-12);
    CHECK(soft_threshold_singular_values(A, oracle::nuclear_reference(A)).isZero(0.0));
    CHECK((soft_threshold_singular_values(A, 0.7) - oracle::svt_reference(A, 0.7)).norm() <= 1e-10);
    Matrix bad = A;
    bad(0, 0) = NAN;
    CHECK_THROWS(soft_threshold_singular_values(bad, 0.1));
  }

  TEST_CASE("thresholding is nonexpansive") {
    std::mt19937_64 rng(7);
    for (int rep = 0; rep < 50; ++rep) {
      const Matrix A = gauss(rng, 7, 5), B = A + gauss(rng, 7, 5, 0.3);
      const double lam = std::uniform_real_distribution<double>(0.0, 3.0)(rng);
      const Matrix SA = soft_threshold_singular_values(A, lam), SB = soft_threshold_singular_values(B, lam);
      CHECK((SA - SB).norm() <= (A - B).norm() + 1e-12);
      const Vector s = oracle::svt_reference(A, 0.0).jacobiSvd().singularValues();
      CHECK(oracle::nuclear_reference(SA) == doctest::Approx((s.array() - lam).max(0.0).sum()).epsilon(1e-10));
    }
  }

  TEST_CASE("randomized backend agrees with the exact one") {
    std::mt19937_64 rng(8);
    const Matrix A = gauss(rng, 60, 3) * gauss(rng, 3, 40) + gauss(rng, 60, 40, 0.05);
    SvdOptions opt;
    opt.full_svd_limit = 10;
    const Matrix approx = soft_threshold_singular_values(A, 1.0, opt);
    CHECK((approx - oracle::svt_reference(A, 1.0)).norm() <= 1e-8 * A.norm());
  }

  TEST_CASE("uniform weights give one-step SVT") {
    std::mt19937_64 rng(9);
    const Matrix Z = gauss(rng, 6, 5);
    const double c = 0.7, lam = 1.3;
    WeightedNuclearProblem p{Matrix::Constant(6, 5, c), Z, lam};
    const auto r = solve_weighted_nuclear(p);
    CHECK((r.L - oracle::svt_reference(Z, lam / (2 * c))).norm() <= 1e-10);
    p.penalty = 0.0;
    p.weights = positive(rng, 6, 5, 0.1, 1.0);
    CHECK((solve_weighted_nuclear(p, {.tol = 1e-10, .max_iter = 100000}).L - Z).norm() <= 1e-8);
  }

  TEST_CASE("weighted problem against independent oracles") {
    std::mt19937_64 rng(10);
    for (int rep = 0; rep < 3; ++rep) {
      WeightedNuclearProblem p{positive(rng, 5, 4, 0.1, 1.0), gauss(rng, 5, 4), 0.8};
      const auto r = solve_weighted_nuclear(p, {.tol = 1e-13, .max_iter = 1000000});
      const double f = weighted_nuclear_objective(p, r.L);
      CHECK(f == doctest::Approx(oracle::weighted_nuclear_value(p, r.L)).epsilon(1e-12));
      const Matrix admm = oracle::nuclear_admm(p);
      CHECK(std::abs(f - oracle::weighted_nuclear_value(p, admm)) <= 1e-6);
      if (rep == 0) CHECK(f - oracle::nuclear_subgradient(p, 1000000) <= 1e-6);
      const Matrix G = 2.0 * p.weights.cwiseProduct(r.L - p.targets);
      CHECK(G.jacobiSvd().singularValues()(0) <= p.penalty + 1e-5);
    }
  }

  TEST_CASE("EM iterations never increase the objective") {
    std::mt19937_64 rng(11);
    WeightedNuclearProblem p{positive(rng, 8, 6, 0.05, 1.0), gauss(rng, 8, 6), 0.5};
    double prev = weighted_nuclear_objective(p, Matrix::Zero(8, 6));
    Matrix L = Matrix::Zero(8, 6);
    for (int it = 0; it < 50; ++it) {
      L = solve_weighted_nuclear(p, {.tol = 1e-300, .max_iter = 1, .throw_on_max_iter = false}, L).L;
      const double f = weighted_nuclear_objective(p, L);
      CHECK(f <= prev + 1e-12 * std::abs(prev));
      prev = f;
    }
  }

  TEST_CASE("nuclear errors") {
    WeightedNuclearProblem p{Matrix::Zero(3, 3), Matrix::Ones(3, 3), 0.1};
    CHECK_THROWS_AS(solve_weighted_nuclear(p), InvalidInput);
    p.weights = Matrix::Ones(3, 2);
    CHECK_THROWS_AS(solve_weighted_nuclear(p), ShapeError);
    std::mt19937_64 rng(12);
    p.weights = positive(rng, 3, 3, 0.01, 1.0);
    p.targets = gauss(rng, 3, 3);
    try {
      solve_weighted_nuclear(p, {.tol = 1e-15, .max_iter = 1});
      FAIL("expected non-convergence");
    } catch (const ConvergenceError& e) {
      CHECK(e.residual() > 0.0);
    }
  }
}
