#include <doctest.h>

#include <random>

#include <Eigen/Eigenvalues>

#include "pnmm/spatial.hpp"
#include "support.hpp"

using namespace pnmm;
using pnmm::test::random_matrix;

namespace {

// Explicit 3N x N forward-difference matrix.
Matrix dense_s(GridDims d) {
  const Index N = d.voxels();
  Matrix S = Matrix::Zero(3 * N, N);
  for (int z = 0; z < d.nz; ++z)
    for (int y = 0; y < d.ny; ++y)
      for (int x = 0; x < d.nx; ++x) {
        const Index n = d.index(x, y, z);
        if (x + 1 < d.nx) {
          S(n, d.index(x + 1, y, z)) += 1.0;
          S(n, n) -= 1.0;
        }
        if (y + 1 < d.ny) {
          S(N + n, d.index(x, y + 1, z)) += 1.0;
          S(N + n, n) -= 1.0;
        }
        if (z + 1 < d.nz) {
          S(2 * N + n, d.index(x, y, z + 1)) += 1.0;
          S(2 * N + n, n) -= 1.0;
        }
      }
  return S;
}

}  // namespace

TEST_SUITE("spatial") {

TEST_CASE("constant images have zero differences") {
  const SpatialOperator S({5, 4, 3});
  CHECK(S.apply(Vector::Constant(60, 2.5)).isZero(0.0));
}

TEST_CASE("apply and transpose match the dense operator") {
  std::mt19937_64 rng(1);
  for (GridDims d : {GridDims{1, 1, 1}, GridDims{4, 1, 1}, GridDims{3, 4, 1}, GridDims{3, 2, 5}}) {
    const SpatialOperator op(d);
    const Matrix S = dense_s(d);
    const Vector x = random_matrix(rng, d.voxels(), 1, -1, 1);
    const Vector y = random_matrix(rng, 3 * d.voxels(), 1, -1, 1);
    CHECK((op.apply(x) - S * x).norm() <= 1e-12 * std::max(1.0, x.norm()));
    CHECK((op.apply_transpose(y) - S.transpose() * y).norm() <= 1e-12 * std::max(1.0, y.norm()));
    CHECK((op.gram_apply(x) - S.transpose() * (S * x)).norm() <= 1e-12 * std::max(1.0, x.norm()));

    const Matrix A = random_matrix(rng, 3, d.voxels(), 0, 1);
    const Matrix G = op.gram_apply_rows(A);
    CHECK((G - A * S.transpose() * S).norm() <= 1e-12 * std::max(1.0, A.norm()));
    CHECK(op.penalty(A) == doctest::Approx(0.5 * (S * A.transpose()).squaredNorm()).epsilon(1e-12));
  }
}

TEST_CASE("adjoint identity on random vectors") {
  std::mt19937_64 rng(2);
  const SpatialOperator op({8, 7, 6});
  for (int t = 0; t < 50; ++t) {
    const Vector x = random_matrix(rng, op.voxels(), 1, -1, 1);
    const Vector y = random_matrix(rng, 3 * op.voxels(), 1, -1, 1);
    const double lhs = op.apply(x).dot(y), rhs = x.dot(op.apply_transpose(y));
    CHECK(std::abs(lhs - rhs) <= 1e-12 * std::max(1.0, std::abs(lhs)));
  }
}

TEST_CASE("linearity") {
  std::mt19937_64 rng(3);
  const SpatialOperator op({6, 5, 4});
  const Vector x = random_matrix(rng, 120, 1, -1, 1), y = random_matrix(rng, 120, 1, -1, 1);
  const Vector a = op.apply(x + y), b = op.apply(x) + op.apply(y);
  CHECK((a - b).norm() <= 1e-12 * a.norm());
}

TEST_CASE("gram norm equals the largest eigenvalue of S^T S") {
  for (GridDims d : {GridDims{2, 1, 1}, GridDims{5, 3, 1}, GridDims{4, 4, 4}, GridDims{7, 2, 3}}) {
    const Matrix S = dense_s(d);
    const Eigen::SelfAdjointEigenSolver<Matrix> es(S.transpose() * S);
    CHECK(SpatialOperator(d).gram_norm() == doctest::Approx(es.eigenvalues().maxCoeff()).epsilon(1e-10));
  }
  CHECK(SpatialOperator({1, 1, 1}).gram_norm() == 0.0);
}

}  // TEST_SUITE
