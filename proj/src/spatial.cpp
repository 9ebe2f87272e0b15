#include "pnmm/spatial.hpp"

#include <cmath>
#include <numbers>

#include "pnmm/errors.hpp"

namespace pnmm {

SpatialOperator::SpatialOperator(GridDims dims) : dims_(dims) {
  if (dims.nx < 1 || dims.ny < 1 || dims.nz < 1) throw DomainError("spatial operator: grid dims must be positive");
}

Vector SpatialOperator::apply(const Vector& x) const {
  const Index N = voxels();
  if (x.size() != N) throw DomainError("spatial operator: length mismatch");
  Vector y = Vector::Zero(3 * N);
  const Index sx = 1, sy = dims_.nx, sz = Index(dims_.nx) * dims_.ny;
  for (int z = 0; z < dims_.nz; ++z)
    for (int yy = 0; yy < dims_.ny; ++yy)
      for (int xx = 0; xx < dims_.nx; ++xx) {
        const Index n = dims_.index(xx, yy, z);
        if (xx + 1 < dims_.nx) y[n] = x[n + sx] - x[n];
        if (yy + 1 < dims_.ny) y[N + n] = x[n + sy] - x[n];
        if (z + 1 < dims_.nz) y[2 * N + n] = x[n + sz] - x[n];
      }
  return y;
}

Vector SpatialOperator::apply_transpose(const Vector& y) const {
  const Index N = voxels();
  if (y.size() != 3 * N) throw DomainError("spatial operator: length mismatch");
  Vector x = Vector::Zero(N);
  const Index sx = 1, sy = dims_.nx, sz = Index(dims_.nx) * dims_.ny;
  for (int z = 0; z < dims_.nz; ++z)
    for (int yy = 0; yy < dims_.ny; ++yy)
      for (int xx = 0; xx < dims_.nx; ++xx) {
        const Index n = dims_.index(xx, yy, z);
        if (xx + 1 < dims_.nx) {
          x[n + sx] += y[n];
          x[n] -= y[n];
        }
        if (yy + 1 < dims_.ny) {
          x[n + sy] += y[N + n];
          x[n] -= y[N + n];
        }
        if (z + 1 < dims_.nz) {
          x[n + sz] += y[2 * N + n];
          x[n] -= y[2 * N + n];
        }
      }
  return x;
}

Vector SpatialOperator::gram_apply(const Vector& x) const {
  const Index N = voxels();
  if (x.size() != N) throw DomainError("spatial operator: length mismatch");
  Vector out(N);
  const Index sx = 1, sy = dims_.nx, sz = Index(dims_.nx) * dims_.ny;
  // Graph Laplacian of the lattice: each voxel gathers from its neighbours.
#pragma omp parallel for schedule(static)
  for (int z = 0; z < dims_.nz; ++z)
    for (int yy = 0; yy < dims_.ny; ++yy)
      for (int xx = 0; xx < dims_.nx; ++xx) {
        const Index n = dims_.index(xx, yy, z);
        double acc = 0.0;
        if (xx > 0) acc += x[n] - x[n - sx];
        if (xx + 1 < dims_.nx) acc += x[n] - x[n + sx];
        if (yy > 0) acc += x[n] - x[n - sy];
        if (yy + 1 < dims_.ny) acc += x[n] - x[n + sy];
        if (z > 0) acc += x[n] - x[n - sz];
        if (z + 1 < dims_.nz) acc += x[n] - x[n + sz];
        out[n] = acc;
      }
  return out;
}

Matrix SpatialOperator::gram_apply_rows(const Matrix& A) const {
  Matrix out(A.rows(), A.cols());
  for (Index k = 0; k < A.rows(); ++k) out.row(k) = gram_apply(A.row(k).transpose()).transpose();
  return out;
}

double SpatialOperator::penalty(const Matrix& A) const {
  if (A.cols() != voxels()) throw DomainError("spatial operator: length mismatch");
  double total = 0.0;
  const Index sx = 1, sy = dims_.nx, sz = Index(dims_.nx) * dims_.ny;
  for (Index k = 0; k < A.rows(); ++k) {
    for (int z = 0; z < dims_.nz; ++z)
      for (int yy = 0; yy < dims_.ny; ++yy)
        for (int xx = 0; xx < dims_.nx; ++xx) {
          const Index n = dims_.index(xx, yy, z);
          const double v = A(k, n);
          if (xx + 1 < dims_.nx) total += (A(k, n + sx) - v) * (A(k, n + sx) - v);
          if (yy + 1 < dims_.ny) total += (A(k, n + sy) - v) * (A(k, n + sy) - v);
          if (z + 1 < dims_.nz) total += (A(k, n + sz) - v) * (A(k, n + sz) - v);
        }
  }
  return 0.5 * total;
}

double SpatialOperator::gram_norm() const {
  auto axis = [](int n) {
    if (n < 2) return 0.0;
    const double s = std::sin(std::numbers::pi * (n - 1) / (2.0 * n));
    return 4.0 * s * s;
  };
  return axis(dims_.nx) + axis(dims_.ny) + axis(dims_.nz);
}

}  // namespace pnmm
