#pragma once

#include "pnmm/tac_model.hpp"

namespace pnmm {

// First-order forward differences along x, y and z of an image on the voxel
// lattice. Output is 3N long (x block, y block, z block); the difference at
// the last index along an axis is zero (replicate edge).
class SpatialOperator {
 public:
  explicit SpatialOperator(GridDims dims);

  const GridDims& dims() const { return dims_; }
  Index voxels() const { return dims_.voxels(); }

  Vector apply(const Vector& x) const;
  Vector apply_transpose(const Vector& y) const;
  // S^T S x without materializing S x.
  Vector gram_apply(const Vector& x) const;

  // Row-wise over a K x N matrix: returns A S^T S.
  Matrix gram_apply_rows(const Matrix& A) const;
  // 0.5 * sum_k ||S a_k||^2
  double penalty(const Matrix& A) const;

  // Largest eigenvalue of S^T S (a sum of 1-D Neumann Laplacian maxima).
  double gram_norm() const;

 private:
  GridDims dims_;
};

}  // namespace pnmm
