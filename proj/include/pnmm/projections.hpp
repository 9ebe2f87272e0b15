#pragma once

#include "pnmm/tac_model.hpp"

namespace pnmm {

// Entrywise max(x, 0).
Matrix project_nonneg(const Matrix& M);

// Euclidean projection of a vector onto the unit simplex.
Vector project_simplex(const Vector& v);

// Column-wise projection onto the unit simplex.
Matrix project_simplex_columns(const Matrix& A);

// Column-wise prox of threshold * ||c|| plus the indicator of the box
// `bounds`^rows, which must contain 0. Without clamping this is
// c * max(0, 1 - threshold / ||c||).
Matrix prox_group_box(const Matrix& B, double threshold, const Interval& bounds);

// Column n uses thresholds[n]; columns with a negative threshold are left
// unchanged.
Matrix prox_group_box_columns(const Matrix& B, const Vector& thresholds, const Interval& bounds);

}  // namespace pnmm
