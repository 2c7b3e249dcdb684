#pragma once

// Factorizations and solvers. Everything here is deterministic for a fixed
// input: no threading, no data-dependent pivoting beyond partial pivoting.

#include <cstddef>

#include "mojet/matrix.hpp"

namespace mojet {

namespace tolerances {
// Reconstruction error bound for svd(), relative to ‖m‖_F.
inline constexpr double kSvdReconstruction = 1e-10;
// Relative residual bound for solve_spd().
inline constexpr double kSpdResidual = 1e-10;
// Symmetry check for solve_spd(), relative to max|a|.
inline constexpr double kSymmetry = 1e-12;
// Default relative singular-value cut for numerical rank and subspace retention.
inline constexpr double kRank = 1e-6;
}  // namespace tolerances

// Thin SVD m = u·diag(s)·vt with k = min(rows, cols):
// u is rows×k with orthonormal columns, s is nonincreasing and nonnegative,
// vt is k×cols with orthonormal rows.
struct Svd {
    Matrix u;
    Vector s;
    Matrix vt;
};

// One-sided (Hestenes) Jacobi SVD. Throws ValidationError on empty or
// non-finite input.
Svd svd(const Matrix& m);
// Singular values only; same algorithm without accumulating vectors.
Vector singular_values(const Matrix& m);

// Lower-triangular Cholesky factor of a symmetric positive definite matrix.
// Throws SingularSystemError when a pivot is not safely positive.
Matrix cholesky(const Matrix& a);
// Solves a·x = b for SPD a. b may have several right-hand-side columns.
Matrix solve_spd(const Matrix& a, const Matrix& b);

// LU with partial pivoting: solves a·x = b for general square a.
Matrix solve(const Matrix& a, const Matrix& b);
Matrix inverse(const Matrix& a);

// Minimizes ‖a·x − b‖₂ column-wise via Householder QR. Requires rows ≥ cols
// and full column rank (SingularSystemError otherwise).
Matrix least_squares(const Matrix& a, const Matrix& b);

// s_max / s_min (infinity for singular input).
double condition_number(const Matrix& a);

}  // namespace mojet
