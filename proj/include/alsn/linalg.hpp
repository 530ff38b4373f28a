#pragma once

#include <Eigen/Core>

namespace alsn {

// Column-feature matrices: each column is one spanning vector.
using Matrix = Eigen::MatrixXd;

// Rank by Gauss-Jordan elimination with partial pivoting; pivots with
// |value| <= tol are treated as zero.
int numerical_rank(const Matrix& m, double tol);

// Basis of the right nullspace (one column per free variable), from the
// reduced row echelon form.
Matrix nullspace(const Matrix& m, double tol);

// 1e-6 times the largest absolute entry of a and b.
double default_rank_tolerance(const Matrix& a, const Matrix& b);

struct SubspaceDims {
  int dim_a = 0;
  int dim_b = 0;
  int dim_sum = 0;
  int dim_intersect = 0;
};

// Dimensions of span(A), span(B), span(A) + span(B) and span(A) ∩ span(B).
// The intersection is computed on its own from the nullspace of [A | -B]:
// every null vector (x, y) gives A x = B y in both spans, and the
// intersection dimension is the rank of those vectors.
SubspaceDims subspace_dims(const Matrix& a, const Matrix& b, double tol);

}  // namespace alsn
