#include "alsn/linalg.hpp"

#include <cmath>
#include <stdexcept>
#include <vector>

namespace alsn {

namespace {

struct Echelon {
  Matrix reduced;
  std::vector<int> pivot_cols;
};

// Reduced row echelon form.
Echelon rref(Matrix m, double tol) {
  Echelon e;
  const Eigen::Index rows = m.rows(), cols = m.cols();
  Eigen::Index r = 0;
  for (Eigen::Index c = 0; c < cols && r < rows; ++c) {
    Eigen::Index best = r;
    for (Eigen::Index i = r + 1; i < rows; ++i)
      if (std::abs(m(i, c)) > std::abs(m(best, c))) best = i;
    if (std::abs(m(best, c)) <= tol) {
      m.block(r, c, rows - r, 1).setZero();
      continue;
    }
    m.row(r).swap(m.row(best));
    m.row(r) /= m(r, c);
    for (Eigen::Index i = 0; i < rows; ++i) {
      if (i == r || m(i, c) == 0.0) continue;
      m.row(i) -= m(i, c) * m.row(r);
    }
    e.pivot_cols.push_back(static_cast<int>(c));
    ++r;
  }
  e.reduced = std::move(m);
  return e;
}

}  // namespace

int numerical_rank(const Matrix& m, double tol) {
  if (m.size() == 0) return 0;
  return static_cast<int>(rref(m, tol).pivot_cols.size());
}

Matrix nullspace(const Matrix& m, double tol) {
  const Echelon e = rref(m, tol);
  const Eigen::Index cols = m.cols();
  std::vector<bool> is_pivot(static_cast<std::size_t>(cols), false);
  for (int c : e.pivot_cols) is_pivot[static_cast<std::size_t>(c)] = true;
  std::vector<Eigen::Index> free_cols;
  for (Eigen::Index c = 0; c < cols; ++c)
    if (!is_pivot[static_cast<std::size_t>(c)]) free_cols.push_back(c);

  Matrix basis = Matrix::Zero(cols, static_cast<Eigen::Index>(free_cols.size()));
  for (std::size_t k = 0; k < free_cols.size(); ++k) {
    const Eigen::Index f = free_cols[k];
    const auto col = static_cast<Eigen::Index>(k);
    basis(f, col) = 1.0;
    for (std::size_t r = 0; r < e.pivot_cols.size(); ++r)
      basis(e.pivot_cols[r], col) = -e.reduced(static_cast<Eigen::Index>(r), f);
  }
  return basis;
}

double default_rank_tolerance(const Matrix& a, const Matrix& b) {
  double scale = 0.0;
  if (a.size()) scale = std::max(scale, a.cwiseAbs().maxCoeff());
  if (b.size()) scale = std::max(scale, b.cwiseAbs().maxCoeff());
  return 1e-6 * scale;
}

SubspaceDims subspace_dims(const Matrix& a, const Matrix& b, double tol) {
  if (a.size() == 0 || b.size() == 0) throw std::invalid_argument("subspace_dims: empty matrix");
  if (a.rows() != b.rows())
    throw std::invalid_argument("subspace_dims: A has " + std::to_string(a.rows()) + " rows, B has " +
                                std::to_string(b.rows()));
  if (!(tol > 0)) throw std::invalid_argument("subspace_dims: tolerance must be positive");

  SubspaceDims d;
  d.dim_a = numerical_rank(a, tol);
  d.dim_b = numerical_rank(b, tol);
  Matrix joined(a.rows(), a.cols() + b.cols());
  joined << a, b;
  d.dim_sum = numerical_rank(joined, tol);

  Matrix system(a.rows(), a.cols() + b.cols());
  system << a, -b;
  const Matrix null = nullspace(system, tol);
  if (null.cols() == 0) return d;
  const Matrix common = a * null.topRows(a.cols());
  d.dim_intersect = numerical_rank(common, tol);
  return d;
}

}  // namespace alsn
