#include "cpcstar/rng.hpp"

#include <Eigen/Dense>
#include <cmath>

namespace cpcstar {

double Rng::gaussian() {
  // Box-Muller on the raw uniform stream; platform independent.
  double u1 = uniform();
  while (u1 <= 0.0) u1 = uniform();
  const double u2 = uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
}

Matrix Rng::gaussian_matrix(int rows, int cols) {
  Matrix m(rows, cols);
  for (int j = 0; j < cols; ++j)
    for (int i = 0; i < rows; ++i) m(i, j) = complex_gaussian();
  return m;
}

Element Rng::random_element(const AlgebraShape& shape) {
  std::vector<Matrix> blocks;
  blocks.reserve(shape.blocks.size());
  for (int k : shape.blocks) blocks.push_back(gaussian_matrix(k, k));
  return Element(shape, std::move(blocks));
}

Element Rng::random_contraction(const AlgebraShape& shape) {
  Element e = random_element(shape);
  const double norm = operator_norm(e);
  if (norm > 0) e = scale(1.0 / norm, e);
  return e;
}

Element Rng::random_hermitian(const AlgebraShape& shape) {
  Element e = random_element(shape);
  for (auto& blk : e.blocks) blk = ((blk + blk.adjoint()) / 2.0).eval();
  return e;
}

Element Rng::random_unitary(const AlgebraShape& shape) {
  Element h = random_hermitian(shape);
  for (auto& blk : h.blocks) {
    Eigen::SelfAdjointEigenSolver<Matrix> es(blk);
    Vector phases(es.eigenvalues().size());
    for (int i = 0; i < phases.size(); ++i)
      phases(i) = std::exp(Complex(0, es.eigenvalues()(i)));
    blk = es.eigenvectors() * phases.asDiagonal() * es.eigenvectors().adjoint();
  }
  return h;
}

}  // namespace cpcstar
