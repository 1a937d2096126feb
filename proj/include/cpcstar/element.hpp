#ifndef CPCSTAR_ELEMENT_HPP
#define CPCSTAR_ELEMENT_HPP

#include <Eigen/Core>
#include <complex>
#include <vector>

#include "cpcstar/shape.hpp"

namespace cpcstar {

using Complex = std::complex<double>;
using Matrix = Eigen::MatrixXcd;
using Vector = Eigen::VectorXcd;

/// An element of a direct sum of matrix algebras: one dense complex matrix
/// per shape block.  The direct sum is never materialized as a single large
/// matrix; all operations act blockwise.
struct Element {
  AlgebraShape shape;
  std::vector<Matrix> blocks;

  Element() = default;
  Element(AlgebraShape s, std::vector<Matrix> b);

  int num_blocks() const { return shape.num_blocks(); }
};

Element zero_element(const AlgebraShape& shape);

/// The identity in every block.
Element unit(const AlgebraShape& shape);

/// The element with a single 1 at entry (i, j) of the given block.
Element matrix_unit(const AlgebraShape& shape, int block, int i, int j);

/// All matrix units of the shape, ordered block-major then column-stacked
/// within each block (the same order as the vectorized coordinates).
std::vector<Element> matrix_units(const AlgebraShape& shape);

/// Labels matching matrix_units, of the form "b{block}e{i}{j}".
std::vector<std::string> matrix_unit_labels(const AlgebraShape& shape);

/// Hermitian span of the matrix units: E_ii, E_ij + E_ji, and i(E_ij - E_ji)
/// for i < j, per block.  Every member has operator norm 1.
std::vector<Element> hermitian_basis(const AlgebraShape& shape);
std::vector<std::string> hermitian_basis_labels(const AlgebraShape& shape);

Element add(const Element& a, const Element& b);
Element subtract(const Element& a, const Element& b);
Element scale(Complex c, const Element& a);

/// Blockwise matrix product.  Shapes must agree.
Element multiply(const Element& a, const Element& b);

/// Blockwise conjugate transpose.
Element adjoint(const Element& a);

/// Max over blocks of the largest singular value, computed from the
/// Hermitian spectrum of a*a.
double operator_norm(const Element& a);

/// Frobenius norm of the whole coordinate vector (cheap upper-bound-free
/// diagnostic; operator_norm is the contractual norm).
double frobenius_norm(const Element& a);

/// Distance of a from its own adjoint in operator norm.
double hermiticity_defect(const Element& a);

/// Smallest eigenvalue over all blocks of the Hermitian part (a + a*)/2.
double min_eigenvalue(const Element& a);

/// Largest eigenvalue over all blocks of the Hermitian part.
double max_eigenvalue(const Element& a);

/// True iff ||a - a*|| <= herm_tol and every block's minimum eigenvalue is
/// >= -psd_tol.
bool is_positive(const Element& a, const Tolerances& tol);

/// Hermitian spectral square root with negative eigenvalues clamped to 0.
/// Requires is_positive(a, tol).
Element positive_sqrt(const Element& a, const Tolerances& tol);

/// The blockwise Kronecker embedding a -> a (x) 1_r, element entries outer
/// and amplification inner.  Every block side is multiplied by r.
Element amplify_element(const Element& a, int r);

/// Default slack policy: herm and psd floors of 1e-9 scaled by
/// (1 + ||a||) * max block side, norm-equality slack 1e-9.
Tolerances default_tolerances(const Element& a);

/// Column-stacked coordinates per block, blocks concatenated in shape order.
Vector vectorize(const Element& a);
Element devectorize(const AlgebraShape& shape, const Vector& v);

/// Kronecker product with entries of a outer and entries of b inner.
Matrix kron(const Matrix& a, const Matrix& b);

}  // namespace cpcstar

#endif
