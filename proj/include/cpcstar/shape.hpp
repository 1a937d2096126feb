#ifndef CPCSTAR_SHAPE_HPP
#define CPCSTAR_SHAPE_HPP

#include <stdexcept>
#include <string>
#include <vector>

namespace cpcstar {

/// Base class for all library errors.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Invalid shapes, mismatched dimensions, or out-of-range stage indices.
struct ShapeError : Error {
  using Error::Error;
};

/// A map or system failed a positivity / contractivity / well-formedness check.
struct ValidationError : Error {
  using Error::Error;
};

/// Malformed description file or field with the wrong type.
struct ParseError : Error {
  using Error::Error;
};

/// The shape of a finite-dimensional C*-algebra: an ordered list of matrix
/// block sides, representing the direct sum of full matrix algebras of those
/// sizes.  The coordinate dimension is the sum of squared block sides.
struct AlgebraShape {
  std::vector<int> blocks;

  AlgebraShape() = default;
  explicit AlgebraShape(std::vector<int> sides) : blocks(std::move(sides)) {
    if (blocks.empty())
      throw ShapeError("AlgebraShape: block list must be non-empty");
    for (int k : blocks)
      if (k < 1)
        throw ShapeError("AlgebraShape: block sides must be >= 1, got " +
                         std::to_string(k));
  }

  int num_blocks() const { return static_cast<int>(blocks.size()); }

  /// Total coordinate count, sum of squares of the block sides.
  int dim() const {
    int d = 0;
    for (int k : blocks) d += k * k;
    return d;
  }

  int max_side() const {
    int s = 0;
    for (int k : blocks) s = s > k ? s : k;
    return s;
  }

  /// Coordinate offset of block b in the vectorized representation.
  int block_offset(int b) const {
    int off = 0;
    for (int i = 0; i < b; ++i) off += blocks[i] * blocks[i];
    return off;
  }

  bool operator==(const AlgebraShape& other) const {
    return blocks == other.blocks;
  }
  bool operator!=(const AlgebraShape& other) const { return !(*this == other); }

  std::string to_string() const;
};

/// Shape with every block side multiplied by r (matrix amplification).
AlgebraShape amplified(const AlgebraShape& shape, int r);

/// Numerical slack policy.  herm_tol bounds the anti-Hermitian part accepted
/// as self-adjoint, psd_tol is the eigenvalue floor accepted as nonnegative,
/// eq_tol is the slack for norm equalities.  Operations use these values as
/// given; callers wanting the default scaling policy should build them with
/// default_tolerances.
struct Tolerances {
  double herm_tol = 1e-9;
  double psd_tol = 1e-9;
  double eq_tol = 1e-9;

  void validate() const {
    if (herm_tol < 0 || psd_tol < 0 || eq_tol < 0)
      throw ShapeError("Tolerances must be nonnegative");
  }
};

}  // namespace cpcstar

#endif
