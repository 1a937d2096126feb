#ifndef CPCSTAR_RNG_HPP
#define CPCSTAR_RNG_HPP

#include <cstdint>
#include <random>

#include "cpcstar/element.hpp"

namespace cpcstar {

/// Deterministic random source.  All distributions are derived from raw
/// mt19937_64 output by fixed arithmetic, so a seed reproduces the same
/// stream on every platform.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}

  /// Uniform in [0, 1).
  double uniform() {
    return static_cast<double>(gen_() >> 11) * 0x1.0p-53;
  }

  double gaussian();
  Complex complex_gaussian() { return {gaussian(), gaussian()}; }

  Matrix gaussian_matrix(int rows, int cols);

  Element random_element(const AlgebraShape& shape);

  /// Random element scaled to operator norm exactly 1.
  Element random_contraction(const AlgebraShape& shape);

  Element random_hermitian(const AlgebraShape& shape);

  /// Blockwise exp(i H) for random Hermitian H.
  Element random_unitary(const AlgebraShape& shape);

 private:
  std::mt19937_64 gen_;
};

}  // namespace cpcstar

#endif
