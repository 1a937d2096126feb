#ifndef CPCSTAR_CP_MAP_HPP
#define CPCSTAR_CP_MAP_HPP

#include <optional>
#include <string>
#include <vector>

#include "cpcstar/element.hpp"
#include "cpcstar/rng.hpp"

namespace cpcstar {

/// Kraus operators feeding one codomain block from one domain block.
/// Each op is a (codomain side) x (domain side) matrix; the contribution to
/// the codomain block is sum_K K x K*.
struct KrausBlock {
  int from = 0;
  int to = 0;
  std::vector<Matrix> ops;
};

/// One Choi matrix per (domain block, codomain block) pair, of side
/// (domain side) * (codomain side), assembled as sum_{pq} E_pq (x) f(E_pq)
/// with the matrix-unit index outer.  Positive semidefiniteness of every
/// pair matrix is equivalent to complete positivity of the map.
struct ChoiBlock {
  int domain_block = 0;
  int codomain_block = 0;
  Matrix matrix;
  double min_eigenvalue = 0.0;
};

struct CpMapVerdicts {
  std::optional<bool> is_cp;
  std::optional<bool> is_contractive;
  std::optional<double> order_zero_defect;
};

/// A linear map between shaped algebras.  Exactly one representation is
/// populated: a dense action matrix on vectorized coordinates (column
/// stacking per block, blocks concatenated in shape order), or Kraus
/// operator families, which are completely positive by construction and
/// scale to block sides where the dense action would not fit in memory.
class CpMap {
 public:
  CpMap() = default;

  static CpMap identity(const AlgebraShape& shape);
  static CpMap zero(const AlgebraShape& domain, const AlgebraShape& codomain);
  static CpMap from_action(AlgebraShape domain, AlgebraShape codomain,
                           Matrix action);
  static CpMap from_kraus(AlgebraShape domain, AlgebraShape codomain,
                          std::vector<KrausBlock> kraus);

  const AlgebraShape& domain() const { return domain_; }
  const AlgebraShape& codomain() const { return codomain_; }
  bool has_kraus() const { return kraus_.has_value(); }
  bool has_action() const { return action_.has_value(); }
  const std::vector<KrausBlock>& kraus() const;

  /// The dense action matrix.  For Kraus maps it is materialized on first
  /// use and cached; throws ShapeError when codomain.dim * domain.dim
  /// exceeds the materialization cap.
  const Matrix& action_matrix() const;

  Element apply(const Element& x) const;

  /// Image of the matrix unit E_ij of the given domain block.  Equivalent
  /// to apply(matrix_unit(...)) but costs only outer products of Kraus
  /// columns (or one action column reshape).
  Element apply_to_matrix_unit(int block, int i, int j) const;

  /// Cached validation verdicts; recomputed by the verification routines.
  CpMapVerdicts& verdicts() const { return verdicts_; }

 private:
  AlgebraShape domain_, codomain_;
  std::optional<Matrix> action_;
  std::optional<std::vector<KrausBlock>> kraus_;
  mutable std::optional<Matrix> materialized_;
  mutable CpMapVerdicts verdicts_;
};

/// f after g.  Kraus composes with Kraus; any other combination goes
/// through dense action matrices.
CpMap compose(const CpMap& f, const CpMap& g);

/// Entrywise action of f on r x r matrices over the domain, under the fixed
/// convention that algebra entries are outer and the amplification factor
/// inner.  Returns a dense-action map; use apply_amplified for block sides
/// where that does not fit.
CpMap amplify_map(const CpMap& f, int r);

/// Apply the amplification f^(r) to an element of the amplified domain
/// shape without materializing the amplified action.
Element apply_amplified(const CpMap& f, int r, const Element& x);

/// Choi matrices of every (domain block, codomain block) pair with their
/// minimum eigenvalues.  Throws ShapeError when a pair side exceeds
/// max_side (memory guard).
std::vector<ChoiBlock> choi(const CpMap& f, int max_side = 2048);

/// True iff every Choi pair matrix has minimum eigenvalue >= -psd_tol.
bool is_completely_positive(const CpMap& f, const Tolerances& tol);

/// For completely positive maps contractivity on all amplifications reduces
/// to ||f(1)|| <= 1.  Throws ValidationError when called on a map that
/// fails the complete positivity check.
bool is_contractive_cp(const CpMap& f, const Tolerances& tol);

/// Probe family for supremum estimates: all matrix-unit pairs of the domain
/// plus seeded random contraction pairs.  Estimates carry lower-bound
/// semantics; they never overshoot the true supremum over the unit ball.
struct ProbePolicy {
  bool include_matrix_units = true;
  int random_pairs = 0;
  std::uint64_t seed = 1;
};

/// max over probe pairs (a, b) of ||f(a) f(b) - f(1) f(ab)||, the unital
/// order-zero identity defect.  Zero for *-homomorphisms and for completely
/// positive order zero maps; a reported value is a lower bound for the
/// supremum over the unit ball.
double order_zero_defect(const CpMap& f, const ProbePolicy& policy = {});

/// Probed lower bound for sup ||f(x)|| over the unit ball: maximizes over
/// the unit, matrix units, random unitaries (exponentials of random
/// Hermitians) and `samples` random contractions.
double map_norm_estimate(const CpMap& f, int samples, Rng& rng);
double map_norm_estimate(const CpMap& f, int samples = 32,
                         std::uint64_t seed = 1);

/// Probed lower bound for ||f - g|| using the same probe family.
double map_difference_norm_estimate(const CpMap& f, const CpMap& g,
                                    int samples, Rng& rng);

/// Structure data of a c.p. order zero map: h = f(1), the spectral support
/// projection of h, the corner map pi(a) = p h+^{1/2} f(a) h+^{1/2} p
/// (h+ the spectral pseudo-inverse of h), and the probe residuals of the
/// reconstruction f(a) = h^{1/2} pi(a) h^{1/2}.
struct OrderZeroDecomposition {
  Element h;
  Element support_projection;
  CpMap pi_action;
  double residual = 0.0;
  double commutation_defect = 0.0;
};

/// Requires order_zero_defect(f) <= oz_threshold; eigenvalues of h below
/// psd_tol * ||h|| are excluded from the support.
OrderZeroDecomposition structure_decomposition(const CpMap& f,
                                               const Tolerances& tol,
                                               double oz_threshold = 1e-8,
                                               const ProbePolicy& policy = {});

/// Per-level report of the probe for complete-isometry and order
/// reflection.  For an order zero isometric map all failures vanish.
struct EmbeddingLevelReport {
  int level = 1;
  double isometry_defect = 0.0;        // max | ||f^(r)(x)|| - ||x|| |
  double order_reflection_failure = 0.0;  // max over probes with f^(r)(x) >= 0
                                          // of the negative part of x
  int probes = 0;
};

struct EmbeddingProbeReport {
  std::vector<EmbeddingLevelReport> levels;
};

EmbeddingProbeReport complete_order_embedding_probe(
    const CpMap& f, const std::vector<int>& levels, const Tolerances& tol,
    int samples = 32, std::uint64_t seed = 1);

}  // namespace cpcstar

#endif
