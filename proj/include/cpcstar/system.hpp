#ifndef CPCSTAR_SYSTEM_HPP
#define CPCSTAR_SYSTEM_HPP

#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <utility>
#include <vector>

#include "cpcstar/cp_map.hpp"

namespace cpcstar {

struct StepVerdict {
  bool is_cp = false;
  bool is_contractive = false;
  bool cp_by_construction = false;  // Kraus form, Choi check skipped for size
  double choi_min_eigenvalue = 0.0;
};

/// A finite inductive system of shaped algebras with completely positive
/// contractive one-step maps steps[n] : stages[n] -> stages[n+1].
/// Composites are memoized; systems are immutable after construction, so
/// the cache only grows.
class InductiveSystem {
 public:
  InductiveSystem() = default;

  /// Validates the shape chain and every step (complete positivity via the
  /// Choi check where it fits in memory, structural for larger Kraus steps;
  /// contractivity via ||step(1)||).  Throws ValidationError on failure.
  static InductiveSystem validated(std::string name,
                                   std::vector<AlgebraShape> stages,
                                   std::vector<CpMap> steps,
                                   const Tolerances& tol = {});

  const std::string& name() const { return name_; }
  int last_stage() const { return static_cast<int>(stages_.size()) - 1; }
  const std::vector<AlgebraShape>& stages() const { return stages_; }
  const AlgebraShape& stage(int n) const;
  const std::vector<CpMap>& steps() const { return steps_; }
  const std::vector<StepVerdict>& validation() const { return validation_; }

  /// The composed map from stage n to stage m (identity when m == n).
  const CpMap& composite(int m, int n) const;

  InductiveSystem(const InductiveSystem& other);
  InductiveSystem& operator=(const InductiveSystem& other);
  InductiveSystem(InductiveSystem&&) = default;
  InductiveSystem& operator=(InductiveSystem&&) = default;

 private:
  std::string name_;
  std::vector<AlgebraShape> stages_;
  std::vector<CpMap> steps_;
  std::vector<StepVerdict> validation_;
  mutable std::map<std::pair<int, int>, CpMap> composite_cache_;
  mutable std::unique_ptr<std::mutex> cache_mutex_ =
      std::make_unique<std::mutex>();
};

/// || rho_{m,l}(1) rho_{m,n}(rho_{n,k}(x) rho_{n,k}(y)) -
///    rho_{m,k}(x) rho_{m,k}(y) ||
/// for k < n < m and k < l < m: the stagewise unit-damped multiplicativity
/// defect whose eventual smallness characterizes asymptotically order zero
/// connecting maps.
double cpc_defect(const InductiveSystem& sys, int k, const Element& x,
                  const Element& y, int m, int n, int l);

/// || rho_{m,n}(rho_{n,k}(x) rho_{n,k}(y)) - rho_{m,k}(x) rho_{m,k}(y) ||,
/// the asymptotic-multiplicativity defect (NF condition).
double nf_defect(const InductiveSystem& sys, int k, const Element& x,
                 const Element& y, int m, int n);

/// || rho_{m,n}(1) rho_{m,k}(x) - rho_{m,k}(x) rho_{m,n}(1) ||.
double commutator_defect(const InductiveSystem& sys, int k, const Element& x,
                         int m, int n);

/// Checks min eig( ||rho_{n,k}(x)|| rho_{m,n}(1) - rho_{m,k}(x) ) >=
/// -psd_tol for self-adjoint x, evaluated at amplification level r.  This
/// holds exactly for any completely positive system, so a false return
/// signals a numerical or validation fault.  x must live in the r-amplified
/// stage-k shape.
bool order_unit_domination_check(const InductiveSystem& sys, int k,
                                 const Element& x, int m, int n,
                                 const Tolerances& tol, int r = 1);

/// Witness value for the domination check: the minimum eigenvalue of the
/// dominated difference (nonnegative up to roundoff).
double order_unit_domination_margin(const InductiveSystem& sys, int k,
                                    const Element& x, int m, int n, int r = 1);

/// Ratios || rho_{m,n}(1)^j rho_{m,k}(x) || / || rho_{m,k}(x) || in [0, 1]
/// for the requested (m, n) pairs.  The ratios trend to 1 along n, m for
/// systems with asymptotically order zero maps; reported, not asserted.
struct NondegeneracyPoint {
  int m = 0;
  int n = 0;
  double ratio = 0.0;
};
std::vector<NondegeneracyPoint> nondegeneracy_profile(
    const InductiveSystem& sys, int k, const Element& x, int j,
    const std::vector<std::pair<int, int>>& mn_pairs,
    const Tolerances& tol = {});

/// || rho_{m,n}(1) rho_{m,k}(x) rho_{m,k}(y) - rho_{m,k}(x) rho_{m,k}(y) ||:
/// how far the stage-n unit image is from acting as an identity on stage-k
/// products at stage m.
double approx_identity_defect(const InductiveSystem& sys, int k,
                              const Element& x, const Element& y, int n,
                              int m);

/// || rho_{m,n}(lift[n]) - lift[m] || for a per-stage lift.
double lift_coherence_defect(const InductiveSystem& sys,
                             const std::vector<Element>& lift, int m, int n);

/// rho_{N,n}(rho_{n,k}(x) rho_{n,k}(y)): the stage-N representative of the
/// limit product with inner index n, for k < n <= N.
Element product_at(const InductiveSystem& sys, int k, const Element& x,
                   const Element& y, int n, int horizon);

/// The non-increasing sequence (m, ||rho_{m,k}(x)||) over the requested
/// stages.
std::vector<std::pair<int, double>> limit_norm_profile(
    const InductiveSystem& sys, int k, const Element& x,
    const std::vector<int>& stages);

// ---------------------------------------------------------------------------
// Defect sweeps and reports

struct DefectEntry {
  std::string kind;
  int k = 0;
  int m = 0;
  int n = 0;
  int l = -1;  // -1 when the kind has no l index
  std::string pair;
  double value = 0.0;
};

struct TrendSummary {
  // max defect per window c = min(n, l), in increasing c
  std::vector<std::pair<int, double>> window_max;
  // windowed maxima non-increasing up to the plateau tolerance
  bool nonincreasing = true;
  double plateau_tol = 1e-12;
};

struct DefectReport {
  std::string kind;
  std::vector<DefectEntry> entries;
  std::map<std::string, std::string> metadata;
  std::map<std::pair<int, int>, double> nl_max;  // max cpc value per (n, l)
  TrendSummary trend;

  /// Sorts entries by (k, n, l, m, kind, pair); emit_csv relies on this.
  void sort_entries();
  double max_value() const;
};

struct GeneratorPolicy {
  enum class Kind { units, hermitian, random, explicit_pairs };
  Kind kind = Kind::units;
  int count = 8;  // random pairs when kind == random
  std::uint64_t seed = 1;
  std::vector<std::pair<Element, Element>> pairs;  // kind == explicit_pairs
  std::vector<std::string> pair_labels;

  static GeneratorPolicy units() { return {}; }
  static GeneratorPolicy hermitian();
  static GeneratorPolicy random(int count, std::uint64_t seed);
  static GeneratorPolicy explicit_list(
      std::vector<std::pair<Element, Element>> pairs,
      std::vector<std::string> labels);
};

/// Inclusive index windows; the sweep keeps only cells satisfying
/// k < n < m and k < l < m within the windows.
struct IndexGrid {
  int m_lo = 0, m_hi = 0;
  int n_lo = 0, n_hi = 0;
  int l_lo = 0, l_hi = 0;
};

/// cpc and nf defects for every generator pair over the grid, with per-cell
/// values, the max per (n, l) window and a monotone-trend summary.  Cells
/// are evaluated in parallel; the report order is deterministic.
DefectReport defect_sweep(const InductiveSystem& sys, int k,
                          const GeneratorPolicy& policy, const IndexGrid& grid);

TrendSummary summarize_trend(const std::vector<DefectEntry>& entries,
                             double plateau_tol = 1e-12);

// ---------------------------------------------------------------------------
// Small utilities shared by the sweeps

/// Runs fn(0..n-1) on a few worker threads; results must be written to
/// pre-assigned slots so the outcome does not depend on scheduling.
void parallel_for(int n, const std::function<void(int)>& fn);

}  // namespace cpcstar

#endif
