#ifndef CPCSTAR_CONSTRUCTIONS_HPP
#define CPCSTAR_CONSTRUCTIONS_HPP

#include <optional>

#include "cpcstar/system.hpp"

namespace cpcstar {

/// Stage side cap for the builders; mostly a guard against typos in depth
/// parameters.
constexpr int kDefaultSideCap = 512;

/// Stages M_{base^n} with unital *-homomorphism steps x -> x (x) 1_base.
/// Every defect of this system vanishes identically.
InductiveSystem uhf_system(int base, int depth, int side_cap = kDefaultSideCap);

/// Stages M_{2^n} with steps x -> (x (x) 1_2) (1 (x) diag(1, gamma_n)):
/// completely positive order zero with commuting weight, multiplicative
/// only where gamma_n == 1.  gammas are cycled when shorter than depth.
InductiveSystem weighted_embedding_system(int depth,
                                          const std::vector<double>& gammas,
                                          int side_cap = kDefaultSideCap);

/// A system of c.p.c. approximations of a concrete shaped algebra through
/// the stage algebras: down maps psi_n (algebra -> stage n) and up maps
/// phi_n (stage n -> algebra), with a designated probe set in the unit
/// ball.  approx_defect records ||phi_n(psi_n(a)) - a|| per (stage, probe).
struct CpapSystem {
  std::string name;
  AlgebraShape algebra;
  std::vector<Element> probes;
  std::vector<std::string> probe_labels;
  std::vector<AlgebraShape> stages;
  std::vector<CpMap> down;
  std::vector<CpMap> up;
  std::vector<std::vector<double>> approx_defect;  // [stage][probe]

  int num_stages() const { return static_cast<int>(stages.size()); }
  void validate(const Tolerances& tol = {}) const;
  void record_approx_defects();

  /// The associated inductive system with steps psi_{n+1} o phi_n.
  InductiveSystem associated_system(const std::string& sys_name = "") const;
};

struct IntervalModel {
  InductiveSystem system;
  CpapSystem cpap;
};

/// Commutative model on a master grid over [0,1]: the algebra is the
/// diagonal algebra on the finest grid, stage n is the diagonal algebra on
/// a coarser grid, psi_n samples at the stage grid points (a
/// *-homomorphism, exactly order zero) and phi_n interpolates piecewise
/// linearly (unital and positive).  Steps psi_{n+1} o phi_n are
/// row-stochastic matrices.
IntervalModel interval_sampling_system(const std::vector<int>& grid_sizes);

/// Exact approximation data: algebra = every stage, identity maps both
/// ways.  Useful as the degenerate reference point for the schedulers.
CpapSystem exact_cpap(const AlgebraShape& shape, int stages);

/// The direct-sum lift: stage n of the lifted system is the concatenation
/// of stages 0..n of sys, and each step acts as the identity on the
/// existing summands while feeding the last one through the original step.
/// Projecting the last summand of a lifted composite recovers the original
/// composite.
InductiveSystem direct_sum_nf_lift(const InductiveSystem& sys,
                                   int side_cap = 4 * kDefaultSideCap);

/// Embeds x in stage k of sys as (0, ..., 0, x) in stage k of the lift.
Element nf_lift_embed(const InductiveSystem& sys, int k, const Element& x);

/// Extracts the summand of lifted stage m holding the image of original
/// stage j.
Element nf_lift_project(const InductiveSystem& sys, int m, int j,
                        const Element& lifted);

// ---------------------------------------------------------------------------
// Subsystem schedules

struct Certificate {
  std::string inequality;  // which family, e.g. "summable", "unit-absorb"
  int probe = -1;
  int stage = -1;   // the m the inequality was evaluated at, when applicable
  int chosen = -1;  // the candidate index under test
  int partner = -1; // earlier schedule index entering the inequality
  double value = 0.0;
  double bound = 0.0;
  double slack() const { return bound - value; }
};

struct SubsystemSchedule {
  std::vector<int> indices;       // strictly increasing stage indices
  std::vector<double> epsilons;   // the driving sequence, as supplied
  std::vector<Certificate> certificates;
  bool feasible = true;
  std::optional<Certificate> first_failure;
  double safety_factor = 1.0;
  int norm_samples = 16;

  void require_feasible() const;  // throws ScheduleError when infeasible
};

struct ScheduleError : Error {
  explicit ScheduleError(const std::string& what, Certificate failure)
      : Error(what), first_failure(std::move(failure)) {}
  Certificate first_failure;
};

/// Greedy strictly increasing selection of stage indices n_0 < n_1 < ...
/// such that the probed norm of phi_{n_k} - phi_{n_j} o psi_{n_j} o
/// phi_{n_k} stays below epsilons[n_j] (indexed by stage) for every chosen
/// j > k.  Norm estimates are lower bounds, so acceptance multiplies them
/// by safety_factor before comparing.  Infeasible when fewer than
/// required_length indices can be chosen (default: as many as stages and
/// epsilons allow).
SubsystemSchedule make_summable(const CpapSystem& cpap,
                                const std::vector<double>& epsilons,
                                int required_length = -1,
                                double safety_factor = 1.25,
                                int norm_samples = 16);

struct UnitPolicy {
  /// Element of the algebra whose down images serve as the commuting
  /// positive contractions h_m; defaults to the algebra unit.
  std::optional<Element> algebra_unit;
};

struct ExtractionResult {
  SubsystemSchedule schedule;
  InductiveSystem subsystem;  // stages F_{j_n} with steps psi_{j_{n+1}} o phi_{j_n}
};

/// Inductive choice of j_0 < j_1 < ... enforcing, on the probe set, the
/// three certificate families
///   (unit-absorb)   || phi_{j_n}(1) a_k - a_k || < eps_n / 2    for k <= n,
///   (h-commute)     || psi_m(phi_{j_{n-1}}(1)) psi_m(a_k) - h_m psi_m(a_k) ||
///                       < eps_{n-1}  for all available m >= j_n, k < n,
///   (unit-power)    || phi_{j_n}(psi_{j_n}(phi_{j_{n-1}}(1)^i)) -
///                       phi_{j_{n-1}}(1)^i || < eps_n^2 / 3     for i = 1, 2,
/// with h_m the down image of the unit-policy element.  Requires the down
/// maps to have order-zero defect at most oz_threshold on probes.  The
/// returned subsystem is the associated system of the selected stages.
ExtractionResult extract_cpcstar_subsystem(const CpapSystem& cpap,
                                           const std::vector<double>& epsilons,
                                           const UnitPolicy& unit_policy = {},
                                           double oz_threshold = 1e-8);

/// Re-evaluates every certificate of a schedule from scratch; true iff all
/// inequalities still hold with nonnegative slack.
bool verify_schedule(const CpapSystem& cpap, const SubsystemSchedule& schedule);

// ---------------------------------------------------------------------------
// CPAP probe reports

struct EmbeddingDefectRow {
  int probe = 0;
  int level = 1;
  double trailing_norm_drop = 0.0;  // min over trailing stages of
                                    // ||psi_n^(r)(a)|| - ||a||
  double image_coherence = 0.0;     // || psi_m(phi_last(rho_{last,k}(x))) -
                                    // rho_{m,k}(x) || maximized over trailing m
};

/// Finite-stage shadow of the induced embedding a -> (psi_n(a))_n being
/// completely isometric: trailing norms may only undershoot ||a|| by the
/// recorded approximation defect.
std::vector<EmbeddingDefectRow> downwards_embedding_probe(
    const CpapSystem& cpap, const std::vector<int>& levels, int k = 0);

struct HbarRow {
  int probe_a = 0;
  int probe_b = 0;
  int stage = 0;
  double product_defect = 0.0;      // || h_m psi_m(ab) - psi_m(a) psi_m(b) ||
  double commutation_defect = 0.0;  // || h_m psi_m(a) - psi_m(a) h_m ||
  double norm_defect = 0.0;         // | ||h_m psi_m(a)|| - ||a|| |
};

/// Trailing-stage report of the three identities tying the unit images h_m
/// to products, commutation and norms of the down images.
std::vector<HbarRow> h_bar_consistency_probe(const CpapSystem& cpap,
                                             const UnitPolicy& policy = {});

}  // namespace cpcstar

#endif
