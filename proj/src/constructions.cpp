#include "cpcstar/constructions.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace cpcstar {

namespace {

std::string join_ints(const std::vector<int>& v) {
  std::ostringstream os;
  os << "[";
  for (size_t i = 0; i < v.size(); ++i) os << (i ? "," : "") << v[i];
  os << "]";
  return os.str();
}

int int_pow(int base, int exp) {
  int v = 1;
  for (int i = 0; i < exp; ++i) v *= base;
  return v;
}

}  // namespace

InductiveSystem uhf_system(int base, int depth, int side_cap) {
  if (base < 2) throw ShapeError("uhf_system: base must be >= 2");
  if (depth < 1) throw ShapeError("uhf_system: depth must be >= 1");
  double side = 1;
  for (int n = 0; n < depth; ++n) side *= base;
  if (side > side_cap)
    throw ShapeError("uhf_system: stage side " + std::to_string(side) +
                     " exceeds cap " + std::to_string(side_cap));
  std::vector<AlgebraShape> stages;
  std::vector<CpMap> steps;
  for (int n = 0; n <= depth; ++n)
    stages.push_back(AlgebraShape({int_pow(base, n)}));
  for (int n = 0; n < depth; ++n) {
    const int k = int_pow(base, n);
    std::vector<Matrix> ops;
    ops.reserve(base);
    for (int s = 0; s < base; ++s) {
      Matrix e = Matrix::Zero(base, 1);
      e(s, 0) = 1.0;
      ops.push_back(kron(Matrix::Identity(k, k), e));
    }
    steps.push_back(CpMap::from_kraus(stages[n], stages[n + 1],
                                      {{0, 0, std::move(ops)}}));
  }
  std::ostringstream name;
  name << "uhf{" << base << "," << depth << "}";
  return InductiveSystem::validated(name.str(), std::move(stages),
                                    std::move(steps));
}

InductiveSystem weighted_embedding_system(int depth,
                                          const std::vector<double>& gammas,
                                          int side_cap) {
  if (depth < 1) throw ShapeError("weighted_embedding_system: depth must be >= 1");
  if (gammas.empty())
    throw ShapeError("weighted_embedding_system: need at least one weight");
  for (double g : gammas)
    if (!(g > 0.0 && g <= 1.0))
      throw ShapeError("weighted_embedding_system: weights must lie in (0, 1]");
  if (int_pow(2, depth) > side_cap)
    throw ShapeError("weighted_embedding_system: stage side exceeds cap");
  std::vector<AlgebraShape> stages;
  std::vector<CpMap> steps;
  for (int n = 0; n <= depth; ++n) stages.push_back(AlgebraShape({1 << n}));
  for (int n = 0; n < depth; ++n) {
    const int k = 1 << n;
    const double gamma = gammas[n % gammas.size()];
    Matrix e0 = Matrix::Zero(2, 1), e1 = Matrix::Zero(2, 1);
    e0(0, 0) = 1.0;
    e1(1, 0) = 1.0;
    std::vector<Matrix> ops;
    ops.push_back(kron(Matrix::Identity(k, k), e0));
    ops.push_back(std::sqrt(gamma) * kron(Matrix::Identity(k, k), e1));
    steps.push_back(CpMap::from_kraus(stages[n], stages[n + 1],
                                      {{0, 0, std::move(ops)}}));
  }
  std::ostringstream name;
  name << "weighted{" << depth << ",[";
  for (size_t i = 0; i < gammas.size(); ++i)
    name << (i ? "," : "") << gammas[i];
  name << "]}";
  return InductiveSystem::validated(name.str(), std::move(stages),
                                    std::move(steps));
}

// ---------------------------------------------------------------------------
// Interval model

namespace {

AlgebraShape diagonal_shape(int points) {
  return AlgebraShape(std::vector<int>(points, 1));
}

Element sampled_function(const AlgebraShape& shape,
                         const std::function<double(double)>& fn, int points) {
  Element e = zero_element(shape);
  for (int i = 0; i < points; ++i)
    e.blocks[i](0, 0) = fn(points > 1 ? double(i) / (points - 1) : 0.0);
  return e;
}

// Master grid indices of the stage grid points (nearest-point snap; exact
// for nested power grids).
std::vector<int> snapped_indices(int g, int master) {
  std::vector<int> idx(g);
  for (int j = 0; j < g; ++j)
    idx[j] = static_cast<int>(
        std::lround(double(j) * (master - 1) / (g - 1)));
  return idx;
}

}  // namespace

IntervalModel interval_sampling_system(const std::vector<int>& grid_sizes) {
  if (grid_sizes.empty())
    throw ShapeError("interval_sampling_system: need at least one grid");
  for (size_t i = 0; i < grid_sizes.size(); ++i) {
    if (grid_sizes[i] < 2)
      throw ShapeError("interval_sampling_system: grid size must be >= 2");
    if (i > 0 && grid_sizes[i] <= grid_sizes[i - 1])
      throw ShapeError("interval_sampling_system: grid sizes must increase");
  }
  const int master = grid_sizes.back();
  const AlgebraShape algebra = diagonal_shape(master);

  CpapSystem cpap;
  cpap.algebra = algebra;
  std::ostringstream name;
  name << "interval{" << join_ints(grid_sizes) << "}";
  cpap.name = name.str();

  for (int g : grid_sizes) {
    const AlgebraShape stage = diagonal_shape(g);
    const auto idx = snapped_indices(g, master);

    Matrix sample = Matrix::Zero(g, master);
    for (int j = 0; j < g; ++j) sample(j, idx[j]) = 1.0;

    Matrix interp = Matrix::Zero(master, g);
    for (int i = 0; i < master; ++i) {
      const double p = double(i) / (master - 1);
      int j = 0;
      while (j + 1 < g - 1 && double(idx[j + 1]) / (master - 1) < p) ++j;
      const double q0 = double(idx[j]) / (master - 1);
      const double q1 = double(idx[j + 1]) / (master - 1);
      const double w = (q1 - q0) > 0 ? (p - q0) / (q1 - q0) : 0.0;
      interp(i, j) = 1.0 - w;
      interp(i, j + 1) = w;
    }

    cpap.stages.push_back(stage);
    cpap.down.push_back(CpMap::from_action(algebra, stage, std::move(sample)));
    cpap.up.push_back(CpMap::from_action(stage, algebra, std::move(interp)));
  }

  auto add_probe = [&](const char* label,
                       const std::function<double(double)>& fn) {
    cpap.probes.push_back(sampled_function(algebra, fn, master));
    cpap.probe_labels.push_back(label);
  };
  add_probe("coord", [](double t) { return t; });
  add_probe("one", [](double) { return 1.0; });
  add_probe("square", [](double t) { return t * t; });
  add_probe("tent", [](double t) { return 1.0 - std::abs(2.0 * t - 1.0); });
  add_probe("signed", [](double t) { return 2.0 * t - 1.0; });
  add_probe("bump", [](double t) { return 0.5 * (1.0 - std::cos(2.0 * M_PI * t)); });

  cpap.validate();
  cpap.record_approx_defects();

  IntervalModel model{cpap.associated_system(cpap.name), std::move(cpap)};
  return model;
}

CpapSystem exact_cpap(const AlgebraShape& shape, int stages) {
  if (stages < 1) throw ShapeError("exact_cpap: need at least one stage");
  CpapSystem cpap;
  cpap.algebra = shape;
  std::ostringstream name;
  name << "exact_cpap{" << shape.to_string() << "," << stages << "}";
  cpap.name = name.str();
  for (int n = 0; n < stages; ++n) {
    cpap.stages.push_back(shape);
    cpap.down.push_back(CpMap::identity(shape));
    cpap.up.push_back(CpMap::identity(shape));
  }
  cpap.probes.push_back(unit(shape));
  cpap.probe_labels.push_back("one");
  const auto units = matrix_units(shape);
  const auto labels = matrix_unit_labels(shape);
  for (size_t i = 0; i < units.size(); ++i) {
    cpap.probes.push_back(units[i]);
    cpap.probe_labels.push_back(labels[i]);
  }
  cpap.validate();
  cpap.record_approx_defects();
  return cpap;
}

void CpapSystem::validate(const Tolerances& tol) const {
  if (stages.empty()) throw ValidationError("CpapSystem: no stages");
  if (down.size() != stages.size() || up.size() != stages.size())
    throw ValidationError("CpapSystem: stages, down and up must align");
  if (probes.empty()) throw ValidationError("CpapSystem: empty probe set");
  for (size_t n = 0; n < stages.size(); ++n) {
    if (down[n].domain() != algebra || down[n].codomain() != stages[n])
      throw ValidationError("CpapSystem: down map " + std::to_string(n) +
                            " has wrong shapes");
    if (up[n].domain() != stages[n] || up[n].codomain() != algebra)
      throw ValidationError("CpapSystem: up map " + std::to_string(n) +
                            " has wrong shapes");
    for (const CpMap* f : {&down[n], &up[n]}) {
      if (!f->has_kraus() && !is_completely_positive(*f, tol))
        throw ValidationError("CpapSystem: map " + std::to_string(n) +
                              " fails the complete positivity check");
      if (!is_contractive_cp(*f, tol))
        throw ValidationError("CpapSystem: map " + std::to_string(n) +
                              " is not contractive");
    }
  }
  for (const Element& a : probes) {
    if (a.shape != algebra)
      throw ValidationError("CpapSystem: probe shape mismatch");
    if (operator_norm(a) > 1.0 + tol.eq_tol)
      throw ValidationError("CpapSystem: probes must lie in the unit ball");
  }
}

void CpapSystem::record_approx_defects() {
  approx_defect.assign(stages.size(),
                       std::vector<double>(probes.size(), 0.0));
  for (size_t n = 0; n < stages.size(); ++n)
    for (size_t p = 0; p < probes.size(); ++p)
      approx_defect[n][p] = operator_norm(
          subtract(up[n].apply(down[n].apply(probes[p])), probes[p]));
}

InductiveSystem CpapSystem::associated_system(const std::string& sys_name) const {
  std::vector<CpMap> steps;
  for (size_t n = 0; n + 1 < stages.size(); ++n)
    steps.push_back(compose(down[n + 1], up[n]));
  return InductiveSystem::validated(sys_name.empty() ? name : sys_name, stages,
                                    std::move(steps));
}

// ---------------------------------------------------------------------------
// Direct-sum lift

namespace {

AlgebraShape concat_shapes(const std::vector<AlgebraShape>& stages, int upto) {
  std::vector<int> blocks;
  for (int j = 0; j <= upto; ++j)
    blocks.insert(blocks.end(), stages[j].blocks.begin(),
                  stages[j].blocks.end());
  return AlgebraShape(std::move(blocks));
}

}  // namespace

InductiveSystem direct_sum_nf_lift(const InductiveSystem& sys, int side_cap) {
  const int last = sys.last_stage();
  {
    int total = 0;
    for (int j = 0; j <= last; ++j)
      for (int s : sys.stage(j).blocks) total += s;
    if (total > side_cap)
      throw ShapeError("direct_sum_nf_lift: concatenated side total " +
                       std::to_string(total) + " exceeds cap " +
                       std::to_string(side_cap));
  }

  std::vector<AlgebraShape> lifted_stages;
  for (int n = 0; n <= last; ++n)
    lifted_stages.push_back(concat_shapes(sys.stages(), n));

  std::vector<CpMap> lifted_steps;
  for (int n = 0; n < last; ++n) {
    const AlgebraShape& dom = lifted_stages[n];
    const AlgebraShape& cod = lifted_stages[n + 1];
    const CpMap& inner = sys.steps()[n];
    const int inner_dom_blocks = sys.stage(n).num_blocks();
    const int dom_blocks = dom.num_blocks();
    const int inner_block_off = dom_blocks - inner_dom_blocks;

    if (inner.has_kraus()) {
      std::vector<KrausBlock> kraus;
      for (int d = 0; d < dom_blocks; ++d) {
        const int s = dom.blocks[d];
        kraus.push_back({d, d, {Matrix::Identity(s, s)}});
      }
      for (const auto& kb : inner.kraus())
        kraus.push_back(
            {inner_block_off + kb.from, dom_blocks + kb.to, kb.ops});
      lifted_steps.push_back(
          CpMap::from_kraus(dom, cod, std::move(kraus)));
    } else {
      Matrix action = Matrix::Zero(cod.dim(), dom.dim());
      action.topLeftCorner(dom.dim(), dom.dim()).setIdentity();
      const int inner_dim = sys.stage(n).dim();
      action.block(dom.dim(), dom.dim() - inner_dim,
                   sys.stage(n + 1).dim(), inner_dim) = inner.action_matrix();
      lifted_steps.push_back(CpMap::from_action(dom, cod, std::move(action)));
    }
  }
  return InductiveSystem::validated("nf_lift{" + sys.name() + "}",
                                    std::move(lifted_stages),
                                    std::move(lifted_steps));
}

Element nf_lift_embed(const InductiveSystem& sys, int k, const Element& x) {
  if (x.shape != sys.stage(k))
    throw ShapeError("nf_lift_embed: element shape mismatch");
  Element out = zero_element(concat_shapes(sys.stages(), k));
  int off = 0;
  for (int j = 0; j < k; ++j) off += sys.stage(j).num_blocks();
  for (int b = 0; b < x.num_blocks(); ++b) out.blocks[off + b] = x.blocks[b];
  return out;
}

Element nf_lift_project(const InductiveSystem& sys, int m, int j,
                        const Element& lifted) {
  if (j > m) throw ShapeError("nf_lift_project: need j <= m");
  if (lifted.shape != concat_shapes(sys.stages(), m))
    throw ShapeError("nf_lift_project: element does not match lifted stage");
  int off = 0;
  for (int i = 0; i < j; ++i) off += sys.stage(i).num_blocks();
  std::vector<Matrix> blocks;
  for (int b = 0; b < sys.stage(j).num_blocks(); ++b)
    blocks.push_back(lifted.blocks[off + b]);
  return Element(sys.stage(j), std::move(blocks));
}

// ---------------------------------------------------------------------------
// Schedules

void SubsystemSchedule::require_feasible() const {
  if (!feasible)
    throw ScheduleError(
        "schedule infeasible: " +
            (first_failure ? first_failure->inequality : std::string("unknown")),
        first_failure.value_or(Certificate{}));
}

namespace {

std::uint64_t pair_seed(int a, int b) {
  return 0x9e3779b97f4a7c15ull ^ (std::uint64_t(a) << 32) ^ std::uint64_t(b);
}

double summable_value(const CpapSystem& cpap, int earlier, int candidate,
                      double safety, int samples) {
  const CpMap round_trip =
      compose(cpap.up[candidate],
              compose(cpap.down[candidate], cpap.up[earlier]));
  Rng rng(pair_seed(earlier, candidate));
  return safety * map_difference_norm_estimate(cpap.up[earlier], round_trip,
                                               samples, rng);
}

}  // namespace

SubsystemSchedule make_summable(const CpapSystem& cpap,
                                const std::vector<double>& epsilons,
                                int required_length, double safety_factor,
                                int norm_samples) {
  cpap.validate();
  if (cpap.num_stages() < 2)
    throw ShapeError("make_summable: need at least two stages");
  for (size_t i = 0; i < epsilons.size(); ++i) {
    if (!(epsilons[i] > 0))
      throw ShapeError("make_summable: epsilons must be strictly positive");
    if (i > 0 && epsilons[i] > epsilons[i - 1])
      throw ShapeError("make_summable: epsilons must be non-increasing");
  }
  const int max_index =
      std::min<int>(cpap.num_stages(), static_cast<int>(epsilons.size())) - 1;
  if (required_length < 0) required_length = max_index + 1;

  SubsystemSchedule schedule;
  schedule.epsilons = epsilons;
  schedule.safety_factor = safety_factor;
  schedule.norm_samples = norm_samples;
  schedule.indices.push_back(0);

  while (static_cast<int>(schedule.indices.size()) < required_length) {
    bool extended = false;
    for (int cand = schedule.indices.back() + 1; cand <= max_index; ++cand) {
      std::vector<Certificate> cand_certs;
      bool ok = true;
      for (int earlier : schedule.indices) {
        Certificate cert;
        cert.inequality = "summable";
        cert.partner = earlier;
        cert.chosen = cand;
        cert.value =
            summable_value(cpap, earlier, cand, safety_factor, norm_samples);
        cert.bound = epsilons[cand];
        if (cert.value >= cert.bound) {
          ok = false;
          if (!schedule.first_failure) schedule.first_failure = cert;
          break;
        }
        cand_certs.push_back(std::move(cert));
      }
      if (ok) {
        schedule.indices.push_back(cand);
        schedule.certificates.insert(schedule.certificates.end(),
                                     cand_certs.begin(), cand_certs.end());
        extended = true;
        break;
      }
    }
    if (!extended) break;
  }
  schedule.feasible =
      static_cast<int>(schedule.indices.size()) >= required_length;
  if (schedule.feasible) schedule.first_failure.reset();
  return schedule;
}

namespace {

struct ExtractionContext {
  const CpapSystem& cpap;
  Element unit_el;
  std::vector<Element> h;        // h_m = psi_m(unit_el)
  std::vector<Element> up_unit;  // phi_j(1_{F_j})
  std::vector<std::vector<Element>> psi_probes;  // [m][probe]
};

// (unit-absorb) at position n for candidate j: max_{k <= n} of
// || phi_j(1) a_k - a_k || bounded by eps_n / 2.
bool check_unit_absorb(const ExtractionContext& ctx, int cand, int position,
                       double eps, std::vector<Certificate>& certs,
                       std::optional<Certificate>& failure) {
  const int probes = static_cast<int>(ctx.cpap.probes.size());
  for (int k = 0; k <= std::min(position, probes - 1); ++k) {
    Certificate cert;
    cert.inequality = "unit-absorb";
    cert.probe = k;
    cert.chosen = cand;
    cert.value = operator_norm(subtract(
        multiply(ctx.up_unit[cand], ctx.cpap.probes[k]), ctx.cpap.probes[k]));
    cert.bound = eps / 2.0;
    if (cert.value >= cert.bound) {
      if (!failure) failure = cert;
      return false;
    }
    certs.push_back(std::move(cert));
  }
  return true;
}

// (h-commute) for all available m >= cand and k < position:
// || psi_m(phi_prev(1)) psi_m(a_k) - h_m psi_m(a_k) || bounded by eps_prev.
bool check_h_commute(const ExtractionContext& ctx, int prev, int cand,
                     int position, double eps_prev,
                     std::vector<Certificate>& certs,
                     std::optional<Certificate>& failure) {
  const int probes = static_cast<int>(ctx.cpap.probes.size());
  for (int m = cand; m < ctx.cpap.num_stages(); ++m) {
    const Element weight = ctx.cpap.down[m].apply(ctx.up_unit[prev]);
    for (int k = 0; k < std::min(position, probes); ++k) {
      Certificate cert;
      cert.inequality = "h-commute";
      cert.probe = k;
      cert.stage = m;
      cert.chosen = cand;
      cert.partner = prev;
      cert.value = operator_norm(
          subtract(multiply(weight, ctx.psi_probes[m][k]),
                   multiply(ctx.h[m], ctx.psi_probes[m][k])));
      cert.bound = eps_prev;
      if (cert.value >= cert.bound) {
        if (!failure) failure = cert;
        return false;
      }
      certs.push_back(std::move(cert));
    }
  }
  return true;
}

// (unit-power) || phi_cand(psi_cand(phi_prev(1)^i)) - phi_prev(1)^i ||
// bounded by eps^2 / 3 for i in {1, 2}.
bool check_unit_power(const ExtractionContext& ctx, int prev, int cand,
                      double eps, std::vector<Certificate>& certs,
                      std::optional<Certificate>& failure) {
  Element power = ctx.up_unit[prev];
  for (int i = 1; i <= 2; ++i) {
    if (i == 2) power = multiply(ctx.up_unit[prev], ctx.up_unit[prev]);
    Certificate cert;
    cert.inequality = "unit-power";
    cert.probe = i;  // records the power
    cert.chosen = cand;
    cert.partner = prev;
    cert.value = operator_norm(subtract(
        ctx.cpap.up[cand].apply(ctx.cpap.down[cand].apply(power)), power));
    cert.bound = eps * eps / 3.0;
    if (cert.value >= cert.bound) {
      if (!failure) failure = cert;
      return false;
    }
    certs.push_back(std::move(cert));
  }
  return true;
}

}  // namespace

ExtractionResult extract_cpcstar_subsystem(const CpapSystem& cpap,
                                           const std::vector<double>& epsilons,
                                           const UnitPolicy& unit_policy,
                                           double oz_threshold) {
  cpap.validate();
  if (epsilons.empty())
    throw ShapeError("extract_cpcstar_subsystem: empty epsilon list");
  for (size_t i = 0; i < epsilons.size(); ++i) {
    if (!(epsilons[i] > 0))
      throw ShapeError("extract_cpcstar_subsystem: epsilons must be positive");
    if (i > 0 && epsilons[i] > epsilons[i - 1])
      throw ShapeError("extract_cpcstar_subsystem: epsilons must be non-increasing");
  }
  // The construction only makes sense for approximately order zero
  // downwards maps; probe each one.
  for (size_t n = 0; n < cpap.down.size(); ++n) {
    const double oz = order_zero_defect(cpap.down[n]);
    if (oz > oz_threshold)
      throw ValidationError("extract_cpcstar_subsystem: down map " +
                            std::to_string(n) + " has order-zero defect " +
                            std::to_string(oz) + " > threshold " +
                            std::to_string(oz_threshold));
  }

  ExtractionContext ctx{cpap, {}, {}, {}, {}};
  ctx.unit_el = unit_policy.algebra_unit ? *unit_policy.algebra_unit
                                         : unit(cpap.algebra);
  if (ctx.unit_el.shape != cpap.algebra)
    throw ShapeError("extract_cpcstar_subsystem: unit policy element shape mismatch");
  for (int m = 0; m < cpap.num_stages(); ++m) {
    ctx.h.push_back(cpap.down[m].apply(ctx.unit_el));
    ctx.up_unit.push_back(cpap.up[m].apply(unit(cpap.stages[m])));
    std::vector<Element> imgs;
    imgs.reserve(cpap.probes.size());
    for (const auto& a : cpap.probes) imgs.push_back(cpap.down[m].apply(a));
    ctx.psi_probes.push_back(std::move(imgs));
  }

  SubsystemSchedule schedule;
  schedule.epsilons = epsilons;
  const int target =
      std::min<int>(cpap.num_stages(), static_cast<int>(epsilons.size()));

  int scan_from = 0;
  while (static_cast<int>(schedule.indices.size()) < target) {
    const int position = static_cast<int>(schedule.indices.size());
    const double eps = epsilons[position];
    bool extended = false;
    for (int cand = scan_from; cand < cpap.num_stages(); ++cand) {
      std::vector<Certificate> certs;
      std::optional<Certificate> failure;
      bool ok = check_unit_absorb(ctx, cand, position, eps, certs, failure);
      if (ok && position > 0) {
        const int prev = schedule.indices.back();
        ok = check_h_commute(ctx, prev, cand, position, epsilons[position - 1],
                             certs, failure) &&
             check_unit_power(ctx, prev, cand, eps, certs, failure);
      }
      if (ok) {
        schedule.indices.push_back(cand);
        schedule.certificates.insert(schedule.certificates.end(),
                                     certs.begin(), certs.end());
        scan_from = cand + 1;
        extended = true;
        break;
      }
      if (failure && !schedule.first_failure) schedule.first_failure = failure;
    }
    if (!extended) break;
  }
  schedule.feasible = static_cast<int>(schedule.indices.size()) >= target;
  if (schedule.feasible) schedule.first_failure.reset();

  ExtractionResult result;
  result.schedule = std::move(schedule);
  if (result.schedule.indices.size() >= 1) {
    std::vector<AlgebraShape> stages;
    std::vector<CpMap> steps;
    for (int j : result.schedule.indices) stages.push_back(cpap.stages[j]);
    for (size_t t = 0; t + 1 < result.schedule.indices.size(); ++t)
      steps.push_back(compose(cpap.down[result.schedule.indices[t + 1]],
                              cpap.up[result.schedule.indices[t]]));
    result.subsystem = InductiveSystem::validated(
        cpap.name + "-sub", std::move(stages), std::move(steps));
  }
  return result;
}

bool verify_schedule(const CpapSystem& cpap,
                     const SubsystemSchedule& schedule) {
  Element unit_el = unit(cpap.algebra);
  for (const Certificate& cert : schedule.certificates) {
    double value = 0.0;
    if (cert.inequality == "summable") {
      value = summable_value(cpap, cert.partner, cert.chosen,
                             schedule.safety_factor, schedule.norm_samples);
    } else if (cert.inequality == "unit-absorb") {
      const Element up_unit =
          cpap.up[cert.chosen].apply(unit(cpap.stages[cert.chosen]));
      value = operator_norm(subtract(
          multiply(up_unit, cpap.probes[cert.probe]), cpap.probes[cert.probe]));
    } else if (cert.inequality == "h-commute") {
      const Element up_unit =
          cpap.up[cert.partner].apply(unit(cpap.stages[cert.partner]));
      const Element weight = cpap.down[cert.stage].apply(up_unit);
      const Element img = cpap.down[cert.stage].apply(cpap.probes[cert.probe]);
      const Element h_m = cpap.down[cert.stage].apply(unit_el);
      value = operator_norm(
          subtract(multiply(weight, img), multiply(h_m, img)));
    } else if (cert.inequality == "unit-power") {
      const Element up_unit =
          cpap.up[cert.partner].apply(unit(cpap.stages[cert.partner]));
      Element power = up_unit;
      if (cert.probe == 2) power = multiply(up_unit, up_unit);
      value = operator_norm(subtract(
          cpap.up[cert.chosen].apply(cpap.down[cert.chosen].apply(power)),
          power));
    } else {
      return false;
    }
    if (value > cert.bound) return false;
  }
  return true;
}

// ---------------------------------------------------------------------------
// CPAP probe reports

std::vector<EmbeddingDefectRow> downwards_embedding_probe(
    const CpapSystem& cpap, const std::vector<int>& levels, int k) {
  cpap.validate();
  const int stages = cpap.num_stages();
  const int tail_start = std::max(0, stages - std::max(1, stages / 4));
  const InductiveSystem assoc = cpap.associated_system(cpap.name + "-assoc");

  std::vector<EmbeddingDefectRow> rows;
  for (size_t p = 0; p < cpap.probes.size(); ++p) {
    const Element& a = cpap.probes[p];
    // Finite shadow of the coherence between down images and composite
    // images: send the probe down at stage k, lift its final composite
    // image back to the algebra, and compare trailing down images.
    const Element xk = cpap.down[k].apply(a);
    const Element a_lim =
        cpap.up[stages - 1].apply(assoc.composite(stages - 1, k).apply(xk));
    for (int r : levels) {
      EmbeddingDefectRow row;
      row.probe = static_cast<int>(p);
      row.level = r;
      const Element amp = amplify_element(a, r);
      const double norm_a = operator_norm(a);
      double drop = std::numeric_limits<double>::infinity();
      for (int n = tail_start; n < stages; ++n)
        drop = std::min(drop, operator_norm(apply_amplified(cpap.down[n], r,
                                                            amp)) -
                                  norm_a);
      row.trailing_norm_drop = drop;
      double coherence = 0.0;
      for (int m = tail_start; m < stages; ++m)
        coherence = std::max(
            coherence,
            operator_norm(subtract(cpap.down[m].apply(a_lim),
                                   assoc.composite(m, k).apply(xk))));
      row.image_coherence = coherence;
      rows.push_back(row);
    }
  }
  return rows;
}

std::vector<HbarRow> h_bar_consistency_probe(const CpapSystem& cpap,
                                             const UnitPolicy& policy) {
  cpap.validate();
  const Element unit_el =
      policy.algebra_unit ? *policy.algebra_unit : unit(cpap.algebra);
  const int stages = cpap.num_stages();
  const int tail_start = std::max(0, stages - std::max(1, stages / 4));
  std::vector<HbarRow> rows;
  for (int m = tail_start; m < stages; ++m) {
    const Element h_m = cpap.down[m].apply(unit_el);
    for (size_t pa = 0; pa < cpap.probes.size(); ++pa) {
      const Element psi_a = cpap.down[m].apply(cpap.probes[pa]);
      for (size_t pb = 0; pb < cpap.probes.size(); ++pb) {
        HbarRow row;
        row.probe_a = static_cast<int>(pa);
        row.probe_b = static_cast<int>(pb);
        row.stage = m;
        const Element psi_b = cpap.down[m].apply(cpap.probes[pb]);
        const Element ab = multiply(cpap.probes[pa], cpap.probes[pb]);
        row.product_defect = operator_norm(subtract(
            multiply(h_m, cpap.down[m].apply(ab)), multiply(psi_a, psi_b)));
        row.commutation_defect = operator_norm(
            subtract(multiply(h_m, psi_a), multiply(psi_a, h_m)));
        row.norm_defect = std::abs(operator_norm(multiply(h_m, psi_a)) -
                                   operator_norm(cpap.probes[pa]));
        rows.push_back(row);
      }
    }
  }
  return rows;
}

}  // namespace cpcstar
