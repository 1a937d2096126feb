#include "cpcstar/system.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <sstream>
#include <thread>
#include <tuple>

namespace cpcstar {

namespace {

constexpr int kValidationChoiSideCap = 512;

void check_stage(const InductiveSystem& sys, int n, const char* what) {
  if (n < 0 || n > sys.last_stage())
    throw ShapeError(std::string(what) + ": stage " + std::to_string(n) +
                     " out of range [0, " + std::to_string(sys.last_stage()) +
                     "]");
}

void check_element(const InductiveSystem& sys, int k, const Element& x,
                   const char* what) {
  if (x.shape != sys.stage(k))
    throw ShapeError(std::string(what) + ": element shape " +
                     x.shape.to_string() + " does not match stage " +
                     std::to_string(k) + " shape " +
                     sys.stage(k).to_string());
}

}  // namespace

InductiveSystem::InductiveSystem(const InductiveSystem& other)
    : name_(other.name_),
      stages_(other.stages_),
      steps_(other.steps_),
      validation_(other.validation_) {}

InductiveSystem& InductiveSystem::operator=(const InductiveSystem& other) {
  if (this == &other) return *this;
  name_ = other.name_;
  stages_ = other.stages_;
  steps_ = other.steps_;
  validation_ = other.validation_;
  composite_cache_.clear();
  return *this;
}

const AlgebraShape& InductiveSystem::stage(int n) const {
  check_stage(*this, n, "stage");
  return stages_[n];
}

InductiveSystem InductiveSystem::validated(std::string name,
                                           std::vector<AlgebraShape> stages,
                                           std::vector<CpMap> steps,
                                           const Tolerances& tol) {
  tol.validate();
  if (stages.empty()) throw ValidationError("system has no stages");
  if (steps.size() + 1 != stages.size())
    throw ValidationError("system with " + std::to_string(stages.size()) +
                          " stages needs " + std::to_string(stages.size() - 1) +
                          " steps, got " + std::to_string(steps.size()));
  InductiveSystem sys;
  sys.name_ = std::move(name);
  for (size_t n = 0; n < steps.size(); ++n) {
    const CpMap& step = steps[n];
    if (step.domain() != stages[n] || step.codomain() != stages[n + 1])
      throw ValidationError("step " + std::to_string(n) + " maps " +
                            step.domain().to_string() + " -> " +
                            step.codomain().to_string() + ", expected " +
                            stages[n].to_string() + " -> " +
                            stages[n + 1].to_string());
    StepVerdict verdict;
    try {
      double min_eig = 0.0;
      for (const auto& cb : choi(step, kValidationChoiSideCap))
        min_eig = std::min(min_eig, cb.min_eigenvalue);
      verdict.choi_min_eigenvalue = min_eig;
      verdict.is_cp = min_eig >= -tol.psd_tol;
    } catch (const ShapeError&) {
      if (!step.has_kraus()) throw;
      // Choi pair too large to check directly; the Kraus form is
      // completely positive by construction.
      verdict.cp_by_construction = true;
      verdict.is_cp = true;
    }
    if (!verdict.is_cp)
      throw ValidationError(
          "step " + std::to_string(n) +
          " fails complete positivity: Choi min eigenvalue " +
          std::to_string(verdict.choi_min_eigenvalue));
    verdict.is_contractive =
        operator_norm(step.apply(unit(step.domain()))) <= 1.0 + tol.eq_tol;
    if (!verdict.is_contractive)
      throw ValidationError("step " + std::to_string(n) +
                            " is not contractive: ||step(1)|| = " +
                            std::to_string(operator_norm(
                                step.apply(unit(step.domain())))));
    sys.validation_.push_back(verdict);
  }
  sys.stages_ = std::move(stages);
  sys.steps_ = std::move(steps);
  return sys;
}

const CpMap& InductiveSystem::composite(int m, int n) const {
  check_stage(*this, n, "composite");
  check_stage(*this, m, "composite");
  if (m < n)
    throw ShapeError("composite: need m >= n, got m=" + std::to_string(m) +
                     ", n=" + std::to_string(n));
  std::lock_guard<std::mutex> lock(*cache_mutex_);
  auto it = composite_cache_.find({m, n});
  if (it != composite_cache_.end()) return it->second;
  // Extend the longest cached prefix one step at a time.
  int j = m;
  while (j > n && !composite_cache_.count({j, n})) --j;
  if (j == n)
    composite_cache_.emplace(std::make_pair(n, n),
                             CpMap::identity(stages_[n]));
  for (; j < m; ++j) {
    const CpMap& prev = composite_cache_.at({j, n});
    composite_cache_.emplace(std::make_pair(j + 1, n),
                             compose(steps_[j], prev));
  }
  return composite_cache_.at({m, n});
}

namespace {

void check_cpc_indices(const InductiveSystem& sys, int k, int m, int n,
                       int l) {
  check_stage(sys, k, "cpc_defect");
  check_stage(sys, m, "cpc_defect");
  if (!(k < n && n < m))
    throw ShapeError("cpc_defect: need k < n < m, got k=" + std::to_string(k) +
                     ", n=" + std::to_string(n) + ", m=" + std::to_string(m));
  if (l >= 0 && !(k < l && l < m))
    throw ShapeError("cpc_defect: need k < l < m, got l=" + std::to_string(l));
}

}  // namespace

double cpc_defect(const InductiveSystem& sys, int k, const Element& x,
                  const Element& y, int m, int n, int l) {
  check_cpc_indices(sys, k, m, n, l);
  check_element(sys, k, x, "cpc_defect");
  check_element(sys, k, y, "cpc_defect");
  const Element prod_n = multiply(sys.composite(n, k).apply(x),
                                  sys.composite(n, k).apply(y));
  const Element pushed = sys.composite(m, n).apply(prod_n);
  const Element unit_image = sys.composite(m, l).apply(unit(sys.stage(l)));
  const Element direct = multiply(sys.composite(m, k).apply(x),
                                  sys.composite(m, k).apply(y));
  return operator_norm(subtract(multiply(unit_image, pushed), direct));
}

double nf_defect(const InductiveSystem& sys, int k, const Element& x,
                 const Element& y, int m, int n) {
  check_cpc_indices(sys, k, m, n, -1);
  check_element(sys, k, x, "nf_defect");
  check_element(sys, k, y, "nf_defect");
  const Element prod_n = multiply(sys.composite(n, k).apply(x),
                                  sys.composite(n, k).apply(y));
  const Element pushed = sys.composite(m, n).apply(prod_n);
  const Element direct = multiply(sys.composite(m, k).apply(x),
                                  sys.composite(m, k).apply(y));
  return operator_norm(subtract(pushed, direct));
}

double commutator_defect(const InductiveSystem& sys, int k, const Element& x,
                         int m, int n) {
  check_cpc_indices(sys, k, m, n, -1);
  check_element(sys, k, x, "commutator_defect");
  const Element e = sys.composite(m, n).apply(unit(sys.stage(n)));
  const Element xm = sys.composite(m, k).apply(x);
  return operator_norm(subtract(multiply(e, xm), multiply(xm, e)));
}

double order_unit_domination_margin(const InductiveSystem& sys, int k,
                                    const Element& x, int m, int n, int r) {
  check_cpc_indices(sys, k, m, n, -1);
  if (x.shape != amplified(sys.stage(k), r))
    throw ShapeError(
        "order_unit_domination: element must live in the r-amplified stage-k "
        "shape " +
        amplified(sys.stage(k), r).to_string());
  const Element xn = apply_amplified(sys.composite(n, k), r, x);
  const double bound = operator_norm(xn);
  const Element e = apply_amplified(sys.composite(m, n), r,
                                    unit(amplified(sys.stage(n), r)));
  const Element xm = apply_amplified(sys.composite(m, k), r, x);
  return min_eigenvalue(subtract(scale(bound, e), xm));
}

bool order_unit_domination_check(const InductiveSystem& sys, int k,
                                 const Element& x, int m, int n,
                                 const Tolerances& tol, int r) {
  tol.validate();
  if (hermiticity_defect(x) > tol.herm_tol)
    throw ValidationError(
        "order_unit_domination_check: element is not self-adjoint within "
        "tolerance");
  return order_unit_domination_margin(sys, k, x, m, n, r) >= -tol.psd_tol;
}

std::vector<NondegeneracyPoint> nondegeneracy_profile(
    const InductiveSystem& sys, int k, const Element& x, int j,
    const std::vector<std::pair<int, int>>& mn_pairs, const Tolerances& tol) {
  if (j < 1) throw ShapeError("nondegeneracy_profile: power must be >= 1");
  std::vector<NondegeneracyPoint> out;
  out.reserve(mn_pairs.size());
  for (const auto& [m, n] : mn_pairs) {
    check_cpc_indices(sys, k, m, n, -1);
    const Element e = sys.composite(m, n).apply(unit(sys.stage(n)));
    Element ej = e;
    for (int t = 1; t < j; ++t) ej = multiply(ej, e);
    const Element xm = sys.composite(m, k).apply(x);
    const double denom = operator_norm(xm);
    if (denom < tol.eq_tol)
      throw ValidationError(
          "nondegeneracy_profile: ||rho_{m,k}(x)|| below eq_tol, ratio "
          "undefined");
    out.push_back({m, n, operator_norm(multiply(ej, xm)) / denom});
  }
  return out;
}

double approx_identity_defect(const InductiveSystem& sys, int k,
                              const Element& x, const Element& y, int n,
                              int m) {
  check_cpc_indices(sys, k, m, n, -1);
  const Element e = sys.composite(m, n).apply(unit(sys.stage(n)));
  const Element prod = multiply(sys.composite(m, k).apply(x),
                                sys.composite(m, k).apply(y));
  return operator_norm(subtract(multiply(e, prod), prod));
}

double lift_coherence_defect(const InductiveSystem& sys,
                             const std::vector<Element>& lift, int m, int n) {
  if (static_cast<int>(lift.size()) != sys.last_stage() + 1)
    throw ShapeError("lift_coherence_defect: lift needs one element per stage");
  check_stage(sys, n, "lift_coherence_defect");
  check_stage(sys, m, "lift_coherence_defect");
  if (!(n < m)) throw ShapeError("lift_coherence_defect: need n < m");
  for (int j = 0; j <= sys.last_stage(); ++j)
    check_element(sys, j, lift[j], "lift_coherence_defect");
  return operator_norm(
      subtract(sys.composite(m, n).apply(lift[n]), lift[m]));
}

Element product_at(const InductiveSystem& sys, int k, const Element& x,
                   const Element& y, int n, int horizon) {
  check_stage(sys, horizon, "product_at");
  if (!(k < n && n <= horizon))
    throw ShapeError("product_at: need k < n <= horizon, got k=" +
                     std::to_string(k) + ", n=" + std::to_string(n) +
                     ", horizon=" + std::to_string(horizon));
  check_element(sys, k, x, "product_at");
  check_element(sys, k, y, "product_at");
  const Element prod_n = multiply(sys.composite(n, k).apply(x),
                                  sys.composite(n, k).apply(y));
  return sys.composite(horizon, n).apply(prod_n);
}

std::vector<std::pair<int, double>> limit_norm_profile(
    const InductiveSystem& sys, int k, const Element& x,
    const std::vector<int>& stages) {
  check_element(sys, k, x, "limit_norm_profile");
  std::vector<std::pair<int, double>> out;
  out.reserve(stages.size());
  for (int m : stages) {
    check_stage(sys, m, "limit_norm_profile");
    if (m < k) throw ShapeError("limit_norm_profile: need m >= k");
    out.push_back({m, operator_norm(sys.composite(m, k).apply(x))});
  }
  return out;
}

// ---------------------------------------------------------------------------
// Sweeps

void parallel_for(int n, const std::function<void(int)>& fn) {
  const unsigned hw = std::thread::hardware_concurrency();
  const int workers = std::min<int>(n, hw > 0 ? static_cast<int>(hw) : 1);
  if (workers <= 1 || n <= 1) {
    for (int i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<int> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  auto worker = [&] {
    for (;;) {
      const int i = next.fetch_add(1);
      if (i >= n) return;
      try {
        fn(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!error) error = std::current_exception();
        return;
      }
    }
  };
  std::vector<std::thread> threads;
  threads.reserve(workers);
  for (int t = 0; t < workers; ++t) threads.emplace_back(worker);
  for (auto& t : threads) t.join();
  if (error) std::rethrow_exception(error);
}

GeneratorPolicy GeneratorPolicy::hermitian() {
  GeneratorPolicy p;
  p.kind = Kind::hermitian;
  return p;
}

GeneratorPolicy GeneratorPolicy::random(int count, std::uint64_t seed) {
  GeneratorPolicy p;
  p.kind = Kind::random;
  p.count = count;
  p.seed = seed;
  return p;
}

GeneratorPolicy GeneratorPolicy::explicit_list(
    std::vector<std::pair<Element, Element>> pairs,
    std::vector<std::string> labels) {
  GeneratorPolicy p;
  p.kind = Kind::explicit_pairs;
  p.pairs = std::move(pairs);
  p.pair_labels = std::move(labels);
  return p;
}

void DefectReport::sort_entries() {
  std::stable_sort(entries.begin(), entries.end(),
                   [](const DefectEntry& a, const DefectEntry& b) {
                     return std::tie(a.k, a.n, a.l, a.m, a.kind, a.pair) <
                            std::tie(b.k, b.n, b.l, b.m, b.kind, b.pair);
                   });
}

double DefectReport::max_value() const {
  double v = 0.0;
  for (const auto& e : entries) v = std::max(v, e.value);
  return v;
}

TrendSummary summarize_trend(const std::vector<DefectEntry>& entries,
                             double plateau_tol) {
  std::map<int, double> window;
  for (const auto& e : entries) {
    const int c = e.l >= 0 ? std::min(e.n, e.l) : e.n;
    auto [it, inserted] = window.emplace(c, e.value);
    if (!inserted) it->second = std::max(it->second, e.value);
  }
  TrendSummary trend;
  trend.plateau_tol = plateau_tol;
  double prev = std::numeric_limits<double>::infinity();
  for (const auto& [c, v] : window) {
    trend.window_max.push_back({c, v});
    if (v > prev + plateau_tol) trend.nonincreasing = false;
    prev = v;
  }
  return trend;
}

namespace {

std::vector<std::pair<Element, Element>> generator_pairs(
    const InductiveSystem& sys, int k, const GeneratorPolicy& policy,
    std::vector<std::string>& labels) {
  const AlgebraShape& shape = sys.stage(k);
  std::vector<std::pair<Element, Element>> pairs;
  switch (policy.kind) {
    case GeneratorPolicy::Kind::units: {
      const auto units = matrix_units(shape);
      const auto unit_labels = matrix_unit_labels(shape);
      for (size_t a = 0; a < units.size(); ++a)
        for (size_t b = 0; b < units.size(); ++b) {
          pairs.push_back({units[a], units[b]});
          labels.push_back(unit_labels[a] + "*" + unit_labels[b]);
        }
      break;
    }
    case GeneratorPolicy::Kind::hermitian: {
      const auto basis = hermitian_basis(shape);
      const auto basis_labels = hermitian_basis_labels(shape);
      for (size_t a = 0; a < basis.size(); ++a)
        for (size_t b = 0; b < basis.size(); ++b) {
          pairs.push_back({basis[a], basis[b]});
          labels.push_back(basis_labels[a] + "*" + basis_labels[b]);
        }
      break;
    }
    case GeneratorPolicy::Kind::random: {
      Rng rng(policy.seed);
      for (int t = 0; t < policy.count; ++t) {
        pairs.push_back(
            {rng.random_contraction(shape), rng.random_contraction(shape)});
        labels.push_back("rand" + std::to_string(t));
      }
      break;
    }
    case GeneratorPolicy::Kind::explicit_pairs: {
      pairs = policy.pairs;
      labels = policy.pair_labels;
      if (labels.size() != pairs.size()) {
        labels.clear();
        for (size_t t = 0; t < pairs.size(); ++t)
          labels.push_back("pair" + std::to_string(t));
      }
      for (const auto& [x, y] : pairs) {
        if (x.shape != shape || y.shape != shape)
          throw ShapeError("defect_sweep: explicit pair shape mismatch");
      }
      break;
    }
  }
  return pairs;
}

std::string policy_description(const GeneratorPolicy& policy, size_t pairs) {
  std::ostringstream os;
  switch (policy.kind) {
    case GeneratorPolicy::Kind::units: os << "units"; break;
    case GeneratorPolicy::Kind::hermitian: os << "hermitian"; break;
    case GeneratorPolicy::Kind::random:
      os << "random:" << policy.count;
      break;
    case GeneratorPolicy::Kind::explicit_pairs: os << "explicit"; break;
  }
  os << "(" << pairs << " pairs)";
  return os.str();
}

}  // namespace

DefectReport defect_sweep(const InductiveSystem& sys, int k,
                          const GeneratorPolicy& policy,
                          const IndexGrid& grid) {
  std::vector<std::string> labels;
  const auto pairs = generator_pairs(sys, k, policy, labels);
  const int P = static_cast<int>(pairs.size());
  const int last = sys.last_stage();

  std::vector<int> ms, ns, ls;
  for (int m = std::max(grid.m_lo, k + 2); m <= std::min(grid.m_hi, last); ++m)
    ms.push_back(m);
  if (ms.empty() && P > 0)
    throw ShapeError("defect_sweep: no admissible m in the grid");

  // Warm the composite cache before the parallel phase.
  for (int m : ms)
    for (int j = k; j <= m; ++j) {
      sys.composite(m, j);
      sys.composite(j, k);
    }

  struct Cell {
    int pair, m, n, l;  // l == -1 for the nf rows
  };
  std::vector<Cell> cells;
  for (int p = 0; p < P; ++p)
    for (int m : ms)
      for (int n = std::max(grid.n_lo, k + 1); n <= std::min(grid.n_hi, m - 1);
           ++n) {
        cells.push_back({p, m, n, -1});
        for (int l = std::max(grid.l_lo, k + 1);
             l <= std::min(grid.l_hi, m - 1); ++l)
          cells.push_back({p, m, n, l});
      }

  // Shared images: unit images per (m, l), generator images and their
  // products per (pair, m), pushed products per (pair, m, n).
  std::map<std::pair<int, int>, Element> unit_images;
  for (int m : ms)
    for (int l = k + 1; l < m; ++l)
      unit_images.emplace(std::make_pair(m, l),
                          sys.composite(m, l).apply(unit(sys.stage(l))));

  std::map<std::pair<int, int>, Element> direct_products;  // (pair, m)
  std::map<std::tuple<int, int, int>, Element> pushed_products;  // (pair,m,n)
  {
    std::vector<std::tuple<int, int, int>> jobs;
    for (int p = 0; p < P; ++p)
      for (int m : ms) {
        jobs.push_back({p, m, -1});
        for (int n = std::max(grid.n_lo, k + 1);
             n <= std::min(grid.n_hi, m - 1); ++n)
          jobs.push_back({p, m, n});
      }
    for (const auto& [p, m, n] : jobs) {
      if (n < 0)
        direct_products.emplace(std::make_pair(p, m), Element{});
      else
        pushed_products.emplace(std::make_tuple(p, m, n), Element{});
    }
    parallel_for(static_cast<int>(jobs.size()), [&](int idx) {
      const auto& [p, m, n] = jobs[idx];
      if (n < 0) {
        direct_products.at({p, m}) =
            multiply(sys.composite(m, k).apply(pairs[p].first),
                     sys.composite(m, k).apply(pairs[p].second));
      } else {
        const Element prod_n =
            multiply(sys.composite(n, k).apply(pairs[p].first),
                     sys.composite(n, k).apply(pairs[p].second));
        pushed_products.at({p, m, n}) = sys.composite(m, n).apply(prod_n);
      }
    });
  }

  std::vector<DefectEntry> entries(cells.size());
  parallel_for(static_cast<int>(cells.size()), [&](int idx) {
    const Cell& c = cells[idx];
    const Element& pushed = pushed_products.at({c.pair, c.m, c.n});
    const Element& direct = direct_products.at({c.pair, c.m});
    DefectEntry e;
    e.k = k;
    e.m = c.m;
    e.n = c.n;
    e.l = c.l;
    e.pair = labels[c.pair];
    if (c.l < 0) {
      e.kind = "nf";
      e.value = operator_norm(subtract(pushed, direct));
    } else {
      e.kind = "cpc";
      e.value = operator_norm(subtract(
          multiply(unit_images.at({c.m, c.l}), pushed), direct));
    }
    entries[idx] = std::move(e);
  });

  DefectReport report;
  report.kind = "cpc+nf";
  report.entries = std::move(entries);
  report.sort_entries();
  for (const auto& e : report.entries) {
    if (e.l < 0) continue;
    auto [it, inserted] = report.nl_max.emplace(std::make_pair(e.n, e.l),
                                                e.value);
    if (!inserted) it->second = std::max(it->second, e.value);
  }
  std::vector<DefectEntry> cpc_only;
  for (const auto& e : report.entries)
    if (e.l >= 0) cpc_only.push_back(e);
  report.trend = summarize_trend(cpc_only);
  report.metadata["system"] = sys.name();
  report.metadata["k"] = std::to_string(k);
  report.metadata["generators"] = policy_description(policy, pairs.size());
  {
    std::ostringstream os;
    os << "m" << grid.m_lo << ":" << grid.m_hi << ",n" << grid.n_lo << ":"
       << grid.n_hi << ",l" << grid.l_lo << ":" << grid.l_hi;
    report.metadata["grid"] = os.str();
  }
  report.metadata["seed"] = std::to_string(policy.seed);
  return report;
}

}  // namespace cpcstar
