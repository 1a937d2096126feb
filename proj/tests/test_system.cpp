#include <doctest.h>

#include <cmath>
#include <functional>

#include "cpcstar/constructions.hpp"
#include "cpcstar/system.hpp"

using namespace cpcstar;

namespace {

// Stages M_{b^n} with steps x -> c_n (x (x) 1_b): contractive scaled
// embeddings whose defects have closed forms.
InductiveSystem scaled_embedding_system(int base, int depth,
                                        const std::vector<double>& scales) {
  std::vector<AlgebraShape> stages;
  std::vector<CpMap> steps;
  int side = 1;
  for (int n = 0; n <= depth; ++n) {
    stages.push_back(AlgebraShape({side}));
    side *= base;
  }
  for (int n = 0; n < depth; ++n) {
    const int k = stages[n].blocks[0];
    const double c = scales[n % scales.size()];
    std::vector<Matrix> ops;
    for (int s = 0; s < base; ++s) {
      Matrix e = Matrix::Zero(base, 1);
      e(s, 0) = 1.0;
      ops.push_back(std::sqrt(c) * kron(Matrix::Identity(k, k), e));
    }
    steps.push_back(
        CpMap::from_kraus(stages[n], stages[n + 1], {{0, 0, std::move(ops)}}));
  }
  return InductiveSystem::validated("scaled", std::move(stages),
                                    std::move(steps));
}

double scale_product(const std::vector<double>& scales, int from, int to) {
  double c = 1.0;
  for (int j = from; j < to; ++j) c *= scales[j % scales.size()];
  return c;
}

// ---------------------------------------------------------------------------
// Scalar oracle for the interval model: piecewise-linear interpolation and
// sampling computed directly on grid values, independent of the map
// machinery.

using GridFn = std::vector<double>;

GridFn sample_fn(const std::function<double(double)>& f, int g) {
  GridFn v(g);
  for (int i = 0; i < g; ++i) v[i] = f(double(i) / (g - 1));
  return v;
}

double interp_at(const GridFn& v, double t) {
  const int g = static_cast<int>(v.size());
  const double pos = t * (g - 1);
  const int j = std::min(g - 2, static_cast<int>(std::floor(pos)));
  const double w = pos - j;
  return (1 - w) * v[j] + w * v[j + 1];
}

GridFn resample(const GridFn& v, int g_new) {
  GridFn out(g_new);
  for (int i = 0; i < g_new; ++i)
    out[i] = interp_at(v, double(i) / (g_new - 1));
  return out;
}

GridFn pointwise(const GridFn& a, const GridFn& b) {
  GridFn out(a.size());
  for (size_t i = 0; i < a.size(); ++i) out[i] = a[i] * b[i];
  return out;
}

double sup_diff(const GridFn& a, const GridFn& b) {
  double d = 0;
  for (size_t i = 0; i < a.size(); ++i) d = std::max(d, std::abs(a[i] - b[i]));
  return d;
}

Element to_element(const GridFn& v) {
  Element e = zero_element(AlgebraShape(std::vector<int>(v.size(), 1)));
  for (size_t i = 0; i < v.size(); ++i) e.blocks[i](0, 0) = v[i];
  return e;
}

GridFn from_element(const Element& e) {
  GridFn v(e.num_blocks());
  for (int i = 0; i < e.num_blocks(); ++i) v[i] = e.blocks[i](0, 0).real();
  return v;
}

}  // namespace

TEST_CASE("composite coherence and identity") {
  const InductiveSystem sys = uhf_system(2, 5);
  const CpMap& id3 = sys.composite(3, 3);
  const Element x = matrix_unit(sys.stage(3), 0, 1, 5);
  CHECK(operator_norm(subtract(id3.apply(x), x)) == 0.0);

  Rng rng(71);
  for (int n = 0; n <= 3; ++n)
    for (int j = n; j <= 5; ++j)
      for (int m = j; m <= 5; ++m) {
        const Element probe = rng.random_contraction(sys.stage(n));
        const Element direct = sys.composite(m, n).apply(probe);
        const Element split =
            sys.composite(m, j).apply(sys.composite(j, n).apply(probe));
        CHECK(operator_norm(subtract(direct, split)) <= 1e-12);
      }
  CHECK_THROWS_AS(sys.composite(1, 3), ShapeError);
  CHECK_THROWS_AS(sys.composite(9, 0), ShapeError);
}

TEST_CASE("uhf composite is iterated tensoring with the identity") {
  const InductiveSystem sys = uhf_system(2, 3);
  Rng rng(73);
  const Element x = rng.random_element(sys.stage(1));  // M_2
  const Element image = sys.composite(3, 1).apply(x);  // expect x (x) 1_4
  const Matrix expected = kron(x.blocks[0], Matrix::Identity(4, 4));
  CHECK((image.blocks[0] - expected).norm() <= 1e-13);
}

TEST_CASE("multiplicative systems have vanishing defects") {
  const InductiveSystem sys = uhf_system(2, 5);
  for (int k : {0, 1})
    for (const auto& x : matrix_units(sys.stage(k)))
      for (const auto& y : matrix_units(sys.stage(k))) {
        CHECK(cpc_defect(sys, k, x, y, 5, 3, 2) <= 1e-12);
        CHECK(cpc_defect(sys, k, x, y, 4, 2, 3) <= 1e-12);
        CHECK(nf_defect(sys, k, x, y, 5, 2) <= 1e-12);
      }
  const Element e11 = matrix_units(sys.stage(0))[0];
  CHECK_THROWS_AS(cpc_defect(sys, 0, e11, e11, 3, 3, 1), ShapeError);
  CHECK_THROWS_AS(cpc_defect(sys, 2, e11, e11, 4, 3, 3), ShapeError);
}

TEST_CASE("scaled embeddings match the closed-form defect") {
  const std::vector<double> scales = {0.9, 0.8, 0.95, 0.85, 0.7};
  const InductiveSystem sys = scaled_embedding_system(2, 5, scales);
  Rng rng(79);
  const int k = 0;
  const Element x = rng.random_contraction(sys.stage(k));
  const Element y = rng.random_contraction(sys.stage(k));
  const double norm_xy = operator_norm(multiply(x, y));
  for (const auto& [m, n, l] :
       std::vector<std::array<int, 3>>{{3, 1, 2}, {4, 2, 1}, {5, 3, 3}, {5, 1, 4}}) {
    const double c_lm = scale_product(scales, l, m);
    const double c_nm = scale_product(scales, n, m);
    const double c_kn = scale_product(scales, k, n);
    const double expected =
        std::abs(c_lm - c_nm) * c_nm * c_kn * c_kn * norm_xy;
    CHECK(cpc_defect(sys, k, x, y, m, n, l) ==
          doctest::Approx(expected).epsilon(1e-10));
  }
  // norm profile has the closed scalar form and is non-increasing
  std::vector<int> stages{0, 1, 2, 3, 4, 5};
  const auto profile = limit_norm_profile(sys, 0, x, stages);
  for (const auto& [m, norm] : profile)
    CHECK(norm == doctest::Approx(scale_product(scales, 0, m) *
                                  operator_norm(x))
                      .epsilon(1e-12));
  for (size_t i = 1; i < profile.size(); ++i)
    CHECK(profile[i].second <= profile[i - 1].second + 1e-12);
}

TEST_CASE("interval steps are row-stochastic and defects decay") {
  const IntervalModel model = interval_sampling_system({3, 5, 9, 17, 33});
  const InductiveSystem& sys = model.system;

  for (const auto& step : sys.steps()) {
    const Matrix& action = step.action_matrix();
    for (int r = 0; r < action.rows(); ++r) {
      double row_sum = 0;
      for (int c = 0; c < action.cols(); ++c) {
        CHECK(action(r, c).real() >= -1e-15);
        CHECK(std::abs(action(r, c).imag()) <= 1e-15);
        row_sum += action(r, c).real();
      }
      CHECK(row_sum == doctest::Approx(1.0).epsilon(1e-12));
    }
  }

  // coordinate function at stage k = 1 (5 points)
  const int k = 1;
  const Element coord = to_element(sample_fn([](double t) { return t; },
                                             sys.stage(k).num_blocks()));

  // scalar oracle: sampling and interpolating through the grid hierarchy
  const std::vector<int> grids = {3, 5, 9, 17, 33};
  auto oracle_defect = [&](int m, int n) {
    // rho_{n,k}(coord) on grid n, squared, then interpolated to grid m
    GridFn stage_k = sample_fn([](double t) { return t; }, grids[k]);
    GridFn stage_n = resample(stage_k, grids[n]);
    GridFn pushed = resample(pointwise(stage_n, stage_n), grids[m]);
    GridFn direct_k = resample(stage_k, grids[m]);
    return sup_diff(pushed, pointwise(direct_k, direct_k));
  };

  double prev = 1e9;
  for (int n = 2; n <= 3; ++n) {
    const int m = 4;
    const double defect = cpc_defect(sys, k, coord, coord, m, n, n);
    CHECK(defect == doctest::Approx(oracle_defect(m, n)).epsilon(1e-10));
    CHECK(defect < prev);
    prev = defect;
    // the system is unital, so the damped and undamped defects agree for
    // every damping index
    for (int l = k + 1; l < m; ++l)
      CHECK(std::abs(cpc_defect(sys, k, coord, coord, m, n, l) -
                     nf_defect(sys, k, coord, coord, m, n)) <= 1e-12);
  }
}

TEST_CASE("commutator defect") {
  const InductiveSystem uhf = uhf_system(2, 4);
  const Element x = matrix_units(uhf.stage(1))[1];
  CHECK(commutator_defect(uhf, 1, x, 4, 2) <= 1e-12);

  const IntervalModel model = interval_sampling_system({3, 5, 9});
  const Element coord = to_element(sample_fn([](double t) { return t; }, 3));
  CHECK(commutator_defect(model.system, 0, coord, 2, 1) <= 1e-12);

  // weighted embeddings: nonunital images still commute asymptotically
  const InductiveSystem w = weighted_embedding_system(5, {0.5});
  const Element h = hermitian_basis(w.stage(0))[0];
  const double early = commutator_defect(w, 0, h, 3, 1);
  const double late = commutator_defect(w, 0, h, 5, 3);
  CHECK(late <= early + 1e-12);
}

TEST_CASE("order unit domination is exact for cp systems") {
  Tolerances tol;
  tol.psd_tol = 1e-10;
  const std::vector<InductiveSystem> systems = {
      uhf_system(2, 4), weighted_embedding_system(4, {0.5, 0.9}),
      interval_sampling_system({3, 5, 9, 17}).system};
  for (const auto& sys : systems) {
    const int last = sys.last_stage();
    for (int k = 0; k + 2 <= last; ++k)
      for (const auto& x : hermitian_basis(sys.stage(k)))
        for (int n = k + 1; n < last; ++n) {
          CHECK(order_unit_domination_check(sys, k, x, last, n, tol, 1));
          CHECK(order_unit_domination_check(
              sys, k, amplify_element(x, 2), last, n, tol, 2));
        }
  }
  // unit case reduces to domination of the unit image chain
  const InductiveSystem& sys = systems[1];
  CHECK(order_unit_domination_check(sys, 0, unit(sys.stage(0)), 3, 1, tol, 1));
  // non-self-adjoint input is rejected
  CHECK_THROWS_AS(order_unit_domination_check(
                      sys, 1, matrix_unit(sys.stage(1), 0, 0, 1), 3, 2, tol, 1),
                  ValidationError);
}

TEST_CASE("genuinely amplified hermitian generators are dominated too") {
  Tolerances tol;
  tol.psd_tol = 1e-10;
  const InductiveSystem sys = weighted_embedding_system(4, {0.5});
  for (int k : {0, 1}) {
    for (const auto& x : hermitian_basis(amplified(sys.stage(k), 2)))
      for (int n = k + 1; n < 4; ++n)
        CHECK(order_unit_domination_check(sys, k, x, 4, n, tol, 2));
  }
}

TEST_CASE("nondegeneracy profile") {
  const InductiveSystem uhf = uhf_system(2, 4);
  const Element x = hermitian_basis(uhf.stage(1))[2];
  for (const auto& pt :
       nondegeneracy_profile(uhf, 1, x, 1, {{3, 2}, {4, 2}, {4, 3}}))
    CHECK(pt.ratio == doctest::Approx(1.0).epsilon(1e-12));

  const IntervalModel model = interval_sampling_system({3, 5, 9, 17});
  const Element coord = to_element(sample_fn([](double t) { return t; }, 3));
  for (int j : {1, 2})
    for (const auto& pt :
         nondegeneracy_profile(model.system, 0, coord, j, {{2, 1}, {3, 2}}))
      CHECK(pt.ratio >= 1.0 - 1e-9);

  const InductiveSystem w = weighted_embedding_system(5, {0.5});
  const Element h = hermitian_basis(w.stage(0))[0];
  const auto profile = nondegeneracy_profile(w, 0, h, 1, {{5, 1}, {5, 4}});
  CHECK(profile[1].ratio >= profile[0].ratio - 1e-12);
}

TEST_CASE("approximate identity defect") {
  const InductiveSystem uhf = uhf_system(2, 4);
  const auto units = matrix_units(uhf.stage(1));
  CHECK(approx_identity_defect(uhf, 1, units[0], units[3], 2, 4) <= 1e-12);

  const IntervalModel model = interval_sampling_system({3, 5, 9, 17});
  const Element coord = to_element(sample_fn([](double t) { return t; }, 3));
  const double aid = approx_identity_defect(model.system, 0, coord, coord, 2, 3);
  const double bound = cpc_defect(model.system, 0, coord, coord, 3, 2, 2) +
                       nf_defect(model.system, 0, coord, coord, 3, 2);
  CHECK(aid <= bound + 1e-12);

  const InductiveSystem w = weighted_embedding_system(5, {0.5});
  const Element e11 = matrix_units(w.stage(0))[0];
  const double early = approx_identity_defect(w, 0, e11, e11, 1, 3);
  const double late = approx_identity_defect(w, 0, e11, e11, 3, 5);
  CHECK(late <= early + 1e-12);
}

TEST_CASE("lift coherence defect") {
  const InductiveSystem sys = weighted_embedding_system(4, {0.6});
  Rng rng(83);
  const Element x = rng.random_contraction(sys.stage(0));
  std::vector<Element> lift;
  for (int j = 0; j <= 4; ++j) lift.push_back(sys.composite(j, 0).apply(x));
  CHECK(lift_coherence_defect(sys, lift, 4, 1) <= 1e-12);
  CHECK(lift_coherence_defect(sys, lift, 3, 2) <= 1e-12);

  const double delta = 1e-3;
  std::vector<Element> bumped = lift;
  bumped[2] = add(bumped[2], scale(delta, matrix_unit(sys.stage(2), 0, 0, 0)));
  CHECK(lift_coherence_defect(sys, bumped, 4, 2) <= delta + 1e-12);

  std::vector<Element> random_lift;
  for (int j = 0; j <= 4; ++j)
    random_lift.push_back(rng.random_contraction(sys.stage(j)));
  CHECK(lift_coherence_defect(sys, random_lift, 4, 1) >= 0.0);
}

TEST_CASE("product_at") {
  const InductiveSystem uhf = uhf_system(2, 4);
  Rng rng(89);
  const Element x = rng.random_contraction(uhf.stage(1));
  const Element y = rng.random_contraction(uhf.stage(1));
  const Element via_product = product_at(uhf, 1, x, y, 3, 4);
  const Element direct = uhf.composite(4, 1).apply(multiply(x, y));
  CHECK(operator_norm(subtract(via_product, direct)) <= 1e-12);

  // interval: the inner index controls where the product is formed; the
  // result approaches the sampled pointwise product as it grows
  const IntervalModel model = interval_sampling_system({3, 5, 9, 17, 33});
  const Element coord = to_element(sample_fn([](double t) { return t; }, 3));
  const GridFn target = sample_fn([](double t) { return t * t; }, 33);
  double prev = 1e9;
  for (int n : {1, 2, 3, 4}) {
    const Element prod = product_at(model.system, 0, coord, coord, n, 4);
    const double err = sup_diff(from_element(prod), target);
    CHECK(err <= prev + 1e-12);
    prev = err;
  }
  // stability in the inner index is controlled by the defect scale
  const Element p2 = product_at(model.system, 0, coord, coord, 2, 4);
  const Element p3 = product_at(model.system, 0, coord, coord, 3, 4);
  const double drift = operator_norm(subtract(p2, p3));
  const double defect_scale = nf_defect(model.system, 0, coord, coord, 4, 2) +
                              nf_defect(model.system, 0, coord, coord, 4, 3);
  CHECK(drift <= defect_scale + 1e-12);
  CHECK_THROWS_AS(product_at(uhf, 1, x, y, 1, 4), ShapeError);
}

TEST_CASE("defect symmetry under simultaneous adjoints") {
  const InductiveSystem w = weighted_embedding_system(5, {0.5, 0.8});
  Rng rng(97);
  for (int t = 0; t < 10; ++t) {
    const Element x = rng.random_contraction(w.stage(0));
    const Element y = rng.random_contraction(w.stage(0));
    CHECK(std::abs(cpc_defect(w, 0, x, y, 4, 2, 3) -
                   cpc_defect(w, 0, adjoint(y), adjoint(x), 4, 2, 3)) <=
          1e-12);
  }
}

TEST_CASE("defect sweep") {
  const InductiveSystem uhf = uhf_system(2, 4);
  IndexGrid grid{2, 4, 1, 3, 1, 3};
  const DefectReport report =
      defect_sweep(uhf, 0, GeneratorPolicy::units(), grid);
  CHECK(report.max_value() <= 1e-12);
  // one nf row per (m, n) cell and one cpc row per (m, n, l) cell
  int expected = 0;
  for (int m = 2; m <= 4; ++m)
    for (int n = 1; n < m; ++n) expected += 1 + (m - 1);
  CHECK(report.entries.size() == static_cast<size_t>(expected));
  CHECK(report.trend.nonincreasing);

  // interval decay across the window hierarchy
  const IntervalModel model = interval_sampling_system({3, 5, 9, 17, 33, 65});
  const Element coord = to_element(sample_fn([](double t) { return t; }, 5));
  const GeneratorPolicy policy =
      GeneratorPolicy::explicit_list({{coord, coord}}, {"coord*coord"});
  IndexGrid igrid{2, 5, 2, 4, 2, 4};
  const DefectReport ireport = defect_sweep(model.system, 1, policy, igrid);
  const double at2 = ireport.nl_max.at({2, 2});
  const double at4 = ireport.nl_max.at({4, 4});
  CHECK(at4 < at2);
  CHECK(ireport.trend.nonincreasing);

  // random generator policy is reproducible
  const DefectReport r1 =
      defect_sweep(model.system, 1, GeneratorPolicy::random(3, 5), igrid);
  const DefectReport r2 =
      defect_sweep(model.system, 1, GeneratorPolicy::random(3, 5), igrid);
  REQUIRE(r1.entries.size() == r2.entries.size());
  for (size_t i = 0; i < r1.entries.size(); ++i)
    CHECK(r1.entries[i].value == r2.entries[i].value);
}
