#include "cpcstar/limit.hpp"

#include <cmath>

namespace cpcstar {

namespace {

void check_same_system(const InductiveSystem& sys, const LimitElement& a,
                       const char* what) {
  if (a.system != sys.name())
    throw ShapeError(std::string(what) + ": element belongs to system '" +
                     a.system + "', not '" + sys.name() + "'");
  if (a.stage < 0 || a.stage > sys.last_stage() || a.horizon < a.stage ||
      a.horizon > sys.last_stage())
    throw ShapeError(std::string(what) + ": stage/horizon out of range");
}

void check_compatible(const InductiveSystem& sys, const LimitElement& a,
                      const LimitElement& b, const char* what) {
  check_same_system(sys, a, what);
  check_same_system(sys, b, what);
  if (a.horizon != b.horizon)
    throw ShapeError(std::string(what) + ": horizons differ");
}

}  // namespace

LimitElement limit_element(const InductiveSystem& sys, int stage, Element rep,
                           int horizon) {
  if (stage < 0 || stage > sys.last_stage())
    throw ShapeError("limit_element: stage out of range");
  if (horizon < stage || horizon > sys.last_stage())
    throw ShapeError("limit_element: need stage <= horizon <= last stage");
  if (rep.shape != sys.stage(stage))
    throw ShapeError("limit_element: representative shape mismatch");
  return LimitElement{stage, std::move(rep), horizon, sys.name()};
}

LimitElement promote(const InductiveSystem& sys, const LimitElement& a,
                     int new_stage) {
  check_same_system(sys, a, "promote");
  if (new_stage < a.stage || new_stage > a.horizon)
    throw ShapeError("promote: need stage <= new_stage <= horizon");
  if (new_stage == a.stage) return a;
  return LimitElement{new_stage,
                      sys.composite(new_stage, a.stage).apply(a.rep),
                      a.horizon, a.system};
}

Element horizon_rep(const InductiveSystem& sys, const LimitElement& a) {
  check_same_system(sys, a, "horizon_rep");
  return sys.composite(a.horizon, a.stage).apply(a.rep);
}

LimitElement limit_add(const LimitElement& a, const LimitElement& b) {
  if (a.system != b.system || a.stage != b.stage || a.horizon != b.horizon)
    throw ShapeError("limit_add: operands must share system, stage, horizon");
  return LimitElement{a.stage, add(a.rep, b.rep), a.horizon, a.system};
}

LimitElement limit_scale(Complex c, const LimitElement& a) {
  return LimitElement{a.stage, scale(c, a.rep), a.horizon, a.system};
}

LimitElement limit_adjoint(const LimitElement& a) {
  return LimitElement{a.stage, adjoint(a.rep), a.horizon, a.system};
}

LimitElement star_product(const InductiveSystem& sys, const LimitElement& a,
                          const LimitElement& b, int inner_n) {
  check_compatible(sys, a, b, "star_product");
  const int k = std::max(a.stage, b.stage);
  if (!(k < inner_n && inner_n <= a.horizon))
    throw ShapeError("star_product: need common stage < inner index <= horizon");
  const LimitElement ap = promote(sys, a, k);
  const LimitElement bp = promote(sys, b, k);
  // The stage-n product represents the limit product; its horizon shadow is
  // rho_{N,n} of it, and it can enter further products.
  const Element rep = multiply(sys.composite(inner_n, k).apply(ap.rep),
                               sys.composite(inner_n, k).apply(bp.rep));
  return LimitElement{inner_n, rep, a.horizon, a.system};
}

double mult_id_defect(const InductiveSystem& sys, const LimitElement& a,
                      const LimitElement& b, int inner_n, int unit_n) {
  check_compatible(sys, a, b, "mult_id_defect");
  const int N = a.horizon;
  if (unit_n < 0) unit_n = N - 1;
  if (!(unit_n >= 0 && unit_n <= N))
    throw ShapeError("mult_id_defect: unit index out of range");
  const Element star = horizon_rep(sys, star_product(sys, a, b, inner_n));
  const Element e = sys.composite(N, unit_n).apply(unit(sys.stage(unit_n)));
  const Element direct =
      multiply(horizon_rep(sys, a), horizon_rep(sys, b));
  return operator_norm(subtract(multiply(e, star), direct));
}

double associativity_defect(const InductiveSystem& sys, const LimitElement& a,
                            const LimitElement& b, const LimitElement& c,
                            int inner_n) {
  check_compatible(sys, a, b, "associativity_defect");
  check_compatible(sys, b, c, "associativity_defect");
  const int N = a.horizon;
  const LimitElement ab = star_product(sys, a, b, inner_n);
  const LimitElement bc = star_product(sys, b, c, inner_n);
  // Outer products at the horizon itself, the largest admissible index.
  const Element left = horizon_rep(sys, star_product(sys, ab, c, N));
  const Element right = horizon_rep(sys, star_product(sys, a, bc, N));
  return operator_norm(subtract(left, right));
}

double cstar_identity_defect(const InductiveSystem& sys, const LimitElement& a,
                             int inner_n) {
  check_same_system(sys, a, "cstar_identity_defect");
  const Element star =
      horizon_rep(sys, star_product(sys, limit_adjoint(a), a, inner_n));
  const double norm_a = operator_norm(horizon_rep(sys, a));
  return std::abs(operator_norm(star) - norm_a * norm_a);
}

double theta_order_zero_defect(const InductiveSystem& sys,
                               const LimitElement& a, const LimitElement& b,
                               int inner_n, int unit_n) {
  // Same expression as mult_id_defect with the subtraction reversed; kept
  // as its own entry point because it is reported under a different kind.
  return mult_id_defect(sys, a, b, inner_n, unit_n);
}

}  // namespace cpcstar
