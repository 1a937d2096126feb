#ifndef CPCSTAR_LIMIT_HPP
#define CPCSTAR_LIMIT_HPP

#include "cpcstar/system.hpp"

namespace cpcstar {

/// A stage representative of an element of the truncated limit: rho_k(rep)
/// stands for the limit element, and its shadow at the evaluation horizon N
/// is rho_{N,k}(rep).  The system is identified by name so that elements of
/// different systems cannot be mixed.
struct LimitElement {
  int stage = 0;
  Element rep;
  int horizon = 0;
  std::string system;
};

LimitElement limit_element(const InductiveSystem& sys, int stage, Element rep,
                           int horizon);

/// Same limit element represented at a later stage via the composite.
LimitElement promote(const InductiveSystem& sys, const LimitElement& a,
                     int new_stage);

/// The stage-N shadow rho_{N,k}(rep).
Element horizon_rep(const InductiveSystem& sys, const LimitElement& a);

LimitElement limit_add(const LimitElement& a, const LimitElement& b);
LimitElement limit_scale(Complex c, const LimitElement& a);
LimitElement limit_adjoint(const LimitElement& a);

/// The truncated star product with inner index n: operands are promoted to
/// a common stage k, and the result is the stage-n representative
/// rho_{n,k}(x) rho_{n,k}(y), which stands for the limit product and can be
/// multiplied further.  Requires k < n <= horizon.
LimitElement star_product(const InductiveSystem& sys, const LimitElement& a,
                          const LimitElement& b, int inner_n);

/// || rho_{N,n'}(1) (a star b at N) - rho_{N,k}(a) rho_{N,k}(b) || with n'
/// the unit index (default N - 1): the finite shadow of the identity
/// "unit times star product = ambient product".
double mult_id_defect(const InductiveSystem& sys, const LimitElement& a,
                      const LimitElement& b, int inner_n, int unit_n = -1);

/// || ((a star b) star c) - (a star (b star c)) || at the horizon, with the
/// inner products taken at stage inner_n and the outer ones at the horizon.
double associativity_defect(const InductiveSystem& sys, const LimitElement& a,
                            const LimitElement& b, const LimitElement& c,
                            int inner_n);

/// | ||(a* star a) at N|| - ||rho_{N,k}(a)||^2 |.
double cstar_identity_defect(const InductiveSystem& sys, const LimitElement& a,
                             int inner_n);

/// || rho_{N,k}(a) rho_{N,k}(b) - rho_{N,n'}(1) (a star b at N) ||: the
/// discrepancy between the ambient product of images and the unit-damped
/// star product.  Small values witness the tautological embedding behaving
/// as an order zero map at the horizon.
double theta_order_zero_defect(const InductiveSystem& sys,
                               const LimitElement& a, const LimitElement& b,
                               int inner_n, int unit_n = -1);

}  // namespace cpcstar

#endif
