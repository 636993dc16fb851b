#pragma once

#include <complex>
#include <cstddef>
#include <string_view>

#include "rmtlab/errors.hpp"
#include "rmtlab/matrix.hpp"

namespace rmtlab::theory {

// Shift w of the Hermitization together with the spectral parameter z = i eta.
struct ShiftPoint {
  cplx w;
  double eta;

  double kappa() const { return std::abs(std::abs(w) - 1.0); }
};

// Deterministic triple at a shift point: m solves the self-consistent cubic
// with Im m > 0, frak_m = -m / (z + m), u = -conj(w) m / (z + m).
struct CubicSolution {
  cplx m;
  cplx frak_m;
  cplx u;
  double residual;   // |P(m)|
  double stability;  // |P'(m)|
  bool via_homotopy = false;
};

// P(x) = x^3 + 2 i eta x^2 + (1 - eta^2 - |w|^2) x + i eta.
cplx eval_P(cplx x, const ShiftPoint& point);
cplx eval_P_derivative(cplx x, const ShiftPoint& point);

// General spectral parameter z = E + i eta:
// x^3 + 2 z x^2 + (z^2 + 1 - |w|^2) x + z.
cplx eval_P_general(cplx x, cplx w, cplx z);

// Root of P with Im m > 0 at z = i eta. The root is purely imaginary there and
// is found by a safeguarded Newton iteration on a real cubic bracketed in
// (0, 1].
CubicSolution solve_m(const ShiftPoint& point);

// Root with Im m > 0 for a general z in the upper half plane. Candidates come
// from the companion-matrix eigenvalues; ties are broken by continuation from
// a large-eta start where m ~ i / eta.
CubicSolution solve_m_general(cplx w, cplx z);

// Size of Im m(w, i eta) up to constants: kappa^{1/2} + eta^{1/3} inside the
// unit disc, eta / (kappa + eta^{2/3}) outside. Requires 0 < eta <= 1.
double asymptotic_scale(const ShiftPoint& point);

// Scalar blocks of the 2N x 2N deterministic approximation
// [[m I, w frak_m I], [conj(w) frak_m I, m I]].
struct BlockM {
  cplx diag;
  cplx upper;
  cplx lower;

  // Entry (a, b) of the implicit 2n x 2n matrix.
  cplx entry(std::size_t a, std::size_t b, std::size_t n) const;
};

BlockM build_M(const CubicSolution& sol, cplx w);

enum class DomainLabel { edge_inside_s1, edge_outside_s2, bulk_d, outside_all };

std::string_view to_string(DomainLabel label);

struct DomainClass {
  DomainLabel label;
  double delta;
};

// Classifies (w, i eta) into the edge domains S1, S2, the bulk domain D or
// none of them. Boundary points go to the first matching set in the order
// S1, S2, D.
DomainClass classify_domain(const ShiftPoint& point, std::size_t n, double delta,
                            double energy = 0.0);

}  // namespace rmtlab::theory
