#include "rmtlab/theory.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>

#include "rmtlab/linalg.hpp"

namespace rmtlab::theory {
namespace {

constexpr cplx kI{0.0, 1.0};

CubicSolution finish(cplx m, cplx w, cplx z) {
  CubicSolution sol;
  sol.m = m;
  sol.frak_m = -m / (z + m);
  sol.u = -std::conj(w) * m / (z + m);
  sol.residual = std::abs(eval_P_general(m, w, z));
  sol.stability = std::abs(3.0 * m * m + 4.0 * z * m + (z * z + 1.0 - std::norm(w)));
  return sol;
}

cplx newton_polish(cplx x, cplx w, cplx z) {
  const cplx c1 = z * z + 1.0 - std::norm(w);
  for (int it = 0; it < 8; ++it) {
    const cplx p = ((x + 2.0 * z) * x + c1) * x + z;
    const cplx dp = (3.0 * x + 4.0 * z) * x + c1;
    if (dp == 0.0) break;
    const cplx step = p / dp;
    const cplx next = x - step;
    if (std::abs(eval_P_general(next, w, z)) >= std::abs(p)) break;
    x = next;
    if (std::abs(step) <= 4.0 * std::numeric_limits<double>::epsilon() * std::abs(x)) break;
  }
  return x;
}

std::array<cplx, 3> cubic_roots(cplx w, cplx z) {
  // Companion matrix of x^3 + c2 x^2 + c1 x + c0.
  const cplx c2 = 2.0 * z;
  const cplx c1 = z * z + 1.0 - std::norm(w);
  const cplx c0 = z;
  ComplexMatrix comp(3, 3);
  comp(0, 0) = -c2;
  comp(0, 1) = -c1;
  comp(0, 2) = -c0;
  comp(1, 0) = 1.0;
  comp(2, 1) = 1.0;
  const auto ev = linalg::complex_eigenvalues(comp);
  std::array<cplx, 3> roots{};
  for (std::size_t i = 0; i < 3; ++i) roots[i] = newton_polish(ev[i], w, z);
  return roots;
}

}  // namespace

cplx eval_P(cplx x, const ShiftPoint& point) {
  const double eta = point.eta;
  return x * x * x + 2.0 * kI * eta * x * x +
         (1.0 - eta * eta - std::norm(point.w)) * x + kI * eta;
}

cplx eval_P_derivative(cplx x, const ShiftPoint& point) {
  const double eta = point.eta;
  return 3.0 * x * x + 4.0 * kI * eta * x + (1.0 - eta * eta - std::norm(point.w));
}

cplx eval_P_general(cplx x, cplx w, cplx z) {
  return x * x * x + 2.0 * z * x * x + (z * z + 1.0 - std::norm(w)) * x + z;
}

CubicSolution solve_m(const ShiftPoint& point) {
  const double eta = point.eta;
  if (!(eta > 0.0)) throw DomainError("solve_m needs eta > 0");
  const double c1 = eta * eta + std::norm(point.w) - 1.0;
  // P(i a) = i (-g(a)) with g(a) = a^3 + 2 eta a^2 + c1 a - eta; g(0) < 0 and
  // g(1) = eta^2 + eta + |w|^2 > 0, and g is convex on a > 0, so Newton from
  // the right end decreases monotonically onto the unique positive root.
  auto g = [&](double a) { return ((a + 2.0 * eta) * a + c1) * a - eta; };
  auto dg = [&](double a) { return (3.0 * a + 4.0 * eta) * a + c1; };
  double lo = 0.0, hi = 1.0;
  double a = 1.0;
  for (int it = 0; it < 500; ++it) {
    const double ga = g(a);
    if (ga > 0.0) hi = a; else lo = a;
    if (ga == 0.0) break;
    const double slope = dg(a);
    double next = slope > 0.0 ? a - ga / slope : 0.5 * (lo + hi);
    if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
    const double step = std::abs(next - a);
    a = next;
    if (step <= 2.0 * std::numeric_limits<double>::epsilon() * a) break;
    if (hi - lo <= 2.0 * std::numeric_limits<double>::epsilon() * hi) break;
  }
  if (!(a > 0.0)) throw NumericalError("solve_m: no root with Im m > 0");
  return finish(cplx(0.0, a), point.w, cplx(0.0, eta));
}

CubicSolution solve_m_general(cplx w, cplx z) {
  if (!(z.imag() > 0.0)) throw DomainError("solve_m_general needs Im z > 0");
  if (z.real() == 0.0) return solve_m({w, z.imag()});
  const double tol = 1e-14 * (1.0 + z.imag());
  auto pick = [&](const std::array<cplx, 3>& roots, int& count) {
    count = 0;
    cplx best{};
    for (const cplx& r : roots) {
      if (r.imag() > tol) {
        ++count;
        best = r;
      }
    }
    return best;
  };
  int count = 0;
  cplx m = pick(cubic_roots(w, z), count);
  if (count == 1) return finish(m, w, z);

  // Continuation in eta from eta0 = 10, where the physical root is close to
  // i / eta and well separated from the other two.
  const double eta_target = z.imag();
  const double eta0 = std::max(10.0, 2.0 * eta_target);
  cplx current = pick(cubic_roots(w, cplx(z.real(), eta0)), count);
  if (count == 0) throw NumericalError("solve_m_general: no root with Im m > 0");
  const int steps = 200;
  for (int s = 1; s <= steps; ++s) {
    const double frac = static_cast<double>(s) / steps;
    const double eta = eta0 * std::pow(eta_target / eta0, frac);
    const auto roots = cubic_roots(w, cplx(z.real(), eta));
    cplx nearest = roots[0];
    for (const cplx& r : roots)
      if (std::abs(r - current) < std::abs(nearest - current)) nearest = r;
    current = nearest;
  }
  if (!(current.imag() > 0.0))
    throw NumericalError("solve_m_general: continuation left the upper half plane");
  auto sol = finish(current, w, z);
  sol.via_homotopy = true;
  return sol;
}

double asymptotic_scale(const ShiftPoint& point) {
  if (!(point.eta > 0.0 && point.eta <= 1.0))
    throw DomainError("asymptotic_scale needs 0 < eta <= 1");
  const double kappa = point.kappa();
  if (std::abs(point.w) <= 1.0) return std::sqrt(kappa) + std::cbrt(point.eta);
  return point.eta / (kappa + std::pow(point.eta, 2.0 / 3.0));
}

cplx BlockM::entry(std::size_t a, std::size_t b, std::size_t n) const {
  const bool top_a = a < n;
  const bool top_b = b < n;
  const std::size_t ia = top_a ? a : a - n;
  const std::size_t ib = top_b ? b : b - n;
  if (ia != ib) return 0.0;
  if (top_a == top_b) return diag;
  return top_a ? upper : lower;
}

BlockM build_M(const CubicSolution& sol, cplx w) {
  return {sol.m, w * sol.frak_m, std::conj(w) * sol.frak_m};
}

std::string_view to_string(DomainLabel label) {
  switch (label) {
    case DomainLabel::edge_inside_s1: return "edge-inside-S1";
    case DomainLabel::edge_outside_s2: return "edge-outside-S2";
    case DomainLabel::bulk_d: return "bulk-D_delta";
    case DomainLabel::outside_all: return "outside-all";
  }
  return "?";
}

DomainClass classify_domain(const ShiftPoint& point, std::size_t n, double delta,
                            double energy) {
  if (!(delta > 0.0)) throw DomainError("delta must be positive");
  const double nd = static_cast<double>(n);
  const double eta = point.eta;
  const double modw = std::abs(point.w);
  const double ring = std::pow(nd, -0.5 + delta);
  const bool band = std::pow(nd, -1.0 + delta) <= eta && eta <= std::pow(nd, -0.75 + delta);
  const bool on_axis = energy == 0.0;
  if (on_axis && band && point.kappa() <= ring) return {DomainLabel::edge_inside_s1, delta};
  if (on_axis && band && 1.0 + ring <= modw && modw <= 1.0 / delta)
    return {DomainLabel::edge_outside_s2, delta};
  if (modw <= 1.0 / delta && std::abs(energy) <= 1.0 / (delta * delta) &&
      std::pow(nd, -1.0 + delta) <= eta && eta <= 1.0 / delta)
    return {DomainLabel::bulk_d, delta};
  return {DomainLabel::outside_all, delta};
}

}  // namespace rmtlab::theory
