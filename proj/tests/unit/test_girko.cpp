#include <cmath>
#include <numbers>

#include "doctest.h"
#include "rmtlab/girko.hpp"

using namespace rmtlab;
using namespace rmtlab::girko;
using rmtlab::model::MatrixKind;
using rmtlab::model::MatrixSample;

namespace {

constexpr double kPi = std::numbers::pi;

// Plain tensor midpoint rule over the support square; independent of the
// library's quadrature.
template <typename F>
double brute_integral(const ScaledFunction& f, F&& h, int cells) {
  const double rho = f.support_radius();
  const double step = 2.0 * rho / cells;
  double s = 0.0;
  for (int i = 0; i < cells; ++i)
    for (int j = 0; j < cells; ++j)
      s += h(f.center() + cplx(-rho + (i + 0.5) * step, -rho + (j + 0.5) * step));
  return s * step * step;
}

std::vector<cplx> sorted_spectrum(const MatrixSample& x) {
  return spectral::dense_nonsym_eig(x, false).values;
}

}  // namespace

TEST_CASE("radial profiles and derivatives") {
  for (Profile p : {Profile::polynomial_bump, Profile::gaussian_bump}) {
    CHECK(radial(p, 0.0).g == 1.0);
    CHECK(radial(p, radial_support(p)).g == 0.0);
    for (double s : {0.1, 0.5, 0.8}) {
      const double h = 1e-5;
      const auto v = radial(p, s);
      CHECK(v.dg == doctest::Approx((radial(p, s + h).g - radial(p, s - h).g) / (2 * h)).epsilon(1e-7));
      CHECK(v.d2g == doctest::Approx((radial(p, s + h).dg - radial(p, s - h).dg) / (2 * h)).epsilon(1e-7));
    }
  }
  CHECK(parse_profile("gaussian-bump") == Profile::gaussian_bump);
  CHECK_THROWS_AS(parse_profile("box"), ConfigError);
}

TEST_CASE("rescale_f") {
  TestFunction tf{Profile::gaussian_bump, {1.0, 0.0}, 0.5, 0.05};
  const auto f = rescale_f(tf, 400);
  CHECK(f(tf.center) == doctest::Approx(400.0));
  const auto g = unscaled(tf);
  CHECK(f.integral() == doctest::Approx(g.integral()).epsilon(1e-12));
  CHECK(brute_integral(f, f, 400) == doctest::Approx(f.integral()).epsilon(1e-4));
  const auto abs_lap = [](const ScaledFunction& s) {
    return brute_integral(s, [&](cplx w) { return std::abs(s.laplacian(w)); }, 600);
  };
  CHECK(abs_lap(f) / abs_lap(g) == doctest::Approx(400.0).epsilon(0.01));
  tf.a = 0.47;
  CHECK_THROWS_AS(rescale_f(tf, 400), DomainError);
  tf.a = 0.48;
  CHECK_NOTHROW(rescale_f(tf, 400));
  tf.a = 0.51;
  CHECK_THROWS_AS(rescale_f(tf, 400), DomainError);
  // Laplacian and dbar against finite differences.
  const TestFunction pb{Profile::polynomial_bump, {0.2, -0.1}, 0.5, 0.05};
  const auto p = unscaled(pb);
  const cplx w{0.4, 0.3};
  const double h = 1e-4;
  const double lap = (p(w + h) + p(w - h) + p(w + cplx(0, h)) + p(w - cplx(0, h)) - 4 * p(w)) / (h * h);
  CHECK(p.laplacian(w) == doctest::Approx(lap).epsilon(1e-5));
  const cplx dbar = 0.5 * ((p(w + h) - p(w - h)) / (2 * h) + cplx(0, 1) * (p(w + cplx(0, h)) - p(w - cplx(0, h))) / (2 * h));
  CHECK(std::abs(p.dbar(w) - dbar) <= 1e-7);
}

TEST_CASE("linear_stat_direct") {
  const auto g = unscaled({Profile::gaussian_bump, 0.0});
  const std::vector<cplx> zero{0.0};
  CHECK(linear_stat_direct(zero, g) == cplx(1.0));
  const std::vector<cplx> far{cplx(10.0, 0.0), cplx(0.0, -4.0)};
  CHECK(linear_stat_direct(far, g) == cplx(0.0));
}

TEST_CASE("log modulus") {
  const std::vector<double> one{1.0}, e{std::exp(1.0)};
  CHECK(log_modulus_from_sigma(one, 0.0).value == 0.0);
  CHECK(log_modulus_from_sigma(e, 0.0).value == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(log_modulus_from_sigma(std::vector<double>{1e-9}, 1e-9).ill_conditioned);
  const auto x = model::sample_er(model::EnsembleParams(32, 0.2, 4));
  const auto lambda = sorted_spectrum(x);
  QuadratureSpec spec;
  for (cplx w : {cplx(0.3, 0.2), cplx(-0.7, 0.5), cplx(1.0, 0.0)}) {
    const auto lm = log_modulus_via_eta(x, w, spec);
    REQUIRE(lm.min_sigma > 1e-3);
    double direct = 0.0;
    for (const cplx& l : lambda) direct += std::log(std::abs(l - w));
    CHECK(std::abs(lm.value - direct) <= 1e-6);
    // Halving the cutoff moves the value by less than the reported bias.
    QuadratureSpec half = spec;
    half.eta_lower = 0.5 * spec.resolved_eta_lower(32);
    CHECK(std::abs(log_modulus_via_eta(x, w, half).value - lm.value) <= lm.bias_bound);
  }
}

TEST_CASE("Green's identity calibration") {
  const std::vector<cplx> points{cplx(0.25, 0.0), cplx(-0.5, 0.375), cplx(0.125, -0.625),
                                 cplx(0.0, 0.0)};
  const LogModulusFn lm = [&](cplx w) {
    LogModulus out;
    for (const cplx& l : points) out.value += std::log(std::abs(l - w));
    return out;
  };
  for (Profile p : {Profile::polynomial_bump, Profile::gaussian_bump}) {
    const auto f = unscaled({p, 0.0});
    double exact = 0.0;
    for (const cplx& l : points) exact += f(l);
    QuadratureSpec spec;
    spec.tolerance = 1e-6;
    const auto r = girko_integral(f, lm, 1, spec);
    CHECK(std::abs(r.value - exact) <= 1e-3);
    CHECK(std::abs(r.value - exact) <= 10 * r.error_estimate + 1e-6);
  }
  // Midpoint refinement: error falls like h^2 with the points on grid vertices.
  const auto f = unscaled({Profile::polynomial_bump, 0.0});
  double exact = 0.0;
  for (const cplx& l : points) exact += f(l);
  QuadratureSpec mid;
  mid.mode = QuadratureMode::midpoint;
  mid.grid = 16;
  mid.refinements = 3;
  const auto r = girko_integral(f, lm, 1, mid);
  REQUIRE(r.levels.size() == 4);
  for (std::size_t k = 1; k < r.levels.size(); ++k) {
    const double order = std::log2(std::abs(r.levels[k - 1] - exact) / std::abs(r.levels[k] - exact));
    MESSAGE("observed order " << order);
    CHECK(order >= 2.0 - 0.1);
  }
}

TEST_CASE("single eigenvalue at the origin") {
  const auto x = MatrixSample::from_dense(MatrixKind::ginibre, RealMatrix(1, 1));
  const auto f = unscaled({Profile::gaussian_bump, 0.0});
  // N = 1 would put the default cutoff N^{-5} at 1.
  QuadratureSpec spec;
  spec.eta_lower = 1e-12;
  const auto r = linear_stat_girko(x, f, spec);
  CHECK(std::abs(r.value - 1.0) <= 1e-3);
}

TEST_CASE("girko matches the direct statistic at N = 64") {
  for (std::uint64_t seed : {5u}) {
    const auto x = model::sample_er(model::EnsembleParams(64, 0.2, seed));
    const auto lambda = sorted_spectrum(x);
    const auto f = unscaled({Profile::polynomial_bump, cplx(0.3, 0.1)});
    const cplx direct = linear_stat_direct(lambda, f);
    const auto r = linear_stat_girko(x, f, {});
    MESSAGE("nodes " << r.nodes << " direct " << direct << " girko " << r.value);
    CHECK(std::abs(r.value - direct) <= 1e-3 * std::abs(direct));
  }
}

TEST_CASE("disc integral") {
  // Support inside the unit disc: full integral.
  const auto inner = rescale_f({Profile::polynomial_bump, cplx(0.2, 0.1), 0.5}, 1024);
  CHECK(disc_integral(inner) == doctest::Approx(inner.integral() / kPi).epsilon(1e-12));
  // Support outside: zero.
  const auto outer = rescale_f({Profile::polynomial_bump, cplx(1.5, 0.0), 0.5}, 1024);
  CHECK(disc_integral(outer) == 0.0);
  // Straddling the circle: compare with a brute-force indicator sum.
  for (cplx c : {cplx(1.0, 0.0), std::polar(1.0, 0.7), cplx(0.0, 0.0)}) {
    const auto g = unscaled({Profile::gaussian_bump, c});
    const double brute =
        brute_integral(g, [&](cplx w) { return std::abs(w) <= 1.0 ? g(w) : 0.0; }, 3000) / kPi;
    CHECK(disc_integral(g) == doctest::Approx(brute).epsilon(1e-4));
  }
}

TEST_CASE("ibp tail") {
  const auto f = rescale_f({Profile::polynomial_bump, cplx(1.0, 0.0), 0.5}, 64);
  const double eta = std::pow(64.0, -0.75);
  const OffdiagFn exact_u = [](cplx w, double e) { return theory::solve_m({w, e}).u; };
  CHECK(std::abs(ibp_tail(f, exact_u, eta).t3) <= 1e-12);
  const OffdiagFn shifted = [](cplx w, double e) { return theory::solve_m({w, e}).u + cplx(0.3, -0.2); };
  CHECK(std::abs(ibp_tail(f, shifted, eta).t3) <= 1e-10);
  const auto a = model::sample_er(model::EnsembleParams(64, 0.5, 3));
  const auto t = ibp_tail(a, f, eta, 6);
  CHECK(std::isfinite(t.t3.real()));
  CHECK(t.deviations.size() == t.nodes.size());
}
