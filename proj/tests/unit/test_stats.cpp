#include <algorithm>
#include <cmath>
#include <numbers>

#include "doctest.h"
#include "rmtlab/stats.hpp"

using namespace rmtlab;
using namespace rmtlab::stats;

namespace {

constexpr double kPi = std::numbers::pi;

// sup_x |F_a(x) - F_b(x)| by counting at every sample point.
double brute_ks(const std::vector<double>& a, const std::vector<double>& b) {
  double d = 0.0;
  auto cdf = [](const std::vector<double>& s, double x) {
    return static_cast<double>(std::count_if(s.begin(), s.end(), [&](double v) { return v <= x; })) /
           static_cast<double>(s.size());
  };
  for (const auto* s : {&a, &b})
    for (double x : *s) d = std::max(d, std::abs(cdf(a, x) - cdf(b, x)));
  return d;
}

// Theta-function form: 1 - sqrt(2 pi)/x sum_k exp(-(2k-1)^2 pi^2 / (8 x^2)).
double theta_survival(double x) {
  double s = 0.0;
  for (int k = 1; k <= 200; ++k)
    s += std::exp(-(2.0 * k - 1) * (2.0 * k - 1) * kPi * kPi / (8.0 * x * x));
  return 1.0 - std::sqrt(2.0 * kPi) / x * s;
}

}  // namespace

TEST_CASE("type-7 quantiles") {
  CHECK(quantile({1, 2, 3, 4}, 0.1) == doctest::Approx(1.3));
  CHECK(quantile({4, 1, 3, 2}, 0.5) == doctest::Approx(2.5));
  CHECK(quantile({5}, 0.9) == 5.0);
  CHECK(median({3, 1, 2}) == 2.0);
  CHECK_THROWS_AS(quantile({}, 0.5), DomainError);
}

TEST_CASE("edge report") {
  const std::vector<cplx> s{3.0, 1.0, cplx(0, 0.5)};
  const auto r = edge_report(s, 100, 3.0);
  CHECK(r.lambda1 == cplx(3.0));
  CHECK(r.rho2 == 1.0);
  CHECK(r.fluct == 0.0);
  CHECK(*r.f_gap == 0.0);

  // Reordering and a missing f.
  const std::vector<cplx> t{cplx(0, 0.5), 1.0, 3.0};
  CHECK(edge_report(t, 100, 3.0).rho2 == 1.0);
  const auto g = edge_report(t, 16);
  CHECK(g.rho2 == 3.0);
  CHECK(g.fluct == doctest::Approx(8.0));
  CHECK_FALSE(g.f_gap);

  // The removed value is the one nearest f, not the largest.
  const std::vector<cplx> u{4.0, 2.9, 1.0};
  const auto v = edge_report(u, 4, 3.0);
  CHECK(v.lambda1 == cplx(4.0));
  CHECK(v.rho2 == 4.0);
  CHECK(v.rho2 <= std::abs(v.lambda1));

  CHECK_THROWS_AS(edge_report(std::vector<cplx>{1.0}, 1), DomainError);
}

TEST_CASE("delocalization extremes") {
  const std::size_t n = 16;
  // f e e^T with f = 1.5: the eigenvector of 1.5 is flat.
  RealMatrix flat(n, n, 1.5 / n);
  const auto r = delocalization(spectral::dense_nonsym_eig(flat, true));
  REQUIRE(!r.values.empty());
  for (std::size_t k = 0; k < r.values.size(); ++k) {
    CHECK(r.values[k] >= 1.0 - 1e-12);
    if (std::abs(r.eigenvalues[k] - 1.5) < 1e-12) CHECK(r.values[k] == doctest::Approx(1.0));
  }

  // Diagonal matrix: canonical eigenvectors give sqrt(N).
  RealMatrix diag(n, n, 0.0);
  for (std::size_t i = 0; i < n; ++i) diag(i, i) = 0.1 * static_cast<double>(i);
  const auto d = delocalization(spectral::dense_nonsym_eig(diag, true));
  CHECK(d.values.size() == n);
  CHECK(d.max == doctest::Approx(4.0));
  CHECK(d.median == doctest::Approx(4.0));

  // Eigenvalues outside the radius are skipped.
  for (std::size_t i = 0; i < n; ++i) diag(i, i) = 3.0 + i;
  CHECK(delocalization(spectral::dense_nonsym_eig(diag, true)).values.empty());

  const auto er = delocalization(model::sample_er(model::EnsembleParams(128, 0.1, 3)));
  for (double v : er.values) CHECK(v >= 1.0);
}

TEST_CASE("k-point windows") {
  const std::size_t n = 400;
  const cplx ws = std::polar(1.0, kPi / 2);
  CHECK(kpoint_sample(std::vector<cplx>{0.0, 0.5}, ws, 3.0, n).count() == 0);
  CHECK_FALSE(kpoint_sample(std::vector<cplx>{}, ws, 3.0, n).min_distance);

  const double s = 1.5;
  const std::vector<cplx> one{ws * (1.0 + s / 20.0)};
  const auto k = kpoint_sample(one, ws, 3.0, n);
  REQUIRE(k.count() == 1);
  CHECK(std::abs(k.points[0] - ws * s) < 1e-12);
  CHECK(k.moduli[0] == doctest::Approx(s));

  const std::vector<cplx> two{ws, ws + 0.05, ws + cplx(0, 0.02)};
  const auto p = kpoint_sample(two, ws, 3.0, n);
  CHECK(p.count() == 3);
  CHECK(*p.min_distance == doctest::Approx(0.4));
  for (const auto& z : p.points) CHECK(std::abs(z) <= 3.0);
}

TEST_CASE("Ginibre edge window counts scale with area") {
  const auto g = sample_spectra(Ensemble::ginibre, 256, 0.0, 60, 11);
  auto mean_count = [&](double radius) {
    double c = 0.0;
    for (double angle : {kPi / 4, kPi / 2, 3 * kPi / 4})
      for (const auto& s : g.spectra)
        c += static_cast<double>(kpoint_sample(s, std::polar(1.0, angle), radius, 256).count());
    return c / (3.0 * static_cast<double>(g.spectra.size()));
  };
  const double small = mean_count(1.5), large = mean_count(3.0);
  MESSAGE("mean counts ", small, " ", large);
  CHECK(large / small == doctest::Approx(4.0).epsilon(0.25));
}

TEST_CASE("two-sample KS") {
  std::vector<double> a(50);
  for (std::size_t i = 0; i < a.size(); ++i) a[i] = std::sin(double(i));
  const auto same = two_sample_ks(a, a);
  CHECK(same.statistic == 0.0);
  CHECK(same.p_value == 1.0);

  Rng rng(5);
  std::vector<double> u(1000), v(1000);
  for (auto& x : u) x = rng.uniform();
  for (auto& x : v) x = 0.5 + rng.uniform();
  const auto far = two_sample_ks(u, v);
  CHECK(far.statistic == doctest::Approx(0.5).epsilon(0.1));
  CHECK(far.p_value < 1e-6);

  // Statistic against brute force, with ties.
  std::vector<double> x(40), y(33);
  for (auto& t : x) t = std::floor(rng.uniform() * 8);
  for (auto& t : y) t = std::floor(rng.uniform() * 8) + 0.5 * (rng.uniform() < 0.3);
  CHECK(two_sample_ks(x, y).statistic == doctest::Approx(brute_ks(x, y)).epsilon(1e-14));

  CHECK_THROWS_AS(two_sample_ks(std::vector<double>(19, 0.0), u), DomainError);
  std::vector<double> bad(30, 0.0);
  bad[3] = std::nan("");
  CHECK_THROWS_AS(two_sample_ks(bad, u), DomainError);
}

TEST_CASE("Kolmogorov survival against the theta form") {
  for (double x : {0.3, 0.5, 0.8, 1.0, 1.36, 1.63, 2.5})
    CHECK(kolmogorov_survival(x) == doctest::Approx(theta_survival(x)).epsilon(1e-12));
  CHECK(kolmogorov_survival(1.358) == doctest::Approx(0.05).epsilon(0.01));
}

TEST_CASE("KS level under the null") {
  Rng rng(2024);
  int rejects = 0;
  const int reps = 500;
  std::vector<double> a(100), b(100);
  for (int r = 0; r < reps; ++r) {
    for (auto& t : a) t = rng.normal();
    for (auto& t : b) t = rng.normal();
    if (two_sample_ks(a, b).p_value < 0.05) ++rejects;
  }
  const double rate = double(rejects) / reps;
  MESSAGE("reject rate ", rate);
  CHECK(std::abs(rate - 0.05) <= 0.02);
}

TEST_CASE("local law trial invariants") {
  LocalLawSpec spec;
  spec.n = 128;
  spec.p = 0.5;
  spec.w = 1.0;
  spec.etas = geometric_grid(std::pow(128.0, -0.95), std::pow(128.0, -0.72), 5);
  check_local_law_grid(spec);
  const auto t = local_law_trial(spec, 1);
  CHECK(t.centered.size() == 5);
  CHECK(t.max_real_part <= 1e-10);
  CHECK(t.max_discrepancy <= 1e-10);
  for (double e : t.perturbed) CHECK(std::isfinite(e));

  const auto rows = local_law_curve(spec, 6, 3);
  REQUIRE(rows.size() == 5);
  for (const auto& r : rows) {
    CHECK(r.perturbed.q10 <= r.perturbed.q50);
    CHECK(r.perturbed.q50 <= r.perturbed.q90);
    CHECK(r.perturbed_scaled.q90 ==
          doctest::Approx(128.0 * r.eta * r.perturbed.q90));
  }

  LocalLawSpec bad = spec;
  bad.etas = {0.5};
  CHECK_THROWS_AS(check_local_law_grid(bad), DomainError);
  CHECK_THROWS_AS(local_law_curve(bad, 1, 1), DomainError);
  bad.allow_bulk = true;
  check_local_law_grid(bad);
}

TEST_CASE("local law with X = 0 is the pure shift") {
  const std::vector<double> sigma(32, 1.0);
  for (double eta : {0.01, 0.1, 1.0}) {
    const cplx g = spectral::trace_green_from_sigma(sigma, eta);
    CHECK(g.imag() == doctest::Approx(eta / (1.0 + eta * eta)));
  }
}

TEST_CASE("entrywise law error") {
  const model::EnsembleParams params(128, 0.5, 7);
  const auto b = model::center(model::sample_er(params));
  const cplx z(0.0, std::pow(128.0, -0.5));

  const auto e = entrywise_law_error(b, 0.5, z, 200, 1);
  CHECK(e.samples == 200);
  CHECK(e.max_error == std::max(e.max_support_error, e.max_zero_error));
  CHECK(e.envelope == doctest::Approx(std::pow(128.0 * z.imag(), -1.0 / 6) +
                                      std::pow(params.q(), -1.0 / 3)));
  CHECK(e.max_error < 1.0);

  // At w = 0 the off-diagonal blocks of M vanish, so partner pairs only see |G|.
  const auto m0 = theory::build_M(theory::solve_m_general(0.0, cplx(0, 1)), 0.0);
  CHECK(m0.upper == cplx(0.0));
  CHECK(m0.lower == cplx(0.0));
  const auto zero = entrywise_law_error(b, 0.0, cplx(0, 1), 200, 2);
  CHECK(zero.max_error <= zero.envelope);
  CHECK(zero.max_zero_error < 0.2);

  CHECK_THROWS_AS(entrywise_law_error(b, 0.5, cplx(0, 1e-4), 10, 1), DomainError);
  CHECK_THROWS_AS(entrywise_law_error(b, 50.0, z, 10, 1), DomainError);
}

TEST_CASE("edge functionals and the power control") {
  const auto g1 = sample_spectra(Ensemble::ginibre, 128, 0.0, 100, 21);
  const auto g2 = sample_spectra(Ensemble::ginibre, 128, 0.0, 100, 22);
  const auto f1 = edge_functionals(g1, {});
  CHECK(f1.fluct.size() == 100);
  CHECK(f1.count.size() == 300);
  CHECK(f1.min_distance.size() <= 300);

  const auto power = two_sample_ks(f1.fluct, edge_functionals(g2, {}, 1.1).fluct);
  CHECK(power.p_value < 1e-3);

  const auto er = sample_spectra(Ensemble::er, 128, 0.2, 20, 4);
  REQUIRE(er.f);
  for (const auto& s : er.spectra) CHECK(std::abs(edge_report(s, 128, er.f).lambda1 - *er.f) < 3.0);

  UniversalityConfig small;
  small.trials = 50;
  CHECK_THROWS_AS(universality_suite(small), DomainError);
}
