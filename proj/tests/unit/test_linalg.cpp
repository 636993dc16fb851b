#include <cmath>

#include "doctest.h"
#include "oracles.hpp"
#include "rmtlab/linalg.hpp"
#include "rmtlab/rng.hpp"

using namespace rmtlab;
using namespace rmtlab::linalg;

namespace {

RealMatrix random_real(std::size_t r, std::size_t c, std::uint64_t seed) {
  Rng rng(seed);
  RealMatrix a(r, c);
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) a(i, j) = rng.normal();
  return a;
}

RealMatrix random_symmetric(std::size_t n, std::uint64_t seed) {
  RealMatrix a = random_real(n, n, seed);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < i; ++j) a(j, i) = a(i, j);
  return a;
}

ComplexMatrix random_hermitian(std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  ComplexMatrix a(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    a(i, i) = rng.normal();
    for (std::size_t j = 0; j < i; ++j) {
      a(i, j) = {rng.normal(), rng.normal()};
      a(j, i) = std::conj(a(i, j));
    }
  }
  return a;
}

template <typename T>
double max_backward_error(const Matrix<T>& a, const SymEig<T>& e) {
  const std::size_t n = a.rows();
  double worst = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    double r = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      T s{};
      for (std::size_t j = 0; j < n; ++j) s += a(i, j) * e.vectors(j, k);
      r += abs2(s - e.values[k] * e.vectors(i, k));
    }
    worst = std::max(worst, std::sqrt(r));
  }
  return worst;
}

template <typename T>
double orthogonality_defect(const Matrix<T>& v) {
  const std::size_t n = v.rows();
  double worst = 0.0;
  for (std::size_t a = 0; a < n; ++a)
    for (std::size_t b = 0; b < n; ++b) {
      T s{};
      for (std::size_t i = 0; i < n; ++i) s += conj_of(v(i, a)) * v(i, b);
      worst = std::max(worst, std::abs(s - (a == b ? T{1} : T{})));
    }
  return worst;
}

}  // namespace

TEST_CASE("sym_eig small examples") {
  RealMatrix d(3, 3);
  d(0, 0) = 3;
  d(1, 1) = 1;
  d(2, 2) = 2;
  auto e = sym_eig(d, true);
  CHECK(e.values == std::vector<double>{1, 2, 3});

  RealMatrix x(2, 2);
  x(0, 1) = x(1, 0) = 1;
  auto ex = sym_eig(x, true);
  CHECK(ex.values[0] == doctest::Approx(-1.0));
  CHECK(ex.values[1] == doctest::Approx(1.0));
  const double r = 1.0 / std::sqrt(2.0);
  CHECK(std::abs(std::abs(ex.vectors(0, 0)) - r) <= 1e-14);
  CHECK(ex.vectors(0, 0) * ex.vectors(1, 0) < 0.0);
  CHECK(ex.vectors(0, 1) * ex.vectors(1, 1) > 0.0);
}

TEST_CASE("sym_eig against the closed-form cubic") {
  for (std::uint64_t seed = 1; seed <= 50; ++seed) {
    const RealMatrix a = random_symmetric(3, seed);
    const auto ref = oracle::sym3_eigenvalues(a);
    const auto e = sym_eig(a, false);
    for (int i = 0; i < 3; ++i) CHECK(std::abs(e.values[i] - ref[i]) <= 1e-10);
  }
}

TEST_CASE("sym_eig backward error and orthogonality") {
  for (std::size_t n : {1u, 2u, 7u, 40u, 129u}) {
    const RealMatrix a = random_symmetric(n, 100 + n);
    const auto e = sym_eig(a, true);
    const double scale = std::max(1.0, norm_frobenius(a));
    CHECK(max_backward_error(a, e) <= 1e-10 * scale);
    CHECK(orthogonality_defect(e.vectors) <= 1e-12 * n);
    CHECK(std::is_sorted(e.values.begin(), e.values.end()));
    const ComplexMatrix h = random_hermitian(n, 200 + n);
    const auto eh = sym_eig(h, true);
    CHECK(max_backward_error(h, eh) <= 1e-10 * std::max(1.0, norm_frobenius(h)));
    CHECK(orthogonality_defect(eh.vectors) <= 1e-12 * n);
    CHECK(sym_eig(h, false).values == eh.values);
  }
}

TEST_CASE("sym_eig rejects non-Hermitian input") {
  RealMatrix a(2, 2);
  a(0, 1) = 1.0;
  CHECK_THROWS_AS(sym_eig(a, false), DomainError);
}

TEST_CASE("tridiagonal eigenvalues of the free Laplacian") {
  const std::size_t n = 30;
  const auto v = tridiagonal_eigenvalues(std::vector<double>(n, 2.0),
                                         std::vector<double>(n - 1, -1.0));
  for (std::size_t k = 0; k < n; ++k) {
    const double exact = 2.0 - 2.0 * std::cos((k + 1) * M_PI / (n + 1));
    CHECK(std::abs(v[k] - exact) <= 1e-13);
  }
}

TEST_CASE("singular values") {
  RealMatrix d(2, 2);
  d(0, 0) = 1;
  d(1, 1) = 2;
  auto s = singular_values(d);
  CHECK(s[0] == doctest::Approx(2.0));
  CHECK(s[1] == doctest::Approx(1.0));
  ComplexMatrix z(2, 2);
  z(0, 0) = z(1, 1) = cplx(-3, -4);
  auto sz = singular_values(z);
  CHECK(sz[0] == doctest::Approx(5.0));
  CHECK(sz[1] == doctest::Approx(5.0));
  // Against eigenvalues of a^T a.
  for (std::size_t n : {3u, 17u, 64u}) {
    const RealMatrix a = random_real(n, n, 300 + n);
    const auto sv = singular_values(a);
    const auto ev = sym_eig(multiply(adjoint(a), a), false).values;
    for (std::size_t k = 0; k < n; ++k) {
      CHECK(sv[k] >= 0.0);
      CHECK(std::abs(sv[k] * sv[k] - ev[n - 1 - k]) <= 1e-9 * ev.back());
    }
  }
  const RealMatrix tall = random_real(9, 4, 5);
  const auto st = singular_values(tall);
  const auto et = sym_eig(multiply(adjoint(tall), tall), false).values;
  CHECK(st.size() == 4);
  for (std::size_t k = 0; k < 4; ++k) CHECK(st[k] * st[k] == doctest::Approx(et[3 - k]));
}

TEST_CASE("dense_nonsym_eig examples") {
  RealMatrix c(2, 2);
  c(0, 1) = 1.0;  // companion of x^2 - 1
  c(1, 0) = 1.0;
  auto e = dense_nonsym_eig(c, false);
  CHECK(oracle::multiset_distance(e.values, {1.0, -1.0}) <= 1e-14);
  RealMatrix r(2, 2);
  r(0, 1) = 1.0;
  r(1, 0) = -1.0;
  auto er = dense_nonsym_eig(r, true);
  CHECK(oracle::multiset_distance(er.values, {cplx(0, 1), cplx(0, -1)}) <= 1e-14);
  CHECK(er.defective == std::vector<bool>{false, false});
}

TEST_CASE("dense_nonsym_eig against characteristic polynomial roots") {
  for (std::uint64_t seed = 1; seed <= 30; ++seed) {
    const RealMatrix a = random_real(5, 5, 900 + seed);
    const auto roots = oracle::poly_roots(oracle::charpoly(a));
    const auto e = dense_nonsym_eig(a, false);
    CHECK(oracle::multiset_distance(e.values, roots) <= 1e-6);
  }
}

TEST_CASE("dense_nonsym_eig eigenpairs at moderate size") {
  for (std::size_t n : {10u, 100u, 300u}) {
    RealMatrix a = random_real(n, n, 40 + n);
    for (double& v : std::span<double>(a.data(), n * n)) v /= std::sqrt(double(n));
    const auto e = dense_nonsym_eig(a, true);
    REQUIRE(e.values.size() == n);
    double worst = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
      double r = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        cplx s = 0.0;
        for (std::size_t j = 0; j < n; ++j) s += a(i, j) * e.vectors(j, k);
        r += std::norm(s - e.values[k] * e.vectors(i, k));
      }
      worst = std::max(worst, std::sqrt(r));
      CHECK_FALSE(e.defective[k]);
    }
    CHECK(worst <= 1e-8 * norm_frobenius(a));
    // Trace and conjugate symmetry.
    cplx tr = 0.0;
    for (const cplx& v : e.values) tr += v;
    double atr = 0.0;
    for (std::size_t i = 0; i < n; ++i) atr += a(i, i);
    CHECK(std::abs(tr - atr) <= 1e-9 * n);
    std::vector<cplx> conj_values;
    for (const cplx& v : e.values) conj_values.push_back(std::conj(v));
    CHECK(oracle::multiset_distance(e.values, conj_values) <= 1e-8);
  }
}

TEST_CASE("complex schur and triangular eigenvectors") {
  Rng rng(77);
  const std::size_t n = 12;
  ComplexMatrix a(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) a(i, j) = {rng.normal(), rng.normal()};
  const auto s = complex_schur(a, true);
  const ComplexMatrix rec = multiply(multiply(s.z, s.t), adjoint(s.z));
  double diff = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      diff = std::max(diff, std::abs(rec(i, j) - a(i, j)));
      if (i > j) CHECK(std::abs(s.t(i, j)) <= 1e-13 * norm_frobenius(a));
    }
  CHECK(diff <= 1e-12 * norm_frobenius(a));
  const ComplexMatrix y = multiply(s.z, triangular_eigenvectors(s.t));
  for (std::size_t k = 0; k < n; ++k) {
    double r = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      cplx v = 0.0;
      for (std::size_t j = 0; j < n; ++j) v += a(i, j) * y(j, k);
      r += std::norm(v - s.t(k, k) * y(i, k));
    }
    CHECK(std::sqrt(r) <= 1e-10 * norm_frobenius(a));
  }
}

TEST_CASE("lu inverse and hpd inverse") {
  const RealMatrix a = random_real(20, 20, 3);
  const RealMatrix ai = inverse(a);
  const RealMatrix id = multiply(a, ai);
  for (std::size_t i = 0; i < 20; ++i)
    for (std::size_t j = 0; j < 20; ++j) CHECK(std::abs(id(i, j) - (i == j)) <= 1e-10);
  const ComplexMatrix h = random_hermitian(15, 4);
  ComplexMatrix g = multiply(h, adjoint(h));
  for (std::size_t i = 0; i < 15; ++i) g(i, i) += 0.5;
  const ComplexMatrix gi = hpd_inverse(g);
  const ComplexMatrix gi2 = inverse(g);
  for (std::size_t i = 0; i < 15; ++i)
    for (std::size_t j = 0; j < 15; ++j) CHECK(std::abs(gi(i, j) - gi2(i, j)) <= 1e-10);
  RealMatrix sing(2, 2, 1.0);
  CHECK_THROWS_AS(inverse(sing), NumericalError);
}
