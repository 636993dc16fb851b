#include "rmtlab/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "rmtlab/errors.hpp"
#include "rmtlab/girko.hpp"
#include "rmtlab/linalg.hpp"
#include "rmtlab/model.hpp"
#include "rmtlab/rng.hpp"
#include "rmtlab/spectral.hpp"
#include "rmtlab/stats.hpp"
#include "rmtlab/theory.hpp"

namespace rmtlab::oracle {

std::vector<double> sym3_eigenvalues(const RealMatrix& a) {
  const double p1 = a(0, 1) * a(0, 1) + a(0, 2) * a(0, 2) + a(1, 2) * a(1, 2);
  const double q = (a(0, 0) + a(1, 1) + a(2, 2)) / 3.0;
  const double p2 = std::pow(a(0, 0) - q, 2) + std::pow(a(1, 1) - q, 2) +
                    std::pow(a(2, 2) - q, 2) + 2.0 * p1;
  const double p = std::sqrt(p2 / 6.0);
  if (p == 0.0) return {q, q, q};
  RealMatrix b(3, 3);
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) b(i, j) = (a(i, j) - (i == j ? q : 0.0)) / p;
  const double det = b(0, 0) * (b(1, 1) * b(2, 2) - b(1, 2) * b(2, 1)) -
                     b(0, 1) * (b(1, 0) * b(2, 2) - b(1, 2) * b(2, 0)) +
                     b(0, 2) * (b(1, 0) * b(2, 1) - b(1, 1) * b(2, 0));
  const double phi = std::acos(std::clamp(det / 2.0, -1.0, 1.0)) / 3.0;
  std::vector<double> out{q + 2.0 * p * std::cos(phi),
                          q + 2.0 * p * std::cos(phi + 2.0 * std::numbers::pi / 3.0)};
  out.push_back(3.0 * q - out[0] - out[1]);
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<double> charpoly(const RealMatrix& a) {
  const std::size_t n = a.rows();
  std::vector<double> c(n + 1, 0.0);
  c[n] = 1.0;
  RealMatrix m(n, n);
  for (std::size_t k = 1; k <= n; ++k) {
    RealMatrix next = multiply(a, m);
    for (std::size_t i = 0; i < n; ++i) next(i, i) += c[n - k + 1];
    m = next;
    const RealMatrix am = multiply(a, m);
    double tr = 0.0;
    for (std::size_t i = 0; i < n; ++i) tr += am(i, i);
    c[n - k] = -tr / static_cast<double>(k);
  }
  return c;
}

std::vector<cplx> poly_roots(const std::vector<double>& c) {
  const std::size_t n = c.size() - 1;
  std::vector<cplx> z(n);
  const cplx seed(0.4, 0.9);
  for (std::size_t i = 0; i < n; ++i) z[i] = std::pow(seed, static_cast<int>(i));
  auto eval = [&](cplx x) {
    cplx s = 0.0;
    for (std::size_t k = n + 1; k-- > 0;) s = s * x + c[k];
    return s;
  };
  for (int it = 0; it < 2000; ++it) {
    double change = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      cplx d = 1.0;
      for (std::size_t j = 0; j < n; ++j)
        if (j != i) d *= z[i] - z[j];
      const cplx step = eval(z[i]) / d;
      z[i] -= step;
      change = std::max(change, std::abs(step));
    }
    if (change < 1e-15) break;
  }
  return z;
}

double multiset_distance(std::vector<cplx> a, std::vector<cplx> b) {
  double worst = 0.0;
  for (const cplx& x : a) {
    auto it = std::min_element(b.begin(), b.end(), [&](cplx p, cplx q) {
      return std::abs(p - x) < std::abs(q - x);
    });
    if (it == b.end()) return INFINITY;
    worst = std::max(worst, std::abs(*it - x));
    b.erase(it);
  }
  return worst;
}

bool Report::pass() const {
  return std::all_of(checks.begin(), checks.end(), [](const Check& c) { return c.pass; });
}

void Report::add(std::string name, double value, double bound) {
  checks.push_back({std::move(name), value, bound, std::isfinite(value) && value <= bound});
}

// ---------------------------------------------------------------------------

Report identities(std::uint64_t seed) {
  Report r{"identities", {}};
  Rng rng(seed);
  const std::size_t sizes[] = {16, 32, 64, 128, 256};
  double ward = 0.0, pairing = 0.0, block = 0.0, real_part = 0.0, symmetry = 0.0;
  for (int c = 0; c < 20; ++c) {
    const std::size_t n = sizes[c % 5];
    const std::uint64_t stream = derive_stream(seed, c);
    model::MatrixSample x = [&] {
      switch (c % 3) {
        case 0: return model::sample_er(model::EnsembleParams(n, 0.1, stream));
        case 1: return model::center(model::sample_er(model::EnsembleParams(n, 0.3, stream)));
        default: return model::sample_ginibre(n, stream);
      }
    }();
    const cplx w = std::polar(1.5 * rng.uniform(), 2.0 * std::numbers::pi * rng.uniform());
    const double eta = std::pow(10.0, -3.0 + 3.0 * rng.uniform());
    const cplx z(0.0, eta);

    const ComplexMatrix g = spectral::resolvent_direct(x, w, z);
    const std::size_t dim = 2 * n;
    cplx tr = 0.0, upper = 0.0, lower = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      upper += g(i, i);
      lower += g(i + n, i + n);
    }
    tr = upper + lower;
    block = std::max(block, std::abs(upper - lower) / static_cast<double>(n));
    real_part = std::max(real_part, std::abs((tr / static_cast<double>(dim)).real()));
    for (std::size_t b = 0; b < dim; ++b) {
      double s = 0.0;
      for (std::size_t a = 0; a < dim; ++a) {
        s += std::norm(g(a, b));
        const bool same = (a < n) == (b < n);
        const cplx d = same ? g(a, b) + std::conj(g(b, a)) : g(a, b) - std::conj(g(b, a));
        symmetry = std::max(symmetry, std::abs(d));
      }
      ward = std::max(ward, eta * std::abs(s - g(b, b).imag() / eta));
    }
    const auto ev = spectral::sym_eig(spectral::hermitize(x, w).to_dense(4096), false).values;
    for (std::size_t k = 0; k < dim; ++k)
      pairing = std::max(pairing, std::abs(ev[k] + ev[dim - 1 - k]));
  }
  r.add("ward residual * eta", ward, 1e-8);
  r.add("chiral pairing defect", pairing, 1e-8);
  r.add("block-trace identity", block, 1e-9);
  r.add("|Re g~| at z = i eta", real_part, 1e-10);
  r.add("symmetry relations", symmetry, 1e-8);
  return r;
}

Report cubic() {
  Report r{"cubic", {}};
  double residual = 0.0, identity = 0.0, min_im = INFINITY;
  for (int i = 0; i < 100; ++i) {
    const double radius = 2.5 * i / 99.0;
    for (int j = 0; j < 100; ++j) {
      const double eta = std::pow(10.0, -6.0 + 7.0 * j / 99.0);
      const cplx w = std::polar(radius, 0.37 * i + 1.1 * j);
      const auto s = theory::solve_m({w, eta});
      residual = std::max(residual, std::abs(theory::eval_P(s.m, {w, eta})));
      min_im = std::min(min_im, s.m.imag());
      identity = std::max(identity, std::abs(1.0 + cplx(0, eta) * s.m + s.m * s.m + w * s.u));
    }
  }
  double semicircle = 0.0;
  for (double eta : {1e-6, 1e-3, 0.1, 1.0, 10.0}) {
    const double exact = (std::sqrt(eta * eta + 4.0) - eta) / 2.0;
    semicircle = std::max(semicircle, std::abs(theory::solve_m({0.0, eta}).m - cplx(0, exact)));
  }
  r.add("max |P(m)|", residual, 1e-12);
  r.checks.push_back({"min Im m (must be > 0)", min_im, 0.0, min_im > 0.0});
  r.add("semicircle at w = 0", semicircle, 1e-12);
  r.add("1 + i eta m + m^2 + w u", identity, 1e-10);
  return r;
}

Report equivalence(std::uint64_t seed) {
  Report r{"equivalence", {}};
  Rng rng(seed);

  double arnoldi = 0.0;
  int k = 0;
  for (std::size_t n : {64, 128, 256}) {
    for (int rep = 0; rep < 2; ++rep, ++k) {
      const std::uint64_t stream = derive_stream(seed, 100 + k);
      const auto x = rep == 0 ? model::sample_er(model::EnsembleParams(n, 0.1, stream))
                              : model::sample_ginibre(n, stream);
      auto dense = spectral::dense_nonsym_eig(x, false).values;
      std::sort(dense.begin(), dense.end(),
                [](cplx a, cplx b) { return std::abs(a) > std::abs(b); });
      const auto top = spectral::arnoldi_topk(x, 2, 1e-10);
      for (int i = 0; i < 2; ++i)
        arnoldi = std::max(arnoldi, std::abs(std::abs(top.eigenvalues[i]) - std::abs(dense[i])));
    }
  }
  r.add("arnoldi top-2 moduli vs dense", arnoldi, 1e-6);

  double green = 0.0;
  for (int rep = 0; rep < 3; ++rep) {
    const auto x = model::sample_er(model::EnsembleParams(64, 0.2, derive_stream(seed, 200 + rep)));
    const cplx w = std::polar(0.5 + rng.uniform(), 6.0 * rng.uniform());
    const cplx z(rep == 2 ? 0.3 : 0.0, 0.01 + 0.2 * rng.uniform());
    const auto spectrum = spectral::hermitian_spectrum(x, w);
    const spectral::GreenEvaluation g(spectrum, z);
    const auto direct = spectral::resolvent_direct(x, w, z);
    for (std::size_t a = 0; a < 128; ++a)
      for (std::size_t b = 0; b < 128; ++b)
        green = std::max(green, std::abs(g.entry(a, b) - direct(a, b)));
  }
  r.add("Green entries: spectral vs LU inverse (N = 64)", green, 1e-10);

  double sym3 = 0.0;
  for (int rep = 0; rep < 50; ++rep) {
    RealMatrix a(3, 3);
    for (int i = 0; i < 3; ++i)
      for (int j = i; j < 3; ++j) a(i, j) = a(j, i) = rng.normal();
    const auto ours = spectral::sym_eig(a, false).values;
    const auto ref = sym3_eigenvalues(a);
    for (int i = 0; i < 3; ++i) sym3 = std::max(sym3, std::abs(ours[i] - ref[i]));
  }
  r.add("3x3 sym_eig vs characteristic roots", sym3, 1e-10);
  return r;
}

Report girko(std::uint64_t seed, std::size_t samples) {
  Report r{"girko", {}};
  double worst = 0.0;
  for (std::size_t s = 0; s < samples; ++s) {
    const auto x = model::sample_er(model::EnsembleParams(64, 0.2, derive_stream(seed, s)));
    const auto lambda = spectral::dense_nonsym_eig(x, false).values;
    const auto f = girko::unscaled({girko::Profile::polynomial_bump, cplx(0.3, 0.1)});
    const cplx direct = girko::linear_stat_direct(lambda, f);
    const auto g = girko::linear_stat_girko(x, f, {});
    worst = std::max(worst, std::abs(g.value - direct) / std::abs(direct));
  }
  r.add("max relative |girko - direct| (N = 64)", worst, 1e-3);

  double calib = 0.0;
  girko::QuadratureSpec spec;
  spec.eta_lower = 1e-12;
  spec.tolerance = 1e-6;
  for (girko::Profile p : {girko::Profile::polynomial_bump, girko::Profile::gaussian_bump}) {
    const auto f = girko::unscaled({p, cplx(0.2, -0.1)});
    for (cplx lambda : {cplx(0.2, -0.1), cplx(0.5, 0.3), cplx(-0.4, 0.1)}) {
      const girko::LogModulusFn lm = [&](cplx w) {
        girko::LogModulus out;
        out.value = std::log(std::abs(lambda - w));
        out.min_sigma = std::abs(lambda - w);
        return out;
      };
      const auto v = girko::girko_integral(f, lm, 1, spec);
      calib = std::max(calib, std::abs(v.value - f(lambda)));
    }
  }
  r.add("Green's identity calibration |I - f(lambda)|", calib, 1e-3);
  return r;
}

Report ks_level(std::uint64_t seed) {
  Report r{"ks-level", {}};
  Rng rng(seed);
  int rejects = 0;
  const int reps = 500;
  std::vector<double> a(100), b(100);
  for (int i = 0; i < reps; ++i) {
    for (double& t : a) t = rng.normal();
    for (double& t : b) t = rng.normal();
    if (stats::two_sample_ks(a, b).p_value < 0.05) ++rejects;
  }
  r.add("|reject rate - 0.05|", std::abs(rejects / double(reps) - 0.05), 0.02);
  return r;
}

const std::vector<std::string>& subchecks() {
  static const std::vector<std::string> names{"identities", "cubic", "equivalence", "girko",
                                              "ks-level"};
  return names;
}

Report run(std::string_view name, std::uint64_t seed) {
  if (name == "identities") return identities(seed);
  if (name == "cubic") return cubic();
  if (name == "equivalence") return equivalence(seed);
  if (name == "girko") return girko(seed);
  if (name == "ks-level") return ks_level(seed);
  std::string known;
  for (const auto& n : subchecks()) known += (known.empty() ? "" : ", ") + n;
  throw ConfigError("unknown oracle subcheck '" + std::string(name) + "' (known: " + known + ")");
}

}  // namespace rmtlab::oracle
