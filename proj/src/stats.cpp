#include "rmtlab/stats.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "rmtlab/errors.hpp"
#include "rmtlab/rng.hpp"

namespace rmtlab::stats {

double quantile(std::vector<double> values, double q) {
  if (values.empty()) throw DomainError("quantile of an empty sample");
  if (!(q >= 0.0 && q <= 1.0)) throw DomainError("quantile level outside [0, 1]");
  std::sort(values.begin(), values.end());
  const double h = q * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, values.size() - 1);
  return values[lo] + (h - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

double median(std::vector<double> values) { return quantile(std::move(values), 0.5); }

// ---------------------------------------------------------------------------

EdgeReport edge_report(std::span<const cplx> spectrum, std::size_t n, std::optional<double> f) {
  if (spectrum.size() < 2) throw DomainError("edge_report: spectrum needs at least two values");
  std::size_t top = 0;
  for (std::size_t i = 1; i < spectrum.size(); ++i)
    if (std::abs(spectrum[i]) > std::abs(spectrum[top])) top = i;

  EdgeReport r;
  r.lambda1 = spectrum[top];
  std::size_t removed = spectrum.size();
  if (f) {
    removed = 0;
    for (std::size_t i = 1; i < spectrum.size(); ++i)
      if (std::abs(spectrum[i] - *f) < std::abs(spectrum[removed] - *f)) removed = i;
    r.f_gap = std::abs(r.lambda1 - *f);
  }
  r.rho2 = 0.0;
  for (std::size_t i = 0; i < spectrum.size(); ++i)
    if (i != removed) r.rho2 = std::max(r.rho2, std::abs(spectrum[i]));
  r.fluct = std::sqrt(static_cast<double>(n)) * (r.rho2 - 1.0);
  return r;
}

// ---------------------------------------------------------------------------

DelocReport delocalization(const linalg::NonsymEig& eig, double radius) {
  const std::size_t n = eig.vectors.rows();
  if (eig.vectors.cols() != eig.values.size())
    throw DomainError("delocalization: eigenvectors required");
  DelocReport r;
  for (std::size_t k = 0; k < eig.values.size(); ++k) {
    if (std::abs(eig.values[k]) > radius) continue;
    if (k < eig.defective.size() && eig.defective[k]) {
      ++r.defective_excluded;
      continue;
    }
    double inf = 0.0, two = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double a = std::abs(eig.vectors(i, k));
      inf = std::max(inf, a);
      two += a * a;
    }
    r.values.push_back(std::sqrt(static_cast<double>(n)) * inf / std::sqrt(two));
    r.eigenvalues.push_back(eig.values[k]);
  }
  if (!r.values.empty()) {
    r.max = *std::max_element(r.values.begin(), r.values.end());
    r.median = median(r.values);
  }
  return r;
}

DelocReport delocalization(const model::MatrixSample& x, const spectral::SpectralConfig& cfg) {
  return delocalization(spectral::dense_nonsym_eig(x, true, cfg));
}

// ---------------------------------------------------------------------------

CorrelationSample kpoint_sample(std::span<const cplx> spectrum, cplx w_star, double radius,
                                std::size_t n, std::uint64_t trial) {
  const double sn = std::sqrt(static_cast<double>(n));
  CorrelationSample s;
  s.center = w_star;
  s.radius = radius;
  s.trial = trial;
  for (const cplx& lambda : spectrum) {
    const cplx z = sn * (lambda - w_star);
    if (std::abs(z) > radius) continue;
    s.points.push_back(z);
    s.moduli.push_back(sn * (std::abs(lambda) - 1.0));
  }
  for (std::size_t i = 0; i < s.points.size(); ++i)
    for (std::size_t j = i + 1; j < s.points.size(); ++j) {
      const double d = std::abs(s.points[i] - s.points[j]);
      if (!s.min_distance || d < *s.min_distance) s.min_distance = d;
    }
  return s;
}

// ---------------------------------------------------------------------------

double kolmogorov_survival(double x) {
  if (x <= 0.0) return 1.0;
  // Below ~0.2 the alternating series converges slowly and Q is 1 to double precision.
  if (x < 0.2) return 1.0;
  double sum = 0.0;
  for (int j = 1; j <= 100; ++j) {
    const double term = std::exp(-2.0 * j * j * x * x);
    sum += (j % 2 == 1 ? term : -term);
    if (term < 1e-17) break;
  }
  return std::clamp(2.0 * sum, 0.0, 1.0);
}

TwoSampleResult two_sample_ks(std::span<const double> a, std::span<const double> b,
                              std::string name) {
  if (a.size() < 20 || b.size() < 20)
    throw DomainError("two_sample_ks: each sample needs at least 20 values");
  std::vector<double> x(a.begin(), a.end()), y(b.begin(), b.end());
  for (double v : x)
    if (!std::isfinite(v)) throw DomainError("two_sample_ks: non-finite value");
  for (double v : y)
    if (!std::isfinite(v)) throw DomainError("two_sample_ks: non-finite value");
  std::sort(x.begin(), x.end());
  std::sort(y.begin(), y.end());

  const double nx = static_cast<double>(x.size()), ny = static_cast<double>(y.size());
  std::size_t i = 0, j = 0;
  double d = 0.0;
  while (i < x.size() && j < y.size()) {
    const double v = std::min(x[i], y[j]);
    while (i < x.size() && x[i] == v) ++i;
    while (j < y.size() && y[j] == v) ++j;
    d = std::max(d, std::abs(static_cast<double>(i) / nx - static_cast<double>(j) / ny));
  }

  TwoSampleResult r;
  r.name = std::move(name);
  r.statistic = d;
  r.n_a = x.size();
  r.n_b = y.size();
  const double ne = std::sqrt(nx * ny / (nx + ny));
  r.p_value = kolmogorov_survival((ne + 0.12 + 0.11 / ne) * d);
  return r;
}

// ---------------------------------------------------------------------------

std::vector<double> geometric_grid(double lo, double hi, std::size_t points) {
  if (!(lo > 0.0 && hi >= lo) || points == 0) throw DomainError("geometric_grid: bad range");
  std::vector<double> g(points);
  for (std::size_t k = 0; k < points; ++k) {
    const double t = points == 1 ? 0.0 : static_cast<double>(k) / static_cast<double>(points - 1);
    g[k] = lo * std::pow(hi / lo, t);
  }
  g.back() = hi;
  return g;
}

void check_local_law_grid(const LocalLawSpec& spec) {
  if (spec.etas.empty()) throw DomainError("local law: empty eta grid");
  for (double eta : spec.etas) {
    const auto label = theory::classify_domain({spec.w, eta}, spec.n, spec.delta).label;
    const bool edge = label == theory::DomainLabel::edge_inside_s1 ||
                      label == theory::DomainLabel::edge_outside_s2;
    const bool bulk = spec.allow_bulk && label == theory::DomainLabel::bulk_d;
    if (!edge && !bulk)
      throw DomainError("local law: eta = " + std::to_string(eta) +
                        " is outside the spectral domain (" +
                        std::string(theory::to_string(label)) + ")");
  }
}

LocalLawTrial local_law_trial(const LocalLawSpec& spec, std::uint64_t seed,
                              const spectral::SpectralConfig& cfg) {
  const model::EnsembleParams params(spec.n, spec.p, seed);
  const auto a = model::sample_er(params);
  const auto b = model::center(a);
  const auto sigma_a = spectral::singular_values(a, spec.w, cfg);
  const auto sigma_b = spectral::singular_values(b, spec.w, cfg);

  LocalLawTrial t;
  for (double eta : spec.etas) {
    const cplx m = theory::solve_m({spec.w, eta}).m;
    const auto record = [&](const std::vector<double>& sigma, std::vector<double>& out) {
      const cplx g = spectral::trace_green_from_sigma(sigma, eta);
      const double full = std::abs(g - m);
      t.max_real_part = std::max(t.max_real_part, std::abs(g.real()));
      t.max_discrepancy =
          std::max(t.max_discrepancy, std::abs(full - std::abs(g.imag() - m.imag())));
      out.push_back(full);
    };
    record(sigma_b, t.centered);
    record(sigma_a, t.perturbed);
  }
  return t;
}

namespace {

Quantiles quantiles_of(const std::vector<double>& v) {
  return {quantile(v, 0.1), quantile(v, 0.5), quantile(v, 0.9)};
}

}  // namespace

std::vector<LocalLawRow> summarize_local_law(const LocalLawSpec& spec,
                                             std::span<const LocalLawTrial> trials) {
  std::vector<LocalLawRow> rows;
  if (trials.empty()) return rows;
  const double n = static_cast<double>(spec.n);
  for (std::size_t k = 0; k < spec.etas.size(); ++k) {
    const double eta = spec.etas[k];
    const double scale = std::pow(n, 1.0 + spec.nu) * eta;
    std::vector<double> c, p, cs, ps;
    for (const auto& t : trials) {
      c.push_back(t.centered.at(k));
      p.push_back(t.perturbed.at(k));
      cs.push_back(scale * t.centered[k]);
      ps.push_back(scale * t.perturbed[k]);
    }
    LocalLawRow row;
    row.eta = eta;
    row.m_im = theory::solve_m({spec.w, eta}).m.imag();
    row.centered = quantiles_of(c);
    row.perturbed = quantiles_of(p);
    row.centered_scaled = quantiles_of(cs);
    row.perturbed_scaled = quantiles_of(ps);
    rows.push_back(row);
  }
  return rows;
}

std::vector<LocalLawRow> local_law_curve(const LocalLawSpec& spec, std::size_t trials,
                                         std::uint64_t seed,
                                         const spectral::SpectralConfig& cfg) {
  check_local_law_grid(spec);
  std::vector<LocalLawTrial> results;
  for (std::size_t t = 0; t < trials; ++t)
    results.push_back(local_law_trial(spec, derive_stream(seed, t), cfg));
  return summarize_local_law(spec, results);
}

// ---------------------------------------------------------------------------

EntrywiseError entrywise_law_error(const model::MatrixSample& x, cplx w, cplx z,
                                   std::size_t samples, std::uint64_t seed, double delta,
                                   const spectral::SpectralConfig& cfg) {
  const std::size_t n = x.n();
  const auto label = theory::classify_domain({w, z.imag()}, n, delta, z.real()).label;
  if (label == theory::DomainLabel::outside_all)
    throw DomainError("entrywise_law_error: (w, z) is outside D_delta");
  if (samples == 0) throw DomainError("entrywise_law_error: sample size must be positive");

  const auto sol = theory::solve_m_general(w, z);
  const auto mm = theory::build_M(sol, w);

  Rng rng(seed);
  const auto index = [&](std::size_t bound) {
    return std::min(static_cast<std::size_t>(rng.uniform() * static_cast<double>(bound)),
                    bound - 1);
  };
  spectral::GreenRequest request;
  for (std::size_t s = 0; s < samples; ++s) {
    const std::size_t a = index(2 * n);
    std::size_t b;
    if (s % 2 == 0) {
      b = index(2 * n);
    } else {
      b = index(2) == 0 ? a : (a < n ? a + n : a - n);
    }
    request.entries.push_back({a, b});
  }
  const auto g = spectral::green_entries(x, w, z, request, cfg);

  EntrywiseError e;
  e.samples = samples;
  for (const auto& [ab, value] : g.entries) {
    const cplx expected = mm.entry(ab.first, ab.second, n);
    const double err = std::abs(value - expected);
    e.max_error = std::max(e.max_error, err);
    if (expected != cplx(0.0))
      e.max_support_error = std::max(e.max_support_error, err);
    else
      e.max_zero_error = std::max(e.max_zero_error, err);
  }
  const double q = x.params() ? x.params()->q() : std::numeric_limits<double>::infinity();
  e.envelope = std::pow(static_cast<double>(n) * z.imag(), -1.0 / 6.0) + std::pow(q, -1.0 / 3.0);
  return e;
}

// ---------------------------------------------------------------------------

EnsembleSample sample_spectra(Ensemble ensemble, std::size_t n, double p, std::size_t trials,
                              std::uint64_t seed, const spectral::SpectralConfig& cfg) {
  EnsembleSample s;
  s.ensemble = ensemble;
  s.n = n;
  if (ensemble == Ensemble::er) s.f = model::EnsembleParams(n, p, seed).f();
  for (std::size_t t = 0; t < trials; ++t) {
    const std::uint64_t stream = derive_stream(seed, t);
    const auto x = ensemble == Ensemble::er
                       ? model::sample_er(model::EnsembleParams(n, p, stream))
                       : model::sample_ginibre(n, stream);
    s.spectra.push_back(spectral::edge_spectrum(x, cfg));
  }
  return s;
}

EdgeFunctionals edge_functionals(const EnsembleSample& sample, const WindowSpec& windows,
                                 double scale) {
  EdgeFunctionals out;
  std::vector<cplx> scaled;
  for (std::size_t t = 0; t < sample.spectra.size(); ++t) {
    scaled = sample.spectra[t];
    for (cplx& v : scaled) v *= scale;
    const std::optional<double> f = sample.f ? std::optional(*sample.f * scale) : std::nullopt;
    out.fluct.push_back(edge_report(scaled, sample.n, f).fluct);
    for (double angle : windows.angles) {
      const auto k = kpoint_sample(scaled, std::polar(1.0, angle), windows.radius, sample.n, t);
      out.count.push_back(static_cast<double>(k.count()));
      if (k.min_distance) out.min_distance.push_back(*k.min_distance);
    }
  }
  return out;
}

std::vector<TwoSampleResult> compare_functionals(const EdgeFunctionals& a,
                                                 const EdgeFunctionals& b) {
  return {two_sample_ks(a.fluct, b.fluct, "fluct"),
          two_sample_ks(a.min_distance, b.min_distance, "min-distance"),
          two_sample_ks(a.count, b.count, "count")};
}

UniversalityResult universality_suite(const UniversalityConfig& c) {
  if (c.trials < 100) throw DomainError("universality_suite: needs at least 100 trials per ensemble");
  const auto er = sample_spectra(Ensemble::er, c.n, c.p, c.trials, derive_stream(c.seed, 0), c.cfg);
  const auto er2 = sample_spectra(Ensemble::er, c.n, c.p, c.trials, derive_stream(c.seed, 1), c.cfg);
  const auto gin = sample_spectra(Ensemble::ginibre, c.n, c.p, c.trials, derive_stream(c.seed, 2), c.cfg);
  const auto gin2 = sample_spectra(Ensemble::ginibre, c.n, c.p, c.trials, derive_stream(c.seed, 3), c.cfg);

  const auto fer = edge_functionals(er, c.windows);
  UniversalityResult r;
  r.er_vs_ginibre = compare_functionals(fer, edge_functionals(gin, c.windows));
  r.er_vs_er = compare_functionals(fer, edge_functionals(er2, c.windows));
  r.ginibre_vs_scaled = two_sample_ks(edge_functionals(gin, c.windows).fluct,
                                      edge_functionals(gin2, c.windows, c.control_scale).fluct,
                                      "fluct");
  return r;
}

}  // namespace rmtlab::stats
