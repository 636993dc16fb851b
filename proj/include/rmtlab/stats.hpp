#pragma once

#include <cstddef>
#include <cstdint>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "rmtlab/linalg.hpp"
#include "rmtlab/matrix.hpp"
#include "rmtlab/model.hpp"
#include "rmtlab/spectral.hpp"
#include "rmtlab/theory.hpp"

namespace rmtlab::stats {

// Type-7 (linear interpolation) sample quantile, q in [0, 1].
double quantile(std::vector<double> values, double q);
double median(std::vector<double> values);

struct EdgeReport {
  cplx lambda1;
  double rho2 = 0.0;
  double fluct = 0.0;            // sqrt(N) (rho2 - 1)
  std::optional<double> f_gap;   // |lambda1 - f|
};

// With f, the eigenvalue nearest f is removed before taking the largest
// remaining modulus. Without f nothing is removed and rho2 is the spectral
// radius (the Ginibre analogue of the deflated radius). `n` is the matrix
// dimension, which differs from spectrum.size() for a deflated top spectrum.
EdgeReport edge_report(std::span<const cplx> spectrum, std::size_t n,
                       std::optional<double> f = {});

struct DelocReport {
  std::vector<double> values;     // sqrt(N) |u|_inf / |u|_2
  std::vector<cplx> eigenvalues;  // matching values
  double max = 0.0;
  double median = 0.0;
  std::size_t defective_excluded = 0;
};

DelocReport delocalization(const linalg::NonsymEig& eig, double radius = 2.0);
DelocReport delocalization(const model::MatrixSample& x,
                           const spectral::SpectralConfig& cfg = {});

struct CorrelationSample {
  cplx center;
  double radius = 0.0;
  std::uint64_t trial = 0;
  std::vector<cplx> points;  // sqrt(N) (lambda - w*)
  std::vector<double> moduli;  // sqrt(N) (|lambda| - 1)
  std::optional<double> min_distance;

  std::size_t count() const { return points.size(); }
};

CorrelationSample kpoint_sample(std::span<const cplx> spectrum, cplx w_star,
                                double radius, std::size_t n,
                                std::uint64_t trial = 0);

struct TwoSampleResult {
  std::string name;
  double statistic = 0.0;
  double p_value = 1.0;
  std::size_t n_a = 0, n_b = 0;
};

// Q(x) = 2 sum_{j>=1} (-1)^{j-1} exp(-2 j^2 x^2).
double kolmogorov_survival(double x);

// Two-sample KS with the asymptotic p-value Q((sqrt(ne) + 0.12 + 0.11/sqrt(ne)) D),
// ne = n m / (n + m). Both samples need at least 20 finite values.
TwoSampleResult two_sample_ks(std::span<const double> a, std::span<const double> b,
                              std::string name = "ks");

// Local law along a vertical line z = i eta above a fixed shift w.

struct LocalLawSpec {
  std::size_t n = 1024;
  double p = 0.5;
  cplx w = 1.0;
  std::vector<double> etas;
  double delta = 0.05;
  bool allow_bulk = false;  // accept D_delta points (weak-law variant)
  double nu = 0.0;          // scaled error is N^{1+nu} eta |g~ - m|
};

// Geometric grid of `points` values on [lo, hi].
std::vector<double> geometric_grid(double lo, double hi, std::size_t points);

// Throws DomainError unless every eta lies in S_delta (or D_delta when allowed).
void check_local_law_grid(const LocalLawSpec& spec);

struct LocalLawTrial {
  std::vector<double> centered;   // |g~ - m| for H_w (B)
  std::vector<double> perturbed;  // |g~ - m| for H~_w (A)
  double max_real_part = 0.0;     // max |Re g~|
  double max_discrepancy = 0.0;   // max ||g~ - m| - |Im g~ - Im m||
};

LocalLawTrial local_law_trial(const LocalLawSpec& spec, std::uint64_t seed,
                              const spectral::SpectralConfig& cfg = {});

struct Quantiles {
  double q10 = 0.0, q50 = 0.0, q90 = 0.0;
};

struct LocalLawRow {
  double eta = 0.0;
  double m_im = 0.0;
  Quantiles centered, perturbed;                // |g~ - m|
  Quantiles centered_scaled, perturbed_scaled;  // N^{1+nu} eta |g~ - m|
};

std::vector<LocalLawRow> summarize_local_law(const LocalLawSpec& spec,
                                             std::span<const LocalLawTrial> trials);

std::vector<LocalLawRow> local_law_curve(const LocalLawSpec& spec, std::size_t trials,
                                         std::uint64_t seed,
                                         const spectral::SpectralConfig& cfg = {});

struct EntrywiseError {
  double max_error = 0.0;
  double max_support_error = 0.0;  // pairs where M is nonzero
  double max_zero_error = 0.0;     // pairs where M vanishes
  double envelope = 0.0;           // (N eta)^{-1/6} + q^{-1/3}
  std::size_t samples = 0;
};

// Half of the pairs are drawn on the support of M (same index or partner
// index in the other block), the rest uniformly.
EntrywiseError entrywise_law_error(const model::MatrixSample& x, cplx w, cplx z,
                                   std::size_t samples, std::uint64_t seed,
                                   double delta = 0.05,
                                   const spectral::SpectralConfig& cfg = {});

// Universality: edge functionals of ER vs real Ginibre.

enum class Ensemble { er, ginibre };

struct EnsembleSample {
  Ensemble ensemble = Ensemble::er;
  std::size_t n = 0;
  std::optional<double> f;
  std::vector<std::vector<cplx>> spectra;
};

EnsembleSample sample_spectra(Ensemble ensemble, std::size_t n, double p,
                              std::size_t trials, std::uint64_t seed,
                              const spectral::SpectralConfig& cfg = {});

struct WindowSpec {
  std::vector<double> angles{std::numbers::pi / 4, std::numbers::pi / 2,
                             3 * std::numbers::pi / 4};
  double radius = 3.0;
};

struct EdgeFunctionals {
  std::vector<double> fluct;
  std::vector<double> min_distance;  // windows with at least two points
  std::vector<double> count;
};

// `scale` multiplies every eigenvalue first (power control).
EdgeFunctionals edge_functionals(const EnsembleSample& sample, const WindowSpec& windows,
                                 double scale = 1.0);

std::vector<TwoSampleResult> compare_functionals(const EdgeFunctionals& a,
                                                 const EdgeFunctionals& b);

struct UniversalityConfig {
  std::size_t n = 512;
  double p = 0.05;
  std::size_t trials = 200;
  std::uint64_t seed = 1;
  WindowSpec windows;
  double control_scale = 1.05;
  spectral::SpectralConfig cfg;
};

struct UniversalityResult {
  std::vector<TwoSampleResult> er_vs_ginibre;
  std::vector<TwoSampleResult> er_vs_er;
  TwoSampleResult ginibre_vs_scaled;  // fluct only
};

UniversalityResult universality_suite(const UniversalityConfig& config);

}  // namespace rmtlab::stats
