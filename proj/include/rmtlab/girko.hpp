#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <span>
#include <string_view>
#include <vector>

#include "rmtlab/matrix.hpp"
#include "rmtlab/model.hpp"
#include "rmtlab/spectral.hpp"

namespace rmtlab::girko {

// Radial test profiles f(w) = g(|w|^2).
//   polynomial-bump: g(s) = (1 - s)^4 on s <= 1
//   gaussian-bump:   g(s) = exp(-s) (1 - s/9)^4 on s <= 9
enum class Profile { polynomial_bump, gaussian_bump };

std::string_view to_string(Profile profile);
Profile parse_profile(std::string_view name);

struct RadialValue {
  double g = 0.0, dg = 0.0, d2g = 0.0;
};

RadialValue radial(Profile profile, double s);
// Support is s <= radial_support(profile).
double radial_support(Profile profile);

struct TestFunction {
  Profile profile = Profile::polynomial_bump;
  cplx center;
  double a = 0.5;       // scale exponent
  double delta = 0.05;  // admissible range for a is (1/2 - delta/2, 1/2]
};

// f_{w*}(w) = amp * g(k |w - w*|^2) with analytic Laplacian and d/d(conj w).
// rescale_f gives amp = k = N^{2a}; unscaled() gives amp = k = 1.
class ScaledFunction {
 public:
  ScaledFunction(Profile profile, cplx center, double amp, double k)
      : profile_(profile), center_(center), amp_(amp), k_(k) {}

  double operator()(cplx w) const;
  double laplacian(cplx w) const;  // 4 amp k (g' + s g'')
  cplx dbar(cplx w) const;         // amp k g'(s) (w - w*)

  cplx center() const { return center_; }
  Profile profile() const { return profile_; }
  double amplitude() const { return amp_; }
  double support_radius() const;
  double sup_norm() const { return amp_; }  // both profiles peak at g(0) = 1
  // int f d^2w over the whole plane.
  double integral() const;

 private:
  Profile profile_;
  cplx center_;
  double amp_;
  double k_;
};

ScaledFunction rescale_f(const TestFunction& tf, std::size_t n);
ScaledFunction unscaled(const TestFunction& tf);

// N^{-1} sum_i f(lambda_i), N = spectrum size.
cplx linear_stat_direct(std::span<const cplx> spectrum, const ScaledFunction& f);

// pi^{-1} int_{|w| <= 1} f(w) d^2w by polar Gauss quadrature about the center.
double disc_integral(const ScaledFunction& f);

enum class QuadratureMode { adaptive, midpoint };

struct QuadratureSpec {
  double eta_lower = 0.0;  // 0: N^{-5}
  double delta_q = 0.05;
  double eta_ratio = 1.15;
  std::size_t grid = 33;         // midpoint cells per side
  std::size_t refinements = 1;   // midpoint halvings
  QuadratureMode mode = QuadratureMode::adaptive;
  double tolerance = 5e-4;       // absolute, on the statistic
  int max_depth = 14;
  double jitter = 1e-6;

  double resolved_eta_lower(std::size_t n) const;
  double eta_star(std::size_t n) const { return std::pow(double(n), -0.75 + delta_q); }
  // Diagnostic geometric eta grid on [eta_lower, eta_star].
  std::vector<double> eta_grid(std::size_t n) const;
};

struct LogModulus {
  double value = 0.0;       // sum_j 1/2 log(sigma_j^2 + eta_lower^2)
  double bias_bound = 0.0;  // sum_j eta_lower^2 / sigma_j^2
  double min_sigma = 0.0;
  bool ill_conditioned = false;  // some sigma_j < 10 eta_lower
};

LogModulus log_modulus_from_sigma(std::span<const double> sigma, double eta_lower);
LogModulus log_modulus_via_eta(const model::MatrixSample& x, cplx w, const QuadratureSpec& spec,
                               const spectral::SpectralConfig& cfg = {});

struct GirkoResult {
  cplx value;
  double error_estimate = 0.0;
  std::size_t nodes = 0;
  std::size_t jittered_nodes = 0;  // nodes moved off an ill-conditioned point
  std::size_t ill_conditioned_nodes = 0;
  double max_bias = 0.0;
  std::vector<double> levels;  // midpoint mode: value at each refinement
};

using LogModulusFn = std::function<LogModulus(cplx)>;

// (2 pi N)^{-1} int laplacian(f)(w) L(w) d^2w with L(w) = sum_i log|lambda_i - w|
// supplied by `log_modulus`.
GirkoResult girko_integral(const ScaledFunction& f, const LogModulusFn& log_modulus,
                           std::size_t n, const QuadratureSpec& spec);

GirkoResult linear_stat_girko(const model::MatrixSample& x, const ScaledFunction& f,
                              const QuadratureSpec& spec,
                              const spectral::SpectralConfig& cfg = {});

struct TailResult {
  cplx t3;
  std::vector<cplx> nodes;
  std::vector<cplx> deviations;  // N^{-1} sum_i G_{i+N,i}(i eta*) - u(i eta*)
};

using OffdiagFn = std::function<cplx(cplx w, double eta)>;

// T3 = -pi^{-1} int dbar f(w) [offdiag(w, i eta*) - u(w, i eta*)] d^2w on a
// tensor Gauss grid of `nodes_per_side`^2 points over the support.
TailResult ibp_tail(const ScaledFunction& f, const OffdiagFn& offdiag, double eta_star,
                    std::size_t nodes_per_side = 12);
TailResult ibp_tail(const model::MatrixSample& x, const ScaledFunction& f, double eta_star,
                    std::size_t nodes_per_side = 12);

}  // namespace rmtlab::girko
