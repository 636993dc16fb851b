#include "rmtlab/girko.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <string>

#include "rmtlab/theory.hpp"

namespace rmtlab::girko {

namespace {

constexpr double kPi = std::numbers::pi;

struct GaussRule {
  std::vector<double> x;  // on [-1, 1]
  std::vector<double> w;
};

GaussRule gauss_legendre(std::size_t n) {
  GaussRule r;
  r.x.resize(n);
  r.w.resize(n);
  for (std::size_t i = 0; i < (n + 1) / 2; ++i) {
    double z = std::cos(kPi * (i + 0.75) / (n + 0.5));
    double dp = 0.0;
    for (int it = 0; it < 100; ++it) {
      double p0 = 1.0, p1 = 0.0;
      for (std::size_t j = 0; j < n; ++j) {
        const double p2 = p1;
        p1 = p0;
        p0 = ((2.0 * j + 1.0) * z * p1 - j * p2) / (j + 1.0);
      }
      dp = n * (z * p0 - p1) / (z * z - 1.0);
      const double dz = p0 / dp;
      z -= dz;
      if (std::abs(dz) < 1e-16) break;
    }
    r.x[i] = -z;
    r.x[n - 1 - i] = z;
    r.w[i] = r.w[n - 1 - i] = 2.0 / ((1.0 - z * z) * dp * dp);
  }
  return r;
}

const GaussRule& rule(std::size_t n) {
  static const GaussRule g4 = gauss_legendre(4);
  static const GaussRule g8 = gauss_legendre(8);
  static const GaussRule g16 = gauss_legendre(16);
  static const GaussRule g64 = gauss_legendre(64);
  switch (n) {
    case 4: return g4;
    case 8: return g8;
    case 16: return g16;
    default: return g64;
  }
}

// int_a^b h(x) dx with an n-point Gauss rule.
template <typename F>
double gauss(F&& h, double a, double b, std::size_t n) {
  const auto& r = rule(n);
  const double mid = 0.5 * (a + b), half = 0.5 * (b - a);
  double s = 0.0;
  for (std::size_t i = 0; i < r.x.size(); ++i) s += r.w[i] * h(mid + half * r.x[i]);
  return s * half;
}

}  // namespace

std::string_view to_string(Profile profile) {
  return profile == Profile::polynomial_bump ? "polynomial-bump" : "gaussian-bump";
}

Profile parse_profile(std::string_view name) {
  if (name == "polynomial-bump") return Profile::polynomial_bump;
  if (name == "gaussian-bump") return Profile::gaussian_bump;
  throw ConfigError("unknown test function profile '" + std::string(name) + "'");
}

double radial_support(Profile profile) {
  return profile == Profile::polynomial_bump ? 1.0 : 9.0;
}

RadialValue radial(Profile profile, double s) {
  RadialValue v;
  if (s < 0.0 || s >= radial_support(profile)) return v;
  if (profile == Profile::polynomial_bump) {
    const double t = 1.0 - s;
    v.g = t * t * t * t;
    v.dg = -4.0 * t * t * t;
    v.d2g = 12.0 * t * t;
    return v;
  }
  // e^{-s} c(s), c = (1 - s/9)^4.
  const double t = 1.0 - s / 9.0;
  const double c = t * t * t * t;
  const double dc = -4.0 / 9.0 * t * t * t;
  const double d2c = 12.0 / 81.0 * t * t;
  const double e = std::exp(-s);
  v.g = e * c;
  v.dg = e * (dc - c);
  v.d2g = e * (d2c - 2.0 * dc + c);
  return v;
}

double ScaledFunction::operator()(cplx w) const {
  return amp_ * radial(profile_, k_ * std::norm(w - center_)).g;
}

double ScaledFunction::laplacian(cplx w) const {
  const double s = k_ * std::norm(w - center_);
  const auto v = radial(profile_, s);
  return 4.0 * amp_ * k_ * (v.dg + s * v.d2g);
}

cplx ScaledFunction::dbar(cplx w) const {
  const double s = k_ * std::norm(w - center_);
  return amp_ * k_ * radial(profile_, s).dg * (w - center_);
}

double ScaledFunction::support_radius() const {
  return std::sqrt(radial_support(profile_) / k_);
}

double ScaledFunction::integral() const {
  const double smax = radial_support(profile_);
  const double g = gauss([&](double s) { return radial(profile_, s).g; }, 0.0, smax, 64);
  return amp_ / k_ * kPi * g;
}

ScaledFunction rescale_f(const TestFunction& tf, std::size_t n) {
  if (!(tf.a > 0.5 - tf.delta / 2.0 && tf.a <= 0.5))
    throw DomainError("scale exponent a must lie in (1/2 - delta/2, 1/2]");
  const double k = std::pow(static_cast<double>(n), 2.0 * tf.a);
  return {tf.profile, tf.center, k, k};
}

ScaledFunction unscaled(const TestFunction& tf) { return {tf.profile, tf.center, 1.0, 1.0}; }

cplx linear_stat_direct(std::span<const cplx> spectrum, const ScaledFunction& f) {
  if (spectrum.empty()) return 0.0;
  double s = 0.0;
  for (const cplx& l : spectrum) s += f(l);
  return s / static_cast<double>(spectrum.size());
}

double disc_integral(const ScaledFunction& f) {
  const cplx c = f.center();
  const double rho = f.support_radius();
  const double c2 = std::norm(c);
  const double cabs = std::sqrt(c2);
  // Radial extent inside the unit disc along direction theta.
  auto interval = [&](double theta, double& lo, double& hi) {
    const double b = (c * std::polar(1.0, -theta)).real();
    const double disc = b * b - c2 + 1.0;
    if (disc < 0.0) return false;
    const double root = std::sqrt(disc);
    lo = std::max(0.0, -b - root);
    hi = std::min(rho, -b + root);
    return hi > lo;
  };
  auto ray = [&](double theta) {
    double lo, hi;
    if (!interval(theta, lo, hi)) return 0.0;
    const cplx dir = std::polar(1.0, theta);
    return gauss([&](double r) { return f(c + r * dir) * r; }, lo, hi, 64);
  };
  // Angles where the radial limits change formula.
  std::vector<double> cuts{0.0, 2.0 * kPi};
  if (cabs > 0.0) {
    const double phase = std::arg(c);
    std::vector<double> bs{0.0, (1.0 - c2 - rho * rho) / (2.0 * rho)};
    if (c2 >= 1.0) {
      bs.push_back(std::sqrt(c2 - 1.0));
      bs.push_back(-std::sqrt(c2 - 1.0));
    }
    for (double b : bs) {
      if (std::abs(b) > cabs) continue;
      const double t = std::acos(std::clamp(b / cabs, -1.0, 1.0));
      for (double th : {phase + t, phase - t}) {
        double x = std::fmod(th, 2.0 * kPi);
        if (x < 0.0) x += 2.0 * kPi;
        cuts.push_back(x);
      }
    }
  }
  std::sort(cuts.begin(), cuts.end());
  double total = 0.0;
  const int panels = 16;
  for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
    const double a = cuts[i], b = cuts[i + 1];
    if (b - a < 1e-15) continue;
    for (int p = 0; p < panels; ++p) {
      const double pa = a + (b - a) * p / panels, pb = a + (b - a) * (p + 1) / panels;
      total += gauss(ray, pa, pb, 16);
    }
  }
  return total / kPi;
}

double QuadratureSpec::resolved_eta_lower(std::size_t n) const {
  return eta_lower > 0.0 ? eta_lower : std::pow(static_cast<double>(n), -5.0);
}

std::vector<double> QuadratureSpec::eta_grid(std::size_t n) const {
  if (!(eta_ratio > 1.0)) throw DomainError("eta grid ratio must exceed 1");
  std::vector<double> out;
  const double top = eta_star(n);
  for (double e = resolved_eta_lower(n); e < top; e *= eta_ratio) out.push_back(e);
  out.push_back(top);
  return out;
}

LogModulus log_modulus_from_sigma(std::span<const double> sigma, double eta_lower) {
  LogModulus out;
  const double e2 = eta_lower * eta_lower;
  out.min_sigma = sigma.empty() ? 0.0 : *std::min_element(sigma.begin(), sigma.end());
  for (double s : sigma) {
    out.value += 0.5 * std::log(s * s + e2);
    out.bias_bound += s > 0.0 ? e2 / (s * s) : HUGE_VAL;
  }
  out.ill_conditioned = out.min_sigma < 10.0 * eta_lower;
  return out;
}

LogModulus log_modulus_via_eta(const model::MatrixSample& x, cplx w, const QuadratureSpec& spec,
                               const spectral::SpectralConfig& cfg) {
  const auto sigma = spectral::singular_values(x, w, cfg);
  return log_modulus_from_sigma(sigma, spec.resolved_eta_lower(x.n()));
}

namespace {

struct NodeEval {
  const ScaledFunction& f;
  const LogModulusFn& log_modulus;
  const QuadratureSpec& spec;
  GirkoResult& result;

  double operator()(cplx w) {
    const double lap = f.laplacian(w);
    ++result.nodes;
    if (lap == 0.0) return 0.0;
    LogModulus lm = log_modulus(w);
    if (lm.ill_conditioned) {
      ++result.jittered_nodes;
      lm = log_modulus(w + spec.jitter * cplx(std::numbers::sqrt2 / 2, std::numbers::sqrt2 / 2));
      if (lm.ill_conditioned) ++result.ill_conditioned_nodes;
    }
    result.max_bias = std::max(result.max_bias, lm.bias_bound);
    return lap * lm.value;
  }
};

struct Cell {
  double x0, y0, h;
};

double cell_gauss(NodeEval& eval, const Cell& c) {
  const auto& r = rule(4);
  const double half = 0.5 * c.h;
  double s = 0.0;
  for (std::size_t i = 0; i < 4; ++i)
    for (std::size_t j = 0; j < 4; ++j)
      s += r.w[i] * r.w[j] *
           eval(cplx(c.x0 + half * (1.0 + r.x[i]), c.y0 + half * (1.0 + r.x[j])));
  return s * half * half;
}

void adaptive(NodeEval& eval, const Cell& c, double value, double tol, int depth,
              double& total, double& error) {
  const double h2 = 0.5 * c.h;
  std::array<Cell, 4> kids{Cell{c.x0, c.y0, h2}, Cell{c.x0 + h2, c.y0, h2},
                           Cell{c.x0, c.y0 + h2, h2}, Cell{c.x0 + h2, c.y0 + h2, h2}};
  std::array<double, 4> kv{};
  double sum = 0.0;
  for (int i = 0; i < 4; ++i) sum += kv[i] = cell_gauss(eval, kids[i]);
  const double diff = std::abs(sum - value);
  if (diff <= tol || depth >= eval.spec.max_depth) {
    total += sum;
    error += diff;
    return;
  }
  for (int i = 0; i < 4; ++i) adaptive(eval, kids[i], kv[i], 0.5 * tol, depth + 1, total, error);
}

}  // namespace

GirkoResult girko_integral(const ScaledFunction& f, const LogModulusFn& log_modulus,
                           std::size_t n, const QuadratureSpec& spec) {
  GirkoResult result;
  NodeEval eval{f, log_modulus, spec, result};
  const double rho = f.support_radius();
  const double x0 = f.center().real() - rho, y0 = f.center().imag() - rho;
  const double norm = 1.0 / (2.0 * kPi * static_cast<double>(n));

  if (spec.mode == QuadratureMode::midpoint) {
    if (spec.grid == 0) throw DomainError("midpoint grid must be positive");
    std::size_t cells = spec.grid;
    for (std::size_t level = 0; level <= spec.refinements; ++level, cells *= 2) {
      const double h = 2.0 * rho / static_cast<double>(cells);
      double s = 0.0;
      for (std::size_t i = 0; i < cells; ++i)
        for (std::size_t j = 0; j < cells; ++j)
          s += eval(cplx(x0 + (i + 0.5) * h, y0 + (j + 0.5) * h));
      result.levels.push_back(s * h * h * norm);
    }
    const std::size_t k = result.levels.size();
    if (k == 1) {
      result.value = result.levels[0];
    } else {
      const double fine = result.levels[k - 1], coarse = result.levels[k - 2];
      result.value = (4.0 * fine - coarse) / 3.0;
      result.error_estimate = std::abs(fine - coarse) / 3.0;
    }
    return result;
  }

  // Adaptive tensor Gauss-Legendre over an 8 x 8 starting partition.
  const int start = 8;
  const double h = 2.0 * rho / start;
  const double tol_integral = spec.tolerance / norm;
  double total = 0.0, error = 0.0;
  for (int i = 0; i < start; ++i)
    for (int j = 0; j < start; ++j) {
      const Cell c{x0 + i * h, y0 + j * h, h};
      adaptive(eval, c, cell_gauss(eval, c), tol_integral / (start * start), 0, total, error);
    }
  result.value = total * norm;
  result.error_estimate = error * norm;
  return result;
}

GirkoResult linear_stat_girko(const model::MatrixSample& x, const ScaledFunction& f,
                              const QuadratureSpec& spec, const spectral::SpectralConfig& cfg) {
  const LogModulusFn lm = [&](cplx w) { return log_modulus_via_eta(x, w, spec, cfg); };
  return girko_integral(f, lm, x.n(), spec);
}

TailResult ibp_tail(const ScaledFunction& f, const OffdiagFn& offdiag, double eta_star,
                    std::size_t nodes_per_side) {
  if (!(eta_star > 0.0)) throw DomainError("ibp_tail: eta_star must be positive");
  const GaussRule r = gauss_legendre(nodes_per_side);
  const double rho = f.support_radius();
  const cplx c = f.center();
  TailResult out;
  cplx sum = 0.0;
  for (std::size_t i = 0; i < nodes_per_side; ++i)
    for (std::size_t j = 0; j < nodes_per_side; ++j) {
      const cplx w = c + rho * cplx(r.x[i], r.x[j]);
      const cplx d = f.dbar(w);
      if (d == cplx{}) continue;
      const cplx u = theory::solve_m({w, eta_star}).u;
      const cplx dev = offdiag(w, eta_star) - u;
      out.nodes.push_back(w);
      out.deviations.push_back(dev);
      sum += r.w[i] * r.w[j] * rho * rho * d * dev;
    }
  out.t3 = -sum / kPi;
  return out;
}

TailResult ibp_tail(const model::MatrixSample& x, const ScaledFunction& f, double eta_star,
                    std::size_t nodes_per_side) {
  const OffdiagFn off = [&](cplx w, double eta) {
    return spectral::offdiag_trace_block(x, w, eta);
  };
  return ibp_tail(f, off, eta_star, nodes_per_side);
}

}  // namespace rmtlab::girko
