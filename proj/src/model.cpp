#include "rmtlab/model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace rmtlab::model {

EnsembleParams::EnsembleParams(std::size_t n, double p, std::uint64_t seed,
                               bool zero_diagonal)
    : n_(n), p_(p), seed_(seed), zero_diagonal_(zero_diagonal) {
  if (n < 2) throw DomainError("ensemble dimension must be at least 2");
  if (!(p > 0.0 && p <= 0.5))
    throw DomainError("edge probability must lie in (0, 1/2]");
  const double nd = static_cast<double>(n);
  q_ = std::sqrt(nd * p * (1.0 - p));
  xi_ = std::log(2.0 * q_) / std::log(nd);
  f_ = nd * p / q_;
}

std::string_view to_string(MatrixKind kind) {
  switch (kind) {
    case MatrixKind::adjacency: return "A";
    case MatrixKind::centered: return "B";
    case MatrixKind::ginibre: return "W";
    case MatrixKind::flow: return "B(t)";
    case MatrixKind::corner: return "W_hat";
  }
  return "?";
}

MatrixSample MatrixSample::from_dense(MatrixKind kind, RealMatrix dense,
                                      std::optional<EnsembleParams> params,
                                      std::optional<double> t) {
  if (!dense.square()) throw DomainError("sample matrix must be square");
  MatrixSample s;
  s.kind_ = kind;
  s.n_ = dense.rows();
  s.params_ = std::move(params);
  s.t_ = t;
  s.dense_ = std::move(dense);
  return s;
}

double MatrixSample::entry(std::size_t i, std::size_t j) const {
  const double mean = mean_shift_ / static_cast<double>(n_);
  if (!is_sparse()) return dense_(i, j) + mean;
  const auto first = csr_.col.begin() + static_cast<std::ptrdiff_t>(csr_.row_ptr[i]);
  const auto last = csr_.col.begin() + static_cast<std::ptrdiff_t>(csr_.row_ptr[i + 1]);
  const auto it = std::lower_bound(first, last, static_cast<std::uint32_t>(j));
  double v = 0.0;
  if (it != last && *it == j) v = csr_.value[static_cast<std::size_t>(it - csr_.col.begin())];
  return v - entry_shift_ + mean;
}

RealMatrix MatrixSample::to_dense() const {
  if (!is_sparse()) {
    if (mean_shift_ == 0.0) return dense_;
    RealMatrix out = dense_;
    const double mean = mean_shift_ / static_cast<double>(n_);
    for (std::size_t i = 0; i < n_; ++i)
      for (double& x : out.row(i)) x += mean;
    return out;
  }
  const double base = mean_shift_ / static_cast<double>(n_) - entry_shift_;
  RealMatrix out(n_, n_, base);
  for (std::size_t i = 0; i < n_; ++i)
    for (std::size_t k = csr_.row_ptr[i]; k < csr_.row_ptr[i + 1]; ++k)
      out(i, csr_.col[k]) += csr_.value[k];
  return out;
}

template <typename T>
void MatrixSample::apply(std::span<const T> x, std::span<T> y) const {
  const double shift = entry_shift_ - mean_shift_ / static_cast<double>(n_);
  T sum{};
  if (shift != 0.0)
    for (const T& v : x) sum += v;
  if (is_sparse()) {
    for (std::size_t i = 0; i < n_; ++i) {
      T acc{};
      for (std::size_t k = csr_.row_ptr[i]; k < csr_.row_ptr[i + 1]; ++k)
        acc += csr_.value[k] * x[csr_.col[k]];
      y[i] = acc;
    }
  } else {
    for (std::size_t i = 0; i < n_; ++i) {
      auto r = dense_.row(i);
      T acc{};
      for (std::size_t j = 0; j < n_; ++j) acc += r[j] * x[j];
      y[i] = acc;
    }
  }
  if (shift != 0.0)
    for (auto& v : y) v -= shift * sum;
}

template <typename T>
void MatrixSample::apply_transpose(std::span<const T> x, std::span<T> y) const {
  const double shift = entry_shift_ - mean_shift_ / static_cast<double>(n_);
  T sum{};
  if (shift != 0.0)
    for (const T& v : x) sum += v;
  std::fill(y.begin(), y.end(), T{});
  if (is_sparse()) {
    for (std::size_t i = 0; i < n_; ++i)
      for (std::size_t k = csr_.row_ptr[i]; k < csr_.row_ptr[i + 1]; ++k)
        y[csr_.col[k]] += csr_.value[k] * x[i];
  } else {
    for (std::size_t i = 0; i < n_; ++i) {
      auto r = dense_.row(i);
      const T xi = x[i];
      for (std::size_t j = 0; j < n_; ++j) y[j] += r[j] * xi;
    }
  }
  if (shift != 0.0)
    for (auto& v : y) v -= shift * sum;
}

template void MatrixSample::apply<double>(std::span<const double>, std::span<double>) const;
template void MatrixSample::apply<cplx>(std::span<const cplx>, std::span<cplx>) const;
template void MatrixSample::apply_transpose<double>(std::span<const double>, std::span<double>) const;
template void MatrixSample::apply_transpose<cplx>(std::span<const cplx>, std::span<cplx>) const;

MatrixSample MatrixSample::with_mean_shift(double f) const {
  MatrixSample s = *this;
  s.mean_shift_ += f;
  return s;
}

MatrixSample sample_er_from_bits(const EnsembleParams& params,
                                 const std::vector<std::uint8_t>& mask) {
  const std::size_t n = params.n();
  if (mask.size() != n * n) throw DomainError("edge mask has the wrong size");
  MatrixSample s;
  s.kind_ = MatrixKind::adjacency;
  s.n_ = n;
  s.params_ = params;
  CsrMatrix& csr = s.csr_;
  csr.n = n;
  csr.row_ptr.assign(n + 1, 0);
  const double value = 1.0 / params.q();
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (!mask[i * n + j]) continue;
      if (i == j && params.zero_diagonal()) continue;
      csr.col.push_back(static_cast<std::uint32_t>(j));
      csr.value.push_back(value);
    }
    csr.row_ptr[i + 1] = csr.col.size();
  }
  return s;
}

MatrixSample sample_er(const EnsembleParams& params) {
  Rng rng(params.seed());
  return sample_er(params, [&rng] { return rng.uniform(); });
}

MatrixSample center(const MatrixSample& adjacency) {
  if (adjacency.kind() != MatrixKind::adjacency || !adjacency.params())
    throw DomainError("center expects an adjacency sample");
  MatrixSample s = adjacency;
  s.kind_ = MatrixKind::centered;
  // f / N = p / q
  s.entry_shift_ = adjacency.params()->p() / adjacency.params()->q();
  return s;
}

MatrixSample sample_ginibre(std::size_t n, std::uint64_t seed) {
  if (n < 2) throw DomainError("Ginibre dimension must be at least 2");
  Rng rng(seed);
  const double sd = 1.0 / std::sqrt(static_cast<double>(n));
  RealMatrix w(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (double& x : w.row(i)) x = sd * rng.normal();
  return MatrixSample::from_dense(MatrixKind::ginibre, std::move(w));
}

MatrixSample flow(const MatrixSample& centered, const MatrixSample& ginibre,
                  double t) {
  if (!(t >= 0.0)) throw DomainError("flow time must be nonnegative");
  if (centered.n() != ginibre.n())
    throw DomainError("flow endpoints must have equal dimension");
  const double a = std::exp(-t / 2.0);
  const double b = std::sqrt(-std::expm1(-t));
  RealMatrix x = centered.to_dense();
  const RealMatrix& w = ginibre.dense();
  for (std::size_t i = 0; i < x.rows(); ++i) {
    auto xr = x.row(i);
    auto wr = w.row(i);
    for (std::size_t j = 0; j < x.cols(); ++j) xr[j] = a * xr[j] + b * wr[j];
  }
  return MatrixSample::from_dense(MatrixKind::flow, std::move(x),
                                  centered.params(), t);
}

MatrixSample corner_perturb(const MatrixSample& ginibre, double f) {
  if (ginibre.kind() != MatrixKind::ginibre)
    throw DomainError("corner_perturb expects a Ginibre sample");
  RealMatrix x = ginibre.to_dense();
  x(0, 0) += f;
  return MatrixSample::from_dense(MatrixKind::corner, std::move(x));
}

std::vector<double> bernoulli_cumulants(int k, double p) {
  // kappa_n as a polynomial in p, coefficients in increasing degree.
  std::vector<double> poly{0.0, 1.0};
  std::vector<double> out;
  auto eval = [p](const std::vector<double>& c) {
    double v = 0.0;
    for (auto it = c.rbegin(); it != c.rend(); ++it) v = v * p + *it;
    return v;
  };
  for (int order = 1; order <= k; ++order) {
    out.push_back(eval(poly));
    std::vector<double> deriv(poly.size() > 1 ? poly.size() - 1 : 1, 0.0);
    for (std::size_t d = 1; d < poly.size(); ++d)
      deriv[d - 1] = static_cast<double>(d) * poly[d];
    // multiply by p - p^2
    std::vector<double> next(deriv.size() + 2, 0.0);
    for (std::size_t d = 0; d < deriv.size(); ++d) {
      next[d + 1] += deriv[d];
      next[d + 2] -= deriv[d];
    }
    poly = std::move(next);
  }
  return out;
}

double cumulant_entry(int k, const EnsembleParams& params) {
  if (k < 1) throw DomainError("cumulant order must be at least 1");
  if (k == 1) return 0.0;
  const double kappa = bernoulli_cumulants(k, params.p()).back();
  return kappa / std::pow(params.q(), k);
}

}  // namespace rmtlab::model
