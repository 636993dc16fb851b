#include "rmtlab/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "backend.hpp"

namespace rmtlab::spectral {

std::string_view to_string(Backend backend) {
  return backend == Backend::reference ? "reference" : "accelerated";
}

Backend parse_backend(std::string_view name) {
  if (name == "reference") return Backend::reference;
  if (name == "accelerated") return Backend::accelerated;
  throw ConfigError("unknown backend '" + std::string(name) + "'");
}

bool accelerated_available() { return accel::available(); }

std::string backend_id(Backend backend) {
  if (backend == Backend::reference) return "reference";
  return std::string("accelerated:") + accel::name();
}

namespace {

void check_cap(std::size_t dim, std::size_t cap, const char* what) {
  if (dim > cap)
    throw CapacityError(std::string(what) + ": dimension " + std::to_string(dim) +
                        " exceeds dense cap " + std::to_string(cap) +
                        "; use the trace-only path");
}

void require_accelerated() {
  if (!accel::available())
    throw NumericalError("accelerated backend requested but not built");
}

}  // namespace

// ---------------------------------------------------------------------------
// Hermitization

bool Hermitization::perturbed() const {
  return base_->kind() == model::MatrixKind::adjacency || base_->mean_shift() != 0.0;
}

void Hermitization::apply(std::span<const cplx> x, std::span<cplx> y) const {
  const std::size_t n = base_->n();
  auto xt = x.subspan(0, n);
  auto xb = x.subspan(n, n);
  auto yt = y.subspan(0, n);
  auto yb = y.subspan(n, n);
  base_->apply<cplx>(xb, yt);
  base_->apply_transpose<cplx>(xt, yb);
  const cplx wc = std::conj(w_);
  for (std::size_t i = 0; i < n; ++i) {
    yt[i] -= w_ * xb[i];
    yb[i] -= wc * xt[i];
  }
}

ComplexMatrix Hermitization::to_dense(std::size_t cap) const {
  check_cap(dim(), cap, "hermitization");
  const std::size_t n = base_->n();
  const RealMatrix x = base_->to_dense();
  ComplexMatrix h(2 * n, 2 * n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      const cplx y = x(i, j) - (i == j ? w_ : cplx{});
      h(i, n + j) = y;
      h(n + j, i) = std::conj(y);
    }
  return h;
}

RealMatrix Hermitization::to_dense_real(std::size_t cap) const {
  if (w_.imag() != 0.0) throw DomainError("real Hermitization needs a real shift");
  check_cap(dim(), cap, "hermitization");
  const std::size_t n = base_->n();
  const RealMatrix x = base_->to_dense();
  RealMatrix h(2 * n, 2 * n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      const double y = x(i, j) - (i == j ? w_.real() : 0.0);
      h(i, n + j) = y;
      h(n + j, i) = y;
    }
  return h;
}

Hermitization hermitize(const model::MatrixSample& x, cplx w) { return {x, w}; }

// ---------------------------------------------------------------------------
// Dense kernels

template <typename T>
linalg::SymEig<T> sym_eig(const Matrix<T>& a, bool want_vectors, const SpectralConfig& cfg) {
  check_cap(a.rows(), cfg.dense_cap, "sym_eig");
  if (cfg.backend == Backend::accelerated) {
    require_accelerated();
    return accel::sym_eig(a, want_vectors);
  }
  return linalg::sym_eig(a, want_vectors);
}

template linalg::SymEig<double> sym_eig(const RealMatrix&, bool, const SpectralConfig&);
template linalg::SymEig<cplx> sym_eig(const ComplexMatrix&, bool, const SpectralConfig&);

namespace {

template <typename T>
std::vector<double> svd_values(const Matrix<T>& y, const SpectralConfig& cfg) {
  check_cap(y.rows(), cfg.dense_cap, "singular_values");
  if (cfg.backend == Backend::accelerated) {
    require_accelerated();
    return accel::singular_values(y);
  }
  return linalg::singular_values(y);
}

// sigma from the top half of the chiral spectrum of [[0, Y], [Y^*, 0]].
template <typename T>
std::vector<double> svd_via_hermitization(const Matrix<T>& y, const SpectralConfig& cfg) {
  const std::size_t n = y.rows();
  Matrix<T> h(2 * n, 2 * n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      h(i, n + j) = y(i, j);
      h(n + j, i) = conj_of(y(i, j));
    }
  auto eig = sym_eig(h, false, cfg);
  std::vector<double> sigma(n);
  for (std::size_t k = 0; k < n; ++k) sigma[k] = std::max(0.0, eig.values[2 * n - 1 - k]);
  return sigma;
}

std::vector<double> shifted_singular_values(const RealMatrix& x, cplx w,
                                            const SpectralConfig& cfg, SvdMethod method) {
  if (!x.square()) throw DomainError("singular_values: matrix must be square");
  const std::size_t n = x.rows();
  if (w.imag() == 0.0) {
    RealMatrix y = x;
    for (std::size_t i = 0; i < n; ++i) y(i, i) -= w.real();
    return method == SvdMethod::golub_kahan ? svd_values(y, cfg)
                                            : svd_via_hermitization(y, cfg);
  }
  ComplexMatrix y = to_complex(x);
  for (std::size_t i = 0; i < n; ++i) y(i, i) -= w;
  return method == SvdMethod::golub_kahan ? svd_values(y, cfg)
                                          : svd_via_hermitization(y, cfg);
}

}  // namespace

std::vector<double> singular_values(const RealMatrix& x, cplx w, const SpectralConfig& cfg,
                                    SvdMethod method) {
  if (method == SvdMethod::hermitization) check_cap(2 * x.rows(), cfg.dense_cap, "singular_values");
  return shifted_singular_values(x, w, cfg, method);
}

std::vector<double> singular_values(const model::MatrixSample& x, cplx w,
                                    const SpectralConfig& cfg, SvdMethod method) {
  const std::size_t dim = method == SvdMethod::hermitization ? 2 * x.n() : x.n();
  check_cap(dim, cfg.dense_cap, "singular_values");
  return shifted_singular_values(x.to_dense(), w, cfg, method);
}

cplx trace_green_from_sigma(std::span<const double> sigma, double eta) {
  if (!(eta > 0.0)) throw DomainError("trace_green: eta must be positive");
  double s = 0.0;
  for (double v : sigma) s += 1.0 / (v * v + eta * eta);
  return {0.0, eta * s / static_cast<double>(sigma.size())};
}

cplx trace_green(const model::MatrixSample& x, cplx w, double eta, const SpectralConfig& cfg) {
  if (!(eta > 0.0)) throw DomainError("trace_green: eta must be positive");
  const auto sigma = singular_values(x, w, cfg);
  return trace_green_from_sigma(sigma, eta);
}

// ---------------------------------------------------------------------------
// Green function entries

std::shared_ptr<const HermitianSpectrum> hermitian_spectrum(const model::MatrixSample& x,
                                                            cplx w,
                                                            const SpectralConfig& cfg) {
  const std::size_t n = x.n();
  auto out = std::make_shared<HermitianSpectrum>();
  out->n = n;
  out->w = w;
  out->eig = sym_eig(hermitize(x, w).to_dense(cfg.dense_cap), true, cfg);
  const auto& v = out->eig.vectors;
  const std::size_t dim = 2 * n;
  out->upper_weight.assign(dim, 0.0);
  out->offdiag_weight.assign(dim, cplx{});
  for (std::size_t i = 0; i < n; ++i) {
    auto top = v.row(i);
    auto bottom = v.row(i + n);
    for (std::size_t k = 0; k < dim; ++k) {
      out->upper_weight[k] += std::norm(top[k]);
      out->offdiag_weight[k] += bottom[k] * std::conj(top[k]);
    }
  }
  return out;
}

GreenEvaluation::GreenEvaluation(std::shared_ptr<const HermitianSpectrum> spectrum, cplx z)
    : spectrum_(std::move(spectrum)), z_(z) {
  if (!(z.imag() > 0.0)) throw DomainError("green: Im z must be positive");
  const auto& values = spectrum_->eig.values;
  const std::size_t dim = values.size();
  const double n = static_cast<double>(spectrum_->n);
  weights_.resize(dim);
  cplx trace = 0.0, upper = 0.0, lower = 0.0, off = 0.0;
  for (std::size_t k = 0; k < dim; ++k) {
    weights_[k] = 1.0 / (values[k] - z);
    trace += weights_[k];
    upper += weights_[k] * spectrum_->upper_weight[k];
    lower += weights_[k] * (1.0 - spectrum_->upper_weight[k]);
    off += weights_[k] * spectrum_->offdiag_weight[k];
  }
  gtilde = trace / (2.0 * n);
  offdiag_trace = off / n;
  blocktrace_residual = std::abs(upper - lower);
}

cplx GreenEvaluation::entry(std::size_t a, std::size_t b) const {
  const auto& v = spectrum_->eig.vectors;
  auto ra = v.row(a);
  auto rb = v.row(b);
  cplx s = 0.0;
  for (std::size_t k = 0; k < weights_.size(); ++k) s += ra[k] * weights_[k] * std::conj(rb[k]);
  return s;
}

std::vector<cplx> GreenEvaluation::column(std::size_t b) const {
  const auto& v = spectrum_->eig.vectors;
  const std::size_t dim = weights_.size();
  std::vector<cplx> coeff(dim);
  auto rb = v.row(b);
  for (std::size_t k = 0; k < dim; ++k) coeff[k] = weights_[k] * std::conj(rb[k]);
  std::vector<cplx> col(dim);
  for (std::size_t a = 0; a < dim; ++a) {
    auto ra = v.row(a);
    cplx s = 0.0;
    for (std::size_t k = 0; k < dim; ++k) s += ra[k] * coeff[k];
    col[a] = s;
  }
  return col;
}

GreenEvaluation green_entries(std::shared_ptr<const HermitianSpectrum> spectrum, cplx z,
                              const GreenRequest& request) {
  GreenEvaluation g(std::move(spectrum), z);
  const std::size_t n = g.n();
  const std::size_t dim = 2 * n;
  for (const auto& [a, b] : request.entries) {
    if (a >= dim || b >= dim) throw DomainError("green_entries: index out of range");
    g.entries.push_back({{a, b}, g.entry(a, b)});
  }
  const bool imaginary_axis = z.real() == 0.0;
  for (std::size_t b : request.ward_columns) {
    if (b >= dim) throw DomainError("green_entries: column out of range");
    const auto col = g.column(b);
    double sum = 0.0;
    for (const cplx& c : col) sum += std::norm(c);
    const double ward = std::abs(sum - col[b].imag() / z.imag());
    g.ward_residual_max = std::max(g.ward_residual_max, ward);
    if (!imaginary_axis) continue;
    // Row b against column b: same-block pairs are skew-Hermitian, cross-block
    // pairs Hermitian.
    for (std::size_t a = 0; a < dim; ++a) {
      const cplx gba = g.entry(b, a);
      const bool same_block = (a < n) == (b < n);
      const cplx defect = same_block ? col[a] + std::conj(gba) : col[a] - std::conj(gba);
      g.symmetry_defect = std::max(g.symmetry_defect, std::abs(defect));
    }
  }
  return g;
}

GreenEvaluation green_entries(const model::MatrixSample& x, cplx w, cplx z,
                              const GreenRequest& request, const SpectralConfig& cfg) {
  return green_entries(hermitian_spectrum(x, w, cfg), z, request);
}

ComplexMatrix resolvent_direct(const model::MatrixSample& x, cplx w, cplx z,
                               const SpectralConfig& cfg) {
  ComplexMatrix h = hermitize(x, w).to_dense(cfg.dense_cap);
  for (std::size_t i = 0; i < h.rows(); ++i) h(i, i) -= z;
  return linalg::inverse(h);
}

namespace {

// tr(Y^* (Y Y^* + eta^2)^{-1}) / N.
template <typename T>
cplx block_offdiag(const Matrix<T>& y, double eta) {
  const std::size_t n = y.rows();
  Matrix<T> gram = multiply(y, adjoint(y));
  for (std::size_t i = 0; i < n; ++i) gram(i, i) += eta * eta;
  const Matrix<T> k = linalg::hpd_inverse(gram);
  cplx s = 0.0;
  for (std::size_t j = 0; j < n; ++j) {
    auto yj = y.row(j);
    auto kj = k.row(j);
    T acc{};
    for (std::size_t i = 0; i < n; ++i) acc += conj_of(yj[i]) * kj[i];
    s += acc;
  }
  return s / static_cast<double>(n);
}

}  // namespace

cplx offdiag_trace_block(const model::MatrixSample& x, cplx w, double eta) {
  if (!(eta > 0.0)) throw DomainError("offdiag_trace: eta must be positive");
  const RealMatrix dense = x.to_dense();
  const std::size_t n = dense.rows();
  if (w.imag() == 0.0) {
    RealMatrix y = dense;
    for (std::size_t i = 0; i < n; ++i) y(i, i) -= w.real();
    return block_offdiag(y, eta);
  }
  ComplexMatrix y = to_complex(dense);
  for (std::size_t i = 0; i < n; ++i) y(i, i) -= w;
  return block_offdiag(y, eta);
}

OffdiagDeviation offdiag_trace_test(const model::MatrixSample& a, cplx w, double eta,
                                    double delta, const SpectralConfig& cfg, OffdiagPath path) {
  const double n = static_cast<double>(a.n());
  const double kappa_max = std::pow(n, -0.5 + delta);
  const double eta_lo = std::pow(n, -1.0 + delta);
  const double eta_hi = std::pow(n, -0.75 + delta);
  if (std::abs(std::abs(w) - 1.0) > kappa_max || eta < eta_lo || eta > eta_hi)
    throw DomainError("offdiag_trace_test: point outside S_delta");
  OffdiagDeviation out;
  const cplx z{0.0, eta};
  switch (path) {
    case OffdiagPath::spectral:
      out.offdiag_trace = green_entries(a, w, z, {}, cfg).offdiag_trace;
      break;
    case OffdiagPath::direct: {
      const ComplexMatrix g = resolvent_direct(a, w, z, cfg);
      cplx s = 0.0;
      for (std::size_t i = 0; i < a.n(); ++i) s += g(i + a.n(), i);
      out.offdiag_trace = s / n;
      break;
    }
    case OffdiagPath::block:
      out.offdiag_trace = offdiag_trace_block(a, w, eta);
      break;
  }
  out.m = theory::solve_m({w, eta}).m;
  out.deviation = out.offdiag_trace + (1.0 + out.m * out.m) / w;
  out.envelope = 1.0 / (n * n * eta * eta) + std::pow(eta, -2.0 / 3.0) / n;
  return out;
}

// ---------------------------------------------------------------------------
// Nonsymmetric spectra

linalg::NonsymEig dense_nonsym_eig(const RealMatrix& x, bool want_vectors,
                                   const SpectralConfig& cfg) {
  check_cap(x.rows(), cfg.dense_cap, "dense_nonsym_eig");
  if (cfg.backend == Backend::accelerated) {
    require_accelerated();
    return accel::nonsym_eig(x, want_vectors);
  }
  return linalg::dense_nonsym_eig(x, want_vectors);
}

linalg::NonsymEig dense_nonsym_eig(const model::MatrixSample& x, bool want_vectors,
                                   const SpectralConfig& cfg) {
  check_cap(x.n(), cfg.dense_cap, "dense_nonsym_eig");
  return dense_nonsym_eig(x.to_dense(), want_vectors, cfg);
}

namespace {

using Vec = std::vector<cplx>;

cplx dot(const Vec& a, const Vec& b) {  // a^H b
  cplx s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += std::conj(a[i]) * b[i];
  return s;
}

double norm2(const Vec& a) {
  double s = 0.0;
  for (const cplx& v : a) s += std::norm(v);
  return std::sqrt(s);
}

// Orthogonalizes r against basis[0..count) with one reorthogonalization pass,
// accumulating the coefficients into h.
void orthogonalize(const std::vector<Vec>& basis, std::size_t count, Vec& r, std::vector<cplx>& h) {
  h.assign(count, cplx{});
  for (int pass = 0; pass < 2; ++pass) {
    for (std::size_t i = 0; i < count; ++i) {
      const cplx c = dot(basis[i], r);
      h[i] += c;
      for (std::size_t t = 0; t < r.size(); ++t) r[t] -= c * basis[i][t];
    }
  }
}

Vec random_unit(std::size_t n, Rng& rng) {
  Vec v(n);
  for (auto& x : v) x = rng.normal();
  const double s = norm2(v);
  for (auto& x : v) x /= s;
  return v;
}

}  // namespace

TopSpectrum arnoldi_topk(const model::MatrixSample& x, std::size_t k, double tol,
                         const ArnoldiOptions& options) {
  const std::size_t n = x.n();
  if (k == 0 || k >= n) throw DomainError("arnoldi_topk: need 0 < k < N");
  if (!(tol > 0.0)) throw DomainError("arnoldi_topk: tolerance must be positive");
  std::size_t m = options.krylov_dim ? options.krylov_dim : std::max<std::size_t>(2 * k + 20, 40);
  m = std::min(m, n);
  if (m <= k) throw DomainError("arnoldi_topk: Krylov dimension must exceed k");
  const std::size_t keep = std::min(m - 1, std::max(k + 1, m / 2));

  Rng rng(options.seed);
  std::vector<Vec> v(m + 1);
  ComplexMatrix h(m + 1, m);
  v[0] = random_unit(n, rng);
  std::vector<cplx> coeff;
  double beta = 0.0;

  auto extend = [&](std::size_t from) {
    for (std::size_t j = from; j < m; ++j) {
      Vec r(n);
      x.apply<cplx>(v[j], r);
      const double scale = norm2(r);
      orthogonalize(v, j + 1, r, coeff);
      for (std::size_t i = 0; i <= j; ++i) h(i, j) = coeff[i];
      beta = norm2(r);
      if (beta <= 1e-12 * std::max(scale, 1e-300)) {
        // Invariant subspace: continue with a fresh direction and a zero link.
        r = random_unit(n, rng);
        orthogonalize(v, j + 1, r, coeff);
        const double s = norm2(r);
        for (auto& t : r) t /= s;
        h(j + 1, j) = 0.0;
        beta = 0.0;
      } else {
        for (auto& t : r) t /= beta;
        h(j + 1, j) = beta;
      }
      v[j + 1] = std::move(r);
    }
  };

  extend(0);
  for (int restart = 0; restart <= options.max_restarts; ++restart) {
    ComplexMatrix hm(m, m);
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < m; ++j) hm(i, j) = h(i, j);
    const auto schur = linalg::complex_schur(hm, true);
    const ComplexMatrix y = multiply(schur.z, linalg::triangular_eigenvectors(schur.t));
    std::vector<std::size_t> order(m);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      return std::abs(schur.t(a, a)) > std::abs(schur.t(b, b));
    });
    const cplx link = h(m, m - 1);
    bool converged = true;
    for (std::size_t i = 0; i < k; ++i)
      if (std::abs(link) * std::abs(y(m - 1, order[i])) > tol) converged = false;

    if (converged) {
      TopSpectrum out;
      out.method = TopMethod::arnoldi;
      out.restarts = restart;
      for (std::size_t i = 0; i < k; ++i) {
        const std::size_t c = order[i];
        const cplx theta = schur.t(c, c);
        Vec u(n, cplx{});
        for (std::size_t j = 0; j < m; ++j)
          for (std::size_t t = 0; t < n; ++t) u[t] += y(j, c) * v[j][t];
        const double un = norm2(u);
        for (auto& t : u) t /= un;
        Vec au(n);
        x.apply<cplx>(u, au);
        for (std::size_t t = 0; t < n; ++t) au[t] -= theta * u[t];
        out.eigenvalues.push_back(theta);
        out.residual_norms.push_back(norm2(au));
      }
      return out;
    }
    if (restart == options.max_restarts) break;

    // Implicit restart: one single-shift QR sweep per unwanted Ritz value.
    ComplexMatrix q = ComplexMatrix::identity(m);
    for (std::size_t s = keep; s < m; ++s) {
      const cplx mu = schur.t(order[s], order[s]);
      for (std::size_t j = 0; j + 1 < m; ++j) {
        const cplx a = j == 0 ? hm(0, 0) - mu : hm(j, j - 1);
        const cplx b = j == 0 ? hm(1, 0) : hm(j + 1, j - 1);
        const double r = std::hypot(std::abs(a), std::abs(b));
        if (r == 0.0) continue;
        const cplx c = a / r;  // G = [[conj c, conj s], [-s, c]]
        const cplx sn = b / r;
        for (std::size_t col = 0; col < m; ++col) {
          const cplx top = hm(j, col), bot = hm(j + 1, col);
          hm(j, col) = std::conj(c) * top + std::conj(sn) * bot;
          hm(j + 1, col) = -sn * top + c * bot;
        }
        for (std::size_t row = 0; row < m; ++row) {
          const cplx left = hm(row, j), right = hm(row, j + 1);
          hm(row, j) = left * c + right * sn;
          hm(row, j + 1) = -left * std::conj(sn) + right * std::conj(c);
          const cplx ql = q(row, j), qr = q(row, j + 1);
          q(row, j) = ql * c + qr * sn;
          q(row, j + 1) = -ql * std::conj(sn) + qr * std::conj(c);
        }
        if (j > 0) hm(j + 1, j - 1) = 0.0;
      }
    }
    // Residual of the compressed factorization.
    Vec f(n, cplx{});
    const cplx tail = link * q(m - 1, keep - 1);
    for (std::size_t t = 0; t < n; ++t) f[t] = tail * v[m][t];
    const cplx sub = hm(keep, keep - 1);
    std::vector<Vec> nv(keep + 1, Vec(n, cplx{}));
    for (std::size_t i = 0; i <= keep; ++i)
      for (std::size_t j = 0; j < m; ++j) {
        const cplx qji = q(j, i);
        if (qji == cplx{}) continue;
        for (std::size_t t = 0; t < n; ++t) nv[i][t] += qji * v[j][t];
      }
    for (std::size_t t = 0; t < n; ++t) f[t] += sub * nv[keep][t];
    nv.pop_back();
    for (std::size_t i = 0; i < keep; ++i) v[i] = std::move(nv[i]);
    h = ComplexMatrix(m + 1, m);
    for (std::size_t i = 0; i < keep; ++i)
      for (std::size_t j = 0; j < keep; ++j) h(i, j) = hm(i, j);
    orthogonalize(v, keep, f, coeff);
    for (std::size_t i = 0; i < keep; ++i) h(i, keep - 1) += coeff[i];
    const double fn = norm2(f);
    if (fn <= 1e-14) {
      f = random_unit(n, rng);
      orthogonalize(v, keep, f, coeff);
      const double s = norm2(f);
      for (auto& t : f) t /= s;
      h(keep, keep - 1) = 0.0;
    } else {
      for (auto& t : f) t /= fn;
      h(keep, keep - 1) = fn;
    }
    v[keep] = std::move(f);
    extend(keep);
  }
  throw NumericalError("arnoldi_topk: no convergence after " +
                       std::to_string(options.max_restarts) + " restarts");
}

std::vector<cplx> edge_spectrum(const model::MatrixSample& x, const SpectralConfig& cfg,
                                std::size_t k_fallback) {
  std::vector<cplx> values;
  if (x.n() <= cfg.dense_cap) {
    values = dense_nonsym_eig(x, false, cfg).values;
  } else {
    ArnoldiOptions options;
    options.seed = x.params() ? x.params()->seed() : 0x5eed;
    values = arnoldi_topk(x, k_fallback, 1e-8, options).eigenvalues;
  }
  std::stable_sort(values.begin(), values.end(),
                   [](cplx a, cplx b) { return std::abs(a) > std::abs(b); });
  return values;
}

}  // namespace rmtlab::spectral
