#include "rmtlab/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <span>

namespace rmtlab::linalg {
namespace {

constexpr double kEps = std::numeric_limits<double>::epsilon();

template <typename T>
struct Reflector {
  double beta = 0.0;  // H = I - beta v v^H
  T alpha{};          // H x = alpha e_1
};

// Overwrites x with the Householder vector v. H is Hermitian and unitary.
template <typename T>
Reflector<T> make_reflector(std::span<T> x) {
  double scale = 0.0;
  for (const T& xi : x) scale = std::max(scale, std::abs(xi));
  if (scale == 0.0) return {};
  // Work on x / scale; H = I - beta v v^H does not depend on the scale of v.
  double xnorm2 = 0.0;
  for (T& xi : x) {
    xi /= scale;
    xnorm2 += abs2(xi);
  }
  const double xnorm = std::sqrt(xnorm2);
  const double a0 = std::abs(x[0]);
  const T phase = a0 == 0.0 ? T{1} : x[0] / a0;
  Reflector<T> r;
  r.alpha = -phase * xnorm;
  x[0] -= r.alpha;
  r.alpha *= scale;
  // |v_0|^2 = (|x_0| + ||x||)^2
  const double v0 = a0 + xnorm;
  const double vnorm2 = xnorm2 - a0 * a0 + v0 * v0;
  r.beta = 2.0 / vnorm2;
  return r;
}

template <typename T>
void check_finite(const Matrix<T>& a) {
  for (const T& x : a.flat())
    if (!std::isfinite(std::abs(x))) throw DomainError("matrix has non-finite entries");
}

}  // namespace

void tridiagonal_ql(std::vector<double>& d, std::vector<double>& e,
                    RealMatrix* zt) {
  const long n = static_cast<long>(d.size());
  if (n == 0) return;
  e.resize(static_cast<std::size_t>(n), 0.0);
  e[static_cast<std::size_t>(n - 1)] = 0.0;
  double tnorm = 0.0;
  for (long i = 0; i < n; ++i) tnorm = std::max(tnorm, std::abs(d[i]) + std::abs(e[i]));
  const double abs_floor = kEps * tnorm;
  const std::size_t zcols = zt ? zt->cols() : 0;

  for (long l = 0; l < n; ++l) {
    int iter = 0;
    long m;
    do {
      for (m = l; m < n - 1; ++m) {
        const double dd = std::abs(d[m]) + std::abs(d[m + 1]);
        const double em = std::abs(e[m]);
        if (em <= kEps * dd || em <= abs_floor) break;
      }
      if (m != l) {
        if (iter++ == 60) throw NumericalError("tridiagonal QL did not converge");
        double g = (d[l + 1] - d[l]) / (2.0 * e[l]);
        double r = std::hypot(g, 1.0);
        g = d[m] - d[l] + e[l] / (g + std::copysign(r, g));
        double s = 1.0, c = 1.0, p = 0.0;
        bool underflow = false;
        for (long i = m - 1; i >= l; --i) {
          double f = s * e[i];
          const double b = c * e[i];
          r = std::hypot(f, g);
          e[i + 1] = r;
          if (r == 0.0) {
            d[i + 1] -= p;
            e[m] = 0.0;
            underflow = true;
            break;
          }
          s = f / r;
          c = g / r;
          g = d[i + 1] - p;
          r = (d[i] - g) * s + 2.0 * c * b;
          p = s * r;
          d[i + 1] = g + p;
          g = c * r - b;
          if (zt) {
            double* zi = zt->data() + static_cast<std::size_t>(i) * zcols;
            double* zi1 = zi + zcols;
            for (std::size_t k = 0; k < zcols; ++k) {
              f = zi1[k];
              zi1[k] = s * zi[k] + c * f;
              zi[k] = c * zi[k] - s * f;
            }
          }
        }
        if (underflow) continue;
        d[l] -= p;
        e[l] = g;
        e[m] = 0.0;
      }
    } while (m != l);
  }
}

std::vector<double> tridiagonal_eigenvalues(std::vector<double> diag,
                                            std::vector<double> off) {
  off.resize(diag.size(), 0.0);
  tridiagonal_ql(diag, off, nullptr);
  std::sort(diag.begin(), diag.end());
  return diag;
}

template <typename T>
SymEig<T> sym_eig(const Matrix<T>& input, bool want_vectors) {
  if (!input.square()) throw DomainError("sym_eig needs a square matrix");
  check_finite(input);
  const std::size_t n = input.rows();
  SymEig<T> out;
  if (n == 0) return out;

  const double scale = std::max(norm_inf(input), std::numeric_limits<double>::min());
  double asym = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i; j < n; ++j)
      asym = std::max(asym, std::abs(input(i, j) - conj_of(input(j, i))));
  if (asym > 1e-12 * scale) throw DomainError("sym_eig input is not Hermitian");

  Matrix<T> a = input;
  Matrix<T> vs(n, n);
  std::vector<double> betas(n, 0.0);
  std::vector<T> p(n), q(n), cq(n), cv(n);
  std::vector<double> d(n, 0.0);
  std::vector<T> e(n, T{});

  for (std::size_t k = 0; k + 2 < n; ++k) {
    const std::size_t m = n - k - 1;
    T* v = vs.data() + k * n + k + 1;
    for (std::size_t i = 0; i < m; ++i) v[i] = conj_of(a(k, k + 1 + i));
    const auto refl = make_reflector(std::span<T>(v, m));
    betas[k] = refl.beta;
    for (std::size_t i = k + 1; i < n; ++i) {
      a(i, k) = T{};
      a(k, i) = T{};
    }
    if (refl.beta == 0.0) {
      // column already reduced
      a(k + 1, k) = T{};
      continue;
    }
    a(k + 1, k) = refl.alpha;
    a(k, k + 1) = conj_of(refl.alpha);
    const double beta = refl.beta;
    for (std::size_t i = 0; i < m; ++i) {
      const T* row = a.data() + (k + 1 + i) * n + k + 1;
      T acc{};
      for (std::size_t j = 0; j < m; ++j) acc += row[j] * v[j];
      p[i] = beta * acc;
    }
    T vp{};
    for (std::size_t i = 0; i < m; ++i) vp += conj_of(v[i]) * p[i];
    const double kfac = 0.5 * beta * real_of(vp);
    for (std::size_t i = 0; i < m; ++i) {
      q[i] = p[i] - kfac * v[i];
      cq[i] = conj_of(q[i]);
      cv[i] = conj_of(v[i]);
    }
    for (std::size_t i = 0; i < m; ++i) {
      T* row = a.data() + (k + 1 + i) * n + k + 1;
      const T vi = v[i];
      const T qi = q[i];
      for (std::size_t j = 0; j < m; ++j) row[j] -= vi * cq[j] + qi * cv[j];
    }
  }
  for (std::size_t k = 0; k < n; ++k) d[k] = real_of(a(k, k));
  for (std::size_t k = 0; k + 1 < n; ++k) e[k] = a(k + 1, k);

  // Diagonal unitary similarity that makes the sub-diagonal real and
  // nonnegative: phase_{k+1} = phase_k e_k / |e_k|.
  std::vector<T> phase(n, T{1});
  std::vector<double> off(n, 0.0);
  for (std::size_t k = 0; k + 1 < n; ++k) {
    const double mag = std::abs(e[k]);
    off[k] = mag;
    phase[k + 1] = mag == 0.0 ? phase[k] : phase[k] * (e[k] / mag);
  }

  if (!want_vectors) {
    tridiagonal_ql(d, off, nullptr);
    std::sort(d.begin(), d.end());
    out.values = std::move(d);
    return out;
  }

  RealMatrix zt = RealMatrix::identity(n);
  tridiagonal_ql(d, off, &zt);
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t x, std::size_t y) { return d[x] < d[y]; });

  // Rows of y are eigenvectors; back-transform through the reflectors.
  Matrix<T> y(n, n);
  for (std::size_t r = 0; r < n; ++r) {
    const double* z = zt.data() + order[r] * n;
    T* yr = y.data() + r * n;
    for (std::size_t i = 0; i < n; ++i) yr[i] = phase[i] * z[i];
    for (std::size_t kk = n >= 3 ? n - 2 : 0; kk-- > 0;) {
      if (betas[kk] == 0.0) continue;
      const std::size_t m = n - kk - 1;
      const T* v = vs.data() + kk * n + kk + 1;
      T* seg = yr + kk + 1;
      T s{};
      for (std::size_t i = 0; i < m; ++i) s += conj_of(v[i]) * seg[i];
      s *= betas[kk];
      for (std::size_t i = 0; i < m; ++i) seg[i] -= s * v[i];
    }
  }
  out.values.resize(n);
  for (std::size_t r = 0; r < n; ++r) out.values[r] = d[order[r]];
  out.vectors = Matrix<T>(n, n);
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t i = 0; i < n; ++i) out.vectors(i, r) = y(r, i);
  return out;
}

template SymEig<double> sym_eig<double>(const RealMatrix&, bool);
template SymEig<cplx> sym_eig<cplx>(const ComplexMatrix&, bool);

template <typename T>
std::vector<double> singular_values(const Matrix<T>& input) {
  const std::size_t m = input.rows();
  const std::size_t n = input.cols();
  if (m < n) return singular_values(adjoint(input));
  check_finite(input);
  if (n == 0) return {};
  Matrix<T> a = input;
  std::vector<T> v(m), w(n), cv(n);
  std::vector<double> dmag(n, 0.0), emag(n, 0.0);

  for (std::size_t k = 0; k < n; ++k) {
    const std::size_t len = m - k;
    for (std::size_t i = 0; i < len; ++i) v[i] = a(k + i, k);
    const auto left = make_reflector(std::span<T>(v.data(), len));
    dmag[k] = std::abs(left.alpha);
    if (left.beta != 0.0 && k + 1 < n) {
      std::fill(w.begin() + static_cast<std::ptrdiff_t>(k + 1), w.end(), T{});
      T* wk = w.data() + k + 1;
      const std::size_t width = n - k - 1;
      for (std::size_t i = 0; i < len; ++i) {
        const T ci = conj_of(v[i]);
        const T* row = a.data() + (k + i) * n + k + 1;
        for (std::size_t j = 0; j < width; ++j) wk[j] += ci * row[j];
      }
      for (std::size_t i = 0; i < len; ++i) {
        const T bi = left.beta * v[i];
        T* row = a.data() + (k + i) * n + k + 1;
        for (std::size_t j = 0; j < width; ++j) row[j] -= bi * wk[j];
      }
    }
    if (k + 1 >= n) continue;
    const std::size_t rlen = n - k - 1;
    for (std::size_t j = 0; j < rlen; ++j) v[j] = conj_of(a(k, k + 1 + j));
    const auto right = make_reflector(std::span<T>(v.data(), rlen));
    emag[k] = std::abs(right.alpha);
    if (right.beta == 0.0) {
      emag[k] = 0.0;
      continue;
    }
    if (rlen == 1) continue;  // pure phase; magnitudes are unaffected
    for (std::size_t j = 0; j < rlen; ++j) cv[j] = conj_of(v[j]);
    for (std::size_t i = k + 1; i < m; ++i) {
      T* row = a.data() + i * n + k + 1;
      T dot{};
      for (std::size_t j = 0; j < rlen; ++j) dot += row[j] * v[j];
      dot *= right.beta;
      for (std::size_t j = 0; j < rlen; ++j) row[j] -= dot * cv[j];
    }
  }

  // Golub-Kahan form: zero diagonal, off-diagonal d0, e0, d1, e1, ..., d_{n-1}.
  std::vector<double> diag(2 * n, 0.0), off(2 * n, 0.0);
  for (std::size_t k = 0; k < n; ++k) {
    off[2 * k] = dmag[k];
    if (k + 1 < n) off[2 * k + 1] = emag[k];
  }
  tridiagonal_ql(diag, off, nullptr);
  std::sort(diag.begin(), diag.end(), std::greater<>());
  std::vector<double> sigma(diag.begin(), diag.begin() + static_cast<std::ptrdiff_t>(n));
  for (double& s : sigma) s = std::abs(s);
  std::sort(sigma.begin(), sigma.end(), std::greater<>());
  return sigma;
}

template std::vector<double> singular_values<double>(const RealMatrix&);
template std::vector<double> singular_values<cplx>(const ComplexMatrix&);

namespace {

// Francis double-shift QR on an upper Hessenberg matrix, eigenvalues only.
void hessenberg_qr(RealMatrix& a, std::vector<double>& wr, std::vector<double>& wi) {
  const long n = static_cast<long>(a.rows());
  constexpr int kMaxIts = 60;
  double anorm = 0.0;
  for (long i = 0; i < n; ++i)
    for (long j = std::max(i - 1, 0L); j < n; ++j) anorm += std::abs(a(i, j));
  long nn = n - 1;
  double t = 0.0;
  double p = 0, q = 0, r = 0, s = 0, w = 0, x = 0, y = 0, z = 0;
  while (nn >= 0) {
    int its = 0;
    long l;
    do {
      for (l = nn; l >= 1; --l) {
        s = std::abs(a(l - 1, l - 1)) + std::abs(a(l, l));
        if (s == 0.0) s = anorm;
        if (std::abs(a(l, l - 1)) + s == s) {
          a(l, l - 1) = 0.0;
          break;
        }
      }
      if (l < 0) l = 0;
      x = a(nn, nn);
      if (l == nn) {
        wr[nn] = x + t;
        wi[nn] = 0.0;
        --nn;
      } else {
        y = a(nn - 1, nn - 1);
        w = a(nn, nn - 1) * a(nn - 1, nn);
        if (l == nn - 1) {
          p = 0.5 * (y - x);
          q = p * p + w;
          z = std::sqrt(std::abs(q));
          x += t;
          if (q >= 0.0) {
            z = p + std::copysign(z, p);
            wr[nn - 1] = wr[nn] = x + z;
            if (z != 0.0) wr[nn] = x - w / z;
            wi[nn - 1] = wi[nn] = 0.0;
          } else {
            wr[nn - 1] = wr[nn] = x + p;
            wi[nn] = z;
            wi[nn - 1] = -z;
          }
          nn -= 2;
        } else {
          if (its == kMaxIts) {
            throw NonsymConvergenceError("Hessenberg QR did not converge", a,
                                         static_cast<std::size_t>(nn));
          }
          if (its > 0 && its % 10 == 0) {
            t += x;
            for (long i = 0; i <= nn; ++i) a(i, i) -= x;
            s = std::abs(a(nn, nn - 1)) + std::abs(a(nn - 1, nn - 2));
            y = x = 0.75 * s;
            w = -0.4375 * s * s;
          }
          ++its;
          long m;
          for (m = nn - 2; m >= l; --m) {
            z = a(m, m);
            r = x - z;
            s = y - z;
            p = (r * s - w) / a(m + 1, m) + a(m, m + 1);
            q = a(m + 1, m + 1) - z - r - s;
            r = a(m + 2, m + 1);
            s = std::abs(p) + std::abs(q) + std::abs(r);
            p /= s;
            q /= s;
            r /= s;
            if (m == l) break;
            const double u = std::abs(a(m, m - 1)) * (std::abs(q) + std::abs(r));
            const double v = std::abs(p) * (std::abs(a(m - 1, m - 1)) + std::abs(z) +
                                            std::abs(a(m + 1, m + 1)));
            if (u + v == v) break;
          }
          for (long i = m + 2; i <= nn; ++i) {
            a(i, i - 2) = 0.0;
            if (i != m + 2) a(i, i - 3) = 0.0;
          }
          for (long k = m; k <= nn - 1; ++k) {
            if (k != m) {
              p = a(k, k - 1);
              q = a(k + 1, k - 1);
              r = 0.0;
              if (k != nn - 1) r = a(k + 2, k - 1);
              x = std::abs(p) + std::abs(q) + std::abs(r);
              if (x != 0.0) {
                p /= x;
                q /= x;
                r /= x;
              }
            }
            s = std::copysign(std::sqrt(p * p + q * q + r * r), p);
            if (s != 0.0) {
              if (k == m) {
                if (l != m) a(k, k - 1) = -a(k, k - 1);
              } else {
                a(k, k - 1) = -s * x;
              }
              p += s;
              x = p / s;
              y = q / s;
              z = r / s;
              q /= p;
              r /= p;
              double* rk = &a(k, 0);
              double* rk1 = &a(k + 1, 0);
              if (k != nn - 1) {
                double* rk2 = &a(k + 2, 0);
                for (long j = k; j <= nn; ++j) {
                  const double pj = rk[j] + q * rk1[j] + r * rk2[j];
                  rk2[j] -= pj * z;
                  rk1[j] -= pj * y;
                  rk[j] -= pj * x;
                }
              } else {
                for (long j = k; j <= nn; ++j) {
                  const double pj = rk[j] + q * rk1[j];
                  rk1[j] -= pj * y;
                  rk[j] -= pj * x;
                }
              }
              const long mmin = nn < k + 3 ? nn : k + 3;
              for (long i = l; i <= mmin; ++i) {
                double pi = x * a(i, k) + y * a(i, k + 1);
                if (k != nn - 1) {
                  pi += z * a(i, k + 2);
                  a(i, k + 2) -= pi * r;
                }
                a(i, k + 1) -= pi * q;
                a(i, k) -= pi;
              }
            }
          }
        }
      }
    } while (l < nn - 1);
  }
}

// Solves (H - mu I) x = x_prev by Hessenberg LU with partial pivoting and
// returns the unit-norm result of a few inverse-iteration steps together with
// the final relative residual.
std::pair<std::vector<cplx>, double> hessenberg_inverse_iteration(
    const RealMatrix& h, double hnorm, cplx mu) {
  const std::size_t n = h.rows();
  const double eps3 = std::max(hnorm, 1e-300) * kEps;
  ComplexMatrix w(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t j0 = i == 0 ? 0 : i - 1;
    for (std::size_t j = j0; j < n; ++j) w(i, j) = h(i, j);
    w(i, i) -= mu;
  }
  std::vector<cplx> mult(n, 0.0);
  std::vector<char> swapped(n, 0);
  for (std::size_t k = 0; k + 1 < n; ++k) {
    if (std::abs(w(k + 1, k)) > std::abs(w(k, k))) {
      for (std::size_t j = k; j < n; ++j) std::swap(w(k, j), w(k + 1, j));
      swapped[k] = 1;
    }
    if (w(k, k) == 0.0) w(k, k) = eps3;
    const cplx l = w(k + 1, k) / w(k, k);
    mult[k] = l;
    if (l != 0.0) {
      cplx* rk = &w(k, 0);
      cplx* rk1 = &w(k + 1, 0);
      for (std::size_t j = k + 1; j < n; ++j) rk1[j] -= l * rk[j];
    }
  }
  if (w(n - 1, n - 1) == 0.0) w(n - 1, n - 1) = eps3;

  std::vector<cplx> x(n, 1.0), r(n);
  double rel = std::numeric_limits<double>::infinity();
  for (int it = 0; it < 4; ++it) {
    for (std::size_t k = 0; k + 1 < n; ++k) {
      if (swapped[k]) std::swap(x[k], x[k + 1]);
      x[k + 1] -= mult[k] * x[k];
    }
    for (std::size_t i = n; i-- > 0;) {
      cplx s = x[i];
      const cplx* ri = &w(i, 0);
      for (std::size_t j = i + 1; j < n; ++j) s -= ri[j] * x[j];
      cplx piv = ri[i];
      if (std::abs(piv) < eps3) piv = eps3;
      x[i] = s / piv;
    }
    double nrm = 0.0;
    for (const cplx& v : x) nrm += std::norm(v);
    nrm = std::sqrt(nrm);
    if (!(nrm > 0.0) || !std::isfinite(nrm)) break;
    for (cplx& v : x) v /= nrm;
    double res = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      cplx s = -mu * x[i];
      const double* hi = &h(i, 0);
      for (std::size_t j = i == 0 ? 0 : i - 1; j < n; ++j) s += hi[j] * x[j];
      res += std::norm(s);
    }
    rel = std::sqrt(res) / std::max(hnorm, 1e-300);
    if (rel <= 1e-11) break;
  }
  return {std::move(x), rel};
}

}  // namespace

NonsymEig dense_nonsym_eig(const RealMatrix& input, bool want_vectors) {
  if (!input.square()) throw DomainError("dense_nonsym_eig needs a square matrix");
  check_finite(input);
  const std::size_t n = input.rows();
  NonsymEig out;
  if (n == 0) return out;

  RealMatrix h = input;
  RealMatrix vs(n, n);
  std::vector<double> betas(n, 0.0), v(n), w(n);
  for (std::size_t k = 0; k + 2 < n; ++k) {
    const std::size_t len = n - k - 1;
    double* vk = vs.data() + k * n + k + 1;
    for (std::size_t i = 0; i < len; ++i) vk[i] = h(k + 1 + i, k);
    const auto refl = make_reflector(std::span<double>(vk, len));
    betas[k] = refl.beta;
    if (refl.beta == 0.0) continue;
    h(k + 1, k) = refl.alpha;
    for (std::size_t i = k + 2; i < n; ++i) h(i, k) = 0.0;
    const double beta = refl.beta;
    // Left: rows k+1.., columns k+1..
    std::fill(w.begin(), w.end(), 0.0);
    for (std::size_t i = 0; i < len; ++i) {
      const double vi = vk[i];
      const double* row = h.data() + (k + 1 + i) * n;
      for (std::size_t j = k + 1; j < n; ++j) w[j] += vi * row[j];
    }
    for (std::size_t i = 0; i < len; ++i) {
      const double bi = beta * vk[i];
      double* row = h.data() + (k + 1 + i) * n;
      for (std::size_t j = k + 1; j < n; ++j) row[j] -= bi * w[j];
    }
    // Right: all rows, columns k+1..
    for (std::size_t i = 0; i < n; ++i) {
      double* row = h.data() + i * n + k + 1;
      double dot = 0.0;
      for (std::size_t j = 0; j < len; ++j) dot += row[j] * vk[j];
      dot *= beta;
      for (std::size_t j = 0; j < len; ++j) row[j] -= dot * vk[j];
    }
  }

  RealMatrix hs;
  if (want_vectors) hs = h;
  std::vector<double> wr(n), wi(n);
  hessenberg_qr(h, wr, wi);
  out.values.resize(n);
  for (std::size_t i = 0; i < n; ++i) out.values[i] = {wr[i], wi[i]};
  if (!want_vectors) return out;

  double hnorm = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double s = 0.0;
    for (std::size_t j = i == 0 ? 0 : i - 1; j < n; ++j) s += std::abs(hs(i, j));
    hnorm = std::max(hnorm, s);
  }
  out.vectors = ComplexMatrix(n, n);
  out.defective.assign(n, false);
  // Columns are filled through rows of a transposed buffer.
  ComplexMatrix rows(n, n);
  std::vector<char> done(n, 0);
  for (std::size_t idx = 0; idx < n; ++idx) {
    if (done[idx]) continue;
    const cplx lambda = out.values[idx];
    auto [y, rel] = hessenberg_inverse_iteration(hs, hnorm, lambda);
    for (std::size_t kk = n >= 3 ? n - 2 : 0; kk-- > 0;) {
      if (betas[kk] == 0.0) continue;
      const std::size_t len = n - kk - 1;
      const double* vk = vs.data() + kk * n + kk + 1;
      cplx* seg = y.data() + kk + 1;
      cplx s = 0.0;
      for (std::size_t i = 0; i < len; ++i) s += vk[i] * seg[i];
      s *= betas[kk];
      for (std::size_t i = 0; i < len; ++i) seg[i] -= s * vk[i];
    }
    std::copy(y.begin(), y.end(), rows.data() + idx * n);
    out.defective[idx] = rel > 1e-8;
    done[idx] = 1;
    if (lambda.imag() != 0.0) {
      // conjugate partner
      for (std::size_t j = idx + 1; j < n; ++j) {
        if (!done[j] && out.values[j] == std::conj(lambda)) {
          for (std::size_t i = 0; i < n; ++i) rows(j, i) = std::conj(y[i]);
          out.defective[j] = out.defective[idx];
          done[j] = 1;
          break;
        }
      }
    }
  }
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t i = 0; i < n; ++i) out.vectors(i, r) = rows(r, i);
  return out;
}

ComplexSchur complex_schur(const ComplexMatrix& a, bool want_z) {
  if (!a.square()) throw DomainError("complex_schur needs a square matrix");
  check_finite(a);
  const std::size_t n = a.rows();
  ComplexSchur out;
  out.t = a;
  ComplexMatrix& t = out.t;
  if (want_z) out.z = ComplexMatrix::identity(n);
  if (n <= 1) return out;

  std::vector<cplx> v(n), w(n);
  for (std::size_t k = 0; k + 2 < n; ++k) {
    const std::size_t len = n - k - 1;
    for (std::size_t i = 0; i < len; ++i) v[i] = t(k + 1 + i, k);
    const auto refl = make_reflector(std::span<cplx>(v.data(), len));
    if (refl.beta == 0.0) continue;
    // left on rows k+1.., all columns k..
    std::fill(w.begin(), w.end(), cplx{});
    for (std::size_t i = 0; i < len; ++i)
      for (std::size_t j = k; j < n; ++j) w[j] += std::conj(v[i]) * t(k + 1 + i, j);
    for (std::size_t i = 0; i < len; ++i)
      for (std::size_t j = k; j < n; ++j) t(k + 1 + i, j) -= refl.beta * v[i] * w[j];
    auto right = [&](ComplexMatrix& m) {
      for (std::size_t i = 0; i < m.rows(); ++i) {
        cplx dot{};
        for (std::size_t j = 0; j < len; ++j) dot += m(i, k + 1 + j) * v[j];
        dot *= refl.beta;
        for (std::size_t j = 0; j < len; ++j) m(i, k + 1 + j) -= dot * std::conj(v[j]);
      }
    };
    right(t);
    if (want_z) right(out.z);
    for (std::size_t i = k + 2; i < n; ++i) t(i, k) = 0.0;
  }

  const double tnorm = std::max(norm_inf(t), std::numeric_limits<double>::min());
  auto apply_rot = [&](std::size_t k, double c, cplx s) {
    // rows k, k+1 <- G [rows]; G = [[c, s], [-conj(s), c]]
    for (std::size_t j = 0; j < n; ++j) {
      const cplx x = t(k, j), y = t(k + 1, j);
      t(k, j) = c * x + s * y;
      t(k + 1, j) = -std::conj(s) * x + c * y;
    }
    auto cols = [&](ComplexMatrix& m) {
      for (std::size_t i = 0; i < m.rows(); ++i) {
        const cplx x = m(i, k), y = m(i, k + 1);
        m(i, k) = c * x + std::conj(s) * y;
        m(i, k + 1) = -s * x + c * y;
      }
    };
    cols(t);
    if (want_z) cols(out.z);
  };
  auto givens = [](cplx x, cplx y, double& c, cplx& s) {
    const double ax = std::abs(x), ay = std::abs(y);
    if (ay == 0.0) {
      c = 1.0;
      s = 0.0;
      return;
    }
    if (ax == 0.0) {
      c = 0.0;
      s = std::conj(y) / ay;
      return;
    }
    const double r = std::hypot(ax, ay);
    c = ax / r;
    s = (x / ax) * std::conj(y) / r;
  };

  std::size_t hi = n - 1;
  int iter = 0;
  int total = 0;
  while (hi > 0) {
    std::size_t l = hi;
    while (l > 0) {
      const double sub = std::abs(t(l, l - 1));
      const double dd = std::abs(t(l - 1, l - 1)) + std::abs(t(l, l));
      if (sub <= kEps * dd || sub <= kEps * tnorm) {
        t(l, l - 1) = 0.0;
        break;
      }
      --l;
    }
    if (l == hi) {
      --hi;
      iter = 0;
      continue;
    }
    if (++total > static_cast<int>(100 * n) + 100)
      throw NumericalError("complex Schur iteration did not converge");
    ++iter;
    cplx mu;
    if (iter % 11 == 0) {
      mu = t(hi, hi) + std::abs(t(hi, hi - 1)) * cplx(0.75, 0.4);
    } else {
      const cplx a11 = t(hi - 1, hi - 1), a12 = t(hi - 1, hi);
      const cplx a21 = t(hi, hi - 1), a22 = t(hi, hi);
      const cplx half = 0.5 * (a11 - a22);
      const cplx disc = std::sqrt(half * half + a12 * a21);
      const cplx m1 = 0.5 * (a11 + a22) + disc;
      const cplx m2 = 0.5 * (a11 + a22) - disc;
      mu = std::abs(m1 - a22) < std::abs(m2 - a22) ? m1 : m2;
    }
    cplx x = t(l, l) - mu;
    cplx y = t(l + 1, l);
    for (std::size_t k = l; k < hi; ++k) {
      if (k > l) {
        x = t(k, k - 1);
        y = t(k + 1, k - 1);
      }
      double c;
      cplx s;
      givens(x, y, c, s);
      apply_rot(k, c, s);
      if (k > l) t(k + 1, k - 1) = 0.0;
    }
  }
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < i; ++j) t(i, j) = 0.0;
  return out;
}

std::vector<cplx> complex_eigenvalues(const ComplexMatrix& a) {
  const auto schur = complex_schur(a, false);
  std::vector<cplx> out(a.rows());
  for (std::size_t i = 0; i < a.rows(); ++i) out[i] = schur.t(i, i);
  return out;
}

ComplexMatrix triangular_eigenvectors(const ComplexMatrix& t) {
  const std::size_t n = t.rows();
  const double small = std::max(norm_inf(t), 1e-300) * kEps;
  ComplexMatrix out(n, n);
  std::vector<cplx> x(n);
  for (std::size_t k = 0; k < n; ++k) {
    std::fill(x.begin(), x.end(), cplx{});
    x[k] = 1.0;
    for (std::size_t i = k; i-- > 0;) {
      cplx s{};
      for (std::size_t j = i + 1; j <= k; ++j) s += t(i, j) * x[j];
      cplx denom = t(i, i) - t(k, k);
      if (std::abs(denom) < small) denom = small;
      x[i] = -s / denom;
    }
    double nrm = 0.0;
    for (const cplx& v : x) nrm += std::norm(v);
    nrm = std::sqrt(nrm);
    for (std::size_t i = 0; i < n; ++i) out(i, k) = x[i] / nrm;
  }
  return out;
}

template <typename T>
LuFactor<T> lu_factor(Matrix<T> a) {
  if (!a.square()) throw DomainError("lu_factor needs a square matrix");
  const std::size_t n = a.rows();
  LuFactor<T> f;
  f.pivot.resize(n);
  for (std::size_t k = 0; k < n; ++k) {
    std::size_t piv = k;
    double best = std::abs(a(k, k));
    for (std::size_t i = k + 1; i < n; ++i) {
      if (std::abs(a(i, k)) > best) {
        best = std::abs(a(i, k));
        piv = i;
      }
    }
    f.pivot[k] = piv;
    if (piv != k) std::swap_ranges(a.row(k).begin(), a.row(k).end(), a.row(piv).begin());
    if (best == 0.0) {
      f.singular = true;
      continue;
    }
    const T inv = T{1} / a(k, k);
    T* rk = a.data() + k * n;
    for (std::size_t i = k + 1; i < n; ++i) {
      T* ri = a.data() + i * n;
      const T l = ri[k] * inv;
      ri[k] = l;
      if (l == T{}) continue;
      for (std::size_t j = k + 1; j < n; ++j) ri[j] -= l * rk[j];
    }
  }
  f.lu = std::move(a);
  return f;
}

template <typename T>
std::vector<T> lu_solve(const LuFactor<T>& f, std::vector<T> b) {
  if (f.singular) throw NumericalError("lu_solve on a singular factorization");
  const std::size_t n = f.lu.rows();
  for (std::size_t k = 0; k < n; ++k)
    if (f.pivot[k] != k) std::swap(b[k], b[f.pivot[k]]);
  for (std::size_t i = 0; i < n; ++i) {
    const T* ri = f.lu.data() + i * n;
    T s = b[i];
    for (std::size_t j = 0; j < i; ++j) s -= ri[j] * b[j];
    b[i] = s;
  }
  for (std::size_t i = n; i-- > 0;) {
    const T* ri = f.lu.data() + i * n;
    T s = b[i];
    for (std::size_t j = i + 1; j < n; ++j) s -= ri[j] * b[j];
    b[i] = s / ri[i];
  }
  return b;
}

template <typename T>
Matrix<T> inverse(const Matrix<T>& a) {
  const std::size_t n = a.rows();
  const auto f = lu_factor(a);
  if (f.singular) throw NumericalError("matrix is singular");
  // Solve against the identity column by column, writing rows of the
  // transpose for locality.
  Matrix<T> inv_t(n, n);
  std::vector<T> e(n);
  for (std::size_t c = 0; c < n; ++c) {
    std::fill(e.begin(), e.end(), T{});
    e[c] = T{1};
    auto x = lu_solve(f, e);
    std::copy(x.begin(), x.end(), inv_t.row(c).begin());
  }
  Matrix<T> out(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) out(i, j) = inv_t(j, i);
  return out;
}

template <typename T>
Matrix<T> hpd_inverse(const Matrix<T>& a) {
  if (!a.square()) throw DomainError("hpd_inverse needs a square matrix");
  const std::size_t n = a.rows();
  // Lower Cholesky factor, row-major.
  Matrix<T> l(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    T* li = l.data() + i * n;
    for (std::size_t j = 0; j <= i; ++j) {
      const T* lj = l.data() + j * n;
      T s = a(i, j);
      for (std::size_t k = 0; k < j; ++k) s -= li[k] * conj_of(lj[k]);
      if (i == j) {
        const double dii = real_of(s);
        if (!(dii > 0.0)) throw NumericalError("matrix is not positive definite");
        li[i] = std::sqrt(dii);
      } else {
        li[j] = s / lj[j];
      }
    }
  }
  // Inverse of L (lower triangular), by rows of L^{-1}.
  Matrix<T> linv(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    linv(i, i) = T{1} / l(i, i);
    for (std::size_t j = 0; j < i; ++j) {
      T s{};
      for (std::size_t k = j; k < i; ++k) s += l(i, k) * linv(k, j);
      linv(i, j) = -s / l(i, i);
    }
  }
  // A^{-1} = L^{-H} L^{-1}; entry (i, j) = sum_k conj(Linv(k, i)) Linv(k, j).
  Matrix<T> out(n, n);
  for (std::size_t k = 0; k < n; ++k) {
    const T* lk = linv.data() + k * n;
    for (std::size_t i = 0; i <= k; ++i) {
      const T ci = conj_of(lk[i]);
      if (ci == T{}) continue;
      T* oi = out.data() + i * n;
      for (std::size_t j = 0; j <= k; ++j) oi[j] += ci * lk[j];
    }
  }
  return out;
}

template LuFactor<double> lu_factor<double>(RealMatrix);
template LuFactor<cplx> lu_factor<cplx>(ComplexMatrix);
template std::vector<double> lu_solve<double>(const LuFactor<double>&, std::vector<double>);
template std::vector<cplx> lu_solve<cplx>(const LuFactor<cplx>&, std::vector<cplx>);
template RealMatrix inverse<double>(const RealMatrix&);
template ComplexMatrix inverse<cplx>(const ComplexMatrix&);
template RealMatrix hpd_inverse<double>(const RealMatrix&);
template ComplexMatrix hpd_inverse<cplx>(const ComplexMatrix&);

}  // namespace rmtlab::linalg
