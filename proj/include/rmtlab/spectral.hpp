#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <memory>
#include <span>
#include <string_view>
#include <utility>
#include <vector>

#include "rmtlab/linalg.hpp"
#include "rmtlab/matrix.hpp"
#include "rmtlab/model.hpp"
#include "rmtlab/theory.hpp"

namespace rmtlab::spectral {

enum class Backend { reference, accelerated };

std::string_view to_string(Backend backend);
Backend parse_backend(std::string_view name);
// True when the LAPACK-backed kernels were compiled in.
bool accelerated_available();
// Identifier recorded in output metadata, e.g. "reference" or
// "accelerated:lapacke".
std::string backend_id(Backend backend);

struct SpectralConfig {
  // Largest dimension of a dense problem (for a Hermitization that is 2N).
  std::size_t dense_cap = 4096;
  Backend backend = Backend::reference;
};

// Shifted Hermitization [[0, X - w], [(X - w)^*, 0]] of a sampled matrix.
// Holds a reference to the sample, which must outlive it. `perturbed()` is
// true when the base still carries its mean f e e^T (A rather than B).
class Hermitization {
 public:
  Hermitization(const model::MatrixSample& base, cplx w) : base_(&base), w_(w) {}

  std::size_t dim() const { return 2 * base_->n(); }
  std::size_t n() const { return base_->n(); }
  cplx shift() const { return w_; }
  const model::MatrixSample& base() const { return *base_; }
  bool perturbed() const;

  // y = H x in O(nnz + N).
  void apply(std::span<const cplx> x, std::span<cplx> y) const;
  ComplexMatrix to_dense(std::size_t cap = 4096) const;
  // Real form, valid only for a real shift.
  RealMatrix to_dense_real(std::size_t cap = 4096) const;

 private:
  const model::MatrixSample* base_;
  cplx w_;
};

Hermitization hermitize(const model::MatrixSample& x, cplx w);

// Dense kernels routed through the selected backend, with the dense cap
// enforced.
template <typename T>
linalg::SymEig<T> sym_eig(const Matrix<T>& a, bool want_vectors,
                          const SpectralConfig& cfg = {});

enum class SvdMethod { golub_kahan, hermitization };

// Singular values of X - w I, nonincreasing. A real shift keeps the
// computation in real arithmetic.
std::vector<double> singular_values(const model::MatrixSample& x, cplx w,
                                    const SpectralConfig& cfg = {},
                                    SvdMethod method = SvdMethod::golub_kahan);
std::vector<double> singular_values(const RealMatrix& x, cplx w,
                                    const SpectralConfig& cfg = {},
                                    SvdMethod method = SvdMethod::golub_kahan);

// (2N)^{-1} tr G(i eta) = (i eta / N) sum_j 1 / (sigma_j^2 + eta^2).
cplx trace_green_from_sigma(std::span<const double> sigma, double eta);
cplx trace_green(const model::MatrixSample& x, cplx w, double eta,
                 const SpectralConfig& cfg = {});

// Full eigendecomposition of a dense Hermitization, shared between all the
// spectral parameters at which Green function entries are requested.
struct HermitianSpectrum {
  std::size_t n = 0;  // half dimension
  cplx w;
  linalg::SymEig<cplx> eig;
  // Per eigenvector k: sum_{i<N} |v_k(i)|^2 and sum_i v_k(i+N) conj(v_k(i)).
  std::vector<double> upper_weight;
  std::vector<cplx> offdiag_weight;
};

std::shared_ptr<const HermitianSpectrum> hermitian_spectrum(
    const model::MatrixSample& x, cplx w, const SpectralConfig& cfg = {});

// Resolvent summaries at one spectral parameter, from the spectral expansion
// G = sum_k v_k v_k^* / (lambda_k - z).
class GreenEvaluation {
 public:
  GreenEvaluation(std::shared_ptr<const HermitianSpectrum> spectrum, cplx z);

  cplx z() const { return z_; }
  std::size_t n() const { return spectrum_->n; }
  cplx entry(std::size_t a, std::size_t b) const;
  // Column b of G.
  std::vector<cplx> column(std::size_t b) const;

  cplx gtilde;             // (2N)^{-1} tr G
  cplx offdiag_trace;      // N^{-1} sum_i G_{i+N, i}
  double ward_residual_max = 0.0;
  double blocktrace_residual = 0.0;
  double symmetry_defect = 0.0;  // only meaningful at z = i eta
  std::vector<std::pair<std::pair<std::size_t, std::size_t>, cplx>> entries;

 private:
  std::shared_ptr<const HermitianSpectrum> spectrum_;
  cplx z_;
  std::vector<cplx> weights_;  // 1 / (lambda_k - z)
};

struct GreenRequest {
  std::vector<std::pair<std::size_t, std::size_t>> entries;
  // Columns on which the Ward identity and the symmetry relations are checked.
  std::vector<std::size_t> ward_columns;
};

GreenEvaluation green_entries(const model::MatrixSample& x, cplx w, cplx z,
                              const GreenRequest& request,
                              const SpectralConfig& cfg = {});
GreenEvaluation green_entries(std::shared_ptr<const HermitianSpectrum> spectrum,
                              cplx z, const GreenRequest& request);

// G = (H - z)^{-1} by LU on the dense 2N x 2N matrix.
ComplexMatrix resolvent_direct(const model::MatrixSample& x, cplx w, cplx z,
                               const SpectralConfig& cfg = {});

// N^{-1} sum_i G_{i+N, i} at z = i eta through the block identity
// G_{21} = Y^* (Y Y^* + eta^2)^{-1}, Y = X - w; O(N^3) without forming the
// 2N x 2N matrix.
cplx offdiag_trace_block(const model::MatrixSample& x, cplx w, double eta);

enum class OffdiagPath { spectral, direct, block };

struct OffdiagDeviation {
  cplx deviation;      // N^{-1} sum_i G_{i+N,i} + (1 + m^2) / w
  cplx offdiag_trace;
  cplx m;
  double envelope;     // N^{-2} eta^{-2} + N^{-1} eta^{-2/3}
};

// Deviation of the off-diagonal partial trace from -(1 + m^2) / w. The point
// must lie in S_delta (both edge domains).
OffdiagDeviation offdiag_trace_test(const model::MatrixSample& a, cplx w, double eta,
                                    double delta, const SpectralConfig& cfg = {},
                                    OffdiagPath path = OffdiagPath::block);

linalg::NonsymEig dense_nonsym_eig(const RealMatrix& x, bool want_vectors,
                                   const SpectralConfig& cfg = {});
linalg::NonsymEig dense_nonsym_eig(const model::MatrixSample& x, bool want_vectors,
                                   const SpectralConfig& cfg = {});

enum class TopMethod { dense_oracle, arnoldi };

struct TopSpectrum {
  std::vector<cplx> eigenvalues;     // descending modulus
  std::vector<double> residual_norms;
  TopMethod method = TopMethod::arnoldi;
  int restarts = 0;
};

struct ArnoldiOptions {
  std::size_t krylov_dim = 0;  // 0: chosen from k
  int max_restarts = 500;
  std::uint64_t seed = 0x5eed;
};

// k largest-modulus eigenvalues by implicitly restarted Arnoldi with exact
// shifts, using only products with the (sparse) operator.
TopSpectrum arnoldi_topk(const model::MatrixSample& x, std::size_t k, double tol,
                         const ArnoldiOptions& options = {});

// Spectrum used for edge observables: the full dense spectrum when N fits the
// dense cap, otherwise the top `k_fallback` eigenvalues from Arnoldi.
std::vector<cplx> edge_spectrum(const model::MatrixSample& x,
                                const SpectralConfig& cfg = {},
                                std::size_t k_fallback = 8);

}  // namespace rmtlab::spectral
