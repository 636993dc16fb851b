#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "rmtlab/errors.hpp"
#include "rmtlab/matrix.hpp"
#include "rmtlab/rng.hpp"

namespace rmtlab::model {

// Dimension, edge probability and the derived scales of a sparse digraph
// ensemble. q = sqrt(N p (1-p)) is the normalization, f = N p / q the size of
// the mean, xi = log_N(2q) the sparsity exponent.
class EnsembleParams {
 public:
  EnsembleParams(std::size_t n, double p, std::uint64_t seed,
                 bool zero_diagonal = false);

  std::size_t n() const { return n_; }
  double p() const { return p_; }
  std::uint64_t seed() const { return seed_; }
  bool zero_diagonal() const { return zero_diagonal_; }
  double q() const { return q_; }
  double xi() const { return xi_; }
  double f() const { return f_; }

  EnsembleParams with_seed(std::uint64_t seed) const {
    return EnsembleParams(n_, p_, seed, zero_diagonal_);
  }

 private:
  std::size_t n_;
  double p_;
  std::uint64_t seed_;
  bool zero_diagonal_;
  double q_;
  double xi_;
  double f_;
};

enum class MatrixKind { adjacency, centered, ginibre, flow, corner };

std::string_view to_string(MatrixKind kind);

// Row-compressed storage with sorted column indices.
struct CsrMatrix {
  std::size_t n = 0;
  std::vector<std::size_t> row_ptr;
  std::vector<std::uint32_t> col;
  std::vector<double> value;

  std::size_t nnz() const { return col.size(); }
};

// An immutable sampled matrix. Adjacency and centered kinds are sparse (the
// centered kind is the sparse adjacency minus a constant rank-one shift);
// Gaussian kinds are dense. `mean_shift` adds f e e^T on top of the stored
// matrix, with e the flat unit vector.
class MatrixSample {
 public:
  static MatrixSample from_dense(MatrixKind kind, RealMatrix dense,
                                 std::optional<EnsembleParams> params = {},
                                 std::optional<double> t = {});

  MatrixKind kind() const { return kind_; }
  std::size_t n() const { return n_; }
  std::optional<double> t() const { return t_; }
  const std::optional<EnsembleParams>& params() const { return params_; }

  bool is_sparse() const { return !csr_.row_ptr.empty(); }
  const CsrMatrix& csr() const { return csr_; }
  const RealMatrix& dense() const { return dense_; }
  // Constant subtracted from every entry of the sparse part.
  double entry_shift() const { return entry_shift_; }
  // Coefficient of the added f e e^T term.
  double mean_shift() const { return mean_shift_; }

  double entry(std::size_t i, std::size_t j) const;
  // Explicit densification; allocates once.
  RealMatrix to_dense() const;

  // y = X x and y = X^T x.
  template <typename T>
  void apply(std::span<const T> x, std::span<T> y) const;
  template <typename T>
  void apply_transpose(std::span<const T> x, std::span<T> y) const;

  MatrixSample with_mean_shift(double f) const;

 private:
  MatrixSample() = default;

  friend MatrixSample sample_er_from_bits(const EnsembleParams&,
                                          const std::vector<std::uint8_t>&);
  friend MatrixSample center(const MatrixSample&);

  MatrixKind kind_ = MatrixKind::adjacency;
  std::size_t n_ = 0;
  std::optional<double> t_;
  std::optional<EnsembleParams> params_;
  CsrMatrix csr_;
  double entry_shift_ = 0.0;
  double mean_shift_ = 0.0;
  RealMatrix dense_;
};

// Builds A from an explicit N*N mask of successes (row-major, nonzero means
// an edge). The diagonal is cleared when the params ask for it.
MatrixSample sample_er_from_bits(const EnsembleParams& params,
                                 const std::vector<std::uint8_t>& mask);

// A_ij = 1/q with probability p, independently. `uniform` must return draws
// on [0, 1); an entry succeeds when the draw is below p.
template <typename UniformSource>
MatrixSample sample_er(const EnsembleParams& params, UniformSource&& uniform) {
  const std::size_t n = params.n();
  std::vector<std::uint8_t> mask(n * n);
  for (auto& bit : mask) bit = uniform() < params.p() ? 1 : 0;
  return sample_er_from_bits(params, mask);
}

MatrixSample sample_er(const EnsembleParams& params);

// B = A - f e e^T; entries (1-p)/q on edges and -p/q elsewhere.
MatrixSample center(const MatrixSample& adjacency);

// i.i.d. N(0, 1/N) entries.
MatrixSample sample_ginibre(std::size_t n, std::uint64_t seed);

// e^{-t/2} B + sqrt(1 - e^{-t}) W for t in [0, inf].
MatrixSample flow(const MatrixSample& centered, const MatrixSample& ginibre,
                  double t);

// W + f e_1 e_1^T.
MatrixSample corner_perturb(const MatrixSample& ginibre, double f);

// Exact k-th cumulant of a centered entry B_ij = (Bernoulli(p) - p) / q.
double cumulant_entry(int k, const EnsembleParams& params);

// Cumulants kappa_1..kappa_k of Bernoulli(p), via kappa_{n+1} = p(1-p) d/dp
// kappa_n.
std::vector<double> bernoulli_cumulants(int k, double p);

}  // namespace rmtlab::model
