#pragma once

#include <cstddef>
#include <vector>

#include "rmtlab/errors.hpp"
#include "rmtlab/matrix.hpp"

// Self-contained dense eigen- and singular-value kernels. These are the
// reference implementations behind the spectral module.
namespace rmtlab::linalg {

template <typename T>
struct SymEig {
  std::vector<double> values;  // ascending
  Matrix<T> vectors;           // column k belongs to values[k]; empty if not requested
};

// Hermitian eigendecomposition: Householder tridiagonalization followed by
// implicit-shift QL. Throws DomainError if `a` is not Hermitian to
// 1e-12 * ||a||.
template <typename T>
SymEig<T> sym_eig(const Matrix<T>& a, bool want_vectors);

// Eigenvalues (ascending) of the real symmetric tridiagonal matrix with
// diagonal `diag` and sub-diagonal `off` (size n - 1).
std::vector<double> tridiagonal_eigenvalues(std::vector<double> diag,
                                            std::vector<double> off);

// Implicit QL on a symmetric tridiagonal matrix. `off` has size n with the
// last entry unused. When `zt` is given, its rows i and i + 1 receive every
// rotation applied to coordinates i and i + 1, so starting from the identity
// its rows end up as eigenvectors. Eigenvalues are left unsorted in `diag`.
void tridiagonal_ql(std::vector<double>& diag, std::vector<double>& off,
                    RealMatrix* zt);

// Singular values of a (rows >= cols), nonincreasing. Householder
// bidiagonalization, then the eigenvalues of the 2n x 2n Golub-Kahan
// tridiagonal form.
template <typename T>
std::vector<double> singular_values(const Matrix<T>& a);

struct NonsymEig {
  std::vector<cplx> values;
  // Right eigenvectors as columns (unit 2-norm). Empty unless requested.
  ComplexMatrix vectors;
  // Inverse iteration did not reach the residual tolerance for these columns.
  std::vector<bool> defective;
};

// Thrown when the shifted QR iteration stalls; keeps the partially reduced
// Hessenberg matrix and the index of the block that did not deflate.
class NonsymConvergenceError : public NumericalError {
 public:
  NonsymConvergenceError(const std::string& what, RealMatrix partial,
                         std::size_t active_end)
      : NumericalError(what), partial_(std::move(partial)), active_end_(active_end) {}
  const RealMatrix& partial_schur() const { return partial_; }
  std::size_t active_end() const { return active_end_; }

 private:
  RealMatrix partial_;
  std::size_t active_end_;
};

// Real Hessenberg reduction + Francis double-shift QR. Eigenvectors, when
// requested, come from inverse iteration on the Hessenberg form.
NonsymEig dense_nonsym_eig(const RealMatrix& a, bool want_vectors);

struct ComplexSchur {
  ComplexMatrix t;  // upper triangular
  ComplexMatrix z;  // unitary, a = z t z^H; empty unless requested
};

// Complex Schur form by single-shift QR with Wilkinson shifts. Intended for
// small matrices (companion matrices, projected Krylov matrices).
ComplexSchur complex_schur(const ComplexMatrix& a, bool want_z);

std::vector<cplx> complex_eigenvalues(const ComplexMatrix& a);

// Right eigenvectors of an upper-triangular matrix by back substitution, as
// columns with unit norm.
ComplexMatrix triangular_eigenvectors(const ComplexMatrix& t);

template <typename T>
struct LuFactor {
  Matrix<T> lu;
  std::vector<std::size_t> pivot;
  bool singular = false;
};

template <typename T>
LuFactor<T> lu_factor(Matrix<T> a);

template <typename T>
std::vector<T> lu_solve(const LuFactor<T>& f, std::vector<T> b);

template <typename T>
Matrix<T> inverse(const Matrix<T>& a);

// Inverse of a Hermitian positive definite matrix through Cholesky.
template <typename T>
Matrix<T> hpd_inverse(const Matrix<T>& a);

}  // namespace rmtlab::linalg
