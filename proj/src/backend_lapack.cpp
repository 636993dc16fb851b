#include <lapacke.h>

#include <algorithm>
#include <string>

#include "backend.hpp"

namespace rmtlab::spectral::accel {

namespace {

void check(lapack_int info, const char* routine) {
  if (info != 0)
    throw NumericalError(std::string(routine) + " failed with info " + std::to_string(info));
}

}  // namespace

bool available() { return true; }
const char* name() { return "lapacke"; }

linalg::SymEig<double> sym_eig(const RealMatrix& a, bool want_vectors) {
  const lapack_int n = static_cast<lapack_int>(a.rows());
  RealMatrix work = a;
  linalg::SymEig<double> out;
  out.values.resize(n);
  check(LAPACKE_dsyevd(LAPACK_ROW_MAJOR, want_vectors ? 'V' : 'N', 'L', n, work.data(), n,
                       out.values.data()),
        "dsyevd");
  if (want_vectors) out.vectors = std::move(work);
  return out;
}

linalg::SymEig<cplx> sym_eig(const ComplexMatrix& a, bool want_vectors) {
  const lapack_int n = static_cast<lapack_int>(a.rows());
  ComplexMatrix work = a;
  linalg::SymEig<cplx> out;
  out.values.resize(n);
  check(LAPACKE_zheevd(LAPACK_ROW_MAJOR, want_vectors ? 'V' : 'N', 'L', n,
                       reinterpret_cast<lapack_complex_double*>(work.data()), n,
                       out.values.data()),
        "zheevd");
  if (want_vectors) out.vectors = std::move(work);
  return out;
}

std::vector<double> singular_values(const RealMatrix& a) {
  const lapack_int m = static_cast<lapack_int>(a.rows());
  const lapack_int n = static_cast<lapack_int>(a.cols());
  RealMatrix work = a;
  std::vector<double> s(std::min(m, n));
  double dummy = 0.0;
  check(LAPACKE_dgesdd(LAPACK_ROW_MAJOR, 'N', m, n, work.data(), n, s.data(), &dummy, m,
                       &dummy, n),
        "dgesdd");
  return s;
}

std::vector<double> singular_values(const ComplexMatrix& a) {
  const lapack_int m = static_cast<lapack_int>(a.rows());
  const lapack_int n = static_cast<lapack_int>(a.cols());
  ComplexMatrix work = a;
  std::vector<double> s(std::min(m, n));
  lapack_complex_double dummy{};
  check(LAPACKE_zgesdd(LAPACK_ROW_MAJOR, 'N', m, n,
                       reinterpret_cast<lapack_complex_double*>(work.data()), n, s.data(),
                       &dummy, m, &dummy, n),
        "zgesdd");
  return s;
}

linalg::NonsymEig nonsym_eig(const RealMatrix& a, bool want_vectors) {
  const lapack_int n = static_cast<lapack_int>(a.rows());
  RealMatrix work = a;
  std::vector<double> wr(n), wi(n);
  RealMatrix vr(want_vectors ? n : 1, want_vectors ? n : 1);
  double dummy = 0.0;
  check(LAPACKE_dgeev(LAPACK_ROW_MAJOR, 'N', want_vectors ? 'V' : 'N', n, work.data(), n,
                      wr.data(), wi.data(), &dummy, n, want_vectors ? vr.data() : &dummy, n),
        "dgeev");
  linalg::NonsymEig out;
  out.values.resize(n);
  for (lapack_int i = 0; i < n; ++i) out.values[i] = {wr[i], wi[i]};
  if (!want_vectors) return out;
  out.vectors = ComplexMatrix(n, n);
  out.defective.assign(n, false);
  for (lapack_int j = 0; j < n; ++j) {
    if (wi[j] == 0.0) {
      for (lapack_int i = 0; i < n; ++i) out.vectors(i, j) = vr(i, j);
    } else if (wi[j] > 0.0 && j + 1 < n) {
      for (lapack_int i = 0; i < n; ++i) {
        out.vectors(i, j) = {vr(i, j), vr(i, j + 1)};
        out.vectors(i, j + 1) = {vr(i, j), -vr(i, j + 1)};
      }
      ++j;
    }
  }
  return out;
}

}  // namespace rmtlab::spectral::accel
