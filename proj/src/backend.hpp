#pragma once

// Internal: LAPACK-backed kernels for the accelerated backend.

#include <vector>

#include "rmtlab/linalg.hpp"

namespace rmtlab::spectral::accel {

bool available();
const char* name();

linalg::SymEig<double> sym_eig(const RealMatrix& a, bool want_vectors);
linalg::SymEig<cplx> sym_eig(const ComplexMatrix& a, bool want_vectors);
std::vector<double> singular_values(const RealMatrix& a);
std::vector<double> singular_values(const ComplexMatrix& a);
linalg::NonsymEig nonsym_eig(const RealMatrix& a, bool want_vectors);

}  // namespace rmtlab::spectral::accel
