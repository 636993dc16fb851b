#include "backend.hpp"

namespace rmtlab::spectral::accel {

namespace {

[[noreturn]] void unavailable() {
  throw NumericalError("accelerated backend not built");
}

}  // namespace

bool available() { return false; }
const char* name() { return "none"; }

linalg::SymEig<double> sym_eig(const RealMatrix&, bool) { unavailable(); }
linalg::SymEig<cplx> sym_eig(const ComplexMatrix&, bool) { unavailable(); }
std::vector<double> singular_values(const RealMatrix&) { unavailable(); }
std::vector<double> singular_values(const ComplexMatrix&) { unavailable(); }
linalg::NonsymEig nonsym_eig(const RealMatrix&, bool) { unavailable(); }

}  // namespace rmtlab::spectral::accel
