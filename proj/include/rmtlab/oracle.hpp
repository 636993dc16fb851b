#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "rmtlab/matrix.hpp"

// Small-N brute-force references and the self-checks built on them.
namespace rmtlab::oracle {

// Eigenvalues of a symmetric 3x3 matrix from the trigonometric solution of
// its characteristic cubic, ascending.
std::vector<double> sym3_eigenvalues(const RealMatrix& a);

// Monic characteristic polynomial c_0..c_n (c_n = 1), Faddeev-LeVerrier.
std::vector<double> charpoly(const RealMatrix& a);

// Roots of a monic polynomial by Durand-Kerner iteration.
std::vector<cplx> poly_roots(const std::vector<double>& c);

// Greedy matching distance between two multisets.
double multiset_distance(std::vector<cplx> a, std::vector<cplx> b);

struct Check {
  std::string name;
  double value = 0.0;
  double bound = 0.0;
  bool pass = false;
};

struct Report {
  std::string subcheck;
  std::vector<Check> checks;

  bool pass() const;
  void add(std::string name, double value, double bound);
};

// Resolvent identities on 20 random (X, w, eta) with N <= 256.
Report identities(std::uint64_t seed = 1);
// Cubic residual, sign, semicircle and the u-identity on a 10^4-point grid.
Report cubic();
// Arnoldi vs dense, spectral Green entries vs LU inverse, 3x3 sym_eig vs
// characteristic roots.
Report equivalence(std::uint64_t seed = 1);
// Girko vs direct on `samples` ER(64) matrices plus the Green's-identity
// calibration on single points.
Report girko(std::uint64_t seed = 1, std::size_t samples = 20);
// Rejection rate of two_sample_ks at level 0.05 under the null.
Report ks_level(std::uint64_t seed = 1);

const std::vector<std::string>& subchecks();
// Throws ConfigError for an unknown name.
Report run(std::string_view name, std::uint64_t seed = 1);

}  // namespace rmtlab::oracle
