#pragma once

#include <boost/multiprecision/cpp_int.hpp>
#include <boost/multiprecision/eigen.hpp>
#include <string>
#include <vector>

#include "tdsim/common.hpp"

namespace tdsim {

/// Exact integer scalar; Smith normal form intermediates can grow far past
/// 64 bits even for small inputs.
using BigInt = boost::multiprecision::cpp_int;
using IntMatrix = Eigen::Matrix<BigInt, Eigen::Dynamic, Eigen::Dynamic>;

/// Finitely generated abelian group: free rank plus invariant factors
/// t_1 | t_2 | ... (each > 1).
struct AbelianGroup {
  long betti = 0;
  std::vector<BigInt> torsion;

  bool operator==(const AbelianGroup&) const = default;
  /// "0", "Z", "Z^2 + Z/2", ... (optionally over Z/m instead of Z).
  std::string to_string(const std::string& ring = "Z") const;
};

/// Smith normal form D = U * M * V with U, V unimodular and the diagonal of
/// D nonnegative with d_i | d_{i+1}.
struct SmithResult {
  IntMatrix u;
  IntMatrix d;
  IntMatrix v;
  std::vector<BigInt> invariant_factors() const;
};

SmithResult smith_normal_form(const IntMatrix& m);

long rank_of(const IntMatrix& m);
BigInt determinant(const IntMatrix& m);

/// a * b. The free Eigen operator* trips over scalar promotion for the
/// big-integer scalar type, so products go through this helper.
IntMatrix int_product(const IntMatrix& a, const IntMatrix& b);

/// Boundary-matrix sequence d_1 .. d_N with d_n : C_n -> C_{n-1};
/// boundaries[n-1] has shape dims[n-1] x dims[n].
struct ChainComplex {
  std::vector<long> dims;
  std::vector<IntMatrix> boundaries;

  std::size_t top_dim() const { return dims.empty() ? 0 : dims.size() - 1; }
};

struct ComplexViolation {
  std::string message;
};

/// Shape compatibility plus d_n * d_{n+1} = 0 for every n. Returns the first
/// violation found, or nothing when the complex is valid.
std::vector<ComplexViolation> validate_complex(const ChainComplex& c);

/// JSON file {"dims": [...], "boundaries": [[row-major ints], ...]} where
/// boundaries[n-1] is d_n with shape dims[n-1] x dims[n]. Shape and
/// complex-law violations raise ValidationError.
ChainComplex load_complex(const std::string& path, bool validate = true);

/// H_n = ker d_n / im d_{n+1} for n = 0..N.
std::vector<AbelianGroup> homology(const ChainComplex& c);

/// Cohomology via universal coefficients: rank(H^n) = betti_n,
/// torsion(H^n) = torsion(H_{n-1}).
std::vector<AbelianGroup> cohomology(const ChainComplex& c);

/// H_n(C; Z/m): (Z/m)^betti_n plus Z/gcd(t, m) for each torsion coefficient
/// of H_n and of H_{n-1}. Reported in AbelianGroup with betti = number of
/// full Z/m summands and torsion = the proper gcd factors.
std::vector<AbelianGroup> homology_with_coefficients(const ChainComplex& c, const BigInt& m);

}  // namespace tdsim
