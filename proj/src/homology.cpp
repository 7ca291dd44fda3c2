#include "tdsim/homology.hpp"

#include <algorithm>
#include <fstream>
#include <json.hpp>
#include <sstream>

namespace tdsim {

namespace {

using boost::multiprecision::abs;
using boost::multiprecision::gcd;
using boost::multiprecision::lcm;

// Truncated-division quotient, as in C++ integer division.
BigInt quot(const BigInt& a, const BigInt& b) { return a / b; }

}  // namespace

std::string AbelianGroup::to_string(const std::string& ring) const {
  if (betti == 0 && torsion.empty()) return "0";
  std::ostringstream os;
  bool first = true;
  auto sep = [&] {
    if (!first) os << " + ";
    first = false;
  };
  if (betti > 0) {
    sep();
    os << ring;
    if (betti > 1) os << "^" << betti;
  }
  for (const BigInt& t : torsion) {
    sep();
    os << "Z/" << t;
  }
  return os.str();
}

std::vector<BigInt> SmithResult::invariant_factors() const {
  std::vector<BigInt> out;
  const long n = std::min(d.rows(), d.cols());
  for (long i = 0; i < n; ++i) {
    if (d(i, i) != 0) out.push_back(d(i, i));
  }
  return out;
}

SmithResult smith_normal_form(const IntMatrix& m) {
  SmithResult res;
  const long rows = m.rows(), cols = m.cols();
  res.u = IntMatrix::Identity(rows, rows);
  res.v = IntMatrix::Identity(cols, cols);
  res.d = m;
  IntMatrix& d = res.d;

  const long steps = std::min(rows, cols);
  for (long s = 0; s < steps; ++s) {
    for (;;) {
      // smallest nonzero |entry| of the trailing submatrix becomes the pivot
      long pi = -1, pj = -1;
      BigInt best;
      for (long i = s; i < rows; ++i) {
        for (long j = s; j < cols; ++j) {
          if (d(i, j) == 0) continue;
          BigInt a = abs(d(i, j));
          if (pi < 0 || a < best) {
            best = a;
            pi = i;
            pj = j;
          }
        }
      }
      if (pi < 0) return res;  // trailing submatrix is zero
      if (pi != s) {
        d.row(pi).swap(d.row(s));
        res.u.row(pi).swap(res.u.row(s));
      }
      if (pj != s) {
        d.col(pj).swap(d.col(s));
        res.v.col(pj).swap(res.v.col(s));
      }

      bool changed = false;
      for (long i = s + 1; i < rows; ++i) {
        if (d(i, s) == 0) continue;
        const BigInt q = quot(d(i, s), d(s, s));
        if (q != 0) {
          d.row(i) -= q * d.row(s);
          res.u.row(i) -= q * res.u.row(s);
        }
        if (d(i, s) != 0) changed = true;
      }
      for (long j = s + 1; j < cols; ++j) {
        if (d(s, j) == 0) continue;
        const BigInt q = quot(d(s, j), d(s, s));
        if (q != 0) {
          d.col(j) -= q * d.col(s);
          res.v.col(j) -= q * res.v.col(s);
        }
        if (d(s, j) != 0) changed = true;
      }
      if (changed) continue;

      // pivot must divide the rest of the submatrix for the invariant chain
      bool divides = true;
      for (long i = s + 1; i < rows && divides; ++i) {
        for (long j = s + 1; j < cols; ++j) {
          if (d(i, j) % d(s, s) != 0) {
            d.row(s) += d.row(i);
            res.u.row(s) += res.u.row(i);
            divides = false;
            break;
          }
        }
      }
      if (divides) break;
    }
    if (d(s, s) < 0) {
      d.row(s) = -d.row(s);
      res.u.row(s) = -res.u.row(s);
    }
  }
  return res;
}

long rank_of(const IntMatrix& m) {
  return static_cast<long>(smith_normal_form(m).invariant_factors().size());
}

IntMatrix int_product(const IntMatrix& a, const IntMatrix& b) {
  if (a.cols() != b.rows()) throw ValidationError("int_product: shape mismatch");
  IntMatrix out = IntMatrix::Zero(a.rows(), b.cols());
  for (long i = 0; i < a.rows(); ++i)
    for (long k = 0; k < a.cols(); ++k) {
      if (a(i, k) == 0) continue;
      for (long j = 0; j < b.cols(); ++j) out(i, j) += a(i, k) * b(k, j);
    }
  return out;
}

BigInt determinant(const IntMatrix& m) {
  if (m.rows() != m.cols()) throw ValidationError("determinant: matrix not square");
  const long n = m.rows();
  if (n == 0) return 1;
  IntMatrix a = m;
  BigInt prev = 1;
  int sign = 1;
  for (long k = 0; k < n - 1; ++k) {
    if (a(k, k) == 0) {
      long swap = -1;
      for (long i = k + 1; i < n; ++i) {
        if (a(i, k) != 0) {
          swap = i;
          break;
        }
      }
      if (swap < 0) return 0;
      a.row(k).swap(a.row(swap));
      sign = -sign;
    }
    for (long i = k + 1; i < n; ++i) {
      for (long j = k + 1; j < n; ++j) {
        a(i, j) = (a(i, j) * a(k, k) - a(i, k) * a(k, j)) / prev;
      }
      a(i, k) = 0;
    }
    prev = a(k, k);
  }
  return sign > 0 ? a(n - 1, n - 1) : -a(n - 1, n - 1);
}

std::vector<ComplexViolation> validate_complex(const ChainComplex& c) {
  std::vector<ComplexViolation> out;
  if (c.dims.empty()) {
    out.push_back({"complex has no chain groups"});
    return out;
  }
  for (long d : c.dims) {
    if (d < 0) {
      out.push_back({"negative chain-group rank"});
      return out;
    }
  }
  if (c.boundaries.size() + 1 != c.dims.size()) {
    out.push_back({"expected " + std::to_string(c.dims.size() - 1) + " boundary maps, got " +
                   std::to_string(c.boundaries.size())});
    return out;
  }
  for (std::size_t k = 0; k < c.boundaries.size(); ++k) {
    const IntMatrix& b = c.boundaries[k];
    if (b.rows() != c.dims[k] || b.cols() != c.dims[k + 1]) {
      std::ostringstream os;
      os << "d" << k + 1 << " has shape " << b.rows() << "x" << b.cols() << ", expected "
         << c.dims[k] << "x" << c.dims[k + 1];
      out.push_back({os.str()});
      return out;
    }
  }
  for (std::size_t k = 0; k + 1 < c.boundaries.size(); ++k) {
    const IntMatrix prod = int_product(c.boundaries[k], c.boundaries[k + 1]);
    for (long i = 0; i < prod.rows(); ++i) {
      for (long j = 0; j < prod.cols(); ++j) {
        if (prod(i, j) != 0) {
          std::ostringstream os;
          os << "d" << k + 1 << "*d" << k + 2 << " != 0 (entry (" << i << "," << j
             << ") = " << prod(i, j) << ")";
          out.push_back({os.str()});
          return out;
        }
      }
    }
  }
  return out;
}

namespace {

void require_valid(const ChainComplex& c) {
  auto v = validate_complex(c);
  if (!v.empty()) throw ValidationError("not a chain complex: " + v.front().message);
}

// d_n for n = 0..N+1 with the zero maps at both ends.
long boundary_rank(const ChainComplex& c, std::size_t n) {
  if (n == 0 || n > c.boundaries.size()) return 0;
  return rank_of(c.boundaries[n - 1]);
}

std::vector<BigInt> boundary_torsion(const ChainComplex& c, std::size_t n) {
  std::vector<BigInt> out;
  if (n == 0 || n > c.boundaries.size()) return out;
  for (const BigInt& f : smith_normal_form(c.boundaries[n - 1]).invariant_factors()) {
    if (f > 1) out.push_back(f);
  }
  return out;
}

// Invariant-factor canonical form of a multiset of cyclic orders. Merging an
// incomparable pair can leave a trivial gcd factor behind, so strip those
// after the loop as well.
std::vector<BigInt> canonical_factors(std::vector<BigInt> fs) {
  bool again = true;
  while (again) {
    again = false;
    for (std::size_t i = 0; i < fs.size(); ++i) {
      for (std::size_t j = i + 1; j < fs.size(); ++j) {
        if (fs[i] % fs[j] != 0 && fs[j] % fs[i] != 0) {
          const BigInt g = gcd(fs[i], fs[j]);
          const BigInt l = lcm(fs[i], fs[j]);
          fs[i] = g;
          fs[j] = l;
          again = true;
        }
      }
    }
  }
  fs.erase(std::remove_if(fs.begin(), fs.end(), [](const BigInt& f) { return f <= 1; }),
           fs.end());
  std::sort(fs.begin(), fs.end());
  return fs;
}

}  // namespace

ChainComplex load_complex(const std::string& path, bool validate) {
  std::ifstream f(path);
  if (!f) throw ValidationError("complex: cannot open '" + path + "'");
  nlohmann::json root;
  try {
    root = nlohmann::json::parse(f);
  } catch (const nlohmann::json::parse_error& e) {
    throw ValidationError(std::string("complex: JSON parse error: ") + e.what());
  }
  if (!root.contains("dims")) throw ValidationError("complex: missing dims");
  ChainComplex c;
  for (const auto& d : root.at("dims")) c.dims.push_back(d.get<long>());
  if (root.contains("boundaries")) {
    std::size_t n = 0;
    for (const auto& jb : root.at("boundaries")) {
      if (n + 1 >= c.dims.size())
        throw ValidationError("complex: more boundary maps than chain groups allow");
      const long rows = c.dims[n], cols = c.dims[n + 1];
      if (static_cast<long>(jb.size()) != rows * cols)
        throw ValidationError("complex: boundary " + std::to_string(n + 1) + " needs " +
                              std::to_string(rows * cols) + " row-major entries");
      IntMatrix m(rows, cols);
      for (long i = 0; i < rows * cols; ++i)
        m(i / cols, i % cols) = BigInt(jb[static_cast<std::size_t>(i)].get<long long>());
      c.boundaries.push_back(std::move(m));
      ++n;
    }
  }
  if (validate) {
    const auto violations = validate_complex(c);
    if (!violations.empty())
      throw ValidationError("not a chain complex: " + violations.front().message);
  }
  return c;
}

std::vector<AbelianGroup> homology(const ChainComplex& c) {
  require_valid(c);
  std::vector<AbelianGroup> out(c.dims.size());
  for (std::size_t n = 0; n < c.dims.size(); ++n) {
    const long kernel_rank = c.dims[n] - boundary_rank(c, n);
    out[n].betti = kernel_rank - boundary_rank(c, n + 1);
    out[n].torsion = boundary_torsion(c, n + 1);
  }
  return out;
}

std::vector<AbelianGroup> cohomology(const ChainComplex& c) {
  const auto h = homology(c);
  std::vector<AbelianGroup> out(h.size());
  for (std::size_t n = 0; n < h.size(); ++n) {
    out[n].betti = h[n].betti;
    if (n > 0) out[n].torsion = h[n - 1].torsion;
  }
  return out;
}

std::vector<AbelianGroup> homology_with_coefficients(const ChainComplex& c, const BigInt& m) {
  if (m < 2) throw ValidationError("coefficient modulus must be >= 2");
  const auto h = homology(c);
  std::vector<AbelianGroup> out(h.size());
  for (std::size_t n = 0; n < h.size(); ++n) {
    std::vector<BigInt> cyclic;
    long full = h[n].betti;  // free part tensors to full Z/m summands
    auto add = [&](const std::vector<BigInt>& ts) {
      for (const BigInt& t : ts) {
        const BigInt g = gcd(t, m);
        if (g == m)
          ++full;
        else if (g > 1)
          cyclic.push_back(g);
      }
    };
    add(h[n].torsion);                     // H_n (x) Z/m
    if (n > 0) add(h[n - 1].torsion);      // Tor(H_{n-1}, Z/m)
    out[n].betti = full;
    out[n].torsion = canonical_factors(std::move(cyclic));
  }
  return out;
}

}  // namespace tdsim
