#include "vrelax/angular.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <unordered_map>
#include <vector>

#include <boost/multiprecision/cpp_int.hpp>

namespace vrelax::angular {

namespace {

using boost::multiprecision::cpp_int;

constexpr int kFactorialCap = 64;

// n! for n <= cap as exponent vectors over the primes <= cap. Every Racah
// sum is a signed sum of products of factorials, so each term becomes an
// exact integer once the common prime powers are factored out.
class FactorialTable {
public:
  explicit FactorialTable(int cap) : cap_(cap) {
    for (int n = 2; n <= cap; ++n) {
      bool prime = true;
      for (int p : primes_) {
        if (p * p > n) break;
        if (n % p == 0) {
          prime = false;
          break;
        }
      }
      if (prime) primes_.push_back(n);
    }
    exps_.assign(cap + 1, std::vector<int>(primes_.size(), 0));
    for (int n = 2; n <= cap; ++n) {
      exps_[n] = exps_[n - 1];
      int r = n;
      for (std::size_t k = 0; k < primes_.size() && r > 1; ++k) {
        while (r % primes_[k] == 0) {
          ++exps_[n][k];
          r /= primes_[k];
        }
      }
    }
  }

  int cap() const { return cap_; }
  std::size_t size() const { return primes_.size(); }
  int prime(std::size_t k) const { return primes_[k]; }

  const std::vector<int>& factorial(int n) const {
    if (n < 0) throw DomainError("negative factorial argument");
    if (n > cap_) {
      throw DomainError("factorial argument " + std::to_string(n) + " exceeds table cap " +
                        std::to_string(cap_));
    }
    return exps_[n];
  }

private:
  int cap_;
  std::vector<int> primes_;
  std::vector<std::vector<int>> exps_;
};

const FactorialTable& table() {
  static const FactorialTable t(kFactorialCap);
  return t;
}

using Exponents = std::vector<int>;

void add(Exponents& acc, const Exponents& e, int sign = 1) {
  for (std::size_t k = 0; k < acc.size(); ++k) acc[k] += sign * e[k];
}

struct Term {
  bool negative;
  Exponents exps;
};

// sqrt(prefactor) * sum, where the prefactor and each term are
// products of prime powers. Converted to floating point only at the end.
double evaluate(const Exponents& prefactor_sq, const std::vector<Term>& terms) {
  const auto& tab = table();
  if (terms.empty()) return 0.0;
  Exponents common = terms.front().exps;
  for (const auto& t : terms) {
    for (std::size_t k = 0; k < common.size(); ++k) common[k] = std::min(common[k], t.exps[k]);
  }
  cpp_int sum = 0;
  for (const auto& t : terms) {
    cpp_int v = 1;
    for (std::size_t k = 0; k < common.size(); ++k) {
      int e = t.exps[k] - common[k];
      if (e > 0) v *= boost::multiprecision::pow(cpp_int(tab.prime(k)), static_cast<unsigned>(e));
    }
    if (t.negative) sum -= v;
    else sum += v;
  }
  if (sum == 0) return 0.0;

  cpp_int num = 1;
  cpp_int den = 1;
  for (std::size_t k = 0; k < common.size(); ++k) {
    int e = 2 * common[k] + prefactor_sq[k];
    if (e > 0) num *= boost::multiprecision::pow(cpp_int(tab.prime(k)), static_cast<unsigned>(e));
    else if (e < 0) den *= boost::multiprecision::pow(cpp_int(tab.prime(k)), static_cast<unsigned>(-e));
  }
  const long double scale = std::sqrt(num.convert_to<long double>() / den.convert_to<long double>());
  return static_cast<double>(sum.convert_to<long double>() * scale);
}

// Twice-value arithmetic helpers; callers guarantee evenness.
int half(int twice) { return twice / 2; }

std::uint64_t pack(int a, int b, int c, int d, int e, int f) {
  auto u = [](int v) { return static_cast<std::uint64_t>(static_cast<std::uint8_t>(v + 128)); };
  return u(a) | u(b) << 8 | u(c) << 16 | u(d) << 24 | u(e) << 32 | u(f) << 40;
}

double cg_exact(int j1, int m1, int j2, int m2, int J, int M) {
  const auto& tab = table();
  Exponents pref(tab.size(), 0);
  add(pref, tab.factorial(J + 1));  // (2J+1)!/(2J)! = 2J+1
  add(pref, tab.factorial(J), -1);
  add(pref, tab.factorial(half(j1 + j2 - J)));
  add(pref, tab.factorial(half(j1 - j2 + J)));
  add(pref, tab.factorial(half(-j1 + j2 + J)));
  add(pref, tab.factorial(half(j1 + j2 + J) + 1), -1);
  add(pref, tab.factorial(half(J + M)));
  add(pref, tab.factorial(half(J - M)));
  add(pref, tab.factorial(half(j1 - m1)));
  add(pref, tab.factorial(half(j1 + m1)));
  add(pref, tab.factorial(half(j2 - m2)));
  add(pref, tab.factorial(half(j2 + m2)));

  const int kmin = std::max({0, half(j2 - J - m1), half(j1 - J + m2)});
  const int kmax = std::min({half(j1 + j2 - J), half(j1 - m1), half(j2 + m2)});
  std::vector<Term> terms;
  for (int k = kmin; k <= kmax; ++k) {
    Exponents e(tab.size(), 0);
    add(e, tab.factorial(k), -1);
    add(e, tab.factorial(half(j1 + j2 - J) - k), -1);
    add(e, tab.factorial(half(j1 - m1) - k), -1);
    add(e, tab.factorial(half(j2 + m2) - k), -1);
    add(e, tab.factorial(half(J - j2 + m1) + k), -1);
    add(e, tab.factorial(half(J - j1 - m2) + k), -1);
    terms.push_back({k % 2 != 0, std::move(e)});
  }
  return evaluate(pref, terms);
}

void add_delta(Exponents& pref, int a, int b, int c) {
  const auto& tab = table();
  add(pref, tab.factorial(half(a + b - c)));
  add(pref, tab.factorial(half(a - b + c)));
  add(pref, tab.factorial(half(-a + b + c)));
  add(pref, tab.factorial(half(a + b + c) + 1), -1);
}

double six_j_exact(int j1, int j2, int j3, int j4, int j5, int j6) {
  const auto& tab = table();
  Exponents pref(tab.size(), 0);
  add_delta(pref, j1, j2, j3);
  add_delta(pref, j1, j5, j6);
  add_delta(pref, j4, j2, j6);
  add_delta(pref, j4, j5, j3);

  const int a1 = half(j1 + j2 + j3);
  const int a2 = half(j1 + j5 + j6);
  const int a3 = half(j4 + j2 + j6);
  const int a4 = half(j4 + j5 + j3);
  const int b1 = half(j1 + j2 + j4 + j5);
  const int b2 = half(j2 + j3 + j5 + j6);
  const int b3 = half(j3 + j1 + j6 + j4);
  const int tmin = std::max({a1, a2, a3, a4});
  const int tmax = std::min({b1, b2, b3});
  std::vector<Term> terms;
  for (int t = tmin; t <= tmax; ++t) {
    Exponents e(tab.size(), 0);
    add(e, tab.factorial(t + 1));
    add(e, tab.factorial(t - a1), -1);
    add(e, tab.factorial(t - a2), -1);
    add(e, tab.factorial(t - a3), -1);
    add(e, tab.factorial(t - a4), -1);
    add(e, tab.factorial(b1 - t), -1);
    add(e, tab.factorial(b2 - t), -1);
    add(e, tab.factorial(b3 - t), -1);
    terms.push_back({t % 2 != 0, std::move(e)});
  }
  return evaluate(pref, terms);
}

bool fits_key(std::initializer_list<int> twices) {
  return std::all_of(twices.begin(), twices.end(), [](int v) { return v >= -127 && v <= 127; });
}

}  // namespace

HalfInt HalfInt::parse(std::string_view text) {
  auto trim = [](std::string_view s) {
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
    return s;
  };
  text = trim(text);
  auto to_int = [&](std::string_view s) {
    int v = 0;
    if (!s.empty() && s.front() == '+') s.remove_prefix(1);
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || p != s.data() + s.size() || s.empty()) {
      throw DomainError("not a half-integer: '" + std::string(text) + "'");
    }
    return v;
  };
  if (auto slash = text.find('/'); slash != std::string_view::npos) {
    if (trim(text.substr(slash + 1)) != "2") {
      throw DomainError("not a half-integer: '" + std::string(text) + "'");
    }
    return from_twice(to_int(trim(text.substr(0, slash))));
  }
  return integer(to_int(text));
}

std::string HalfInt::str() const {
  if (is_integer()) return std::to_string(twice_ / 2);
  return std::to_string(twice_) + "/2";
}

void check_projection(HalfInt j, HalfInt m) {
  if (j.twice() < 0) throw DomainError("angular momentum " + j.str() + " is negative");
  if (std::abs(m.twice()) > j.twice() || !j.same_class(m)) {
    throw DomainError("projection " + m.str() + " is not valid for J = " + j.str());
  }
}

Sigma Sigma::from(int value) {
  if (value < -1 || value > 1) throw DomainError("polarization index must be -1, 0 or +1, got " + std::to_string(value));
  return Sigma(value);
}

Sigma Sigma::from(HalfInt diff) {
  if (!valid(diff)) throw DomainError("projection change " + diff.str() + " is not a dipole polarization");
  return Sigma(diff.twice() / 2);
}

std::array<Sigma, 3> all_sigmas() { return {Sigma::from(-1), Sigma::from(0), Sigma::from(1)}; }

bool triangle(HalfInt a, HalfInt b, HalfInt c) {
  const int x = a.twice(), y = b.twice(), z = c.twice();
  if (x < 0 || y < 0 || z < 0) return false;
  if ((x + y + z) % 2 != 0) return false;
  return z >= std::abs(x - y) && z <= x + y;
}

double clebsch_gordan(HalfInt j1, HalfInt m1, HalfInt j2, HalfInt m2, HalfInt J, HalfInt M) {
  check_projection(j1, m1);
  check_projection(j2, m2);
  check_projection(J, M);
  if (m1 + m2 != M) return 0.0;
  if (!triangle(j1, j2, J)) return 0.0;

  if (!fits_key({j1.twice(), m1.twice(), j2.twice(), m2.twice(), J.twice(), M.twice()})) {
    return cg_exact(j1.twice(), m1.twice(), j2.twice(), m2.twice(), J.twice(), M.twice());
  }
  thread_local std::unordered_map<std::uint64_t, double> cache;
  const auto key = pack(j1.twice(), m1.twice(), j2.twice(), m2.twice(), J.twice(), M.twice());
  if (auto it = cache.find(key); it != cache.end()) return it->second;
  const double v = cg_exact(j1.twice(), m1.twice(), j2.twice(), m2.twice(), J.twice(), M.twice());
  cache.emplace(key, v);
  return v;
}

double six_j(HalfInt j1, HalfInt j2, HalfInt j3, HalfInt j4, HalfInt j5, HalfInt j6) {
  if (!triangle(j1, j2, j3) || !triangle(j1, j5, j6) || !triangle(j4, j2, j6) || !triangle(j4, j5, j3)) {
    return 0.0;
  }
  if (!fits_key({j1.twice(), j2.twice(), j3.twice(), j4.twice(), j5.twice(), j6.twice()})) {
    return six_j_exact(j1.twice(), j2.twice(), j3.twice(), j4.twice(), j5.twice(), j6.twice());
  }
  thread_local std::unordered_map<std::uint64_t, double> cache;
  const auto key = pack(j1.twice(), j2.twice(), j3.twice(), j4.twice(), j5.twice(), j6.twice());
  if (auto it = cache.find(key); it != cache.end()) return it->second;
  const double v = six_j_exact(j1.twice(), j2.twice(), j3.twice(), j4.twice(), j5.twice(), j6.twice());
  cache.emplace(key, v);
  return v;
}

double racah_w(HalfInt l1, HalfInt l2, HalfInt l3, HalfInt l4, HalfInt l5, HalfInt l6) {
  const double s = six_j(l1, l2, l5, l4, l3, l6);
  if (s == 0.0) return 0.0;
  // Nonzero 6j forces l1+l2+l3+l4 to be an integer.
  const int exponent = -(l1 + l2 + l3 + l4).twice() / 2;
  return (exponent % 2 == 0) ? s : -s;
}

double wigner_d1(Sigma lam, Sigma sig, double beta) {
  const double c = std::cos(beta);
  const double s = std::sin(beta) / std::sqrt(2.0);
  static constexpr int kSign[3][3] = {
      // sig: -1   0  +1     (lam row)
      {1, -1, 1},  // lam = -1
      {1, 1, -1},  // lam =  0
      {1, 1, 1},   // lam = +1
  };
  const int l = lam.value(), m = sig.value();
  if (l == 0 && m == 0) return c;
  if (l == 0 || m == 0) return kSign[lam.index()][sig.index()] * s;
  return l == m ? 0.5 * (1.0 + c) : 0.5 * (1.0 - c);
}

std::complex<double> wigner_D1(Sigma lam, Sigma sig, double phi, double theta) {
  return wigner_d1(lam, sig, theta) * std::exp(std::complex<double>(0.0, sig.value() * phi));
}

int factorial_cap() { return table().cap(); }

}  // namespace vrelax::angular
