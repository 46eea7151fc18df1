#pragma once

// Angular-momentum algebra for dipole transitions: exact half-integer
// quantum numbers, Clebsch-Gordan coefficients, rank-1 Wigner rotation
// functions and Racah W / 6j recoupling coefficients.

#include <array>
#include <complex>
#include <compare>
#include <cstdint>
#include <string>
#include <string_view>

#include "vrelax/errors.hpp"

namespace vrelax::angular {

/// Half-integer quantum number (J, M, F, I) stored as twice its value.
class HalfInt {
public:
  constexpr HalfInt() = default;

  static constexpr HalfInt from_twice(int twice) { return HalfInt(twice); }
  static constexpr HalfInt integer(int n) { return HalfInt(2 * n); }

  /// Parses "3/2", "-1/2", "2" or "-1".
  static HalfInt parse(std::string_view text);

  constexpr int twice() const { return twice_; }
  constexpr double value() const { return 0.5 * twice_; }
  constexpr bool is_integer() const { return twice_ % 2 == 0; }
  /// Same integer/half-integer class, i.e. the difference is an integer.
  constexpr bool same_class(HalfInt other) const { return (twice_ - other.twice_) % 2 == 0; }
  /// Multiplicity 2J+1 (only meaningful for J >= 0).
  constexpr int multiplicity() const { return twice_ + 1; }

  constexpr HalfInt operator-() const { return HalfInt(-twice_); }
  constexpr HalfInt operator+(HalfInt o) const { return HalfInt(twice_ + o.twice_); }
  constexpr HalfInt operator-(HalfInt o) const { return HalfInt(twice_ - o.twice_); }
  constexpr auto operator<=>(const HalfInt&) const = default;

  std::string str() const;

private:
  explicit constexpr HalfInt(int twice) : twice_(twice) {}
  int twice_ = 0;
};

/// Throws DomainError unless j >= 0, |m| <= j and m is in the class of j.
void check_projection(HalfInt j, HalfInt m);

/// Dipole polarization index, one of -1, 0, +1.
class Sigma {
public:
  constexpr Sigma() = default;
  /// Throws DomainError for values outside {-1, 0, +1}.
  static Sigma from(int value);
  /// Converts an integer-valued HalfInt difference, e.g. M_upper - M_lower.
  static bool valid(HalfInt diff) { return diff.twice() >= -2 && diff.twice() <= 2 && diff.is_integer(); }
  static Sigma from(HalfInt diff);

  constexpr int value() const { return value_; }
  /// Storage index 0, 1, 2 for sigma = -1, 0, +1.
  constexpr int index() const { return value_ + 1; }
  constexpr auto operator<=>(const Sigma&) const = default;

private:
  explicit constexpr Sigma(int v) : value_(v) {}
  int value_ = 0;
};

/// The three polarization indices in storage order (-1, 0, +1).
std::array<Sigma, 3> all_sigmas();

/// Triangle rule |a - b| <= c <= a + b with a + b + c integer.
bool triangle(HalfInt a, HalfInt b, HalfInt c);

/// C^{J M}_{j1 m1 j2 m2}, Condon-Shortley phase convention.
double clebsch_gordan(HalfInt j1, HalfInt m1, HalfInt j2, HalfInt m2, HalfInt J, HalfInt M);

/// Wigner 6j symbol {j1 j2 j3; j4 j5 j6}; zero when a triad fails.
double six_j(HalfInt j1, HalfInt j2, HalfInt j3, HalfInt j4, HalfInt j5, HalfInt j6);

/// Racah coefficient W(l1 l2 l3 l4; l5 l6) = (-1)^(-l1-l2-l3-l4) {l1 l2 l5; l4 l3 l6}.
double racah_w(HalfInt l1, HalfInt l2, HalfInt l3, HalfInt l4, HalfInt l5, HalfInt l6);

/// Rank-1 reduced rotation function s^1_{lam sig}(beta).
///
/// Entries follow the tabulated convention
///   s_{1 0} = s_{0 -1} = -s_{0 1} = -s_{-1 0} = sin(beta)/sqrt(2)
///   s_{1 1} = s_{-1 -1} = (1 + cos beta)/2
///   s_{1 -1} = s_{-1 1} = (1 - cos beta)/2
///   s_{0 0} = cos beta
/// which is the transpose of the more common d^1 sign layout.
double wigner_d1(Sigma lam, Sigma sig, double beta);

/// Phase-carrying rank-1 rotation function e^{i sig phi} s^1_{lam sig}(theta).
///
/// The phase is chosen so that conj(D_{lam s'}) D_{lam s} = e^{i (s - s') phi} s_{lam s'} s_{lam s}.
std::complex<double> wigner_D1(Sigma lam, Sigma sig, double phi, double theta);

/// Largest factorial argument the exact tables hold. The default covers
/// 6j symbols with every argument up to 25/2.
int factorial_cap();

}  // namespace vrelax::angular
