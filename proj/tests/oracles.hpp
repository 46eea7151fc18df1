#pragma once

// Reference implementations that share no code with the library: plain
// long-double factorial sums, 6j symbols from their definition as a sum of
// four 3j products, and brute-force Riemann sums over the sphere.
// Angular momenta are passed as twice their value.

#include <complex>
#include <functional>

#include <Eigen/Dense>

namespace oracle {

/// C^{J M}_{j1 m1 j2 m2}, explicit Racah sum in long double.
double cg(int j1, int m1, int j2, int m2, int J, int M);

/// Wigner 3j from the Clebsch-Gordan oracle.
double three_j(int j1, int j2, int j3, int m1, int m2, int m3);

/// {j1 j2 j3; j4 j5 j6} summed over all projections of four 3j symbols.
double six_j(int j1, int j2, int j3, int j4, int j5, int j6);

/// Racah W(l1 l2 l3 l4; l5 l6) = (-1)^{-(l1+l2+l3+l4)} {l1 l2 l5; l4 l3 l6}.
double racah_w(int l1, int l2, int l3, int l4, int l5, int l6);

/// Rank-1 rotation table entries written out case by case.
double small_d(int lam, int sig, double beta);

/// e^{i sig phi} small_d(lam, sig, theta).
std::complex<double> big_d(int lam, int sig, double phi, double theta);

using Profile = std::function<double(double theta, double phi, int lam)>;

/// K(s, s') = sum_lam Int N conj(D_{lam s'}) D_{lam s} dOmega/4pi by a
/// midpoint rule in cos(theta) and a uniform rule in phi.
/// Returns a 3x3 matrix indexed by s+1, s'+1.
Eigen::Matrix3cd riemann_k(const Profile& n, int u_nodes, int phi_nodes);

}  // namespace oracle
