#pragma once

// Photon environments: angular/polarization photon-number distributions,
// mode-density modifiers (vacuum, planar cavity, photonic crystal) and the
// K(sigma, sigma') angular integrals that weight every rate coefficient.
//
// Normalization: K is taken with the solid-angle measure dOmega/4pi, so the
// vacuum spontaneous matrix is (2/3) * identity and an isotropic photon
// number N gives (2N/3) * identity. Remaining constant prefactors live in the
// rate scale S of the level scheme.

#include <array>
#include <complex>
#include <functional>
#include <iosfwd>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "vrelax/angular.hpp"

namespace vrelax::env {

using angular::Sigma;
using cplx = std::complex<double>;

enum class KProvenance { ClosedForm, Quadrature, Injected };

std::string to_string(KProvenance p);

/// 3x3 complex matrix K(sigma, sigma'), sigma, sigma' in {-1, 0, +1}.
class KMatrix {
public:
  KMatrix() = default;

  /// Diagonal matrix with entries for sigma = -1, 0, +1.
  static KMatrix diagonal(double minus, double zero, double plus, KProvenance provenance = KProvenance::Injected);

  cplx& operator()(Sigma s, Sigma sp) { return entries_[s.index()][sp.index()]; }
  const cplx& operator()(Sigma s, Sigma sp) const { return entries_[s.index()][sp.index()]; }
  cplx& at(int s, int sp) { return (*this)(Sigma::from(s), Sigma::from(sp)); }
  const cplx& at(int s, int sp) const { return (*this)(Sigma::from(s), Sigma::from(sp)); }

  /// Largest |K(s,s') - conj(K(s',s))|.
  double hermiticity_defect() const;
  /// Largest |entry| off the diagonal.
  double max_off_diagonal() const;
  double max_abs_difference(const KMatrix& other) const;

  KMatrix scaled(double c) const;

  KProvenance provenance = KProvenance::Injected;
  /// Frequency the matrix was evaluated at (rad/s); empty when frequency-flat.
  std::optional<double> evaluated_at;

private:
  std::array<std::array<cplx, 3>, 3> entries_{};
};

/// Mean photon number on a complete rectangular (theta, phi) grid per helicity.
class TabulatedGrid {
public:
  /// values[h][i][k] for helicity h (0: lambda=-1, 1: lambda=+1), theta i, phi k.
  TabulatedGrid(std::vector<double> thetas, std::vector<double> phis,
                std::array<std::vector<std::vector<double>>, 2> values);

  /// Strict CSV parse of `theta_rad,phi_rad,lambda,n_mean` rows (header row required).
  static TabulatedGrid from_csv(std::istream& in);
  static TabulatedGrid from_csv_file(const std::string& path);

  /// Bilinear interpolation; theta is clamped to the grid, phi is periodic.
  double evaluate(double theta, double phi, Sigma lam) const;

  bool phi_independent() const { return phis_.size() == 1; }
  const std::vector<double>& thetas() const { return thetas_; }
  const std::vector<double>& phis() const { return phis_; }

private:
  std::vector<double> thetas_;
  std::vector<double> phis_;
  std::array<std::vector<std::vector<double>>, 2> values_;
};

enum class DistributionKind { Isotropic, AxisymmetricCos2, CustomTabulated, Custom };

std::string to_string(DistributionKind k);

/// Mean photon number per mode N_{k lambda}(theta, phi); immutable.
class AngularDistribution {
public:
  using Function = std::function<double(double theta, double phi, Sigma lam)>;

  static AngularDistribution isotropic(double n);
  /// N cos^2(theta), axisymmetric about the quantization axis.
  static AngularDistribution axisymmetric_cos2(double n);
  static AngularDistribution tabulated(TabulatedGrid grid);
  /// Arbitrary callable. `axisymmetric` declares the value independent of phi,
  /// which lets the phi integral be done in closed form.
  static AngularDistribution custom(Function f, bool axisymmetric);

  double operator()(double theta, double phi, Sigma lam) const;
  DistributionKind kind() const { return kind_; }
  bool axisymmetric() const { return axisymmetric_; }
  /// Same shape with every value multiplied by c >= 0.
  AngularDistribution scaled(double c) const;

private:
  AngularDistribution(DistributionKind kind, bool axisymmetric, Function f, double scale)
      : kind_(kind), axisymmetric_(axisymmetric), f_(std::move(f)), scale_(scale) {}

  DistributionKind kind_;
  bool axisymmetric_;
  Function f_;
  double scale_;
};

enum class ModeDensityKind { Vacuum, PlanarCavity, PhotonicCrystal };

std::string to_string(ModeDensityKind k);

/// Relative density of electromagnetic modes per polarization channel.
class ModeDensityModifier {
public:
  static ModeDensityModifier vacuum();
  /// Atom between two plates of reflectivity r in [0, 1); the plate normal is the quantization axis.
  static ModeDensityModifier planar_cavity(double reflectivity);
  /// Band edge omega_e (rad/s), dispersion curvature A and the polarization
  /// channels whose transitions fall into the gap.
  static ModeDensityModifier photonic_crystal(double band_edge, double curvature, std::set<int> gapped_channels);

  /// Dimensionless density relative to vacuum for channel sigma at frequency omega.
  ///
  /// Cavity: (1-r)/(1+r) for sigma = +-1, (1+r)/(1-r) for sigma = 0.
  /// Photonic crystal, gapped channel: 0 for omega <= omega_e, otherwise
  /// sqrt((omega - omega_e) / A^3) with A expressed in the units that make
  /// this density relative to vacuum. Other channels: 1.
  double relative_density(double omega, Sigma channel) const;

  ModeDensityKind kind() const { return kind_; }
  double reflectivity() const { return reflectivity_; }
  double band_edge() const { return band_edge_; }
  double curvature() const { return curvature_; }
  const std::set<int>& gapped_channels() const { return gapped_; }
  /// True when relative_density does not depend on omega.
  bool frequency_flat() const { return kind_ != ModeDensityKind::PhotonicCrystal; }

private:
  ModeDensityModifier() = default;
  ModeDensityKind kind_ = ModeDensityKind::Vacuum;
  double reflectivity_ = 0.0;
  double band_edge_ = 0.0;
  double curvature_ = 1.0;
  std::set<int> gapped_;
};

struct QuadratureOptions {
  int theta_order = 16;  // Gauss-Legendre nodes in cos(theta)
  int phi_nodes = 64;    // trapezoid nodes in phi
  int threads = 1;
};

/// Spontaneous K-matrix in closed form: vacuum (2/3) identity with each
/// diagonal channel scaled by the modifier's relative density at omega.
KMatrix k_spontaneous(const ModeDensityModifier& mod, double omega);

/// Stimulated K-matrix
///   K(s,s') = sum_lam Int N(theta,phi,lam) e^{i(s-s')phi} s_{lam s'}(theta) s_{lam s}(theta) dOmega/4pi
/// by Gauss-Legendre in cos(theta) times trapezoid in phi, then weighted by
/// sqrt(rho_s rho_s') from the mode-density modifier.
KMatrix k_stimulated(const AngularDistribution& dist, const ModeDensityModifier& mod, double omega,
                     const QuadratureOptions& options = {});

/// Raw angular integral of a distribution (no modifier) on the full
/// theta x phi grid, never using the closed-form phi shortcut.
KMatrix k_angular_full_grid(const AngularDistribution& dist, const QuadratureOptions& options);

struct SelfCheckItem {
  std::string name;
  double deviation;
};

struct SelfCheckReport {
  std::vector<SelfCheckItem> items;
  double max_deviation() const;
};

/// Deviation of the quadrature from closed forms: Wigner-function
/// orthogonality moments, the isotropic matrix 2N/3 and the cos^2 profile
/// (4N/15, 2N/15, 4N/15). Orders below 4 are rejected.
SelfCheckReport quadrature_selfcheck(int quad_order);

}  // namespace vrelax::env
