#pragma once

// Rate coefficients and relaxation / stimulated-transition superoperators for
// degenerate V-type systems: two excited levels b, c decaying to a ground
// level d, in the fine-structure (J, M) or hyperfine (F, M_F) basis.

#include <array>
#include <complex>
#include <cstddef>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "vrelax/angular.hpp"
#include "vrelax/environment.hpp"

namespace vrelax::ops {

using angular::HalfInt;
using cplx = std::complex<double>;
using env::KMatrix;

/// Levels in basis storage order.
enum class Level { d = 0, c = 1, b = 2 };

char level_name(Level level);

enum class DipoleMode {
  Normalized,  // every S_{j1 j2} equals one user scalar S
  Explicit,    // S_{j1 j2} built from reduced dipoles and the second-index frequency
};

struct DipoleScale {
  DipoleMode mode = DipoleMode::Normalized;
  double S = 1.0;
  // Explicit mode: S_{j1 j2} = prefactor * mu_{j1 d} mu_{j2 d} omega_{j2 d}^3 / sqrt((2J1+1)(2J2+1)).
  // Signs of mu are kept; they fix the relative phase of the two upper levels.
  double mu_bd = 1.0;
  double mu_cd = 1.0;
  double prefactor = 1.0;
  // Require mu_bd / sqrt(2J_b+1) == mu_cd / sqrt(2J_c+1) in explicit mode.
  bool alkali = false;
};

struct LevelScheme {
  HalfInt J_b;
  std::optional<HalfInt> J_c;  // empty: two-level reduction b -> d
  HalfInt J_d;
  double omega_bd = 1.0;  // rad/s
  double omega_cd = 1.0;  // rad/s, ignored without c
  DipoleScale dipole;

  /// Throws DomainError on non-positive frequencies, forbidden transitions or a broken alkali ratio.
  void validate() const;
  bool has_c() const { return J_c.has_value(); }
  HalfInt J(Level level) const;
  /// Transition frequency to d; 0 for d itself.
  double omega(Level level) const;
  /// S_{j1 j2} for upper levels j1, j2.
  double s_factor(Level j1, Level j2) const;
};

struct HyperfineScheme {
  LevelScheme fine;
  HalfInt I;
  /// Optional manifold energies omega_j(F) (rad/s), indexed by Level. Missing
  /// entries default to the level frequency (0 for d).
  std::array<std::map<HalfInt, double>, 3> energies;

  void validate() const;
  /// |J - I| ... J + I.
  std::vector<HalfInt> f_values(Level level) const;
  double energy(Level level, HalfInt F) const;
};

/// One basis state. For fine structure F is set equal to J.
struct Sublevel {
  Level level;
  HalfInt F;
  HalfInt M;
  bool operator==(const Sublevel&) const = default;
};

/// Ordered sublevel enumeration: d, c, b; within a level F ascending, then M ascending.
class Basis {
public:
  Basis() = default;
  static Basis fine(const LevelScheme& scheme);
  static Basis hyperfine(const HyperfineScheme& scheme);

  std::size_t size() const { return states_.size(); }
  const Sublevel& operator[](std::size_t i) const { return states_[i]; }
  const std::vector<Sublevel>& states() const { return states_; }
  bool is_hyperfine() const { return hyperfine_; }
  /// F is ignored in fine-structure bases.
  std::optional<std::size_t> find(Level level, HalfInt F, HalfInt M) const;
  std::vector<std::size_t> indices(Level level) const;
  std::vector<std::size_t> upper_indices() const;
  /// e.g. "b M=3/2" or "b F=2 M=-1".
  std::string label(std::size_t i) const;

  bool operator==(const Basis&) const = default;

private:
  std::vector<Sublevel> states_;
  bool hyperfine_ = false;
};

enum class RateKind { Spontaneous, Stimulated };

/// All coefficients of one relaxation or stimulated process, keyed by basis indices.
struct RateSet {
  RateKind kind = RateKind::Spontaneous;
  Basis basis;
  /// (u1, u2) -> Gamma_{j1 j2}(M1, M2)
  std::map<std::pair<std::size_t, std::size_t>, cplx> upper;
  /// (u1, d1, u2, d2) -> Gamma_{j1 j2}(M1 Md1, M2 Md2); also the absorption table for stimulated sets.
  std::map<std::array<std::size_t, 4>, cplx> feeding;
  /// Stimulated only: (d1, d2) -> Gamma_dd(Md1, Md2).
  std::map<std::pair<std::size_t, std::size_t>, cplx> ground;

  cplx upper_at(std::size_t u1, std::size_t u2) const;
  cplx feeding_at(std::size_t u1, std::size_t d1, std::size_t u2, std::size_t d2) const;
  cplx ground_at(std::size_t d1, std::size_t d2) const;
  /// Every coefficient multiplied by c.
  RateSet scaled(double c) const;
  /// Trace identity, selection rule and ground-table consistency; throws ContractViolation naming the tuple.
  void check_consistency(double tol = 1e-12) const;
};

struct AssemblyOptions {
  int threads = 1;
};

/// Fine-structure coefficients. Each coefficient with second upper index j2
/// uses the K matrix of the j2 -> d transition (K_b or K_c).
RateSet rates_fine(const LevelScheme& scheme, const KMatrix& K_b, const KMatrix& K_c,
                   RateKind kind = RateKind::Spontaneous, const AssemblyOptions& options = {});

/// Spontaneous coefficients with K evaluated in closed form at each transition frequency.
RateSet rates_spontaneous(const LevelScheme& scheme, const env::ModeDensityModifier& mod,
                          const AssemblyOptions& options = {});

/// Stimulated coefficients with K^S from quadrature at each transition frequency.
RateSet rates_stimulated(const LevelScheme& scheme, const env::AngularDistribution& dist,
                         const env::ModeDensityModifier& mod, const env::QuadratureOptions& quad = {},
                         const AssemblyOptions& options = {});

/// Hyperfine coefficients with Racah recoupling weights.
RateSet rates_hyperfine(const HyperfineScheme& scheme, const KMatrix& K_b, const KMatrix& K_c,
                        RateKind kind = RateKind::Spontaneous, const AssemblyOptions& options = {});

/// Dense linear map on column-major vec(rho).
struct Superoperator {
  Basis basis;
  Eigen::MatrixXcd matrix;

  Eigen::MatrixXcd apply(const Eigen::MatrixXcd& rho) const;
};

/// Spontaneous relaxation: depopulation of the upper levels plus feeding of d.
Superoperator build_relaxation_superop(const RateSet& rates);

/// Stimulated transitions: the emission block plus the absorption block out of d.
Superoperator build_stimulated_superop(const RateSet& rates);

struct InterferenceEntry {
  HalfInt F;  // equals M's level J in fine structure; only meaningful for hyperfine
  HalfInt M;
  std::size_t b_index;
  std::size_t c_index;
  cplx gamma_bb;
  cplx gamma_cc;
  cplx gamma_bc;
  /// Re Gamma_bc / sqrt(Gamma_bb Gamma_cc); empty when a diagonal rate vanishes.
  std::optional<double> p;
};

struct OffDiagonalEntry {
  std::size_t u1;
  std::size_t u2;
  cplx value;
};

struct InterferenceReport {
  std::vector<InterferenceEntry> entries;
  std::vector<OffDiagonalEntry> off_diagonal;
};

/// Pairs b and c sublevels sharing M (and F for hyperfine bases). Off-diagonal
/// coefficients above `threshold` times the largest diagonal rate are listed.
InterferenceReport interference_report(const RateSet& rates, double threshold = 1e-12);

/// Columns kind,j1,F1,M1,j2,F2,M2,Md1,Md2,re,im; `prefix` is prepended to the kind.
void write_rates_csv(std::ostream& out, const RateSet& rates, const std::string& prefix, bool header = true);

/// Basis legend as '#' lines followed by a dense row,c0_re,c0_im,... table.
void write_superop_csv(std::ostream& out, const Superoperator& op);

}  // namespace vrelax::ops
