#pragma once

// Density-matrix propagation under
//   d rho/dt = -i [H, rho] + sum_k L_k[rho]
// with fixed-step RK4, plus steady states of the same generator.

#include <cstddef>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "vrelax/operators.hpp"

namespace vrelax::dyn {

using ops::Basis;
using ops::Superoperator;

struct DensityMatrix {
  Eigen::MatrixXcd rho;
  double t = 0.0;

  double trace() const { return rho.trace().real(); }
  /// max |rho - rho^dagger|
  double hermiticity_defect() const;
  /// Smallest eigenvalue of the Hermitian part.
  double min_eigenvalue() const;
  Eigen::VectorXd populations() const { return rho.diagonal().real(); }
};

/// Initial states.
DensityMatrix single_sublevel(const Basis& basis, std::size_t index);
/// Equal populations over the sublevels of one level.
DensityMatrix level_uniform(const Basis& basis, ops::Level level);
/// Equal populations over every sublevel.
DensityMatrix maximally_mixed(const Basis& basis);

/// Diagonal H in the sublevel basis (rad/s).
struct AtomicHamiltonian {
  Eigen::VectorXd diagonal;

  static AtomicHamiltonian fine(const ops::LevelScheme& scheme, const Basis& basis);
  static AtomicHamiltonian hyperfine(const ops::HyperfineScheme& scheme, const Basis& basis);
  static AtomicHamiltonian zero(const Basis& basis);
};

/// Full generator on column-major vec(rho).
Eigen::MatrixXcd generator(const AtomicHamiltonian& H, const std::vector<Superoperator>& L);

struct PropagateOptions {
  int stride = 1;                  // keep every stride-th step (first and last always kept)
  double trace_tolerance = 1e-6;   // abort above this drift
  double negativity_floor = -1e-6; // abort below this eigenvalue
};

struct Trajectory {
  std::vector<DensityMatrix> samples;
  std::vector<std::string> warnings;
  double worst_trace_drift = 0.0;
  double worst_hermiticity = 0.0;
  double worst_eigenvalue = 0.0;
};

/// Classical RK4 from rho0 to t_final with step dt; every step is followed by
/// rho <- (rho + rho^dagger)/2. Throws NumericalAbort on trace drift or negativity.
Trajectory propagate(const DensityMatrix& rho0, const AtomicHamiltonian& H, const std::vector<Superoperator>& L,
                     double t_final, double dt, const PropagateOptions& options = {});

struct SteadyStateOptions {
  double null_tolerance = 1e-10;           // singular value cut relative to the largest
  std::optional<DensityMatrix> fallback;   // start state for the degenerate case
  double derivative_tolerance = 1e-12;     // ||d rho/dt||_max convergence
  double max_time = 1e5;
};

struct SteadyStateResult {
  std::optional<DensityMatrix> state;
  int null_dimension = 0;
  bool from_propagation = false;
  double residual = 0.0;  // ||generator(rho_ss)||_max
};

/// Trace-one null vector of the generator. A null space of dimension > 1 is
/// reported in null_dimension; a state is then produced only by propagating
/// the fallback start until the derivative falls below tolerance.
SteadyStateResult steady_state(const AtomicHamiltonian& H, const std::vector<Superoperator>& L,
                               const SteadyStateOptions& options = {});

/// Trajectory CSV: t, then re/im of every element in column-major basis order,
/// or t plus populations only.
void write_trajectory_csv(std::ostream& out, const Basis& basis, const Trajectory& traj, bool populations_only);

}  // namespace vrelax::dyn
