#include "vrelax/dynamics.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <sstream>

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

#include "vrelax/csv.hpp"

namespace vrelax::dyn {

namespace {

using Vec = Eigen::VectorXcd;

Vec vec(const Eigen::MatrixXcd& m) { return Eigen::Map<const Vec>(m.data(), m.size()); }

Eigen::MatrixXcd unvec(const Vec& v, Eigen::Index n) { return Eigen::Map<const Eigen::MatrixXcd>(v.data(), n, n); }

std::string fmt(double x) {
  std::ostringstream os;
  os.precision(3);
  os << x;
  return os.str();
}

}  // namespace

double DensityMatrix::hermiticity_defect() const { return (rho - rho.adjoint()).cwiseAbs().maxCoeff(); }

double DensityMatrix::min_eigenvalue() const {
  const Eigen::MatrixXcd h = 0.5 * (rho + rho.adjoint());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(h, Eigen::EigenvaluesOnly);
  return es.eigenvalues().minCoeff();
}

DensityMatrix single_sublevel(const Basis& basis, std::size_t index) {
  if (index >= basis.size()) throw DomainError("sublevel index outside the basis");
  const auto n = static_cast<Eigen::Index>(basis.size());
  DensityMatrix d{Eigen::MatrixXcd::Zero(n, n), 0.0};
  d.rho(static_cast<Eigen::Index>(index), static_cast<Eigen::Index>(index)) = 1.0;
  return d;
}

DensityMatrix level_uniform(const Basis& basis, ops::Level level) {
  const auto idx = basis.indices(level);
  if (idx.empty()) throw DomainError(std::string("level ") + ops::level_name(level) + " is absent from the basis");
  const auto n = static_cast<Eigen::Index>(basis.size());
  DensityMatrix d{Eigen::MatrixXcd::Zero(n, n), 0.0};
  for (std::size_t i : idx) d.rho(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(i)) = 1.0 / idx.size();
  return d;
}

DensityMatrix maximally_mixed(const Basis& basis) {
  const auto n = static_cast<Eigen::Index>(basis.size());
  return {Eigen::MatrixXcd::Identity(n, n) / static_cast<double>(n), 0.0};
}

AtomicHamiltonian AtomicHamiltonian::fine(const ops::LevelScheme& scheme, const Basis& basis) {
  AtomicHamiltonian h{Eigen::VectorXd(basis.size())};
  for (std::size_t i = 0; i < basis.size(); ++i) h.diagonal(static_cast<Eigen::Index>(i)) = scheme.omega(basis[i].level);
  return h;
}

AtomicHamiltonian AtomicHamiltonian::hyperfine(const ops::HyperfineScheme& scheme, const Basis& basis) {
  AtomicHamiltonian h{Eigen::VectorXd(basis.size())};
  for (std::size_t i = 0; i < basis.size(); ++i) {
    h.diagonal(static_cast<Eigen::Index>(i)) = scheme.energy(basis[i].level, basis[i].F);
  }
  return h;
}

AtomicHamiltonian AtomicHamiltonian::zero(const Basis& basis) {
  return {Eigen::VectorXd::Zero(static_cast<Eigen::Index>(basis.size()))};
}

Eigen::MatrixXcd generator(const AtomicHamiltonian& H, const std::vector<Superoperator>& L) {
  const Eigen::Index n = H.diagonal.size();
  Eigen::MatrixXcd g = Eigen::MatrixXcd::Zero(n * n, n * n);
  for (const auto& op : L) {
    if (op.matrix.rows() != n * n) throw ContractViolation("superoperator size does not match the Hamiltonian");
    g += op.matrix;
  }
  for (Eigen::Index j = 0; j < n; ++j)
    for (Eigen::Index i = 0; i < n; ++i) g(i + n * j, i + n * j) += std::complex<double>(0.0, -(H.diagonal(i) - H.diagonal(j)));
  return g;
}

Trajectory propagate(const DensityMatrix& rho0, const AtomicHamiltonian& H, const std::vector<Superoperator>& L,
                     double t_final, double dt, const PropagateOptions& options) {
  if (!(dt > 0.0) || !std::isfinite(dt)) throw DomainError("time step must be positive");
  if (!(t_final >= 0.0) || !std::isfinite(t_final)) throw DomainError("final time must be >= 0");
  if (options.stride < 1) throw DomainError("output stride must be >= 1");
  const Eigen::Index n = rho0.rho.rows();
  if (rho0.rho.cols() != n || H.diagonal.size() != n) throw ContractViolation("initial state does not match the basis");

  const Eigen::MatrixXcd g = generator(H, L);
  Trajectory traj;
  const double max_rate = g.diagonal().cwiseAbs().maxCoeff();
  if (dt * max_rate > 0.1) {
    traj.warnings.push_back("dt * max rate = " + fmt(dt * max_rate) + " exceeds 0.1; accuracy may suffer");
  }

  const auto steps = static_cast<long long>(std::llround(t_final / dt));
  if (std::abs(steps * dt - t_final) > 1e-9 * std::max(1.0, t_final)) {
    traj.warnings.push_back("t_final is not a multiple of dt; integrating to " + fmt(steps * dt));
  }

  const double trace0 = rho0.trace();
  DensityMatrix state = rho0;
  auto record = [&](const DensityMatrix& s) {
    traj.worst_hermiticity = std::max(traj.worst_hermiticity, s.hermiticity_defect());
    traj.samples.push_back(s);
  };
  record(state);

  Vec y = vec(state.rho);
  for (long long k = 1; k <= steps; ++k) {
    const Vec k1 = g * y;
    const Vec k2 = g * (y + 0.5 * dt * k1);
    const Vec k3 = g * (y + 0.5 * dt * k2);
    const Vec k4 = g * (y + dt * k3);
    y += (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);

    Eigen::MatrixXcd rho = unvec(y, n);
    rho = 0.5 * (rho + rho.adjoint()).eval();
    y = vec(rho);
    state = {rho, k * dt};

    const double drift = std::abs(state.trace() - trace0);
    traj.worst_trace_drift = std::max(traj.worst_trace_drift, drift);
    if (drift > options.trace_tolerance) {
      throw NumericalAbort("trace drifted by " + fmt(drift) + " at t = " + fmt(state.t));
    }
    const double lowest = state.min_eigenvalue();
    traj.worst_eigenvalue = std::min(traj.worst_eigenvalue, lowest);
    if (lowest < options.negativity_floor) {
      throw NumericalAbort("density matrix eigenvalue " + fmt(lowest) + " at t = " + fmt(state.t));
    }
    if (k % options.stride == 0 || k == steps) record(state);
  }
  return traj;
}

SteadyStateResult steady_state(const AtomicHamiltonian& H, const std::vector<Superoperator>& L,
                               const SteadyStateOptions& options) {
  const Eigen::Index n = H.diagonal.size();
  const Eigen::MatrixXcd g = generator(H, L);
  Eigen::BDCSVD<Eigen::MatrixXcd> svd(g, Eigen::ComputeFullV);
  const auto& sv = svd.singularValues();
  const double cut = options.null_tolerance * std::max(sv(0), 1e-300);
  int null_dim = 0;
  for (Eigen::Index i = 0; i < sv.size(); ++i)
    if (sv(i) <= cut) ++null_dim;

  SteadyStateResult result;
  result.null_dimension = null_dim;
  if (null_dim == 1) {
    const Vec v = svd.matrixV().col(sv.size() - 1);
    Eigen::MatrixXcd rho = unvec(v, n);
    rho = 0.5 * (rho + rho.adjoint()).eval();
    const std::complex<double> tr = rho.trace();
    if (std::abs(tr) < 1e-300) throw NumericalAbort("steady state has zero trace");
    rho /= tr;
    result.state = DensityMatrix{rho, 0.0};
    result.residual = (g * vec(rho)).cwiseAbs().maxCoeff();
    return result;
  }
  if (null_dim == 0) throw NumericalAbort("generator has no null space; no steady state");
  if (!options.fallback) return result;

  // Degenerate: relax the supplied start state until it stops moving.
  const double max_rate = std::max(g.diagonal().cwiseAbs().maxCoeff(), 1e-300);
  const double dt = 0.05 / max_rate;
  const double chunk = 200 * dt;
  DensityMatrix state = *options.fallback;
  double t = 0.0;
  while (t < options.max_time) {
    const auto traj = propagate(state, H, L, chunk, dt, {1000000});
    state = traj.samples.back();
    t += chunk;
    const double deriv = (g * vec(state.rho)).cwiseAbs().maxCoeff();
    if (deriv < options.derivative_tolerance) {
      state.t = t;
      result.state = state;
      result.from_propagation = true;
      result.residual = deriv;
      return result;
    }
  }
  return result;
}

void write_trajectory_csv(std::ostream& out, const Basis& basis, const Trajectory& traj, bool populations_only) {
  const std::size_t n = basis.size();
  for (std::size_t i = 0; i < n; ++i) out << "# basis " << i << ": " << basis.label(i) << '\n';
  out << "t";
  if (populations_only) {
    for (std::size_t i = 0; i < n; ++i) out << ",p" << i;
  } else {
    for (std::size_t j = 0; j < n; ++j)
      for (std::size_t i = 0; i < n; ++i) out << ",r" << i << '_' << j << "_re,r" << i << '_' << j << "_im";
  }
  out << ",trace\n";
  for (const auto& s : traj.samples) {
    out << csv::format_double(s.t);
    const auto N = static_cast<Eigen::Index>(n);
    if (populations_only) {
      for (Eigen::Index i = 0; i < N; ++i) out << ',' << csv::format_double(s.rho(i, i).real());
    } else {
      for (Eigen::Index j = 0; j < N; ++j)
        for (Eigen::Index i = 0; i < N; ++i)
          out << ',' << csv::format_double(s.rho(i, j).real()) << ',' << csv::format_double(s.rho(i, j).imag());
    }
    out << ',' << csv::format_double(s.trace()) << '\n';
  }
}

}  // namespace vrelax::dyn
