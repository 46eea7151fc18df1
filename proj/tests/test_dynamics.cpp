#include <cmath>
#include <complex>
#include <sstream>

#include <doctest.h>

#include "oracles.hpp"
#include "vrelax/dynamics.hpp"

using namespace vrelax;
using angular::HalfInt;
using env::KMatrix;
using ops::Level;
using cplx = std::complex<double>;

namespace {

HalfInt h(int twice) { return HalfInt::from_twice(twice); }

ops::LevelScheme dline(double wb = 10.0, double wc = 9.9) {
  ops::LevelScheme s;
  s.J_b = h(3);
  s.J_c = h(1);
  s.J_d = h(1);
  s.omega_bd = wb;
  s.omega_cd = wc;
  return s;
}

// Pure state with amplitudes on every sublevel.
dyn::DensityMatrix spread_state(std::size_t n, bool excited_only, const ops::Basis& basis) {
  Eigen::VectorXcd psi(static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < n; ++i) {
    const bool on = !excited_only || basis[i].level != Level::d;
    psi(static_cast<Eigen::Index>(i)) = on ? cplx(1.0 + 0.1 * i, 0.3 * std::sin(1.0 + i)) : cplx(0.0);
  }
  psi.normalize();
  return {psi * psi.adjoint(), 0.0};
}

void check_invariants(const dyn::Trajectory& traj, double trace) {
  for (const auto& s : traj.samples) {
    CHECK(std::abs(s.trace() - trace) < 1e-9);
    CHECK(s.hermiticity_defect() < 1e-12);
  }
}

}  // namespace

TEST_CASE("free evolution rotates coherences") {
  const auto scheme = dline(1.0, 0.7);
  const auto basis = ops::Basis::fine(scheme);
  const auto H = dyn::AtomicHamiltonian::fine(scheme, basis);
  const auto rho0 = spread_state(basis.size(), false, basis);
  const auto traj = dyn::propagate(rho0, H, {}, 2.0, 1e-3, {500});
  REQUIRE(traj.samples.size() == 5);
  check_invariants(traj, 1.0);
  double worst = 0.0;
  for (std::size_t k = 1; k < traj.samples.size(); ++k) {
    const auto& s = traj.samples[k];
    for (Eigen::Index i = 0; i < s.rho.rows(); ++i)
      for (Eigen::Index j = 0; j < s.rho.cols(); ++j) {
        const cplx expect = rho0.rho(i, j) * std::polar(1.0, -(H.diagonal(i) - H.diagonal(j)) * s.t);
        worst = std::max(worst, std::abs(s.rho(i, j) - expect));
      }
  }
  CHECK(worst < 1e-9);
}

TEST_CASE("two-level reduction decays as exp(-2 Gamma t)") {
  ops::LevelScheme s;
  s.J_b = h(2);
  s.J_d = h(0);
  s.omega_bd = 5.0;
  s.dipole.S = 0.9;
  const auto r = ops::rates_spontaneous(s, env::ModeDensityModifier::vacuum());
  const auto basis = r.basis;
  const auto u = *basis.find(Level::b, h(2), h(0));
  const double gamma = r.upper_at(u, u).real();
  CHECK(gamma == doctest::Approx(0.9 * 2.0 / 3.0));
  const auto traj = dyn::propagate(dyn::single_sublevel(basis, u), dyn::AtomicHamiltonian::fine(s, basis),
                                   {ops::build_relaxation_superop(r)}, 1.0 / gamma, 1e-3 / gamma, {1000});
  const auto& last = traj.samples.back();
  CHECK(last.t == doctest::Approx(1.0 / gamma));
  CHECK(std::abs(last.rho(static_cast<Eigen::Index>(u), static_cast<Eigen::Index>(u)).real() - std::exp(-2.0)) < 1e-6);
  check_invariants(traj, 1.0);
}

TEST_CASE("D-line relaxation keeps trace, Hermiticity and positivity") {
  const auto scheme = dline();
  const auto r = ops::rates_spontaneous(scheme, env::ModeDensityModifier::planar_cavity(0.6));
  const auto basis = r.basis;
  const double gamma = 2.0 / 3.0;
  const auto traj = dyn::propagate(spread_state(basis.size(), true, basis), dyn::AtomicHamiltonian::fine(scheme, basis),
                                   {ops::build_relaxation_superop(r)}, 10.0 / gamma, 0.005, {100});
  CHECK(traj.warnings.empty());
  check_invariants(traj, 1.0);
  CHECK(traj.worst_eigenvalue > -1e-7);
  CHECK(traj.worst_trace_drift < 1e-9);
}

TEST_CASE("RK4 converges at fourth order") {
  const auto scheme = dline(1.0, 1.3);
  const auto basis = ops::Basis::fine(scheme);
  const auto H = dyn::AtomicHamiltonian::fine(scheme, basis);
  const KMatrix k = KMatrix::diagonal(0.4, 0.7, 0.2);
  const std::vector<ops::Superoperator> L{ops::build_relaxation_superop(ops::rates_fine(scheme, k, k)),
                                          ops::build_stimulated_superop(ops::rates_fine(scheme, k, k, ops::RateKind::Stimulated))};
  const auto rho0 = spread_state(basis.size(), false, basis);
  auto end = [&](double dt) { return dyn::propagate(rho0, H, L, 2.0, dt, {1000000}).samples.back().rho; };
  const double h0 = 0.1;
  const Eigen::MatrixXcd fine4 = end(h0 / 4), fine8 = end(h0 / 8);
  const Eigen::MatrixXcd ref = fine8 + (fine8 - fine4) / 15.0;
  const double e1 = (end(h0) - ref).cwiseAbs().maxCoeff();
  const double e2 = (end(h0 / 2) - ref).cwiseAbs().maxCoeff();
  CHECK(std::log2(e1 / e2) >= 3.8);
}

TEST_CASE("propagation aborts on trace loss and warns on stiff steps") {
  const auto scheme = dline();
  const auto basis = ops::Basis::fine(scheme);
  const auto n = static_cast<Eigen::Index>(basis.size());
  const ops::Superoperator leak{basis, -Eigen::MatrixXcd::Identity(n * n, n * n)};
  CHECK_THROWS_AS(dyn::propagate(dyn::maximally_mixed(basis), dyn::AtomicHamiltonian::zero(basis), {leak}, 1.0, 0.01),
                  NumericalAbort);
  const auto r = ops::rates_spontaneous(scheme, env::ModeDensityModifier::vacuum());
  const auto traj = dyn::propagate(dyn::maximally_mixed(basis), dyn::AtomicHamiltonian::zero(basis),
                                   {ops::build_relaxation_superop(r)}, 0.5, 0.25);
  CHECK_FALSE(traj.warnings.empty());
  CHECK_THROWS_AS(dyn::propagate(dyn::maximally_mixed(basis), dyn::AtomicHamiltonian::zero(basis), {}, 1.0, 0.0),
                  DomainError);
}

TEST_CASE("relaxation alone has a degenerate dark ground manifold") {
  const auto scheme = dline();
  const auto r = ops::rates_spontaneous(scheme, env::ModeDensityModifier::vacuum());
  const auto basis = r.basis;
  const auto H = dyn::AtomicHamiltonian::fine(scheme, basis);
  const std::vector<ops::Superoperator> L{ops::build_relaxation_superop(r)};
  const auto plain = dyn::steady_state(H, L);
  CHECK(plain.null_dimension == 4);
  CHECK_FALSE(plain.state);

  dyn::SteadyStateOptions opts;
  opts.fallback = dyn::level_uniform(basis, Level::b);
  const auto relaxed = dyn::steady_state(H, L, opts);
  REQUIRE(relaxed.state);
  CHECK(relaxed.from_propagation);
  CHECK(relaxed.residual < 1e-12);
  const auto& rho = relaxed.state->rho;
  for (std::size_t i = 0; i < basis.size(); ++i)
    for (std::size_t j = 0; j < basis.size(); ++j) {
      const auto v = std::abs(rho(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)));
      if (i == j && basis[i].level == Level::d) CHECK(v == doctest::Approx(0.5).epsilon(1e-9));
      else CHECK(v < 1e-10);
    }
}

TEST_CASE("isotropic pump steady state matches the population rate equations") {
  const double N = 50.0;
  const auto scheme = dline();
  const auto vac = env::ModeDensityModifier::vacuum();
  const auto rr = ops::rates_spontaneous(scheme, vac);
  const auto rs = ops::rates_stimulated(scheme, env::AngularDistribution::isotropic(N), vac);
  const auto& B = rr.basis;
  const auto H = dyn::AtomicHamiltonian::fine(scheme, B);
  const std::vector<ops::Superoperator> L{ops::build_relaxation_superop(rr), ops::build_stimulated_superop(rs)};
  const auto ss = dyn::steady_state(H, L);
  REQUIRE(ss.null_dimension == 1);
  REQUIRE(ss.state);
  CHECK(ss.residual < 1e-10);

  // Populations only: W(u -> d) = 2 S (K_R + K_S) C^2, W(d -> u) = 2 S K_S C^2.
  const auto n = static_cast<Eigen::Index>(B.size());
  Eigen::MatrixXd W = Eigen::MatrixXd::Zero(n, n);
  const double kr = 2.0 / 3, ks = 2.0 * N / 3;
  for (std::size_t u : B.upper_indices())
    for (std::size_t d : B.indices(Level::d)) {
      const int sig = B[u].M.twice() - B[d].M.twice();
      if (std::abs(sig) > 2) continue;
      const double c2 = std::pow(oracle::cg(B[d].F.twice(), B[d].M.twice(), 2, sig, B[u].F.twice(), B[u].M.twice()), 2);
      const auto ui = static_cast<Eigen::Index>(u), di = static_cast<Eigen::Index>(d);
      W(di, ui) += 2 * (kr + ks) * c2;
      W(ui, ui) -= 2 * (kr + ks) * c2;
      W(ui, di) += 2 * ks * c2;
      W(di, di) -= 2 * ks * c2;
    }
  Eigen::MatrixXd A = W;
  A.row(0).setOnes();
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(n);
  rhs(0) = 1.0;
  const Eigen::VectorXd p = A.fullPivLu().solve(rhs);
  CHECK((ss.state->populations() - p).cwiseAbs().maxCoeff() < 1e-10);
  const auto d0 = B.indices(Level::d).front();
  const auto u0 = B.upper_indices().front();
  CHECK(p(static_cast<Eigen::Index>(u0)) / p(static_cast<Eigen::Index>(d0)) == doctest::Approx(N / (N + 1)));
}

TEST_CASE("cos^2 pump coherence exists only through the b-c coefficients") {
  const auto scheme = dline();
  const auto vac = env::ModeDensityModifier::vacuum();
  const auto rr = ops::rates_spontaneous(scheme, vac);
  const auto rs = ops::rates_stimulated(scheme, env::AngularDistribution::axisymmetric_cos2(1.0), vac);
  const auto& B = rr.basis;
  const auto H = dyn::AtomicHamiltonian::fine(scheme, B);
  auto coherence = [&](const ops::RateSet& s) {
    const auto ss = dyn::steady_state(H, {ops::build_relaxation_superop(rr), ops::build_stimulated_superop(s)});
    REQUIRE(ss.state);
    double worst = 0.0;
    for (int m : {-1, 1}) {
      const auto b = static_cast<Eigen::Index>(*B.find(Level::b, h(3), h(m)));
      const auto c = static_cast<Eigen::Index>(*B.find(Level::c, h(1), h(m)));
      worst = std::max(worst, std::abs(ss.state->rho(b, c)));
    }
    return worst;
  };
  CHECK(coherence(rs) > 1e-3);

  auto zeroed = rs;
  for (auto& [key, v] : zeroed.upper)
    if (B[key.first].level != B[key.second].level) v = 0.0;
  for (auto& [key, v] : zeroed.feeding)
    if (B[key[0]].level != B[key[2]].level) v = 0.0;
  CHECK_NOTHROW(zeroed.check_consistency());
  CHECK(coherence(zeroed) < 1e-12);
}

TEST_CASE("trajectory CSV layout") {
  ops::LevelScheme s;
  s.J_b = h(2);
  s.J_d = h(0);
  const auto basis = ops::Basis::fine(s);
  const auto traj = dyn::propagate(dyn::maximally_mixed(basis), dyn::AtomicHamiltonian::zero(basis), {}, 0.1, 0.05);
  std::ostringstream full, pops;
  dyn::write_trajectory_csv(full, basis, traj, false);
  dyn::write_trajectory_csv(pops, basis, traj, true);
  CHECK(full.str().find("t,r0_0_re,r0_0_im,r1_0_re") != std::string::npos);
  CHECK(pops.str().find("t,p0,p1,p2,p3,trace\n0,0.25,0.25,0.25,0.25,1\n") != std::string::npos);
}
