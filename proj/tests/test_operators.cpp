#include <cmath>
#include <complex>
#include <numbers>
#include <random>
#include <sstream>

#include <doctest.h>

#include "oracles.hpp"
#include "vrelax/operators.hpp"

using namespace vrelax;
using angular::HalfInt;
using env::KMatrix;
using ops::Level;
using cplx = std::complex<double>;

namespace {

HalfInt h(int twice) { return HalfInt::from_twice(twice); }

ops::LevelScheme dline(double S = 1.0) {
  ops::LevelScheme s;
  s.J_b = h(3);
  s.J_c = h(1);
  s.J_d = h(1);
  s.omega_bd = 10.0;
  s.omega_cd = 9.9;
  s.dipole.S = S;
  return s;
}

Eigen::MatrixXcd kron(const Eigen::MatrixXcd& a, const Eigen::MatrixXcd& b) {
  Eigen::MatrixXcd out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index j = 0; j < a.cols(); ++j) out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
  return out;
}

// vec(A rho B) = (B^T kron A) vec(rho) for column-major vec.
Eigen::MatrixXcd sandwich(const Eigen::MatrixXcd& a, const Eigen::MatrixXcd& b) { return kron(b.transpose(), a); }

Eigen::MatrixXcd random_hermitian(Eigen::Index n, std::mt19937_64& rng) {
  std::normal_distribution<double> g;
  Eigen::MatrixXcd m(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j) m(i, j) = cplx(g(rng), g(rng));
  return m + m.adjoint();
}

double max_upper_off_diagonal(const ops::RateSet& r) {
  double worst = 0.0;
  for (const auto& [key, v] : r.upper)
    if (key.first != key.second) worst = std::max(worst, std::abs(v));
  return worst;
}

}  // namespace

TEST_CASE("basis ordering and labels") {
  const auto basis = ops::Basis::fine(dline());
  REQUIRE(basis.size() == 8);
  CHECK(basis[0].level == Level::d);
  CHECK(basis[2].level == Level::c);
  CHECK(basis[4].level == Level::b);
  CHECK(basis.label(4) == "b M=-3/2");
  CHECK(basis.find(Level::b, h(3), h(1)) == std::optional<std::size_t>(6));
  CHECK(basis.find(Level::c, h(3), h(1)) == basis.find(Level::c, h(1), h(1)));
  CHECK_FALSE(basis.find(Level::c, h(1), h(3)));
  CHECK(basis.upper_indices().size() == 6);
}

TEST_CASE("level scheme validation") {
  auto s = dline();
  CHECK_NOTHROW(s.validate());
  s.omega_bd = 0.0;
  CHECK_THROWS_AS(s.validate(), DomainError);
  s = dline();
  s.J_b = h(7);
  CHECK_THROWS_AS(s.validate(), DomainError);
  s = dline();
  s.J_b = h(0);
  s.J_d = h(0);
  s.J_c.reset();
  CHECK_THROWS_AS(s.validate(), DomainError);
  s = dline();
  s.dipole.mode = ops::DipoleMode::Explicit;
  s.dipole.alkali = true;
  s.dipole.mu_bd = 2.0;
  s.dipole.mu_cd = std::sqrt(2.0);
  CHECK_NOTHROW(s.validate());
  s.dipole.mu_cd = 1.0;
  CHECK_THROWS_AS(s.validate(), DomainError);
}

TEST_CASE("explicit dipole scale") {
  auto s = dline();
  s.dipole.mode = ops::DipoleMode::Explicit;
  s.dipole.mu_bd = 2.0;
  s.dipole.mu_cd = 0.5;
  s.dipole.prefactor = 3.0;
  CHECK(s.s_factor(Level::b, Level::c) == doctest::Approx(3.0 * 2.0 * 0.5 * std::pow(9.9, 3) / std::sqrt(8.0)));
  CHECK(s.s_factor(Level::c, Level::b) == doctest::Approx(3.0 * 2.0 * 0.5 * std::pow(10.0, 3) / std::sqrt(8.0)));
  CHECK(s.s_factor(Level::b, Level::b) == doctest::Approx(3.0 * 4.0 * 1000.0 / 4.0));
}

TEST_CASE("explicit dipoles: b-c coefficients scale with the second transition frequency cubed") {
  auto s = dline();
  s.dipole.mode = ops::DipoleMode::Explicit;
  s.dipole.alkali = true;
  s.dipole.mu_bd = 2.0;
  s.dipole.mu_cd = std::sqrt(2.0);
  s.omega_bd = 10.0;
  s.omega_cd = 8.0;
  const auto r = ops::rates_spontaneous(s, env::ModeDensityModifier::vacuum());
  int compared = 0;
  for (const auto& [key, v] : r.feeding) {
    if (r.basis[key[0]].level != Level::b || r.basis[key[2]].level != Level::c || std::abs(v) < 1e-12) continue;
    const cplx mirror = r.feeding_at(key[2], key[3], key[0], key[1]);
    CHECK(std::abs(v / mirror - std::pow(8.0 / 10.0, 3)) < 1e-12);
    ++compared;
  }
  CHECK(compared > 0);
}

TEST_CASE("vacuum D-line rates are diagonal and equal") {
  const auto r = ops::rates_spontaneous(dline(0.7), env::ModeDensityModifier::vacuum());
  CHECK_NOTHROW(r.check_consistency());
  CHECK(max_upper_off_diagonal(r) < 1e-15);
  for (std::size_t u : r.basis.upper_indices()) CHECK(r.upper_at(u, u).real() == doctest::Approx(0.7 * 2.0 / 3.0));
  CHECK(r.ground.empty());
}

TEST_CASE("closed forms for diagonal K") {
  const KMatrix k = KMatrix::diagonal(0.3, 1.1, 0.05);
  const double S = 1.3;
  const auto r = ops::rates_fine(dline(S), k, k);
  const auto& B = r.basis;
  auto g = [&](Level a, int ma, Level b, int mb) {
    const HalfInt ja = a == Level::b ? h(3) : h(1), jb = b == Level::b ? h(3) : h(1);
    return r.upper_at(*B.find(a, ja, h(ma)), *B.find(b, jb, h(mb)));
  };
  const double km = 0.3, k0 = 1.1, kp = 0.05, r2 = std::numbers::sqrt2;
  CHECK(g(Level::b, 3, Level::b, 3).real() == doctest::Approx(S * kp));
  CHECK(g(Level::b, -3, Level::b, -3).real() == doctest::Approx(S * km));
  CHECK(g(Level::b, 1, Level::b, 1).real() == doctest::Approx(S * (kp + 2 * k0) / 3));
  CHECK(g(Level::b, -1, Level::b, -1).real() == doctest::Approx(S * (km + 2 * k0) / 3));
  CHECK(g(Level::c, 1, Level::c, 1).real() == doctest::Approx(S * (2 * kp + k0) / 3));
  CHECK(g(Level::c, -1, Level::c, -1).real() == doctest::Approx(S * (2 * km + k0) / 3));
  CHECK(g(Level::b, 1, Level::c, 1).real() == doctest::Approx(S * r2 / 3 * (k0 - kp)));
  CHECK(g(Level::b, -1, Level::c, -1).real() == doctest::Approx(S * r2 / 3 * (km - k0)));
  CHECK(g(Level::c, 1, Level::b, 1) == g(Level::b, 1, Level::c, 1));
}

TEST_CASE("relaxation superoperator equals the channel-sum Lindblad form") {
  const auto scheme = dline();
  const auto r = ops::rates_spontaneous(scheme, env::ModeDensityModifier::vacuum());
  const auto L = ops::build_relaxation_superop(r);
  const auto& B = r.basis;
  const auto n = static_cast<Eigen::Index>(B.size());

  Eigen::MatrixXcd ref = Eigen::MatrixXcd::Zero(n * n, n * n);
  const Eigen::MatrixXcd id = Eigen::MatrixXcd::Identity(n, n);
  const double k = 2.0 / 3.0;
  for (int sig = -1; sig <= 1; ++sig) {
    Eigen::MatrixXcd a = Eigen::MatrixXcd::Zero(n, n);
    for (std::size_t u = 0; u < B.size(); ++u) {
      if (B[u].level == Level::d) continue;
      for (std::size_t d : B.indices(Level::d)) {
        if (B[u].M.twice() - B[d].M.twice() != 2 * sig) continue;
        a(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(u)) =
            oracle::cg(B[d].F.twice(), B[d].M.twice(), 2, 2 * sig, B[u].F.twice(), B[u].M.twice());
      }
    }
    const Eigen::MatrixXcd ada = a.adjoint() * a;
    ref += k * (2.0 * sandwich(a, a.adjoint()) - sandwich(ada, id) - sandwich(id, ada));
  }
  CHECK((L.matrix - ref).cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("superoperators preserve Hermiticity and trace") {
  std::mt19937_64 rng(7);
  const KMatrix k = KMatrix::diagonal(0.2, 0.9, 0.4);
  auto scheme = dline();
  const auto rs = ops::rates_fine(scheme, k, k.scaled(1.5), ops::RateKind::Stimulated);
  const auto rr = ops::rates_fine(scheme, k, k.scaled(1.5));
  CHECK_NOTHROW(rs.check_consistency());
  for (const auto& op : {ops::build_relaxation_superop(rr), ops::build_stimulated_superop(rs)}) {
    for (int trial = 0; trial < 5; ++trial) {
      const Eigen::MatrixXcd rho = random_hermitian(8, rng);
      const Eigen::MatrixXcd out = op.apply(rho);
      CHECK((out - out.adjoint()).cwiseAbs().maxCoeff() < 1e-13);
      CHECK(std::abs(out.trace()) < 1e-13);
    }
  }
}

TEST_CASE("single excited sublevel decays at twice its rate") {
  const auto r = ops::rates_fine(dline(), KMatrix::diagonal(0.3, 0.5, 0.7), KMatrix::diagonal(0.3, 0.5, 0.7));
  const auto L = ops::build_relaxation_superop(r);
  const auto& B = r.basis;
  const auto u = *B.find(Level::b, h(3), h(1));
  Eigen::MatrixXcd rho = Eigen::MatrixXcd::Zero(8, 8);
  rho(static_cast<Eigen::Index>(u), static_cast<Eigen::Index>(u)) = 1.0;
  const Eigen::MatrixXcd d = L.apply(rho);
  const double gamma = r.upper_at(u, u).real();
  CHECK(d(static_cast<Eigen::Index>(u), static_cast<Eigen::Index>(u)).real() == doctest::Approx(-2 * gamma));
  double fed = 0.0;
  for (std::size_t g : B.indices(Level::d)) {
    const auto gi = static_cast<Eigen::Index>(g);
    CHECK(d(gi, gi).real() == doctest::Approx(2 * r.feeding_at(u, g, u, g).real()));
    fed += d(gi, gi).real();
  }
  CHECK(fed == doctest::Approx(2 * gamma));
}

TEST_CASE("stimulated rates") {
  const auto iso = env::AngularDistribution::isotropic(2.0);
  const auto vac = env::ModeDensityModifier::vacuum();
  const auto r = ops::rates_stimulated(dline(0.5), iso, vac);
  CHECK_NOTHROW(r.check_consistency());
  for (std::size_t u : r.basis.upper_indices()) CHECK(r.upper_at(u, u).real() == doctest::Approx(2.0 / 3 * 2.0 * 0.5));
  CHECK(max_upper_off_diagonal(r) < 1e-14);

  SUBCASE("ground depopulation equals the direct sum over upper sublevels") {
    const auto L = ops::build_stimulated_superop(r);
    const auto& B = r.basis;
    const auto n = static_cast<Eigen::Index>(B.size());
    for (std::size_t d : B.indices(Level::d)) {
      double sum = 0.0;
      for (std::size_t u : B.upper_indices()) {
        const int sig = B[u].M.twice() - B[d].M.twice();
        if (std::abs(sig) > 2) continue;
        const double c = oracle::cg(B[d].F.twice(), B[d].M.twice(), 2, sig, B[u].F.twice(), B[u].M.twice());
        sum += 0.5 * (2.0 * 2.0 / 3) * c * c;
      }
      const auto di = static_cast<Eigen::Index>(d);
      CHECK(r.ground_at(d, d).real() == doctest::Approx(sum));
      CHECK(L.matrix(di + n * di, di + n * di).real() == doctest::Approx(-2 * sum));
    }
  }

  SUBCASE("emission and absorption blocks share one table") {
    const auto rc = ops::rates_stimulated(dline(0.5), env::AngularDistribution::axisymmetric_cos2(2.0), vac);
    const auto L = ops::build_stimulated_superop(rc);
    const auto& B = rc.basis;
    const auto n = static_cast<Eigen::Index>(B.size());
    double worst = 0.0, largest = 0.0;
    for (std::size_t u1 : B.upper_indices())
      for (std::size_t u2 : B.upper_indices())
        for (std::size_t d1 : B.indices(Level::d))
          for (std::size_t d2 : B.indices(Level::d)) {
            const auto em = L.matrix(static_cast<Eigen::Index>(d1 + n * d2), static_cast<Eigen::Index>(u1 + n * u2));
            const auto ab = L.matrix(static_cast<Eigen::Index>(u1 + n * u2), static_cast<Eigen::Index>(d1 + n * d2));
            worst = std::max(worst, std::abs(em - ab));
            largest = std::max(largest, std::abs(em));
          }
    CHECK(largest > 0.1);
    CHECK(worst < 1e-15);
  }

  SUBCASE("cos^2 field gives the closed-form b-c coefficient") {
    const auto rc = ops::rates_stimulated(dline(1.0), env::AngularDistribution::axisymmetric_cos2(1.0), vac);
    const auto& B = rc.basis;
    const auto b = *B.find(Level::b, h(3), h(1)), c = *B.find(Level::c, h(1), h(1));
    CHECK(rc.upper_at(b, c).real() == doctest::Approx(-2 * std::numbers::sqrt2 / 45));
  }

  SUBCASE("dark field gives a zero map") {
    const auto r0 = ops::rates_stimulated(dline(), env::AngularDistribution::isotropic(0.0), vac);
    CHECK(ops::build_stimulated_superop(r0).matrix.cwiseAbs().maxCoeff() == 0.0);
  }

  CHECK_THROWS_AS(ops::build_stimulated_superop(ops::rates_spontaneous(dline(), vac)), ContractViolation);
}

TEST_CASE("consistency check catches a broken table") {
  auto r = ops::rates_spontaneous(dline(), env::ModeDensityModifier::vacuum());
  r.upper.begin()->second += 0.1;
  CHECK_THROWS_AS(r.check_consistency(), ContractViolation);
}

TEST_CASE("interference degree") {
  const auto vac = env::ModeDensityModifier::vacuum();
  const auto iso = ops::interference_report(ops::rates_stimulated(dline(), env::AngularDistribution::isotropic(1.0), vac));
  REQUIRE(iso.entries.size() == 2);
  for (const auto& e : iso.entries) CHECK(std::abs(*e.p) < 1e-13);
  CHECK(iso.off_diagonal.empty());

  const KMatrix paper = KMatrix::diagonal(4.0 / 75, 4.0 / 15, 4.0 / 75);
  const auto rep = ops::interference_report(ops::rates_fine(dline(), paper, paper, ops::RateKind::Stimulated));
  CHECK(*rep.entries[0].p == doctest::Approx(-16 * std::numbers::sqrt2 / std::sqrt(44.0 * 28.0)));
  CHECK(*rep.entries[1].p == doctest::Approx(16 * std::numbers::sqrt2 / std::sqrt(44.0 * 28.0)));

  const auto cav = ops::interference_report(ops::rates_spontaneous(dline(), env::ModeDensityModifier::planar_cavity(0.99)));
  CHECK(*cav.entries[1].p > 0.98);

  const auto dark = ops::interference_report(ops::rates_stimulated(dline(), env::AngularDistribution::isotropic(0.0), vac));
  CHECK_FALSE(dark.entries[0].p.has_value());
}

TEST_CASE("rates CSV layout") {
  const auto r = ops::rates_spontaneous(dline(), env::ModeDensityModifier::vacuum());
  std::ostringstream out;
  ops::write_rates_csv(out, r, "R-");
  std::istringstream in(out.str());
  std::string line;
  std::getline(in, line);
  CHECK(line == "kind,j1,F1,M1,j2,F2,M2,Md1,Md2,re,im");
  std::getline(in, line);
  CHECK(line.rfind("R-upper,", 0) == 0);
}

// ---- hyperfine ----

namespace {

ops::HyperfineScheme sodium(int twice_I) {
  ops::HyperfineScheme hs;
  hs.fine = dline();
  hs.I = h(twice_I);
  return hs;
}

// Amplitude of one emission channel built from the single-photon coupling,
// with its own complex phase (-1)^{I+1-F-Fd} = e^{i pi (I+1-F-Fd)}.
cplx amplitude(const ops::HyperfineScheme& hs, const ops::Sublevel& u, const ops::Sublevel& d) {
  const int I = hs.I.twice(), J = hs.fine.J(u.level).twice(), Jd = hs.fine.J_d.twice();
  const int F = u.F.twice(), Fd = d.F.twice();
  const int sig = u.M.twice() - d.M.twice();
  if (std::abs(sig) > 2) return 0.0;
  const double x = 0.5 * (I + 2 - F - Fd);
  const cplx phase = std::polar(1.0, std::numbers::pi * x);
  return phase * std::sqrt(Fd + 1.0) * oracle::racah_w(J, F, Jd, Fd, I, 2) *
         oracle::cg(Fd, d.M.twice(), 2, sig, F, u.M.twice()) * std::sqrt(hs.fine.dipole.S * (J + 1.0));
}

}  // namespace

TEST_CASE("hyperfine coefficients equal the direct coupling-product sum") {
  const auto hs = sodium(3);
  const double r = 0.9;
  const auto cav = env::ModeDensityModifier::planar_cavity(r);
  const KMatrix k = env::k_spontaneous(cav, 1.0);
  const auto rates = ops::rates_hyperfine(hs, k, k);
  CHECK_NOTHROW(rates.check_consistency());

  // Cavity K from the sphere integral with each channel weighted by its relative density.
  const Eigen::Matrix3cd kv = oracle::riemann_k([](double, double, int) { return 1.0; }, 20000, 8);
  auto kgrid = [&](int s1, int s2) {
    return std::sqrt(cav.relative_density(1.0, angular::Sigma::from(s1)) *
                     cav.relative_density(1.0, angular::Sigma::from(s2))) *
           kv(s1 + 1, s2 + 1);
  };

  const auto& B = rates.basis;
  double worst = 0.0;
  for (std::size_t u1 : B.upper_indices())
    for (std::size_t u2 : B.upper_indices()) {
      cplx sum = 0.0;
      for (std::size_t d1 : B.indices(Level::d))
        for (std::size_t d2 : B.indices(Level::d)) {
          const int s1 = (B[u1].M.twice() - B[d1].M.twice()) / 2, s2 = (B[u2].M.twice() - B[d2].M.twice()) / 2;
          if (std::abs(s1) > 1 || std::abs(s2) > 1) continue;
          const cplx c = amplitude(hs, B[u1], B[d1]) * std::conj(amplitude(hs, B[u2], B[d2])) * kgrid(s1, s2);
          worst = std::max(worst, std::abs(c - rates.feeding_at(u1, d1, u2, d2)));
          if (d1 == d2) sum += c;
        }
      worst = std::max(worst, std::abs(sum - rates.upper_at(u1, u2)));
    }
  CHECK(worst < 1e-8);

  // The axial cavity keeps M but opens b-c interference, in particular between equal F.
  bool equal_f = false;
  for (const auto& [key, v] : rates.upper) {
    const auto& a = B[key.first];
    const auto& b = B[key.second];
    if (std::abs(v) < 1e-12) continue;
    CHECK(a.M == b.M);
    if (a.level != b.level && a.F == b.F && std::abs(v) > 1e-3) equal_f = true;
  }
  CHECK(equal_f);
}

TEST_CASE("hyperfine vacuum rates are diagonal with value 2S/3") {
  for (int I : {0, 1, 2, 3, 5}) {
    const auto hs = sodium(I);
    const KMatrix k = env::k_spontaneous(env::ModeDensityModifier::vacuum(), 1.0);
    const auto r = ops::rates_hyperfine(hs, k, k);
    CHECK(max_upper_off_diagonal(r) < 1e-13);
    for (std::size_t u : r.basis.upper_indices()) CHECK(r.upper_at(u, u).real() == doctest::Approx(2.0 / 3));
  }
}

TEST_CASE("zero nuclear spin reduces to fine structure") {
  const auto hs = sodium(0);
  const KMatrix k = KMatrix::diagonal(0.25, 0.8, 0.1);
  const auto hf = ops::rates_hyperfine(hs, k, k.scaled(2.0), ops::RateKind::Stimulated);
  const auto fs = ops::rates_fine(hs.fine, k, k.scaled(2.0), ops::RateKind::Stimulated);
  REQUIRE(hf.basis.size() == fs.basis.size());
  for (std::size_t i = 0; i < fs.basis.size(); ++i) {
    CHECK(hf.basis[i].level == fs.basis[i].level);
    CHECK(hf.basis[i].M == fs.basis[i].M);
  }
  REQUIRE(hf.upper.size() == fs.upper.size());
  REQUIRE(hf.feeding.size() == fs.feeding.size());
  REQUIRE(hf.ground.size() == fs.ground.size());
  double worst = 0.0;
  for (const auto& [key, v] : fs.upper) worst = std::max(worst, std::abs(v - hf.upper_at(key.first, key.second)));
  for (const auto& [key, v] : fs.feeding)
    worst = std::max(worst, std::abs(v - hf.feeding_at(key[0], key[1], key[2], key[3])));
  for (const auto& [key, v] : fs.ground) worst = std::max(worst, std::abs(v - hf.ground_at(key.first, key.second)));
  CHECK(worst < 1e-14);
}
