#include "vrelax/commands.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numbers>
#include <optional>
#include <ostream>
#include <random>
#include <sstream>

#include "vrelax/csv.hpp"
#include "vrelax/environment.hpp"
#include "vrelax/operators.hpp"

namespace vrelax::cli {

namespace {

using angular::HalfInt;
using csv::format_double;
using ops::Level;

struct Scenario {
  ops::Basis basis;
  dyn::AtomicHamiltonian H;
  ops::LevelScheme scheme;
  env::KMatrix KR_b, KR_c;
  std::optional<env::KMatrix> KS_b, KS_c;
  ops::RateSet R;
  std::optional<ops::RateSet> S;
};

Scenario build(const cfg::ScenarioConfig& config) {
  Scenario s;
  s.scheme = config.level_scheme();
  const ops::AssemblyOptions assembly{config.run.threads};
  const auto mod = config.modifier();
  const double wc = s.scheme.has_c() ? s.scheme.omega_cd : s.scheme.omega_bd;

  s.KR_b = env::k_spontaneous(mod, s.scheme.omega_bd);
  s.KR_c = env::k_spontaneous(mod, wc);
  if (auto k = config.injected_k()) {
    s.KS_b = *k;
    s.KS_c = *k;
  } else if (auto dist = config.distribution()) {
    s.KS_b = env::k_stimulated(*dist, mod, s.scheme.omega_bd, config.quadrature());
    s.KS_c = env::k_stimulated(*dist, mod, wc, config.quadrature());
  }

  if (config.hyperfine()) {
    const auto hs = config.hyperfine_scheme();
    s.basis = ops::Basis::hyperfine(hs);
    s.H = dyn::AtomicHamiltonian::hyperfine(hs, s.basis);
    s.R = ops::rates_hyperfine(hs, s.KR_b, s.KR_c, ops::RateKind::Spontaneous, assembly);
    if (s.KS_b) s.S = ops::rates_hyperfine(hs, *s.KS_b, *s.KS_c, ops::RateKind::Stimulated, assembly);
  } else {
    s.basis = ops::Basis::fine(s.scheme);
    s.H = dyn::AtomicHamiltonian::fine(s.scheme, s.basis);
    s.R = ops::rates_fine(s.scheme, s.KR_b, s.KR_c, ops::RateKind::Spontaneous, assembly);
    if (s.KS_b) s.S = ops::rates_fine(s.scheme, *s.KS_b, *s.KS_c, ops::RateKind::Stimulated, assembly);
  }
  return s;
}

std::vector<ops::Superoperator> operators_for(const cfg::ScenarioConfig& config, const Scenario& s) {
  std::vector<ops::Superoperator> L;
  if (config.includes("relaxation")) L.push_back(ops::build_relaxation_superop(s.R));
  if (config.includes("stimulated") && s.S) L.push_back(ops::build_stimulated_superop(*s.S));
  return L;
}

void write_header(std::ostream& out, const cfg::ScenarioConfig& config, const std::string& command) {
  out << "# vrelax " << command << '\n';
  out << "# normalization: K(sigma,sigma') is taken with dOmega/4pi, so vacuum K = (2/3) I and isotropic N gives (2N/3) I\n";
  if (config.system.dipole == "explicit") {
    out << "# rate scale: S_j1j2 = prefactor * mu_j1 * mu_j2 * omega_j2^3 / sqrt((2J1+1)(2J2+1)), prefactor = "
        << format_double(config.system.prefactor) << '\n';
  } else {
    out << "# rate scale: every S_j1j2 = S = " << format_double(config.system.S) << " (1/s)\n";
  }
  if (config.environment.field != "none") {
    out << "# photon number scale: N = " << format_double(config.environment.N) << " (field = " << config.environment.field
        << ")\n";
  }
  out << "# scenario:\n";
  std::istringstream ini(cfg::serialize(config));
  for (std::string line; std::getline(ini, line);)
    // Worker count never changes results, so it stays out of the output.
    if (!line.empty() && line.rfind("threads =", 0) != 0) out << "#   " << line << '\n';
}

void write_k_rows(std::ostream& out, const std::string& name, char level, double omega, const env::KMatrix& k) {
  for (auto a : angular::all_sigmas()) {
    for (auto b : angular::all_sigmas()) {
      out << name << ',' << level << ',' << format_double(omega) << ',' << a.value() << ',' << b.value() << ','
          << format_double(k(a, b).real()) << ',' << format_double(k(a, b).imag()) << '\n';
    }
  }
}

void write_interference(std::ostream& out, const std::string& tag, const ops::RateSet& rates) {
  const auto report = ops::interference_report(rates);
  const bool hf = rates.basis.is_hyperfine();
  for (const auto& e : report.entries) {
    out << "# interference " << tag << ": ";
    if (hf) out << "F=" << e.F.str() << ' ';
    out << "M=" << e.M.str() << " p=" << (e.p ? format_double(*e.p) : std::string("undefined")) << '\n';
  }
  out << "# off-diagonal " << tag << ": " << report.off_diagonal.size() << " nonzero coefficients\n";
  for (const auto& o : report.off_diagonal) {
    out << "#   " << rates.basis.label(o.u1) << " / " << rates.basis.label(o.u2)
        << " |Gamma|=" << format_double(std::abs(o.value)) << '\n';
  }
}

int config_line(const cfg::ScenarioConfig& config, const std::string& key) {
  auto it = config.lines.find(key);
  return it == config.lines.end() ? 0 : it->second;
}

}  // namespace

dyn::DensityMatrix initial_state(const cfg::ScenarioConfig& config, const ops::Basis& basis) {
  const std::string& spec = config.run.initial;
  const int line = config_line(config, "run.initial");
  auto bad = [&](const std::string& why) -> ConfigError {
    return ConfigError("run.initial: '" + spec + "': " + why, line);
  };
  auto level_of = [&](const std::string& s) {
    if (s == "b") return Level::b;
    if (s == "c") return Level::c;
    if (s == "d") return Level::d;
    throw bad("level must be b, c or d");
  };
  const auto parts = csv::split(spec, ':');
  try {
    if (spec == "maximally-mixed") return dyn::maximally_mixed(basis);
    if (spec == "thermal-ground") return dyn::level_uniform(basis, Level::d);
    if (parts.size() == 2 && parts[0] == "level-uniform") return dyn::level_uniform(basis, level_of(parts[1]));
    if (parts[0] == "single") {
      const bool hf = basis.is_hyperfine();
      if (parts.size() != (hf ? 4u : 3u)) throw bad(hf ? "expected single:<level>:<F>:<M>" : "expected single:<level>:<M>");
      const Level level = level_of(parts[1]);
      const HalfInt M = HalfInt::parse(parts.back());
      const HalfInt F = hf ? HalfInt::parse(parts[2]) : HalfInt{};
      const auto idx = basis.find(level, F, M);
      if (!idx) throw bad("no such sublevel");
      return dyn::single_sublevel(basis, *idx);
    }
  } catch (const DomainError& e) {
    throw bad(e.what());
  }
  throw bad("unknown initial state");
}

int cmd_kmatrix(const cfg::ScenarioConfig& config, std::ostream& out, std::ostream&) {
  const Scenario s = build(config);
  write_header(out, config, "kmatrix");
  out << "# KR provenance: " << env::to_string(s.KR_b.provenance) << " (" << config.environment.modifier << ")\n";
  if (s.KS_b) out << "# KS provenance: " << env::to_string(s.KS_b->provenance) << '\n';
  out << "matrix,level,omega,sigma,sigma_prime,re,im\n";
  write_k_rows(out, "KR", 'b', s.scheme.omega_bd, s.KR_b);
  if (s.scheme.has_c()) write_k_rows(out, "KR", 'c', s.scheme.omega_cd, s.KR_c);
  if (s.KS_b) {
    write_k_rows(out, "KS", 'b', s.scheme.omega_bd, *s.KS_b);
    if (s.scheme.has_c()) write_k_rows(out, "KS", 'c', s.scheme.omega_cd, *s.KS_c);
  }
  return kOk;
}

int cmd_rates(const cfg::ScenarioConfig& config, std::ostream& out, std::ostream&) {
  const Scenario s = build(config);
  write_header(out, config, "rates");
  out << "# kinds: R- spontaneous relaxation, S- stimulated; S-feeding is also the absorption table\n";
  ops::write_rates_csv(out, s.R, "R-", true);
  if (s.S) ops::write_rates_csv(out, *s.S, "S-", false);
  write_interference(out, "R", s.R);
  if (s.S) write_interference(out, "S", *s.S);
  return kOk;
}

int cmd_superop(const cfg::ScenarioConfig& config, std::ostream& out, std::ostream&) {
  const Scenario s = build(config);
  const auto L = operators_for(config, s);
  ops::Superoperator total{s.basis, Eigen::MatrixXcd::Zero(static_cast<Eigen::Index>(s.basis.size() * s.basis.size()),
                                                           static_cast<Eigen::Index>(s.basis.size() * s.basis.size()))};
  for (const auto& op : L) total.matrix += op.matrix;
  write_header(out, config, "superop");
  out << "# operator: sum of " << (L.empty() ? std::string("no processes") : config.run.processes) << '\n';
  ops::write_superop_csv(out, total);
  return kOk;
}

int cmd_evolve(const cfg::ScenarioConfig& config, std::ostream& out, std::ostream& log) {
  const Scenario s = build(config);
  const auto L = operators_for(config, s);
  const auto rho0 = initial_state(config, s.basis);
  dyn::PropagateOptions opt;
  opt.stride = config.run.stride;
  const auto traj = dyn::propagate(rho0, s.H, L, config.run.t_final, config.run.dt, opt);
  for (const auto& w : traj.warnings) log << "warning: " << w << '\n';
  write_header(out, config, "evolve");
  out << "# integrator: fixed-step RK4, rho re-Hermitized after every step\n";
  out << "# worst trace drift " << format_double(traj.worst_trace_drift) << ", worst hermiticity defect "
      << format_double(traj.worst_hermiticity) << ", lowest eigenvalue " << format_double(traj.worst_eigenvalue) << '\n';
  dyn::write_trajectory_csv(out, s.basis, traj, config.run.output == "populations");
  return kOk;
}

int cmd_steady(const cfg::ScenarioConfig& config, std::ostream& out, std::ostream& log) {
  const Scenario s = build(config);
  const auto L = operators_for(config, s);
  dyn::SteadyStateOptions opt;
  opt.fallback = dyn::maximally_mixed(s.basis);
  const auto result = dyn::steady_state(s.H, L, opt);
  write_header(out, config, "steady");
  out << "# null-space dimension: " << result.null_dimension << '\n';
  if (!result.state) {
    out << "# no steady state: degenerate null space and the fallback propagation did not converge\n";
    log << "steady: null space of dimension " << result.null_dimension << ", no unique state\n";
    return kCheckFailed;
  }
  out << "# method: " << (result.from_propagation ? "propagation from the maximally mixed state" : "null space") << '\n';
  out << "# residual: " << format_double(result.residual) << '\n';
  for (std::size_t i = 0; i < s.basis.size(); ++i) out << "# basis " << i << ": " << s.basis.label(i) << '\n';
  out << "i,j,re,im\n";
  const auto& rho = result.state->rho;
  for (Eigen::Index i = 0; i < rho.rows(); ++i)
    for (Eigen::Index j = 0; j < rho.cols(); ++j)
      out << i << ',' << j << ',' << format_double(rho(i, j).real()) << ',' << format_double(rho(i, j).imag()) << '\n';
  return kOk;
}

// ------------------------------------------------------------------ doctor

namespace {

std::vector<HalfInt> upto(int twice_max) {
  std::vector<HalfInt> out;
  for (int t = 0; t <= twice_max; ++t) out.push_back(HalfInt::from_twice(t));
  return out;
}

std::vector<HalfInt> projections(HalfInt j) {
  std::vector<HalfInt> out;
  for (int m = -j.twice(); m <= j.twice(); m += 2) out.push_back(HalfInt::from_twice(m));
  return out;
}

double cg_orthogonality(int cap) {
  double worst = 0.0;
  for (HalfInt j1 : upto(cap)) {
    for (HalfInt j2 : upto(cap)) {
      for (int J = std::abs(j1.twice() - j2.twice()); J <= j1.twice() + j2.twice(); J += 2) {
        for (int Jp = J; Jp <= j1.twice() + j2.twice(); Jp += 2) {
          const HalfInt a = HalfInt::from_twice(J), b = HalfInt::from_twice(Jp);
          for (HalfInt M : projections(a)) {
            double sum = 0.0;
            for (HalfInt m1 : projections(j1)) {
              const HalfInt m2 = M - m1;
              if (std::abs(m2.twice()) > j2.twice() || std::abs(M.twice()) > b.twice()) continue;
              sum += angular::clebsch_gordan(j1, m1, j2, m2, a, M) * angular::clebsch_gordan(j1, m1, j2, m2, b, M);
            }
            worst = std::max(worst, std::abs(sum - (J == Jp ? 1.0 : 0.0)));
          }
        }
      }
    }
  }
  return worst;
}

double summk(int cap) {
  const HalfInt one = HalfInt::integer(1);
  double worst = 0.0;
  for (HalfInt Jd : upto(cap)) {
    for (HalfInt J1 : upto(cap)) {
      if (!angular::triangle(Jd, one, J1)) continue;
      for (HalfInt J2 : upto(cap)) {
        if (!angular::triangle(Jd, one, J2)) continue;
        for (HalfInt M : projections(std::min(J1, J2))) {
          double sum = 0.0;
          for (HalfInt Md : projections(Jd)) {
            const HalfInt sig = M - Md;
            if (!angular::Sigma::valid(sig)) continue;
            sum += angular::clebsch_gordan(Jd, Md, one, sig, J1, M) * angular::clebsch_gordan(Jd, Md, one, sig, J2, M);
          }
          worst = std::max(worst, std::abs(sum - (J1 == J2 ? 1.0 : 0.0)));
        }
      }
    }
  }
  return worst;
}

double six_j_sum_rule(int cap) {
  double worst = 0.0;
  const auto grid = upto(cap);
  for (HalfInt l1 : grid)
    for (HalfInt l2 : grid)
      for (HalfInt l3 : grid)
        for (HalfInt l4 : grid)
          for (HalfInt lp : grid) {
            if (!angular::triangle(l1, l2, lp) || !angular::triangle(l3, l4, lp)) continue;
            for (HalfInt lpp : grid) {
              if (!angular::triangle(l3, l2, lpp) || !angular::triangle(l1, l4, lpp)) continue;
              double sum = 0.0;
              for (int l = 0; l <= 4 * cap + 2; ++l) {
                const HalfInt L = HalfInt::from_twice(l);
                sum += (l + 1) * angular::six_j(l1, l2, lp, l3, l4, L) * angular::six_j(l3, l2, L, l1, l4, lpp);
              }
              worst = std::max(worst, std::abs(sum - (lp == lpp ? 1.0 / (lpp.twice() + 1) : 0.0)));
            }
          }
  return worst;
}

double d1_orthogonality() {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> beta(0.0, std::numbers::pi);
  double worst = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const double b = beta(rng);
    for (auto x : angular::all_sigmas())
      for (auto y : angular::all_sigmas()) {
        double dot = 0.0;
        for (auto lam : angular::all_sigmas()) dot += angular::wigner_d1(lam, x, b) * angular::wigner_d1(lam, y, b);
        worst = std::max(worst, std::abs(dot - (x == y ? 1.0 : 0.0)));
      }
  }
  return worst;
}

double diagonality(int cap) {
  double worst = 0.0;
  const auto vac = env::ModeDensityModifier::vacuum();
  for (HalfInt Jd : upto(cap))
    for (HalfInt Jb : upto(cap))
      for (HalfInt Jc : upto(cap)) {
        if (Jb == Jc) continue;
        ops::LevelScheme s;
        s.J_b = Jb;
        s.J_c = Jc;
        s.J_d = Jd;
        s.omega_bd = 1.0;
        s.omega_cd = 1.0;
        try {
          s.validate();
        } catch (const DomainError&) {
          continue;
        }
        const auto r = ops::rates_spontaneous(s, vac);
        for (const auto& [k, v] : r.upper)
          if (k.first != k.second) worst = std::max(worst, std::abs(v));
      }
  return worst;
}

}  // namespace

int cmd_doctor(const DoctorOptions& options, std::ostream& out) {
  struct Check {
    std::string name;
    int tier;  // twice the largest J the check needs; -1 for none
    std::function<double()> run;
    double tol;
  };
  std::vector<Check> checks;
  checks.push_back({"quadrature self-check (order " + std::to_string(options.quad_order) + ")", -1,
                    [&] { return env::quadrature_selfcheck(options.quad_order).max_deviation(); }, 1e-12});
  checks.push_back({"d1 orthogonality", -1, d1_orthogonality, 1e-12});
  for (int tier : {2, 5, 9}) {
    const std::string cap = " (J <= " + HalfInt::from_twice(tier).str() + ")";
    checks.push_back({"CG orthogonality" + cap, tier, [tier] { return cg_orthogonality(tier); }, 1e-12});
    checks.push_back({"CG sum over Md" + cap, tier, [tier] { return summk(tier); }, 1e-12});
    checks.push_back({"6j sum rule" + cap, tier, [tier] { return six_j_sum_rule(tier); }, 1e-12});
    checks.push_back({"free-space diagonality" + cap, tier, [tier] { return diagonality(tier); }, 1e-12});
  }

  std::string first_failure;
  for (const auto& c : checks) {
    if (c.tier > options.grid_cap.twice()) {
      out << "SKIP  " << c.name << ": above grid cap " << options.grid_cap.str() << '\n';
      continue;
    }
    try {
      const double dev = c.run();
      const bool ok = dev <= c.tol;
      out << (ok ? "PASS  " : "FAIL  ") << c.name << ": max deviation " << format_double(dev) << '\n';
      if (!ok && first_failure.empty()) first_failure = c.name;
    } catch (const std::exception& e) {
      out << "FAIL  " << c.name << ": " << e.what() << '\n';
      if (first_failure.empty()) first_failure = c.name;
    }
  }
  if (!first_failure.empty()) {
    out << "first failure: " << first_failure << '\n';
    return kCheckFailed;
  }
  return kOk;
}

}  // namespace vrelax::cli
