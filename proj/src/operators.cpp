#include "vrelax/operators.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <sstream>

#include "vrelax/csv.hpp"
#include "vrelax/parallel.hpp"

namespace vrelax::ops {

using angular::Sigma;

namespace {

constexpr Level kUpper[2] = {Level::c, Level::b};

bool dipole_allowed(HalfInt upper, HalfInt lower) {
  if (upper.twice() < 0 || lower.twice() < 0) return false;
  if (!upper.same_class(lower)) return false;
  if (std::abs(upper.twice() - lower.twice()) > 2) return false;
  return !(upper.twice() == 0 && lower.twice() == 0);
}

std::string key_string(std::initializer_list<std::string> parts) {
  std::string s = "(";
  bool first = true;
  for (const auto& p : parts) {
    if (!first) s += ", ";
    s += p;
    first = false;
  }
  return s + ")";
}

std::vector<HalfInt> projections(HalfInt j) {
  std::vector<HalfInt> out;
  for (int m = -j.twice(); m <= j.twice(); m += 2) out.push_back(HalfInt::from_twice(m));
  return out;
}

using FeedEntry = std::pair<std::array<std::size_t, 4>, cplx>;

struct Assembly {
  const Basis& basis;
  const LevelScheme& scheme;
  std::optional<HalfInt> nuclear_spin;  // set for hyperfine bases
  const KMatrix* K[3] = {nullptr, nullptr, nullptr};

  // Angular part of one four-index coefficient; 0 when the pair is not coupled.
  double pair_factor(const Sublevel& u1, const Sublevel& g1, const Sublevel& u2, const Sublevel& g2) const {
    const HalfInt one = HalfInt::integer(1);
    const HalfInt s1 = u1.M - g1.M, s2 = u2.M - g2.M;
    if (!Sigma::valid(s1) || !Sigma::valid(s2)) return 0.0;
    const double c1 = angular::clebsch_gordan(g1.F, g1.M, one, s1, u1.F, u1.M);
    const double c2 = angular::clebsch_gordan(g2.F, g2.M, one, s2, u2.F, u2.M);
    if (c1 == 0.0 || c2 == 0.0) return 0.0;
    if (!nuclear_spin) return c1 * c2;

    const HalfInt I = *nuclear_spin;
    const HalfInt J1 = scheme.J(u1.level), J2 = scheme.J(u2.level), Jd = scheme.J_d;
    const double w1 = angular::racah_w(J1, u1.F, Jd, g1.F, I, one);
    const double w2 = angular::racah_w(J2, u2.F, Jd, g2.F, I, one);
    if (w1 == 0.0 || w2 == 0.0) return 0.0;
    // g_{j1 d} g_{d j2} with g_{dj} = conj(g_{jd}): the amplitude phases (-1)^{I+1-F-Fd} combine to
    // (-1)^{F2 + F2d - F1 - F1d}, which is (-1)^{2(I+1) - F1 - F2 - F1d - F2d} only for integer I.
    const int twice_exp = u2.F.twice() + g2.F.twice() - u1.F.twice() - g1.F.twice();
    const double phase = (twice_exp / 2) % 2 == 0 ? 1.0 : -1.0;
    return phase * std::sqrt(static_cast<double>(g1.F.multiplicity() * g2.F.multiplicity())) * w1 * w2 * c1 * c2;
  }

  double reduced_factor(Level j1, Level j2) const {
    const double s = scheme.s_factor(j1, j2);
    if (!nuclear_spin) return s;
    return s * std::sqrt(static_cast<double>(scheme.J(j1).multiplicity() * scheme.J(j2).multiplicity()));
  }

  std::vector<FeedEntry> row(std::size_t u1) const {
    std::vector<FeedEntry> out;
    const auto ground = basis.indices(Level::d);
    const Sublevel& a = basis[u1];
    for (std::size_t u2 : basis.upper_indices()) {
      const Sublevel& b = basis[u2];
      const double reduced = reduced_factor(a.level, b.level);
      const KMatrix& k = *K[static_cast<int>(b.level)];
      for (std::size_t d1 : ground) {
        for (std::size_t d2 : ground) {
          const double f = pair_factor(a, basis[d1], b, basis[d2]);
          if (f == 0.0) continue;
          const Sigma s1 = Sigma::from(a.M - basis[d1].M), s2 = Sigma::from(b.M - basis[d2].M);
          out.push_back({{u1, d1, u2, d2}, reduced * f * k(s1, s2)});
        }
      }
    }
    return out;
  }
};

RateSet assemble(const Basis& basis, const LevelScheme& scheme, std::optional<HalfInt> I, const KMatrix& K_b,
                 const KMatrix& K_c, RateKind kind, const AssemblyOptions& options) {
  Assembly a{basis, scheme, I};
  a.K[static_cast<int>(Level::b)] = &K_b;
  a.K[static_cast<int>(Level::c)] = &K_c;

  const auto uppers = basis.upper_indices();
  std::vector<std::vector<FeedEntry>> rows(uppers.size());
  parallel_for(uppers.size(), options.threads, [&](std::size_t i) { rows[i] = a.row(uppers[i]); });

  RateSet rates;
  rates.kind = kind;
  rates.basis = basis;
  for (auto& r : rows)
    for (auto& [key, value] : r) rates.feeding.emplace(key, value);
  for (const auto& [key, value] : rates.feeding) {
    if (key[1] == key[3]) rates.upper[{key[0], key[2]}] += value;
  }
  if (kind == RateKind::Stimulated) {
    for (const auto& [key, value] : rates.feeding) {
      if (key[0] == key[2]) rates.ground[{key[1], key[3]}] += value;
    }
  }
  return rates;
}

}  // namespace

char level_name(Level level) {
  switch (level) {
    case Level::d: return 'd';
    case Level::c: return 'c';
    case Level::b: return 'b';
  }
  return '?';
}

// ------------------------------------------------------------ LevelScheme

void LevelScheme::validate() const {
  if (!dipole_allowed(J_b, J_d)) {
    throw DomainError("b -> d is not dipole-allowed for J_b = " + J_b.str() + ", J_d = " + J_d.str());
  }
  if (J_c && !dipole_allowed(*J_c, J_d)) {
    throw DomainError("c -> d is not dipole-allowed for J_c = " + J_c->str() + ", J_d = " + J_d.str());
  }
  if (!(omega_bd > 0.0) || !std::isfinite(omega_bd)) throw DomainError("omega_bd must be positive and finite");
  if (J_c && (!(omega_cd > 0.0) || !std::isfinite(omega_cd))) {
    throw DomainError("omega_cd must be positive and finite");
  }
  if (dipole.mode == DipoleMode::Normalized) {
    if (!(dipole.S > 0.0) || !std::isfinite(dipole.S)) throw DomainError("rate scale S must be positive and finite");
    return;
  }
  if (!(dipole.prefactor > 0.0) || !std::isfinite(dipole.prefactor)) {
    throw DomainError("dipole prefactor must be positive and finite");
  }
  if (dipole.mu_bd == 0.0 || !std::isfinite(dipole.mu_bd)) throw DomainError("mu_bd must be finite and nonzero");
  if (J_c && (dipole.mu_cd == 0.0 || !std::isfinite(dipole.mu_cd))) {
    throw DomainError("mu_cd must be finite and nonzero");
  }
  if (dipole.alkali && J_c) {
    const double rb = std::abs(dipole.mu_bd) / std::sqrt(J_b.multiplicity());
    const double rc = std::abs(dipole.mu_cd) / std::sqrt(J_c->multiplicity());
    if (std::abs(rb - rc) > 1e-12 * std::max(rb, rc)) {
      throw DomainError("alkali scheme requires |mu_bd|/sqrt(2J_b+1) == |mu_cd|/sqrt(2J_c+1)");
    }
  }
}

HalfInt LevelScheme::J(Level level) const {
  switch (level) {
    case Level::d: return J_d;
    case Level::b: return J_b;
    case Level::c:
      if (!J_c) throw ContractViolation("level c is absent from this scheme");
      return *J_c;
  }
  return J_d;
}

double LevelScheme::omega(Level level) const {
  switch (level) {
    case Level::d: return 0.0;
    case Level::b: return omega_bd;
    case Level::c: return omega_cd;
  }
  return 0.0;
}

double LevelScheme::s_factor(Level j1, Level j2) const {
  if (j1 == Level::d || j2 == Level::d) throw ContractViolation("S is defined for upper levels only");
  if (dipole.mode == DipoleMode::Normalized) return dipole.S;
  auto mu = [&](Level l) { return l == Level::b ? dipole.mu_bd : dipole.mu_cd; };
  const double w = omega(j2);
  return dipole.prefactor * mu(j1) * mu(j2) * w * w * w /
         std::sqrt(static_cast<double>(J(j1).multiplicity() * J(j2).multiplicity()));
}

// -------------------------------------------------------- HyperfineScheme

void HyperfineScheme::validate() const {
  fine.validate();
  if (I.twice() < 0) throw DomainError("nuclear spin must be >= 0");
  for (Level level : {Level::d, Level::c, Level::b}) {
    const auto& table = energies[static_cast<int>(level)];
    if (table.empty()) continue;
    if (level == Level::c && !fine.has_c()) throw DomainError("hyperfine energies given for absent level c");
    const auto allowed = f_values(level);
    for (const auto& [F, w] : table) {
      if (std::find(allowed.begin(), allowed.end(), F) == allowed.end()) {
        throw DomainError(std::string("F = ") + F.str() + " is not a hyperfine manifold of level " + level_name(level));
      }
      if (!std::isfinite(w)) throw DomainError("hyperfine energy must be finite");
    }
  }
}

std::vector<HalfInt> HyperfineScheme::f_values(Level level) const {
  const HalfInt J = fine.J(level);
  std::vector<HalfInt> out;
  for (int f = std::abs(J.twice() - I.twice()); f <= J.twice() + I.twice(); f += 2) out.push_back(HalfInt::from_twice(f));
  return out;
}

double HyperfineScheme::energy(Level level, HalfInt F) const {
  const auto& table = energies[static_cast<int>(level)];
  if (auto it = table.find(F); it != table.end()) return it->second;
  return fine.omega(level);
}

// ------------------------------------------------------------------ Basis

Basis Basis::fine(const LevelScheme& scheme) {
  Basis b;
  for (Level level : {Level::d, Level::c, Level::b}) {
    if (level == Level::c && !scheme.has_c()) continue;
    const HalfInt J = scheme.J(level);
    for (HalfInt M : projections(J)) b.states_.push_back({level, J, M});
  }
  return b;
}

Basis Basis::hyperfine(const HyperfineScheme& scheme) {
  Basis b;
  b.hyperfine_ = true;
  for (Level level : {Level::d, Level::c, Level::b}) {
    if (level == Level::c && !scheme.fine.has_c()) continue;
    for (HalfInt F : scheme.f_values(level))
      for (HalfInt M : projections(F)) b.states_.push_back({level, F, M});
  }
  return b;
}

std::optional<std::size_t> Basis::find(Level level, HalfInt F, HalfInt M) const {
  for (std::size_t i = 0; i < states_.size(); ++i) {
    const auto& s = states_[i];
    if (s.level == level && s.M == M && (!hyperfine_ || s.F == F)) return i;
  }
  return std::nullopt;
}

std::vector<std::size_t> Basis::indices(Level level) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < states_.size(); ++i)
    if (states_[i].level == level) out.push_back(i);
  return out;
}

std::vector<std::size_t> Basis::upper_indices() const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < states_.size(); ++i)
    if (states_[i].level != Level::d) out.push_back(i);
  return out;
}

std::string Basis::label(std::size_t i) const {
  const auto& s = states_.at(i);
  std::string out(1, level_name(s.level));
  if (hyperfine_) out += " F=" + s.F.str();
  return out + " M=" + s.M.str();
}

// ---------------------------------------------------------------- RateSet

cplx RateSet::upper_at(std::size_t u1, std::size_t u2) const {
  auto it = upper.find({u1, u2});
  return it == upper.end() ? cplx{} : it->second;
}

cplx RateSet::feeding_at(std::size_t u1, std::size_t d1, std::size_t u2, std::size_t d2) const {
  auto it = feeding.find({u1, d1, u2, d2});
  return it == feeding.end() ? cplx{} : it->second;
}

cplx RateSet::ground_at(std::size_t d1, std::size_t d2) const {
  auto it = ground.find({d1, d2});
  return it == ground.end() ? cplx{} : it->second;
}

RateSet RateSet::scaled(double c) const {
  RateSet r = *this;
  for (auto& [k, v] : r.upper) v *= c;
  for (auto& [k, v] : r.feeding) v *= c;
  for (auto& [k, v] : r.ground) v *= c;
  return r;
}

void RateSet::check_consistency(double tol) const {
  const std::size_t n = basis.size();
  auto is_upper = [&](std::size_t i) { return i < n && basis[i].level != Level::d; };
  auto is_ground = [&](std::size_t i) { return i < n && basis[i].level == Level::d; };

  double scale = 1.0;
  for (const auto& [k, v] : feeding) scale = std::max(scale, std::abs(v));
  const double bound = tol * scale;

  std::map<std::pair<std::size_t, std::size_t>, cplx> upper_sum, ground_sum;
  for (const auto& [k, v] : feeding) {
    if (!is_upper(k[0]) || !is_ground(k[1]) || !is_upper(k[2]) || !is_ground(k[3])) {
      throw ContractViolation("feeding coefficient " +
                              key_string({std::to_string(k[0]), std::to_string(k[1]), std::to_string(k[2]),
                                          std::to_string(k[3])}) +
                              " does not index (upper, ground, upper, ground) basis states");
    }
    if (k[1] == k[3]) upper_sum[{k[0], k[2]}] += v;
    if (k[0] == k[2]) ground_sum[{k[1], k[3]}] += v;
  }
  auto compare = [&](const auto& expected, const auto& stored, const char* what) {
    std::map<std::pair<std::size_t, std::size_t>, std::pair<cplx, cplx>> merged;
    for (const auto& [k, v] : expected) merged[k].first = v;
    for (const auto& [k, v] : stored) merged[k].second = v;
    for (const auto& [k, pair] : merged) {
      if (std::abs(pair.first - pair.second) > bound) {
        throw ContractViolation(std::string(what) + " coefficient " +
                                key_string({basis.label(k.first), basis.label(k.second)}) +
                                " differs from the sum of its feeding coefficients");
      }
    }
  };
  compare(upper_sum, upper, "upper");
  if (kind == RateKind::Stimulated) {
    compare(ground_sum, ground, "ground");
  } else if (!ground.empty()) {
    throw ContractViolation("spontaneous rate set carries ground-level absorption coefficients");
  }
}

// --------------------------------------------------------------- builders

RateSet rates_fine(const LevelScheme& scheme, const KMatrix& K_b, const KMatrix& K_c, RateKind kind,
                   const AssemblyOptions& options) {
  scheme.validate();
  return assemble(Basis::fine(scheme), scheme, std::nullopt, K_b, K_c, kind, options);
}

RateSet rates_spontaneous(const LevelScheme& scheme, const env::ModeDensityModifier& mod,
                          const AssemblyOptions& options) {
  scheme.validate();
  const KMatrix kb = env::k_spontaneous(mod, scheme.omega_bd);
  const KMatrix kc = scheme.has_c() ? env::k_spontaneous(mod, scheme.omega_cd) : kb;
  return rates_fine(scheme, kb, kc, RateKind::Spontaneous, options);
}

RateSet rates_stimulated(const LevelScheme& scheme, const env::AngularDistribution& dist,
                         const env::ModeDensityModifier& mod, const env::QuadratureOptions& quad,
                         const AssemblyOptions& options) {
  scheme.validate();
  const KMatrix kb = env::k_stimulated(dist, mod, scheme.omega_bd, quad);
  const KMatrix kc = scheme.has_c() ? env::k_stimulated(dist, mod, scheme.omega_cd, quad) : kb;
  return rates_fine(scheme, kb, kc, RateKind::Stimulated, options);
}

RateSet rates_hyperfine(const HyperfineScheme& scheme, const KMatrix& K_b, const KMatrix& K_c, RateKind kind,
                        const AssemblyOptions& options) {
  scheme.validate();
  return assemble(Basis::hyperfine(scheme), scheme.fine, scheme.I, K_b, K_c, kind, options);
}

// ---------------------------------------------------------- superoperators

namespace {

class SuperBuilder {
public:
  explicit SuperBuilder(std::size_t n) : n_(n), m_(Eigen::MatrixXcd::Zero(n * n, n * n)) {}

  // coef * |a><b| rho |c><e|
  void sandwich(std::size_t a, std::size_t b, std::size_t c, std::size_t e, cplx coef) {
    m_(a + n_ * e, b + n_ * c) += coef;
  }
  // coef * |a><b| rho
  void left(std::size_t a, std::size_t b, cplx coef) {
    for (std::size_t j = 0; j < n_; ++j) m_(a + n_ * j, b + n_ * j) += coef;
  }
  // coef * rho |c><e|
  void right(std::size_t c, std::size_t e, cplx coef) {
    for (std::size_t i = 0; i < n_; ++i) m_(i + n_ * e, i + n_ * c) += coef;
  }
  Eigen::MatrixXcd take() { return std::move(m_); }

private:
  std::size_t n_;
  Eigen::MatrixXcd m_;
};

void add_emission(SuperBuilder& sb, const RateSet& rates) {
  for (const auto& [k, g] : rates.upper) {
    sb.left(k.first, k.second, -g);
    sb.right(k.second, k.first, -std::conj(g));
  }
  for (const auto& [k, c] : rates.feeding) {
    const auto [u1, d1, u2, d2] = k;
    sb.sandwich(d1, u1, u2, d2, std::conj(c));
    sb.sandwich(d2, u2, u1, d1, c);
  }
}

void add_absorption(SuperBuilder& sb, const RateSet& rates) {
  for (const auto& [k, g] : rates.ground) {
    sb.left(k.first, k.second, -g);
    sb.right(k.second, k.first, -std::conj(g));
  }
  for (const auto& [k, c] : rates.feeding) {
    const auto [u1, d1, u2, d2] = k;
    sb.sandwich(u1, d1, d2, u2, std::conj(c));
    sb.sandwich(u2, d2, d1, u1, c);
  }
}

}  // namespace

Eigen::MatrixXcd Superoperator::apply(const Eigen::MatrixXcd& rho) const {
  const Eigen::Index n = static_cast<Eigen::Index>(basis.size());
  if (rho.rows() != n || rho.cols() != n) throw ContractViolation("density matrix does not match the basis size");
  Eigen::VectorXcd v = matrix * Eigen::Map<const Eigen::VectorXcd>(rho.data(), n * n);
  return Eigen::Map<Eigen::MatrixXcd>(v.data(), n, n);
}

Superoperator build_relaxation_superop(const RateSet& rates) {
  rates.check_consistency();
  SuperBuilder sb(rates.basis.size());
  add_emission(sb, rates);
  return {rates.basis, sb.take()};
}

Superoperator build_stimulated_superop(const RateSet& rates) {
  if (rates.kind != RateKind::Stimulated) {
    throw ContractViolation("stimulated superoperator needs a stimulated rate set (absorption table missing)");
  }
  rates.check_consistency();
  SuperBuilder sb(rates.basis.size());
  add_emission(sb, rates);
  add_absorption(sb, rates);
  return {rates.basis, sb.take()};
}

// ------------------------------------------------------------ diagnostics

InterferenceReport interference_report(const RateSet& rates, double threshold) {
  InterferenceReport report;
  const Basis& basis = rates.basis;
  double largest = 0.0;
  for (std::size_t u : basis.upper_indices()) largest = std::max(largest, std::abs(rates.upper_at(u, u)));

  for (std::size_t b : basis.indices(Level::b)) {
    const auto c = basis.find(Level::c, basis[b].F, basis[b].M);
    if (!c) continue;
    InterferenceEntry e{basis[b].F, basis[b].M, b, *c, rates.upper_at(b, b), rates.upper_at(*c, *c),
                        rates.upper_at(b, *c), std::nullopt};
    const double gb = e.gamma_bb.real(), gc = e.gamma_cc.real();
    if (gb > 0.0 && gc > 0.0) e.p = e.gamma_bc.real() / std::sqrt(gb * gc);
    report.entries.push_back(e);
  }
  const double cut = largest > 0.0 ? threshold * largest : threshold;
  for (const auto& [k, v] : rates.upper) {
    if (k.first != k.second && std::abs(v) > cut) report.off_diagonal.push_back({k.first, k.second, v});
  }
  return report;
}

void write_rates_csv(std::ostream& out, const RateSet& rates, const std::string& prefix, bool header) {
  const Basis& basis = rates.basis;
  const bool hf = basis.is_hyperfine();
  auto level = [&](std::size_t i) { return std::string(1, level_name(basis[i].level)); };
  auto F = [&](std::size_t i) { return hf ? basis[i].F.str() : std::string(); };
  // Hyperfine ground sublevels carry their manifold as "F:M".
  auto ground_m = [&](std::size_t i) { return hf ? basis[i].F.str() + ":" + basis[i].M.str() : basis[i].M.str(); };
  auto number = [](cplx v) { return csv::format_double(v.real()) + "," + csv::format_double(v.imag()); };

  if (header) out << "kind,j1,F1,M1,j2,F2,M2,Md1,Md2,re,im\n";
  for (const auto& [k, v] : rates.upper) {
    out << prefix << "upper," << level(k.first) << ',' << F(k.first) << ',' << basis[k.first].M.str() << ','
        << level(k.second) << ',' << F(k.second) << ',' << basis[k.second].M.str() << ",,," << number(v) << '\n';
  }
  for (const auto& [k, v] : rates.feeding) {
    out << prefix << "feeding," << level(k[0]) << ',' << F(k[0]) << ',' << basis[k[0]].M.str() << ',' << level(k[2])
        << ',' << F(k[2]) << ',' << basis[k[2]].M.str() << ',' << ground_m(k[1]) << ',' << ground_m(k[3]) << ','
        << number(v) << '\n';
  }
  for (const auto& [k, v] : rates.ground) {
    out << prefix << "ground,d,,,d,,," << ground_m(k.first) << ',' << ground_m(k.second) << ',' << number(v) << '\n';
  }
}

void write_superop_csv(std::ostream& out, const Superoperator& op) {
  const std::size_t n = op.basis.size();
  out << "# vec(rho) is column-major: index i + " << n << "*j holds rho(i,j)\n";
  for (std::size_t i = 0; i < n; ++i) out << "# basis " << i << ": " << op.basis.label(i) << '\n';
  out << "row";
  for (std::size_t c = 0; c < n * n; ++c) out << ",c" << c << "_re,c" << c << "_im";
  out << '\n';
  for (Eigen::Index r = 0; r < op.matrix.rows(); ++r) {
    out << r;
    for (Eigen::Index c = 0; c < op.matrix.cols(); ++c) {
      out << ',' << csv::format_double(op.matrix(r, c).real()) << ',' << csv::format_double(op.matrix(r, c).imag());
    }
    out << '\n';
  }
}

}  // namespace vrelax::ops
