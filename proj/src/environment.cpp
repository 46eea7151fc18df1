#include "vrelax/environment.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numbers>
#include <sstream>
#include <tuple>

#include "vrelax/csv.hpp"
#include "vrelax/parallel.hpp"
#include "vrelax/quadrature.hpp"

namespace vrelax::env {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

std::string describe_point(double theta, double phi, Sigma lam) {
  std::ostringstream os;
  os << "(theta=" << theta << ", phi=" << phi << ", lambda=" << lam.value() << ")";
  return os.str();
}

double checked_sample(const AngularDistribution& dist, double theta, double phi, Sigma lam) {
  const double n = dist(theta, phi, lam);
  if (!(n >= 0.0) || !std::isfinite(n)) {
    throw DomainError("photon distribution is negative or not finite at " + describe_point(theta, phi, lam));
  }
  return n;
}

using Block = std::array<std::array<cplx, 3>, 3>;

// Contribution of one cos(theta) node, already weighted for dOmega/4pi.
Block theta_node_contribution(const AngularDistribution& dist, double u, double weight,
                              const std::vector<double>& phis, bool closed_form_phi) {
  const double theta = std::acos(std::clamp(u, -1.0, 1.0));
  const auto sig = angular::all_sigmas();
  const Sigma helicities[2] = {Sigma::from(-1), Sigma::from(1)};
  Block acc{};
  for (Sigma lam : helicities) {
    std::array<double, 3> s{};
    for (Sigma q : sig) s[q.index()] = angular::wigner_d1(lam, q, theta);
    if (closed_form_phi) {
      const double n = checked_sample(dist, theta, 0.0, lam);
      for (Sigma q : sig) acc[q.index()][q.index()] += 0.5 * weight * n * s[q.index()] * s[q.index()];
      continue;
    }
    for (double phi : phis) {
      const double n = checked_sample(dist, theta, phi, lam);
      if (n == 0.0) continue;
      const double w = 0.5 * weight * n / static_cast<double>(phis.size());
      for (Sigma a : sig) {
        for (Sigma b : sig) {
          const cplx phase = std::exp(cplx(0.0, (a.value() - b.value()) * phi));
          acc[a.index()][b.index()] += w * phase * s[b.index()] * s[a.index()];
        }
      }
    }
  }
  return acc;
}

KMatrix integrate(const AngularDistribution& dist, const QuadratureOptions& options, bool allow_closed_form_phi) {
  if (options.theta_order < 4) {
    throw DomainError("quadrature order must be at least 4, got " + std::to_string(options.theta_order));
  }
  if (options.phi_nodes < 1) throw DomainError("phi node count must be positive");
  const auto rule = quad::GaussLegendre::make(options.theta_order);
  const auto phis = quad::periodic_nodes(options.phi_nodes);
  const bool closed_form_phi = allow_closed_form_phi && dist.axisymmetric();

  std::vector<Block> partial(rule.nodes.size());
  parallel_for(rule.nodes.size(), options.threads, [&](std::size_t i) {
    partial[i] = theta_node_contribution(dist, rule.nodes[i], rule.weights[i], phis, closed_form_phi);
  });

  KMatrix k;
  const auto sig = angular::all_sigmas();
  for (const auto& block : partial) {
    for (Sigma a : sig)
      for (Sigma b : sig) k(a, b) += block[a.index()][b.index()];
  }
  k.provenance = KProvenance::Quadrature;
  return k;
}

void apply_modifier(KMatrix& k, const ModeDensityModifier& mod, double omega) {
  if (mod.kind() == ModeDensityKind::Vacuum) return;
  const auto sig = angular::all_sigmas();
  std::array<double, 3> root{};
  for (Sigma q : sig) root[q.index()] = std::sqrt(mod.relative_density(omega, q));
  for (Sigma a : sig)
    for (Sigma b : sig) k(a, b) *= root[a.index()] * root[b.index()];
}

}  // namespace

std::string to_string(KProvenance p) {
  switch (p) {
    case KProvenance::ClosedForm: return "closed-form";
    case KProvenance::Quadrature: return "quadrature";
    case KProvenance::Injected: return "injected";
  }
  return "unknown";
}

std::string to_string(DistributionKind k) {
  switch (k) {
    case DistributionKind::Isotropic: return "isotropic";
    case DistributionKind::AxisymmetricCos2: return "axisymmetric-cos2";
    case DistributionKind::CustomTabulated: return "custom-tabulated";
    case DistributionKind::Custom: return "custom";
  }
  return "unknown";
}

std::string to_string(ModeDensityKind k) {
  switch (k) {
    case ModeDensityKind::Vacuum: return "vacuum";
    case ModeDensityKind::PlanarCavity: return "planar-cavity";
    case ModeDensityKind::PhotonicCrystal: return "photonic-crystal";
  }
  return "unknown";
}

// ---------------------------------------------------------------- KMatrix

KMatrix KMatrix::diagonal(double minus, double zero, double plus, KProvenance provenance) {
  KMatrix k;
  k.at(-1, -1) = minus;
  k.at(0, 0) = zero;
  k.at(1, 1) = plus;
  k.provenance = provenance;
  return k;
}

double KMatrix::hermiticity_defect() const {
  double worst = 0.0;
  for (int a = 0; a < 3; ++a)
    for (int b = 0; b < 3; ++b) worst = std::max(worst, std::abs(entries_[a][b] - std::conj(entries_[b][a])));
  return worst;
}

double KMatrix::max_off_diagonal() const {
  double worst = 0.0;
  for (int a = 0; a < 3; ++a)
    for (int b = 0; b < 3; ++b)
      if (a != b) worst = std::max(worst, std::abs(entries_[a][b]));
  return worst;
}

double KMatrix::max_abs_difference(const KMatrix& other) const {
  double worst = 0.0;
  for (int a = 0; a < 3; ++a)
    for (int b = 0; b < 3; ++b) worst = std::max(worst, std::abs(entries_[a][b] - other.entries_[a][b]));
  return worst;
}

KMatrix KMatrix::scaled(double c) const {
  KMatrix k = *this;
  for (auto& row : k.entries_)
    for (auto& e : row) e *= c;
  return k;
}

// ----------------------------------------------------------- TabulatedGrid

TabulatedGrid::TabulatedGrid(std::vector<double> thetas, std::vector<double> phis,
                             std::array<std::vector<std::vector<double>>, 2> values)
    : thetas_(std::move(thetas)), phis_(std::move(phis)), values_(std::move(values)) {
  if (thetas_.empty() || phis_.empty()) throw DomainError("tabulated distribution needs at least one theta and phi");
  if (!std::is_sorted(thetas_.begin(), thetas_.end()) || !std::is_sorted(phis_.begin(), phis_.end())) {
    throw DomainError("tabulated grid axes must be ascending");
  }
  if (std::adjacent_find(thetas_.begin(), thetas_.end()) != thetas_.end() ||
      std::adjacent_find(phis_.begin(), phis_.end()) != phis_.end()) {
    throw DomainError("tabulated grid axes contain duplicates");
  }
  if (phis_.back() - phis_.front() > kTwoPi + 1e-12) throw DomainError("tabulated phi axis spans more than 2 pi");
  for (const auto& plane : values_) {
    if (plane.size() != thetas_.size()) throw DomainError("tabulated values do not match the theta axis");
    for (const auto& row : plane) {
      if (row.size() != phis_.size()) throw DomainError("tabulated values do not match the phi axis");
      for (double v : row) {
        if (!std::isfinite(v) || v < 0.0) throw DomainError("tabulated photon number must be finite and >= 0");
      }
    }
  }
}

TabulatedGrid TabulatedGrid::from_csv(std::istream& in) {
  const auto table = csv::read(in);
  const std::vector<std::string> expected = {"theta_rad", "phi_rad", "lambda", "n_mean"};
  if (table.header != expected) {
    throw ConfigError("distribution CSV header must be 'theta_rad,phi_rad,lambda,n_mean'", table.header_line);
  }
  std::map<std::tuple<int, double, double>, double> samples;
  std::set<double> thetas, phis;
  for (const auto& row : table.rows) {
    if (row.fields.size() != 4) throw ConfigError("expected 4 columns", row.line);
    const double theta = csv::parse_double(row.fields[0], row.line);
    const double phi = csv::parse_double(row.fields[1], row.line);
    const double lam = csv::parse_double(row.fields[2], row.line);
    const double n = csv::parse_double(row.fields[3], row.line);
    if (lam != 1.0 && lam != -1.0) throw ConfigError("lambda must be -1 or 1", row.line);
    if (n < 0.0) throw ConfigError("n_mean must be >= 0", row.line);
    if (theta < 0.0 || theta > std::numbers::pi + 1e-12) throw ConfigError("theta_rad outside [0, pi]", row.line);
    if (phi < 0.0 || phi > kTwoPi + 1e-12) throw ConfigError("phi_rad outside [0, 2 pi]", row.line);
    if (!samples.emplace(std::tuple{static_cast<int>(lam), theta, phi}, n).second) {
      throw ConfigError("duplicate grid point", row.line);
    }
    thetas.insert(theta);
    phis.insert(phi);
  }
  if (samples.size() != 2 * thetas.size() * phis.size()) {
    throw ConfigError("distribution grid is not complete and rectangular for both helicities");
  }
  std::vector<double> ta(thetas.begin(), thetas.end()), pa(phis.begin(), phis.end());
  std::array<std::vector<std::vector<double>>, 2> values;
  for (int h = 0; h < 2; ++h) {
    values[h].assign(ta.size(), std::vector<double>(pa.size(), 0.0));
    for (std::size_t i = 0; i < ta.size(); ++i)
      for (std::size_t k = 0; k < pa.size(); ++k) values[h][i][k] = samples.at({h == 0 ? -1 : 1, ta[i], pa[k]});
  }
  return TabulatedGrid(std::move(ta), std::move(pa), std::move(values));
}

TabulatedGrid TabulatedGrid::from_csv_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open distribution file '" + path + "'");
  return from_csv(in);
}

double TabulatedGrid::evaluate(double theta, double phi, Sigma lam) const {
  if (lam.value() == 0) throw DomainError("photon helicity must be -1 or +1");
  const auto& plane = values_[lam.value() < 0 ? 0 : 1];

  // theta: clamp, then locate the bracketing interval.
  std::size_t i0 = 0, i1 = 0;
  double ti = 0.0;
  if (thetas_.size() > 1) {
    const double t = std::clamp(theta, thetas_.front(), thetas_.back());
    auto it = std::upper_bound(thetas_.begin(), thetas_.end(), t);
    i1 = std::min<std::size_t>(static_cast<std::size_t>(it - thetas_.begin()), thetas_.size() - 1);
    i0 = i1 - 1;
    ti = (t - thetas_[i0]) / (thetas_[i1] - thetas_[i0]);
  }

  // phi: periodic with period 2 pi; a closing endpoint at phi0 + 2 pi is treated as the wrap.
  std::size_t k0 = 0, k1 = 0;
  double tk = 0.0;
  if (phis_.size() > 1) {
    const double base = phis_.front();
    double p = std::fmod(phi - base, kTwoPi);
    if (p < 0.0) p += kTwoPi;
    p += base;
    std::size_t m = phis_.size();
    const bool closed = std::abs(phis_.back() - (base + kTwoPi)) < 1e-12;
    if (closed) --m;
    auto it = std::upper_bound(phis_.begin(), phis_.begin() + static_cast<std::ptrdiff_t>(m), p);
    const std::size_t hi = static_cast<std::size_t>(it - phis_.begin());
    k0 = hi - 1;
    const double left = phis_[k0];
    const double right = hi < m ? phis_[hi] : base + kTwoPi;
    k1 = hi < m ? hi : 0;
    tk = (p - left) / (right - left);
  }

  const double v00 = plane[i0][k0], v01 = plane[i0][k1], v10 = plane[i1][k0], v11 = plane[i1][k1];
  return (1 - ti) * ((1 - tk) * v00 + tk * v01) + ti * ((1 - tk) * v10 + tk * v11);
}

// ----------------------------------------------------- AngularDistribution

AngularDistribution AngularDistribution::isotropic(double n) {
  if (!(n >= 0.0) || !std::isfinite(n)) throw DomainError("photon number must be finite and >= 0");
  return AngularDistribution(DistributionKind::Isotropic, true, [n](double, double, Sigma) { return n; }, 1.0);
}

AngularDistribution AngularDistribution::axisymmetric_cos2(double n) {
  if (!(n >= 0.0) || !std::isfinite(n)) throw DomainError("photon number must be finite and >= 0");
  return AngularDistribution(
      DistributionKind::AxisymmetricCos2, true,
      [n](double theta, double, Sigma) {
        const double c = std::cos(theta);
        return n * c * c;
      },
      1.0);
}

AngularDistribution AngularDistribution::tabulated(TabulatedGrid grid) {
  const bool axi = grid.phi_independent();
  auto shared = std::make_shared<const TabulatedGrid>(std::move(grid));
  return AngularDistribution(
      DistributionKind::CustomTabulated, axi,
      [shared](double theta, double phi, Sigma lam) { return shared->evaluate(theta, phi, lam); }, 1.0);
}

AngularDistribution AngularDistribution::custom(Function f, bool axisymmetric) {
  return AngularDistribution(DistributionKind::Custom, axisymmetric, std::move(f), 1.0);
}

double AngularDistribution::operator()(double theta, double phi, Sigma lam) const {
  if (lam.value() == 0) throw DomainError("photon helicity must be -1 or +1");
  return scale_ * f_(theta, phi, lam);
}

AngularDistribution AngularDistribution::scaled(double c) const {
  if (!(c >= 0.0) || !std::isfinite(c)) throw DomainError("distribution scale must be finite and >= 0");
  AngularDistribution d = *this;
  d.scale_ *= c;
  return d;
}

// ----------------------------------------------------- ModeDensityModifier

ModeDensityModifier ModeDensityModifier::vacuum() { return ModeDensityModifier(); }

ModeDensityModifier ModeDensityModifier::planar_cavity(double reflectivity) {
  if (!(reflectivity >= 0.0 && reflectivity < 1.0)) {
    throw DomainError("cavity reflectivity must lie in [0, 1)");
  }
  ModeDensityModifier m;
  m.kind_ = ModeDensityKind::PlanarCavity;
  m.reflectivity_ = reflectivity;
  return m;
}

ModeDensityModifier ModeDensityModifier::photonic_crystal(double band_edge, double curvature,
                                                          std::set<int> gapped_channels) {
  if (!(band_edge > 0.0) || !std::isfinite(band_edge)) throw DomainError("band edge must be positive");
  if (!(curvature > 0.0) || !std::isfinite(curvature)) throw DomainError("dispersion curvature must be positive");
  for (int s : gapped_channels) Sigma::from(s);
  ModeDensityModifier m;
  m.kind_ = ModeDensityKind::PhotonicCrystal;
  m.band_edge_ = band_edge;
  m.curvature_ = curvature;
  m.gapped_ = std::move(gapped_channels);
  return m;
}

double ModeDensityModifier::relative_density(double omega, Sigma channel) const {
  switch (kind_) {
    case ModeDensityKind::Vacuum: return 1.0;
    case ModeDensityKind::PlanarCavity: {
      const double r = std::abs(reflectivity_);
      return channel.value() == 0 ? (1.0 + r) / (1.0 - r) : (1.0 - r) / (1.0 + r);
    }
    case ModeDensityKind::PhotonicCrystal: {
      if (!gapped_.contains(channel.value())) return 1.0;
      if (omega <= band_edge_) return 0.0;
      return std::sqrt((omega - band_edge_) / (curvature_ * curvature_ * curvature_));
    }
  }
  return 1.0;
}

// ------------------------------------------------------------- K matrices

KMatrix k_spontaneous(const ModeDensityModifier& mod, double omega) {
  if (!(omega > 0.0) || !std::isfinite(omega)) throw DomainError("transition frequency must be positive");
  const auto sig = angular::all_sigmas();
  KMatrix k;
  for (Sigma q : sig) k(q, q) = (2.0 / 3.0) * mod.relative_density(omega, q);
  k.provenance = KProvenance::ClosedForm;
  if (!mod.frequency_flat()) k.evaluated_at = omega;
  return k;
}

KMatrix k_stimulated(const AngularDistribution& dist, const ModeDensityModifier& mod, double omega,
                     const QuadratureOptions& options) {
  if (!(omega > 0.0) || !std::isfinite(omega)) throw DomainError("transition frequency must be positive");
  KMatrix k = integrate(dist, options, true);
  apply_modifier(k, mod, omega);
  if (!mod.frequency_flat()) k.evaluated_at = omega;
  return k;
}

KMatrix k_angular_full_grid(const AngularDistribution& dist, const QuadratureOptions& options) {
  return integrate(dist, options, false);
}

double SelfCheckReport::max_deviation() const {
  double worst = 0.0;
  for (const auto& item : items) worst = std::max(worst, item.deviation);
  return worst;
}

SelfCheckReport quadrature_selfcheck(int quad_order) {
  if (quad_order < 4) throw DomainError("quadrature self-check needs order >= 4, got " + std::to_string(quad_order));
  QuadratureOptions opt;
  opt.theta_order = quad_order;
  SelfCheckReport report;

  // Orthogonality of the rank-1 rotation functions, one helicity at a time.
  const auto rule = quad::GaussLegendre::make(quad_order);
  const auto phis = quad::periodic_nodes(opt.phi_nodes);
  double ortho = 0.0;
  for (Sigma lam : angular::all_sigmas()) {
    for (Sigma a : angular::all_sigmas()) {
      for (Sigma b : angular::all_sigmas()) {
        cplx sum = 0.0;
        for (std::size_t i = 0; i < rule.nodes.size(); ++i) {
          const double theta = std::acos(rule.nodes[i]);
          for (double phi : phis) {
            sum += rule.weights[i] * 0.5 / static_cast<double>(phis.size()) *
                   std::conj(angular::wigner_D1(lam, a, phi, theta)) * angular::wigner_D1(lam, b, phi, theta);
          }
        }
        ortho = std::max(ortho, std::abs(sum - (a == b ? 1.0 / 3.0 : 0.0)));
      }
    }
  }
  report.items.push_back({"rotation-function orthogonality", ortho});

  const auto iso = k_angular_full_grid(AngularDistribution::isotropic(1.0), opt);
  report.items.push_back({"isotropic K = 2N/3", iso.max_abs_difference(KMatrix::diagonal(2.0 / 3, 2.0 / 3, 2.0 / 3))});

  const auto cos2 = k_angular_full_grid(AngularDistribution::axisymmetric_cos2(1.0), opt);
  report.items.push_back(
      {"cos^2 K = (4N/15, 2N/15, 4N/15)", cos2.max_abs_difference(KMatrix::diagonal(4.0 / 15, 2.0 / 15, 4.0 / 15))});
  return report;
}

}  // namespace vrelax::env
