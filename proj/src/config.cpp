#include "vrelax/config.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>

#include "vrelax/csv.hpp"

namespace vrelax::cfg {

namespace {

using csv::trim;

// ---------------------------------------------------------- value parsing

// Plain decimals or an exact ratio such as "4/75".
double to_double(const std::string& v, int line) {
  if (const auto slash = v.find('/'); slash != std::string::npos) {
    const double num = csv::parse_double(v.substr(0, slash), line);
    const double den = csv::parse_double(v.substr(slash + 1), line);
    if (den == 0.0) throw ConfigError("zero denominator in '" + v + "'", line);
    return num / den;
  }
  return csv::parse_double(v, line);
}

int to_int(const std::string& v, int line) {
  int x = 0;
  const char* first = v.data();
  if (!v.empty() && v.front() == '+') ++first;
  auto [p, ec] = std::from_chars(first, v.data() + v.size(), x);
  if (v.empty() || ec != std::errc() || p != v.data() + v.size()) throw ConfigError("not an integer: '" + v + "'", line);
  return x;
}

bool to_bool(const std::string& v, int line) {
  if (v == "true") return true;
  if (v == "false") return false;
  throw ConfigError("expected true or false, got '" + v + "'", line);
}

HalfInt to_halfint(const std::string& v, int line) {
  try {
    return HalfInt::parse(v);
  } catch (const DomainError& e) {
    throw ConfigError(e.what(), line);
  }
}

std::string one_of(const std::string& v, std::initializer_list<const char*> allowed, int line) {
  for (const char* a : allowed)
    if (v == a) return v;
  std::string list;
  for (const char* a : allowed) list += (list.empty() ? "" : ", ") + std::string(a);
  throw ConfigError("'" + v + "' is not one of: " + list, line);
}

std::map<HalfInt, double> to_energies(const std::string& v, int line) {
  std::map<HalfInt, double> out;
  if (v.empty()) return out;
  for (const auto& item : csv::split(v, ',')) {
    const auto colon = item.find(':');
    if (colon == std::string::npos) throw ConfigError("energy entries are F:omega, got '" + item + "'", line);
    const HalfInt F = to_halfint(trim(item.substr(0, colon)), line);
    if (!out.emplace(F, to_double(trim(item.substr(colon + 1)), line)).second) {
      throw ConfigError("F = " + F.str() + " listed twice", line);
    }
  }
  return out;
}

std::set<int> to_channels(const std::string& v, int line) {
  std::set<int> out;
  if (v.empty()) return out;
  for (const auto& item : csv::split(v, ',')) {
    const int s = to_int(item, line);
    if (s < -1 || s > 1) throw ConfigError("gapped channel must be -1, 0 or 1", line);
    out.insert(s);
  }
  return out;
}

std::string from_energies(const std::map<HalfInt, double>& m) {
  std::string s;
  for (const auto& [F, w] : m) s += (s.empty() ? "" : ", ") + F.str() + ":" + csv::format_double(w);
  return s;
}

std::string from_channels(const std::set<int>& c) {
  std::string s;
  for (int x : c) s += (s.empty() ? "" : ",") + std::to_string(x);
  return s;
}

std::string from_bool(bool b) { return b ? "true" : "false"; }

// ---------------------------------------------------------- field table

struct Field {
  const char* section;
  const char* key;
  std::function<void(ScenarioConfig&, const std::string&, int)> set;
  std::function<std::string(const ScenarioConfig&)> get;
  std::function<bool(const ScenarioConfig&)> relevant;
};

bool always(const ScenarioConfig&) { return true; }
bool has_c(const ScenarioConfig& c) { return c.system.J_c.has_value(); }
bool is_explicit(const ScenarioConfig& c) { return c.system.dipole == "explicit"; }
bool uses_quadrature(const ScenarioConfig& c) {
  const auto& f = c.environment.field;
  return f == "isotropic" || f == "cos2" || f == "tabulated";
}

#define VR_DOUBLE(sec, member, rel)                                                                   \
  Field {                                                                                             \
    #sec, #member, [](ScenarioConfig& c, const std::string& v, int l) { c.sec.member = to_double(v, l); }, \
        [](const ScenarioConfig& c) { return csv::format_double(c.sec.member); }, rel                 \
  }
#define VR_INT(sec, member, rel)                                                                   \
  Field {                                                                                          \
    #sec, #member, [](ScenarioConfig& c, const std::string& v, int l) { c.sec.member = to_int(v, l); }, \
        [](const ScenarioConfig& c) { return std::to_string(c.sec.member); }, rel                  \
  }

const std::vector<Field>& fields() {
  static const std::vector<Field> table = {
      {"system", "type", [](ScenarioConfig& c, const std::string& v, int l) { c.system.type = one_of(v, {"fine", "hyperfine"}, l); },
       [](const ScenarioConfig& c) { return c.system.type; }, always},
      {"system", "J_b", [](ScenarioConfig& c, const std::string& v, int l) { c.system.J_b = to_halfint(v, l); },
       [](const ScenarioConfig& c) { return c.system.J_b.str(); }, always},
      {"system", "J_c",
       [](ScenarioConfig& c, const std::string& v, int l) {
         if (v == "none") c.system.J_c.reset();
         else c.system.J_c = to_halfint(v, l);
       },
       [](const ScenarioConfig& c) { return c.system.J_c ? c.system.J_c->str() : std::string("none"); }, always},
      {"system", "J_d", [](ScenarioConfig& c, const std::string& v, int l) { c.system.J_d = to_halfint(v, l); },
       [](const ScenarioConfig& c) { return c.system.J_d.str(); }, always},
      VR_DOUBLE(system, omega_bd, always),
      VR_DOUBLE(system, omega_cd, has_c),
      {"system", "dipole",
       [](ScenarioConfig& c, const std::string& v, int l) { c.system.dipole = one_of(v, {"normalized", "explicit"}, l); },
       [](const ScenarioConfig& c) { return c.system.dipole; }, always},
      VR_DOUBLE(system, S, [](const ScenarioConfig& c) { return !is_explicit(c); }),
      VR_DOUBLE(system, mu_bd, is_explicit),
      VR_DOUBLE(system, mu_cd, [](const ScenarioConfig& c) { return is_explicit(c) && has_c(c); }),
      VR_DOUBLE(system, prefactor, is_explicit),
      {"system", "alkali", [](ScenarioConfig& c, const std::string& v, int l) { c.system.alkali = to_bool(v, l); },
       [](const ScenarioConfig& c) { return from_bool(c.system.alkali); }, is_explicit},
      {"system", "I", [](ScenarioConfig& c, const std::string& v, int l) { c.system.I = to_halfint(v, l); },
       [](const ScenarioConfig& c) { return c.system.I.str(); }, [](const ScenarioConfig& c) { return c.hyperfine(); }},
      {"system", "energies_b",
       [](ScenarioConfig& c, const std::string& v, int l) { c.system.energies_b = to_energies(v, l); },
       [](const ScenarioConfig& c) { return from_energies(c.system.energies_b); },
       [](const ScenarioConfig& c) { return c.hyperfine(); }},
      {"system", "energies_c",
       [](ScenarioConfig& c, const std::string& v, int l) { c.system.energies_c = to_energies(v, l); },
       [](const ScenarioConfig& c) { return from_energies(c.system.energies_c); },
       [](const ScenarioConfig& c) { return c.hyperfine() && has_c(c); }},
      {"system", "energies_d",
       [](ScenarioConfig& c, const std::string& v, int l) { c.system.energies_d = to_energies(v, l); },
       [](const ScenarioConfig& c) { return from_energies(c.system.energies_d); },
       [](const ScenarioConfig& c) { return c.hyperfine(); }},

      {"environment", "modifier",
       [](ScenarioConfig& c, const std::string& v, int l) {
         c.environment.modifier = one_of(v, {"vacuum", "cavity", "photonic"}, l);
       },
       [](const ScenarioConfig& c) { return c.environment.modifier; }, always},
      VR_DOUBLE(environment, r, [](const ScenarioConfig& c) { return c.environment.modifier == "cavity"; }),
      VR_DOUBLE(environment, band_edge, [](const ScenarioConfig& c) { return c.environment.modifier == "photonic"; }),
      VR_DOUBLE(environment, curvature, [](const ScenarioConfig& c) { return c.environment.modifier == "photonic"; }),
      {"environment", "gapped",
       [](ScenarioConfig& c, const std::string& v, int l) { c.environment.gapped = to_channels(v, l); },
       [](const ScenarioConfig& c) { return from_channels(c.environment.gapped); },
       [](const ScenarioConfig& c) { return c.environment.modifier == "photonic"; }},
      {"environment", "field",
       [](ScenarioConfig& c, const std::string& v, int l) {
         c.environment.field = one_of(v, {"none", "isotropic", "cos2", "tabulated", "injected"}, l);
       },
       [](const ScenarioConfig& c) { return c.environment.field; }, always},
      VR_DOUBLE(environment, N, [](const ScenarioConfig& c) { return c.environment.field != "none"; }),
      {"environment", "distribution",
       [](ScenarioConfig& c, const std::string& v, int) { c.environment.distribution = v; },
       [](const ScenarioConfig& c) { return c.environment.distribution; },
       [](const ScenarioConfig& c) { return c.environment.field == "tabulated"; }},
      VR_DOUBLE(environment, k_mm, [](const ScenarioConfig& c) { return c.environment.field == "injected"; }),
      VR_DOUBLE(environment, k_00, [](const ScenarioConfig& c) { return c.environment.field == "injected"; }),
      VR_DOUBLE(environment, k_pp, [](const ScenarioConfig& c) { return c.environment.field == "injected"; }),
      VR_INT(environment, quad_order, uses_quadrature),
      VR_INT(environment, phi_nodes, uses_quadrature),

      VR_DOUBLE(run, t_final, always),
      VR_DOUBLE(run, dt, always),
      VR_INT(run, stride, always),
      {"run", "initial", [](ScenarioConfig& c, const std::string& v, int) { c.run.initial = v; },
       [](const ScenarioConfig& c) { return c.run.initial; }, always},
      {"run", "output",
       [](ScenarioConfig& c, const std::string& v, int l) { c.run.output = one_of(v, {"full", "populations"}, l); },
       [](const ScenarioConfig& c) { return c.run.output; }, always},
      {"run", "processes",
       [](ScenarioConfig& c, const std::string& v, int l) {
         if (v != "none") {
           for (const auto& p : csv::split(v, ',')) one_of(p, {"relaxation", "stimulated"}, l);
         }
         c.run.processes = v;
       },
       [](const ScenarioConfig& c) { return c.run.processes; }, always},
      VR_INT(run, threads, always),
  };
  return table;
}

#undef VR_DOUBLE
#undef VR_INT

const Field* find_field(const std::string& section, const std::string& key) {
  for (const auto& f : fields())
    if (section == f.section && key == f.key) return &f;
  return nullptr;
}

std::string full_key(const Field& f) { return std::string(f.section) + "." + f.key; }

bool from_preset(const std::string& source) { return source.rfind("preset:", 0) == 0; }

}  // namespace

// ------------------------------------------------------------- ingestion

void apply_ini(ScenarioConfig& config, std::istream& in, const std::string& source) {
  std::string raw;
  std::string section;
  std::set<std::string> seen;
  int line = 0;
  while (std::getline(in, raw)) {
    ++line;
    if (!raw.empty() && raw.back() == '\r') raw.pop_back();
    const std::string t = trim(raw);
    if (t.empty() || t.front() == '#' || t.front() == ';') continue;
    if (t.front() == '[') {
      if (t.back() != ']') throw ConfigError(source + ": malformed section header '" + t + "'", line);
      section = trim(t.substr(1, t.size() - 2));
      if (section != "system" && section != "environment" && section != "run") {
        throw ConfigError(source + ": unknown section [" + section + "]", line);
      }
      continue;
    }
    const auto eq = t.find('=');
    if (eq == std::string::npos) throw ConfigError(source + ": expected 'key = value', got '" + t + "'", line);
    if (section.empty()) throw ConfigError(source + ": key outside of a section", line);
    const std::string key = trim(t.substr(0, eq));
    const std::string value = trim(t.substr(eq + 1));
    const Field* f = find_field(section, key);
    if (!f) throw ConfigError(source + ": unknown key '" + key + "' in [" + section + "]", line);
    if (!seen.insert(full_key(*f)).second) throw ConfigError(source + ": duplicate key '" + key + "'", line);
    try {
      f->set(config, value, 0);
    } catch (const ConfigError& e) {
      throw ConfigError(source + ": " + full_key(*f) + ": " + e.what(), line);
    }
    config.lines[full_key(*f)] = line;
    config.origins[full_key(*f)] = source;
  }
}

void apply_ini_file(ScenarioConfig& config, const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  const std::string before = config.environment.distribution;
  apply_ini(config, in, path);
  auto& dist = config.environment.distribution;
  if (dist != before && !dist.empty() && std::filesystem::path(dist).is_relative()) {
    dist = (std::filesystem::path(path).parent_path() / dist).lexically_normal().string();
  }
}

void apply_override(ScenarioConfig& config, const std::string& assignment) {
  const auto eq = assignment.find('=');
  const auto dot = assignment.find('.');
  if (eq == std::string::npos || dot == std::string::npos || dot > eq) {
    throw ConfigError("--set expects section.key=value, got '" + assignment + "'");
  }
  std::istringstream in("[" + trim(assignment.substr(0, dot)) + "]\n" + assignment.substr(dot + 1) + "\n");
  apply_ini(config, in, "--set");
  // The synthetic INI line number means nothing to the user.
  config.lines.erase(trim(assignment.substr(0, dot)) + "." + trim(assignment.substr(dot + 1, eq - dot - 1)));
}

// ------------------------------------------------------------ validation

void ScenarioConfig::validate() const {
  auto line_of = [&](const std::string& key) {
    auto it = lines.find(key);
    return it == lines.end() ? 0 : it->second;
  };
  auto origin_of = [&](const std::string& key) {
    auto it = origins.find(key);
    return it == origins.end() ? std::string("<defaults>") : it->second;
  };
  auto fail = [&](const std::string& key, const std::string& msg) {
    throw ConfigError(origin_of(key) + ": " + key + ": " + msg, line_of(key));
  };

  // Keys set by the user that the chosen kinds ignore. Presets may carry them.
  for (const auto& f : fields()) {
    const std::string key = full_key(f);
    if (f.relevant(*this) || !origins.contains(key) || from_preset(origin_of(key))) continue;
    fail(key, "has no effect for this scenario");
  }

  const auto& s = system;
  if (!(s.omega_bd > 0.0 && std::isfinite(s.omega_bd))) fail("system.omega_bd", "must be positive and finite");
  if (s.J_c && !(s.omega_cd > 0.0 && std::isfinite(s.omega_cd))) fail("system.omega_cd", "must be positive and finite");
  if (s.dipole == "normalized" && !(s.S >= 0.0 && std::isfinite(s.S))) fail("system.S", "must be >= 0 and finite");
  try {
    if (hyperfine()) hyperfine_scheme().validate();
    else level_scheme().validate();
  } catch (const DomainError& e) {
    fail("system.J_b", e.what());
  }

  const auto& e = environment;
  if (e.modifier == "cavity" && !(e.r >= 0.0 && e.r < 1.0)) fail("environment.r", "reflectivity must lie in [0, 1)");
  if (e.modifier == "photonic") {
    if (!(e.band_edge > 0.0)) fail("environment.band_edge", "must be positive");
    if (!(e.curvature > 0.0)) fail("environment.curvature", "must be positive");
  }
  if (e.field != "none" && !(e.N >= 0.0)) fail("environment.N", "photon number must be >= 0");
  if (e.field == "tabulated" && e.distribution.empty()) fail("environment.field", "tabulated field needs a distribution file");
  if (e.field == "injected" && (e.k_mm < 0.0 || e.k_00 < 0.0 || e.k_pp < 0.0)) {
    fail("environment.k_00", "injected diagonal K entries must be >= 0");
  }
  if (uses_quadrature(*this)) {
    if (e.quad_order < 4) fail("environment.quad_order", "must be >= 4");
    if (e.phi_nodes < 1) fail("environment.phi_nodes", "must be >= 1");
  }

  if (!(run.t_final >= 0.0)) fail("run.t_final", "must be >= 0");
  if (!(run.dt > 0.0)) fail("run.dt", "must be positive");
  if (run.stride < 1) fail("run.stride", "must be >= 1");
  if (run.threads < 1) fail("run.threads", "must be >= 1");
}

void ScenarioConfig::normalize() {
  const ScenarioConfig defaults;
  for (const auto& f : fields()) {
    if (!f.relevant(*this)) f.set(*this, f.get(defaults), 0);
  }
}

ScenarioConfig load(const std::optional<std::string>& preset, const std::optional<std::string>& path,
                    const std::vector<std::string>& overrides) {
  ScenarioConfig config;
  if (preset) {
    std::istringstream in(preset_text(*preset));
    apply_ini(config, in, "preset:" + *preset);
  }
  if (path) apply_ini_file(config, *path);
  for (const auto& o : overrides) apply_override(config, o);
  config.validate();
  config.normalize();
  return config;
}

bool ScenarioConfig::includes(const std::string& process) const {
  if (run.processes == "none") return false;
  const auto parts = csv::split(run.processes, ',');
  return std::find(parts.begin(), parts.end(), process) != parts.end();
}

ops::LevelScheme ScenarioConfig::level_scheme() const {
  ops::LevelScheme s;
  s.J_b = system.J_b;
  s.J_c = system.J_c;
  s.J_d = system.J_d;
  s.omega_bd = system.omega_bd;
  s.omega_cd = system.omega_cd;
  s.dipole.mode = system.dipole == "explicit" ? ops::DipoleMode::Explicit : ops::DipoleMode::Normalized;
  s.dipole.S = system.S;
  s.dipole.mu_bd = system.mu_bd;
  s.dipole.mu_cd = system.mu_cd;
  s.dipole.prefactor = system.prefactor;
  s.dipole.alkali = system.alkali;
  return s;
}

ops::HyperfineScheme ScenarioConfig::hyperfine_scheme() const {
  ops::HyperfineScheme h;
  h.fine = level_scheme();
  h.I = system.I;
  h.energies[static_cast<int>(ops::Level::b)] = system.energies_b;
  h.energies[static_cast<int>(ops::Level::c)] = system.energies_c;
  h.energies[static_cast<int>(ops::Level::d)] = system.energies_d;
  return h;
}

env::ModeDensityModifier ScenarioConfig::modifier() const {
  if (environment.modifier == "cavity") return env::ModeDensityModifier::planar_cavity(environment.r);
  if (environment.modifier == "photonic") {
    return env::ModeDensityModifier::photonic_crystal(environment.band_edge, environment.curvature, environment.gapped);
  }
  return env::ModeDensityModifier::vacuum();
}

std::optional<env::AngularDistribution> ScenarioConfig::distribution() const {
  const auto& f = environment.field;
  if (f == "isotropic") return env::AngularDistribution::isotropic(environment.N);
  if (f == "cos2") return env::AngularDistribution::axisymmetric_cos2(environment.N);
  if (f == "tabulated") {
    return env::AngularDistribution::tabulated(env::TabulatedGrid::from_csv_file(environment.distribution))
        .scaled(environment.N);
  }
  return std::nullopt;
}

std::optional<env::KMatrix> ScenarioConfig::injected_k() const {
  if (environment.field != "injected") return std::nullopt;
  const double n = environment.N;
  return env::KMatrix::diagonal(n * environment.k_mm, n * environment.k_00, n * environment.k_pp,
                                env::KProvenance::Injected);
}

env::QuadratureOptions ScenarioConfig::quadrature() const {
  return {environment.quad_order, environment.phi_nodes, run.threads};
}

// --------------------------------------------------------- serialization

std::string serialize(const ScenarioConfig& config) {
  std::ostringstream out;
  std::string section;
  for (const auto& f : fields()) {
    if (!f.relevant(config)) continue;
    if (section != f.section) {
      if (!section.empty()) out << '\n';
      section = f.section;
      out << '[' << section << "]\n";
    }
    out << f.key << " = " << f.get(config) << '\n';
  }
  return out.str();
}

// ---------------------------------------------------------------- presets

namespace {

const std::map<std::string, std::string>& presets() {
  static const std::map<std::string, std::string> table = {
      {"dline-paper-k",
       "[system]\nJ_b = 3/2\nJ_c = 1/2\nJ_d = 1/2\nomega_bd = 10\nomega_cd = 9.9\nS = 1\n"
       "[environment]\nfield = injected\nN = 1\n"
       "k_mm = 4/75\nk_00 = 4/15\nk_pp = 4/75\n"},
      {"dline-isotropic",
       "[system]\nJ_b = 3/2\nJ_c = 1/2\nJ_d = 1/2\nomega_bd = 10\nomega_cd = 9.9\nS = 1\n"
       "[environment]\nfield = isotropic\nN = 1\n"},
      {"dline-cos2",
       "[system]\nJ_b = 3/2\nJ_c = 1/2\nJ_d = 1/2\nomega_bd = 10\nomega_cd = 9.9\nS = 1\n"
       "[environment]\nfield = cos2\nN = 1\n"},
      {"dline-cavity",
       "[system]\nJ_b = 3/2\nJ_c = 1/2\nJ_d = 1/2\nomega_bd = 10\nomega_cd = 9.9\nS = 1\n"
       "[environment]\nmodifier = cavity\nr = 0.9\n"},
      {"dline-photonic",
       "[system]\nJ_b = 3/2\nJ_c = 1/2\nJ_d = 1/2\nomega_bd = 10.1\nomega_cd = 10\nS = 1\n"
       "[environment]\nmodifier = photonic\nband_edge = 10.05\ncurvature = 1\ngapped = 0\n"},
      {"two-level",
       "[system]\nJ_b = 1\nJ_c = none\nJ_d = 0\nomega_bd = 10\nS = 0.75\n"
       "[run]\ninitial = single:b:1\nt_final = 5\ndt = 0.001\nstride = 100\noutput = populations\n"
       "processes = relaxation\n"},
      {"hyperfine-sodium",
       "[system]\ntype = hyperfine\nJ_b = 3/2\nJ_c = 1/2\nJ_d = 1/2\nI = 3/2\nomega_bd = 10\nomega_cd = 9.9\nS = 1\n"
       "[environment]\nmodifier = cavity\nr = 0.9\n"},
  };
  return table;
}

}  // namespace

std::vector<std::string> preset_names() {
  std::vector<std::string> out;
  for (const auto& [k, v] : presets()) out.push_back(k);
  return out;
}

std::string preset_text(const std::string& name) {
  auto it = presets().find(name);
  if (it == presets().end()) {
    std::string list;
    for (const auto& n : preset_names()) list += (list.empty() ? "" : ", ") + n;
    throw ConfigError("unknown preset '" + name + "' (known: " + list + ")");
  }
  return it->second;
}

}  // namespace vrelax::cfg
