#pragma once

// Scenario configuration: a flat INI file with [system], [environment] and
// [run] sections. Parsing is strict (unknown sections/keys, duplicates and
// keys that have no effect for the chosen kinds are rejected with the line).

#include <iosfwd>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "vrelax/angular.hpp"
#include "vrelax/environment.hpp"
#include "vrelax/operators.hpp"

namespace vrelax::cfg {

using angular::HalfInt;

struct SystemConfig {
  std::string type = "fine";  // fine | hyperfine
  HalfInt J_b = HalfInt::from_twice(3);
  std::optional<HalfInt> J_c = HalfInt::from_twice(1);
  HalfInt J_d = HalfInt::from_twice(1);
  double omega_bd = 10.0;
  double omega_cd = 10.0;
  std::string dipole = "normalized";  // normalized | explicit
  double S = 1.0;
  double mu_bd = 1.0;
  double mu_cd = 1.0;
  double prefactor = 1.0;
  bool alkali = false;
  HalfInt I;
  std::map<HalfInt, double> energies_b, energies_c, energies_d;

  bool operator==(const SystemConfig&) const = default;
};

struct EnvironmentConfig {
  std::string modifier = "vacuum";  // vacuum | cavity | photonic
  double r = 0.0;
  double band_edge = 1.0;
  double curvature = 1.0;
  std::set<int> gapped;
  std::string field = "none";  // none | isotropic | cos2 | tabulated | injected
  double N = 1.0;
  std::string distribution;
  // Injected diagonal K in units of N, sigma = -1, 0, +1.
  double k_mm = 0.0;
  double k_00 = 0.0;
  double k_pp = 0.0;
  int quad_order = 16;
  int phi_nodes = 64;

  bool operator==(const EnvironmentConfig&) const = default;
};

struct RunConfig {
  double t_final = 10.0;
  double dt = 0.005;
  int stride = 10;
  std::string initial = "level-uniform:b";
  std::string output = "full";  // full | populations
  std::string processes = "relaxation,stimulated";
  int threads = 1;

  bool operator==(const RunConfig&) const = default;
};

struct ScenarioConfig {
  SystemConfig system;
  EnvironmentConfig environment;
  RunConfig run;

  bool operator==(const ScenarioConfig& o) const {
    return system == o.system && environment == o.environment && run == o.run;
  }

  /// Line and source of the last assignment of each "section.key".
  std::map<std::string, int> lines;
  std::map<std::string, std::string> origins;

  /// Range and consistency checks; ConfigError anchored at the offending key.
  void validate() const;
  /// Resets every key the chosen kinds ignore to its default.
  void normalize();

  bool hyperfine() const { return system.type == "hyperfine"; }
  ops::LevelScheme level_scheme() const;
  ops::HyperfineScheme hyperfine_scheme() const;
  env::ModeDensityModifier modifier() const;
  /// Empty for field = none or injected.
  std::optional<env::AngularDistribution> distribution() const;
  /// N * (k_mm, k_00, k_pp) for field = injected.
  std::optional<env::KMatrix> injected_k() const;
  env::QuadratureOptions quadrature() const;
  bool includes(const std::string& process) const;
};

/// Applies INI text on top of `config`. Keys repeated within one text are an error.
void apply_ini(ScenarioConfig& config, std::istream& in, const std::string& source);
void apply_ini_file(ScenarioConfig& config, const std::string& path);
/// "section.key=value" override.
void apply_override(ScenarioConfig& config, const std::string& assignment);

/// Preset, then config file, then overrides; validated and normalized.
ScenarioConfig load(const std::optional<std::string>& preset, const std::optional<std::string>& path,
                    const std::vector<std::string>& overrides);

/// Canonical INI text; only keys relevant for the chosen kinds are written.
std::string serialize(const ScenarioConfig& config);

std::vector<std::string> preset_names();
/// Built-in scenario INI text; ConfigError for an unknown name.
std::string preset_text(const std::string& name);

}  // namespace vrelax::cfg
