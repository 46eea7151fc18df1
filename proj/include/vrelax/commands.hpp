#pragma once

// The six CLI commands. Each writes its table to `out` and diagnostics to
// `log`, and returns the process exit code.

#include <iosfwd>
#include <string>

#include "vrelax/angular.hpp"
#include "vrelax/config.hpp"
#include "vrelax/dynamics.hpp"

namespace vrelax::cli {

enum ExitCode : int { kOk = 0, kCheckFailed = 1, kConfigError = 2, kNumericalAbort = 3 };

struct DoctorOptions {
  int quad_order = 16;
  angular::HalfInt grid_cap = angular::HalfInt::from_twice(9);
};

int cmd_kmatrix(const cfg::ScenarioConfig& config, std::ostream& out, std::ostream& log);
int cmd_rates(const cfg::ScenarioConfig& config, std::ostream& out, std::ostream& log);
int cmd_superop(const cfg::ScenarioConfig& config, std::ostream& out, std::ostream& log);
int cmd_evolve(const cfg::ScenarioConfig& config, std::ostream& out, std::ostream& log);
int cmd_steady(const cfg::ScenarioConfig& config, std::ostream& out, std::ostream& log);
int cmd_doctor(const DoctorOptions& options, std::ostream& out);

/// run.initial: single:<level>:<M> (hyperfine: single:<level>:<F>:<M>),
/// level-uniform:<level>, thermal-ground or maximally-mixed.
dyn::DensityMatrix initial_state(const cfg::ScenarioConfig& config, const ops::Basis& basis);

}  // namespace vrelax::cli
