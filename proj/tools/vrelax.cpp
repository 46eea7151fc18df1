// vrelax command-line entry point.

#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "vrelax/commands.hpp"
#include "vrelax/config.hpp"
#include "vrelax/csv.hpp"
#include "vrelax/errors.hpp"

using namespace vrelax;

int main(int argc, char** argv) {
  CLI::App app{"Relaxation and stimulated-transition operators for degenerate V-type atoms"};
  app.set_version_flag("--version", "vrelax 0.1.0");

  std::string command;
  std::string config_path, preset, out_path;
  std::vector<std::string> overrides;
  std::optional<double> reflectivity;
  std::optional<int> threads;
  cli::DoctorOptions doctor;
  std::string grid_cap = doctor.grid_cap.str();

  app.add_option("command", command, "kmatrix | rates | superop | evolve | steady | doctor")
      ->required()
      ->check(CLI::IsMember({"kmatrix", "rates", "superop", "evolve", "steady", "doctor"}));
  app.add_option("--config", config_path, "scenario INI file");
  app.add_option("--preset", preset, "built-in scenario: " + [] {
    std::string s;
    for (const auto& n : cfg::preset_names()) s += (s.empty() ? "" : ", ") + n;
    return s;
  }());
  app.add_option("--out", out_path, "write the table here instead of stdout");
  app.add_option("--r", reflectivity, "cavity reflectivity (sets environment.r)");
  app.add_option("--threads", threads, "worker threads for quadrature and assembly");
  app.add_option("--set", overrides, "override one key: section.key=value")->take_all();
  app.add_option("--quad-order", doctor.quad_order)->group("");
  app.add_option("--grid-cap", grid_cap)->group("");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : cli::kConfigError;
  }

  try {
    if (command == "doctor") {
      doctor.grid_cap = angular::HalfInt::parse(grid_cap);
      return cli::cmd_doctor(doctor, std::cout);
    }
    if (config_path.empty() && preset.empty()) throw ConfigError("give --config, --preset or both");
    if (reflectivity) overrides.push_back("environment.r=" + csv::format_double(*reflectivity));
    if (threads) overrides.push_back("run.threads=" + std::to_string(*threads));
    const auto config = cfg::load(preset.empty() ? std::nullopt : std::optional(preset),
                                  config_path.empty() ? std::nullopt : std::optional(config_path), overrides);

    std::ofstream file;
    if (!out_path.empty()) {
      file.open(out_path, std::ios::binary);
      if (!file) throw ConfigError("cannot write '" + out_path + "'");
    }
    std::ostream& out = out_path.empty() ? std::cout : file;
    int rc = cli::kOk;
    if (command == "kmatrix") rc = cli::cmd_kmatrix(config, out, std::cerr);
    else if (command == "rates") rc = cli::cmd_rates(config, out, std::cerr);
    else if (command == "superop") rc = cli::cmd_superop(config, out, std::cerr);
    else if (command == "evolve") rc = cli::cmd_evolve(config, out, std::cerr);
    else if (command == "steady") rc = cli::cmd_steady(config, out, std::cerr);
    out.flush();
    return rc;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return cli::kConfigError;
  } catch (const DomainError& e) {
    std::cerr << "invalid input: " << e.what() << '\n';
    return cli::kConfigError;
  } catch (const NumericalAbort& e) {
    std::cerr << "numerical abort: " << e.what() << '\n';
    return cli::kNumericalAbort;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return cli::kCheckFailed;
  }
}
