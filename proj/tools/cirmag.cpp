// cirmag: transmission, Fisher-information and Monte Carlo scans for
// impurity-loaded waveguide magnetometers.

#include <CLI11.hpp>
#include <cstdio>
#include <iostream>
#include <map>
#include <optional>

#include "cirmag/commands.hpp"

int main(int argc, char** argv) {
  using namespace cirmag;
  CLI::App app{"Confinement-induced-resonance magnetometry toolkit (exit codes: 0 ok, "
               "1 usage, 2 config error, 3 numeric failure)"};
  app.set_version_flag("--version", CIRMAG_VERSION);
  std::string config_path;
  std::string out_dir;
  int threads = 1;
  std::optional<std::uint64_t> seed;
  app.add_option("--config", config_path, "configuration file (section.key = value)");
  app.add_option("--out", out_dir, "output directory (overrides output.dir)");
  app.add_option("--threads", threads, "worker threads")->check(CLI::PositiveNumber);
  app.add_option("--seed", seed, "random seed (overrides mc.seed)");
  const std::map<std::string, std::string> about = {
      {"scattering-scan", "a(B), a_s, 1/V_p, 1/a_d over scan.B"},
      {"transmission-scan", "T(B) and the even/odd phases over scan.B"},
      {"fisher-scan", "single-tube Fisher information and dB over scan.B"},
      {"gradiometer-map", "array uncertainties dB0, dBx over scan.B0 x scan.Bx"},
      {"mc-study", "Monte Carlo MLE variance against the CRLB"},
  };
  for (const auto& name : command_names()) {
    const auto it = about.find(name);
    app.add_subcommand(name, it == about.end() ? "" : it->second)->fallthrough();
  }
  app.require_subcommand(1);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    RunConfig config = config_path.empty() ? RunConfig{} : load_config(config_path);
    if (!out_dir.empty()) config.output.dir = out_dir;
    if (seed) config.mc.seed = *seed;
    const std::string name = app.get_subcommands().front()->get_name();
    const CommandOutput out = run_command(name, config, threads);
    std::cout << out.path << "\n";
    if (!out.message.empty()) std::cerr << "cirmag: " << out.message << "\n";
    return out.status;
  } catch (const std::exception& e) {
    std::cerr << "cirmag: " << e.what() << "\n";
    return exit_code_for(e);
  }
}
