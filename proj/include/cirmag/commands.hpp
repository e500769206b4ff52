#pragma once

// Batch commands behind the command-line front end.  Each writes one table
// (CSV or JSON) whose header embeds the resolved configuration.

#include <cstdint>
#include <exception>
#include <memory>
#include <string>
#include <variant>
#include <vector>

#include "cirmag/config.hpp"
#include "cirmag/transmission_model.hpp"

namespace cirmag {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitNumeric = 3;

using Cell = std::variant<double, std::int64_t, std::string>;

struct Table {
  std::vector<std::string> columns;
  std::vector<std::vector<Cell>> rows;
};

struct CommandOutput {
  std::string path;  ///< file written
  int status = kExitOk;
  std::string message{};
};

/// Writes `table` as <dir>/<stem>.csv or .json (plus <stem>.gp when
/// output.gnuplot is set).  Returns the data file path.
std::string write_table(const RunConfig& config, const std::string& command,
                        const std::string& stem, const Table& table);

/// Loads the physics model used by the scan commands over [B_lo, B_hi],
/// memoized unless scan.memo is false.
std::unique_ptr<TransmissionModel> make_transmission(const RunConfig& config, double B_lo,
                                                     double B_hi, int threads);

CommandOutput cmd_scattering_scan(const RunConfig& config, int threads);
CommandOutput cmd_transmission_scan(const RunConfig& config, int threads);
CommandOutput cmd_fisher_scan(const RunConfig& config, int threads);
CommandOutput cmd_gradiometer_map(const RunConfig& config, int threads);
CommandOutput cmd_mc_study(const RunConfig& config, int threads);

/// Dispatch by name; unknown names throw std::invalid_argument.
CommandOutput run_command(const std::string& name, const RunConfig& config, int threads);
const std::vector<std::string>& command_names();

/// Maps an exception from a command to an exit code.
int exit_code_for(const std::exception& e);

}  // namespace cirmag
