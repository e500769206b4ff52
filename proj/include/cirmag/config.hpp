#pragma once

// Run configuration: flat `section.key = value` text, one entry per line,
// `#` starts a comment.  Fields in Gauss, gradients in G/mm, lengths in nm
// at this boundary; the trap and the short-range model use abar.

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "cirmag/cir.hpp"
#include "cirmag/estimation.hpp"
#include "cirmag/radial.hpp"

namespace cirmag {

/// `points` values from `min` to `max` inclusive.
struct ScanGrid {
  double min = 0.0;
  double max = 0.0;
  int points = 1;

  std::vector<double> values() const;
  bool operator==(const ScanGrid&) const = default;
};

struct RunConfig {
  FeshbachResonance resonance;

  TrapConfig trap;
  double mass_factor = 1.0;
  std::optional<double> d_wave_c2;
  std::optional<double> d_wave_c3;
  std::optional<double> d_wave_c4;

  VdwModel model;

  struct Array {
    int Mx = 51;
    int My = 51;
    double L_nm = 523.0;
    double abar_nm = 6.08;  ///< Cs, C6 = 6890 au, pinned impurity
    bool operator==(const Array&) const = default;
  } array;

  struct Scan {
    ScanGrid B{-0.3, 0.3, 2001};
    ScanGrid B0{0.0, 0.2, 201};
    ScanGrid Bx{0.0, 1.0, 3};
    bool memo = true;
    double memo_step_delta = 1e-3;
    double h0_delta = 1e-4;
    bool operator==(const Scan&) const = default;
  } scan;

  struct Mc {
    std::vector<std::uint64_t> N{100, 1000, 10000};
    int trials = 200;
    std::uint64_t seed = 1;
    std::optional<double> B0;  ///< unset: T = 1/2 point next to the single-tube optimum on scan.B
    double Bx = 0.0;
    double By = 0.0;
    std::string estimate_By = "false";  ///< true | false | auto
    double bounds_sigma = 10.0;
    int bootstrap = 1000;
    bool operator==(const Mc&) const = default;
  } mc;

  struct Output {
    std::string dir = ".";
    std::string format = "csv";
    bool gnuplot = false;
    bool operator==(const Output&) const = default;
  } output;

  /// Throws ConfigError naming the offending key.
  void validate() const;
  bool operator==(const RunConfig&) const = default;

  PhysicsSetup physics() const;
  /// Tube array in mm.
  TubeArray tube_array() const;
  double h0() const { return scan.h0_delta * std::abs(resonance.Delta); }
};

/// Parses configuration text.  Unknown keys, duplicates and malformed values
/// throw ConfigError with the line number.  Missing keys keep their defaults.
RunConfig parse_config(const std::string& text);
RunConfig load_config(const std::string& path);

/// Every key in a fixed order, numbers with 17 significant digits, so that
/// parse_config(serialize_config(c)) == c.
std::string serialize_config(const RunConfig& config);

/// Recovers the configuration embedded in the `#` header of an output file.
RunConfig parse_output_header(std::istream& in);

}  // namespace cirmag
