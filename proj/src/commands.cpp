#include "cirmag/commands.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <memory>
#include <sstream>

#include <json.hpp>

#include "cirmag/mc.hpp"
#include "cirmag/parallel.hpp"

namespace cirmag {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::string cell_text(const Cell& c) {
  if (const auto* d = std::get_if<double>(&c)) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17e", *d);
    return buf;
  }
  if (const auto* i = std::get_if<std::int64_t>(&c)) return std::to_string(*i);
  return std::get<std::string>(c);
}

std::string header(const RunConfig& config, const std::string& command) {
  std::string out = "# cirmag " CIRMAG_VERSION "\n# command: " + command + "\n# config:\n";
  std::istringstream in(serialize_config(config));
  std::string line;
  while (std::getline(in, line)) out += "# " + line + "\n";
  out += "# end config\n";
  return out;
}

std::string gnuplot_script(const std::string& data, const std::string& stem,
                           const Table& table) {
  std::string s = "# cirmag plot script for " + data + "\n";
  s += "set datafile separator ','\nset datafile commentschars '#'\nset key autotitle columnhead\n";
  if (stem == "map") {
    s += "set logscale z\nsplot '" + data + "' using 1:2:3 with points\n";
    return s;
  }
  if (stem == "fisher_scan") s += "set logscale y\n";
  s += "plot";
  bool first = true;
  for (std::size_t c = 1; c < table.columns.size(); ++c) {
    if (table.columns[c] == "flags") continue;
    s += std::string(first ? " " : ", \\\n     ") + "'" + data + "' using 1:" +
         std::to_string(c + 1) + " with lines";
    first = false;
  }
  return s + "\n";
}

void write_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
  if (!out) throw std::runtime_error("write failed for " + path.string());
}

const FeshbachResonance& res_of(const RunConfig& c) { return c.resonance; }

unsigned pole_flag(const RunConfig& c, double B) {
  return B == res_of(c).B_res ? kFlagPole : kFlagOk;
}

double x_extent(const TubeArray& a) {
  double m = 0.0;
  for (const auto& r : a.positions) m = std::max(m, std::abs(r.x()));
  return m;
}

double y_extent(const TubeArray& a) {
  double m = 0.0;
  for (const auto& r : a.positions) m = std::max(m, std::abs(r.y()));
  return m;
}

}  // namespace

std::string write_table(const RunConfig& config, const std::string& command,
                        const std::string& stem, const Table& table) {
  const std::filesystem::path dir(config.output.dir);
  std::filesystem::create_directories(dir);
  std::filesystem::path path;
  if (config.output.format == "json") {
    path = dir / (stem + ".json");
    nlohmann::ordered_json doc;
    doc["tool"] = "cirmag";
    doc["version"] = CIRMAG_VERSION;
    doc["command"] = command;
    doc["config"] = serialize_config(config);
    doc["columns"] = table.columns;
    nlohmann::ordered_json rows = nlohmann::ordered_json::array();
    for (const auto& row : table.rows) {
      nlohmann::ordered_json r = nlohmann::ordered_json::array();
      for (const auto& c : row) {
        if (const auto* d = std::get_if<double>(&c)) {
          if (std::isfinite(*d)) {
            r.push_back(*d);
          } else {
            r.push_back(cell_text(c));
          }
        } else if (const auto* i = std::get_if<std::int64_t>(&c)) {
          r.push_back(*i);
        } else {
          r.push_back(std::get<std::string>(c));
        }
      }
      rows.push_back(std::move(r));
    }
    doc["rows"] = std::move(rows);
    write_file(path, doc.dump(1) + "\n");
  } else {
    path = dir / (stem + ".csv");
    std::string text = header(config, command);
    for (std::size_t i = 0; i < table.columns.size(); ++i) {
      text += (i ? "," : "") + table.columns[i];
    }
    text += "\n";
    for (const auto& row : table.rows) {
      for (std::size_t i = 0; i < row.size(); ++i) {
        if (i) text += ',';
        text += cell_text(row[i]);
      }
      text += "\n";
    }
    write_file(path, text);
  }
  if (config.output.gnuplot) {
    write_file(dir / (stem + ".gp"), gnuplot_script(path.filename().string(), stem, table));
  }
  return path.string();
}

std::unique_ptr<TransmissionModel> make_transmission(const RunConfig& config, double B_lo,
                                                     double B_hi, int threads) {
  auto exact = std::make_unique<ExactTransmission>(config.physics());
  if (!config.scan.memo) return exact;
  const double step = config.scan.memo_step_delta * std::abs(config.resonance.Delta);
  const double margin = 16.0 * config.h0() + 2.0 * step;
  return std::make_unique<MemoizedTransmission>(*exact, B_lo - margin, B_hi + margin, step,
                                                threads);
}

CommandOutput cmd_scattering_scan(const RunConfig& config, int threads) {
  config.validate();
  const RadialSolver solver(config.model);
  const std::vector<double> grid = config.scan.B.values();
  const double k = config.trap.k();
  Table table;
  table.columns = {"B_gauss", "a_of_B", "a_s", "inv_V_p", "inv_a_d", "flags"};
  table.rows.resize(grid.size());
  parallel_for(grid.size(), threads, [&](std::size_t i) {
    const double B = grid[i];
    unsigned flags = pole_flag(config, B);
    double a_s = kNaN, inv_vp = kNaN, inv_ad = kNaN;
    try {
      const ScatteringData d = solver.scattering_quantities(config.resonance, B, k,
                                                            config.mass_factor);
      a_s = d.a_s;
      inv_vp = 1.0 / d.V_p;
      inv_ad = 1.0 / d.a_d;
      if (d.pole[0] || d.pole[1] || d.pole[2]) flags |= kFlagPole;
    } catch (const BracketingError&) {
      flags |= kFlagPole;
    }
    table.rows[i] = {B, feshbach_scattering_length(config.resonance, B), a_s, inv_vp, inv_ad,
                     flags_to_string(flags)};
  });
  return {write_table(config, "scattering-scan", "scattering_scan", table), kExitOk, {}};
}

CommandOutput cmd_transmission_scan(const RunConfig& config, int threads) {
  config.validate();
  const RadialSolver solver(config.model);
  const PhysicsSetup setup = config.physics();
  const auto curve = transmission_vs_B(config.trap, solver, config.resonance,
                                       config.scan.B.values(), config.mass_factor,
                                       setup.d_wave, threads);
  Table table;
  table.columns = {"B_gauss", "T", "eta_plus", "eta_minus", "flags"};
  for (const auto& pt : curve) {
    table.rows.push_back({pt.B, pt.T, pt.eta_plus, pt.eta_minus, flags_to_string(pt.flags)});
  }
  return {write_table(config, "transmission-scan", "transmission_scan", table), kExitOk, {}};
}

CommandOutput cmd_fisher_scan(const RunConfig& config, int threads) {
  config.validate();
  const std::vector<double> grid = config.scan.B.values();
  const auto model = make_transmission(config, grid.front(), grid.back(), threads);
  const auto curve = single_tube_uncertainty(*model, grid, config.h0(), threads);
  Table table;
  table.columns = {"B_gauss", "T", "dTdB", "F", "dB", "flags"};
  for (const auto& pt : curve) {
    table.rows.push_back({pt.B, pt.T, pt.dTdB, pt.F, pt.dB,
                          flags_to_string(pt.flags | pole_flag(config, pt.B))});
  }
  return {write_table(config, "fisher-scan", "fisher_scan", table), kExitOk, {}};
}

CommandOutput cmd_gradiometer_map(const RunConfig& config, int threads) {
  config.validate();
  const TubeArray array = config.tube_array();
  const std::vector<double> b0 = config.scan.B0.values();
  const std::vector<double> bx = config.scan.Bx.values();
  double gmax = 0.0;
  for (double g : bx) gmax = std::max(gmax, std::abs(g));
  const double spread = gmax * x_extent(array);
  const auto model = make_transmission(config, b0.front() - spread, b0.back() + spread, threads);
  const auto map = uncertainty_map(array, *model, b0, bx, config.h0(), threads);
  Table table;
  table.columns = {"B0_gauss", "Bx_gauss_per_mm", "dB0", "dBx", "flags"};
  for (const auto& pt : map) {
    table.rows.push_back({pt.B0, pt.Bx, pt.dB0, pt.dBx, flags_to_string(pt.flags)});
  }
  return {write_table(config, "gradiometer-map", "map", table), kExitOk, {}};
}

CommandOutput cmd_mc_study(const RunConfig& config, int threads) {
  config.validate();
  RunConfig resolved = config;
  const TubeArray array = config.tube_array();
  if (!resolved.mc.B0) {
    const std::vector<double> grid = config.scan.B.values();
    const auto scan_model = make_transmission(config, grid.front(), grid.back(), threads);
    const double best = minimize_uncertainty(*scan_model, grid, config.h0(), threads).B;
    const double span = std::min({0.1 * std::abs(config.resonance.Delta), best - grid.front(),
                                  grid.back() - best});
    resolved.mc.B0 = mid_fringe_near(*scan_model, best, span);
  }
  const FieldModel truth{*resolved.mc.B0, config.mc.Bx, config.mc.By};
  const double spread = std::abs(truth.Bx) * x_extent(array) + std::abs(truth.By) * y_extent(array);
  const double box = std::abs(config.resonance.Delta);
  const auto model =
      make_transmission(config, truth.B0 - spread - box, truth.B0 + spread + box, threads);

  StudyOptions so;
  so.N_list = config.mc.N;
  so.trials = config.mc.trials;
  so.seed = config.mc.seed;
  so.bounds_sigma = config.mc.bounds_sigma;
  so.bootstrap = config.mc.bootstrap;
  so.h0 = config.h0();
  so.threads = threads;
  if (config.mc.estimate_By == "true") {
    so.mask = kParamAll;
  } else if (config.mc.estimate_By == "auto") {
    so.mask = estimable_parameters(array, fim_array(array, truth, *model, so.h0).F);
  }
  const StudyResult study = crlb_saturation_study(array, truth, *model, so);

  Table table;
  table.columns = {"N", "trial_count", "param", "empirical_var", "crlb", "ratio", "ci_lo", "ci_hi"};
  int failed = 0;
  for (const auto& row : study.rows) {
    table.rows.push_back({static_cast<std::int64_t>(row.N), static_cast<std::int64_t>(row.trials),
                          row.param, row.empirical_var, row.crlb, row.ratio, row.ci_lo,
                          row.ci_hi});
    failed = std::max(failed, row.trials - row.converged);
  }
  CommandOutput out{write_table(resolved, "mc-study", "mc_study", table)};
  if (failed > 0) {
    out.status = kExitNumeric;
    out.message = std::to_string(failed) + " MLE trial(s) did not converge";
  }
  return out;
}

const std::vector<std::string>& command_names() {
  static const std::vector<std::string> names = {"scattering-scan", "transmission-scan",
                                                 "fisher-scan", "gradiometer-map", "mc-study"};
  return names;
}

CommandOutput run_command(const std::string& name, const RunConfig& config, int threads) {
  using Fn = CommandOutput (*)(const RunConfig&, int);
  static const std::map<std::string, Fn> table = {
      {"scattering-scan", &cmd_scattering_scan},
      {"transmission-scan", &cmd_transmission_scan},
      {"fisher-scan", &cmd_fisher_scan},
      {"gradiometer-map", &cmd_gradiometer_map},
      {"mc-study", &cmd_mc_study},
  };
  const auto it = table.find(name);
  if (it == table.end()) throw std::invalid_argument("unknown command '" + name + "'");
  return it->second(config, threads);
}

int exit_code_for(const std::exception& e) {
  if (dynamic_cast<const ConfigError*>(&e)) return kExitConfig;
  if (dynamic_cast<const std::invalid_argument*>(&e) &&
      !dynamic_cast<const UnsupportedError*>(&e)) {
    return kExitUsage;
  }
  return kExitNumeric;
}

}  // namespace cirmag
