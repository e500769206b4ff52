#include "cirmag/config.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <functional>
#include <istream>
#include <map>
#include <set>
#include <sstream>

namespace cirmag {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

template <typename T>
T parse_number(const std::string& text) {
  T value{};
  const char* first = text.data();
  const char* last = first + text.size();
  if (!text.empty() && text[0] == '+') ++first;
  const auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec != std::errc() || ptr != last || text.empty()) {
    throw ConfigError("malformed number '" + text + "'");
  }
  return value;
}

bool parse_bool(const std::string& text) {
  if (text == "true") return true;
  if (text == "false") return false;
  throw ConfigError("expected true or false, got '" + text + "'");
}

struct Field {
  std::function<void(RunConfig&, const std::string&)> set;
  std::function<std::string(const RunConfig&)> get;
};

template <typename Access>
Field real_field(Access access) {
  return {[access](RunConfig& c, const std::string& v) { access(c) = parse_number<double>(v); },
          [access](const RunConfig& c) { return fmt_double(access(c)); }};
}

template <typename Access>
Field int_field(Access access) {
  return {[access](RunConfig& c, const std::string& v) { access(c) = parse_number<int>(v); },
          [access](const RunConfig& c) {
            return std::to_string(access(c));
          }};
}

template <typename Access>
Field bool_field(Access access) {
  return {[access](RunConfig& c, const std::string& v) { access(c) = parse_bool(v); },
          [access](const RunConfig& c) {
            return std::string(access(c) ? "true" : "false");
          }};
}

template <typename Access>
Field string_field(Access access) {
  return {[access](RunConfig& c, const std::string& v) { access(c) = v; },
          [access](const RunConfig& c) { return access(c); }};
}

template <typename Access>
Field optional_field(Access access) {
  return {[access](RunConfig& c, const std::string& v) {
            if (v.empty() || v == "none") {
              access(c).reset();
            } else {
              access(c) = parse_number<double>(v);
            }
          },
          [access](const RunConfig& c) {
            const auto& o = access(c);
            return o ? fmt_double(*o) : std::string("none");
          }};
}

void add_grid(std::vector<std::pair<std::string, Field>>& f, const std::string& prefix,
              ScanGrid RunConfig::Scan::*grid) {
  f.push_back({prefix + ".min", real_field([grid](auto& c) -> auto& { return (c.scan.*grid).min; })});
  f.push_back({prefix + ".max", real_field([grid](auto& c) -> auto& { return (c.scan.*grid).max; })});
  f.push_back({prefix + ".points", int_field([grid](auto& c) -> auto& { return (c.scan.*grid).points; })});
}

const std::vector<std::pair<std::string, Field>>& fields() {
  static const std::vector<std::pair<std::string, Field>> table = [] {
    std::vector<std::pair<std::string, Field>> f;
    f.push_back({"resonance.B_res", real_field([](auto& c) -> auto& { return c.resonance.B_res; })});
    f.push_back({"resonance.Delta", real_field([](auto& c) -> auto& { return c.resonance.Delta; })});
    f.push_back({"resonance.a_bg", real_field([](auto& c) -> auto& { return c.resonance.a_bg; })});
    f.push_back({"trap.d", real_field([](auto& c) -> auto& { return c.trap.d; })});
    f.push_back({"trap.p", real_field([](auto& c) -> auto& { return c.trap.p; })});
    f.push_back({"trap.partial_waves",
                 {[](RunConfig& c, const std::string& v) { c.trap.waves = parse_partial_waves(v); },
                  [](const RunConfig& c) { return to_string(c.trap.waves); }}});
    f.push_back({"trap.mass_factor", real_field([](auto& c) -> auto& { return c.mass_factor; })});
    f.push_back({"trap.literal_p_prefactor",
                 bool_field([](auto& c) -> auto& { return c.trap.literal_p_prefactor; })});
    f.push_back({"trap.d_wave_c2", optional_field([](auto& c) -> auto& { return c.d_wave_c2; })});
    f.push_back({"trap.d_wave_c3", optional_field([](auto& c) -> auto& { return c.d_wave_c3; })});
    f.push_back({"trap.d_wave_c4", optional_field([](auto& c) -> auto& { return c.d_wave_c4; })});
    f.push_back({"model.r_core", real_field([](auto& c) -> auto& { return c.model.r_core; })});
    f.push_back({"model.r_max_min", real_field([](auto& c) -> auto& { return c.model.r_max_min; })});
    f.push_back({"model.r_max_factor", real_field([](auto& c) -> auto& { return c.model.r_max_factor; })});
    f.push_back({"model.steps_per_wavelength",
                 int_field([](auto& c) -> auto& { return c.model.steps_per_wavelength; })});
    f.push_back({"model.a_cap", real_field([](auto& c) -> auto& { return c.model.a_cap; })});
    f.push_back({"model.zero_energy_r_max",
                 real_field([](auto& c) -> auto& { return c.model.zero_energy_r_max; })});
    f.push_back({"array.Mx", int_field([](auto& c) -> auto& { return c.array.Mx; })});
    f.push_back({"array.My", int_field([](auto& c) -> auto& { return c.array.My; })});
    f.push_back({"array.L_nm", real_field([](auto& c) -> auto& { return c.array.L_nm; })});
    f.push_back({"array.abar_nm", real_field([](auto& c) -> auto& { return c.array.abar_nm; })});
    add_grid(f, "scan.B", &RunConfig::Scan::B);
    add_grid(f, "scan.B0", &RunConfig::Scan::B0);
    add_grid(f, "scan.Bx", &RunConfig::Scan::Bx);
    f.push_back({"scan.memo", bool_field([](auto& c) -> auto& { return c.scan.memo; })});
    f.push_back({"scan.memo_step_delta",
                 real_field([](auto& c) -> auto& { return c.scan.memo_step_delta; })});
    f.push_back({"scan.h0_delta", real_field([](auto& c) -> auto& { return c.scan.h0_delta; })});
    f.push_back({"mc.N",
                 {[](RunConfig& c, const std::string& v) {
                    c.mc.N.clear();
                    std::stringstream ss(v);
                    std::string item;
                    while (std::getline(ss, item, ',')) {
                      c.mc.N.push_back(parse_number<std::uint64_t>(trim(item)));
                    }
                  },
                  [](const RunConfig& c) {
                    std::string out;
                    for (std::size_t i = 0; i < c.mc.N.size(); ++i) {
                      if (i) out += ',';
                      out += std::to_string(c.mc.N[i]);
                    }
                    return out;
                  }}});
    f.push_back({"mc.trials", int_field([](auto& c) -> auto& { return c.mc.trials; })});
    f.push_back({"mc.seed",
                 {[](RunConfig& c, const std::string& v) { c.mc.seed = parse_number<std::uint64_t>(v); },
                  [](const RunConfig& c) { return std::to_string(c.mc.seed); }}});
    f.push_back({"mc.B0", optional_field([](auto& c) -> auto& { return c.mc.B0; })});
    f.push_back({"mc.Bx", real_field([](auto& c) -> auto& { return c.mc.Bx; })});
    f.push_back({"mc.By", real_field([](auto& c) -> auto& { return c.mc.By; })});
    f.push_back({"mc.estimate_By", string_field([](auto& c) -> auto& { return c.mc.estimate_By; })});
    f.push_back({"mc.bounds_sigma", real_field([](auto& c) -> auto& { return c.mc.bounds_sigma; })});
    f.push_back({"mc.bootstrap", int_field([](auto& c) -> auto& { return c.mc.bootstrap; })});
    f.push_back({"output.dir", string_field([](auto& c) -> auto& { return c.output.dir; })});
    f.push_back({"output.format", string_field([](auto& c) -> auto& { return c.output.format; })});
    f.push_back({"output.gnuplot", bool_field([](auto& c) -> auto& { return c.output.gnuplot; })});
    return f;
  }();
  return table;
}

void check(bool ok, const std::string& key, const std::string& what) {
  if (!ok) throw ConfigError(key + ": " + what);
}

void check_grid(const ScanGrid& g, const std::string& key) {
  check(g.points >= 1, key + ".points", "grid needs at least one point");
  check(std::isfinite(g.min) && std::isfinite(g.max), key, "grid bounds must be finite");
  check(g.max >= g.min, key, "grid max below min");
  check(g.points == 1 || g.max > g.min, key, "grid with several points needs max > min");
}

}  // namespace

std::vector<double> ScanGrid::values() const {
  std::vector<double> out(static_cast<std::size_t>(std::max(points, 0)));
  for (int i = 0; i < points; ++i) {
    out[static_cast<std::size_t>(i)] =
        points == 1 ? min : (i + 1 == points ? max : min + (max - min) * i / (points - 1));
  }
  return out;
}

void RunConfig::validate() const {
  try {
    resonance.validate();
  } catch (const ConfigError& e) {
    throw ConfigError(std::string("resonance: ") + e.what());
  }
  try {
    trap.validate();
  } catch (const std::exception& e) {
    throw ConfigError(std::string("trap: ") + e.what());
  }
  check(mass_factor > 0.0 && std::isfinite(mass_factor), "trap.mass_factor", "must be positive");
  if (trap.waves.d) {
    check(d_wave_c2 && d_wave_c3 && d_wave_c4, "trap.d_wave_c2/c3/c4",
          "the d-wave channel needs all three coefficients");
  }
  try {
    model.validate();
  } catch (const std::exception& e) {
    throw ConfigError(std::string("model: ") + e.what());
  }
  check(array.Mx >= 1, "array.Mx", "must be >= 1");
  check(array.My >= 1, "array.My", "must be >= 1");
  check(array.L_nm > 0.0 && std::isfinite(array.L_nm), "array.L_nm", "must be positive");
  check(array.abar_nm > 0.0 && std::isfinite(array.abar_nm), "array.abar_nm", "must be positive");
  check_grid(scan.B, "scan.B");
  check_grid(scan.B0, "scan.B0");
  check_grid(scan.Bx, "scan.Bx");
  check(scan.memo_step_delta > 0.0, "scan.memo_step_delta", "must be positive");
  check(scan.h0_delta > 0.0, "scan.h0_delta", "must be positive");
  check(!mc.N.empty(), "mc.N", "needs at least one entry");
  for (auto n : mc.N) check(n > 0, "mc.N", "entries must be positive");
  check(mc.trials >= 2, "mc.trials", "must be >= 2");
  check(!mc.B0 || std::isfinite(*mc.B0), "mc.B0", "must be finite");
  check(std::isfinite(mc.Bx) && std::isfinite(mc.By), "mc.Bx/By", "must be finite");
  check(mc.estimate_By == "true" || mc.estimate_By == "false" || mc.estimate_By == "auto",
        "mc.estimate_By", "expected true, false or auto");
  check(mc.bounds_sigma > 0.0, "mc.bounds_sigma", "must be positive");
  check(mc.bootstrap >= 1, "mc.bootstrap", "must be >= 1");
  check(!output.dir.empty(), "output.dir", "must not be empty");
  check(output.format == "csv" || output.format == "json", "output.format",
        "expected csv or json");
}

PhysicsSetup RunConfig::physics() const {
  PhysicsSetup s;
  s.resonance = resonance;
  s.trap = trap;
  s.model = model;
  s.mass_factor = mass_factor;
  if (trap.waves.d) s.d_wave = fixed_d_wave_coefficients(*d_wave_c2, *d_wave_c3, *d_wave_c4);
  return s;
}

TubeArray RunConfig::tube_array() const {
  return TubeArray::square_grid(array.Mx, array.My, array.L_nm * 1e-6);
}

RunConfig parse_config(const std::string& text) {
  std::map<std::string, const Field*> index;
  for (const auto& [key, field] : fields()) index[key] = &field;
  RunConfig cfg;
  std::set<std::string> seen;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    const std::string where = "line " + std::to_string(lineno) + ": ";
    if (eq == std::string::npos) throw ConfigError(where + "expected 'key = value'");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    const auto it = index.find(key);
    if (it == index.end()) throw ConfigError(where + "unknown key '" + key + "'");
    if (!seen.insert(key).second) throw ConfigError(where + "duplicate key '" + key + "'");
    try {
      it->second->set(cfg, value);
    } catch (const ConfigError& e) {
      throw ConfigError(where + key + ": " + e.what());
    }
  }
  return cfg;
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read config file '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

std::string serialize_config(const RunConfig& config) {
  std::string out;
  for (const auto& [key, field] : fields()) out += key + " = " + field.get(config) + "\n";
  return out;
}

RunConfig parse_output_header(std::istream& in) {
  std::string line;
  std::string text;
  bool inside = false;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] != '#') break;
    const std::string body = trim(line.substr(1));
    if (body == "config:") {
      inside = true;
    } else if (body == "end config") {
      return parse_config(text);
    } else if (inside) {
      text += body + "\n";
    }
  }
  throw ConfigError("no embedded configuration found in header");
}

}  // namespace cirmag
