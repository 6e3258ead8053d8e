#include "iontrap/config.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include "iontrap/constants.hpp"
#include "iontrap/errors.hpp"

namespace iontrap {

namespace c = constants;

IonSpecies default_ca40() {
  IonSpecies s;
  s.mass = 40.0 * c::atomic_mass_unit;
  s.charge = c::elementary_charge;
  s.gamma1 = 1.0 / 7.1e-9;            // lifetime 7.1 ns
  s.k1 = 2.0 * c::pi / 397e-9;        // cooling transition
  s.k2 = 2.0 * c::pi / 866e-9;        // repump transition
  s.leak_fraction = 0.06;
  return s;
}

IonSpecies ExperimentConfig::species() const { return default_ca40(); }

TrapParams ExperimentConfig::trap() const {
  return TrapParams{omega_z_mhz * c::mhz_to_angular, alpha, gamma_y};
}

LaserParams ExperimentConfig::lasers() const {
  LaserParams l;
  l.omega_rabi = rabi_397_mhz * c::mhz_to_angular;
  l.omega_rabi_repump = rabi_866_mhz * c::mhz_to_angular;
  l.delta_397 = delta_397_mhz * c::mhz_to_angular;
  l.delta_866 = delta_866_mhz * c::mhz_to_angular;
  l.theta = theta_rad;
  l.phi_y = phi_y_rad;
  return l;
}

BathParams ExperimentConfig::bath() const {
  return BathParams{e_e_over_mu0 * c::mu0, c::mu0};
}

double estimated_omega_max(const ExperimentConfig& cfg) {
  // Coulomb stiffening raises the top axial mode to a few omega_z for small
  // chains; max(gamma_y, alpha, N/2) comfortably bounds all branches.
  const double factor =
      std::max({cfg.gamma_y, cfg.alpha, 0.5 * cfg.n_ions, 2.0});
  return factor * cfg.omega_z_mhz * c::mhz_to_angular;
}

std::vector<std::string> validate_errors(const ExperimentConfig& cfg) {
  std::vector<std::string> issues;
  auto bad = [&](const std::string& field, const std::string& msg) {
    issues.push_back(field + ": " + msg);
  };

  const IonSpecies s = cfg.species();
  if (!(s.mass > 0)) bad("species.mass", "must be positive");
  if (!(s.charge > 0)) bad("species.charge", "must be positive");
  if (!(s.gamma1 > 0)) bad("species.gamma1", "must be positive");
  if (!(s.k1 > s.k2 && s.k2 > 0))
    bad("species.k1/k2", "require k1 > k2 > 0");
  if (!(s.leak_fraction > 0 && s.leak_fraction < 1))
    bad("species.leak_fraction", "must lie in (0, 1)");

  if (!(cfg.omega_z_mhz > 0)) bad("omega_z_mhz", "must be positive");
  if (!(cfg.alpha > 1)) bad("alpha", "must exceed 1");
  if (!(cfg.gamma_y > cfg.alpha))
    bad("gamma_y", "y confinement must be steepest (gamma_y > alpha)");

  if (!(cfg.rabi_397_mhz >= 0)) bad("rabi_397_mhz", "must be non-negative");
  if (!(cfg.rabi_866_mhz >= 0)) bad("rabi_866_mhz", "must be non-negative");
  if (!(cfg.theta_rad >= 0 && cfg.theta_rad < 0.5 * c::pi))
    bad("theta_rad", "must lie in [0, pi/2)");
  if (!(std::abs(cfg.phi_y_rad) < 0.5 * c::pi))
    bad("phi_y_rad", "must be a small tilt, |phi_y| < pi/2");

  if (!(cfg.e_e_over_mu0 >= 0)) bad("e_e_over_mu0", "must be non-negative");

  if (cfg.n_ions < 1) bad("n_ions", "must be at least 1");
  if (cfg.dt_s < 0) bad("dt_s", "must be non-negative (0 = auto)");
  if (cfg.dt_s > 0 && cfg.dt_s * estimated_omega_max(cfg) >= 0.1)
    bad("dt_s", "dt too large: dt * omega_max must stay below 0.1");
  if (cfg.n_steps <= 0) bad("n_steps", "must be positive");
  if (cfg.n_burn_in < 0) bad("n_burn_in", "must be non-negative");
  if (cfg.sample_stride <= 0) bad("sample_stride", "must be positive");
  if (cfg.repetitions < 1) bad("repetitions", "must be at least 1");
  return issues;
}

ExperimentConfig validate(const ExperimentConfig& cfg) {
  auto issues = validate_errors(cfg);
  if (!issues.empty()) throw ConfigError(issues);
  ExperimentConfig out = cfg;
  if (out.dt_s == 0.0)
    out.dt_s = 0.08 / estimated_omega_max(out);
  return out;
}

namespace {

std::string trim(const std::string& s) {
  size_t b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  size_t e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

struct Field {
  std::function<void(ExperimentConfig&, double)> set;
  std::function<double(const ExperimentConfig&)> get;
};

const std::vector<std::pair<std::string, Field>>& field_table() {
  static const std::vector<std::pair<std::string, Field>> table = {
      {"n_ions",
       {[](ExperimentConfig& c, double v) { c.n_ions = (int)std::llround(v); },
        [](const ExperimentConfig& c) { return (double)c.n_ions; }}},
      {"alpha",
       {[](ExperimentConfig& c, double v) { c.alpha = v; },
        [](const ExperimentConfig& c) { return c.alpha; }}},
      {"gamma_y",
       {[](ExperimentConfig& c, double v) { c.gamma_y = v; },
        [](const ExperimentConfig& c) { return c.gamma_y; }}},
      {"omega_z_mhz",
       {[](ExperimentConfig& c, double v) { c.omega_z_mhz = v; },
        [](const ExperimentConfig& c) { return c.omega_z_mhz; }}},
      {"delta_397_mhz",
       {[](ExperimentConfig& c, double v) { c.delta_397_mhz = v; },
        [](const ExperimentConfig& c) { return c.delta_397_mhz; }}},
      {"delta_866_mhz",
       {[](ExperimentConfig& c, double v) { c.delta_866_mhz = v; },
        [](const ExperimentConfig& c) { return c.delta_866_mhz; }}},
      {"rabi_397_mhz",
       {[](ExperimentConfig& c, double v) { c.rabi_397_mhz = v; },
        [](const ExperimentConfig& c) { return c.rabi_397_mhz; }}},
      {"rabi_866_mhz",
       {[](ExperimentConfig& c, double v) { c.rabi_866_mhz = v; },
        [](const ExperimentConfig& c) { return c.rabi_866_mhz; }}},
      {"theta_rad",
       {[](ExperimentConfig& c, double v) { c.theta_rad = v; },
        [](const ExperimentConfig& c) { return c.theta_rad; }}},
      {"phi_y_rad",
       {[](ExperimentConfig& c, double v) { c.phi_y_rad = v; },
        [](const ExperimentConfig& c) { return c.phi_y_rad; }}},
      {"e_e_over_mu0",
       {[](ExperimentConfig& c, double v) { c.e_e_over_mu0 = v; },
        [](const ExperimentConfig& c) { return c.e_e_over_mu0; }}},
      {"dt_s",
       {[](ExperimentConfig& c, double v) { c.dt_s = v; },
        [](const ExperimentConfig& c) { return c.dt_s; }}},
      {"n_steps",
       {[](ExperimentConfig& c, double v) { c.n_steps = std::llround(v); },
        [](const ExperimentConfig& c) { return (double)c.n_steps; }}},
      {"n_burn_in",
       {[](ExperimentConfig& c, double v) { c.n_burn_in = std::llround(v); },
        [](const ExperimentConfig& c) { return (double)c.n_burn_in; }}},
      {"sample_stride",
       {[](ExperimentConfig& c, double v) {
          c.sample_stride = std::llround(v);
        },
        [](const ExperimentConfig& c) { return (double)c.sample_stride; }}},
      {"seed",
       {[](ExperimentConfig& c, double v) {
          c.seed = (std::uint64_t)std::llround(v);
        },
        [](const ExperimentConfig& c) { return (double)c.seed; }}},
      {"repetitions",
       {[](ExperimentConfig& c, double v) {
          c.repetitions = (int)std::llround(v);
        },
        [](const ExperimentConfig& c) { return (double)c.repetitions; }}},
  };
  return table;
}

}  // namespace

ExperimentConfig load_config(const std::string& text) {
  ExperimentConfig cfg;
  std::vector<std::string> issues;
  std::map<std::string, int> seen;

  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;

    auto eq = line.find('=');
    if (eq == std::string::npos) {
      issues.push_back("line " + std::to_string(lineno) +
                       ": expected 'key = value'");
      continue;
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));

    const auto& table = field_table();
    auto it = std::find_if(table.begin(), table.end(),
                           [&](const auto& p) { return p.first == key; });
    if (it == table.end()) {
      issues.push_back("line " + std::to_string(lineno) + ": unknown key '" +
                       key + "'");
      continue;
    }
    if (seen.count(key)) {
      issues.push_back("line " + std::to_string(lineno) + ": duplicate key '" +
                       key + "' (first at line " +
                       std::to_string(seen[key]) + ")");
      continue;
    }
    seen[key] = lineno;

    try {
      size_t pos = 0;
      double v = std::stod(value, &pos);
      if (pos != value.size()) throw std::invalid_argument("trailing junk");
      it->second.set(cfg, v);
    } catch (const std::exception&) {
      issues.push_back("line " + std::to_string(lineno) +
                       ": cannot parse value '" + value + "' for key '" + key +
                       "'");
    }
  }
  if (!issues.empty()) throw ConfigError(issues);
  return cfg;
}

ExperimentConfig load_config_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError("cannot open config file '" + path + "'");
  std::ostringstream ss;
  ss << f.rdbuf();
  return load_config(ss.str());
}

std::string serialize_config(const ExperimentConfig& cfg) {
  std::string out;
  char buf[64];
  for (const auto& [key, field] : field_table()) {
    std::snprintf(buf, sizeof buf, "%.17g", field.get(cfg));
    out += key;
    out += " = ";
    out += buf;
    out += "\n";
  }
  return out;
}

std::string config_hash(const ExperimentConfig& cfg) {
  const std::string text = serialize_config(cfg);
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : text) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  char buf[20];
  std::snprintf(buf, sizeof buf, "%016llx", (unsigned long long)h);
  return buf;
}

}  // namespace iontrap
