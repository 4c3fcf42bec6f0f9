#include "config.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <sstream>

namespace pks::cli {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

double to_double(const std::string& key, const std::string& v) {
  try {
    std::size_t pos = 0;
    const double x = std::stod(v, &pos);
    if (pos != v.size() || !std::isfinite(x)) throw std::invalid_argument(v);
    return x;
  } catch (const std::exception&) {
    throw ConfigError("config: " + key + " expects a number, got '" + v + "'");
  }
}

long to_long(const std::string& key, const std::string& v) {
  try {
    std::size_t pos = 0;
    const long x = std::stol(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return x;
  } catch (const std::exception&) {
    throw ConfigError("config: " + key + " expects an integer, got '" + v + "'");
  }
}

bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw ConfigError("config: " + key + " expects true or false, got '" + v + "'");
}

std::vector<double> to_list(const std::string& key, const std::string& v) {
  std::vector<double> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(to_double(key, item));
  }
  return out;
}

void require(bool ok, const std::string& msg) {
  if (!ok) throw ConfigError("config: " + msg);
}

using Setter = std::function<void(RunConfig&, const std::string&, const std::string&)>;

const std::map<std::string, Setter>& setters() {
  static const std::map<std::string, Setter> s = {
      {"grid.n", [](RunConfig& c, auto& k, auto& v) { c.n = static_cast<int>(to_long(k, v)); }},
      {"grid.L", [](RunConfig& c, auto& k, auto& v) { c.L = to_double(k, v); }},
      {"physics.lambda", [](RunConfig& c, auto& k, auto& v) { c.lambda = to_double(k, v); }},
      {"physics.mass", [](RunConfig& c, auto& k, auto& v) { c.mass = to_double(k, v); }},
      {"physics.c_rho0", [](RunConfig& c, auto& k, auto& v) { c.c_rho0 = to_double(k, v); }},
      {"scheme.tau", [](RunConfig& c, auto& k, auto& v) { c.tau = to_double(k, v); }},
      {"scheme.max_steps",
       [](RunConfig& c, auto& k, auto& v) { c.max_steps = static_cast<int>(to_long(k, v)); }},
      {"scheme.l1_target", [](RunConfig& c, auto& k, auto& v) { c.l1_target = to_double(k, v); }},
      {"scheme.debias", [](RunConfig& c, auto& k, auto& v) { c.debias = to_bool(k, v); }},
      {"scheme.inner_tol", [](RunConfig& c, auto& k, auto& v) { c.inner_tol = to_double(k, v); }},
      {"scheme.marginal_tol",
       [](RunConfig& c, auto& k, auto& v) { c.inner_marginal_tol = to_double(k, v); }},
      {"scheme.max_outer",
       [](RunConfig& c, auto& k, auto& v) { c.max_outer = static_cast<int>(to_long(k, v)); }},
      {"scheme.max_inner",
       [](RunConfig& c, auto& k, auto& v) { c.max_inner = static_cast<int>(to_long(k, v)); }},
      {"ot.method",
       [](RunConfig& c, auto& k, auto& v) {
         if (v == "entropic")
           c.ot.method = OTSolverConfig::Method::Entropic;
         else if (v == "exact")
           c.ot.method = OTSolverConfig::Method::ExactSmall;
         else
           throw ConfigError("config: " + k + " expects entropic or exact, got '" + v + "'");
       }},
      {"ot.sinkhorn_epsilon",
       [](RunConfig& c, auto& k, auto& v) { c.ot.sinkhorn_epsilon = to_double(k, v); }},
      {"ot.marginal_tol", [](RunConfig& c, auto& k, auto& v) { c.ot.marginal_tol = to_double(k, v); }},
      {"ot.max_iters",
       [](RunConfig& c, auto& k, auto& v) { c.ot.max_iters = static_cast<int>(to_long(k, v)); }},
      {"ot.debias", [](RunConfig& c, auto& k, auto& v) { c.ot.debias = to_bool(k, v); }},
      {"initial.kind",
       [](RunConfig& c, auto& k, auto& v) {
         using K = InitialData::Kind;
         static const std::map<std::string, K> kinds = {
             {"translate", K::Translate}, {"mixture", K::Mixture}, {"bump", K::Bump}, {"file", K::File}};
         const auto it = kinds.find(v);
         if (it == kinds.end())
           throw ConfigError("config: " + k + " expects translate, mixture, bump or file, got '" + v + "'");
         c.initial.kind = it->second;
       }},
      {"initial.offset_x", [](RunConfig& c, auto& k, auto& v) { c.initial.offset[0] = to_double(k, v); }},
      {"initial.offset_y", [](RunConfig& c, auto& k, auto& v) { c.initial.offset[1] = to_double(k, v); }},
      {"initial.separation",
       [](RunConfig& c, auto& k, auto& v) { c.initial.separation = to_double(k, v); }},
      {"initial.weight", [](RunConfig& c, auto& k, auto& v) { c.initial.weight = to_double(k, v); }},
      {"initial.radius", [](RunConfig& c, auto& k, auto& v) { c.initial.radius = to_double(k, v); }},
      {"initial.file", [](RunConfig& c, auto&, auto& v) { c.initial.file = v; }},
      {"output.dir", [](RunConfig& c, auto&, auto& v) { c.output_dir = v; }},
      {"seed",
       [](RunConfig& c, auto& k, auto& v) { c.seed = static_cast<std::uint64_t>(to_long(k, v)); }},
      {"family.translates", [](RunConfig& c, auto& k, auto& v) { c.translates = to_list(k, v); }},
      {"family.mixtures", [](RunConfig& c, auto& k, auto& v) { c.mixtures = to_list(k, v); }},
      {"family.bumps", [](RunConfig& c, auto& k, auto& v) { c.bumps = to_list(k, v); }},
      {"family.subcritical", [](RunConfig& c, auto& k, auto& v) { c.subcritical = to_bool(k, v); }},
      {"validate.talagrand", [](RunConfig& c, auto& k, auto& v) { c.talagrand = to_bool(k, v); }},
      {"validate.thick_tails_s", [](RunConfig& c, auto& k, auto& v) { c.tail_s = to_list(k, v); }},
      {"validate.localization_q",
       [](RunConfig& c, auto& k, auto& v) { c.localization_q = to_list(k, v); }},
      {"selftest.sizes",
       [](RunConfig& c, auto& k, auto& v) {
         c.selftest_sizes.clear();
         for (double x : to_list(k, v)) {
           require(x >= 1 && x == std::floor(x), k + " expects positive integers");
           c.selftest_sizes.push_back(static_cast<int>(x));
         }
       }},
      {"selftest.instances",
       [](RunConfig& c, auto& k, auto& v) { c.selftest_instances = static_cast<int>(to_long(k, v)); }},
      {"selftest.epsilon", [](RunConfig& c, auto& k, auto& v) { c.selftest_eps = to_double(k, v); }},
  };
  return s;
}

void validate(const RunConfig& c) {
  require(c.n >= 16 && c.n % 2 == 0, "grid.n must be even and >= 16");
  require(c.L > 0.0, "grid.L must be positive");
  require(c.lambda > 0.0, "physics.lambda must be positive");
  require(c.mass > 0.0, "physics.mass must be positive");
  require(c.c_rho0 >= 0.0, "physics.c_rho0 must be nonnegative");
  require(c.tau >= 0.0, "scheme.tau must be nonnegative");
  require(c.max_steps >= 0, "scheme.max_steps must be nonnegative");
  require(c.l1_target >= 0.0, "scheme.l1_target must be nonnegative");
  require(c.inner_tol > 0.0 && c.inner_marginal_tol > 0.0, "scheme tolerances must be positive");
  require(c.max_outer > 0 && c.max_inner > 0, "scheme iteration caps must be positive");
  require(c.ot.sinkhorn_epsilon >= 0.0, "ot.sinkhorn_epsilon must be nonnegative");
  require(c.ot.marginal_tol > 0.0 && c.ot.max_iters > 0, "ot tolerances must be positive");
  require(c.initial.weight > 0.0 && c.initial.weight < 1.0, "initial.weight must lie in (0, 1)");
  require(c.initial.radius > 0.0, "initial.radius must be positive");
  if (c.initial.kind == InitialData::Kind::File) {
    require(!c.initial.file.empty(), "initial.file is required for initial.kind = file");
    require(std::filesystem::exists(c.initial.file), "initial.file not found: " + c.initial.file);
  }
  for (double r : c.bumps) require(r > 0.0, "family.bumps radii must be positive");
  for (double s : c.tail_s) require(s > 1.0, "validate.thick_tails_s must exceed 1");
  for (double q : c.localization_q)
    require(q > 0.0 && q < 2.0, "validate.localization_q must lie in (0, 2)");
  require(c.selftest_instances > 0, "selftest.instances must be positive");
  require(c.selftest_eps > 0.0, "selftest.epsilon must be positive");
}

}  // namespace

KeyValueConfig KeyValueConfig::parse(std::istream& is, const std::string& source) {
  KeyValueConfig kv;
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError(source + ":" + std::to_string(lineno) + ": expected key = value");
    const std::string key = trim(line.substr(0, eq)), value = trim(line.substr(eq + 1));
    if (key.empty()) throw ConfigError(source + ":" + std::to_string(lineno) + ": empty key");
    if (kv.has(key))
      throw ConfigError(source + ":" + std::to_string(lineno) + ": duplicate key " + key);
    kv.values_[key] = value;
  }
  return kv;
}

KeyValueConfig KeyValueConfig::load(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("config: cannot open " + path);
  return parse(is, path);
}

void KeyValueConfig::set(const std::string& key, const std::string& value) {
  values_[key] = value;
}

std::vector<std::string> known_keys() {
  std::vector<std::string> keys;
  for (const auto& [k, s] : setters()) keys.push_back(k);
  return keys;
}

RunConfig parse_run_config(const KeyValueConfig& kv) {
  RunConfig c;
  const auto& s = setters();
  for (const auto& [key, value] : kv.entries()) {
    const auto it = s.find(key);
    if (it == s.end()) throw ConfigError("config: unknown key " + key);
    it->second(c, key, value);
  }
  validate(c);
  return c;
}

RunConfig load_run_config(const std::string& path) {
  return parse_run_config(KeyValueConfig::load(path));
}

Density make_initial(const InitialData& init, const GridSpec& g, double lambda, double mass) {
  switch (init.kind) {
    case InitialData::Kind::Translate: {
      Density d = steady_state({lambda, mass}, init.offset, g);
      d.scale_to_mass(mass);
      return d;
    }
    case InitialData::Kind::Mixture: {
      const Density a = steady_state({lambda, init.weight * mass},
                                     {init.offset[0] + init.separation, init.offset[1]}, g);
      const Density b = steady_state({lambda, (1.0 - init.weight) * mass},
                                     {init.offset[0] - init.separation, init.offset[1]}, g);
      std::vector<double> v(g.size());
      for (std::size_t k = 0; k < v.size(); ++k) v[k] = a[k] + b[k];
      Density d(g, std::move(v));
      d.scale_to_mass(mass);
      return d;
    }
    case InitialData::Kind::Bump: {
      std::vector<double> v(g.size(), 0.0);
      const double R2 = init.radius * init.radius;
      for (int i = 0; i < g.n; ++i)
        for (int j = 0; j < g.n; ++j) {
          const double dx = g.center(i) - init.offset[0], dy = g.center(j) - init.offset[1];
          const double u = (dx * dx + dy * dy) / R2;
          if (u < 1.0) v[g.index(i, j)] = std::exp(1.0 - 1.0 / (1.0 - u));
        }
      Density d(g, std::move(v));
      d.scale_to_mass(mass);
      return d;
    }
    case InitialData::Kind::File: {
      Density d = read_grid_file(init.file);
      if (!(d.spec() == g))
        throw ConfigError("config: initial.file grid differs from grid.n / grid.L");
      return d;
    }
  }
  throw ConfigError("config: unsupported initial data");
}

Density make_initial(const RunConfig& cfg) {
  return make_initial(cfg.initial, cfg.grid(), cfg.lambda, cfg.mass);
}

std::string csv_number(double v) {
  std::ostringstream os;
  os << std::setprecision(17) << v;
  return os.str();
}

std::string csv_join(const std::vector<std::string>& cells) {
  std::string out;
  for (std::size_t k = 0; k < cells.size(); ++k) {
    if (k) out += ',';
    out += cells[k];
  }
  return out;
}

}  // namespace pks::cli
