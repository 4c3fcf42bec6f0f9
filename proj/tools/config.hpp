#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "pks/grid.hpp"
#include "pks/transport.hpp"

namespace pks::cli {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Flat "key = value" text; '#' starts a comment. Duplicate keys are errors.
class KeyValueConfig {
 public:
  static KeyValueConfig parse(std::istream& is, const std::string& source = "<config>");
  static KeyValueConfig load(const std::string& path);

  void set(const std::string& key, const std::string& value);
  bool has(const std::string& key) const { return values_.count(key) > 0; }
  const std::map<std::string, std::string>& entries() const { return values_; }

 private:
  std::map<std::string, std::string> values_;
};

struct InitialData {
  enum class Kind { Translate, Mixture, Bump, File };
  Kind kind = Kind::Translate;
  Vec2 offset{0.25, 0.0};
  double separation = 1.0;  // mixture: profiles centered at (+-separation, 0)
  double weight = 0.5;      // mixture: mass fraction of the right profile
  double radius = 2.0;      // bump support radius
  std::string file;
};

struct RunConfig {
  int n = 256;
  double L = 20.0;
  double lambda = 1.0;
  double mass = 25.132741228718345;  // 8 pi
  double c_rho0 = 0.0;               // 0 selects 2 H_lambda[rho0] + 1

  double tau = 0.0;  // 0 selects tau*/2
  int max_steps = 50;
  double l1_target = 0.0;
  bool debias = true;
  double inner_tol = 1e-10;
  double inner_marginal_tol = 1e-12;
  int max_outer = 500;
  int max_inner = 1000;

  OTSolverConfig ot;
  InitialData initial;
  std::string output_dir = "out";
  std::uint64_t seed = 1;

  // validate family
  std::vector<double> translates{0.0, 0.1, 0.25, 0.5};
  std::vector<double> mixtures;
  std::vector<double> bumps;
  bool subcritical = false;
  bool talagrand = false;
  std::vector<double> tail_s{1.5, 2.0, 3.0};
  std::vector<double> localization_q{1.0, 1.5, 1.9};

  // ot-selftest
  std::vector<int> selftest_sizes{2, 8, 32, 64};
  int selftest_instances = 50;
  double selftest_eps = 1e-4;  // relative to the squared diameter of the unit square

  GridSpec grid() const { return GridSpec(n, L); }
};

// Throws ConfigError on unknown keys or malformed values.
RunConfig parse_run_config(const KeyValueConfig& kv);
RunConfig load_run_config(const std::string& path);
std::vector<std::string> known_keys();

// Sampled on the grid and scaled to the requested mass; the off-box tail is not kept.
Density make_initial(const RunConfig& cfg);
Density make_initial(const InitialData& init, const GridSpec& g, double lambda, double mass);

// Comma-separated values, 17 significant digits.
std::string csv_number(double v);
std::string csv_join(const std::vector<std::string>& cells);

}  // namespace pks::cli
