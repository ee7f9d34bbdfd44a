#pragma once

#include "gflow/flow.hpp"
#include "gflow/network.hpp"

#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace gflow {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Parsed value of the flat key = value config format: strings, numbers,
// booleans, arrays, inline tables and [section] tables.
struct ConfigValue {
  enum class Type { string, number, boolean, array, table };
  Type type = Type::table;
  int line = 0;
  std::string text;
  double number = 0.0;
  bool boolean = false;
  std::vector<ConfigValue> items;
  std::map<std::string, ConfigValue> fields;

  const ConfigValue* find(const std::string& key) const;
  std::string type_name() const;

  double as_number(const std::string& what) const;
  std::size_t as_count(const std::string& what) const;
  std::uint64_t as_seed(const std::string& what) const;
  const std::string& as_string(const std::string& what) const;
  bool as_bool(const std::string& what) const;
  const std::vector<ConfigValue>& as_array(const std::string& what) const;
};

// Throws ConfigError("line N: ...").
ConfigValue parse_config_text(const std::string& text);

struct LayerEntry {
  LayerKind kind = LayerKind::dense;
  std::size_t width = 0;  // 0 means "same as the input" (residual only)
  bool bias = true;
};

struct DataSpec {
  std::size_t n = 50;
  std::size_t N = 20;
  std::size_t M = 5;
  double radius = 1.0;
  double label_std = 1.0;
  std::uint64_t seed = 0;
  std::string path;  // load from CSV instead of generating
};

struct ExperimentConfig {
  std::string name = "experiment";
  std::vector<LayerEntry> layers;
  std::string activation = "leaky_relu";
  std::vector<double> activation_params;
  DataSpec data;
  std::optional<std::size_t> knn_k;
  FlowConfig flow;
  double tol_rel = 1e-3;
  std::vector<std::vector<std::size_t>> sweep_hidden;
  std::vector<std::size_t> sweep_depth;
  std::vector<std::uint64_t> seeds;
  std::string output_dir;
  bool save_thetas = false;
  bool drop_initial_percent_in_plots = false;

  std::string source_text;  // raw config, hashed into certificates
  std::string base_dir;     // relative paths resolve against this
};

ExperimentConfig parse_experiment_config(const std::string& text, const std::string& base_dir = ".");
ExperimentConfig load_experiment_config(const std::string& path);

struct SweepPoint {
  std::string label;
  std::vector<LayerEntry> layers;
};

// One point per sweep entry, or a single point with the configured layers.
std::vector<SweepPoint> sweep_points(const ExperimentConfig& cfg);

}  // namespace gflow
