#pragma once

#include "gflow/certify.hpp"
#include "gflow/config.hpp"

#include <map>
#include <optional>
#include <string>
#include <vector>

namespace gflow {

// Environment variable that, when set, prefixes relative output directories.
inline constexpr const char* kOutputRootEnv = "GFLOW_OUTPUT_ROOT";

struct RunRecord {
  std::string id;
  std::string point;
  std::uint64_t seed = 0;
  std::size_t params = 0;
  std::size_t constraints = 0;  // nM
  double lambda0 = 0.0;
  CertStatus status = CertStatus::refused_aborted;
  double initial_loss = 0.0;
  double final_loss = 0.0;
  bool blowup_pass = false;
  bool monotone_pass = false;
  bool aborted = false;

  bool overparametrized() const { return params >= constraints; }
};

struct ExperimentResult {
  std::string output_dir;
  std::vector<RunRecord> runs;
  // 0 unless some over-parametrized run was refused, then 2.
  int exit_code = 0;
};

std::string resolve_output_dir(const ExperimentConfig& cfg);

// Generated or loaded dataset. Graph configs come back packed as one graph
// example, with the kNN graph built over the generated points.
Dataset prepare_dataset(const ExperimentConfig& cfg);
Network build_network_for(const ExperimentConfig& cfg, const SweepPoint& point, const Dataset& data);

// One integration + certificate per (sweep point, seed). Runs execute in
// parallel; each writes only its own directory.
ExperimentResult run_experiment(const ExperimentConfig& cfg);

// Writes dataset.csv (and graph.csv for graph configs); returns the paths.
std::vector<std::string> gen_data(const ExperimentConfig& cfg);

struct CertifyOutcome {
  int exit_code = 0;  // 0 all certified and matching, 2 otherwise
  std::vector<std::string> messages;
};

// Re-derives each certificate under dir from trajectory.csv and run.meta.
// Without a tolerance override the result must match certificate.txt byte for
// byte; with one, only the re-derived status counts.
CertifyOutcome certify_directory(const std::string& dir, std::optional<double> tol_override = std::nullopt);

// loss.svg per run and sweep.svg for the directory; returns written paths.
std::vector<std::string> plot_directory(const std::string& dir);

// "key = value" lines up to the first blank line.
std::map<std::string, std::string> parse_key_values(const std::string& text);

}  // namespace gflow
