#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

namespace appo::cli {

/**
 * Every knob a command can take, with its default. Values are resolved in
 * three layers: defaults, then the --config JSON document, then explicit
 * command-line flags. Grid fields are only read by `sweep`; when a grid is
 * empty the corresponding scalar acts as a singleton grid.
 */
struct ExperimentConfig {
  std::string mdp_path;
  std::string out_dir = "out";
  std::uint64_t seed = 0;
  std::string algo = "appo";  // appo | appo-rollout
  int num_pref = 1000;        // M, preference pairs
  int num_traj = 1000;        // N, unlabeled pairs
  int iterations = 100;       // T
  std::optional<double> eta;  // empty: sqrt(2 log|A| / (R^2 T))
  double lambda = 1.0;
  int k1 = 100;
  int k2 = 100;
  std::string link = "sigmoid";
  bool split_data = false;
  double alpha = 1.0;  // transition smoothing
  std::string corrupt_reward = "none";  // none | optimistic
  int workers = 1;
  int inner_iterations = 300;
  std::string traj_data_path;  // load instead of generating when set
  std::string pref_data_path;

  std::vector<double> lambda_grid;
  std::vector<int> m_grid;
  std::vector<int> n_grid;
  std::vector<int> t_grid;
  std::vector<std::uint64_t> seed_grid;

  /// Merge keys from a config document; unknown keys are an error so typos
  /// do not silently fall back to defaults.
  void apply_json(const nlohmann::json& j);

  /// Throws std::invalid_argument on out-of-range or unrecognized values.
  void check() const;

  /// The resolved settings as a document, for metadata files.
  nlohmann::json to_json() const;
};

/// Parse an --eta flag value: "auto" clears it, otherwise a positive number.
std::optional<double> parse_eta_flag(const std::string& text);

}  // namespace appo::cli
