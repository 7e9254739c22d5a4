#pragma once

#include <filesystem>

#include <json.hpp>

#include "appo/datagen.hpp"
#include "appo/engine.hpp"
#include "appo/estimators.hpp"
#include "appo/mdp.hpp"
#include "appo/oracle.hpp"

namespace appo {

/**
 * JSON formats. All tables are nested arrays indexed [h][s][a] (transitions
 * add a trailing [s'] layer) so files stay hand-editable; loaders go through
 * the regular constructors, so a file with broken simplex rows or values
 * outside their box is rejected with the same messages as programmatic
 * construction.
 *
 * Datasets use JSON Lines: a header object on the first line
 * ({"kind", "count", "policy_id", "seed", "mdp_hash"}), then one record per
 * line ({"tau0": [[s, a], ...], "tau1": [[s, a], ...]} plus "y" for labeled
 * data). Writers emit no timestamps and iterate in record order, so equal
 * inputs produce bytewise-equal files.
 */

nlohmann::json mdp_to_json(const EpisodicMdp& mdp);
EpisodicMdp mdp_from_json(const nlohmann::json& j);

nlohmann::json policy_to_json(const TabularPolicy& policy);
TabularPolicy policy_from_json(const nlohmann::json& j);

nlohmann::json mixture_to_json(const MixturePolicy& mixture);
MixturePolicy mixture_from_json(const nlohmann::json& j);

/// Optionally embeds the fit report under "fit"; loading ignores it.
nlohmann::json reward_model_to_json(const RewardModel& reward, double step_bound,
                                    const MleFitReport* fit = nullptr);
RewardModel reward_model_from_json(const nlohmann::json& j);

nlohmann::json transition_model_to_json(const TransitionModel& model);
TransitionModel transition_model_from_json(const nlohmann::json& j);

nlohmann::json oracle_report_to_json(const OracleReport& report);

void save_traj_dataset(const TrajectoryPairDataset& data, const std::filesystem::path& path);
TrajectoryPairDataset load_traj_dataset(const std::filesystem::path& path);

void save_pref_dataset(const PreferenceDataset& data, const std::filesystem::path& path);
PreferenceDataset load_pref_dataset(const std::filesystem::path& path);

/// Every trajectory must have exactly `dims.horizon` steps with in-range
/// states and actions; throws std::runtime_error naming the first offender.
void validate_trajectory(const Trajectory& trajectory, Dims dims, const std::string& label);
void validate_dataset(const TrajectoryPairDataset& data, Dims dims);
void validate_dataset(const PreferenceDataset& data, Dims dims);

/// Write with a trailing newline / parse with the file path prepended to any
/// error. The generic entry points for single-document JSON artifacts.
void save_json(const nlohmann::json& j, const std::filesystem::path& path);
nlohmann::json load_json(const std::filesystem::path& path);

EpisodicMdp load_mdp(const std::filesystem::path& path);
MixturePolicy load_mixture(const std::filesystem::path& path);
RewardModel load_reward_model(const std::filesystem::path& path);
TransitionModel load_transition_model(const std::filesystem::path& path);

}  // namespace appo
