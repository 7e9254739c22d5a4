#include "appo/serialization.hpp"

#include <fstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace appo {

namespace {

using nlohmann::json;

json table_3d(const std::vector<double>& flat, Dims dims) {
  json layers = json::array();
  for (int h = 0; h < dims.horizon; ++h) {
    json states = json::array();
    for (int s = 0; s < dims.num_states; ++s) {
      json actions = json::array();
      for (int a = 0; a < dims.num_actions; ++a) actions.push_back(flat[dims.index(h, s, a)]);
      states.push_back(std::move(actions));
    }
    layers.push_back(std::move(states));
  }
  return layers;
}

json table_4d(const std::vector<double>& flat, Dims dims) {
  json layers = json::array();
  for (int h = 0; h < dims.horizon; ++h) {
    json states = json::array();
    for (int s = 0; s < dims.num_states; ++s) {
      json actions = json::array();
      for (int a = 0; a < dims.num_actions; ++a) {
        json next = json::array();
        const std::size_t base = static_cast<std::size_t>(dims.index(h, s, a)) * dims.num_states;
        for (int sp = 0; sp < dims.num_states; ++sp) next.push_back(flat[base + sp]);
        actions.push_back(std::move(next));
      }
      states.push_back(std::move(actions));
    }
    layers.push_back(std::move(states));
  }
  return layers;
}

void require_array(const json& j, std::size_t size, const std::string& what) {
  if (!j.is_array() || j.size() != size) {
    throw std::runtime_error(what + ": expected an array of length " + std::to_string(size));
  }
}

std::vector<double> flatten_3d(const json& j, Dims dims, const std::string& what) {
  require_array(j, static_cast<std::size_t>(dims.horizon), what);
  std::vector<double> flat(dims.table_size(), 0.0);
  for (int h = 0; h < dims.horizon; ++h) {
    require_array(j[h], static_cast<std::size_t>(dims.num_states), what + "[h]");
    for (int s = 0; s < dims.num_states; ++s) {
      require_array(j[h][s], static_cast<std::size_t>(dims.num_actions), what + "[h][s]");
      for (int a = 0; a < dims.num_actions; ++a) {
        flat[dims.index(h, s, a)] = j[h][s][a].get<double>();
      }
    }
  }
  return flat;
}

std::vector<double> flatten_4d(const json& j, Dims dims, const std::string& what) {
  require_array(j, static_cast<std::size_t>(dims.horizon), what);
  std::vector<double> flat(static_cast<std::size_t>(dims.table_size()) * dims.num_states, 0.0);
  for (int h = 0; h < dims.horizon; ++h) {
    require_array(j[h], static_cast<std::size_t>(dims.num_states), what + "[h]");
    for (int s = 0; s < dims.num_states; ++s) {
      require_array(j[h][s], static_cast<std::size_t>(dims.num_actions), what + "[h][s]");
      for (int a = 0; a < dims.num_actions; ++a) {
        require_array(j[h][s][a], static_cast<std::size_t>(dims.num_states), what + "[h][s][a]");
        const std::size_t base = static_cast<std::size_t>(dims.index(h, s, a)) * dims.num_states;
        for (int sp = 0; sp < dims.num_states; ++sp) flat[base + sp] = j[h][s][a][sp].get<double>();
      }
    }
  }
  return flat;
}

Dims dims_from_json(const json& j) {
  return {j.at("num_states").get<int>(), j.at("num_actions").get<int>(),
          j.at("horizon").get<int>()};
}

void dims_to_json(json& j, Dims dims) {
  j["num_states"] = dims.num_states;
  j["num_actions"] = dims.num_actions;
  j["horizon"] = dims.horizon;
}

void require_kind(const json& j, const std::string& kind) {
  if (j.value("kind", std::string()) != kind) {
    throw std::runtime_error("expected a document with kind \"" + kind + "\"");
  }
}

json trajectory_to_json(const Trajectory& trajectory) {
  json steps = json::array();
  for (const StateAction& step : trajectory.steps) {
    steps.push_back(json::array({step.state, step.action}));
  }
  return steps;
}

Trajectory trajectory_from_json(const json& j, const std::string& what) {
  if (!j.is_array()) throw std::runtime_error(what + ": expected an array of [state, action]");
  Trajectory trajectory;
  trajectory.steps.reserve(j.size());
  for (const json& step : j) {
    require_array(step, 2, what + " step");
    trajectory.steps.push_back({step[0].get<int>(), step[1].get<int>()});
  }
  return trajectory;
}

json provenance_header(const char* kind, const DatasetProvenance& provenance,
                       std::size_t count) {
  json header;
  header["kind"] = kind;
  header["count"] = count;
  header["policy_id"] = provenance.policy_id;
  header["seed"] = provenance.seed;
  header["mdp_hash"] = provenance.mdp_hash;
  return header;
}

DatasetProvenance provenance_from_header(const json& header) {
  DatasetProvenance provenance;
  provenance.policy_id = header.value("policy_id", std::string());
  provenance.seed = header.value("seed", std::uint64_t{0});
  provenance.mdp_hash = header.value("mdp_hash", std::string());
  return provenance;
}

std::ofstream open_for_write(const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  return out;
}

void finish_write(std::ofstream& out, const std::filesystem::path& path) {
  out.flush();
  if (!out) throw std::runtime_error("write to " + path.string() + " failed");
}

/// Header line plus one record per line; throws on header/count mismatch.
template <typename Record>
std::pair<DatasetProvenance, std::vector<Record>> load_jsonl(
    const std::filesystem::path& path, const char* kind,
    Record (*parse)(const json&, const std::string&)) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::string line;
  std::size_t line_number = 0;
  json header;
  std::vector<Record> records;
  try {
    while (std::getline(in, line)) {
      ++line_number;
      if (line.empty()) continue;
      const json j = json::parse(line);
      if (header.is_null()) {
        require_kind(j, kind);
        header = j;
        records.reserve(header.value("count", std::size_t{0}));
        continue;
      }
      records.push_back(parse(j, "record " + std::to_string(records.size())));
    }
  } catch (const json::exception& e) {
    throw std::runtime_error(path.string() + ":" + std::to_string(line_number) + ": " + e.what());
  }
  if (header.is_null()) throw std::runtime_error(path.string() + ": missing header line");
  if (header.contains("count") && header["count"].get<std::size_t>() != records.size()) {
    throw std::runtime_error(path.string() + ": header count " +
                             header["count"].dump() + " does not match " +
                             std::to_string(records.size()) + " records");
  }
  return {provenance_from_header(header), std::move(records)};
}

std::pair<Trajectory, Trajectory> traj_record_from_json(const json& j, const std::string& what) {
  return {trajectory_from_json(j.at("tau0"), what + " tau0"),
          trajectory_from_json(j.at("tau1"), what + " tau1")};
}

PreferenceSample pref_record_from_json(const json& j, const std::string& what) {
  PreferenceSample sample;
  sample.tau0 = trajectory_from_json(j.at("tau0"), what + " tau0");
  sample.tau1 = trajectory_from_json(j.at("tau1"), what + " tau1");
  sample.label = j.at("y").get<int>();
  if (sample.label != 0 && sample.label != 1) {
    throw std::runtime_error(what + ": label must be 0 or 1");
  }
  return sample;
}

}  // namespace

json mdp_to_json(const EpisodicMdp& mdp) {
  json j;
  j["kind"] = "mdp";
  dims_to_json(j, mdp.dims());
  j["initial_state"] = mdp.initial_state();
  j["return_bound"] = mdp.return_bound();
  const Dims dims = mdp.dims();
  std::vector<double> transitions(static_cast<std::size_t>(dims.table_size()) * dims.num_states);
  for (int h = 0; h < dims.horizon; ++h) {
    for (int s = 0; s < dims.num_states; ++s) {
      for (int a = 0; a < dims.num_actions; ++a) {
        const auto row = mdp.transition_row(h, s, a);
        const std::size_t base = static_cast<std::size_t>(dims.index(h, s, a)) * dims.num_states;
        for (int sp = 0; sp < dims.num_states; ++sp) transitions[base + sp] = row[sp];
      }
    }
  }
  j["transitions"] = table_4d(transitions, dims);
  j["reward"] = table_3d(mdp.true_reward().values(), dims);
  return j;
}

EpisodicMdp mdp_from_json(const json& j) {
  require_kind(j, "mdp");
  const Dims dims = dims_from_json(j);
  return EpisodicMdp(dims.num_states, dims.num_actions, dims.horizon,
                     j.at("initial_state").get<int>(), j.at("return_bound").get<double>(),
                     flatten_4d(j.at("transitions"), dims, "transitions"),
                     flatten_3d(j.at("reward"), dims, "reward"));
}

json policy_to_json(const TabularPolicy& policy) {
  json j;
  j["kind"] = "policy";
  dims_to_json(j, policy.dims());
  j["probs"] = table_3d(policy.values(), policy.dims());
  return j;
}

TabularPolicy policy_from_json(const json& j) {
  require_kind(j, "policy");
  const Dims dims = dims_from_json(j);
  return TabularPolicy(dims, flatten_3d(j.at("probs"), dims, "probs"));
}

json mixture_to_json(const MixturePolicy& mixture) {
  json j;
  j["kind"] = "mixture_policy";
  json iterates = json::array();
  for (const TabularPolicy& policy : mixture.iterates) iterates.push_back(policy_to_json(policy));
  j["iterates"] = std::move(iterates);
  return j;
}

MixturePolicy mixture_from_json(const json& j) {
  require_kind(j, "mixture_policy");
  MixturePolicy mixture;
  for (const json& entry : j.at("iterates")) mixture.iterates.push_back(policy_from_json(entry));
  if (mixture.iterates.empty()) throw std::runtime_error("mixture_policy: no iterates");
  return mixture;
}

json reward_model_to_json(const RewardModel& reward, double step_bound, const MleFitReport* fit) {
  json j;
  j["kind"] = "reward_model";
  dims_to_json(j, reward.dims());
  j["step_bound"] = step_bound;
  j["values"] = table_3d(reward.values(), reward.dims());
  if (fit != nullptr) {
    json f;
    f["final_loss"] = fit->final_loss;
    f["iterations"] = fit->iterations;
    f["grad_inf_norm"] = fit->grad_inf_norm;
    f["converged"] = fit->converged;
    f["clamped_likelihood"] = fit->clamped_likelihood;
    f["loss_history"] = fit->loss_history;
    j["fit"] = std::move(f);
  }
  return j;
}

RewardModel reward_model_from_json(const json& j) {
  require_kind(j, "reward_model");
  const Dims dims = dims_from_json(j);
  RewardModel reward(dims, flatten_3d(j.at("values"), dims, "values"));
  if (j.contains("step_bound")) reward.validate_box(0.0, j["step_bound"].get<double>());
  return reward;
}

json transition_model_to_json(const TransitionModel& model) {
  json j;
  j["kind"] = "transition_model";
  dims_to_json(j, model.dims());
  j["alpha"] = model.alpha();
  const Dims dims = model.dims();
  std::vector<double> kernels(static_cast<std::size_t>(dims.table_size()) * dims.num_states);
  for (int h = 0; h < dims.horizon; ++h) {
    for (int s = 0; s < dims.num_states; ++s) {
      for (int a = 0; a < dims.num_actions; ++a) {
        const auto row = model.row(h, s, a);
        const std::size_t base = static_cast<std::size_t>(dims.index(h, s, a)) * dims.num_states;
        for (int sp = 0; sp < dims.num_states; ++sp) kernels[base + sp] = row[sp];
      }
    }
  }
  j["kernels"] = table_4d(kernels, dims);
  j["visit_counts"] = table_3d(model.visit_counts(), dims);
  return j;
}

TransitionModel transition_model_from_json(const json& j) {
  require_kind(j, "transition_model");
  const Dims dims = dims_from_json(j);
  return TransitionModel(dims, flatten_4d(j.at("kernels"), dims, "kernels"),
                         flatten_3d(j.at("visit_counts"), dims, "visit_counts"),
                         j.value("alpha", 1.0));
}

json oracle_report_to_json(const OracleReport& report) {
  json j;
  j["kind"] = "oracle_report";
  j["v_star"] = report.v_star;
  j["optimal_actions"] = report.optimal_actions;
  json checks = json::array();
  for (const OracleCheck& check : report.checks) {
    json c;
    c["name"] = check.name;
    c["pass"] = check.pass;
    c["residual"] = check.residual;
    c["tolerance"] = check.tolerance;
    checks.push_back(std::move(c));
  }
  j["checks"] = std::move(checks);
  j["all_passed"] = report.all_passed();
  return j;
}

void save_traj_dataset(const TrajectoryPairDataset& data, const std::filesystem::path& path) {
  std::ofstream out = open_for_write(path);
  out << provenance_header("trajectory_pairs", data.provenance, data.size()).dump() << '\n';
  for (const auto& [tau0, tau1] : data.pairs) {
    json record;
    record["tau0"] = trajectory_to_json(tau0);
    record["tau1"] = trajectory_to_json(tau1);
    out << record.dump() << '\n';
  }
  finish_write(out, path);
}

TrajectoryPairDataset load_traj_dataset(const std::filesystem::path& path) {
  auto [provenance, records] =
      load_jsonl<std::pair<Trajectory, Trajectory>>(path, "trajectory_pairs",
                                                    &traj_record_from_json);
  return {std::move(records), std::move(provenance)};
}

void save_pref_dataset(const PreferenceDataset& data, const std::filesystem::path& path) {
  std::ofstream out = open_for_write(path);
  out << provenance_header("preference_pairs", data.provenance, data.size()).dump() << '\n';
  for (const PreferenceSample& sample : data.samples) {
    json record;
    record["tau0"] = trajectory_to_json(sample.tau0);
    record["tau1"] = trajectory_to_json(sample.tau1);
    record["y"] = sample.label;
    out << record.dump() << '\n';
  }
  finish_write(out, path);
}

PreferenceDataset load_pref_dataset(const std::filesystem::path& path) {
  auto [provenance, records] =
      load_jsonl<PreferenceSample>(path, "preference_pairs", &pref_record_from_json);
  return {std::move(records), std::move(provenance)};
}

void validate_trajectory(const Trajectory& trajectory, Dims dims, const std::string& label) {
  if (trajectory.length() != dims.horizon) {
    throw std::runtime_error(label + ": has " + std::to_string(trajectory.length()) +
                             " steps, expected " + std::to_string(dims.horizon));
  }
  for (int h = 0; h < dims.horizon; ++h) {
    const StateAction& step = trajectory.steps[h];
    if (step.state < 0 || step.state >= dims.num_states || step.action < 0 ||
        step.action >= dims.num_actions) {
      throw std::runtime_error(label + ": step " + std::to_string(h) + " = (" +
                               std::to_string(step.state) + ", " + std::to_string(step.action) +
                               ") is out of range");
    }
  }
}

void validate_dataset(const TrajectoryPairDataset& data, Dims dims) {
  for (std::size_t i = 0; i < data.pairs.size(); ++i) {
    validate_trajectory(data.pairs[i].first, dims, "pair " + std::to_string(i) + " tau0");
    validate_trajectory(data.pairs[i].second, dims, "pair " + std::to_string(i) + " tau1");
  }
}

void validate_dataset(const PreferenceDataset& data, Dims dims) {
  for (std::size_t i = 0; i < data.samples.size(); ++i) {
    validate_trajectory(data.samples[i].tau0, dims, "sample " + std::to_string(i) + " tau0");
    validate_trajectory(data.samples[i].tau1, dims, "sample " + std::to_string(i) + " tau1");
  }
}

void save_json(const json& j, const std::filesystem::path& path) {
  std::ofstream out = open_for_write(path);
  out << j.dump(2) << '\n';
  finish_write(out, path);
}

json load_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw std::runtime_error(path.string() + ": " + e.what());
  }
}

namespace {

template <typename F>
auto parse_document(const std::filesystem::path& path, F&& from_json)
    -> decltype(from_json(json{})) {
  const json j = load_json(path);
  try {
    return from_json(j);
  } catch (const std::exception& e) {
    throw std::runtime_error(path.string() + ": " + e.what());
  }
}

}  // namespace

EpisodicMdp load_mdp(const std::filesystem::path& path) {
  return parse_document(path, [](const json& j) { return mdp_from_json(j); });
}

MixturePolicy load_mixture(const std::filesystem::path& path) {
  return parse_document(path, [](const json& j) { return mixture_from_json(j); });
}

RewardModel load_reward_model(const std::filesystem::path& path) {
  return parse_document(path, [](const json& j) { return reward_model_from_json(j); });
}

TransitionModel load_transition_model(const std::filesystem::path& path) {
  return parse_document(path, [](const json& j) { return transition_model_from_json(j); });
}

}  // namespace appo
