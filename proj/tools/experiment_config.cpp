#include "experiment_config.hpp"

#include <cmath>
#include <stdexcept>

namespace appo::cli {

namespace {

using nlohmann::json;

void read_if(const json& j, const char* key, std::string& out) {
  if (j.contains(key)) out = j.at(key).get<std::string>();
}
void read_if(const json& j, const char* key, int& out) {
  if (j.contains(key)) out = j.at(key).get<int>();
}
void read_if(const json& j, const char* key, double& out) {
  if (j.contains(key)) out = j.at(key).get<double>();
}
void read_if(const json& j, const char* key, bool& out) {
  if (j.contains(key)) out = j.at(key).get<bool>();
}
void read_if(const json& j, const char* key, std::uint64_t& out) {
  if (j.contains(key)) out = j.at(key).get<std::uint64_t>();
}
template <typename T>
void read_if(const json& j, const char* key, std::vector<T>& out) {
  if (j.contains(key)) out = j.at(key).get<std::vector<T>>();
}

}  // namespace

void ExperimentConfig::apply_json(const json& j) {
  static const char* known[] = {
      "mdp",    "out",         "seed",        "algo",        "M",
      "N",      "T",           "eta",         "lambda",      "K1",
      "K2",     "link",        "split_data",  "alpha",       "corrupt_reward",
      "workers", "inner_iterations", "traj_data", "pref_data", "lambda_grid",
      "m_grid", "n_grid",      "t_grid",      "seed_grid"};
  for (const auto& [key, value] : j.items()) {
    (void)value;
    bool ok = false;
    for (const char* k : known) ok = ok || key == k;
    if (!ok) throw std::invalid_argument("config: unknown key \"" + key + "\"");
  }

  read_if(j, "mdp", mdp_path);
  read_if(j, "out", out_dir);
  read_if(j, "seed", seed);
  read_if(j, "algo", algo);
  read_if(j, "M", num_pref);
  read_if(j, "N", num_traj);
  read_if(j, "T", iterations);
  if (j.contains("eta")) {
    const json& e = j.at("eta");
    eta = e.is_string() ? parse_eta_flag(e.get<std::string>())
                        : std::optional<double>(e.get<double>());
  }
  read_if(j, "lambda", lambda);
  read_if(j, "K1", k1);
  read_if(j, "K2", k2);
  read_if(j, "link", link);
  read_if(j, "split_data", split_data);
  read_if(j, "alpha", alpha);
  read_if(j, "corrupt_reward", corrupt_reward);
  read_if(j, "workers", workers);
  read_if(j, "inner_iterations", inner_iterations);
  read_if(j, "traj_data", traj_data_path);
  read_if(j, "pref_data", pref_data_path);
  read_if(j, "lambda_grid", lambda_grid);
  read_if(j, "m_grid", m_grid);
  read_if(j, "n_grid", n_grid);
  read_if(j, "t_grid", t_grid);
  read_if(j, "seed_grid", seed_grid);
}

void ExperimentConfig::check() const {
  if (algo != "appo" && algo != "appo-rollout") {
    throw std::invalid_argument("algo must be \"appo\" or \"appo-rollout\", got \"" + algo + "\"");
  }
  if (link != "sigmoid") {
    throw std::invalid_argument("link must be \"sigmoid\", got \"" + link + "\"");
  }
  if (corrupt_reward != "none" && corrupt_reward != "optimistic") {
    throw std::invalid_argument("corrupt_reward must be \"none\" or \"optimistic\", got \"" +
                                corrupt_reward + "\"");
  }
  if (num_pref < 1 || num_traj < 1) throw std::invalid_argument("M and N must be at least 1");
  if (iterations < 1) throw std::invalid_argument("T must be at least 1");
  if (eta.has_value() && (!(*eta > 0.0) || !std::isfinite(*eta))) {
    throw std::invalid_argument("eta must be positive and finite, or \"auto\"");
  }
  if (lambda < 0.0 || !std::isfinite(lambda)) {
    throw std::invalid_argument("lambda must be finite and non-negative");
  }
  if (k1 < 1 || k2 < 1) throw std::invalid_argument("K1 and K2 must be at least 1");
  if (alpha <= 0.0 || !std::isfinite(alpha)) {
    throw std::invalid_argument("alpha must be positive and finite");
  }
  if (workers < 1) throw std::invalid_argument("workers must be at least 1");
  if (inner_iterations < 1) throw std::invalid_argument("inner_iterations must be at least 1");
  for (double l : lambda_grid) {
    if (l < 0.0 || !std::isfinite(l)) {
      throw std::invalid_argument("lambda_grid entries must be finite and non-negative");
    }
  }
  for (int m : m_grid) {
    if (m < 1) throw std::invalid_argument("m_grid entries must be at least 1");
  }
  for (int n : n_grid) {
    if (n < 1) throw std::invalid_argument("n_grid entries must be at least 1");
  }
  for (int t : t_grid) {
    if (t < 1) throw std::invalid_argument("t_grid entries must be at least 1");
  }
}

json ExperimentConfig::to_json() const {
  json j;
  j["mdp"] = mdp_path;
  j["out"] = out_dir;
  j["seed"] = seed;
  j["algo"] = algo;
  j["M"] = num_pref;
  j["N"] = num_traj;
  j["T"] = iterations;
  if (eta.has_value()) {
    j["eta"] = *eta;
  } else {
    j["eta"] = "auto";
  }
  j["lambda"] = lambda;
  j["K1"] = k1;
  j["K2"] = k2;
  j["link"] = link;
  j["split_data"] = split_data;
  j["alpha"] = alpha;
  j["corrupt_reward"] = corrupt_reward;
  j["workers"] = workers;
  j["inner_iterations"] = inner_iterations;
  if (!traj_data_path.empty()) j["traj_data"] = traj_data_path;
  if (!pref_data_path.empty()) j["pref_data"] = pref_data_path;
  if (!lambda_grid.empty()) j["lambda_grid"] = lambda_grid;
  if (!m_grid.empty()) j["m_grid"] = m_grid;
  if (!n_grid.empty()) j["n_grid"] = n_grid;
  if (!t_grid.empty()) j["t_grid"] = t_grid;
  if (!seed_grid.empty()) j["seed_grid"] = seed_grid;
  return j;
}

std::optional<double> parse_eta_flag(const std::string& text) {
  if (text == "auto") return std::nullopt;
  std::size_t used = 0;
  double value = 0.0;
  try {
    value = std::stod(text, &used);
  } catch (const std::exception&) {
    throw std::invalid_argument("eta must be \"auto\" or a number, got \"" + text + "\"");
  }
  if (used != text.size()) {
    throw std::invalid_argument("eta must be \"auto\" or a number, got \"" + text + "\"");
  }
  return value;
}

}  // namespace appo::cli
