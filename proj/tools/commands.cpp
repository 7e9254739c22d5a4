#include "commands.hpp"

#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <optional>
#include <stdexcept>
#include <thread>
#include <vector>

#include "appo/datagen.hpp"
#include "appo/engine.hpp"
#include "appo/estimators.hpp"
#include "appo/logging.hpp"
#include "appo/mdp.hpp"
#include "appo/oracle.hpp"
#include "appo/rng.hpp"
#include "appo/serialization.hpp"

namespace appo::cli {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;
using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

std::string csv_double(double value) {
  if (std::isnan(value)) return "nan";
  if (std::isinf(value)) return value > 0 ? "inf" : "-inf";
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", value);
  return buf;
}

fs::path ensure_out_dir(const ExperimentConfig& config) {
  fs::path dir(config.out_dir);
  fs::create_directories(dir);
  return dir;
}

EpisodicMdp load_required_mdp(const ExperimentConfig& config) {
  if (config.mdp_path.empty()) {
    throw std::invalid_argument("an MDP file is required: pass --mdp or set \"mdp\" in the config");
  }
  return load_mdp(config.mdp_path);
}

/// Independent per-purpose seeds derived from the one user-facing seed, so
/// changing e.g. the training seed does not reshuffle the datasets.
struct SeedPlan {
  std::uint64_t traj = 0;
  std::uint64_t pref = 0;
  std::uint64_t train = 0;
};

SeedPlan make_seed_plan(std::uint64_t seed) {
  SplitMix64 root(seed);
  return {root.split(1)(), root.split(2)(), root.split(3)()};
}

TrajectoryPairDataset obtain_traj_data(const ExperimentConfig& config, const EpisodicMdp& mdp,
                                       const TabularPolicy& pi_ref, const SeedPlan& seeds) {
  if (!config.traj_data_path.empty()) {
    TrajectoryPairDataset data = load_traj_dataset(config.traj_data_path);
    validate_dataset(data, mdp.dims());
    return data;
  }
  return generate_traj_dataset(mdp, pi_ref, config.num_traj, seeds.traj);
}

PreferenceDataset obtain_pref_data(const ExperimentConfig& config, const EpisodicMdp& mdp,
                                   const TabularPolicy& pi_ref, const LinkFunction& link,
                                   const SeedPlan& seeds) {
  if (!config.pref_data_path.empty()) {
    PreferenceDataset data = load_pref_dataset(config.pref_data_path);
    validate_dataset(data, mdp.dims());
    return data;
  }
  return generate_pref_dataset(mdp, pi_ref, config.num_pref, link, seeds.pref);
}

json base_metadata(const char* command, const ExperimentConfig& config,
                   const EpisodicMdp& mdp) {
  json meta;
  meta["command"] = command;
  meta["config"] = config.to_json();
  meta["mdp_hash"] = mdp_fingerprint(mdp);
  meta["created_unix"] = static_cast<std::int64_t>(std::time(nullptr));
  return meta;
}

/// results.csv / sweep_results.csv row.
struct ResultRow {
  std::string run_id;
  std::uint64_t seed = 0;
  double lambda = 0.0;
  int num_pref = 0;
  int num_traj = 0;
  int iterations = 0;
  double suboptimality = std::numeric_limits<double>::quiet_NaN();
  double c_traj = std::numeric_limits<double>::quiet_NaN();
  double c_step = std::numeric_limits<double>::quiet_NaN();
  std::string status = "ok";
};

void write_result_rows(const fs::path& path, const std::vector<ResultRow>& rows) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  out << "run_id,seed,lambda,M,N,T,suboptimality,c_tr,c_step,status\n";
  for (const ResultRow& row : rows) {
    out << row.run_id << ',' << row.seed << ',' << csv_double(row.lambda) << ','
        << row.num_pref << ',' << row.num_traj << ',' << row.iterations << ','
        << csv_double(row.suboptimality) << ',' << csv_double(row.c_traj) << ','
        << csv_double(row.c_step) << ',' << row.status << "\n";
  }
  out.flush();
  if (!out) throw std::runtime_error("write to " + path.string() + " failed");
}

std::string run_identifier(const ExperimentConfig& config) {
  return config.algo + "-l" + csv_double(config.lambda) + "-M" +
         std::to_string(config.num_pref) + "-N" + std::to_string(config.num_traj) + "-T" +
         std::to_string(config.iterations) + "-s" + std::to_string(config.seed);
}

struct TrainOutput {
  AppoResult run;
  RewardModel reward;
  MleFitReport fit;
  TransitionModel transitions;
  double suboptimality = 0.0;
  std::optional<ConcentrabilityReport> shift;
  std::vector<std::string> warnings;
  double fit_reward_seconds = 0.0;
  double fit_transition_seconds = 0.0;
  double train_seconds = 0.0;
};

/// The full offline pipeline for one configuration: obtain data, fit the
/// models, run the chosen optimizer, and score the mixture exactly.
TrainOutput train_once(const ExperimentConfig& config, const EpisodicMdp& mdp) {
  const Dims dims = mdp.dims();
  const TabularPolicy pi_ref = TabularPolicy::uniform(dims);
  const LinkFunction link = LinkFunction::sigmoid(mdp.return_bound());
  const SeedPlan seeds = make_seed_plan(config.seed);

  const TrajectoryPairDataset traj = obtain_traj_data(config, mdp, pi_ref, seeds);
  const PreferenceDataset pref = obtain_pref_data(config, mdp, pi_ref, link, seeds);

  auto t0 = Clock::now();
  auto [reward, fit] = reward_mle(pref, link, dims, mdp.step_reward_bound());
  const double fit_reward_seconds = seconds_since(t0);

  t0 = Clock::now();
  const TransitionModel transitions =
      config.split_data ? transition_mle(traj.split_halves().first, dims, config.alpha)
                        : transition_mle(traj, dims, config.alpha);
  const double fit_transition_seconds = seconds_since(t0);

  if (config.corrupt_reward == "optimistic") {
    reward = corrupt_reward_optimistic(reward, transitions, mdp.step_reward_bound());
  }

  AppoConfig engine;
  engine.iterations = config.iterations;
  engine.eta = config.eta;
  engine.lambda = config.lambda;
  engine.inner_iterations = config.inner_iterations;
  engine.split_data = config.split_data;
  engine.seed = seeds.train;

  std::optional<ConcentrabilityReport> shift;
  try {
    const auto [pi_star, v_star] = optimal_policy(mdp);
    (void)v_star;
    shift = concentrability(mdp, pi_ref, pi_star);
  } catch (const EnumerationInfeasibleError& e) {
    log::info(std::string("skipping concentrability report: ") + e.what());
  }

  std::vector<std::string> warnings =
      engine.validate(dims.num_actions, mdp.return_bound(), shift ? &*shift : nullptr);
  if (config.split_data && config.algo == "appo-rollout") {
    warnings.push_back("split_data has no effect with appo-rollout");
  }
  for (const std::string& w : warnings) log::warn(w);

  t0 = Clock::now();
  AppoResult run =
      config.algo == "appo"
          ? run_appo(engine, traj, reward, transitions, dims, mdp.return_bound(), &mdp)
          : run_appo_rollout(engine, mdp, pi_ref, traj, reward, config.k1, config.k2);
  const double train_seconds = seconds_since(t0);

  const double subopt = suboptimality(mdp, run.mixture);
  return TrainOutput{std::move(run),
                     std::move(reward),
                     std::move(fit),
                     transitions,
                     subopt,
                     std::move(shift),
                     std::move(warnings),
                     fit_reward_seconds,
                     fit_transition_seconds,
                     train_seconds};
}

ResultRow row_from_output(const ExperimentConfig& config, const TrainOutput& output) {
  ResultRow row;
  row.run_id = run_identifier(config);
  row.seed = config.seed;
  row.lambda = config.lambda;
  row.num_pref = config.num_pref;
  row.num_traj = config.num_traj;
  row.iterations = config.iterations;
  row.suboptimality = output.suboptimality;
  if (output.shift) {
    row.c_traj = output.shift->c_traj;
    row.c_step = output.shift->c_step;
  }
  return row;
}

}  // namespace

void emit_error(const std::string& code, const std::string& message) {
  json j;
  j["error"] = {{"code", code}, {"message", message}};
  std::cerr << j.dump() << std::endl;
}

int run_gen(const ExperimentConfig& config) {
  const EpisodicMdp mdp = load_required_mdp(config);
  const TabularPolicy pi_ref = TabularPolicy::uniform(mdp.dims());
  const LinkFunction link = LinkFunction::sigmoid(mdp.return_bound());
  const SeedPlan seeds = make_seed_plan(config.seed);
  const fs::path dir = ensure_out_dir(config);

  auto t0 = Clock::now();
  const TrajectoryPairDataset traj =
      generate_traj_dataset(mdp, pi_ref, config.num_traj, seeds.traj);
  const double traj_seconds = seconds_since(t0);

  t0 = Clock::now();
  const PreferenceDataset pref =
      generate_pref_dataset(mdp, pi_ref, config.num_pref, link, seeds.pref);
  const double pref_seconds = seconds_since(t0);

  save_traj_dataset(traj, dir / "d_traj.jsonl");
  save_pref_dataset(pref, dir / "d_pref.jsonl");

  json meta = base_metadata("gen", config, mdp);
  meta["timing_seconds"] = {{"traj", traj_seconds}, {"pref", pref_seconds}};
  save_json(meta, dir / "metadata.json");

  json summary;
  summary["traj"] = (dir / "d_traj.jsonl").string();
  summary["pref"] = (dir / "d_pref.jsonl").string();
  summary["N"] = config.num_traj;
  summary["M"] = config.num_pref;
  std::cout << summary.dump() << std::endl;
  return 0;
}

int run_fit_reward(const ExperimentConfig& config) {
  const EpisodicMdp mdp = load_required_mdp(config);
  if (config.pref_data_path.empty()) {
    throw std::invalid_argument("fit-reward needs --pref-data");
  }
  const PreferenceDataset data = load_pref_dataset(config.pref_data_path);
  validate_dataset(data, mdp.dims());
  const LinkFunction link = LinkFunction::sigmoid(mdp.return_bound());

  const auto t0 = Clock::now();
  const auto [reward, fit] = reward_mle(data, link, mdp.dims(), mdp.step_reward_bound());
  const double fit_seconds = seconds_since(t0);

  const fs::path dir = ensure_out_dir(config);
  save_json(reward_model_to_json(reward, mdp.step_reward_bound(), &fit),
            dir / "reward_model.json");

  json meta = base_metadata("fit-reward", config, mdp);
  meta["timing_seconds"] = {{"fit_reward", fit_seconds}};
  save_json(meta, dir / "metadata.json");

  json summary;
  summary["final_loss"] = fit.final_loss;
  summary["iterations"] = fit.iterations;
  summary["grad_inf_norm"] = fit.grad_inf_norm;
  summary["converged"] = fit.converged;
  summary["model"] = (dir / "reward_model.json").string();
  std::cout << summary.dump() << std::endl;
  return 0;
}

int run_fit_transition(const ExperimentConfig& config) {
  const EpisodicMdp mdp = load_required_mdp(config);
  if (config.traj_data_path.empty()) {
    throw std::invalid_argument("fit-transition needs --traj-data");
  }
  const TrajectoryPairDataset data = load_traj_dataset(config.traj_data_path);
  validate_dataset(data, mdp.dims());

  const auto t0 = Clock::now();
  const TransitionModel model = transition_mle(data, mdp.dims(), config.alpha);
  const double fit_seconds = seconds_since(t0);

  const fs::path dir = ensure_out_dir(config);
  save_json(transition_model_to_json(model), dir / "transition_model.json");

  json meta = base_metadata("fit-transition", config, mdp);
  meta["timing_seconds"] = {{"fit_transition", fit_seconds}};
  save_json(meta, dir / "metadata.json");

  int visited = 0;
  for (double c : model.visit_counts()) visited += c > 0 ? 1 : 0;
  json summary;
  summary["alpha"] = config.alpha;
  summary["visited_cells"] = visited;
  summary["total_cells"] = mdp.dims().table_size();
  summary["model"] = (dir / "transition_model.json").string();
  std::cout << summary.dump() << std::endl;
  return 0;
}

int run_train(const ExperimentConfig& config) {
  const auto total_start = Clock::now();
  const EpisodicMdp mdp = load_required_mdp(config);
  const fs::path dir = ensure_out_dir(config);

  TrainOutput output = train_once(config, mdp);

  save_json(mixture_to_json(output.run.mixture), dir / "mixture_policy.json");
  save_json(reward_model_to_json(output.reward, mdp.step_reward_bound(), &output.fit),
            dir / "reward_model.json");
  save_json(transition_model_to_json(output.transitions), dir / "transition_model.json");

  {
    std::ofstream out(dir / "runlog.csv");
    if (!out) throw std::runtime_error("cannot open runlog.csv for writing");
    output.run.log.to_csv(out, /*include_timing=*/false);
  }

  write_result_rows(dir / "results.csv", {row_from_output(config, output)});

  json meta = base_metadata("train", config, mdp);
  AppoConfig eta_probe;
  eta_probe.iterations = config.iterations;
  eta_probe.eta = config.eta;
  meta["eta_resolved"] = eta_probe.resolve_eta(mdp.num_actions(), mdp.return_bound());
  meta["suboptimality"] = output.suboptimality;
  if (output.shift) {
    meta["c_traj"] = std::isfinite(output.shift->c_traj) ? json(output.shift->c_traj)
                                                         : json("inf");
    meta["c_step"] = output.shift->c_step;
    meta["support_violation"] = output.shift->support_violation;
  }
  meta["warnings"] = output.warnings;
  meta["timing_seconds"] = {{"fit_reward", output.fit_reward_seconds},
                            {"fit_transition", output.fit_transition_seconds},
                            {"train", output.train_seconds},
                            {"total", seconds_since(total_start)}};
  save_json(meta, dir / "metadata.json");

  json summary;
  summary["suboptimality"] = output.suboptimality;
  summary["iterations"] = config.iterations;
  summary["out"] = dir.string();
  std::cout << summary.dump() << std::endl;
  return 0;
}

int run_sweep(const ExperimentConfig& config) {
  const auto total_start = Clock::now();
  const EpisodicMdp mdp = load_required_mdp(config);
  const fs::path dir = ensure_out_dir(config);

  const std::vector<double> lambdas =
      config.lambda_grid.empty() ? std::vector<double>{config.lambda} : config.lambda_grid;
  const std::vector<int> ms =
      config.m_grid.empty() ? std::vector<int>{config.num_pref} : config.m_grid;
  const std::vector<int> ns =
      config.n_grid.empty() ? std::vector<int>{config.num_traj} : config.n_grid;
  const std::vector<int> ts =
      config.t_grid.empty() ? std::vector<int>{config.iterations} : config.t_grid;
  const std::vector<std::uint64_t> seeds =
      config.seed_grid.empty() ? std::vector<std::uint64_t>{config.seed} : config.seed_grid;

  std::vector<ExperimentConfig> rows;
  for (double lambda : lambdas) {
    for (int m : ms) {
      for (int n : ns) {
        for (int t : ts) {
          for (std::uint64_t seed : seeds) {
            ExperimentConfig row = config;
            row.lambda = lambda;
            row.num_pref = m;
            row.num_traj = n;
            row.iterations = t;
            row.seed = seed;
            row.traj_data_path.clear();  // grid rows always draw their own data
            row.pref_data_path.clear();
            rows.push_back(std::move(row));
          }
        }
      }
    }
  }

  std::vector<ResultRow> results(rows.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next.fetch_add(1); i < rows.size(); i = next.fetch_add(1)) {
      try {
        results[i] = row_from_output(rows[i], train_once(rows[i], mdp));
      } catch (const std::exception& e) {
        ResultRow row;
        row.run_id = run_identifier(rows[i]);
        row.seed = rows[i].seed;
        row.lambda = rows[i].lambda;
        row.num_pref = rows[i].num_pref;
        row.num_traj = rows[i].num_traj;
        row.iterations = rows[i].iterations;
        std::string message = e.what();
        for (char& c : message) {
          if (c == ',' || c == '\n') c = ';';
        }
        row.status = "error: " + message;
        results[i] = std::move(row);
      }
    }
  };
  const int workers = std::max(1, std::min(config.workers, static_cast<int>(rows.size())));
  if (workers == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (int w = 0; w < workers; ++w) pool.emplace_back(worker);
    for (std::thread& t : pool) t.join();
  }

  write_result_rows(dir / "sweep_results.csv", results);

  json meta = base_metadata("sweep", config, mdp);
  meta["rows"] = results.size();
  meta["timing_seconds"] = {{"total", seconds_since(total_start)}};
  save_json(meta, dir / "metadata.json");

  std::size_t failed = 0;
  for (const ResultRow& row : results) failed += row.status == "ok" ? 0 : 1;
  json summary;
  summary["rows"] = results.size();
  summary["failed"] = failed;
  summary["out"] = (dir / "sweep_results.csv").string();
  std::cout << summary.dump() << std::endl;
  return failed == 0 ? 0 : 1;
}

int run_verify(const ExperimentConfig& config) {
  const fs::path dir = ensure_out_dir(config);
  std::optional<EpisodicMdp> mdp;
  std::string load_error;
  if (config.mdp_path.empty()) {
    throw std::invalid_argument("verify needs an MDP file: pass --mdp or set \"mdp\"");
  }
  try {
    mdp.emplace(load_mdp(config.mdp_path));
  } catch (const std::exception& e) {
    load_error = e.what();
  }

  OracleReport report;
  if (mdp) {
    report = run_verification_suite(*mdp, config.seed);
  } else {
    report.checks.push_back({"model-validation", false, 1.0, 0.0});
  }

  json doc = oracle_report_to_json(report);
  if (!load_error.empty()) doc["error"] = load_error;
  save_json(doc, dir / "oracle_report.json");

  for (const OracleCheck& check : report.checks) {
    std::printf("[%s] %-38s residual=%.3g tolerance=%.3g\n", check.pass ? "PASS" : "FAIL",
                check.name.c_str(), check.residual, check.tolerance);
  }
  if (!load_error.empty()) std::printf("model load failed: %s\n", load_error.c_str());
  std::printf("%s\n", report.all_passed() ? "all checks passed" : "some checks FAILED");
  return report.all_passed() ? 0 : 1;
}

}  // namespace appo::cli
