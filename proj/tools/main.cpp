#include <CLI11.hpp>

#include "appo/serialization.hpp"
#include "commands.hpp"
#include "experiment_config.hpp"

int main(int argc, char** argv) {
  using namespace appo::cli;

  CLI::App app{"Offline preference-based policy optimization on tabular episodic MDPs"};
  app.require_subcommand(1);

  std::string config_path, mdp, out, algo, link, corrupt, eta_text, traj_data, pref_data;
  std::uint64_t seed = 0;
  int num_pref = 0, num_traj = 0, iterations = 0, k1 = 0, k2 = 0, workers = 0, inner = 0;
  double lambda = 0.0, alpha = 0.0;

  auto* o_config =
      app.add_option("--config", config_path, "JSON config file; flags override its values")
          ->check(CLI::ExistingFile);
  auto* o_mdp = app.add_option("--mdp", mdp, "MDP definition (json)");
  auto* o_out = app.add_option("--out", out, "output directory (default: out)");
  auto* o_seed = app.add_option("--seed", seed, "root seed (default 0)");
  auto* o_algo = app.add_option("--algo", algo, "appo | appo-rollout");
  auto* o_pref_count = app.add_option("--M", num_pref, "preference pairs to draw");
  auto* o_traj_count = app.add_option("--N", num_traj, "unlabeled trajectory pairs to draw");
  auto* o_iters = app.add_option("--T", iterations, "optimizer iterations");
  auto* o_eta = app.add_option("--eta", eta_text, "step size, or \"auto\"");
  auto* o_lambda = app.add_option("--lambda", lambda, "deviation-loss weight");
  auto* o_k1 = app.add_option("--K1", k1, "on-policy rollouts per iteration (appo-rollout)");
  auto* o_k2 = app.add_option("--K2", k2, "evaluation rollouts per layer (appo-rollout)");
  auto* o_link = app.add_option("--link", link, "preference link function (sigmoid)");
  auto* o_split = app.add_flag(
      "--split-data", "fit transitions on the first half of the pair data, losses on the second");
  auto* o_alpha = app.add_option("--alpha", alpha, "transition smoothing pseudo-count");
  auto* o_corrupt = app.add_option("--corrupt-reward", corrupt, "none | optimistic");
  auto* o_workers = app.add_option("--workers", workers, "sweep worker threads");
  auto* o_inner = app.add_option("--inner-iterations", inner, "adversary solver iterations");
  auto* o_traj = app.add_option("--traj-data", traj_data, "trajectory-pair dataset (jsonl)");
  auto* o_pref = app.add_option("--pref-data", pref_data, "preference dataset (jsonl)");

  CLI::App* gen = app.add_subcommand("gen", "sample trajectory-pair and preference datasets");
  CLI::App* fit_reward =
      app.add_subcommand("fit-reward", "fit the reward model from preference data");
  CLI::App* fit_transition =
      app.add_subcommand("fit-transition", "fit the smoothed transition model");
  CLI::App* train = app.add_subcommand("train", "run the adversarial policy optimizer");
  CLI::App* sweep = app.add_subcommand("sweep", "train across parameter grids");
  CLI::App* verify =
      app.add_subcommand("verify", "run the exact-arithmetic check battery on an MDP");
  for (CLI::App* sub : {gen, fit_reward, fit_transition, train, sweep, verify}) {
    sub->fallthrough();
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    emit_error("usage", e.what());
    return 2;
  }

  ExperimentConfig config;
  try {
    if (o_config->count()) config.apply_json(appo::load_json(config_path));
    if (o_mdp->count()) config.mdp_path = mdp;
    if (o_out->count()) config.out_dir = out;
    if (o_seed->count()) config.seed = seed;
    if (o_algo->count()) config.algo = algo;
    if (o_pref_count->count()) config.num_pref = num_pref;
    if (o_traj_count->count()) config.num_traj = num_traj;
    if (o_iters->count()) config.iterations = iterations;
    if (o_eta->count()) config.eta = parse_eta_flag(eta_text);
    if (o_lambda->count()) config.lambda = lambda;
    if (o_k1->count()) config.k1 = k1;
    if (o_k2->count()) config.k2 = k2;
    if (o_link->count()) config.link = link;
    if (o_split->count()) config.split_data = true;
    if (o_alpha->count()) config.alpha = alpha;
    if (o_corrupt->count()) config.corrupt_reward = corrupt;
    if (o_workers->count()) config.workers = workers;
    if (o_inner->count()) config.inner_iterations = inner;
    if (o_traj->count()) config.traj_data_path = traj_data;
    if (o_pref->count()) config.pref_data_path = pref_data;
    config.check();
  } catch (const std::exception& e) {
    emit_error("validation", e.what());
    return 2;
  }

  try {
    if (gen->parsed()) return run_gen(config);
    if (fit_reward->parsed()) return run_fit_reward(config);
    if (fit_transition->parsed()) return run_fit_transition(config);
    if (train->parsed()) return run_train(config);
    if (sweep->parsed()) return run_sweep(config);
    if (verify->parsed()) return run_verify(config);
  } catch (const std::invalid_argument& e) {
    emit_error("validation", e.what());
    return 2;
  } catch (const std::exception& e) {
    emit_error("error", e.what());
    return 2;
  }
  return 2;
}
