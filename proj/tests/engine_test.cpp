#include <doctest.h>

#include <cmath>
#include <sstream>

#include "appo/datagen.hpp"
#include "appo/engine.hpp"
#include "appo/oracle.hpp"
#include "test_support.hpp"

using namespace appo;
using testing::make_chain_mdp;

TEST_CASE("induced reward inverts policy evaluation and is not clipped") {
  SplitMix64 rng(21);
  const EpisodicMdp mdp = testing::random_mdp(3, 3, 3, rng);
  const TabularPolicy pi = testing::random_policy(mdp.dims(), rng);
  const ValueTable f = testing::random_values(mdp.dims(), mdp.return_bound(), rng);

  const RewardModel induced = induced_reward(f, mdp, pi);
  const PolicyEvaluation eval = policy_evaluation(mdp, pi, induced);
  for (int i = 0; i < mdp.dims().table_size(); ++i) {
    CHECK(eval.action_values.values()[i] == doctest::Approx(f.values()[i]).epsilon(1e-12));
  }

  // A table that rises across steps induces negative first-step rewards.
  const EpisodicMdp chain = make_chain_mdp();
  std::vector<double> rising = {0, 0, 0, 0, 1, 1, 1, 1};
  const RewardModel r =
      induced_reward(ValueTable(chain.dims(), rising), chain, TabularPolicy::uniform(chain.dims()));
  CHECK(r.at(0, 0, 0) < 0.0);
}

TEST_CASE("pair weights collapse duplicates and keep exact marginals") {
  const EpisodicMdp mdp = make_chain_mdp();
  const TabularPolicy uniform = TabularPolicy::uniform(mdp.dims());
  const TrajectoryPairDataset data = generate_traj_dataset(mdp, uniform, 400, 31);

  const WeightedTrajectoryPairs weighted = WeightedTrajectoryPairs::from_dataset(data, mdp.dims());
  CHECK(weighted.entries.size() <= 16);  // only 16 distinct ordered pairs exist

  double weight_sum = 0.0;
  for (const auto& entry : weighted.entries) weight_sum += entry.weight;
  CHECK(weight_sum == doctest::Approx(1.0).epsilon(1e-12));

  // Marginals must equal the plain frequency count over both pair members.
  std::vector<double> recount(mdp.dims().table_size(), 0.0);
  for (const auto& [tau0, tau1] : data.pairs) {
    for (int h = 0; h < mdp.horizon(); ++h) {
      recount[mdp.dims().index(h, tau0.steps[h].state, tau0.steps[h].action)] += 1.0;
      recount[mdp.dims().index(h, tau1.steps[h].state, tau1.steps[h].action)] += 1.0;
    }
  }
  for (int i = 0; i < mdp.dims().table_size(); ++i) {
    CHECK(weighted.step_marginals[i] ==
          doctest::Approx(recount[i] / (2.0 * data.size())).epsilon(1e-12));
  }
}

TEST_CASE("deviation loss agrees with the enumeration oracle on populations") {
  const EpisodicMdp mdp = make_chain_mdp();
  const TabularPolicy uniform = TabularPolicy::uniform(mdp.dims());
  SplitMix64 rng(4);
  const TabularPolicy pi = testing::random_policy(mdp.dims(), rng);
  const ValueTable f = testing::random_values(mdp.dims(), mdp.return_bound(), rng);
  const RewardModel r_hat = testing::random_reward(mdp.dims(), mdp.step_reward_bound(), rng);
  const TransitionModel p = TransitionModel::from_mdp(mdp);

  const WeightedTrajectoryPairs population = exact_pair_weights(mdp, uniform);
  CHECK(population.entries.size() == 16);
  CHECK(population.step_marginals[mdp.dims().index(1, 1, 1)] == doctest::Approx(0.25));

  const double via_engine = l1_deviation_loss(f, p, r_hat, pi, population);
  const double via_oracle = exact_l1_loss(mdp, uniform, f, p, pi, r_hat);
  CHECK(via_engine == doctest::Approx(via_oracle).epsilon(1e-12));
}

TEST_CASE("adversary objective: constants are invisible to the linear term") {
  const EpisodicMdp mdp = make_chain_mdp();
  const TabularPolicy uniform = TabularPolicy::uniform(mdp.dims());
  const TrajectoryPairDataset data = generate_traj_dataset(mdp, uniform, 100, 8);
  SplitMix64 rng(9);
  const TabularPolicy pi = testing::random_policy(mdp.dims(), rng);
  const TransitionModel p_hat = transition_mle(data, mdp.dims());
  const RewardModel r_hat = testing::random_reward(mdp.dims(), mdp.step_reward_bound(), rng);

  // With lambda = 0 the objective is linear in f, and for constant f the
  // on-policy and data occupancies cancel exactly.
  const ValueTable flat = ValueTable::constant(mdp.dims(), 0.7);
  CHECK(inner_objective(flat, p_hat, r_hat, pi, data, 0.0) ==
        doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("adversary solver contracts") {
  const EpisodicMdp mdp = make_chain_mdp();
  const TabularPolicy uniform = TabularPolicy::uniform(mdp.dims());
  const TrajectoryPairDataset data = generate_traj_dataset(mdp, uniform, 500, 12);
  const TransitionModel p_hat = transition_mle(data, mdp.dims());
  SplitMix64 rng(13);
  const RewardModel r_hat = testing::random_reward(mdp.dims(), mdp.step_reward_bound(), rng);
  const TabularPolicy pi = testing::random_policy(mdp.dims(), rng);
  const ValueTable warm = testing::random_values(mdp.dims(), mdp.return_bound(), rng);

  InnerSolveOptions options;
  options.value_bound = mdp.return_bound();

  const WeightedTrajectoryPairs weighted = WeightedTrajectoryPairs::from_dataset(data, mdp.dims());

  options.lambda = 5.0;
  const InnerSolveResult solve = optimize_f(pi, p_hat, r_hat, weighted, options, warm);
  CHECK(solve.objective <=
        inner_objective(warm, p_hat, r_hat, pi, weighted, options.lambda) + 1e-12);
  for (double v : solve.f.values()) {
    CHECK(v >= 0.0);
    CHECK(v <= mdp.return_bound());
  }
  CHECK(solve.objective ==
        doctest::Approx(inner_objective(solve.f, p_hat, r_hat, pi, weighted, options.lambda))
            .epsilon(1e-12));

  // The all-zero table is always a candidate, so at lambda = 0 the optimal
  // objective cannot be positive; and growing lambda cannot shrink a minimum
  // of a pointwise-growing objective.
  options.lambda = 0.0;
  const InnerSolveResult free_solve = optimize_f(pi, p_hat, r_hat, weighted, options, warm);
  CHECK(free_solve.objective <= 1e-12);
  CHECK(solve.objective >= free_solve.objective - 1e-9);
}

TEST_CASE("exponentiated-weights update") {
  const Dims dims{1, 2, 1};  // one state, two actions, one step
  const TabularPolicy uniform = TabularPolicy::uniform(dims);

  SUBCASE("hand-checked two-action step") {
    const ValueTable f(dims, {1.0, 0.0});
    const TabularPolicy next = policy_update(uniform, f, std::log(2.0));
    CHECK(next.prob(0, 0, 0) == doctest::Approx(2.0 / 3).epsilon(1e-14));
    CHECK(next.prob(0, 0, 1) == doctest::Approx(1.0 / 3).epsilon(1e-14));
  }

  SUBCASE("per-row constant shifts do not change the update") {
    const ValueTable f(dims, {0.8, 0.1});
    const ValueTable shifted(dims, {0.8 + 7.0, 0.1 + 7.0});
    const TabularPolicy a = policy_update(uniform, f, 0.3);
    const TabularPolicy b = policy_update(uniform, shifted, 0.3);
    CHECK(a.prob(0, 0, 0) == doctest::Approx(b.prob(0, 0, 0)).epsilon(1e-14));
  }

  SUBCASE("zero step returns the policy unchanged; huge logits stay finite") {
    const ValueTable f(dims, {1000.0, 0.0});
    const TabularPolicy same = policy_update(uniform, f, 0.0);
    CHECK(same.prob(0, 0, 0) == 0.5);
    const TabularPolicy spiked = policy_update(uniform, f, 1.0);
    CHECK(spiked.prob(0, 0, 0) == doctest::Approx(1.0));
    CHECK(std::isfinite(spiked.prob(0, 0, 1)));
    CHECK_THROWS_AS(policy_update(uniform, f, -0.1), std::invalid_argument);
  }
}

TEST_CASE("optimizer configuration") {
  AppoConfig config;
  config.iterations = 100;
  CHECK(config.resolve_eta(2, 1.0) == doctest::Approx(0.11774100225154747).epsilon(1e-13));
  config.eta = 0.25;
  CHECK(config.resolve_eta(2, 1.0) == 0.25);

  AppoConfig bad = config;
  bad.iterations = 0;
  CHECK_THROWS_AS(bad.validate(2, 1.0), std::invalid_argument);
  bad = config;
  bad.eta = -1.0;
  CHECK_THROWS_AS(bad.validate(2, 1.0), std::invalid_argument);
  bad = config;
  bad.lambda = -0.5;
  CHECK_THROWS_AS(bad.validate(2, 1.0), std::invalid_argument);

  ConcentrabilityReport shift;
  shift.c_traj = 4.0;
  config.lambda = 3.0;
  CHECK_FALSE(config.validate(2, 1.0, &shift).empty());
  config.lambda = 5.0;
  CHECK(config.validate(2, 1.0, &shift).empty());
}

TEST_CASE("offline optimizer runs are deterministic and improve on uniform") {
  const EpisodicMdp mdp = make_chain_mdp();
  const TabularPolicy uniform = TabularPolicy::uniform(mdp.dims());
  const LinkFunction link = LinkFunction::sigmoid(mdp.return_bound());
  const TrajectoryPairDataset traj = generate_traj_dataset(mdp, uniform, 2000, 100);
  const PreferenceDataset pref = generate_pref_dataset(mdp, uniform, 2000, link, 101);
  const auto [r_hat, fit] = reward_mle(pref, link, mdp.dims(), mdp.step_reward_bound());
  (void)fit;
  const TransitionModel p_hat = transition_mle(traj, mdp.dims());

  AppoConfig config;
  config.iterations = 50;
  config.lambda = 5.0;

  const AppoResult run =
      run_appo(config, traj, r_hat, p_hat, mdp.dims(), mdp.return_bound(), &mdp);
  REQUIRE(run.log.records.size() == 50);
  REQUIRE(run.mixture.size() == 50);

  // First iterate is the uniform start; the log scores it exactly.
  CHECK(run.log.records.front().exact_value_true_reward == doctest::Approx(0.5));
  CHECK(suboptimality(mdp, run.mixture) < 0.25);
  for (const RunRecord& rec : run.log.records) CHECK(rec.l1_deviation >= 0.0);

  // Bitwise repeatability of the whole trace.
  const AppoResult again =
      run_appo(config, traj, r_hat, p_hat, mdp.dims(), mdp.return_bound(), &mdp);
  std::ostringstream a, b;
  run.log.to_csv(a, /*include_timing=*/false);
  again.log.to_csv(b, /*include_timing=*/false);
  CHECK(a.str() == b.str());
  CHECK(a.str().rfind("iter,inner_obj,l1_dev,exact_value_true_reward,entropy\n", 0) == 0);
}

TEST_CASE("rollout optimizer learns the chain from simulator access") {
  const EpisodicMdp mdp = make_chain_mdp();
  const TabularPolicy uniform = TabularPolicy::uniform(mdp.dims());
  const LinkFunction link = LinkFunction::sigmoid(mdp.return_bound());
  const TrajectoryPairDataset traj = generate_traj_dataset(mdp, uniform, 1000, 200);
  const PreferenceDataset pref = generate_pref_dataset(mdp, uniform, 1000, link, 201);
  const auto [r_hat, fit] = reward_mle(pref, link, mdp.dims(), mdp.step_reward_bound());
  (void)fit;

  AppoConfig config;
  config.iterations = 40;
  config.lambda = 1.0;
  config.seed = 7;

  const AppoResult run = run_appo_rollout(config, mdp, uniform, traj, r_hat, 64, 64);
  REQUIRE(run.mixture.size() == 40);
  CHECK(suboptimality(mdp, run.mixture) < 0.3);

  const AppoResult again = run_appo_rollout(config, mdp, uniform, traj, r_hat, 64, 64);
  CHECK(run.log.records.back().exact_value_true_reward ==
        again.log.records.back().exact_value_true_reward);
  CHECK(run.log.records.back().inner_objective == again.log.records.back().inner_objective);
}

TEST_CASE("mixture value is the mean of iterate values") {
  const EpisodicMdp mdp = make_chain_mdp();
  MixturePolicy mixture;
  mixture.iterates.push_back(TabularPolicy::uniform(mdp.dims()));
  mixture.iterates.push_back(TabularPolicy::deterministic(mdp.dims(), {1, 1, 1, 1}));
  CHECK(mixture_value(mixture, mdp, mdp.true_reward()) == doctest::Approx(0.75));
  CHECK_THROWS_AS(mixture_value(MixturePolicy{}, mdp, mdp.true_reward()),
                  std::invalid_argument);
}
