#include <doctest.h>

#include <stdexcept>

#include "appo/mdp.hpp"
#include "test_support.hpp"

using namespace appo;
using testing::make_chain_mdp;

TEST_CASE("chain values under uniform and greedy play") {
  const EpisodicMdp mdp = make_chain_mdp();
  const TabularPolicy uniform = TabularPolicy::uniform(mdp.dims());
  const TabularPolicy greedy = TabularPolicy::deterministic(mdp.dims(), {1, 1, 1, 1});

  CHECK(policy_evaluation(mdp, uniform).v(0, 0) == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(policy_evaluation(mdp, greedy).v(0, 0) == doctest::Approx(1.0).epsilon(1e-12));

  // One hand-checked action value: playing 0 now then following greedy.
  CHECK(policy_evaluation(mdp, greedy).q(0, 0, 0) == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("chain occupancy under the uniform policy") {
  const EpisodicMdp mdp = make_chain_mdp();
  const VisitationDistributions d = visitation(mdp, TabularPolicy::uniform(mdp.dims()));

  CHECK(d.state_at(0, 0) == doctest::Approx(1.0));
  CHECK(d.state_at(1, 1) == doctest::Approx(0.5));
  CHECK(d.at(1, 1, 1) == doctest::Approx(0.25));
  CHECK(d.at(0, 1, 0) == doctest::Approx(0.0));  // state 1 unreachable at the first step
}

TEST_CASE("chain trajectory enumeration and probabilities") {
  const EpisodicMdp mdp = make_chain_mdp();
  const auto trajectories = enumerate_trajectories(mdp);
  CHECK(trajectories.size() == 4);

  const TabularPolicy uniform = TabularPolicy::uniform(mdp.dims());
  double mass = 0.0;
  for (const Trajectory& tau : trajectories) {
    CHECK(trajectory_probability(mdp, uniform, tau) == doctest::Approx(0.25));
    mass += trajectory_probability(mdp, uniform, tau);
  }
  CHECK(mass == doctest::Approx(1.0));

  const Trajectory best{{{0, 1}, {1, 1}}};
  const TabularPolicy greedy = TabularPolicy::deterministic(mdp.dims(), {1, 1, 1, 1});
  CHECK(trajectory_probability(mdp, greedy, best) == doctest::Approx(1.0));
  CHECK(trajectory_return(mdp.true_reward(), best) == doctest::Approx(1.0));

  CHECK_THROWS_AS(enumerate_trajectories(mdp, 3), EnumerationInfeasibleError);
}

TEST_CASE("performance difference matches direct value gaps") {
  SplitMix64 rng(11);
  for (int rep = 0; rep < 5; ++rep) {
    const EpisodicMdp mdp = testing::random_mdp(3, 2, 3, rng);
    const TabularPolicy a = testing::random_policy(mdp.dims(), rng);
    const TabularPolicy b = testing::random_policy(mdp.dims(), rng);
    const RewardModel r = testing::random_reward(mdp.dims(), mdp.step_reward_bound(), rng);
    const double direct = policy_evaluation(mdp, a, r).v(0, mdp.initial_state()) -
                          policy_evaluation(mdp, b, r).v(0, mdp.initial_state());
    CHECK(performance_difference(mdp, a, b, r) == doctest::Approx(direct).epsilon(1e-12));
  }
}

TEST_CASE("construction rejects malformed inputs") {
  // Simplex row violated.
  CHECK_THROWS_AS(TabularPolicy({1, 1, 2}, {0.5, 0.6}), std::invalid_argument);
  // Negative probability.
  CHECK_THROWS_AS(TabularPolicy({1, 1, 2}, {1.2, -0.2}), std::invalid_argument);
  // Deterministic action out of range.
  CHECK_THROWS_AS(TabularPolicy::deterministic({1, 1, 2}, {5}), std::invalid_argument);

  const std::vector<double> ok_t = {1, 0, 0, 1, 1, 0, 0, 1, 1, 0, 0, 1, 1, 0, 0, 1};
  const std::vector<double> ok_r = {0, 0.5, 0, 0.5, 0, 0.5, 0, 0.5};
  std::vector<double> bad_t = ok_t;
  bad_t[0] = 0.9;  // row no longer sums to one
  CHECK_THROWS_AS(EpisodicMdp(2, 2, 2, 0, 1.0, bad_t, ok_r), std::invalid_argument);

  std::vector<double> bad_r = ok_r;
  bad_r[1] = 0.9;  // exceeds the per-step bound R/H = 0.5
  CHECK_THROWS_AS(EpisodicMdp(2, 2, 2, 0, 1.0, ok_t, bad_r), std::invalid_argument);

  CHECK_THROWS_AS(EpisodicMdp(2, 2, 2, 7, 1.0, ok_t, ok_r), std::invalid_argument);
  CHECK_THROWS_AS(EpisodicMdp(2, 2, 2, 0, -1.0, ok_t, ok_r), std::invalid_argument);
}

TEST_CASE("fingerprints distinguish models and policies") {
  const EpisodicMdp chain = make_chain_mdp();
  CHECK(mdp_fingerprint(chain) == mdp_fingerprint(make_chain_mdp()));

  SplitMix64 rng(3);
  const EpisodicMdp other = testing::random_mdp(2, 2, 2, rng);
  CHECK(mdp_fingerprint(chain) != mdp_fingerprint(other));

  const TabularPolicy uniform = TabularPolicy::uniform(chain.dims());
  const TabularPolicy greedy = TabularPolicy::deterministic(chain.dims(), {1, 1, 1, 1});
  CHECK(policy_fingerprint(uniform) != policy_fingerprint(greedy));
}

TEST_CASE("splittable rng streams are reproducible and distinct") {
  SplitMix64 a(42);
  SplitMix64 b(42);
  CHECK(a() == b());
  CHECK(a.split(1)() != a.split(2)());
  // Tagged splits do not advance the parent stream.
  SplitMix64 c(42);
  (void)c.split(9);
  SplitMix64 d(42);
  CHECK(c() == d());

  SplitMix64 e(7);
  double u = e.uniform01();
  CHECK(u >= 0.0);
  CHECK(u < 1.0);

  const std::vector<double> weights = {0.0, 0.25, 0.75};
  SplitMix64 f(13);
  for (int i = 0; i < 50; ++i) {
    const int k = f.categorical(weights);
    CHECK(k >= 1);
    CHECK(k <= 2);
  }
  const std::vector<double> zeros = {0.0, 0.0};
  CHECK_THROWS_AS(f.categorical(zeros), std::invalid_argument);
}
