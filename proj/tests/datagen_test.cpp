#include <doctest.h>

#include <cmath>
#include <map>

#include "appo/datagen.hpp"
#include "test_support.hpp"

using namespace appo;
using testing::make_chain_mdp;

TEST_CASE("sigmoid link values and flatness constant") {
  const LinkFunction link = LinkFunction::sigmoid(1.0);
  CHECK(link(1.0) == doctest::Approx(0.7310585786300049).epsilon(1e-14));
  CHECK(link(0.0) == doctest::Approx(0.5).epsilon(1e-14));
  CHECK(link(0.3) + link(-0.3) == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(link.kappa() == doctest::Approx(5.086161269630487).epsilon(1e-12));
  CHECK(link.return_bound() == 1.0);
  CHECK(link.kind() == LinkFunction::Kind::sigmoid);
}

TEST_CASE("custom links are screened on a grid") {
  // A linear ramp is a valid link on [-1, 1]; its worst slope is 1/2.
  const LinkFunction ramp = LinkFunction::custom_monotone(
      [](double x) { return 0.5 + 0.5 * x; }, [](double) { return 0.5; }, 1.0);
  CHECK(ramp.kappa() == doctest::Approx(2.0).epsilon(1e-12));

  // Shifted sigmoid breaks the symmetry identity.
  CHECK_THROWS_AS(LinkFunction::custom_monotone(
                      [](double x) { return 1.0 / (1.0 + std::exp(-(x + 0.1))); },
                      [](double x) {
                        const double p = 1.0 / (1.0 + std::exp(-(x + 0.1)));
                        return p * (1.0 - p);
                      },
                      1.0),
                  std::invalid_argument);

  // Decreasing map.
  CHECK_THROWS_AS(LinkFunction::custom_monotone([](double x) { return 0.5 - 0.5 * x; },
                                                [](double) { return -0.5; }, 1.0),
                  std::invalid_argument);

  // Leaves [0, 1].
  CHECK_THROWS_AS(LinkFunction::custom_monotone([](double x) { return 0.5 + x; },
                                                [](double) { return 1.0; }, 1.0),
                  std::invalid_argument);
}

TEST_CASE("rollouts follow deterministic dynamics") {
  const EpisodicMdp mdp = make_chain_mdp();
  const TabularPolicy greedy = TabularPolicy::deterministic(mdp.dims(), {1, 1, 1, 1});
  SplitMix64 rng(5);
  const Trajectory tau = rollout(mdp, greedy, rng);
  const Trajectory expected{{{0, 1}, {1, 1}}};
  CHECK(tau == expected);
}

TEST_CASE("dataset generation is a pure function of its seed") {
  const EpisodicMdp mdp = make_chain_mdp();
  const TabularPolicy uniform = TabularPolicy::uniform(mdp.dims());

  const TrajectoryPairDataset a = generate_traj_dataset(mdp, uniform, 64, 9);
  const TrajectoryPairDataset b = generate_traj_dataset(mdp, uniform, 64, 9);
  const TrajectoryPairDataset c = generate_traj_dataset(mdp, uniform, 64, 10);
  REQUIRE(a.size() == 64);
  CHECK(a.pairs == b.pairs);
  CHECK(a.pairs != c.pairs);

  CHECK(a.provenance.policy_id == policy_fingerprint(uniform));
  CHECK(a.provenance.mdp_hash == mdp_fingerprint(mdp));
  CHECK(a.provenance.seed == 9);

  const auto [first, second] = a.split_halves();
  CHECK(first.size() == 32);
  CHECK(second.size() == 32);
  CHECK(first.pairs[0] == a.pairs[0]);
  CHECK(second.pairs[0] == a.pairs[32]);
  CHECK(first.provenance.policy_id == a.provenance.policy_id);

  TrajectoryPairDataset tiny;
  tiny.pairs.resize(1);
  CHECK_THROWS_AS(tiny.split_halves(), std::invalid_argument);
}

TEST_CASE("preference labels follow the link probabilities") {
  const EpisodicMdp mdp = make_chain_mdp();
  const TabularPolicy uniform = TabularPolicy::uniform(mdp.dims());
  const LinkFunction link = LinkFunction::sigmoid(1.0);
  const int m = 100000;
  const PreferenceDataset data = generate_pref_dataset(mdp, uniform, m, link, 1234);
  REQUIRE(data.size() == static_cast<std::size_t>(m));

  // Group by the 16 possible ordered trajectory pairs (actions identify a
  // chain trajectory) and compare label rates against Phi(return gap) with a
  // chi-square statistic: 16 conditional binomials, so 16 degrees of freedom.
  const RewardModel r_star = mdp.true_reward();
  std::map<int, std::pair<int, int>> cells;  // key -> {count, label-1 count}
  std::map<int, double> gap;
  for (const PreferenceSample& sample : data.samples) {
    const int key = ((sample.tau0.steps[0].action * 2 + sample.tau0.steps[1].action) * 2 +
                     sample.tau1.steps[0].action) *
                        2 +
                    sample.tau1.steps[1].action;
    auto& [count, ones] = cells[key];
    ++count;
    ones += sample.label;
    gap[key] = trajectory_return(r_star, sample.tau1) - trajectory_return(r_star, sample.tau0);
  }
  REQUIRE(cells.size() == 16);
  double statistic = 0.0;
  for (const auto& [key, cell] : cells) {
    const auto& [count, ones] = cell;
    const double p = link(gap[key]);
    const double expected = count * p;
    statistic += (ones - expected) * (ones - expected) / (count * p * (1.0 - p));
  }
  CHECK(statistic < 39.252354790768464);  // chi-square df=16 at the 0.1% level
}

TEST_CASE("distribution-shift coefficients on the chain") {
  const EpisodicMdp mdp = make_chain_mdp();
  const TabularPolicy uniform = TabularPolicy::uniform(mdp.dims());
  const TabularPolicy greedy = TabularPolicy::deterministic(mdp.dims(), {1, 1, 1, 1});

  const ConcentrabilityReport shift = concentrability(mdp, uniform, greedy);
  CHECK(shift.c_traj == doctest::Approx(4.0).epsilon(1e-12));
  CHECK(shift.c_step == doctest::Approx(4.0).epsilon(1e-12));
  CHECK_FALSE(shift.support_violation);
  const Trajectory best{{{0, 1}, {1, 1}}};
  CHECK(shift.witness_trajectory == best);
  CHECK(shift.witness_step.h == 1);
  CHECK(shift.witness_step.state == 1);
  CHECK(shift.witness_step.action == 1);

  const ConcentrabilityReport self = concentrability(mdp, greedy, greedy);
  CHECK(self.c_traj == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(self.c_step == doctest::Approx(1.0).epsilon(1e-12));

  // A reference that never plays action 1 cannot cover the greedy policy.
  const TabularPolicy stay = TabularPolicy::deterministic(mdp.dims(), {0, 0, 0, 0});
  const ConcentrabilityReport broken = concentrability(mdp, stay, greedy);
  CHECK(broken.support_violation);
  CHECK(std::isinf(broken.c_traj));
}
