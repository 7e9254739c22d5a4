// Acceptance gate: nine end-to-end criteria, one pass/fail line each.
// Exits nonzero if any criterion fails. Budgets, where stated, are part of
// the pass condition.

#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <functional>
#include <string>
#include <vector>

#include "appo/datagen.hpp"
#include "appo/engine.hpp"
#include "appo/estimators.hpp"
#include "appo/mdp.hpp"
#include "appo/oracle.hpp"
#include "appo/rng.hpp"
#include "test_support.hpp"

namespace {

using namespace appo;
using appo::testing::make_chain_mdp;
using appo::testing::random_mdp;
using appo::testing::random_policy;
using appo::testing::random_reward;
using appo::testing::random_values;

std::string fmt(const char* pattern, ...) {
  char buffer[512];
  va_list args;
  va_start(args, pattern);
  std::vsnprintf(buffer, sizeof(buffer), pattern, args);
  va_end(args);
  return buffer;
}

struct SeedPlan {
  std::uint64_t traj;
  std::uint64_t pref;
};

SeedPlan data_seeds(std::uint64_t seed) {
  SplitMix64 root(seed);
  return {root.split(1)(), root.split(2)()};
}

struct FittedModels {
  RewardModel reward;
  TransitionModel transitions;
  TrajectoryPairDataset traj_data;
};

FittedModels fit_chain_models(const EpisodicMdp& mdp, int num_traj, int num_pref,
                              std::uint64_t seed) {
  const TabularPolicy pi_ref = TabularPolicy::uniform(mdp.dims());
  const LinkFunction link = LinkFunction::sigmoid(mdp.return_bound());
  const SeedPlan seeds = data_seeds(seed);
  TrajectoryPairDataset traj = generate_traj_dataset(mdp, pi_ref, num_traj, seeds.traj);
  PreferenceDataset pref = generate_pref_dataset(mdp, pi_ref, num_pref, link, seeds.pref);
  auto [reward, report] = reward_mle(pref, link, mdp.dims(), mdp.step_reward_bound());
  (void)report;
  TransitionModel transitions = transition_mle(traj, mdp.dims());
  return {std::move(reward), std::move(transitions), std::move(traj)};
}

// A1: value tables survive the induced-reward round trip exactly.
bool a1_round_trip(std::string& detail) {
  SplitMix64 rng(411);
  double worst = 0.0;
  for (int m = 0; m < 20; ++m) {
    const EpisodicMdp mdp =
        random_mdp(2 + m % 3, 2 + m % 2, 2 + (m / 2) % 3, rng);
    for (int trial = 0; trial < 5; ++trial) {
      const ValueTable f = random_values(mdp.dims(), mdp.return_bound(), rng);
      const TabularPolicy pi = random_policy(mdp.dims(), rng);
      const RewardModel induced = induced_reward(f, mdp, pi);
      const PolicyEvaluation eval = policy_evaluation(mdp, pi, induced);
      const Dims dims = mdp.dims();
      for (int h = 0; h < dims.horizon; ++h)
        for (int s = 0; s < dims.num_states; ++s)
          for (int a = 0; a < dims.num_actions; ++a)
            worst = std::max(worst, std::abs(eval.q(h, s, a) - f.at(h, s, a)));
    }
  }
  detail = fmt("max round-trip residual %.3g over 100 pairs (tol 1e-10)", worst);
  return worst <= 1e-10;
}

// A2: mirror-descent regret of every run stays under R*H*sqrt(log|A|/(2T)).
// Note: the telescoping-plus-oscillation analysis of this update proves twice
// that constant (log|A|/eta + eta*R^2*T/2 at the auto step size), and even a
// noise-free run of the idealized update exceeds the tighter target at large
// T. The stated target is asserted as-is; the proven constant is reported
// alongside for diagnosis.
bool a2_regret_bound(std::string& detail) {
  const EpisodicMdp mdp = make_chain_mdp();
  const auto [pi_star, v_star] = optimal_policy(mdp);
  (void)v_star;
  double worst_excess = -1.0;
  double worst_proven_excess = -1.0;
  for (int t_budget : {10, 100, 500}) {
    const double bound = mdp.return_bound() * mdp.horizon() *
                         std::sqrt(std::log(mdp.num_actions()) / (2.0 * t_budget));
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
      const FittedModels fit = fit_chain_models(mdp, 500, 500, seed);
      AppoConfig config;
      config.iterations = t_budget;
      config.lambda = 5.0;
      config.seed = seed;
      const AppoResult result = run_appo(config, fit.traj_data, fit.reward, fit.transitions,
                                         mdp.dims(), mdp.return_bound());
      std::vector<ValueTable> fs;
      fs.reserve(result.log.records.size());
      for (const RunRecord& record : result.log.records) fs.push_back(record.f);
      const double regret = average_npg_regret(mdp, pi_star, result.mixture, fs);
      worst_excess = std::max(worst_excess, regret - bound);
      worst_proven_excess = std::max(worst_proven_excess, regret - 2.0 * bound);
    }
  }
  detail = fmt("worst regret minus stated bound %.3g over 15 runs (tol 1e-9); "
               "minus proven 2x constant %.3g",
               worst_excess, worst_proven_excess);
  return worst_excess <= 1e-9;
}

// A3: full pipeline reaches near-optimal play on the chain for every seed.
bool a3_end_to_end(std::string& detail) {
  const EpisodicMdp mdp = make_chain_mdp();
  double worst = 0.0;
  int passed = 0;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const FittedModels fit = fit_chain_models(mdp, 10000, 10000, seed);
    AppoConfig config;
    config.iterations = 200;
    config.lambda = 5.0;
    config.seed = seed;
    const AppoResult result = run_appo(config, fit.traj_data, fit.reward, fit.transitions,
                                       mdp.dims(), mdp.return_bound());
    const double gap = suboptimality(mdp, result.mixture);
    worst = std::max(worst, gap);
    passed += gap <= 0.1 ? 1 : 0;
  }
  detail = fmt("suboptimality <= 0.1 on %d/5 seeds, worst %.4f", passed, worst);
  return passed == 5;
}

// A4: with an optimistically corrupted reward, the deviation penalty halves
// the damage: mean suboptimality at lambda=0 is at least twice lambda=5's.
bool a4_conservatism(std::string& detail) {
  const EpisodicMdp mdp = make_chain_mdp();
  double mean_plain = 0.0;
  double mean_penalized = 0.0;
  for (std::uint64_t seed = 100; seed < 105; ++seed) {
    const FittedModels fit = fit_chain_models(mdp, 10000, 10000, seed);
    const RewardModel corrupted =
        corrupt_reward_optimistic(fit.reward, fit.transitions, mdp.step_reward_bound());
    for (double lambda : {0.0, 5.0}) {
      AppoConfig config;
      config.iterations = 200;
      config.lambda = lambda;
      config.seed = seed;
      const AppoResult result = run_appo(config, fit.traj_data, corrupted, fit.transitions,
                                         mdp.dims(), mdp.return_bound());
      const double gap = suboptimality(mdp, result.mixture);
      (lambda == 0.0 ? mean_plain : mean_penalized) += gap / 5.0;
    }
  }
  detail = fmt("mean suboptimality lambda=0: %.4f, lambda=5: %.4f (need >= 2x)", mean_plain,
               mean_penalized);
  return mean_plain >= 2.0 * mean_penalized;
}

// A5: the three decomposition terms add up to the true suboptimality.
bool a5_decomposition(std::string& detail) {
  SplitMix64 rng(555);
  double worst = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const EpisodicMdp mdp =
        random_mdp(2 + trial % 3, 2 + trial % 2, 2 + trial % 3, rng);
    const TabularPolicy pi_ref = random_policy(mdp.dims(), rng);
    const TabularPolicy pi_t = random_policy(mdp.dims(), rng);
    const RewardModel r_hat = random_reward(mdp.dims(), mdp.step_reward_bound(), rng);
    const ValueTable f_t = random_values(mdp.dims(), mdp.return_bound(), rng);
    const DecompositionTerms terms = decomposition_witness(mdp, pi_ref, r_hat, f_t, pi_t);
    const double sum = terms.reward_error_term + terms.pessimism_term + terms.regret_term;
    worst = std::max(worst, std::abs(sum - terms.total));
    worst = std::max(worst, std::abs(terms.total - suboptimality(mdp, pi_t)));
  }
  detail = fmt("max identity residual %.3g over 100 witnesses (tol 1e-9)", worst);
  return worst <= 1e-9;
}

// A6: the fitted reward reproduces every trajectory-return difference, and
// the sampled deviation loss agrees with its exact enumeration counterpart.
bool a6_mle_consistency(std::string& detail) {
  const EpisodicMdp mdp = make_chain_mdp();
  const TabularPolicy pi_ref = TabularPolicy::uniform(mdp.dims());
  const LinkFunction link = LinkFunction::sigmoid(mdp.return_bound());
  const PreferenceDataset pref = generate_pref_dataset(mdp, pi_ref, 50000, link, 661);
  const auto [fitted, report] = reward_mle(pref, link, mdp.dims(), mdp.step_reward_bound());
  (void)report;

  const RewardModel truth = mdp.true_reward();
  const std::vector<Trajectory> support = enumerate_trajectories(mdp);
  double worst_gap = 0.0;
  for (const Trajectory& tau0 : support) {
    for (const Trajectory& tau1 : support) {
      const double fitted_diff =
          trajectory_return(fitted, tau1) - trajectory_return(fitted, tau0);
      const double true_diff = trajectory_return(truth, tau1) - trajectory_return(truth, tau0);
      worst_gap = std::max(worst_gap, std::abs(fitted_diff - true_diff));
    }
  }

  SplitMix64 rng(662);
  const ValueTable f = random_values(mdp.dims(), mdp.return_bound(), rng);
  const TransitionModel p_true = TransitionModel::from_mdp(mdp);
  const TrajectoryPairDataset sample = generate_traj_dataset(mdp, pi_ref, 10000, 663);
  const double empirical = l1_deviation_loss(f, p_true, truth, pi_ref, sample);
  const double exact = exact_l1_loss(mdp, pi_ref, induced_reward(f, mdp, pi_ref), truth);
  const double loss_gap = std::abs(empirical - exact);

  detail = fmt("max return-diff error %.4f (tol 0.05); loss gap %.4f (tol 0.02)", worst_gap,
               loss_gap);
  return worst_gap <= 0.05 && loss_gap <= 0.02;
}

// A7: the per-step shift coefficient never exceeds the trajectory one.
bool a7_concentrability(std::string& detail) {
  SplitMix64 rng(777);
  double worst_excess = -1.0;
  for (int trial = 0; trial < 100; ++trial) {
    const EpisodicMdp mdp =
        random_mdp(2 + trial % 2, 2 + trial % 2, 2 + trial % 2, rng);
    const TabularPolicy pi_ref = random_policy(mdp.dims(), rng);
    const TabularPolicy pi = random_policy(mdp.dims(), rng);
    const ConcentrabilityReport report = concentrability(mdp, pi_ref, pi);
    if (std::isinf(report.c_traj)) continue;  // trivially satisfied
    worst_excess = std::max(worst_excess, report.c_step - report.c_traj);
  }
  detail = fmt("max C_step - C_tr = %.3g over 100 triples (tol 1e-12)", worst_excess);
  return worst_excess <= 1e-12;
}

// A8: rollout action-value estimates hit the exact values on visited cells
// and improve with the rollout budget.
bool a8_policy_evaluation(std::string& detail) {
  const EpisodicMdp mdp = make_chain_mdp();
  const Dims dims = mdp.dims();
  const TabularPolicy pi_ref = TabularPolicy::uniform(dims);
  const TabularPolicy pi_t(dims, {0.3, 0.7, 0.3, 0.7, 0.3, 0.7, 0.3, 0.7});
  const RewardModel truth = mdp.true_reward();
  const PolicyEvaluation exact = policy_evaluation(mdp, pi_t);

  const auto max_visited_error = [&](int rollouts, std::uint64_t seed) {
    SplitMix64 rng(seed);
    const ValueTable estimate = pe_subroutine(mdp, pi_ref, pi_t, truth, rollouts, rng);
    double worst = 0.0;
    for (int h = 0; h < dims.horizon; ++h) {
      for (int s = 0; s < dims.num_states; ++s) {
        if (h == 0 && s != mdp.initial_state()) continue;  // unreachable at the first step
        for (int a = 0; a < dims.num_actions; ++a)
          worst = std::max(worst, std::abs(estimate.at(h, s, a) - exact.q(h, s, a)));
      }
    }
    return worst;
  };

  const double headline = max_visited_error(10000, 88);
  double mean_small = 0.0;
  double mean_large = 0.0;
  for (std::uint64_t seed = 880; seed < 885; ++seed) {
    mean_small += max_visited_error(100, seed) / 5.0;
    mean_large += max_visited_error(10000, seed) / 5.0;
  }
  detail = fmt("K=1e4 max error %.4f (tol 0.05); seed-mean error %.4f @K=1e2 -> %.4f @K=1e4",
               headline, mean_small, mean_large);
  return headline <= 0.05 && mean_large < mean_small;
}

// A9: the auto step size matches its closed form, and weak penalties are
// flagged against the measured shift coefficient.
bool a9_parameter_plumbing(std::string& detail) {
  double worst = 0.0;
  const struct {
    int actions;
    double bound;
    int iterations;
  } combos[] = {{2, 1.0, 100}, {3, 2.0, 10}, {4, 0.5, 500}, {2, 1.0, 1}, {5, 3.0, 250}};
  for (const auto& combo : combos) {
    AppoConfig config;
    config.iterations = combo.iterations;
    const double expected =
        std::sqrt(2.0 * std::log(combo.actions) /
                  (combo.bound * combo.bound * combo.iterations));
    worst = std::max(
        worst, std::abs(config.resolve_eta(combo.actions, combo.bound) - expected));
  }

  ConcentrabilityReport shift;
  shift.c_traj = 4.0;
  shift.c_step = 4.0;
  AppoConfig weak;
  weak.lambda = 4.0;  // equal to C_tr: not strictly above, must warn
  const bool warned = !weak.validate(2, 1.0, &shift).empty();
  AppoConfig strong;
  strong.lambda = 5.0;
  const bool clean = strong.validate(2, 1.0, &shift).empty();

  detail = fmt("max eta residual %.3g (tol 1e-12); warning at lambda<=C_tr: %s, none above: %s",
               worst, warned ? "yes" : "no", clean ? "yes" : "no");
  return worst <= 1e-12 && warned && clean;
}

struct Criterion {
  const char* id;
  const char* name;
  bool (*body)(std::string&);
  double budget_seconds;  // 0 means no stated budget
};

}  // namespace

int main() {
  const Criterion criteria[] = {
      {"A1", "induced-reward round trip", a1_round_trip, 5.0},
      {"A2", "mirror-descent regret bound", a2_regret_bound, 30.0},
      {"A3", "end-to-end chain learning", a3_end_to_end, 60.0},
      {"A4", "deviation penalty vs corrupted reward", a4_conservatism, 0.0},
      {"A5", "suboptimality decomposition identity", a5_decomposition, 0.0},
      {"A6", "reward MLE consistency", a6_mle_consistency, 0.0},
      {"A7", "step vs trajectory concentrability", a7_concentrability, 0.0},
      {"A8", "rollout evaluation accuracy", a8_policy_evaluation, 0.0},
      {"A9", "step-size formula and penalty warning", a9_parameter_plumbing, 0.0},
  };

  int failures = 0;
  for (const Criterion& criterion : criteria) {
    std::string detail;
    bool ok = false;
    const auto start = std::chrono::steady_clock::now();
    try {
      ok = criterion.body(detail);
    } catch (const std::exception& error) {
      ok = false;
      detail = fmt("exception: %s", error.what());
    }
    const double seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::string timing = fmt("%.2fs", seconds);
    if (criterion.budget_seconds > 0.0) {
      timing += fmt(", budget %.0fs", criterion.budget_seconds);
      if (seconds >= criterion.budget_seconds) ok = false;
    }
    std::printf("[%s] %s %s: %s [%s]\n", ok ? "PASS" : "FAIL", criterion.id, criterion.name,
                detail.c_str(), timing.c_str());
    std::fflush(stdout);
    failures += ok ? 0 : 1;
  }

  if (failures == 0) {
    std::printf("acceptance: all 9 criteria passed\n");
  } else {
    std::printf("acceptance: %d criteria FAILED\n", failures);
  }
  return failures == 0 ? 0 : 1;
}
