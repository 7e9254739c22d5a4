#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "appo/datagen.hpp"
#include "appo/engine.hpp"
#include "appo/mdp.hpp"

namespace appo {

/// Optimal deterministic policy by backward induction over the true reward;
/// ties break toward the lowest action index. Second element is V* at the
/// initial state.
std::pair<TabularPolicy, double> optimal_policy(const EpisodicMdp& mdp);

/// Entrywise difference a - b; handy for evaluating values of reward gaps.
RewardModel reward_difference(const RewardModel& a, const RewardModel& b);

/**
 * Exact population deviation loss: the expectation, over two independent
 * reference-policy trajectories, of the absolute difference between the
 * candidate's return gap and r_hat's return gap. Computed by enumerating the
 * reference support and sorting, so the cost is near-linear in support size.
 */
double exact_l1_loss(const EpisodicMdp& mdp, const TabularPolicy& pi_ref,
                     const RewardModel& candidate, const RewardModel& r_hat,
                     std::uint64_t enumeration_cap = 1'000'000);
/// Same with the candidate given as a value table inducing its reward
/// through (P, policy).
double exact_l1_loss(const EpisodicMdp& mdp, const TabularPolicy& pi_ref, const ValueTable& f,
                     const TransitionModel& p, const TabularPolicy& policy,
                     const RewardModel& r_hat, std::uint64_t enumeration_cap = 1'000'000);

/// Population counterpart of a sampled pair dataset: every reference-support
/// trajectory pair with its exact probability, and exact step marginals.
/// Lets the data-driven objectives be evaluated without sampling noise.
WeightedTrajectoryPairs exact_pair_weights(const EpisodicMdp& mdp, const TabularPolicy& pi_ref,
                                           std::uint64_t enumeration_cap = 1'000'000);

/// V* minus the policy's (or mixture's) value under the true reward.
double suboptimality(const EpisodicMdp& mdp, const TabularPolicy& policy);
double suboptimality(const EpisodicMdp& mdp, const MixturePolicy& mixture);

/**
 * The three-way split of the suboptimality of pi_t under the true reward,
 * with r_t induced from f_t under the true kernels:
 *   reward_error_term: value gap of (r* - r_hat) between pi* and pi_ref;
 *   pessimism_term:    value gap of (r_hat - r_t) between pi* and pi_ref,
 *                      plus the pi_t/pi_ref gap swap between r* and r_t;
 *   regret_term:       value gap of r_t between pi* and pi_t.
 * The three terms sum to V*(r*) - V^{pi_t}(r*) identically.
 */
struct DecompositionTerms {
  double reward_error_term = 0.0;
  double pessimism_term = 0.0;
  double regret_term = 0.0;
  double total = 0.0;
};

DecompositionTerms decomposition_witness(const EpisodicMdp& mdp, const TabularPolicy& pi_ref,
                                         const RewardModel& r_hat, const ValueTable& f_t,
                                         const TabularPolicy& pi_t);

/// Mean over iterations of V^{comparator} - V^{pi_t}, each under the reward
/// induced by that iteration's value table and policy through the true
/// kernels. The mirror-descent analysis bounds this by
/// R * H * sqrt(log|A| / (2T)) for any value-table sequence inside [0, R].
double average_npg_regret(const EpisodicMdp& mdp, const TabularPolicy& comparator,
                          const MixturePolicy& iterates, const std::vector<ValueTable>& fs);

struct OracleCheck {
  std::string name;
  bool pass = false;
  double residual = 0.0;
  double tolerance = 0.0;
};

struct OracleReport {
  double v_star = 0.0;
  std::vector<double> optimal_actions;  // argmax per (h, s), as doubles for serialization
  std::vector<OracleCheck> checks;

  bool all_passed() const;
};

/// Full invariant battery for one MDP: round-trip, enumeration, occupancy,
/// decomposition, regret-bound, and concentrability checks, seeded randomness.
OracleReport run_verification_suite(const EpisodicMdp& mdp, std::uint64_t seed);

}  // namespace appo
