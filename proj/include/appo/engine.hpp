#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "appo/datagen.hpp"
#include "appo/estimators.hpp"
#include "appo/mdp.hpp"

namespace appo {

/**
 * Deduplicated trajectory pairs with weights, plus the per-step state-action
 * frequencies of the flattened members. Dataset-driven losses are linear or
 * piecewise-linear in these statistics, so collapsing repeated pairs makes
 * their cost independent of the raw sample count.
 */
struct WeightedTrajectoryPairs {
  struct Entry {
    Trajectory tau0;
    Trajectory tau1;
    double weight = 0.0;
  };

  Dims dims;
  std::vector<Entry> entries;         // weights sum to one
  std::vector<double> step_marginals;  // H * S * A; each step layer sums to one

  static WeightedTrajectoryPairs from_dataset(const TrajectoryPairDataset& data, Dims dims);
};

/**
 * Reward induced by a value table under kernels P and a policy:
 * r_h = f_h - P_h (f_{h+1} o pi_{h+1}), with f beyond the last step zero.
 * Entries are deliberately not clipped to the per-step reward box; when f is
 * exactly the action-value table of pi under (P, r) the map returns r.
 */
RewardModel induced_reward(const ValueTable& f, const TransitionKernels& kernels,
                           const TabularPolicy& policy);
RewardModel induced_reward(const ValueTable& f, const TransitionModel& model,
                           const TabularPolicy& policy);
RewardModel induced_reward(const ValueTable& f, const EpisodicMdp& mdp,
                           const TabularPolicy& policy);

/// Mean absolute deviation, over trajectory pairs, between return differences
/// of the reward induced by f and those of r_hat.
double l1_deviation_loss(const ValueTable& f, const TransitionModel& p_hat,
                         const RewardModel& r_hat, const TabularPolicy& policy,
                         const WeightedTrajectoryPairs& data);
double l1_deviation_loss(const ValueTable& f, const TransitionModel& p_hat,
                         const RewardModel& r_hat, const TabularPolicy& policy,
                         const TrajectoryPairDataset& data);

/// Adversary objective: sum_h E_data[f_h o pi_h(s_h) - f_h(s_h, a_h)]
/// plus lambda times the deviation loss.
double inner_objective(const ValueTable& f, const TransitionModel& p_hat,
                       const RewardModel& r_hat, const TabularPolicy& policy,
                       const WeightedTrajectoryPairs& data, double lambda);
double inner_objective(const ValueTable& f, const TransitionModel& p_hat,
                       const RewardModel& r_hat, const TabularPolicy& policy,
                       const TrajectoryPairDataset& data, double lambda);

struct InnerSolveOptions {
  int iterations = 300;
  double lambda = 1.0;
  double value_bound = 1.0;   // box [0, value_bound] per entry; also the step scale
  double tolerance = 1e-10;   // early stop on the projected-subgradient norm
};

struct InnerSolveResult {
  ValueTable f;
  double objective = 0.0;
  bool converged = false;  // tolerance reached before the iteration budget
  int iterations_used = 0;
};

/**
 * Projected subgradient descent on the adversary objective over the box
 * [0, value_bound], step value_bound / sqrt(k), sign subgradient (zero at
 * kinks), best iterate kept. The returned table never scores worse than the
 * warm start, the all-zero table, or the action-value table of `policy`
 * under (p_hat, r_hat); all three are evaluated as candidates.
 */
InnerSolveResult optimize_f(const TabularPolicy& policy, const TransitionModel& p_hat,
                            const RewardModel& r_hat, const WeightedTrajectoryPairs& data,
                            const InnerSolveOptions& options, const ValueTable& warm_start);
InnerSolveResult optimize_f(const TabularPolicy& policy, const TransitionModel& p_hat,
                            const RewardModel& r_hat, const TrajectoryPairDataset& data,
                            const InnerSolveOptions& options, const ValueTable& warm_start);

/// Exponentiated-weights step pi'(a|h,s) proportional to pi(a|h,s) exp(eta f).
/// Computed in the log domain with per-row max subtraction, so it is stable
/// for large eta * f and invariant to per-(h, s) constant shifts of f.
TabularPolicy policy_update(const TabularPolicy& policy, const ValueTable& f, double eta);

struct AppoConfig {
  int iterations = 100;  // T
  std::optional<double> eta;  // empty: sqrt(2 log|A| / (R^2 T))
  double lambda = 1.0;
  int inner_iterations = 300;
  double inner_tolerance = 1e-10;
  bool split_data = false;  // losses use the second half of the pair data
  std::uint64_t seed = 0;

  double resolve_eta(int num_actions, double return_bound) const;

  /// Throws on hard violations (T < 1, eta <= 0, lambda < 0); returns
  /// warnings, including one when a concentrability report is supplied and
  /// lambda is not strictly above its trajectory coefficient.
  std::vector<std::string> validate(int num_actions, double return_bound,
                                    const ConcentrabilityReport* report = nullptr) const;
};

/// Uniform mixture over the policy iterates produced by a run.
struct MixturePolicy {
  std::vector<TabularPolicy> iterates;

  std::size_t size() const { return iterates.size(); }
};

/// Per-iteration training record. exact_value_true_reward is NaN when no
/// simulator was supplied for scoring. The solved value table is retained so
/// post-hoc diagnostics can replay the run.
struct RunRecord {
  int iteration = 0;
  double inner_objective = 0.0;
  double l1_deviation = 0.0;
  double exact_value_true_reward = 0.0;
  double entropy = 0.0;
  double seconds = 0.0;
  ValueTable f;
};

struct RunLog {
  std::vector<RunRecord> records;
  std::vector<std::string> warnings;

  /// Columns iter,inner_obj,l1_dev,exact_value_true_reward,entropy[,seconds].
  /// Timing is optional so artifact files can stay byte-stable across runs.
  void to_csv(std::ostream& out, bool include_timing = true) const;
};

struct AppoResult {
  MixturePolicy mixture;
  RunLog log;
};

/**
 * Offline adversarial policy optimization.
 *
 * Starts from the uniform policy; each iteration solves the adversary
 * objective for the current policy (warm-started from the previous solution;
 * the first warm start is the action-value table under (p_hat, r_hat)) and
 * applies the exponentiated-weights update. The returned mixture holds the
 * iterate used at each iteration; the final updated policy is not included.
 *
 * oracle_mdp, when given, is used only to score iterates for the log.
 * With split_data set, losses use the second half of `data`; the caller is
 * expected to have fit p_hat on the first half.
 */
AppoResult run_appo(const AppoConfig& config, const TrajectoryPairDataset& data,
                    const RewardModel& r_hat, const TransitionModel& p_hat, Dims dims,
                    double return_bound, const EpisodicMdp* oracle_mdp = nullptr);

/**
 * Rollout variant: each iteration collects k1 on-policy episodes from the
 * simulator, solves the adversary objective in reward space (minimizing the
 * on-policy/reference return gap plus lambda times the deviation from r_hat,
 * by the same projected subgradient scheme over [0, R/H]), estimates the
 * action values of that solution with the k2-rollout evaluation subroutine,
 * and applies the exponentiated-weights update.
 */
AppoResult run_appo_rollout(const AppoConfig& config, const EpisodicMdp& mdp,
                            const TabularPolicy& pi_ref, const TrajectoryPairDataset& data,
                            const RewardModel& r_hat, int k1, int k2);

/// Value of the episode-level uniform mixture: the mean of iterate values.
double mixture_value(const MixturePolicy& mixture, const EpisodicMdp& mdp,
                     const RewardModel& reward);

}  // namespace appo
