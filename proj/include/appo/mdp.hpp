#pragma once

#include <compare>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace appo {

/// Table dimensions shared by every per-step quantity.
struct Dims {
  int num_states = 0;
  int num_actions = 0;
  int horizon = 0;

  bool operator==(const Dims&) const = default;

  int table_size() const { return horizon * num_states * num_actions; }
  int index(int h, int s, int a) const { return (h * num_states + s) * num_actions + a; }
};

struct StateAction {
  int state = 0;
  int action = 0;

  auto operator<=>(const StateAction&) const = default;
};

/// One episode: the (state, action) pair visited at each step 0..H-1.
struct Trajectory {
  std::vector<StateAction> steps;

  int length() const { return static_cast<int>(steps.size()); }

  auto operator<=>(const Trajectory&) const = default;
};

/// Thrown when an exact enumeration would exceed its configured cap.
struct EnumerationInfeasibleError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Stochastic tabular policy; rows pi(.|h, s) are validated simplexes.
class TabularPolicy {
 public:
  TabularPolicy(Dims dims, std::vector<double> probs);

  static TabularPolicy uniform(Dims dims);
  /// Point-mass rows; actions is laid out as [h * num_states + s].
  static TabularPolicy deterministic(Dims dims, const std::vector<int>& actions);

  const Dims& dims() const { return dims_; }
  double prob(int h, int s, int a) const { return probs_[dims_.index(h, s, a)]; }
  std::span<const double> row(int h, int s) const {
    return {probs_.data() + dims_.index(h, s, 0), static_cast<std::size_t>(dims_.num_actions)};
  }
  const std::vector<double>& values() const { return probs_; }

 private:
  Dims dims_;
  std::vector<double> probs_;
};

/// Per-step reward table r_h(s, a). Entries are plain reals: fitted models
/// live in the box [0, R/H], while rewards induced from value tables may
/// leave it, so the box is checked only where a caller requires it.
class RewardModel {
 public:
  RewardModel(Dims dims, std::vector<double> values);

  static RewardModel zeros(Dims dims);
  static RewardModel constant(Dims dims, double value);

  const Dims& dims() const { return dims_; }
  double at(int h, int s, int a) const { return values_[dims_.index(h, s, a)]; }
  const std::vector<double>& values() const { return values_; }

  /// Throws invalid_argument naming the first offending (h, s, a).
  void validate_box(double lo, double hi, double tol = 1e-9) const;

 private:
  Dims dims_;
  std::vector<double> values_;
};

/// Per-step value table f_h(s, a); same storage discipline as RewardModel.
class ValueTable {
 public:
  ValueTable(Dims dims, std::vector<double> values);

  static ValueTable zeros(Dims dims);
  static ValueTable constant(Dims dims, double value);

  const Dims& dims() const { return dims_; }
  double at(int h, int s, int a) const { return values_[dims_.index(h, s, a)]; }
  const std::vector<double>& values() const { return values_; }

  void validate_box(double lo, double hi, double tol = 1e-9) const;

 private:
  Dims dims_;
  std::vector<double> values_;
};

/// Non-owning view of transition kernels P_h(s'|s, a), laid out as
/// [((h * S + s) * A + a) * S + s']. Both the true model and fitted models
/// expose this view, so dynamic-programming code runs against either.
struct TransitionKernels {
  Dims dims;
  const double* data = nullptr;

  std::span<const double> row(int h, int s, int a) const {
    return {data + static_cast<std::size_t>(dims.index(h, s, a)) * dims.num_states,
            static_cast<std::size_t>(dims.num_states)};
  }
};

/**
 * Finite episodic MDP with one fixed initial state.
 *
 * return_bound R bounds every trajectory return; per-step rewards are
 * validated against [0, R/H]. Transition rows must be probability vectors
 * for every step including the last (the final kernel is carried for
 * completeness; no computation consumes it).
 */
class EpisodicMdp {
 public:
  EpisodicMdp(int num_states, int num_actions, int horizon, int initial_state,
              double return_bound, std::vector<double> transitions,
              std::vector<double> rewards);

  Dims dims() const { return dims_; }
  int num_states() const { return dims_.num_states; }
  int num_actions() const { return dims_.num_actions; }
  int horizon() const { return dims_.horizon; }
  int initial_state() const { return initial_state_; }
  double return_bound() const { return return_bound_; }
  double step_reward_bound() const { return return_bound_ / dims_.horizon; }

  TransitionKernels kernels() const { return {dims_, transitions_.data()}; }
  std::span<const double> transition_row(int h, int s, int a) const {
    return kernels().row(h, s, a);
  }
  double reward(int h, int s, int a) const { return rewards_[dims_.index(h, s, a)]; }
  RewardModel true_reward() const { return RewardModel(dims_, rewards_); }

 private:
  Dims dims_;
  int initial_state_;
  double return_bound_;
  std::vector<double> transitions_;  // H * S * A * S
  std::vector<double> rewards_;      // H * S * A
};

/// Backward-induction output: V_h(s) and Q_h(s, a) for the evaluated reward.
struct PolicyEvaluation {
  Dims dims;
  std::vector<double> state_values;  // H * S
  ValueTable action_values;

  double v(int h, int s) const { return state_values[h * dims.num_states + s]; }
  double q(int h, int s, int a) const { return action_values.at(h, s, a); }
};

/// Occupancy measures d_h(s, a) and d_h(s); each layer sums to one.
struct VisitationDistributions {
  Dims dims;
  std::vector<double> state_action;  // H * S * A
  std::vector<double> state;         // H * S

  double at(int h, int s, int a) const { return state_action[dims.index(h, s, a)]; }
  double state_at(int h, int s) const { return state[h * dims.num_states + s]; }
};

/// Exact Q/V tables for `policy` under `reward`, by backward induction.
/// The reward may be any real table; no box is assumed.
PolicyEvaluation policy_evaluation(const TransitionKernels& kernels,
                                   const TabularPolicy& policy,
                                   const RewardModel& reward);
PolicyEvaluation policy_evaluation(const EpisodicMdp& mdp, const TabularPolicy& policy,
                                   const RewardModel& reward);
/// Evaluation under the MDP's own reward table.
PolicyEvaluation policy_evaluation(const EpisodicMdp& mdp, const TabularPolicy& policy);

/// Exact occupancy measures by forward recursion from the initial state.
VisitationDistributions visitation(const EpisodicMdp& mdp, const TabularPolicy& policy);

/// All trajectories reachable under the transition kernels (every step uses a
/// transition of positive probability), in a fixed depth-first order. The cap
/// guards (S*A)^H blowup; exceeding it throws EnumerationInfeasibleError.
std::vector<Trajectory> enumerate_trajectories(const EpisodicMdp& mdp,
                                               std::uint64_t cap = 1'000'000);

/// Probability of one trajectory under `policy` (product of action and
/// transition probabilities, starting from the MDP's initial state).
double trajectory_probability(const EpisodicMdp& mdp, const TabularPolicy& policy,
                              const Trajectory& trajectory);

/// Support of the trajectory distribution of `policy` with probabilities;
/// entries with probability zero are dropped. Sums to one.
std::vector<std::pair<Trajectory, double>> trajectory_distribution(
    const EpisodicMdp& mdp, const TabularPolicy& policy, std::uint64_t cap = 1'000'000);

/// Sum of reward entries along the trajectory.
double trajectory_return(const RewardModel& reward, const Trajectory& trajectory);

/**
 * V^a - V^b at the initial state, assembled from the advantage form:
 * sum_h E_{d^a_h} <Q^b_h(s, .), a(.|s) - b(.|s)>. Numerically identical to
 * differencing two evaluations; kept as a separate path so tests can pit
 * the two against each other.
 */
double performance_difference(const EpisodicMdp& mdp, const TabularPolicy& policy_a,
                              const TabularPolicy& policy_b, const RewardModel& reward);

/// Short hex digest of the numeric content; stable across platforms.
std::string mdp_fingerprint(const EpisodicMdp& mdp);
std::string policy_fingerprint(const TabularPolicy& policy);

namespace detail {
/// FNV-1a over raw bytes; shared by the fingerprint helpers.
std::uint64_t fnv1a(const void* data, std::size_t size, std::uint64_t seed = 14695981039346656037ULL);
std::string hex64(std::uint64_t value);
}  // namespace detail

}  // namespace appo
