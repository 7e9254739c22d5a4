#include "appo/mdp.hpp"

#include <cmath>
#include <cstdio>
#include <cstring>

namespace appo {

namespace {

constexpr double kRowSumTol = 1e-12;

std::string index_string(int h, int s, int a) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "(h=%d, s=%d, a=%d)", h, s, a);
  return buf;
}

void check_dims(const Dims& dims) {
  if (dims.num_states < 1 || dims.num_actions < 1 || dims.horizon < 1) {
    throw std::invalid_argument("dimensions must be positive: num_states=" +
                                std::to_string(dims.num_states) +
                                " num_actions=" + std::to_string(dims.num_actions) +
                                " horizon=" + std::to_string(dims.horizon));
  }
}

void check_table_size(const Dims& dims, std::size_t got, const char* what) {
  const std::size_t want = static_cast<std::size_t>(dims.table_size());
  if (got != want) {
    throw std::invalid_argument(std::string(what) + " has " + std::to_string(got) +
                                " entries, expected " + std::to_string(want));
  }
}

void check_same_dims(const Dims& a, const Dims& b, const char* what) {
  if (!(a == b)) {
    throw std::invalid_argument(std::string(what) + ": dimension mismatch (" +
                                std::to_string(a.horizon) + "x" + std::to_string(a.num_states) +
                                "x" + std::to_string(a.num_actions) + " vs " +
                                std::to_string(b.horizon) + "x" + std::to_string(b.num_states) +
                                "x" + std::to_string(b.num_actions) + ")");
  }
}

void check_trajectory(const Dims& dims, const Trajectory& trajectory) {
  if (trajectory.length() != dims.horizon) {
    throw std::invalid_argument("trajectory length " + std::to_string(trajectory.length()) +
                                " does not match horizon " + std::to_string(dims.horizon));
  }
  for (int h = 0; h < trajectory.length(); ++h) {
    const auto& step = trajectory.steps[h];
    if (step.state < 0 || step.state >= dims.num_states || step.action < 0 ||
        step.action >= dims.num_actions) {
      throw std::invalid_argument("trajectory step " + std::to_string(h) +
                                  " out of range: state=" + std::to_string(step.state) +
                                  " action=" + std::to_string(step.action));
    }
  }
}

void validate_box_impl(const Dims& dims, const std::vector<double>& values, double lo,
                       double hi, double tol, const char* what) {
  for (int h = 0; h < dims.horizon; ++h) {
    for (int s = 0; s < dims.num_states; ++s) {
      for (int a = 0; a < dims.num_actions; ++a) {
        const double v = values[dims.index(h, s, a)];
        if (!std::isfinite(v) || v < lo - tol || v > hi + tol) {
          throw std::invalid_argument(std::string(what) + " entry " + index_string(h, s, a) +
                                      " = " + std::to_string(v) + " outside [" +
                                      std::to_string(lo) + ", " + std::to_string(hi) + "]");
        }
      }
    }
  }
}

}  // namespace

TabularPolicy::TabularPolicy(Dims dims, std::vector<double> probs)
    : dims_(dims), probs_(std::move(probs)) {
  check_dims(dims_);
  check_table_size(dims_, probs_.size(), "policy table");
  for (int h = 0; h < dims_.horizon; ++h) {
    for (int s = 0; s < dims_.num_states; ++s) {
      double sum = 0.0;
      for (int a = 0; a < dims_.num_actions; ++a) {
        const double p = probs_[dims_.index(h, s, a)];
        if (!std::isfinite(p) || p < 0.0) {
          throw std::invalid_argument("policy entry " + index_string(h, s, a) +
                                      " is negative or non-finite");
        }
        sum += p;
      }
      if (std::abs(sum - 1.0) > kRowSumTol) {
        throw std::invalid_argument("policy row (h=" + std::to_string(h) +
                                    ", s=" + std::to_string(s) + ") sums to " +
                                    std::to_string(sum));
      }
    }
  }
}

TabularPolicy TabularPolicy::uniform(Dims dims) {
  check_dims(dims);
  return TabularPolicy(dims, std::vector<double>(dims.table_size(), 1.0 / dims.num_actions));
}

TabularPolicy TabularPolicy::deterministic(Dims dims, const std::vector<int>& actions) {
  check_dims(dims);
  const std::size_t want = static_cast<std::size_t>(dims.horizon) * dims.num_states;
  if (actions.size() != want) {
    throw std::invalid_argument("deterministic policy needs " + std::to_string(want) +
                                " actions, got " + std::to_string(actions.size()));
  }
  std::vector<double> probs(dims.table_size(), 0.0);
  for (int h = 0; h < dims.horizon; ++h) {
    for (int s = 0; s < dims.num_states; ++s) {
      const int a = actions[h * dims.num_states + s];
      if (a < 0 || a >= dims.num_actions) {
        throw std::invalid_argument("deterministic action out of range at (h=" +
                                    std::to_string(h) + ", s=" + std::to_string(s) +
                                    "): " + std::to_string(a));
      }
      probs[dims.index(h, s, a)] = 1.0;
    }
  }
  return TabularPolicy(dims, std::move(probs));
}

RewardModel::RewardModel(Dims dims, std::vector<double> values)
    : dims_(dims), values_(std::move(values)) {
  check_dims(dims_);
  check_table_size(dims_, values_.size(), "reward table");
}

RewardModel RewardModel::zeros(Dims dims) {
  return RewardModel(dims, std::vector<double>(dims.table_size(), 0.0));
}

RewardModel RewardModel::constant(Dims dims, double value) {
  return RewardModel(dims, std::vector<double>(dims.table_size(), value));
}

void RewardModel::validate_box(double lo, double hi, double tol) const {
  validate_box_impl(dims_, values_, lo, hi, tol, "reward");
}

ValueTable::ValueTable(Dims dims, std::vector<double> values)
    : dims_(dims), values_(std::move(values)) {
  check_dims(dims_);
  check_table_size(dims_, values_.size(), "value table");
}

ValueTable ValueTable::zeros(Dims dims) {
  return ValueTable(dims, std::vector<double>(dims.table_size(), 0.0));
}

ValueTable ValueTable::constant(Dims dims, double value) {
  return ValueTable(dims, std::vector<double>(dims.table_size(), value));
}

void ValueTable::validate_box(double lo, double hi, double tol) const {
  validate_box_impl(dims_, values_, lo, hi, tol, "value table");
}

EpisodicMdp::EpisodicMdp(int num_states, int num_actions, int horizon, int initial_state,
                         double return_bound, std::vector<double> transitions,
                         std::vector<double> rewards)
    : dims_{num_states, num_actions, horizon},
      initial_state_(initial_state),
      return_bound_(return_bound),
      transitions_(std::move(transitions)),
      rewards_(std::move(rewards)) {
  check_dims(dims_);
  if (initial_state_ < 0 || initial_state_ >= num_states) {
    throw std::invalid_argument("initial_state " + std::to_string(initial_state_) +
                                " out of range [0, " + std::to_string(num_states) + ")");
  }
  if (!std::isfinite(return_bound_) || return_bound_ <= 0.0) {
    throw std::invalid_argument("return_bound must be positive, got " +
                                std::to_string(return_bound_));
  }
  const std::size_t kernel_size = static_cast<std::size_t>(dims_.table_size()) * num_states;
  if (transitions_.size() != kernel_size) {
    throw std::invalid_argument("transition table has " + std::to_string(transitions_.size()) +
                                " entries, expected " + std::to_string(kernel_size));
  }
  check_table_size(dims_, rewards_.size(), "reward table");
  for (int h = 0; h < horizon; ++h) {
    for (int s = 0; s < num_states; ++s) {
      for (int a = 0; a < num_actions; ++a) {
        double sum = 0.0;
        const double* row =
            transitions_.data() + static_cast<std::size_t>(dims_.index(h, s, a)) * num_states;
        for (int sp = 0; sp < num_states; ++sp) {
          if (!std::isfinite(row[sp]) || row[sp] < 0.0) {
            throw std::invalid_argument("transition entry " + index_string(h, s, a) +
                                        " -> s'=" + std::to_string(sp) +
                                        " is negative or non-finite");
          }
          sum += row[sp];
        }
        if (std::abs(sum - 1.0) > kRowSumTol) {
          throw std::invalid_argument("transition row " + index_string(h, s, a) + " sums to " +
                                      std::to_string(sum));
        }
      }
    }
  }
  validate_box_impl(dims_, rewards_, 0.0, step_reward_bound(), 1e-9, "reward");
}

PolicyEvaluation policy_evaluation(const TransitionKernels& kernels,
                                   const TabularPolicy& policy, const RewardModel& reward) {
  const Dims dims = kernels.dims;
  check_same_dims(dims, policy.dims(), "policy_evaluation(policy)");
  check_same_dims(dims, reward.dims(), "policy_evaluation(reward)");
  const int S = dims.num_states;
  const int A = dims.num_actions;
  const int H = dims.horizon;

  std::vector<double> q(dims.table_size(), 0.0);
  std::vector<double> v(static_cast<std::size_t>(H) * S, 0.0);
  std::vector<double> v_next(S, 0.0);  // V_{H} beyond the last step is zero
  for (int h = H - 1; h >= 0; --h) {
    for (int s = 0; s < S; ++s) {
      double vs = 0.0;
      for (int a = 0; a < A; ++a) {
        double qa = reward.at(h, s, a);
        if (h + 1 < H) {
          const auto row = kernels.row(h, s, a);
          for (int sp = 0; sp < S; ++sp) qa += row[sp] * v_next[sp];
        }
        q[dims.index(h, s, a)] = qa;
        vs += policy.prob(h, s, a) * qa;
      }
      v[static_cast<std::size_t>(h) * S + s] = vs;
    }
    for (int s = 0; s < S; ++s) v_next[s] = v[static_cast<std::size_t>(h) * S + s];
  }
  return PolicyEvaluation{dims, std::move(v), ValueTable(dims, std::move(q))};
}

PolicyEvaluation policy_evaluation(const EpisodicMdp& mdp, const TabularPolicy& policy,
                                   const RewardModel& reward) {
  return policy_evaluation(mdp.kernels(), policy, reward);
}

PolicyEvaluation policy_evaluation(const EpisodicMdp& mdp, const TabularPolicy& policy) {
  return policy_evaluation(mdp.kernels(), policy, mdp.true_reward());
}

VisitationDistributions visitation(const EpisodicMdp& mdp, const TabularPolicy& policy) {
  const Dims dims = mdp.dims();
  check_same_dims(dims, policy.dims(), "visitation");
  const int S = dims.num_states;
  const int A = dims.num_actions;
  const int H = dims.horizon;

  std::vector<double> d_state(static_cast<std::size_t>(H) * S, 0.0);
  std::vector<double> d_sa(dims.table_size(), 0.0);
  d_state[mdp.initial_state()] = 1.0;
  for (int h = 0; h < H; ++h) {
    for (int s = 0; s < S; ++s) {
      const double ds = d_state[static_cast<std::size_t>(h) * S + s];
      if (ds == 0.0) continue;
      for (int a = 0; a < A; ++a) {
        const double mass = ds * policy.prob(h, s, a);
        d_sa[dims.index(h, s, a)] = mass;
        if (mass == 0.0 || h + 1 >= H) continue;
        const auto row = mdp.transition_row(h, s, a);
        for (int sp = 0; sp < S; ++sp) {
          d_state[static_cast<std::size_t>(h + 1) * S + sp] += mass * row[sp];
        }
      }
    }
  }
  return VisitationDistributions{dims, std::move(d_sa), std::move(d_state)};
}

std::vector<Trajectory> enumerate_trajectories(const EpisodicMdp& mdp, std::uint64_t cap) {
  const Dims dims = mdp.dims();
  // Conservative feasibility guard before any work: (S*A)^H combinations.
  const double log_combos =
      dims.horizon * std::log(static_cast<double>(dims.num_states) * dims.num_actions);
  if (log_combos > std::log(static_cast<double>(cap)) + 1e-9) {
    throw EnumerationInfeasibleError(
        "trajectory enumeration infeasible: (S*A)^H exceeds cap " + std::to_string(cap));
  }

  std::vector<Trajectory> out;
  Trajectory current;
  current.steps.reserve(dims.horizon);
  // Depth-first over actions and positive-probability successors; order is
  // fixed by action then successor index, so results are deterministic.
  auto recurse = [&](auto&& self, int h, int s) -> void {
    if (h == dims.horizon) {
      out.push_back(current);
      return;
    }
    for (int a = 0; a < dims.num_actions; ++a) {
      current.steps.push_back({s, a});
      if (h + 1 == dims.horizon) {
        self(self, h + 1, -1);
      } else {
        const auto row = mdp.transition_row(h, s, a);
        for (int sp = 0; sp < dims.num_states; ++sp) {
          if (row[sp] > 0.0) self(self, h + 1, sp);
        }
      }
      current.steps.pop_back();
    }
  };
  recurse(recurse, 0, mdp.initial_state());
  return out;
}

double trajectory_probability(const EpisodicMdp& mdp, const TabularPolicy& policy,
                              const Trajectory& trajectory) {
  const Dims dims = mdp.dims();
  check_same_dims(dims, policy.dims(), "trajectory_probability");
  check_trajectory(dims, trajectory);
  if (trajectory.steps[0].state != mdp.initial_state()) return 0.0;
  double p = 1.0;
  for (int h = 0; h < dims.horizon; ++h) {
    const auto& step = trajectory.steps[h];
    p *= policy.prob(h, step.state, step.action);
    if (p == 0.0) return 0.0;
    if (h + 1 < dims.horizon) {
      p *= mdp.transition_row(h, step.state, step.action)[trajectory.steps[h + 1].state];
      if (p == 0.0) return 0.0;
    }
  }
  return p;
}

std::vector<std::pair<Trajectory, double>> trajectory_distribution(
    const EpisodicMdp& mdp, const TabularPolicy& policy, std::uint64_t cap) {
  std::vector<std::pair<Trajectory, double>> out;
  for (const Trajectory& t : enumerate_trajectories(mdp, cap)) {
    const double p = trajectory_probability(mdp, policy, t);
    if (p > 0.0) out.emplace_back(t, p);
  }
  return out;
}

double trajectory_return(const RewardModel& reward, const Trajectory& trajectory) {
  check_trajectory(reward.dims(), trajectory);
  double total = 0.0;
  for (int h = 0; h < trajectory.length(); ++h) {
    total += reward.at(h, trajectory.steps[h].state, trajectory.steps[h].action);
  }
  return total;
}

double performance_difference(const EpisodicMdp& mdp, const TabularPolicy& policy_a,
                              const TabularPolicy& policy_b, const RewardModel& reward) {
  const Dims dims = mdp.dims();
  check_same_dims(dims, policy_a.dims(), "performance_difference(policy_a)");
  check_same_dims(dims, policy_b.dims(), "performance_difference(policy_b)");
  check_same_dims(dims, reward.dims(), "performance_difference(reward)");
  const VisitationDistributions d_a = visitation(mdp, policy_a);
  const PolicyEvaluation eval_b = policy_evaluation(mdp, policy_b, reward);
  double total = 0.0;
  for (int h = 0; h < dims.horizon; ++h) {
    for (int s = 0; s < dims.num_states; ++s) {
      const double ds = d_a.state_at(h, s);
      if (ds == 0.0) continue;
      double advantage = 0.0;
      for (int a = 0; a < dims.num_actions; ++a) {
        advantage += eval_b.q(h, s, a) * (policy_a.prob(h, s, a) - policy_b.prob(h, s, a));
      }
      total += ds * advantage;
    }
  }
  return total;
}

namespace detail {

std::uint64_t fnv1a(const void* data, std::size_t size, std::uint64_t seed) {
  const unsigned char* bytes = static_cast<const unsigned char*>(data);
  std::uint64_t hash = seed;
  for (std::size_t i = 0; i < size; ++i) {
    hash ^= bytes[i];
    hash *= 1099511628211ULL;
  }
  return hash;
}

std::string hex64(std::uint64_t value) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(value));
  return buf;
}

}  // namespace detail

namespace {

std::uint64_t hash_doubles(std::uint64_t hash, const std::vector<double>& values) {
  // Hash bit patterns, not formatted text, so the digest is exact.
  return detail::fnv1a(values.data(), values.size() * sizeof(double), hash);
}

}  // namespace

std::string mdp_fingerprint(const EpisodicMdp& mdp) {
  const int header[4] = {mdp.num_states(), mdp.num_actions(), mdp.horizon(),
                         mdp.initial_state()};
  std::uint64_t hash = detail::fnv1a(header, sizeof(header));
  const double bound = mdp.return_bound();
  hash = detail::fnv1a(&bound, sizeof(bound), hash);
  std::vector<double> kernels;
  kernels.reserve(static_cast<std::size_t>(mdp.dims().table_size()) * mdp.num_states());
  std::vector<double> rewards;
  rewards.reserve(mdp.dims().table_size());
  for (int h = 0; h < mdp.horizon(); ++h) {
    for (int s = 0; s < mdp.num_states(); ++s) {
      for (int a = 0; a < mdp.num_actions(); ++a) {
        const auto row = mdp.transition_row(h, s, a);
        kernels.insert(kernels.end(), row.begin(), row.end());
        rewards.push_back(mdp.reward(h, s, a));
      }
    }
  }
  hash = hash_doubles(hash, kernels);
  hash = hash_doubles(hash, rewards);
  return detail::hex64(hash);
}

std::string policy_fingerprint(const TabularPolicy& policy) {
  const int header[3] = {policy.dims().num_states, policy.dims().num_actions,
                         policy.dims().horizon};
  std::uint64_t hash = detail::fnv1a(header, sizeof(header));
  hash = hash_doubles(hash, policy.values());
  return detail::hex64(hash);
}

}  // namespace appo
