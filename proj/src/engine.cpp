#include "appo/engine.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <limits>
#include <map>
#include <ostream>

namespace appo {

namespace {

void check_dims_match(const Dims& a, const Dims& b, const char* what) {
  if (!(a == b)) {
    throw std::invalid_argument(std::string(what) + ": dimension mismatch");
  }
}

void check_trajectory_in_dims(const Dims& dims, const Trajectory& trajectory,
                              const char* what) {
  if (trajectory.length() != dims.horizon) {
    throw std::invalid_argument(std::string(what) + ": trajectory length " +
                                std::to_string(trajectory.length()) +
                                " does not match horizon " + std::to_string(dims.horizon));
  }
  for (const StateAction& step : trajectory.steps) {
    if (step.state < 0 || step.state >= dims.num_states || step.action < 0 ||
        step.action >= dims.num_actions) {
      throw std::invalid_argument(std::string(what) +
                                  ": trajectory step out of range: state=" +
                                  std::to_string(step.state) +
                                  " action=" + std::to_string(step.action));
    }
  }
}

// One absolute-value term of the adversary objective, in the linear form
// |<coeffs, x> - offset| with sample mass `weight`.
struct PairTerm {
  std::vector<double> coeffs;
  double offset = 0.0;
  double weight = 0.0;
};

// Accumulates the coefficients of the induced return of `tau` as a linear
// functional of the value table: the direct f term at each visited cell plus
// the backup term pulled from the next step through P and the policy.
void add_induced_return_coeffs(const Dims& dims, const TransitionKernels& kernels,
                               const TabularPolicy& policy, const Trajectory& tau,
                               double sign, std::vector<double>* c) {
  for (int h = 0; h < dims.horizon; ++h) {
    const StateAction& step = tau.steps[h];
    (*c)[dims.index(h, step.state, step.action)] += sign;
    if (h + 1 < dims.horizon) {
      const auto row = kernels.row(h, step.state, step.action);
      for (int sp = 0; sp < dims.num_states; ++sp) {
        if (row[sp] == 0.0) continue;
        for (int a = 0; a < dims.num_actions; ++a) {
          (*c)[dims.index(h + 1, sp, a)] -= sign * row[sp] * policy.prob(h + 1, sp, a);
        }
      }
    }
  }
}

std::vector<PairTerm> build_value_pair_terms(const WeightedTrajectoryPairs& data,
                                             const TransitionKernels& kernels,
                                             const TabularPolicy& policy,
                                             const RewardModel& r_hat) {
  std::vector<PairTerm> terms;
  terms.reserve(data.entries.size());
  for (const auto& entry : data.entries) {
    PairTerm term;
    term.coeffs.assign(data.dims.table_size(), 0.0);
    add_induced_return_coeffs(data.dims, kernels, policy, entry.tau0, 1.0, &term.coeffs);
    add_induced_return_coeffs(data.dims, kernels, policy, entry.tau1, -1.0, &term.coeffs);
    term.offset = trajectory_return(r_hat, entry.tau0) - trajectory_return(r_hat, entry.tau1);
    term.weight = entry.weight;
    terms.push_back(std::move(term));
  }
  return terms;
}

// Reward-space variant: the return of tau is directly linear in the reward
// table, one unit per visited cell.
std::vector<PairTerm> build_reward_pair_terms(const WeightedTrajectoryPairs& data,
                                              const RewardModel& r_hat) {
  std::vector<PairTerm> terms;
  terms.reserve(data.entries.size());
  for (const auto& entry : data.entries) {
    PairTerm term;
    term.coeffs.assign(data.dims.table_size(), 0.0);
    for (int h = 0; h < data.dims.horizon; ++h) {
      term.coeffs[data.dims.index(h, entry.tau0.steps[h].state, entry.tau0.steps[h].action)] +=
          1.0;
      term.coeffs[data.dims.index(h, entry.tau1.steps[h].state, entry.tau1.steps[h].action)] -=
          1.0;
    }
    term.offset = trajectory_return(r_hat, entry.tau0) - trajectory_return(r_hat, entry.tau1);
    term.weight = entry.weight;
    terms.push_back(std::move(term));
  }
  return terms;
}

double l1_of_terms(const std::vector<PairTerm>& terms, const std::vector<double>& x) {
  double total = 0.0;
  for (const PairTerm& term : terms) {
    double g = -term.offset;
    for (std::size_t i = 0; i < x.size(); ++i) g += term.coeffs[i] * x[i];
    total += term.weight * std::abs(g);
  }
  return total;
}

// minimize <linear, x> + lambda * sum_n w_n |<c_n, x> - d_n| over a box.
struct BoxL1Problem {
  std::vector<double> linear;
  std::vector<PairTerm> terms;
  double lambda = 0.0;
  double lo = 0.0;
  double hi = 1.0;

  double eval(const std::vector<double>& x) const {
    double value = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) value += linear[i] * x[i];
    return value + lambda * l1_of_terms(terms, x);
  }

  void subgradient(const std::vector<double>& x, std::vector<double>* g) const {
    *g = linear;
    if (lambda == 0.0) return;
    for (const PairTerm& term : terms) {
      double residual = -term.offset;
      for (std::size_t i = 0; i < x.size(); ++i) residual += term.coeffs[i] * x[i];
      if (residual == 0.0) continue;  // kink: contribute nothing
      const double scale = lambda * term.weight * (residual > 0.0 ? 1.0 : -1.0);
      for (std::size_t i = 0; i < x.size(); ++i) (*g)[i] += scale * term.coeffs[i];
    }
  }
};

struct BoxL1Solution {
  std::vector<double> x;
  double objective = 0.0;
  bool converged = false;
  int iterations_used = 0;
};

// Projected subgradient descent from `start` with step step_scale / sqrt(k),
// keeping the best point seen among the iterates and the extra candidates.
BoxL1Solution solve_box_l1(const BoxL1Problem& problem, const std::vector<double>& start,
                           const std::vector<std::vector<double>>& extra_candidates,
                           int iterations, double step_scale, double tolerance) {
  auto project = [&](double v) { return std::clamp(v, problem.lo, problem.hi); };

  BoxL1Solution best;
  best.x = start;
  for (double& v : best.x) v = project(v);
  best.objective = problem.eval(best.x);
  for (const std::vector<double>& candidate : extra_candidates) {
    std::vector<double> boxed = candidate;
    for (double& v : boxed) v = project(v);
    const double obj = problem.eval(boxed);
    if (obj < best.objective) {
      best.objective = obj;
      best.x = std::move(boxed);
    }
  }

  std::vector<double> x = start;
  for (double& v : x) v = project(v);
  std::vector<double> g(x.size(), 0.0);
  for (int k = 1; k <= iterations; ++k) {
    problem.subgradient(x, &g);
    double pg_norm = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
      pg_norm = std::max(pg_norm, std::abs(x[i] - project(x[i] - g[i])));
    }
    best.iterations_used = k;
    if (pg_norm <= tolerance) {
      best.converged = true;
      break;
    }
    const double step = step_scale / std::sqrt(static_cast<double>(k));
    for (std::size_t i = 0; i < x.size(); ++i) x[i] = project(x[i] - step * g[i]);
    const double obj = problem.eval(x);
    if (obj < best.objective) {
      best.objective = obj;
      best.x = x;
    }
  }
  return best;
}

std::vector<double> clip_to_box(std::vector<double> values, double lo, double hi) {
  for (double& v : values) v = std::clamp(v, lo, hi);
  return values;
}

double mean_row_entropy(const TabularPolicy& policy) {
  const Dims& dims = policy.dims();
  double total = 0.0;
  for (int h = 0; h < dims.horizon; ++h) {
    for (int s = 0; s < dims.num_states; ++s) {
      for (int a = 0; a < dims.num_actions; ++a) {
        const double p = policy.prob(h, s, a);
        if (p > 0.0) total -= p * std::log(p);
      }
    }
  }
  return total / (static_cast<double>(dims.horizon) * dims.num_states);
}

double elapsed_seconds(std::chrono::steady_clock::time_point since) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - since).count();
}

std::string format_csv_double(double value) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", value);
  return buf;
}

}  // namespace

WeightedTrajectoryPairs WeightedTrajectoryPairs::from_dataset(const TrajectoryPairDataset& data,
                                                              Dims dims) {
  if (data.pairs.empty()) {
    throw std::invalid_argument("weighted pairs: dataset is empty");
  }
  WeightedTrajectoryPairs out;
  out.dims = dims;
  out.step_marginals.assign(dims.table_size(), 0.0);

  std::map<std::vector<int>, std::size_t> index;
  for (const auto& [tau0, tau1] : data.pairs) {
    check_trajectory_in_dims(dims, tau0, "weighted pairs");
    check_trajectory_in_dims(dims, tau1, "weighted pairs");
    std::vector<int> key;
    key.reserve(4 * dims.horizon);
    for (const StateAction& step : tau0.steps) {
      key.push_back(step.state);
      key.push_back(step.action);
    }
    for (const StateAction& step : tau1.steps) {
      key.push_back(step.state);
      key.push_back(step.action);
    }
    auto [it, inserted] = index.try_emplace(std::move(key), out.entries.size());
    if (inserted) out.entries.push_back({tau0, tau1, 0.0});
    out.entries[it->second].weight += 1.0;

    for (int h = 0; h < dims.horizon; ++h) {
      out.step_marginals[dims.index(h, tau0.steps[h].state, tau0.steps[h].action)] += 1.0;
      out.step_marginals[dims.index(h, tau1.steps[h].state, tau1.steps[h].action)] += 1.0;
    }
  }
  const double n = static_cast<double>(data.pairs.size());
  for (auto& entry : out.entries) entry.weight /= n;
  for (double& m : out.step_marginals) m /= 2.0 * n;
  return out;
}

RewardModel induced_reward(const ValueTable& f, const TransitionKernels& kernels,
                           const TabularPolicy& policy) {
  const Dims dims = f.dims();
  check_dims_match(dims, kernels.dims, "induced_reward(kernels)");
  check_dims_match(dims, policy.dims(), "induced_reward(policy)");
  std::vector<double> values(dims.table_size(), 0.0);
  // Composition f_{h+1} o pi_{h+1} per next state, reused across (s, a).
  std::vector<double> next_composed(dims.num_states, 0.0);
  for (int h = dims.horizon - 1; h >= 0; --h) {
    for (int s = 0; s < dims.num_states; ++s) {
      for (int a = 0; a < dims.num_actions; ++a) {
        double r = f.at(h, s, a);
        if (h + 1 < dims.horizon) {
          const auto row = kernels.row(h, s, a);
          for (int sp = 0; sp < dims.num_states; ++sp) r -= row[sp] * next_composed[sp];
        }
        values[dims.index(h, s, a)] = r;
      }
    }
    // Becomes next_composed for step h-1.
    for (int s = 0; s < dims.num_states; ++s) {
      double composed = 0.0;
      for (int a = 0; a < dims.num_actions; ++a) composed += policy.prob(h, s, a) * f.at(h, s, a);
      next_composed[s] = composed;
    }
  }
  return RewardModel(dims, std::move(values));
}

RewardModel induced_reward(const ValueTable& f, const TransitionModel& model,
                           const TabularPolicy& policy) {
  return induced_reward(f, model.kernels(), policy);
}

RewardModel induced_reward(const ValueTable& f, const EpisodicMdp& mdp,
                           const TabularPolicy& policy) {
  return induced_reward(f, mdp.kernels(), policy);
}

double l1_deviation_loss(const ValueTable& f, const TransitionModel& p_hat,
                         const RewardModel& r_hat, const TabularPolicy& policy,
                         const WeightedTrajectoryPairs& data) {
  const Dims dims = f.dims();
  check_dims_match(dims, p_hat.dims(), "l1_deviation_loss(p_hat)");
  check_dims_match(dims, r_hat.dims(), "l1_deviation_loss(r_hat)");
  check_dims_match(dims, policy.dims(), "l1_deviation_loss(policy)");
  check_dims_match(dims, data.dims, "l1_deviation_loss(data)");
  const auto terms = build_value_pair_terms(data, p_hat.kernels(), policy, r_hat);
  return l1_of_terms(terms, f.values());
}

double l1_deviation_loss(const ValueTable& f, const TransitionModel& p_hat,
                         const RewardModel& r_hat, const TabularPolicy& policy,
                         const TrajectoryPairDataset& data) {
  return l1_deviation_loss(f, p_hat, r_hat, policy,
                           WeightedTrajectoryPairs::from_dataset(data, f.dims()));
}

namespace {

// Linear part of the adversary objective: the gradient of
// sum_h E_data[f_h o pi_h(s_h) - f_h(s_h, a_h)] with respect to f.
std::vector<double> composition_gap_gradient(const WeightedTrajectoryPairs& data,
                                             const TabularPolicy& policy) {
  const Dims& dims = data.dims;
  std::vector<double> linear(dims.table_size(), 0.0);
  for (int h = 0; h < dims.horizon; ++h) {
    for (int s = 0; s < dims.num_states; ++s) {
      double state_mass = 0.0;
      for (int a = 0; a < dims.num_actions; ++a) {
        state_mass += data.step_marginals[dims.index(h, s, a)];
      }
      for (int a = 0; a < dims.num_actions; ++a) {
        linear[dims.index(h, s, a)] =
            state_mass * policy.prob(h, s, a) - data.step_marginals[dims.index(h, s, a)];
      }
    }
  }
  return linear;
}

}  // namespace

double inner_objective(const ValueTable& f, const TransitionModel& p_hat,
                       const RewardModel& r_hat, const TabularPolicy& policy,
                       const WeightedTrajectoryPairs& data, double lambda) {
  const Dims dims = f.dims();
  check_dims_match(dims, data.dims, "inner_objective(data)");
  check_dims_match(dims, policy.dims(), "inner_objective(policy)");
  const std::vector<double> linear = composition_gap_gradient(data, policy);
  double value = 0.0;
  for (int i = 0; i < dims.table_size(); ++i) value += linear[i] * f.values()[i];
  return value + lambda * l1_deviation_loss(f, p_hat, r_hat, policy, data);
}

double inner_objective(const ValueTable& f, const TransitionModel& p_hat,
                       const RewardModel& r_hat, const TabularPolicy& policy,
                       const TrajectoryPairDataset& data, double lambda) {
  return inner_objective(f, p_hat, r_hat, policy,
                         WeightedTrajectoryPairs::from_dataset(data, f.dims()), lambda);
}

InnerSolveResult optimize_f(const TabularPolicy& policy, const TransitionModel& p_hat,
                            const RewardModel& r_hat, const WeightedTrajectoryPairs& data,
                            const InnerSolveOptions& options, const ValueTable& warm_start) {
  const Dims dims = policy.dims();
  check_dims_match(dims, p_hat.dims(), "optimize_f(p_hat)");
  check_dims_match(dims, r_hat.dims(), "optimize_f(r_hat)");
  check_dims_match(dims, data.dims, "optimize_f(data)");
  check_dims_match(dims, warm_start.dims(), "optimize_f(warm_start)");
  if (options.iterations < 1) {
    throw std::invalid_argument("optimize_f: iterations must be at least 1");
  }
  if (options.lambda < 0.0 || !std::isfinite(options.lambda)) {
    throw std::invalid_argument("optimize_f: lambda must be finite and nonnegative");
  }
  if (!(options.value_bound > 0.0)) {
    throw std::invalid_argument("optimize_f: value_bound must be positive");
  }

  BoxL1Problem problem;
  problem.linear = composition_gap_gradient(data, policy);
  problem.terms = build_value_pair_terms(data, p_hat.kernels(), policy, r_hat);
  problem.lambda = options.lambda;
  problem.lo = 0.0;
  problem.hi = options.value_bound;

  // The realizable comparator: the action-value table of the current policy
  // under the fitted models. Guarantees the solution is never worse than a
  // point the theory knows is good.
  const PolicyEvaluation comparator = policy_evaluation(p_hat.kernels(), policy, r_hat);
  std::vector<std::vector<double>> candidates;
  candidates.push_back(
      clip_to_box(comparator.action_values.values(), 0.0, options.value_bound));
  candidates.emplace_back(dims.table_size(), 0.0);

  BoxL1Solution solution =
      solve_box_l1(problem, warm_start.values(), candidates, options.iterations,
                   options.value_bound, options.tolerance);
  return InnerSolveResult{ValueTable(dims, std::move(solution.x)), solution.objective,
                          solution.converged, solution.iterations_used};
}

InnerSolveResult optimize_f(const TabularPolicy& policy, const TransitionModel& p_hat,
                            const RewardModel& r_hat, const TrajectoryPairDataset& data,
                            const InnerSolveOptions& options, const ValueTable& warm_start) {
  return optimize_f(policy, p_hat, r_hat,
                    WeightedTrajectoryPairs::from_dataset(data, policy.dims()), options,
                    warm_start);
}

TabularPolicy policy_update(const TabularPolicy& policy, const ValueTable& f, double eta) {
  const Dims dims = policy.dims();
  check_dims_match(dims, f.dims(), "policy_update(f)");
  if (!std::isfinite(eta) || eta < 0.0) {
    throw std::invalid_argument("policy_update: eta must be finite and nonnegative");
  }
  if (eta == 0.0) return policy;

  std::vector<double> out(dims.table_size(), 0.0);
  std::vector<double> logits(dims.num_actions, 0.0);
  for (int h = 0; h < dims.horizon; ++h) {
    for (int s = 0; s < dims.num_states; ++s) {
      double max_logit = -std::numeric_limits<double>::infinity();
      for (int a = 0; a < dims.num_actions; ++a) {
        logits[a] = std::log(policy.prob(h, s, a)) + eta * f.at(h, s, a);
        max_logit = std::max(max_logit, logits[a]);
      }
      double norm = 0.0;
      for (int a = 0; a < dims.num_actions; ++a) {
        logits[a] = std::exp(logits[a] - max_logit);
        norm += logits[a];
      }
      for (int a = 0; a < dims.num_actions; ++a) {
        out[dims.index(h, s, a)] = logits[a] / norm;
      }
    }
  }
  return TabularPolicy(dims, std::move(out));
}

double AppoConfig::resolve_eta(int num_actions, double return_bound) const {
  if (eta.has_value()) return *eta;
  return std::sqrt(2.0 * std::log(static_cast<double>(num_actions)) /
                   (return_bound * return_bound * iterations));
}

std::vector<std::string> AppoConfig::validate(int num_actions, double return_bound,
                                              const ConcentrabilityReport* report) const {
  if (iterations < 1) {
    throw std::invalid_argument("config: iterations must be at least 1");
  }
  if (lambda < 0.0 || !std::isfinite(lambda)) {
    throw std::invalid_argument("config: lambda must be finite and nonnegative");
  }
  if (eta.has_value() && (!std::isfinite(*eta) || *eta <= 0.0)) {
    throw std::invalid_argument("config: explicit eta must be positive and finite");
  }
  if (inner_iterations < 1) {
    throw std::invalid_argument("config: inner_iterations must be at least 1");
  }
  if (num_actions < 1 || !(return_bound > 0.0)) {
    throw std::invalid_argument("config: invalid num_actions or return_bound");
  }
  std::vector<std::string> warnings;
  if (report != nullptr && !(lambda > report->c_traj)) {
    char buf[160];
    std::snprintf(buf, sizeof(buf),
                  "lambda=%g does not exceed the trajectory concentrability coefficient "
                  "%g; the pessimism guarantee assumes lambda above it",
                  lambda, report->c_traj);
    warnings.emplace_back(buf);
  }
  return warnings;
}

void RunLog::to_csv(std::ostream& out, bool include_timing) const {
  out << "iter,inner_obj,l1_dev,exact_value_true_reward,entropy";
  if (include_timing) out << ",seconds";
  out << "\n";
  for (const RunRecord& record : records) {
    out << record.iteration << ',' << format_csv_double(record.inner_objective) << ','
        << format_csv_double(record.l1_deviation) << ','
        << format_csv_double(record.exact_value_true_reward) << ','
        << format_csv_double(record.entropy);
    if (include_timing) out << ',' << format_csv_double(record.seconds);
    out << "\n";
  }
}

AppoResult run_appo(const AppoConfig& config, const TrajectoryPairDataset& data,
                    const RewardModel& r_hat, const TransitionModel& p_hat, Dims dims,
                    double return_bound, const EpisodicMdp* oracle_mdp) {
  check_dims_match(dims, r_hat.dims(), "run_appo(r_hat)");
  check_dims_match(dims, p_hat.dims(), "run_appo(p_hat)");
  if (oracle_mdp != nullptr) check_dims_match(dims, oracle_mdp->dims(), "run_appo(oracle)");

  AppoResult result;
  result.log.warnings = config.validate(dims.num_actions, return_bound);

  TrajectoryPairDataset second_half;
  const TrajectoryPairDataset* loss_data = &data;
  if (config.split_data) {
    second_half = data.split_halves().second;
    loss_data = &second_half;
  }
  const WeightedTrajectoryPairs weighted =
      WeightedTrajectoryPairs::from_dataset(*loss_data, dims);

  const double eta = config.resolve_eta(dims.num_actions, return_bound);
  InnerSolveOptions inner_options;
  inner_options.iterations = config.inner_iterations;
  inner_options.lambda = config.lambda;
  inner_options.value_bound = return_bound;
  inner_options.tolerance = config.inner_tolerance;

  TabularPolicy pi = TabularPolicy::uniform(dims);
  ValueTable warm = ValueTable(
      dims, clip_to_box(policy_evaluation(p_hat.kernels(), pi, r_hat).action_values.values(),
                        0.0, return_bound));

  result.mixture.iterates.reserve(config.iterations);
  for (int t = 1; t <= config.iterations; ++t) {
    const auto started = std::chrono::steady_clock::now();
    InnerSolveResult solve = optimize_f(pi, p_hat, r_hat, weighted, inner_options, warm);
    const double l1 = l1_deviation_loss(solve.f, p_hat, r_hat, pi, weighted);
    double exact = std::numeric_limits<double>::quiet_NaN();
    if (oracle_mdp != nullptr) {
      const PolicyEvaluation eval = policy_evaluation(*oracle_mdp, pi);
      exact = eval.v(0, oracle_mdp->initial_state());
    }
    TabularPolicy next = policy_update(pi, solve.f, eta);
    result.log.records.push_back({t, solve.objective, l1, exact, mean_row_entropy(next),
                                  elapsed_seconds(started), solve.f});
    result.mixture.iterates.push_back(pi);
    warm = solve.f;
    pi = std::move(next);
  }
  return result;
}

AppoResult run_appo_rollout(const AppoConfig& config, const EpisodicMdp& mdp,
                            const TabularPolicy& pi_ref, const TrajectoryPairDataset& data,
                            const RewardModel& r_hat, int k1, int k2) {
  const Dims dims = mdp.dims();
  check_dims_match(dims, pi_ref.dims(), "run_appo_rollout(pi_ref)");
  check_dims_match(dims, r_hat.dims(), "run_appo_rollout(r_hat)");
  if (k1 < 1 || k2 < 1) {
    throw std::invalid_argument("run_appo_rollout: k1 and k2 must be at least 1");
  }

  AppoResult result;
  result.log.warnings = config.validate(dims.num_actions, mdp.return_bound());

  const WeightedTrajectoryPairs weighted = WeightedTrajectoryPairs::from_dataset(data, dims);
  const double eta = config.resolve_eta(dims.num_actions, mdp.return_bound());
  const double step_bound = mdp.step_reward_bound();
  SplitMix64 rng(config.seed);

  // The deviation terms do not depend on the iterate, so they are built once;
  // only the on-policy marginals change across iterations.
  BoxL1Problem problem;
  problem.terms = build_reward_pair_terms(weighted, r_hat);
  problem.lambda = config.lambda;
  problem.lo = 0.0;
  problem.hi = step_bound;

  TabularPolicy pi = TabularPolicy::uniform(dims);
  result.mixture.iterates.reserve(config.iterations);
  for (int t = 1; t <= config.iterations; ++t) {
    const auto started = std::chrono::steady_clock::now();

    std::vector<double> roll_marginals(dims.table_size(), 0.0);
    for (int k = 0; k < k1; ++k) {
      const Trajectory tau = rollout(mdp, pi, rng);
      for (int h = 0; h < dims.horizon; ++h) {
        roll_marginals[dims.index(h, tau.steps[h].state, tau.steps[h].action)] += 1.0;
      }
    }
    problem.linear.assign(dims.table_size(), 0.0);
    for (int i = 0; i < dims.table_size(); ++i) {
      problem.linear[i] = roll_marginals[i] / k1 - weighted.step_marginals[i];
    }

    const std::vector<double> start(dims.table_size(), step_bound / 2.0);
    BoxL1Solution solution = solve_box_l1(problem, start, {}, config.inner_iterations,
                                          step_bound, config.inner_tolerance);
    const RewardModel r_t(dims, std::move(solution.x));

    const ValueTable q_bar = pe_subroutine(mdp, pi_ref, pi, r_t, k2, rng);
    TabularPolicy next = policy_update(pi, q_bar, eta);

    const PolicyEvaluation eval = policy_evaluation(mdp, pi);
    result.log.records.push_back({t, solution.objective,
                                  l1_of_terms(problem.terms, r_t.values()),
                                  eval.v(0, mdp.initial_state()), mean_row_entropy(next),
                                  elapsed_seconds(started), q_bar});
    result.mixture.iterates.push_back(pi);
    pi = std::move(next);
  }
  return result;
}

double mixture_value(const MixturePolicy& mixture, const EpisodicMdp& mdp,
                     const RewardModel& reward) {
  if (mixture.iterates.empty()) {
    throw std::invalid_argument("mixture_value: mixture has no iterates");
  }
  double total = 0.0;
  for (const TabularPolicy& pi : mixture.iterates) {
    const PolicyEvaluation eval = policy_evaluation(mdp, pi, reward);
    total += eval.v(0, mdp.initial_state());
  }
  return total / static_cast<double>(mixture.iterates.size());
}

}  // namespace appo
