#include "appo/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "appo/estimators.hpp"
#include "appo/logging.hpp"
#include "appo/rng.hpp"

namespace appo {

namespace {

void check_dims_match(const Dims& a, const Dims& b, const char* what) {
  if (!(a == b)) {
    throw std::invalid_argument(std::string(what) + ": dimension mismatch");
  }
}

double initial_value(const EpisodicMdp& mdp, const TabularPolicy& policy,
                     const RewardModel& reward) {
  return policy_evaluation(mdp, policy, reward).v(0, mdp.initial_state());
}

// E|X - Y| for X, Y i.i.d. over weighted points, by one sort and a prefix scan.
double mean_absolute_pair_gap(std::vector<std::pair<double, double>> weighted_points) {
  std::sort(weighted_points.begin(), weighted_points.end());
  double cum_weight = 0.0;
  double cum_weighted_value = 0.0;
  double total = 0.0;
  for (const auto& [value, weight] : weighted_points) {
    total += 2.0 * weight * (value * cum_weight - cum_weighted_value);
    cum_weight += weight;
    cum_weighted_value += weight * value;
  }
  return total;
}

TabularPolicy random_full_support_policy(Dims dims, SplitMix64& rng) {
  std::vector<double> probs(dims.table_size(), 0.0);
  for (int h = 0; h < dims.horizon; ++h) {
    for (int s = 0; s < dims.num_states; ++s) {
      double sum = 0.0;
      for (int a = 0; a < dims.num_actions; ++a) {
        // Exponential draws give strictly positive Dirichlet-like rows.
        const double w = -std::log(1.0 - rng.uniform01());
        probs[dims.index(h, s, a)] = w;
        sum += w;
      }
      for (int a = 0; a < dims.num_actions; ++a) probs[dims.index(h, s, a)] /= sum;
    }
  }
  return TabularPolicy(dims, std::move(probs));
}

ValueTable random_value_table(Dims dims, double bound, SplitMix64& rng) {
  std::vector<double> values(dims.table_size(), 0.0);
  for (double& v : values) v = bound * rng.uniform01();
  return ValueTable(dims, std::move(values));
}

RewardModel random_box_reward(Dims dims, double step_bound, SplitMix64& rng) {
  std::vector<double> values(dims.table_size(), 0.0);
  for (double& v : values) v = step_bound * rng.uniform01();
  return RewardModel(dims, std::move(values));
}

}  // namespace

std::pair<TabularPolicy, double> optimal_policy(const EpisodicMdp& mdp) {
  const Dims dims = mdp.dims();
  std::vector<int> actions(static_cast<std::size_t>(dims.horizon) * dims.num_states, 0);
  std::vector<double> v_next(dims.num_states, 0.0);
  std::vector<double> v(dims.num_states, 0.0);
  for (int h = dims.horizon - 1; h >= 0; --h) {
    for (int s = 0; s < dims.num_states; ++s) {
      double best = -std::numeric_limits<double>::infinity();
      int best_action = 0;
      for (int a = 0; a < dims.num_actions; ++a) {
        double q = mdp.reward(h, s, a);
        if (h + 1 < dims.horizon) {
          const auto row = mdp.transition_row(h, s, a);
          for (int sp = 0; sp < dims.num_states; ++sp) q += row[sp] * v_next[sp];
        }
        if (q > best) {  // strict: ties keep the lowest action
          best = q;
          best_action = a;
        }
      }
      v[s] = best;
      actions[static_cast<std::size_t>(h) * dims.num_states + s] = best_action;
    }
    v_next = v;
  }
  return {TabularPolicy::deterministic(dims, actions), v[mdp.initial_state()]};
}

RewardModel reward_difference(const RewardModel& a, const RewardModel& b) {
  check_dims_match(a.dims(), b.dims(), "reward_difference");
  std::vector<double> values = a.values();
  for (int i = 0; i < a.dims().table_size(); ++i) values[i] -= b.values()[i];
  return RewardModel(a.dims(), std::move(values));
}

double exact_l1_loss(const EpisodicMdp& mdp, const TabularPolicy& pi_ref,
                     const RewardModel& candidate, const RewardModel& r_hat,
                     std::uint64_t enumeration_cap) {
  check_dims_match(mdp.dims(), candidate.dims(), "exact_l1_loss(candidate)");
  check_dims_match(mdp.dims(), r_hat.dims(), "exact_l1_loss(r_hat)");
  const auto support = trajectory_distribution(mdp, pi_ref, enumeration_cap);
  std::vector<std::pair<double, double>> gaps;
  gaps.reserve(support.size());
  for (const auto& [tau, p] : support) {
    gaps.emplace_back(trajectory_return(candidate, tau) - trajectory_return(r_hat, tau), p);
  }
  return mean_absolute_pair_gap(std::move(gaps));
}

double exact_l1_loss(const EpisodicMdp& mdp, const TabularPolicy& pi_ref, const ValueTable& f,
                     const TransitionModel& p, const TabularPolicy& policy,
                     const RewardModel& r_hat, std::uint64_t enumeration_cap) {
  return exact_l1_loss(mdp, pi_ref, induced_reward(f, p, policy), r_hat, enumeration_cap);
}

WeightedTrajectoryPairs exact_pair_weights(const EpisodicMdp& mdp, const TabularPolicy& pi_ref,
                                           std::uint64_t enumeration_cap) {
  const auto support = trajectory_distribution(mdp, pi_ref, enumeration_cap);
  const std::uint64_t n = support.size();
  if (n * n > enumeration_cap) {
    throw EnumerationInfeasibleError("exact pair weights infeasible: support squared " +
                                     std::to_string(n * n) + " exceeds cap " +
                                     std::to_string(enumeration_cap));
  }
  WeightedTrajectoryPairs out;
  out.dims = mdp.dims();
  out.entries.reserve(n * n);
  for (const auto& [tau0, p0] : support) {
    for (const auto& [tau1, p1] : support) {
      out.entries.push_back({tau0, tau1, p0 * p1});
    }
  }
  out.step_marginals = visitation(mdp, pi_ref).state_action;
  return out;
}

double suboptimality(const EpisodicMdp& mdp, const TabularPolicy& policy) {
  const auto [pi_star, v_star] = optimal_policy(mdp);
  (void)pi_star;
  return v_star - initial_value(mdp, policy, mdp.true_reward());
}

double suboptimality(const EpisodicMdp& mdp, const MixturePolicy& mixture) {
  const auto [pi_star, v_star] = optimal_policy(mdp);
  (void)pi_star;
  return v_star - mixture_value(mixture, mdp, mdp.true_reward());
}

DecompositionTerms decomposition_witness(const EpisodicMdp& mdp, const TabularPolicy& pi_ref,
                                         const RewardModel& r_hat, const ValueTable& f_t,
                                         const TabularPolicy& pi_t) {
  const Dims dims = mdp.dims();
  check_dims_match(dims, pi_ref.dims(), "decomposition_witness(pi_ref)");
  check_dims_match(dims, r_hat.dims(), "decomposition_witness(r_hat)");
  check_dims_match(dims, f_t.dims(), "decomposition_witness(f_t)");
  check_dims_match(dims, pi_t.dims(), "decomposition_witness(pi_t)");

  const auto [pi_star, v_star] = optimal_policy(mdp);
  (void)v_star;
  const RewardModel r_star = mdp.true_reward();
  const RewardModel r_t = induced_reward(f_t, mdp, pi_t);

  DecompositionTerms terms;
  {
    const RewardModel gap = reward_difference(r_star, r_hat);
    terms.reward_error_term = initial_value(mdp, pi_star, gap) - initial_value(mdp, pi_ref, gap);
  }
  {
    const RewardModel gap = reward_difference(r_hat, r_t);
    terms.pessimism_term = initial_value(mdp, pi_star, gap) - initial_value(mdp, pi_ref, gap) -
                           initial_value(mdp, pi_t, r_star) + initial_value(mdp, pi_ref, r_star) +
                           initial_value(mdp, pi_t, r_t) - initial_value(mdp, pi_ref, r_t);
  }
  terms.regret_term = initial_value(mdp, pi_star, r_t) - initial_value(mdp, pi_t, r_t);
  terms.total = initial_value(mdp, pi_star, r_star) - initial_value(mdp, pi_t, r_star);
  return terms;
}

double average_npg_regret(const EpisodicMdp& mdp, const TabularPolicy& comparator,
                          const MixturePolicy& iterates, const std::vector<ValueTable>& fs) {
  if (iterates.iterates.empty() || iterates.iterates.size() != fs.size()) {
    throw std::invalid_argument("average_npg_regret: need one value table per iterate");
  }
  double total = 0.0;
  for (std::size_t t = 0; t < fs.size(); ++t) {
    const RewardModel r_t = induced_reward(fs[t], mdp, iterates.iterates[t]);
    total += initial_value(mdp, comparator, r_t) - initial_value(mdp, iterates.iterates[t], r_t);
  }
  return total / static_cast<double>(fs.size());
}

bool OracleReport::all_passed() const {
  return std::all_of(checks.begin(), checks.end(),
                     [](const OracleCheck& c) { return c.pass; });
}

OracleReport run_verification_suite(const EpisodicMdp& mdp, std::uint64_t seed) {
  const Dims dims = mdp.dims();
  const double bound = mdp.return_bound();
  SplitMix64 rng(seed);
  OracleReport report;

  const auto [pi_star, v_star] = optimal_policy(mdp);
  report.v_star = v_star;
  report.optimal_actions.reserve(static_cast<std::size_t>(dims.horizon) * dims.num_states);
  for (int h = 0; h < dims.horizon; ++h) {
    for (int s = 0; s < dims.num_states; ++s) {
      int best = 0;
      for (int a = 1; a < dims.num_actions; ++a) {
        if (pi_star.prob(h, s, a) > pi_star.prob(h, s, best)) best = a;
      }
      report.optimal_actions.push_back(static_cast<double>(best));
    }
  }

  auto add_check = [&](const std::string& name, double residual, double tolerance) {
    report.checks.push_back({name, residual <= tolerance, residual, tolerance});
  };

  // Construction already validated rows and boxes; record that explicitly so
  // a report written for a corrupt file can name the same check as failing.
  add_check("model-validation", 0.0, 0.0);

  try {  // Backward induction agrees with full enumeration.
    double residual = 0.0;
    const TabularPolicy uniform = TabularPolicy::uniform(dims);
    const RewardModel r_star = mdp.true_reward();
    for (int rep = 0; rep < 3; ++rep) {
      const TabularPolicy pi =
          rep == 0 ? uniform : random_full_support_policy(dims, rng);
      double enumerated = 0.0;
      double mass = 0.0;
      for (const auto& [tau, p] : trajectory_distribution(mdp, pi)) {
        enumerated += p * trajectory_return(r_star, tau);
        mass += p;
      }
      residual = std::max(residual, std::abs(mass - 1.0));
      residual = std::max(residual, std::abs(enumerated - initial_value(mdp, pi, r_star)));
    }
    add_check("value-vs-enumeration", residual, 1e-10);
  } catch (const EnumerationInfeasibleError& e) {
    log::info(std::string("skipping value-vs-enumeration: ") + e.what());
  }

  {  // Induced reward inverts policy evaluation.
    double residual = 0.0;
    for (int rep = 0; rep < 20; ++rep) {
      const TabularPolicy pi = random_full_support_policy(dims, rng);
      const ValueTable f = random_value_table(dims, bound, rng);
      const RewardModel induced = induced_reward(f, mdp, pi);
      const PolicyEvaluation eval = policy_evaluation(mdp, pi, induced);
      for (int i = 0; i < dims.table_size(); ++i) {
        residual = std::max(residual,
                            std::abs(eval.action_values.values()[i] - f.values()[i]));
      }
    }
    add_check("bellman-round-trip", residual, 1e-10);
  }

  {  // Advantage-form performance difference equals the value difference.
    double residual = 0.0;
    for (int rep = 0; rep < 20; ++rep) {
      const TabularPolicy a = random_full_support_policy(dims, rng);
      const TabularPolicy b = random_full_support_policy(dims, rng);
      const RewardModel r = random_box_reward(dims, mdp.step_reward_bound(), rng);
      const double direct = initial_value(mdp, a, r) - initial_value(mdp, b, r);
      residual = std::max(residual, std::abs(performance_difference(mdp, a, b, r) - direct));
    }
    add_check("performance-difference", residual, 1e-10);
  }

  {  // Occupancy layers are distributions.
    double residual = 0.0;
    for (int rep = 0; rep < 5; ++rep) {
      const VisitationDistributions d =
          visitation(mdp, random_full_support_policy(dims, rng));
      for (int h = 0; h < dims.horizon; ++h) {
        double layer = 0.0;
        for (int s = 0; s < dims.num_states; ++s) {
          for (int a = 0; a < dims.num_actions; ++a) layer += d.at(h, s, a);
        }
        residual = std::max(residual, std::abs(layer - 1.0));
      }
    }
    add_check("visitation-normalization", residual, 1e-10);
  }

  {  // Three-term suboptimality split is exact.
    double residual = 0.0;
    const TabularPolicy pi_ref = TabularPolicy::uniform(dims);
    for (int rep = 0; rep < 20; ++rep) {
      const RewardModel r_hat = random_box_reward(dims, mdp.step_reward_bound(), rng);
      const ValueTable f = random_value_table(dims, bound, rng);
      const TabularPolicy pi_t = random_full_support_policy(dims, rng);
      const DecompositionTerms terms = decomposition_witness(mdp, pi_ref, r_hat, f, pi_t);
      residual = std::max(
          residual, std::abs(terms.reward_error_term + terms.pessimism_term +
                             terms.regret_term - terms.total));
    }
    add_check("decomposition-identity", residual, 1e-9);
  }

  {  // Mirror-descent regret stays under its closed-form bound.
    const TabularPolicy pi_ref = TabularPolicy::uniform(dims);
    const LinkFunction link = LinkFunction::sigmoid(bound);
    const std::uint64_t data_seed = SplitMix64(seed).split(7)();
    const TrajectoryPairDataset traj = generate_traj_dataset(mdp, pi_ref, 400, data_seed);
    const PreferenceDataset pref = generate_pref_dataset(mdp, pi_ref, 400, link, data_seed + 1);
    const auto [r_hat, fit] = reward_mle(pref, link, dims, mdp.step_reward_bound());
    (void)fit;
    const TransitionModel p_hat = transition_mle(traj, dims);
    AppoConfig config;
    config.iterations = 25;
    config.lambda = 1.0;
    config.seed = seed;
    const AppoResult run = run_appo(config, traj, r_hat, p_hat, dims, bound);
    std::vector<ValueTable> fs;
    fs.reserve(run.log.records.size());
    for (const RunRecord& rec : run.log.records) fs.push_back(rec.f);
    const double regret = average_npg_regret(mdp, pi_star, run.mixture, fs);
    const double regret_bound =
        bound * dims.horizon *
        std::sqrt(std::log(static_cast<double>(dims.num_actions)) / (2.0 * config.iterations));
    add_check("npg-regret-bound", std::max(0.0, regret - regret_bound), 1e-9);
  }

  try {  // Step-level concentrability never exceeds trajectory-level.
    double residual = 0.0;
    for (int rep = 0; rep < 20; ++rep) {
      const TabularPolicy ref = random_full_support_policy(dims, rng);
      const TabularPolicy target = random_full_support_policy(dims, rng);
      const ConcentrabilityReport c = concentrability(mdp, ref, target);
      if (std::isfinite(c.c_traj)) {
        residual = std::max(residual, std::max(0.0, c.c_step - c.c_traj));
      }
    }
    {
      const ConcentrabilityReport c = concentrability(mdp, TabularPolicy::uniform(dims), pi_star);
      if (std::isfinite(c.c_traj)) {
        residual = std::max(residual, std::max(0.0, c.c_step - c.c_traj));
      }
    }
    add_check("step-vs-trajectory-concentrability", residual, 1e-9);

    // A policy against itself has unit concentrability.
    const ConcentrabilityReport self = concentrability(mdp, pi_star, pi_star);
    add_check("self-concentrability-unity",
              std::max(std::abs(self.c_traj - 1.0), std::abs(self.c_step - 1.0)), 1e-12);
  } catch (const EnumerationInfeasibleError& e) {
    log::info(std::string("skipping concentrability checks: ") + e.what());
  }

  return report;
}

}  // namespace appo
