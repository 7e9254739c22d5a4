#include "appo/estimators.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "appo/logging.hpp"

namespace appo {

namespace {

constexpr double kLogFloor = 1e-12;
constexpr double kMinStep = 1e-12;

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
      throw std::invalid_argument(std::string(what) + ": trajectory step out of range: state=" +
                                  std::to_string(step.state) +
                                  " action=" + std::to_string(step.action));
    }
  }
}

// One deduplicated preference group: the sparse return-difference coefficient
// vector e (so that delta = <e, r>), the label, and the sample mass.
struct PreferenceGroup {
  std::vector<std::pair<int, double>> coeffs;
  int label = 0;
  double weight = 0.0;
};

std::vector<int> group_key(const PreferenceSample& sample) {
  std::vector<int> key;
  key.reserve(4 * sample.tau0.length() + 1);
  for (const StateAction& step : sample.tau0.steps) {
    key.push_back(step.state);
    key.push_back(step.action);
  }
  for (const StateAction& step : sample.tau1.steps) {
    key.push_back(step.state);
    key.push_back(step.action);
  }
  key.push_back(sample.label);
  return key;
}

std::vector<std::pair<int, double>> return_difference_coeffs(const Dims& dims,
                                                             const Trajectory& tau0,
                                                             const Trajectory& tau1) {
  std::map<int, double> acc;
  for (int h = 0; h < dims.horizon; ++h) {
    acc[dims.index(h, tau1.steps[h].state, tau1.steps[h].action)] += 1.0;
    acc[dims.index(h, tau0.steps[h].state, tau0.steps[h].action)] -= 1.0;
  }
  std::vector<std::pair<int, double>> out;
  for (const auto& [idx, coef] : acc) {
    if (coef != 0.0) out.emplace_back(idx, coef);
  }
  return out;
}

std::vector<PreferenceGroup> deduplicate(const PreferenceDataset& data, const Dims& dims) {
  std::map<std::vector<int>, std::pair<std::size_t, double>> index;
  std::vector<const PreferenceSample*> representatives;
  for (const PreferenceSample& sample : data.samples) {
    if (sample.label != 0 && sample.label != 1) {
      throw std::invalid_argument("preference label must be 0 or 1, got " +
                                  std::to_string(sample.label));
    }
    check_trajectory_in_dims(dims, sample.tau0, "reward_mle");
    check_trajectory_in_dims(dims, sample.tau1, "reward_mle");
    auto [it, inserted] = index.try_emplace(group_key(sample),
                                            std::make_pair(representatives.size(), 0.0));
    if (inserted) representatives.push_back(&sample);
    it->second.second += 1.0;
  }
  const double total = static_cast<double>(data.samples.size());
  std::vector<PreferenceGroup> groups(representatives.size());
  for (const auto& [key, slot] : index) {
    const PreferenceSample& sample = *representatives[slot.first];
    groups[slot.first] = {return_difference_coeffs(dims, sample.tau0, sample.tau1),
                          sample.label, slot.second / total};
  }
  return groups;
}

double clamped_log(double value, bool* clamped) {
  if (value < kLogFloor) {
    *clamped = true;
    value = kLogFloor;
  }
  return std::log(value);
}

double group_loss(const std::vector<PreferenceGroup>& groups, const LinkFunction& link,
                  const std::vector<double>& r, bool* clamped) {
  double loss = 0.0;
  for (const PreferenceGroup& g : groups) {
    double delta = 0.0;
    for (const auto& [idx, coef] : g.coeffs) delta += coef * r[idx];
    const double p = g.label == 1 ? link(delta) : link(-delta);
    loss -= g.weight * clamped_log(p, clamped);
  }
  return loss;
}

void group_gradient(const std::vector<PreferenceGroup>& groups, const LinkFunction& link,
                    const std::vector<double>& r, std::vector<double>* grad) {
  std::fill(grad->begin(), grad->end(), 0.0);
  for (const PreferenceGroup& g : groups) {
    double delta = 0.0;
    for (const auto& [idx, coef] : g.coeffs) delta += coef * r[idx];
    // d/d delta of -log P(label): the clamp floor mirrors the loss.
    double factor;
    if (g.label == 1) {
      factor = -link.derivative(delta) / std::max(link(delta), kLogFloor);
    } else {
      factor = link.derivative(-delta) / std::max(link(-delta), kLogFloor);
    }
    for (const auto& [idx, coef] : g.coeffs) (*grad)[idx] += g.weight * factor * coef;
  }
}

}  // namespace

TransitionModel::TransitionModel(Dims dims, std::vector<double> kernels,
                                 std::vector<double> visit_counts, double alpha)
    : dims_(dims),
      kernels_(std::move(kernels)),
      visit_counts_(std::move(visit_counts)),
      alpha_(alpha) {
  const std::size_t kernel_size =
      static_cast<std::size_t>(dims_.table_size()) * dims_.num_states;
  if (kernels_.size() != kernel_size) {
    throw std::invalid_argument("transition model has " + std::to_string(kernels_.size()) +
                                " kernel entries, expected " + std::to_string(kernel_size));
  }
  if (visit_counts_.size() != static_cast<std::size_t>(dims_.table_size())) {
    throw std::invalid_argument("transition model visit counts sized " +
                                std::to_string(visit_counts_.size()) + ", expected " +
                                std::to_string(dims_.table_size()));
  }
  if (alpha_ < 0.0 || !std::isfinite(alpha_)) {
    throw std::invalid_argument("smoothing alpha must be finite and nonnegative");
  }
  for (int h = 0; h < dims_.horizon; ++h) {
    for (int s = 0; s < dims_.num_states; ++s) {
      for (int a = 0; a < dims_.num_actions; ++a) {
        double sum = 0.0;
        for (double p : row(h, s, a)) {
          if (!std::isfinite(p) || p < 0.0) {
            throw std::invalid_argument("transition model entry negative or non-finite at (h=" +
                                        std::to_string(h) + ", s=" + std::to_string(s) +
                                        ", a=" + std::to_string(a) + ")");
          }
          sum += p;
        }
        if (std::abs(sum - 1.0) > 1e-9) {
          throw std::invalid_argument("transition model row (h=" + std::to_string(h) + ", s=" +
                                      std::to_string(s) + ", a=" + std::to_string(a) +
                                      ") sums to " + std::to_string(sum));
        }
      }
    }
  }
}

TransitionModel TransitionModel::uniform(Dims dims) {
  const std::size_t kernel_size = static_cast<std::size_t>(dims.table_size()) * dims.num_states;
  return TransitionModel(dims, std::vector<double>(kernel_size, 1.0 / dims.num_states),
                         std::vector<double>(dims.table_size(), 0.0), 0.0);
}

TransitionModel TransitionModel::from_mdp(const EpisodicMdp& mdp) {
  const Dims dims = mdp.dims();
  const std::size_t kernel_size = static_cast<std::size_t>(dims.table_size()) * dims.num_states;
  std::vector<double> kernels;
  kernels.reserve(kernel_size);
  for (int h = 0; h < dims.horizon; ++h) {
    for (int s = 0; s < dims.num_states; ++s) {
      for (int a = 0; a < dims.num_actions; ++a) {
        const auto row = mdp.transition_row(h, s, a);
        kernels.insert(kernels.end(), row.begin(), row.end());
      }
    }
  }
  return TransitionModel(dims, std::move(kernels),
                         std::vector<double>(dims.table_size(), 0.0), 0.0);
}

std::pair<RewardModel, MleFitReport> reward_mle(const PreferenceDataset& data,
                                                const LinkFunction& link, Dims dims,
                                                double step_reward_bound,
                                                const RewardMleOptions& options) {
  if (data.samples.empty()) {
    throw std::invalid_argument("reward_mle: dataset is empty");
  }
  if (!(step_reward_bound > 0.0)) {
    throw std::invalid_argument("reward_mle: step_reward_bound must be positive");
  }
  const std::vector<PreferenceGroup> groups = deduplicate(data, dims);
  const int n = dims.table_size();

  std::vector<double> x(n, step_reward_bound / 2.0);
  std::vector<double> grad(n, 0.0);
  std::vector<double> trial(n, 0.0);

  MleFitReport report;
  double loss = group_loss(groups, link, x, &report.clamped_likelihood);
  report.loss_history.push_back(loss);
  double step = options.initial_step;

  auto project = [&](double v) { return std::clamp(v, 0.0, step_reward_bound); };

  for (int iter = 0; iter < options.max_iterations; ++iter) {
    group_gradient(groups, link, x, &grad);
    // Box-aware optimality measure: distance moved by a unit projected step.
    double pg_norm = 0.0;
    for (int i = 0; i < n; ++i) {
      pg_norm = std::max(pg_norm, std::abs(x[i] - project(x[i] - grad[i])));
    }
    report.grad_inf_norm = pg_norm;
    if (pg_norm <= options.grad_tolerance) {
      report.converged = true;
      break;
    }
    bool accepted = false;
    while (step >= kMinStep) {
      for (int i = 0; i < n; ++i) trial[i] = project(x[i] - step * grad[i]);
      const double trial_loss = group_loss(groups, link, trial, &report.clamped_likelihood);
      if (trial_loss < loss) {
        x.swap(trial);
        loss = trial_loss;
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    report.iterations = iter + 1;
    if (!accepted) break;  // step underflow: no descent direction at this scale
    report.loss_history.push_back(loss);
  }

  report.final_loss = loss;
  if (report.clamped_likelihood) {
    log::warn("reward_mle: link values hit the log floor; likelihood was clamped");
  }
  return {RewardModel(dims, std::move(x)), report};
}

double preference_nll(const RewardModel& reward, const PreferenceDataset& data,
                      const LinkFunction& link) {
  if (data.samples.empty()) {
    throw std::invalid_argument("preference_nll: dataset is empty");
  }
  bool clamped = false;
  double loss = 0.0;
  for (const PreferenceSample& sample : data.samples) {
    const double delta =
        trajectory_return(reward, sample.tau1) - trajectory_return(reward, sample.tau0);
    const double p = sample.label == 1 ? link(delta) : link(-delta);
    loss -= clamped_log(p, &clamped);
  }
  return loss / static_cast<double>(data.samples.size());
}

TransitionModel transition_mle(const TrajectoryPairDataset& data, Dims dims, double alpha) {
  if (data.pairs.empty()) {
    throw std::invalid_argument("transition_mle: dataset is empty");
  }
  if (alpha < 0.0 || !std::isfinite(alpha)) {
    throw std::invalid_argument("transition_mle: alpha must be finite and nonnegative");
  }
  const int S = dims.num_states;
  std::vector<double> visit_counts(dims.table_size(), 0.0);
  std::vector<double> transition_counts(static_cast<std::size_t>(dims.table_size()) * S, 0.0);

  auto absorb = [&](const Trajectory& tau) {
    check_trajectory_in_dims(dims, tau, "transition_mle");
    for (int h = 0; h < dims.horizon; ++h) {
      const StateAction& step = tau.steps[h];
      visit_counts[dims.index(h, step.state, step.action)] += 1.0;
      if (h + 1 < dims.horizon) {
        const std::size_t base =
            static_cast<std::size_t>(dims.index(h, step.state, step.action)) * S;
        transition_counts[base + tau.steps[h + 1].state] += 1.0;
      }
    }
  };
  for (const auto& [tau0, tau1] : data.pairs) {
    absorb(tau0);
    absorb(tau1);
  }

  std::vector<double> kernels(transition_counts.size(), 0.0);
  for (int idx = 0; idx < dims.table_size(); ++idx) {
    const std::size_t base = static_cast<std::size_t>(idx) * S;
    double total = 0.0;
    for (int sp = 0; sp < S; ++sp) total += transition_counts[base + sp];
    const double denom = total + alpha * S;
    for (int sp = 0; sp < S; ++sp) {
      kernels[base + sp] =
          denom > 0.0 ? (transition_counts[base + sp] + alpha) / denom : 1.0 / S;
    }
  }
  return TransitionModel(dims, std::move(kernels), std::move(visit_counts), alpha);
}

ValueTable pe_subroutine(const EpisodicMdp& mdp, const TabularPolicy& pi_ref,
                         const TabularPolicy& pi_t, const RewardModel& reward,
                         int num_rollouts, SplitMix64& rng) {
  const Dims dims = mdp.dims();
  if (!(dims == pi_ref.dims()) || !(dims == pi_t.dims()) || !(dims == reward.dims())) {
    throw std::invalid_argument("pe_subroutine: dimension mismatch between inputs");
  }
  if (num_rollouts < 1) {
    throw std::invalid_argument("pe_subroutine: num_rollouts must be at least 1");
  }

  // Even mixture used only at the step being estimated.
  std::vector<double> mixed(dims.table_size());
  for (int i = 0; i < dims.table_size(); ++i) {
    mixed[i] = 0.5 * (pi_ref.values()[i] + pi_t.values()[i]);
  }
  const TabularPolicy pi_mixed(dims, std::move(mixed));

  std::vector<double> sums(dims.table_size(), 0.0);
  std::vector<double> counts(dims.table_size(), 0.0);
  for (int h0 = 0; h0 < dims.horizon; ++h0) {
    for (int k = 0; k < num_rollouts; ++k) {
      int s = mdp.initial_state();
      int cell = -1;
      double togo = 0.0;
      for (int j = 0; j < dims.horizon; ++j) {
        const TabularPolicy& actor = j < h0 ? pi_ref : (j == h0 ? pi_mixed : pi_t);
        const int a = rng.categorical(actor.row(j, s));
        if (j == h0) cell = dims.index(j, s, a);
        if (j >= h0) togo += reward.at(j, s, a);
        if (j + 1 < dims.horizon) s = rng.categorical(mdp.transition_row(j, s, a));
      }
      sums[cell] += togo;
      counts[cell] += 1.0;
    }
  }

  const double fallback = mdp.return_bound() / 2.0;
  std::vector<double> q(dims.table_size());
  for (int i = 0; i < dims.table_size(); ++i) {
    q[i] = counts[i] > 0.0 ? sums[i] / counts[i] : fallback;
  }
  return ValueTable(dims, std::move(q));
}

RewardModel corrupt_reward_optimistic(const RewardModel& reward, const TransitionModel& visits,
                                      double step_reward_bound) {
  if (!(reward.dims() == visits.dims())) {
    throw std::invalid_argument("corrupt_reward_optimistic: dimension mismatch");
  }
  std::vector<double> values = reward.values();
  int edited = 0;
  for (int i = 0; i < reward.dims().table_size(); ++i) {
    if (visits.visit_counts()[i] == 0.0) {
      values[i] = step_reward_bound;
      ++edited;
    }
  }
  if (edited > 0) {
    log::info("corrupt_reward_optimistic: raised " + std::to_string(edited) +
              " unvisited entries to " + std::to_string(step_reward_bound));
  }
  return RewardModel(reward.dims(), std::move(values));
}

}  // namespace appo
