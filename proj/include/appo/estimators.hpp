#pragma once

#include <utility>
#include <vector>

#include "appo/datagen.hpp"
#include "appo/mdp.hpp"
#include "appo/rng.hpp"

namespace appo {

/**
 * Tabular transition estimate with Laplace smoothing.
 *
 * Row (h, s, a) is (count(s') + alpha) / (count_total + alpha * S); rows with
 * no evidence (including all rows of the final step, which no transition can
 * witness) are uniform. Per-(h, s, a) visit counts of the fitting data are
 * retained; step-level counts cover every step, transition counts only the
 * first H-1.
 */
class TransitionModel {
 public:
  TransitionModel(Dims dims, std::vector<double> kernels, std::vector<double> visit_counts,
                  double alpha);

  static TransitionModel uniform(Dims dims);
  /// Wraps the true kernels of an MDP (visit counts zero, alpha zero).
  static TransitionModel from_mdp(const EpisodicMdp& mdp);

  const Dims& dims() const { return dims_; }
  double alpha() const { return alpha_; }
  TransitionKernels kernels() const { return {dims_, kernels_.data()}; }
  std::span<const double> row(int h, int s, int a) const { return kernels().row(h, s, a); }
  double visit_count(int h, int s, int a) const { return visit_counts_[dims_.index(h, s, a)]; }
  const std::vector<double>& visit_counts() const { return visit_counts_; }

 private:
  Dims dims_;
  std::vector<double> kernels_;       // H * S * A * S, rows sum to one
  std::vector<double> visit_counts_;  // H * S * A
  double alpha_;
};

/// Convergence record of a reward fit. Losses are mean per sample and
/// recorded once per accepted iterate, so the history is non-increasing.
struct MleFitReport {
  double final_loss = 0.0;
  int iterations = 0;
  double grad_inf_norm = 0.0;
  bool converged = false;
  bool clamped_likelihood = false;  // a log argument hit the underflow floor
  std::vector<double> loss_history;
};

struct RewardMleOptions {
  int max_iterations = 5000;
  double grad_tolerance = 1e-6;
  double initial_step = 0.5;
};

/**
 * Maximum-likelihood tabular reward from labeled trajectory pairs.
 *
 * Minimizes the mean negative log-likelihood of labels under
 * P(label = 1) = Phi(return(tau1) - return(tau0)) by projected gradient
 * descent on the box [0, step_reward_bound] per entry: fixed starting step
 * halved whenever a trial fails to decrease the loss, stopping when the
 * projected-gradient infinity norm drops below tolerance. Link values are
 * floored at 1e-12 inside logs; hitting the floor sets a report flag.
 */
std::pair<RewardModel, MleFitReport> reward_mle(const PreferenceDataset& data,
                                                const LinkFunction& link, Dims dims,
                                                double step_reward_bound,
                                                const RewardMleOptions& options = {});

/// Mean negative log-likelihood of `data` under a candidate reward.
double preference_nll(const RewardModel& reward, const PreferenceDataset& data,
                      const LinkFunction& link);

/// Count-based transition fit over both members of every pair.
TransitionModel transition_mle(const TrajectoryPairDataset& data, Dims dims,
                               double alpha = 1.0);

/**
 * Monte-Carlo action-value estimate of pi_t under `reward`.
 *
 * For each step h, `num_rollouts` episodes are simulated with actions from
 * pi_ref before h, from the even mixture of pi_ref and pi_t at h, and from
 * pi_t after h; the estimate at (h, s, a) is the mean return-to-go over
 * episodes that hit that cell. Cells no episode hits fall back to half the
 * return bound.
 */
ValueTable pe_subroutine(const EpisodicMdp& mdp, const TabularPolicy& pi_ref,
                         const TabularPolicy& pi_t, const RewardModel& reward,
                         int num_rollouts, SplitMix64& rng);

/// Adversarial reward edit: entries the fitting data never visited are raised
/// to the per-step maximum, modeling an estimator that is optimistic exactly
/// where it has no evidence.
RewardModel corrupt_reward_optimistic(const RewardModel& reward,
                                      const TransitionModel& visits,
                                      double step_reward_bound);

}  // namespace appo
