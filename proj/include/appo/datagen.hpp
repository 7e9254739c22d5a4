#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "appo/mdp.hpp"
#include "appo/rng.hpp"

namespace appo {

/**
 * Monotone link Phi mapping a return difference to P(label = 1).
 *
 * Phi must be strictly increasing with Phi(x) + Phi(-x) = 1. kappa is
 * 1 / inf_{|x| <= R} Phi'(x) and measures how flat the link gets across the
 * feasible range of return differences; it is computed in closed form for
 * the sigmoid and on a dense grid for custom links.
 */
class LinkFunction {
 public:
  enum class Kind { sigmoid, custom_monotone };

  static LinkFunction sigmoid(double return_bound);
  static LinkFunction custom_monotone(std::function<double(double)> phi,
                                      std::function<double(double)> derivative,
                                      double return_bound);

  double operator()(double x) const { return phi_(x); }
  double derivative(double x) const { return dphi_(x); }
  double kappa() const { return kappa_; }
  double return_bound() const { return return_bound_; }
  Kind kind() const { return kind_; }

 private:
  LinkFunction(Kind kind, std::function<double(double)> phi,
               std::function<double(double)> derivative, double return_bound, double kappa);

  Kind kind_;
  std::function<double(double)> phi_;
  std::function<double(double)> dphi_;
  double return_bound_;
  double kappa_;
};

/// Where a dataset came from; serialized into dataset file headers.
struct DatasetProvenance {
  std::string policy_id;
  std::uint64_t seed = 0;
  std::string mdp_hash;
};

/// Unlabeled i.i.d. trajectory pairs drawn from the reference policy.
struct TrajectoryPairDataset {
  std::vector<std::pair<Trajectory, Trajectory>> pairs;
  DatasetProvenance provenance;

  std::size_t size() const { return pairs.size(); }

  /// First half / second half by record order; sizes differ by at most one.
  std::pair<TrajectoryPairDataset, TrajectoryPairDataset> split_halves() const;
};

struct PreferenceSample {
  Trajectory tau0;
  Trajectory tau1;
  int label = 0;  // 1 means tau1 preferred
};

/// Labeled comparison data; labels are Bernoulli(Phi(return(tau1) - return(tau0))).
struct PreferenceDataset {
  std::vector<PreferenceSample> samples;
  DatasetProvenance provenance;

  std::size_t size() const { return samples.size(); }
};

struct StepWitness {
  int h = 0;
  int state = 0;
  int action = 0;
};

/**
 * Distribution-shift coefficients of a target policy against a reference.
 *
 * c_traj is the worst trajectory-density ratio, c_step the worst per-step
 * state-action occupancy ratio; 0/0 counts as 0. A target trajectory outside
 * the reference support makes c_traj infinite; that is reported through
 * support_violation rather than raised as an error.
 */
struct ConcentrabilityReport {
  double c_traj = 1.0;
  double c_step = 1.0;
  Trajectory witness_trajectory;
  StepWitness witness_step;
  bool support_violation = false;
};

/// One episode sampled from the MDP under `policy`; deterministic given the
/// rng state.
Trajectory rollout(const EpisodicMdp& mdp, const TabularPolicy& policy, SplitMix64& rng);

/// n i.i.d. trajectory pairs from `pi_ref`. Pure function of
/// (mdp, policy, n, seed): equal inputs give bytewise-equal datasets.
TrajectoryPairDataset generate_traj_dataset(const EpisodicMdp& mdp,
                                            const TabularPolicy& pi_ref, int num_pairs,
                                            std::uint64_t seed);

/// n labeled pairs; labels drawn from the link applied to true-reward
/// return differences.
PreferenceDataset generate_pref_dataset(const EpisodicMdp& mdp, const TabularPolicy& pi_ref,
                                        int num_samples, const LinkFunction& link,
                                        std::uint64_t seed);

/// Exact concentrability of `pi_star` against `pi_ref` by full enumeration
/// (trajectory level) and occupancy recursion (step level).
ConcentrabilityReport concentrability(const EpisodicMdp& mdp, const TabularPolicy& pi_ref,
                                      const TabularPolicy& pi_star,
                                      std::uint64_t enumeration_cap = 1'000'000);

}  // namespace appo
