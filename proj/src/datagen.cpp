#include "appo/datagen.hpp"

#include <cmath>
#include <limits>

namespace appo {

namespace {

constexpr double kLinkIdentityTol = 1e-12;
constexpr int kLinkGridPoints = 4096;

void check_positive_count(int n, const char* what) {
  if (n < 1) {
    throw std::invalid_argument(std::string(what) + " must be at least 1, got " +
                                std::to_string(n));
  }
}

}  // namespace

LinkFunction::LinkFunction(Kind kind, std::function<double(double)> phi,
                           std::function<double(double)> derivative, double return_bound,
                           double kappa)
    : kind_(kind),
      phi_(std::move(phi)),
      dphi_(std::move(derivative)),
      return_bound_(return_bound),
      kappa_(kappa) {}

LinkFunction LinkFunction::sigmoid(double return_bound) {
  if (!(return_bound > 0.0) || !std::isfinite(return_bound)) {
    throw std::invalid_argument("link return_bound must be positive and finite");
  }
  auto phi = [](double x) { return 1.0 / (1.0 + std::exp(-x)); };
  auto dphi = [phi](double x) {
    const double p = phi(x);
    return p * (1.0 - p);
  };
  // Phi' is even and decreasing in |x|, so the infimum over [-R, R] sits at R.
  const double kappa = 1.0 / dphi(return_bound);
  return LinkFunction(Kind::sigmoid, phi, dphi, return_bound, kappa);
}

LinkFunction LinkFunction::custom_monotone(std::function<double(double)> phi,
                                           std::function<double(double)> derivative,
                                           double return_bound) {
  if (!(return_bound > 0.0) || !std::isfinite(return_bound)) {
    throw std::invalid_argument("link return_bound must be positive and finite");
  }
  if (!phi || !derivative) {
    throw std::invalid_argument("custom link needs both Phi and its derivative");
  }
  double min_slope = std::numeric_limits<double>::infinity();
  double prev = -std::numeric_limits<double>::infinity();
  for (int i = 0; i <= kLinkGridPoints; ++i) {
    const double x = -return_bound + 2.0 * return_bound * i / kLinkGridPoints;
    const double value = phi(x);
    const double slope = derivative(x);
    if (!std::isfinite(value) || value < 0.0 || value > 1.0) {
      throw std::invalid_argument("custom link leaves [0, 1] at x=" + std::to_string(x));
    }
    if (value <= prev) {
      throw std::invalid_argument("custom link is not strictly increasing at x=" +
                                  std::to_string(x));
    }
    if (!std::isfinite(slope) || slope <= 0.0) {
      throw std::invalid_argument("custom link derivative not positive at x=" +
                                  std::to_string(x));
    }
    if (std::abs(value + phi(-x) - 1.0) > kLinkIdentityTol) {
      throw std::invalid_argument("custom link violates Phi(x) + Phi(-x) = 1 at x=" +
                                  std::to_string(x));
    }
    min_slope = std::min(min_slope, slope);
    prev = value;
  }
  return LinkFunction(Kind::custom_monotone, std::move(phi), std::move(derivative),
                      return_bound, 1.0 / min_slope);
}

std::pair<TrajectoryPairDataset, TrajectoryPairDataset> TrajectoryPairDataset::split_halves()
    const {
  if (pairs.size() < 2) {
    throw std::invalid_argument("cannot split a dataset with fewer than 2 pairs");
  }
  const std::size_t cut = pairs.size() / 2;
  TrajectoryPairDataset first{{pairs.begin(), pairs.begin() + cut}, provenance};
  TrajectoryPairDataset second{{pairs.begin() + cut, pairs.end()}, provenance};
  return {std::move(first), std::move(second)};
}

Trajectory rollout(const EpisodicMdp& mdp, const TabularPolicy& policy, SplitMix64& rng) {
  if (!(mdp.dims() == policy.dims())) {
    throw std::invalid_argument("rollout: policy dimensions do not match the MDP");
  }
  Trajectory out;
  out.steps.reserve(mdp.horizon());
  int s = mdp.initial_state();
  for (int h = 0; h < mdp.horizon(); ++h) {
    const int a = rng.categorical(policy.row(h, s));
    out.steps.push_back({s, a});
    if (h + 1 < mdp.horizon()) {
      s = rng.categorical(mdp.transition_row(h, s, a));
    }
  }
  return out;
}

TrajectoryPairDataset generate_traj_dataset(const EpisodicMdp& mdp,
                                            const TabularPolicy& pi_ref, int num_pairs,
                                            std::uint64_t seed) {
  check_positive_count(num_pairs, "num_pairs");
  SplitMix64 rng(seed);
  TrajectoryPairDataset out;
  out.pairs.reserve(num_pairs);
  for (int i = 0; i < num_pairs; ++i) {
    Trajectory tau0 = rollout(mdp, pi_ref, rng);
    Trajectory tau1 = rollout(mdp, pi_ref, rng);
    out.pairs.emplace_back(std::move(tau0), std::move(tau1));
  }
  out.provenance = {policy_fingerprint(pi_ref), seed, mdp_fingerprint(mdp)};
  return out;
}

PreferenceDataset generate_pref_dataset(const EpisodicMdp& mdp, const TabularPolicy& pi_ref,
                                        int num_samples, const LinkFunction& link,
                                        std::uint64_t seed) {
  check_positive_count(num_samples, "num_samples");
  SplitMix64 rng(seed);
  const RewardModel reward = mdp.true_reward();
  PreferenceDataset out;
  out.samples.reserve(num_samples);
  for (int i = 0; i < num_samples; ++i) {
    Trajectory tau0 = rollout(mdp, pi_ref, rng);
    Trajectory tau1 = rollout(mdp, pi_ref, rng);
    const double p = link(trajectory_return(reward, tau1) - trajectory_return(reward, tau0));
    const int label = rng.bernoulli(p) ? 1 : 0;
    out.samples.push_back({std::move(tau0), std::move(tau1), label});
  }
  out.provenance = {policy_fingerprint(pi_ref), seed, mdp_fingerprint(mdp)};
  return out;
}

ConcentrabilityReport concentrability(const EpisodicMdp& mdp, const TabularPolicy& pi_ref,
                                      const TabularPolicy& pi_star,
                                      std::uint64_t enumeration_cap) {
  const Dims dims = mdp.dims();
  if (!(dims == pi_ref.dims()) || !(dims == pi_star.dims())) {
    throw std::invalid_argument("concentrability: policy dimensions do not match the MDP");
  }

  ConcentrabilityReport report;
  report.c_traj = 0.0;
  report.c_step = 0.0;

  // Trajectory level: ratios over every kernel-reachable trajectory. A
  // trajectory both policies miss contributes 0/0 = 0.
  for (const Trajectory& tau : enumerate_trajectories(mdp, enumeration_cap)) {
    const double p_star = trajectory_probability(mdp, pi_star, tau);
    if (p_star == 0.0) continue;
    const double p_ref = trajectory_probability(mdp, pi_ref, tau);
    double ratio;
    if (p_ref == 0.0) {
      ratio = std::numeric_limits<double>::infinity();
      report.support_violation = true;
    } else {
      ratio = p_star / p_ref;
    }
    if (ratio > report.c_traj) {
      report.c_traj = ratio;
      report.witness_trajectory = tau;
    }
  }

  // Step level: per-layer occupancy ratios.
  const VisitationDistributions d_star = visitation(mdp, pi_star);
  const VisitationDistributions d_ref = visitation(mdp, pi_ref);
  for (int h = 0; h < dims.horizon; ++h) {
    for (int s = 0; s < dims.num_states; ++s) {
      for (int a = 0; a < dims.num_actions; ++a) {
        const double mass_star = d_star.at(h, s, a);
        if (mass_star == 0.0) continue;
        const double mass_ref = d_ref.at(h, s, a);
        const double ratio = mass_ref == 0.0 ? std::numeric_limits<double>::infinity()
                                             : mass_star / mass_ref;
        if (ratio > report.c_step) {
          report.c_step = ratio;
          report.witness_step = {h, s, a};
        }
      }
    }
  }
  return report;
}

}  // namespace appo
