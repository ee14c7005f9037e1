#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <optional>
#include <vector>

#include "multiref/objectives_gaps.hpp"
#include "multiref/preference_rewards.hpp"
#include "multiref/reference_mixtures.hpp"

namespace multiref {

struct SweepConfig {
  Eigen::Index num_prompts = 2;
  Eigen::Index num_responses = 8;
  std::size_t k = 2;
  double gamma = 1.0;
  double r_max = 1.0;
  std::size_t class_size = 256;
  std::size_t grid_points = 16;
  std::vector<std::size_t> n_values{64, 256, 1024, 4096, 16384};
  std::size_t trials = 200;
  std::uint64_t seed = 20240601;
  KlMode mode = KlMode::Reverse;
  std::optional<SimplexWeights> weights;  // uniform when unset

  void validate() const;
  SimplexWeights effective_weights() const;
};

/// A member ensemble with `k` references whose rows are
/// (1 - uniform_mix) * Dirichlet(1) + uniform_mix * uniform.
ReferenceEnsemble random_ensemble(Eigen::Index num_prompts, Eigen::Index num_responses, std::size_t k,
                                  const SimplexWeights& weights, Rng& rng, double uniform_mix = 0.0);

/// Everything a trial needs besides the preference data.
struct TrialInstance {
  ReferenceEnsemble ensemble;
  RewardTable r_true;
  RewardClass reward_class;  // r_true at index 0
  PromptDistribution rho;    // uniform over prompts
};

/// Draws the ensemble (Dirichlet(1) rows), the true reward (uniform on the
/// lattice) and the rest of the lattice class from one stream.
TrialInstance make_trial_instance(const SweepConfig& config, std::uint64_t instance_seed);

struct TrialSeeds {
  std::uint64_t instance = 0;
  std::uint64_t data = 0;
};

/// Instance stream depends on (seed, trial) only, so every n sees the same
/// instances; the data stream depends on (seed, n index, trial).
TrialSeeds trial_seeds(std::uint64_t seed, std::size_t n_index, std::size_t trial);

struct TrialRecord {
  std::size_t n = 0;
  std::size_t trial = 0;
  double suboptimality_gap = 0.0;
  double optimality_gap = 0.0;
  bool mle_hit = false;
  std::size_t mle_index = 0;
  std::uint64_t seed_used = 0;  // the data stream seed
};

/// One run of the reverse-KL pipeline: geometric reference, n preferences
/// sampled from it, MLE over the class, both closed-form policies, and the
/// gaps averaged over rho.
TrialRecord run_pipeline_rkl(const SweepConfig& config, std::size_t n, const TrialSeeds& seeds);

/// Forward-KL analogue on the arithmetic reference.
TrialRecord run_pipeline_fkl(const SweepConfig& config, std::size_t n, const TrialSeeds& seeds);

struct SweepAggregate {
  std::size_t n = 0;
  double mean_subopt = 0.0;
  double se_subopt = 0.0;
  double mean_opt = 0.0;
  double se_opt = 0.0;
  double hit_rate = 0.0;
  double p90_subopt = 0.0;
};

struct LogLogFit {
  double slope = 0.0;
  double intercept = 0.0;
  double r_squared = 0.0;
  std::vector<std::size_t> used_n;
  std::vector<std::size_t> saturated_n;  // means at or below 1e-12, left out of the fit
};

/// Mean gaps at or below this are treated as saturated.
inline constexpr double kSaturationThreshold = 1e-12;

/// Ordinary least squares of log(mean) on log(n) over the unsaturated points.
/// Throws InsufficientData when fewer than three remain.
LogLogFit fit_log_log(const std::vector<std::size_t>& n_values, const std::vector<double>& means);

/// Per-n summaries of trial records ordered by (n index, trial).
std::vector<SweepAggregate> aggregate_records(const std::vector<std::size_t>& n_values, std::size_t trials,
                                              const std::vector<TrialRecord>& records);

struct SweepResult {
  SweepConfig config;
  std::vector<TrialRecord> records;  // ordered by (n index, trial)
  std::vector<SweepAggregate> aggregates;
  LogLogFit fit;
};

/// Runs every (n, trial) pipeline on up to `threads` workers (0: all cores)
/// and aggregates, leaving `fit` empty. The result does not depend on the
/// thread count.
SweepResult run_sweep_trials(const SweepConfig& config, unsigned threads = 0);

/// run_sweep_trials followed by the log-log fit (InsufficientData when fewer
/// than three n values are unsaturated).
SweepResult sweep(const SweepConfig& config, unsigned threads = 0);

struct AlphaSearchResult {
  SimplexWeights weights;
  double value = 0.0;
  std::size_t evaluated = 0;
};

/// Strictly positive compositions of `total` into `parts`, in lexicographic
/// order.
std::vector<std::vector<std::size_t>> positive_compositions(std::size_t total, std::size_t parts);

/// Maximizes (1/gamma) log sum_y prod_i pi_i(y|x)^alpha_i exp(gamma r(x,y))
/// over alpha on the open-simplex lattice {c / (grid_resolution + 1)} with c a
/// strictly positive composition. Ties go to the lexicographically smallest
/// composition.
AlphaSearchResult optimal_alpha_search(const std::vector<ConditionalPolicy>& members,
                                       const Eigen::Ref<const Eigen::MatrixXd>& r, double gamma, Eigen::Index x,
                                       std::size_t grid_resolution);

}  // namespace multiref
