#pragma once

#include <Eigen/Dense>

#include <vector>

#include "multiref/objectives_gaps.hpp"
#include "multiref/preference_rewards.hpp"
#include "multiref/reference_mixtures.hpp"

namespace multiref {

/// Smallest probability used when initializing logits from a reference or
/// evaluating ref/pi ratios with flooring enabled.
inline constexpr double kProbabilityFloor = 1e-12;

/// Tabular policy: row-wise softmax of a logit table.
struct TabularPolicyParams {
  Eigen::MatrixXd logits;

  /// Logits log(ref), with zero entries clamped to log(1e-12) when `clamp` is
  /// set and left at -inf otherwise.
  static TabularPolicyParams from_reference(const ConditionalPolicy& ref, bool clamp = true);

  Eigen::MatrixXd log_policy() const;
  ConditionalPolicy policy() const;
};

struct DpoTrainConfig {
  double gamma = 1.0;
  double step_size = 1.0;
  std::size_t max_iters = 1000;
  double grad_tolerance = 1e-8;
  KlMode mode = KlMode::Reverse;
  /// Floor evaluated probabilities at 1e-12 in the forward loss. Turning it
  /// off makes a zero probability on a dataset response an error.
  bool floor_probabilities = true;

  void validate() const;
};

struct LossDiagnostics {
  std::size_t floored_evaluations = 0;
};

/// sum_i log sigma((1/gamma) log(pi/ref)(y_w) - (1/gamma) log(pi/ref)(y_l)).
/// `ref` is the escort reference of the ensemble.
double dpo_loss_rkl(const TabularPolicyParams& params, const ConditionalPolicy& ref, const PreferenceDataset& data,
                    double gamma);

/// sum_i log sigma((1/gamma)(ref/pi)(y_l) - (1/gamma)(ref/pi)(y_w)).
/// `ref` is the arithmetic reference of the ensemble.
double dpo_loss_fkl(const TabularPolicyParams& params, const ConditionalPolicy& ref, const PreferenceDataset& data,
                    double gamma, bool floor_probabilities = true, LossDiagnostics* diagnostics = nullptr);

struct LossAndGradient {
  double loss = 0.0;
  Eigen::MatrixXd gradient;  // d loss / d logits
  std::size_t floored_evaluations = 0;
};

LossAndGradient dpo_loss_and_gradient(const TabularPolicyParams& params, const ConditionalPolicy& ref,
                                      const PreferenceDataset& data, double gamma, KlMode mode,
                                      bool floor_probabilities = true);

struct TraceEntry {
  std::size_t iter = 0;
  double loss = 0.0;
  double grad_norm = 0.0;  // sup norm
  double step_size = 0.0;  // accepted step; 0 on the converged iteration
};

struct DpoTrainResult {
  TabularPolicyParams params;
  std::vector<TraceEntry> trace;
  bool converged = false;
  bool stalled = false;  // no halving gave a strict increase; the loss is flat to rounding
  std::size_t floored_evaluations = 0;
};

/// Full-batch gradient ascent with step halving (at most 30 halvings per
/// iteration). A step is kept only if it strictly increases the loss. Stops
/// when the gradient sup-norm drops to grad_tolerance, when no halving yields
/// an increase, or after max_iters.
DpoTrainResult dpo_train(const TabularPolicyParams& init, const ConditionalPolicy& ref, const PreferenceDataset& data,
                         const DpoTrainConfig& config);

struct ImplicitRewardRanges {
  double b_max = 0.0;
  double d_max = 0.0;
};

/// Largest spread over responses of (1/gamma) log(pi/ref) and of
/// (1/gamma) ref/pi, maximized over prompts.
ImplicitRewardRanges implicit_reward_ranges(const ConditionalPolicy& pi, const ConditionalPolicy& ref, double gamma);
inline ImplicitRewardRanges implicit_reward_ranges(const TabularPolicyParams& params, const ConditionalPolicy& ref,
                                                   double gamma) {
  return implicit_reward_ranges(params.policy(), ref, gamma);
}

}  // namespace multiref
