#pragma once

#include <Eigen/Dense>

#include "multiref/reference_mixtures.hpp"
#include "multiref/preference_rewards.hpp"

namespace multiref {

/// Reverse-KL solution: pi(y|x) = ref(y|x) exp(gamma r(x,y)) / Z(x).
struct RklSolution {
  double gamma = 1.0;
  ConditionalPolicy policy;
  Eigen::VectorXd log_partition;    // log Z(x) against the (escort) reference
  Eigen::VectorXd log_escort_normalizer;  // log F_alpha(x); zero for a single reference
  Eigen::VectorXd objective_value;  // (1/gamma)(log Z(x) + log F_alpha(x))
};

/// Forward-KL solution: pi(y|x) = ref(y|x) / (gamma (Z(x) - r(x,y))).
struct FklSolution {
  double gamma = 1.0;
  ConditionalPolicy policy;
  Eigen::VectorXd z_tilde;
  Eigen::VectorXd residuals;  // |sum_y pi(y|x) - 1| before final renormalization
  Eigen::VectorXd support_max_reward;  // M_x = max{r(x,y) : ref(y|x) > 0}
};

/// Softmax tilt of a single reference; the K = 1 path of solve_rkl.
/// `log_escort_normalizer` is added to the objective value (pass zeros for a
/// plain reference).
RklSolution solve_rkl(const ConditionalPolicy& ref, const Eigen::Ref<const Eigen::MatrixXd>& rewards, double gamma,
                      const Eigen::Ref<const Eigen::VectorXd>& log_escort_normalizer);
RklSolution solve_rkl(const ConditionalPolicy& ref, const Eigen::Ref<const Eigen::MatrixXd>& rewards, double gamma);

/// Exact maximizer of E_pi[r] - (1/gamma) sum_i alpha_i KL(pi || pi_i) for
/// every prompt. Rewards may lie outside [0, r_max]; only finiteness matters.
RklSolution solve_rkl(const ReferenceEnsemble& ens, const Eigen::Ref<const Eigen::MatrixXd>& rewards, double gamma);
inline RklSolution solve_rkl(const ReferenceEnsemble& ens, const RewardTable& r, double gamma) {
  return solve_rkl(ens, r.values(), gamma);
}

/// Implicit maximizer of E_pi[r] - (1/gamma) KL(ref || pi), found by bisection
/// on the normalizer over (M_x, M_x + 1/gamma].
FklSolution solve_fkl(const ConditionalPolicy& ref, const Eigen::Ref<const Eigen::MatrixXd>& rewards, double gamma);

/// Same with ref = sum_i beta_i pi_i, which maximizes
/// E_pi[r] - (1/gamma) sum_i beta_i KL(pi_i || pi).
FklSolution solve_fkl(const ReferenceEnsemble& ens, const Eigen::Ref<const Eigen::MatrixXd>& rewards, double gamma);
inline FklSolution solve_fkl(const ReferenceEnsemble& ens, const RewardTable& r, double gamma) {
  return solve_fkl(ens, r.values(), gamma);
}

/// max |pi_r - pi_{r+delta}| over all (x, y) for the reverse-KL solution.
double shift_policy_check(const ReferenceEnsemble& ens, const Eigen::Ref<const Eigen::MatrixXd>& rewards, double gamma,
                          double delta);

/// d pi(y|x) / d r(x,y) = gamma pi(y|x) (1 - pi(y|x)) at the reverse-KL solution.
double policy_reward_sensitivity(const ReferenceEnsemble& ens, const Eigen::Ref<const Eigen::MatrixXd>& rewards,
                                 double gamma, Eigen::Index x, Eigen::Index y);

}  // namespace multiref
