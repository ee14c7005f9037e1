#pragma once

#include <Eigen/Dense>

#include <cstddef>

#include "multiref/preference_rewards.hpp"
#include "multiref/reference_mixtures.hpp"

namespace multiref {

/// Settings for the projected-gradient maximizers.
struct OracleConfig {
  std::size_t restarts = 8;
  std::size_t iters = 50000;
  double step = 0.1;          // initial (and largest) step size
  double tolerance = 1e-12;   // stop when the gradient mapping's sup norm drops below this

  /// restarts 8, iters 5e4, step 0.1/gamma.
  static OracleConfig for_gamma(double gamma);
  void validate() const;
};

struct OracleResult {
  CategoricalDistribution policy;
  double value = 0.0;
  std::size_t iterations = 0;   // of the winning restart
  double stationarity = 0.0;    // gradient-mapping sup norm at the returned point
};

/// Euclidean projection of v onto the probability simplex (sort based).
Eigen::VectorXd project_to_simplex(const Eigen::Ref<const Eigen::VectorXd>& v);

/// Maximizes E_pi[r(x,.)] - (1/gamma) sum_i alpha_i KL(pi || pi_i(.|x)) by
/// projected gradient ascent over distributions supported on the intersection
/// of the member supports. Uses plain logs and sums only.
OracleResult maximize_rkl_objective(const ReferenceEnsemble& ens, const Eigen::Ref<const Eigen::MatrixXd>& r,
                                    double gamma, Eigen::Index x, const OracleConfig& config);
OracleResult maximize_rkl_objective(const ReferenceEnsemble& ens, const Eigen::Ref<const Eigen::MatrixXd>& r,
                                    double gamma, Eigen::Index x);

/// Maximizes E_pi[r(x,.)] - (1/gamma) sum_i beta_i KL(pi_i(.|x) || pi) over
/// distributions on the union of the member supports. Iterates are floored at
/// 1e-12 before each projection.
OracleResult maximize_fkl_objective(const ReferenceEnsemble& ens, const Eigen::Ref<const Eigen::MatrixXd>& r,
                                    double gamma, Eigen::Index x, const OracleConfig& config);
OracleResult maximize_fkl_objective(const ReferenceEnsemble& ens, const Eigen::Ref<const Eigen::MatrixXd>& r,
                                    double gamma, Eigen::Index x);

/// Re-implementation of mle_reward: per-triple naive sigmoid, direct
/// summation, same tie rule.
std::size_t exhaustive_mle(const RewardClass& cls, const PreferenceDataset& data);

}  // namespace multiref
