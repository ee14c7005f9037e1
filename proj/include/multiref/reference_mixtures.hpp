#pragma once

#include <Eigen/Dense>

#include <span>
#include <vector>

#include "multiref/distributions.hpp"

namespace multiref {

/// pi(y|x) as a dense table: rows are prompts, columns are responses, and
/// every row is a probability vector.
class ConditionalPolicy {
 public:
  explicit ConditionalPolicy(Eigen::MatrixXd table);

  static ConditionalPolicy uniform(Eigen::Index num_prompts, Eigen::Index num_responses);
  static ConditionalPolicy from_rows(std::span<const CategoricalDistribution> rows);

  Eigen::Index num_prompts() const noexcept { return table_.rows(); }
  Eigen::Index num_responses() const noexcept { return table_.cols(); }
  const Eigen::MatrixXd& table() const noexcept { return table_; }
  double operator()(Eigen::Index x, Eigen::Index y) const { return table_(x, y); }

  CategoricalDistribution row(Eigen::Index x) const { return CategoricalDistribution(table_.row(x).transpose()); }

  friend bool operator==(const ConditionalPolicy& a, const ConditionalPolicy& b) { return a.table_ == b.table_; }

 private:
  Eigen::MatrixXd table_;
};

/// K reference policies of identical shape plus strictly positive simplex
/// weights (alpha for the reverse-KL problem, beta for the forward-KL one).
class ReferenceEnsemble {
 public:
  ReferenceEnsemble(std::vector<ConditionalPolicy> members, SimplexWeights weights);

  std::size_t size() const noexcept { return members_.size(); }
  const std::vector<ConditionalPolicy>& members() const noexcept { return members_; }
  const ConditionalPolicy& member(std::size_t i) const { return members_.at(i); }
  const SimplexWeights& weights() const noexcept { return weights_; }
  Eigen::Index num_prompts() const { return members_.front().num_prompts(); }
  Eigen::Index num_responses() const { return members_.front().num_responses(); }

  /// The member rows for one prompt, in member order.
  std::vector<CategoricalDistribution> rows(Eigen::Index x) const;

  /// Single-member ensemble wrapping member i with weight 1.
  ReferenceEnsemble single(std::size_t i) const;

 private:
  std::vector<ConditionalPolicy> members_;
  SimplexWeights weights_;
};

struct GeometricReference {
  ConditionalPolicy policy;
  Eigen::VectorXd normalizers;      // F_alpha(x)
  Eigen::VectorXd log_normalizers;  // log F_alpha(x)
};

/// Normalized weighted geometric mean prod_i pi_i^alpha_i / F_alpha(x), row by
/// row, computed in log space. Its support is the intersection of the member
/// supports; throws EmptySupportIntersection when that is empty for a prompt.
/// A single-member ensemble returns the member itself with F = 1.
GeometricReference geometric_reference(const ReferenceEnsemble& ens);

/// sum_i beta_i pi_i. Its support is the union of the member supports.
ConditionalPolicy arithmetic_reference(const ReferenceEnsemble& ens);

/// sum_i a_i KL(p||q_i) - [KL(p||geo) - log sum_x prod_i q_i(x)^a_i], where geo
/// is the normalized weighted geometric mean of the q_i. Identically zero.
double tilted_kl_decomposition_residual(const CategoricalDistribution& p,
                                        std::span<const CategoricalDistribution> qs,
                                        const SimplexWeights& alpha);

/// sum_i b_i KL(q_i||p) - [H(m) - sum_i b_i H(q_i) + KL(m||p)] with
/// m = sum_i b_i q_i. Identically zero.
double average_kl_decomposition_residual(std::span<const CategoricalDistribution> qs,
                                         const SimplexWeights& beta,
                                         const CategoricalDistribution& p);

/// Weighted arithmetic mixture of distributions.
CategoricalDistribution arithmetic_mixture(std::span<const CategoricalDistribution> qs, const SimplexWeights& w);

namespace testing {
/// Fault injection for the verification suite's failure path: adds `tilt` to
/// the log-weight of response 0 before the geometric reference is normalized.
/// Zero (the default) disables it.
void set_escort_fault(double tilt) noexcept;
double escort_fault() noexcept;
}  // namespace testing

}  // namespace multiref
