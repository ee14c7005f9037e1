#pragma once

#include <Eigen/Dense>

#include <optional>
#include <string>
#include <utility>
#include <variant>

#include "multiref/closed_form_policies.hpp"

namespace multiref {

enum class KlMode { Reverse, Forward };

std::string_view to_string(KlMode mode) noexcept;
KlMode parse_kl_mode(std::string_view text);

using RewardsRef = Eigen::Ref<const Eigen::MatrixXd>;

/// A single prompt, or an expectation over rho.
using PromptSelector = std::variant<Eigen::Index, PromptDistribution>;

/// E_{Y ~ pi(.|x)} r(x, Y).
double value_function(const ConditionalPolicy& pi, const RewardsRef& r, Eigen::Index x);

/// value - (1/gamma) KL(pi(.|x) || ref(.|x)).
double rkl_objective(const ConditionalPolicy& ref, const ConditionalPolicy& pi, const RewardsRef& r, double gamma,
                     Eigen::Index x);

/// value - (1/gamma) KL(ref(.|x) || pi(.|x)).
double fkl_objective(const ConditionalPolicy& ref, const ConditionalPolicy& pi, const RewardsRef& r, double gamma,
                     Eigen::Index x);

/// value - (1/gamma) sum_i alpha_i KL(pi || pi_i): the multi-reference reverse
/// objective. Differs from rkl_objective against the escort reference by the
/// constant (1/gamma) log F_alpha(x).
double multi_rkl_objective(const ReferenceEnsemble& ens, const ConditionalPolicy& pi, const RewardsRef& r, double gamma,
                           Eigen::Index x);

/// value - (1/gamma) sum_i beta_i KL(pi_i || pi).
double multi_fkl_objective(const ReferenceEnsemble& ens, const ConditionalPolicy& pi, const RewardsRef& r, double gamma,
                           Eigen::Index x);

/// Applies f(x) to one prompt or averages it under rho.
template <typename F>
double evaluate_at(const PromptSelector& where, F&& f) {
  if (const auto* x = std::get_if<Eigen::Index>(&where)) return f(*x);
  const auto& rho = std::get<PromptDistribution>(where).dist;
  double acc = 0.0;
  for (Eigen::Index x = 0; x < rho.size(); ++x)
    if (rho[x] > 0) acc += rho[x] * f(x);
  return acc;
}

struct GapReport {
  double j_value = 0.0;            // J(pi_hat) under the true reward
  double j_gamma = 0.0;            // regularized objective of pi_hat under the true reward
  double optimality_gap = 0.0;     // J(pi*) - J(pi_hat)
  double suboptimality_gap = 0.0;  // J_gamma(pi*) - J_gamma(pi_hat)
  PromptSelector prompt = Eigen::Index{0};
  KlMode mode = KlMode::Reverse;
};

/// Gaps between the policies solved with r_true and r_hat, both scored under
/// r_true against the escort reference.
GapReport suboptimality_gap_rkl(const ReferenceEnsemble& ens, const RewardsRef& r_true, const RewardsRef& r_hat,
                                double gamma, const PromptSelector& where);

/// Forward-KL analogue against the arithmetic reference.
GapReport suboptimality_gap_fkl(const ReferenceEnsemble& ens, const RewardsRef& r_true, const RewardsRef& r_hat,
                                double gamma, const PromptSelector& where);

/// Gap report for two already-solved policies sharing the reference `ref`.
GapReport gap_report(KlMode mode, const ConditionalPolicy& ref, const ConditionalPolicy& pi_star,
                     const ConditionalPolicy& pi_hat, const RewardsRef& r_true, double gamma,
                     const PromptSelector& where);

struct CoverageReport {
  double constant = 1.0;
  Eigen::Index x = 0;
  Eigen::Index y = 0;
  double kl_radius = 0.0;  // E_rho KL(pi || ref)
};

/// max over rho(x) > 0 of pi(y|x)/ref(y|x). Throws AbsoluteContinuityViolation
/// when pi puts mass where ref has none.
CoverageReport coverage_constant(const ConditionalPolicy& pi, const ConditionalPolicy& ref, const PromptDistribution& rho);

/// sum_i w_i (single-reference optimum under pi_i) - (multi-reference
/// optimum). Non-negative by Hoelder (reverse) or by convexity of max (forward).
double holder_corollary_slack(const ReferenceEnsemble& ens, const RewardsRef& r, double gamma, Eigen::Index x,
                              KlMode mode);

struct BoundCheck {
  double lhs = 0.0;
  double rhs = 0.0;
};

/// lhs: optimum of the reverse objective against the escort reference minus
/// the optimum against reference i alone. rhs: (exp(gamma r_max) - 1) /
/// (gamma sqrt 2) * sqrt(KL(escort || pi_i)), with r_max the table's bound.
BoundCheck objective_difference_bound_check(const ReferenceEnsemble& ens, std::size_t i, const RewardTable& r,
                                            double gamma, Eigen::Index x);

/// The correlation bound on the reverse suboptimality gap:
/// gap <= sum_y (r* - r_hat)(pi* - pi_hat). Returns {gap, correlation}.
std::pair<double, double> gap_correlation_bound(const ReferenceEnsemble& ens, const RewardsRef& r_true,
                                                const RewardsRef& r_hat, double gamma, Eigen::Index x);

}  // namespace multiref
