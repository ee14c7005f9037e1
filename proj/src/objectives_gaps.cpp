#include "multiref/objectives_gaps.hpp"

#include <cmath>

namespace multiref {

std::string_view to_string(KlMode mode) noexcept { return mode == KlMode::Reverse ? "rkl" : "fkl"; }

KlMode parse_kl_mode(std::string_view text) {
  if (text == "rkl") return KlMode::Reverse;
  if (text == "fkl") return KlMode::Forward;
  fail(ErrorKind::InvalidArgument, "mode must be \"rkl\" or \"fkl\", got \"" + std::string(text) + "\"");
}

double value_function(const ConditionalPolicy& pi, const RewardsRef& r, Eigen::Index x) {
  return pi.table().row(x).dot(r.row(x));
}

double rkl_objective(const ConditionalPolicy& ref, const ConditionalPolicy& pi, const RewardsRef& r, double gamma,
                     Eigen::Index x) {
  return value_function(pi, r, x) - kl_divergence(pi.row(x), ref.row(x)) / gamma;
}

double fkl_objective(const ConditionalPolicy& ref, const ConditionalPolicy& pi, const RewardsRef& r, double gamma,
                     Eigen::Index x) {
  return value_function(pi, r, x) - kl_divergence(ref.row(x), pi.row(x)) / gamma;
}

double multi_rkl_objective(const ReferenceEnsemble& ens, const ConditionalPolicy& pi, const RewardsRef& r, double gamma,
                           Eigen::Index x) {
  const auto p = pi.row(x);
  double penalty = 0.0;
  for (std::size_t i = 0; i < ens.size(); ++i)
    penalty += ens.weights()[static_cast<Eigen::Index>(i)] * kl_divergence(p, ens.member(i).row(x));
  return value_function(pi, r, x) - penalty / gamma;
}

double multi_fkl_objective(const ReferenceEnsemble& ens, const ConditionalPolicy& pi, const RewardsRef& r, double gamma,
                           Eigen::Index x) {
  const auto p = pi.row(x);
  double penalty = 0.0;
  for (std::size_t i = 0; i < ens.size(); ++i)
    penalty += ens.weights()[static_cast<Eigen::Index>(i)] * kl_divergence(ens.member(i).row(x), p);
  return value_function(pi, r, x) - penalty / gamma;
}

GapReport gap_report(KlMode mode, const ConditionalPolicy& ref, const ConditionalPolicy& pi_star,
                     const ConditionalPolicy& pi_hat, const RewardsRef& r_true, double gamma,
                     const PromptSelector& where) {
  auto objective = [&](const ConditionalPolicy& pi, Eigen::Index x) {
    return mode == KlMode::Reverse ? rkl_objective(ref, pi, r_true, gamma, x) : fkl_objective(ref, pi, r_true, gamma, x);
  };
  GapReport rep;
  rep.mode = mode;
  rep.prompt = where;
  rep.j_value = evaluate_at(where, [&](Eigen::Index x) { return value_function(pi_hat, r_true, x); });
  rep.j_gamma = evaluate_at(where, [&](Eigen::Index x) { return objective(pi_hat, x); });
  rep.optimality_gap = evaluate_at(where, [&](Eigen::Index x) {
    return value_function(pi_star, r_true, x) - value_function(pi_hat, r_true, x);
  });
  rep.suboptimality_gap =
      evaluate_at(where, [&](Eigen::Index x) { return objective(pi_star, x) - objective(pi_hat, x); });
  return rep;
}

GapReport suboptimality_gap_rkl(const ReferenceEnsemble& ens, const RewardsRef& r_true, const RewardsRef& r_hat,
                                double gamma, const PromptSelector& where) {
  const GeometricReference geo = geometric_reference(ens);
  const RklSolution star = solve_rkl(geo.policy, r_true, gamma, geo.log_normalizers);
  const RklSolution hat = solve_rkl(geo.policy, r_hat, gamma, geo.log_normalizers);
  return gap_report(KlMode::Reverse, geo.policy, star.policy, hat.policy, r_true, gamma, where);
}

GapReport suboptimality_gap_fkl(const ReferenceEnsemble& ens, const RewardsRef& r_true, const RewardsRef& r_hat,
                                double gamma, const PromptSelector& where) {
  const ConditionalPolicy ref = arithmetic_reference(ens);
  const FklSolution star = solve_fkl(ref, r_true, gamma);
  const FklSolution hat = solve_fkl(ref, r_hat, gamma);
  return gap_report(KlMode::Forward, ref, star.policy, hat.policy, r_true, gamma, where);
}

CoverageReport coverage_constant(const ConditionalPolicy& pi, const ConditionalPolicy& ref, const PromptDistribution& rho) {
  if (pi.num_prompts() != ref.num_prompts() || pi.num_responses() != ref.num_responses() ||
      rho.dist.size() != pi.num_prompts())
    fail(ErrorKind::InvalidArgument, "coverage_constant: shape mismatch");
  CoverageReport rep{0.0, 0, 0, 0.0};
  for (Eigen::Index x = 0; x < pi.num_prompts(); ++x) {
    if (rho.dist[x] <= 0) continue;
    for (Eigen::Index y = 0; y < pi.num_responses(); ++y) {
      if (pi(x, y) <= 0) continue;
      if (ref(x, y) <= 0)
        fail(ErrorKind::AbsoluteContinuityViolation,
             "coverage_constant: pi(" + std::to_string(y) + "|" + std::to_string(x) + ") > 0 but the reference is 0");
      const double ratio = pi(x, y) / ref(x, y);
      if (ratio > rep.constant) rep = {ratio, x, y, 0.0};
    }
    rep.kl_radius += rho.dist[x] * kl_divergence(pi.row(x), ref.row(x));
  }
  return rep;
}

double holder_corollary_slack(const ReferenceEnsemble& ens, const RewardsRef& r, double gamma, Eigen::Index x,
                              KlMode mode) {
  double separate = 0.0;
  if (mode == KlMode::Reverse) {
    for (std::size_t i = 0; i < ens.size(); ++i) {
      const RklSolution single = solve_rkl(ens.member(i), r, gamma);
      separate += ens.weights()[static_cast<Eigen::Index>(i)] * single.objective_value[x];
    }
    return separate - solve_rkl(ens, r, gamma).objective_value[x];
  }
  for (std::size_t i = 0; i < ens.size(); ++i) {
    const FklSolution single = solve_fkl(ens.member(i), r, gamma);
    separate += ens.weights()[static_cast<Eigen::Index>(i)] * fkl_objective(ens.member(i), single.policy, r, gamma, x);
  }
  const FklSolution joint = solve_fkl(ens, r, gamma);
  return separate - multi_fkl_objective(ens, joint.policy, r, gamma, x);
}

BoundCheck objective_difference_bound_check(const ReferenceEnsemble& ens, std::size_t i, const RewardTable& r,
                                            double gamma, Eigen::Index x) {
  const GeometricReference geo = geometric_reference(ens);
  const double escort_optimum = solve_rkl(geo.policy, r.values(), gamma).objective_value[x];
  const double single_optimum = solve_rkl(ens.member(i), r.values(), gamma).objective_value[x];
  const double kl = kl_divergence(geo.policy.row(x), ens.member(i).row(x));
  const double rhs = std::expm1(gamma * r.r_max()) / (gamma * std::sqrt(2.0)) * std::sqrt(kl);
  return {escort_optimum - single_optimum, rhs};
}

std::pair<double, double> gap_correlation_bound(const ReferenceEnsemble& ens, const RewardsRef& r_true,
                                                const RewardsRef& r_hat, double gamma, Eigen::Index x) {
  const GeometricReference geo = geometric_reference(ens);
  const RklSolution star = solve_rkl(geo.policy, r_true, gamma, geo.log_normalizers);
  const RklSolution hat = solve_rkl(geo.policy, r_hat, gamma, geo.log_normalizers);
  const double gap = rkl_objective(geo.policy, star.policy, r_true, gamma, x) -
                     rkl_objective(geo.policy, hat.policy, r_true, gamma, x);
  const double corr = (r_true.row(x) - r_hat.row(x)).dot(star.policy.table().row(x) - hat.policy.table().row(x));
  return {gap, corr};
}

}  // namespace multiref
