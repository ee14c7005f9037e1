#include "support.hpp"

#include "multiref/closed_form_policies.hpp"
#include "multiref/experiments.hpp"
#include "multiref/objectives_gaps.hpp"

using namespace multiref;
using multiref::test::ensemble;
using multiref::test::policy;
using multiref::test::rows;

namespace {

ConditionalPolicy random_policy(Rng& rng, Eigen::Index ny) {
  return ConditionalPolicy(sample_dirichlet(ny, 1.0, rng).probs().transpose());
}

}  // namespace

TEST_SUITE("objectives_gaps") {

TEST_CASE("value function reference values") {
  CHECK(value_function(policy({{0.0, 1.0}}), rows({{0.9, 0.3}}), 0) == 0.3);
  CHECK(value_function(policy({{0.5, 0.5}}), rows({{1.0, 0.0}}), 0) == 0.5);
  CHECK(value_function(policy({{0.7310586, 0.2689414}}), rows({{1.0, 0.0}}), 0) == 0.7310586);
}

TEST_CASE("reverse objective reference values") {
  const auto ref = policy({{0.5, 0.5}});
  const Eigen::MatrixXd r = rows({{1.0, 0.0}});
  CHECK(rkl_objective(ref, ref, r, 1.0, 0) == value_function(ref, r, 0));
  const RklSolution s = solve_rkl(ref, r, 1.0);
  const double best = rkl_objective(ref, s.policy, r, 1.0, 0);
  CHECK(std::abs(best - 0.6201145) < 1e-7);
  Rng rng(4);
  for (int i = 0; i < 100; ++i) CHECK(rkl_objective(ref, random_policy(rng, 2), r, 1.0, 0) < best);
}

TEST_CASE("forward objective reference values") {
  const auto ref = policy({{0.5, 0.5}});
  const Eigen::MatrixXd r = rows({{1.0, 0.0}});
  CHECK(fkl_objective(ref, ref, r, 1.0, 0) == value_function(ref, r, 0));
  const FklSolution s = solve_fkl(ref, r, 1.0);
  const double best = fkl_objective(ref, s.policy, r, 1.0, 0);
  // 1/sqrt2 - KL([0.5, 0.5] || [1/sqrt2, 1 - 1/sqrt2]) = 0.7071068 - 0.0941132
  const double p = 1.0 / std::sqrt(2.0);
  CHECK(std::abs(best - (p - 0.5 * std::log(0.5 / p) - 0.5 * std::log(0.5 / (1 - p)))) < 1e-12);
  CHECK(std::abs(best - 0.6129936) < 1e-7);
  Rng rng(5);
  for (int i = 0; i < 100; ++i) CHECK(fkl_objective(ref, random_policy(rng, 2), r, 1.0, 0) <= best + 1e-9);
}

TEST_CASE("gaps vanish for the true reward and its shifts") {
  Rng rng(21);
  const auto ens = random_ensemble(3, 5, 2, SimplexWeights{0.4, 0.6}, rng, 0.3);
  Eigen::MatrixXd r(3, 5);
  for (Eigen::Index i = 0; i < r.size(); ++i) r(i) = rng.uniform();
  Eigen::MatrixXd shifted = r;
  shifted.row(0).array() += 0.7;
  shifted.row(2).array() -= 2.0;
  const PromptSelector rho = PromptDistribution{CategoricalDistribution{0.2, 0.3, 0.5}};
  for (const auto& r_hat : {r, shifted}) {
    const GapReport g = suboptimality_gap_rkl(ens, r, r_hat, 1.0, rho);
    CHECK(std::abs(g.suboptimality_gap) <= 1e-12);
    CHECK(std::abs(g.optimality_gap) <= 1e-12);
    CHECK(std::abs(suboptimality_gap_fkl(ens, r, r_hat, 1.0, rho).suboptimality_gap) <= 1e-12);
  }
  Eigen::MatrixXd wrong = r;
  wrong(1, 0) += 0.5;
  const GapReport g = suboptimality_gap_rkl(ens, r, wrong, 1.0, Eigen::Index{1});
  CHECK(g.suboptimality_gap > 0.0);
  CHECK(suboptimality_gap_fkl(ens, r, wrong, 1.0, Eigen::Index{1}).suboptimality_gap >= -1e-10);
}

TEST_CASE("coverage constant") {
  const PromptDistribution rho{CategoricalDistribution{1.0}};
  const auto ref = policy({{0.5, 0.5}});
  const CoverageReport same = coverage_constant(ref, ref, rho);
  CHECK(same.constant == 1.0);
  CHECK(same.kl_radius == 0.0);
  const CoverageReport c = coverage_constant(policy({{0.8, 0.2}}), ref, rho);
  CHECK(std::abs(c.constant - 1.6) < 1e-15);
  CHECK(c.x == 0);
  CHECK(c.y == 0);
  CHECK_ERROR_KIND(coverage_constant(ref, policy({{1.0, 0.0}}), rho), ErrorKind::AbsoluteContinuityViolation);
}

TEST_CASE("single-reference optima dominate the ensemble optimum") {
  const auto same = ensemble({policy({{0.3, 0.7}}), policy({{0.3, 0.7}})}, {0.5, 0.5});
  const Eigen::MatrixXd r = rows({{0.2, 0.9}});
  CHECK(std::abs(holder_corollary_slack(same, r, 1.0, 0, KlMode::Reverse)) <= 1e-10);
  CHECK(std::abs(holder_corollary_slack(same, r, 1.0, 0, KlMode::Forward)) <= 1e-10);
  Rng rng(8);
  for (int i = 0; i < 100; ++i) {
    const auto ens = random_ensemble(1, 4, 2, SimplexWeights{0.5, 0.5}, rng, 0.1);
    Eigen::MatrixXd rr(1, 4);
    for (Eigen::Index j = 0; j < 4; ++j) rr(j) = rng.uniform();
    CHECK(holder_corollary_slack(ens, rr, 1.0, 0, KlMode::Reverse) >= -1e-10);
    CHECK(holder_corollary_slack(ens, rr, 1.0, 0, KlMode::Forward) >= -1e-10);
  }
}

TEST_CASE("objective difference bound") {
  const RewardTable r(rows({{0.2, 0.9}}), 1.0);
  const auto single = ensemble({policy({{0.3, 0.7}})}, {1.0});
  const BoundCheck b1 = objective_difference_bound_check(single, 0, r, 1.0, 0);
  CHECK(std::abs(b1.lhs) <= 1e-15);
  CHECK(std::abs(b1.rhs) <= 1e-15);
  const auto same = ensemble({policy({{0.3, 0.7}}), policy({{0.3, 0.7}})}, {0.5, 0.5});
  CHECK(std::abs(objective_difference_bound_check(same, 1, r, 1.0, 0).rhs) <= 1e-7);
  Rng rng(9);
  for (int i = 0; i < 100; ++i) {
    const auto ens = random_ensemble(1, 5, 2, SimplexWeights{0.5, 0.5}, rng, 0.1);
    Eigen::MatrixXd v(1, 5);
    for (Eigen::Index j = 0; j < 5; ++j) v(j) = rng.uniform();
    const BoundCheck b = objective_difference_bound_check(ens, i % 2, RewardTable(v, 1.0), 1.0, 0);
    CHECK(b.lhs <= b.rhs);
  }
}

TEST_CASE("mode names") {
  CHECK(to_string(KlMode::Reverse) == "rkl");
  CHECK(parse_kl_mode("fkl") == KlMode::Forward);
  CHECK_ERROR_KIND(parse_kl_mode("js"), ErrorKind::InvalidArgument);
}

}  // TEST_SUITE
