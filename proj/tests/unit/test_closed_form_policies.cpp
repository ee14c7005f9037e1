#include "support.hpp"

#include "multiref/closed_form_policies.hpp"
#include "multiref/experiments.hpp"

using namespace multiref;
using multiref::test::ensemble;
using multiref::test::linf;
using multiref::test::policy;
using multiref::test::rows;

TEST_SUITE("closed_form_policies") {

TEST_CASE("reverse solution reference instance") {
  const auto ens = ensemble({policy({{0.5, 0.5}}), policy({{0.5, 0.5}})}, {0.5, 0.5});
  const RklSolution s = solve_rkl(ens, rows({{1.0, 0.0}}), 1.0);
  CHECK(linf(s.policy.table(), rows({{0.7310586, 0.2689414}})) < 1e-7);
  CHECK(std::abs(s.objective_value[0] - std::log((std::exp(1.0) + 1.0) / 2.0)) < 1e-15);
  CHECK(std::abs(s.objective_value[0] - 0.6201145) < 1e-7);
  CHECK(std::abs(s.log_escort_normalizer[0]) < 1e-15);
}

TEST_CASE("reverse solution with per-prompt constant reward is the escort reference") {
  const auto ens = ensemble({policy({{0.9, 0.1}, {0.2, 0.8}}), policy({{0.5, 0.5}, {0.6, 0.4}})}, {0.3, 0.7});
  const RklSolution s = solve_rkl(ens, rows({{0.4, 0.4}, {0.9, 0.9}}), 2.0);
  CHECK(linf(s.policy.table(), geometric_reference(ens).policy.table()) < 1e-15);
}

TEST_CASE("reverse solution concentrates as gamma grows") {
  const auto ens = ensemble({policy({{1e-3, 1.0 - 1e-3}})}, {1.0});
  const RklSolution s = solve_rkl(ens, rows({{1.0, 0.9}}), 1e3);
  CHECK(s.policy(0, 0) >= 1.0 - 1e-6);
  CHECK(std::isfinite(s.objective_value[0]));
}

TEST_CASE("reverse solution rejects bad inputs") {
  const auto ens = ensemble({policy({{0.5, 0.5}})}, {1.0});
  CHECK_ERROR_KIND(solve_rkl(ens, rows({{1.0, 0.0}}), 0.0), ErrorKind::InvalidArgument);
  CHECK_ERROR_KIND(solve_rkl(ens, rows({{1.0, 0.0, 0.0}}), 1.0), ErrorKind::InvalidArgument);
  CHECK_ERROR_KIND(solve_rkl(ens, rows({{std::nan(""), 0.0}}), 1.0), ErrorKind::InvalidArgument);
}

TEST_CASE("forward solution reference instance") {
  const auto ens = ensemble({policy({{0.5, 0.5}})}, {1.0});
  const FklSolution s = solve_fkl(ens, rows({{1.0, 0.0}}), 1.0);
  CHECK(std::abs(s.z_tilde[0] - (1.0 + std::sqrt(0.5))) < 1e-9);
  CHECK(std::abs(s.z_tilde[0] - 1.7071068) < 1e-7);
  CHECK(linf(s.policy.table(), rows({{0.7071068, 0.2928932}})) < 1e-7);
  CHECK(s.support_max_reward[0] == 1.0);
  CHECK(s.residuals[0] <= 1e-10);
}

TEST_CASE("forward solution with constant reward is the arithmetic reference") {
  const auto ens = ensemble({policy({{0.9, 0.1}}), policy({{0.5, 0.5}})}, {0.25, 0.75});
  const FklSolution s = solve_fkl(ens, rows({{0.3, 0.3}}), 2.0);
  CHECK(std::abs(s.z_tilde[0] - 0.8) < 1e-12);
  CHECK(linf(s.policy.table(), rows({{0.6, 0.4}})) < 1e-12);
}

TEST_CASE("forward solution ignores responses outside the reference support") {
  const auto ref = policy({{0.5, 0.5, 0.0}});
  const FklSolution s = solve_fkl(ref, rows({{0.0, 0.5, 1.0}}), 1.0);
  CHECK(s.support_max_reward[0] == 0.5);
  CHECK(s.policy(0, 2) == 0.0);
  CHECK(s.z_tilde[0] > 0.5);
  // bracket (M, M + 1/gamma] with M taken over the support only
  CHECK(s.z_tilde[0] <= 1.5);
}

TEST_CASE("shift invariance") {
  Rng rng(12);
  const auto ens = random_ensemble(3, 5, 3, SimplexWeights{0.2, 0.3, 0.5}, rng, 0.5);
  Eigen::MatrixXd r(3, 5);
  for (Eigen::Index i = 0; i < r.size(); ++i) r(i) = rng.uniform();
  CHECK(shift_policy_check(ens, r, 1.5, 0.0) == 0.0);
  CHECK(shift_policy_check(ens, r, 1.5, 5.0) <= 1e-12);
  CHECK(shift_policy_check(ens, r, 1.5, -3.0) <= 1e-12);
}

TEST_CASE("sensitivity reference values") {
  const auto point = ensemble({policy({{1.0, 0.0}})}, {1.0});
  CHECK(policy_reward_sensitivity(point, rows({{0.2, 0.7}}), 1.0, 0, 0) == 0.0);
  const auto sym = ensemble({policy({{0.5, 0.5}})}, {1.0});
  CHECK(std::abs(policy_reward_sensitivity(sym, rows({{0.4, 0.4}}), 2.0, 0, 1) - 0.5) < 1e-15);
}

TEST_CASE("property: both solutions are normalized and satisfy their optimality conditions") {
  Rng rng(31);
  for (int i = 0; i < 200; ++i) {
    const std::size_t k = 1 + rng.uniform_index(3);
    const auto ens = random_ensemble(2, 6, k, SimplexWeights::uniform(static_cast<Eigen::Index>(k)), rng, 0.2);
    Eigen::MatrixXd r(2, 6);
    for (Eigen::Index j = 0; j < r.size(); ++j) r(j) = rng.uniform();
    const double gamma = 0.25 + 4.0 * rng.uniform();
    const RklSolution rs = solve_rkl(ens, r, gamma);
    CHECK((rs.policy.table().rowwise().sum().array() - 1.0).abs().maxCoeff() <= 1e-12);
    const ConditionalPolicy ref = arithmetic_reference(ens);
    const FklSolution fs = solve_fkl(ref, r, gamma);
    for (Eigen::Index x = 0; x < 2; ++x) {
      CHECK(fs.support_max_reward[x] < fs.z_tilde[x]);
      CHECK(fs.z_tilde[x] <= r.row(x).maxCoeff() + 1.0 / gamma);
      for (Eigen::Index y = 0; y < 6; ++y)
        CHECK(std::abs(r(x, y) + ref(x, y) / (gamma * fs.policy(x, y)) - fs.z_tilde[x]) <= 1e-8);
    }
  }
}

}  // TEST_SUITE
