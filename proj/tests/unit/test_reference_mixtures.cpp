#include "support.hpp"

#include "multiref/experiments.hpp"
#include "multiref/reference_mixtures.hpp"

using namespace multiref;
using multiref::test::ensemble;
using multiref::test::linf;
using multiref::test::policy;
using multiref::test::rows;

TEST_SUITE("reference_mixtures") {

TEST_CASE("geometric reference of identical members is the member") {
  const auto ens = ensemble({policy({{0.5, 0.5}}), policy({{0.5, 0.5}})}, {0.5, 0.5});
  const GeometricReference g = geometric_reference(ens);
  CHECK(linf(g.policy.table(), rows({{0.5, 0.5}})) < 1e-15);
  CHECK(std::abs(g.normalizers[0] - 1.0) < 1e-15);
}

TEST_CASE("geometric reference reference value") {
  const auto ens = ensemble({policy({{0.9, 0.1}}), policy({{0.5, 0.5}})}, {0.5, 0.5});
  const GeometricReference g = geometric_reference(ens);
  CHECK(linf(g.policy.table(), rows({{0.75, 0.25}})) < 1e-12);
  CHECK(std::abs(g.normalizers[0] - (std::sqrt(0.45) + std::sqrt(0.05))) < 1e-15);
  CHECK(std::abs(g.normalizers[0] - 0.8944272) < 1e-7);
  CHECK(std::abs(g.log_normalizers[0] - std::log(g.normalizers[0])) < 1e-15);
}

TEST_CASE("geometric reference lives on the support intersection") {
  const auto ens = ensemble({policy({{1.0, 0.0}}), policy({{0.5, 0.5}})}, {0.5, 0.5});
  CHECK(linf(geometric_reference(ens).policy.table(), rows({{1.0, 0.0}})) == 0.0);
  const auto disjoint = ensemble({policy({{1.0, 0.0}}), policy({{0.0, 1.0}})}, {0.5, 0.5});
  CHECK_ERROR_KIND(geometric_reference(disjoint), ErrorKind::EmptySupportIntersection);
}

TEST_CASE("single member returns itself with unit normalizer") {
  const auto m = policy({{0.2, 0.3, 0.5}, {0.6, 0.4, 0.0}});
  const auto ens = ensemble({m}, {1.0});
  const GeometricReference g = geometric_reference(ens);
  CHECK(g.policy == m);
  CHECK(g.normalizers.isOnes());
  CHECK(arithmetic_reference(ens) == m);
}

TEST_CASE("arithmetic reference values") {
  const auto sym = ensemble({policy({{1.0, 0.0}}), policy({{0.0, 1.0}})}, {0.5, 0.5});
  CHECK(linf(arithmetic_reference(sym).table(), rows({{0.5, 0.5}})) == 0.0);
  const auto ens = ensemble({policy({{0.9, 0.1}}), policy({{0.5, 0.5}})}, {0.25, 0.75});
  CHECK(linf(arithmetic_reference(ens).table(), rows({{0.6, 0.4}})) < 1e-15);
}

TEST_CASE("ensemble validation") {
  CHECK_ERROR_KIND(ReferenceEnsemble({policy({{0.5, 0.5}}), policy({{0.2, 0.3, 0.5}})}, SimplexWeights{0.5, 0.5}),
                   ErrorKind::InvalidArgument);
  CHECK_ERROR_KIND(ReferenceEnsemble({policy({{0.5, 0.5}})}, SimplexWeights{0.5, 0.5}), ErrorKind::InvalidArgument);
  CHECK_ERROR_KIND(ConditionalPolicy(rows({{0.5, 0.6}})), ErrorKind::InvalidArgument);
}

TEST_CASE("escort decomposition residual") {
  const CategoricalDistribution u{0.5, 0.5};
  const std::vector<CategoricalDistribution> same{u, u};
  CHECK(std::abs(tilted_kl_decomposition_residual(u, same, SimplexWeights{0.5, 0.5})) <= 1e-15);
  const std::vector<CategoricalDistribution> qs{{0.5, 0.5}, {0.9, 0.1}};
  CHECK(std::abs(tilted_kl_decomposition_residual(CategoricalDistribution{0.7, 0.3}, qs, SimplexWeights{0.4, 0.6})) <=
        1e-12);
  const std::vector<CategoricalDistribution> bad{{1.0, 0.0}, {0.5, 0.5}};
  CHECK_ERROR_KIND(tilted_kl_decomposition_residual(u, bad, SimplexWeights{0.5, 0.5}),
                   ErrorKind::AbsoluteContinuityViolation);
}

TEST_CASE("average decomposition residual") {
  const CategoricalDistribution p{0.3, 0.7};
  const std::vector<CategoricalDistribution> same{p, p};
  CHECK(std::abs(average_kl_decomposition_residual(same, SimplexWeights{0.5, 0.5}, p)) <= 1e-15);
  const std::vector<CategoricalDistribution> qs{{0.9, 0.1}, {0.2, 0.8}};
  CHECK(std::abs(average_kl_decomposition_residual(qs, SimplexWeights{0.3, 0.7}, CategoricalDistribution{0.5, 0.5})) <=
        1e-12);
  const std::vector<CategoricalDistribution> corners{{1.0, 0.0}, {0.0, 1.0}};
  CHECK(std::abs(average_kl_decomposition_residual(corners, SimplexWeights{0.5, 0.5},
                                                   CategoricalDistribution{0.5, 0.5})) <= 1e-12);
}

TEST_CASE("property: normalizer bounded by one and rows normalized") {
  Rng rng(5);
  for (int i = 0; i < 300; ++i) {
    const std::size_t k = 1 + rng.uniform_index(4);
    const auto ens = random_ensemble(3, 6, k, SimplexWeights::uniform(static_cast<Eigen::Index>(k)), rng);
    const GeometricReference g = geometric_reference(ens);
    CHECK(g.normalizers.maxCoeff() <= 1.0 + 1e-12);
    CHECK((g.policy.table().rowwise().sum().array() - 1.0).abs().maxCoeff() <= 1e-12);
    CHECK((arithmetic_reference(ens).table().rowwise().sum().array() - 1.0).abs().maxCoeff() <= 1e-12);
  }
}

}  // TEST_SUITE
