#include "support.hpp"

#include "multiref/distributions.hpp"

using namespace multiref;
using multiref::test::vec;

TEST_SUITE("distributions") {

TEST_CASE("escort reference values") {
  const CategoricalDistribution p{0.8, 0.2};
  CHECK(escort(p, 1.0) == p);
  CHECK(multiref::test::linf(escort(p, 0.0).probs(), vec({0.5, 0.5})) == 0.0);
  const auto e = escort(CategoricalDistribution{0.9, 0.1}, 2.0);
  CHECK(multiref::test::linf(e.probs(), vec({0.9878049, 0.0121951})) < 1e-7);
  // exact arithmetic: [0.81, 0.01] / 0.82
  CHECK(e[0] == doctest::Approx(0.81 / 0.82).epsilon(1e-14));
}

TEST_CASE("escort with zero exponent is uniform over the support") {
  const auto e = escort(CategoricalDistribution{0.7, 0.0, 0.3}, 0.0);
  CHECK(multiref::test::linf(e.probs(), vec({0.5, 0.0, 0.5})) == 0.0);
  CHECK_ERROR_KIND(escort(CategoricalDistribution{0.5, 0.5}, -1.0), ErrorKind::InvalidArgument);
}

TEST_CASE("generalized escort reference values") {
  const CategoricalDistribution p{0.8, 0.2}, q{0.2, 0.8};
  CHECK(generalized_escort(p, q, 1.0) == p);
  CHECK(multiref::test::linf(generalized_escort(p, q, 0.5).probs(), vec({0.5, 0.5})) < 1e-15);
  const auto g = generalized_escort(CategoricalDistribution{0.9, 0.1}, CategoricalDistribution{0.5, 0.5}, 0.5);
  CHECK(multiref::test::linf(g.probs(), vec({0.75, 0.25})) < 1e-12);
  CHECK_ERROR_KIND(generalized_escort(CategoricalDistribution{1.0, 0.0}, CategoricalDistribution{0.0, 1.0}, 0.5),
                   ErrorKind::DegenerateDistribution);
  CHECK_ERROR_KIND(generalized_escort(p, q, 1.5), ErrorKind::InvalidArgument);
}

TEST_CASE("kl divergence reference values") {
  CHECK(kl_divergence(CategoricalDistribution{0.5, 0.5}, CategoricalDistribution{0.5, 0.5}) == 0.0);
  CHECK(kl_divergence(CategoricalDistribution{1.0, 0.0}, CategoricalDistribution{0.5, 0.5}) ==
        doctest::Approx(0.6931472).epsilon(1e-7));
  CHECK_ERROR_KIND(kl_divergence(CategoricalDistribution{0.5, 0.5}, CategoricalDistribution{1.0, 0.0}),
                   ErrorKind::AbsoluteContinuityViolation);
}

TEST_CASE("entropy reference values") {
  CHECK(entropy(CategoricalDistribution{1.0, 0.0}) == 0.0);
  CHECK(entropy(CategoricalDistribution{0.5, 0.5}) == doctest::Approx(std::log(2.0)).epsilon(1e-15));
  CHECK(std::abs(entropy(CategoricalDistribution{0.9, 0.1}) - 0.3250830) < 1e-7);
}

TEST_CASE("validation rejects bad vectors") {
  CHECK_ERROR_KIND(CategoricalDistribution({0.5, 0.6}), ErrorKind::InvalidArgument);
  CHECK_ERROR_KIND(CategoricalDistribution({1.5, -0.5}), ErrorKind::InvalidArgument);
  CHECK_ERROR_KIND(CategoricalDistribution({std::nan(""), 1.0}), ErrorKind::InvalidArgument);
  CHECK_ERROR_KIND(SimplexWeights({1.0, 0.0}), ErrorKind::InvalidArgument);
  CHECK_ERROR_KIND(SimplexWeights({0.5, 0.4}), ErrorKind::InvalidArgument);
  // rounding noise is renormalized away
  const CategoricalDistribution p{0.5 + 1e-11, 0.5};
  CHECK(std::abs(p.probs().sum() - 1.0) <= 1e-15);
}

TEST_CASE("log-space helpers") {
  const double inf = std::numeric_limits<double>::infinity();
  CHECK(log_sum_exp(vec({-inf, -inf})) == -inf);
  CHECK(log_sum_exp(vec({1000.0, 1000.0})) == doctest::Approx(1000.0 + std::log(2.0)));
  CHECK_ERROR_KIND(normalize_log_weights(vec({-inf, -inf})), ErrorKind::DegenerateDistribution);
  const auto n = normalize_log_weights(vec({std::log(3.0), std::log(1.0)}));
  CHECK(n.distribution[0] == doctest::Approx(0.75));
  CHECK(n.log_normalizer == doctest::Approx(std::log(4.0)));
}

TEST_CASE("sampling") {
  Rng rng(42);
  for (int i = 0; i < 100; ++i) {
    CHECK(sample(CategoricalDistribution{1.0, 0.0}, rng) == 0);
    CHECK(sample(CategoricalDistribution{0.0, 1.0}, rng) == 1);
  }
  Rng r2(7);
  const CategoricalDistribution half{0.5, 0.5};
  int zeros = 0;
  for (int i = 0; i < 100000; ++i) zeros += sample(half, r2) == 0;
  CHECK(std::abs(zeros / 100000.0 - 0.5) <= 0.01);
}

TEST_CASE("dirichlet draws are seeded and valid") {
  Rng a(3), b(3);
  for (int i = 0; i < 20; ++i) {
    const auto p = sample_dirichlet(5, 1.0, a);
    CHECK(p == sample_dirichlet(5, 1.0, b));
    CHECK(std::abs(p.probs().sum() - 1.0) <= 1e-12);
    CHECK((p.probs().array() > 0).all());
  }
}

TEST_CASE("property: kl is nonnegative and escort exponents compose") {
  Rng rng(11);
  for (int i = 0; i < 500; ++i) {
    const auto p = sample_dirichlet(6, 1.0, rng);
    const auto q = sample_dirichlet(6, 1.0, rng);
    CHECK(kl_divergence(p, q) >= 0.0);
    CHECK(entropy(p) <= std::log(6.0) + 1e-12);
    const double a = 0.5 + 2.0 * rng.uniform(), b = 0.5 + 2.0 * rng.uniform();
    CHECK(multiref::test::linf(escort(escort(p, a), b).probs(), escort(p, a * b).probs()) < 1e-12);
  }
}

}  // TEST_SUITE
