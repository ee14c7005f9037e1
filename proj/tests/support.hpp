#pragma once

#include <Eigen/Dense>
#include <doctest.h>

#include <cmath>
#include <initializer_list>
#include <optional>
#include <vector>

#include "multiref/errors.hpp"
#include "multiref/reference_mixtures.hpp"

namespace multiref::test {

inline double linf(const Eigen::Ref<const Eigen::MatrixXd>& a, const Eigen::Ref<const Eigen::MatrixXd>& b) {
  return (a - b).cwiseAbs().maxCoeff();
}

inline Eigen::MatrixXd rows(std::initializer_list<std::initializer_list<double>> values) {
  Eigen::MatrixXd m(static_cast<Eigen::Index>(values.size()), static_cast<Eigen::Index>(values.begin()->size()));
  Eigen::Index i = 0;
  for (const auto& row : values) {
    Eigen::Index j = 0;
    for (double v : row) m(i, j++) = v;
    ++i;
  }
  return m;
}

inline Eigen::VectorXd vec(std::initializer_list<double> values) {
  return Eigen::Map<const Eigen::VectorXd>(values.begin(), static_cast<Eigen::Index>(values.size()));
}

inline ConditionalPolicy policy(std::initializer_list<std::initializer_list<double>> values) {
  return ConditionalPolicy(rows(values));
}

inline ReferenceEnsemble ensemble(std::vector<ConditionalPolicy> members, std::initializer_list<double> w) {
  return ReferenceEnsemble(std::move(members), SimplexWeights(w));
}

// Kind of the multiref::Error thrown by f, or nothing when f returns.
template <typename F>
std::optional<ErrorKind> error_kind(F&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.kind();
  }
  return std::nullopt;
}

}  // namespace multiref::test

#define CHECK_ERROR_KIND(expr, kind) CHECK(::multiref::test::error_kind([&] { (void)(expr); }) == (kind))
