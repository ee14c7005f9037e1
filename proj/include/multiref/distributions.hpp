#pragma once

// Finite categorical distributions: validation, log-space normalization,
// escort transforms, KL divergence, entropy and sampling.
//
// Support convention: outcome a is in the support of p iff p(a) > 0 exactly.

#include <Eigen/Dense>

#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "multiref/errors.hpp"
#include "multiref/rng.hpp"

namespace multiref {

/// Allowed deviation of a probability vector's sum from 1.
inline constexpr double kSumTolerance = 1e-12;
/// Deviations up to this are treated as rounding noise and renormalized away.
inline constexpr double kRenormalizeTolerance = 1e-9;

template <typename Scalar>
using Vec = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

template <typename Scalar>
inline constexpr Scalar kNegInf = -std::numeric_limits<Scalar>::infinity();

/// Entrywise exp with exp(-inf) = 0 exactly. Eigen's vectorized exp clamps
/// its argument and returns a denormal for -inf, which would put mass outside
/// the support.
template <typename Derived>
auto exp_exact(const Eigen::ArrayBase<Derived>& a) {
  using Scalar = typename Derived::Scalar;
  return a.unaryExpr([](Scalar v) { return v == -std::numeric_limits<Scalar>::infinity() ? Scalar(0) : std::exp(v); });
}

/// log(sum(exp(v))). Entries equal to -inf contribute nothing; returns -inf
/// when every entry is -inf.
template <typename Derived>
typename Derived::Scalar log_sum_exp(const Eigen::MatrixBase<Derived>& v) {
  using Scalar = typename Derived::Scalar;
  const Scalar m = v.maxCoeff();
  if (m == kNegInf<Scalar>) return m;
  return m + std::log(exp_exact(v.array() - m).sum());
}

namespace detail {

template <typename Scalar>
Vec<Scalar> checked_probabilities(Vec<Scalar> p, const char* what, bool strictly_positive) {
  if (p.size() < 1) fail(ErrorKind::InvalidArgument, std::string(what) + " must have at least one entry");
  for (Eigen::Index i = 0; i < p.size(); ++i) {
    const Scalar v = p[i];
    if (!std::isfinite(v) || v < 0 || (strictly_positive && v <= 0)) {
      fail(ErrorKind::InvalidArgument,
           std::string(what) + " entry " + std::to_string(i) + " = " + std::to_string(v) +
               (strictly_positive ? " is not strictly positive" : " is not a probability"));
    }
  }
  const Scalar sum = p.sum();
  const Scalar dev = std::abs(sum - Scalar(1));
  if (dev > Scalar(kRenormalizeTolerance)) {
    fail(ErrorKind::InvalidArgument,
         std::string(what) + " entries sum to " + std::to_string(sum) + ", expected 1");
  }
  if (dev > Scalar(kSumTolerance)) p /= sum;
  return p;
}

}  // namespace detail

/// Probability vector over a finite outcome set.
template <typename Scalar>
class Categorical {
 public:
  using Vector = Vec<Scalar>;

  explicit Categorical(Vector probs)
      : probs_(detail::checked_probabilities<Scalar>(std::move(probs), "probability vector", false)) {}

  Categorical(std::initializer_list<Scalar> probs)
      : Categorical(Eigen::Map<const Vector>(probs.begin(), static_cast<Eigen::Index>(probs.size()))) {}

  static Categorical uniform(Eigen::Index n) { return Categorical(Vector::Constant(n, Scalar(1) / n)); }

  static Categorical point_mass(Eigen::Index n, Eigen::Index at) {
    Vector p = Vector::Zero(n);
    p[at] = 1;
    return Categorical(std::move(p));
  }

  const Vector& probs() const noexcept { return probs_; }
  Eigen::Index size() const noexcept { return probs_.size(); }
  Scalar operator[](Eigen::Index i) const { return probs_[i]; }
  bool in_support(Eigen::Index i) const { return probs_[i] > 0; }

  Eigen::Index support_size() const { return (probs_.array() > 0).count(); }

  /// Entrywise log, with log 0 = -inf.
  Vector log_probs() const {
    Vector out(size());
    for (Eigen::Index i = 0; i < size(); ++i) out[i] = probs_[i] > 0 ? std::log(probs_[i]) : kNegInf<Scalar>;
    return out;
  }

  friend bool operator==(const Categorical& a, const Categorical& b) { return a.probs_ == b.probs_; }

 private:
  Vector probs_;
};

using CategoricalDistribution = Categorical<double>;

/// Strictly positive weights on the simplex (alpha or beta mixing weights).
template <typename Scalar>
class Simplex {
 public:
  using Vector = Vec<Scalar>;

  explicit Simplex(Vector weights)
      : weights_(detail::checked_probabilities<Scalar>(std::move(weights), "simplex weights", true)) {}

  Simplex(std::initializer_list<Scalar> w)
      : Simplex(Eigen::Map<const Vector>(w.begin(), static_cast<Eigen::Index>(w.size()))) {}

  static Simplex uniform(Eigen::Index n) { return Simplex(Vector::Constant(n, Scalar(1) / n)); }

  const Vector& weights() const noexcept { return weights_; }
  Eigen::Index size() const noexcept { return weights_.size(); }
  Scalar operator[](Eigen::Index i) const { return weights_[i]; }

 private:
  Vector weights_;
};

using SimplexWeights = Simplex<double>;

/// A distribution obtained by normalizing log-weights, with log of the
/// normalizer kept (it is a quantity of interest, e.g. log F_alpha).
template <typename Scalar>
struct LogNormalized {
  Categorical<Scalar> distribution;
  Scalar log_normalizer;
};

/// exp(log_weights - lse(log_weights)). Throws DegenerateDistribution when
/// every weight is zero.
template <typename Derived>
LogNormalized<typename Derived::Scalar> normalize_log_weights(const Eigen::MatrixBase<Derived>& log_weights) {
  using Scalar = typename Derived::Scalar;
  const Scalar lse = log_sum_exp(log_weights);
  if (lse == kNegInf<Scalar>) fail(ErrorKind::DegenerateDistribution, "normalizer is zero");
  Vec<Scalar> p = exp_exact(log_weights.array() - lse).matrix();
  return {Categorical<Scalar>(std::move(p)), lse};
}

/// Entry a proportional to p(a)^lambda. lambda = 1 returns p unchanged;
/// lambda = 0 returns the uniform distribution over the support of p.
template <typename Scalar>
Categorical<Scalar> escort(const Categorical<Scalar>& p, Scalar lambda) {
  if (!(lambda >= 0) || !std::isfinite(lambda)) fail(ErrorKind::InvalidArgument, "escort exponent must be >= 0");
  if (lambda == Scalar(1)) return p;
  if (lambda == Scalar(0)) {
    Vec<Scalar> u = (p.probs().array() > 0).template cast<Scalar>().matrix();
    return Categorical<Scalar>(u / u.sum());
  }
  return normalize_log_weights((lambda * p.log_probs().array()).matrix()).distribution;
}

/// Entry a proportional to p(a)^lambda q(a)^(1-lambda), lambda in [0, 1].
template <typename Scalar>
Categorical<Scalar> generalized_escort(const Categorical<Scalar>& p, const Categorical<Scalar>& q, Scalar lambda) {
  if (p.size() != q.size()) fail(ErrorKind::InvalidArgument, "generalized_escort: size mismatch");
  if (!(lambda >= 0 && lambda <= 1)) fail(ErrorKind::InvalidArgument, "generalized_escort: lambda must lie in [0,1]");
  if (lambda == Scalar(1)) return p;
  if (lambda == Scalar(0)) return q;
  const Vec<Scalar> lp = p.log_probs();
  const Vec<Scalar> lq = q.log_probs();
  Vec<Scalar> lw(p.size());
  for (Eigen::Index a = 0; a < p.size(); ++a) {
    lw[a] = (lp[a] == kNegInf<Scalar> || lq[a] == kNegInf<Scalar>) ? kNegInf<Scalar>
                                                                     : lambda * lp[a] + (1 - lambda) * lq[a];
  }
  if (lw.maxCoeff() == kNegInf<Scalar>) fail(ErrorKind::DegenerateDistribution, "generalized_escort: disjoint supports");
  return normalize_log_weights(lw).distribution;
}

/// sum_i w_i log q_i(a), or -inf where any q_i(a) = 0: the unnormalized log
/// of the weighted geometric mean of the q_i.
template <typename Scalar>
Vec<Scalar> geometric_log_weights(std::span<const Categorical<Scalar>> qs, const Simplex<Scalar>& w) {
  if (qs.empty() || static_cast<Eigen::Index>(qs.size()) != w.size())
    fail(ErrorKind::InvalidArgument, "geometric mixture: need one weight per component");
  const Eigen::Index n = qs.front().size();
  Vec<Scalar> lw = Vec<Scalar>::Zero(n);
  for (std::size_t i = 0; i < qs.size(); ++i) {
    if (qs[i].size() != n) fail(ErrorKind::InvalidArgument, "geometric mixture: size mismatch");
    for (Eigen::Index a = 0; a < n; ++a) {
      const Scalar q = qs[i][a];
      lw[a] = (q > 0 && lw[a] != kNegInf<Scalar>) ? lw[a] + w[static_cast<Eigen::Index>(i)] * std::log(q)
                                                  : kNegInf<Scalar>;
    }
  }
  return lw;
}

/// KL(p || q) = sum_a p(a) log(p(a)/q(a)), with 0 log(0/.) = 0.
/// Throws AbsoluteContinuityViolation if p(a) > 0 = q(a) for some a.
template <typename Scalar>
Scalar kl_divergence(const Categorical<Scalar>& p, const Categorical<Scalar>& q) {
  if (p.size() != q.size()) fail(ErrorKind::InvalidArgument, "kl_divergence: size mismatch");
  Scalar acc = 0;
  for (Eigen::Index a = 0; a < p.size(); ++a) {
    const Scalar pa = p[a];
    if (pa <= 0) continue;
    const Scalar qa = q[a];
    if (qa <= 0) {
      fail(ErrorKind::AbsoluteContinuityViolation,
           "kl_divergence: p(" + std::to_string(a) + ") > 0 but q(" + std::to_string(a) + ") = 0");
    }
    acc += pa * (std::log(pa) - std::log(qa));
  }
  return acc < 0 ? Scalar(0) : acc;
}

template <typename Scalar>
Scalar entropy(const Categorical<Scalar>& p) {
  Scalar acc = 0;
  for (Eigen::Index a = 0; a < p.size(); ++a)
    if (p[a] > 0) acc -= p[a] * std::log(p[a]);
  return acc;
}

/// Inverse-CDF draw over the stored outcome order.
template <typename Scalar>
Eigen::Index sample(const Categorical<Scalar>& p, Rng& rng) {
  const double u = rng.uniform();
  double acc = 0;
  Eigen::Index last = 0;
  for (Eigen::Index a = 0; a < p.size(); ++a) {
    if (p[a] <= 0) continue;
    acc += static_cast<double>(p[a]);
    last = a;
    if (u < acc) return a;
  }
  return last;
}

/// Dirichlet(concentration * 1) draw.
inline CategoricalDistribution sample_dirichlet(Eigen::Index n, double concentration, Rng& rng) {
  Vec<double> g(n);
  if (concentration == 1.0) {
    for (Eigen::Index i = 0; i < n; ++i) g[i] = rng.exponential();
  } else {
    // Marsaglia-Tsang needs normals; integer concentrations are sums of exponentials.
    const int k = static_cast<int>(std::lround(concentration));
    if (k < 1 || std::abs(concentration - k) > 0) fail(ErrorKind::InvalidArgument, "Dirichlet concentration must be a positive integer");
    for (Eigen::Index i = 0; i < n; ++i) {
      g[i] = 0;
      for (int j = 0; j < k; ++j) g[i] += rng.exponential();
    }
  }
  return CategoricalDistribution(g / g.sum());
}

}  // namespace multiref
