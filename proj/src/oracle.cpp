#include "multiref/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include "multiref/errors.hpp"
#include "multiref/rng.hpp"

namespace multiref {

namespace {

constexpr double kLogFloor = 1e-300;
constexpr double kFklFloor = 1e-12;
constexpr int kMaxBacktracks = 60;
constexpr std::uint64_t kRestartSeed = 0x0AC1E5EEDULL;

using Objective = std::function<double(const Eigen::VectorXd&)>;
using Gradient = std::function<Eigen::VectorXd(const Eigen::VectorXd&)>;

struct Ascent {
  Eigen::VectorXd point;
  double value;
  std::size_t iterations;
  double stationarity;
};

// Projected gradient ascent with backtracking. A step is accepted when the
// objective rises by the usual sufficient-increase margin, up to a few ulps of
// rounding slack; after an accepted step the trial step grows again, capped at
// config.step.
Ascent ascend(Eigen::VectorXd p, const Objective& f, const Gradient& grad, const OracleConfig& config,
              double floor_before_projection) {
  double fv = f(p);
  double t = config.step;
  double stationarity = std::numeric_limits<double>::infinity();
  std::size_t it = 0;
  for (; it < config.iters; ++it) {
    const Eigen::VectorXd g = grad(p);
    bool accepted = false;
    Eigen::VectorXd q;
    double fq = 0.0;
    for (int h = 0; h < kMaxBacktracks; ++h) {
      Eigen::VectorXd moved = p + t * g;
      if (floor_before_projection > 0) moved = moved.cwiseMax(floor_before_projection);
      q = project_to_simplex(moved);
      fq = f(q);
      const double d2 = (q - p).squaredNorm();
      const double slack = 1e-14 * (1.0 + std::abs(fv));
      if (std::isfinite(fq) && fq >= fv + 0.5 * d2 / t - slack) {
        accepted = true;
        break;
      }
      t *= 0.5;
    }
    if (!accepted) break;
    stationarity = (q - p).cwiseAbs().maxCoeff() / t;
    p = std::move(q);
    fv = fq;
    if (stationarity <= config.tolerance) {
      ++it;
      break;
    }
    t = std::min(config.step, 1.25 * t);
  }
  return {std::move(p), fv, it, stationarity};
}

// Best of config.restarts runs: restart 0 starts at the uniform distribution,
// later ones at Dirichlet(1) draws. Ties keep the earliest restart.
Ascent best_of_restarts(Eigen::Index m, const Objective& f, const Gradient& grad, const OracleConfig& config,
                        double floor_before_projection) {
  Ascent best{Eigen::VectorXd(), -std::numeric_limits<double>::infinity(), 0, 0.0};
  for (std::size_t k = 0; k < config.restarts; ++k) {
    Eigen::VectorXd start;
    if (k == 0) {
      start = Eigen::VectorXd::Constant(m, 1.0 / static_cast<double>(m));
    } else {
      Rng rng(derive_seed(kRestartSeed, k, static_cast<std::uint64_t>(m)));
      start = sample_dirichlet(m, 1.0, rng).probs();
      if (floor_before_projection > 0) start = project_to_simplex(start.cwiseMax(floor_before_projection));
    }
    Ascent run = ascend(std::move(start), f, grad, config, floor_before_projection);
    if (k == 0 || run.value > best.value) best = std::move(run);
  }
  return best;
}

void check_instance(const ReferenceEnsemble& ens, const Eigen::Ref<const Eigen::MatrixXd>& r, double gamma,
                    Eigen::Index x) {
  if (r.rows() != ens.num_prompts() || r.cols() != ens.num_responses())
    fail(ErrorKind::InvalidArgument, "oracle: reward shape does not match the ensemble");
  if (x < 0 || x >= ens.num_prompts()) fail(ErrorKind::InvalidArgument, "oracle: prompt out of range");
  if (!(gamma > 0)) fail(ErrorKind::InvalidArgument, "oracle: gamma must be positive");
}

OracleResult expand(Eigen::Index ny, const std::vector<Eigen::Index>& support, const Ascent& a) {
  Eigen::VectorXd full = Eigen::VectorXd::Zero(ny);
  for (std::size_t j = 0; j < support.size(); ++j) full[support[j]] = a.point[static_cast<Eigen::Index>(j)];
  full /= full.sum();
  return {CategoricalDistribution(std::move(full)), a.value, a.iterations, a.stationarity};
}

}  // namespace

OracleConfig OracleConfig::for_gamma(double gamma) {
  if (!(gamma > 0)) fail(ErrorKind::InvalidArgument, "gamma must be positive");
  OracleConfig c;
  c.step = 0.1 / gamma;
  return c;
}

void OracleConfig::validate() const {
  if (restarts < 1 || iters < 1 || !(step > 0) || !(tolerance > 0))
    fail(ErrorKind::InvalidArgument, "oracle config fields must all be positive");
}

Eigen::VectorXd project_to_simplex(const Eigen::Ref<const Eigen::VectorXd>& v) {
  const Eigen::Index n = v.size();
  std::vector<double> u(v.data(), v.data() + n);
  std::sort(u.begin(), u.end(), std::greater<>());
  double cumsum = 0.0, theta = 0.0;
  for (Eigen::Index j = 0; j < n; ++j) {
    cumsum += u[static_cast<std::size_t>(j)];
    const double candidate = (cumsum - 1.0) / static_cast<double>(j + 1);
    if (u[static_cast<std::size_t>(j)] - candidate > 0) theta = candidate;
  }
  return (v.array() - theta).cwiseMax(0.0).matrix();
}

OracleResult maximize_rkl_objective(const ReferenceEnsemble& ens, const Eigen::Ref<const Eigen::MatrixXd>& r,
                                    double gamma, Eigen::Index x, const OracleConfig& config) {
  check_instance(ens, r, gamma, x);
  config.validate();
  const Eigen::Index ny = ens.num_responses();
  std::vector<Eigen::Index> support;
  for (Eigen::Index y = 0; y < ny; ++y) {
    bool all = true;
    for (const auto& m : ens.members()) all = all && m(x, y) > 0;
    if (all) support.push_back(y);
  }
  if (support.empty()) fail(ErrorKind::EmptySupportIntersection, "oracle: member supports do not intersect");
  const auto m = static_cast<Eigen::Index>(support.size());
  const std::size_t k = ens.size();

  Eigen::VectorXd rs(m);
  Eigen::MatrixXd refs(static_cast<Eigen::Index>(k), m);
  for (Eigen::Index j = 0; j < m; ++j) {
    rs[j] = r(x, support[static_cast<std::size_t>(j)]);
    for (std::size_t i = 0; i < k; ++i) refs(static_cast<Eigen::Index>(i), j) = ens.member(i)(x, support[static_cast<std::size_t>(j)]);
  }
  const Eigen::VectorXd alpha = ens.weights().weights();

  const Objective f = [&](const Eigen::VectorXd& p) {
    double value = 0.0, penalty = 0.0;
    for (Eigen::Index j = 0; j < m; ++j) value += p[j] * rs[j];
    for (std::size_t i = 0; i < k; ++i) {
      double kl = 0.0;
      for (Eigen::Index j = 0; j < m; ++j)
        if (p[j] > 0) kl += p[j] * std::log(p[j] / refs(static_cast<Eigen::Index>(i), j));
      penalty += alpha[static_cast<Eigen::Index>(i)] * kl;
    }
    return value - penalty / gamma;
  };
  const Gradient grad = [&](const Eigen::VectorXd& p) {
    Eigen::VectorXd g(m);
    for (Eigen::Index j = 0; j < m; ++j) {
      const double pj = std::max(p[j], kLogFloor);
      double d = 0.0;
      for (std::size_t i = 0; i < k; ++i)
        d += alpha[static_cast<Eigen::Index>(i)] * (std::log(pj / refs(static_cast<Eigen::Index>(i), j)) + 1.0);
      g[j] = rs[j] - d / gamma;
    }
    return g;
  };
  return expand(ny, support, best_of_restarts(m, f, grad, config, 0.0));
}

OracleResult maximize_rkl_objective(const ReferenceEnsemble& ens, const Eigen::Ref<const Eigen::MatrixXd>& r,
                                    double gamma, Eigen::Index x) {
  return maximize_rkl_objective(ens, r, gamma, x, OracleConfig::for_gamma(gamma));
}

OracleResult maximize_fkl_objective(const ReferenceEnsemble& ens, const Eigen::Ref<const Eigen::MatrixXd>& r,
                                    double gamma, Eigen::Index x, const OracleConfig& config) {
  check_instance(ens, r, gamma, x);
  config.validate();
  const Eigen::Index ny = ens.num_responses();
  std::vector<Eigen::Index> support;
  for (Eigen::Index y = 0; y < ny; ++y) {
    bool any = false;
    for (const auto& m : ens.members()) any = any || m(x, y) > 0;
    if (any) support.push_back(y);
  }
  const auto m = static_cast<Eigen::Index>(support.size());
  const std::size_t k = ens.size();

  Eigen::VectorXd rs(m);
  Eigen::MatrixXd refs(static_cast<Eigen::Index>(k), m);
  for (Eigen::Index j = 0; j < m; ++j) {
    rs[j] = r(x, support[static_cast<std::size_t>(j)]);
    for (std::size_t i = 0; i < k; ++i) refs(static_cast<Eigen::Index>(i), j) = ens.member(i)(x, support[static_cast<std::size_t>(j)]);
  }
  const Eigen::VectorXd beta = ens.weights().weights();

  const Objective f = [&](const Eigen::VectorXd& p) {
    double value = 0.0, penalty = 0.0;
    for (Eigen::Index j = 0; j < m; ++j) value += p[j] * rs[j];
    for (std::size_t i = 0; i < k; ++i) {
      double kl = 0.0;
      for (Eigen::Index j = 0; j < m; ++j) {
        const double q = refs(static_cast<Eigen::Index>(i), j);
        if (q > 0) kl += q * std::log(q / std::max(p[j], kFklFloor));
      }
      penalty += beta[static_cast<Eigen::Index>(i)] * kl;
    }
    return value - penalty / gamma;
  };
  const Gradient grad = [&](const Eigen::VectorXd& p) {
    Eigen::VectorXd g(m);
    for (Eigen::Index j = 0; j < m; ++j) {
      const double pj = std::max(p[j], kFklFloor);
      double d = 0.0;
      for (std::size_t i = 0; i < k; ++i) d += beta[static_cast<Eigen::Index>(i)] * refs(static_cast<Eigen::Index>(i), j) / pj;
      g[j] = rs[j] + d / gamma;
    }
    return g;
  };
  return expand(ny, support, best_of_restarts(m, f, grad, config, kFklFloor));
}

OracleResult maximize_fkl_objective(const ReferenceEnsemble& ens, const Eigen::Ref<const Eigen::MatrixXd>& r,
                                    double gamma, Eigen::Index x) {
  return maximize_fkl_objective(ens, r, gamma, x, OracleConfig::for_gamma(gamma));
}

std::size_t exhaustive_mle(const RewardClass& cls, const PreferenceDataset& data) {
  if (cls.candidates.empty()) fail(ErrorKind::InvalidArgument, "exhaustive_mle: reward class is empty");
  if (data.triples.empty()) fail(ErrorKind::EmptyDataset, "exhaustive_mle: dataset is empty");
  std::size_t best = 0;
  double best_ll = 0.0;
  for (std::size_t k = 0; k < cls.candidates.size(); ++k) {
    const Eigen::MatrixXd& r = cls.candidates[k].values();
    double ll = 0.0;
    for (const auto& t : data.triples) {
      const double p = 1.0 / (1.0 + std::exp(-(r(t.prompt, t.chosen) - r(t.prompt, t.rejected))));
      ll += std::log(p);
    }
    ll /= static_cast<double>(data.triples.size());
    if (k == 0 || improves_likelihood(ll, best_ll)) {
      best_ll = ll;
      best = k;
    }
  }
  return best;
}

}  // namespace multiref
