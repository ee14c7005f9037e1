#include "multiref/closed_form_policies.hpp"

#include <cassert>
#include <limits>
#include <string>

namespace multiref {

namespace {

void check_shapes(Eigen::Index nx, Eigen::Index ny, const Eigen::Ref<const Eigen::MatrixXd>& rewards, double gamma) {
  if (rewards.rows() != nx || rewards.cols() != ny) fail(ErrorKind::InvalidArgument, "reward table shape does not match the reference");
  if (!(gamma > 0) || !std::isfinite(gamma)) fail(ErrorKind::InvalidArgument, "gamma must be positive and finite");
  if (!rewards.allFinite()) fail(ErrorKind::InvalidArgument, "rewards must be finite");
}

constexpr int kMaxBisections = 200;
constexpr double kRootTolerance = 1e-12;
constexpr double kBracketSlack = 1e-9;

struct NormalizerRoot {
  double z;
  double support_max;
};

// Solves S(z) = sum_y ref(y) / (gamma (z - r(y))) = 1 for z > M, M the largest
// reward on the support of ref. S decreases strictly from +inf at M to at most
// 1 at M + 1/gamma, so the root there is unique.
NormalizerRoot fkl_normalizer(const Eigen::Ref<const Eigen::RowVectorXd>& ref, const Eigen::Ref<const Eigen::RowVectorXd>& r,
                              double gamma, Eigen::Index prompt) {
  double m = -std::numeric_limits<double>::infinity();
  for (Eigen::Index y = 0; y < ref.size(); ++y)
    if (ref[y] > 0 && r[y] > m) m = r[y];

  auto s_of = [&](double z) {
    double s = 0.0;
    for (Eigen::Index y = 0; y < ref.size(); ++y) {
      if (ref[y] <= 0) continue;
      const double gap = z - r[y];
      if (gap <= 0) return std::numeric_limits<double>::infinity();
      s += ref[y] / (gamma * gap);
    }
    return s;
  };

  double hi = m + 1.0 / gamma;
  const double s_hi = s_of(hi);
  if (s_hi > 1.0 + kBracketSlack)
    fail(ErrorKind::RootBracketFailure, "S(M + 1/gamma) = " + std::to_string(s_hi) + " > 1 at prompt " + std::to_string(prompt));
  if (std::abs(s_hi - 1.0) <= kRootTolerance) return {hi, m};

  double offset = std::max(1e-300, 1e-15 / gamma);
  double lo = m + offset;
  while (s_of(lo) < 1.0 && lo > m) {
    offset *= 0.5;
    lo = m + offset;
  }

  const double width_tol = 1e-14 / gamma;
  double best_z = hi;
  double best_err = std::abs(s_hi - 1.0);
  for (int it = 0; it < kMaxBisections; ++it) {
    const double mid = lo + 0.5 * (hi - lo);
    const double s = s_of(mid);
    assert(s_of(lo) >= s && s >= s_of(hi));
    const double err = std::abs(s - 1.0);
    if (err < best_err) {
      best_err = err;
      best_z = mid;
    }
    if (err <= kRootTolerance) break;
    if (s > 1.0) lo = mid;
    else hi = mid;
    if (hi - lo <= width_tol) break;
  }
  return {best_z, m};
}

}  // namespace

RklSolution solve_rkl(const ConditionalPolicy& ref, const Eigen::Ref<const Eigen::MatrixXd>& rewards, double gamma,
                      const Eigen::Ref<const Eigen::VectorXd>& log_escort_normalizer) {
  const Eigen::Index nx = ref.num_prompts();
  const Eigen::Index ny = ref.num_responses();
  check_shapes(nx, ny, rewards, gamma);
  Eigen::MatrixXd table(nx, ny);
  Eigen::VectorXd log_z(nx);
  for (Eigen::Index x = 0; x < nx; ++x) {
    Vec<double> lw(ny);
    for (Eigen::Index y = 0; y < ny; ++y)
      lw[y] = ref(x, y) > 0 ? std::log(ref(x, y)) + gamma * rewards(x, y) : kNegInf<double>;
    auto normalized = normalize_log_weights(lw);
    table.row(x) = normalized.distribution.probs().transpose();
    log_z[x] = normalized.log_normalizer;
  }
  Eigen::VectorXd objective = (log_z + log_escort_normalizer) / gamma;
  return {gamma, ConditionalPolicy(std::move(table)), log_z, log_escort_normalizer, objective};
}

RklSolution solve_rkl(const ConditionalPolicy& ref, const Eigen::Ref<const Eigen::MatrixXd>& rewards, double gamma) {
  return solve_rkl(ref, rewards, gamma, Eigen::VectorXd::Zero(ref.num_prompts()));
}

RklSolution solve_rkl(const ReferenceEnsemble& ens, const Eigen::Ref<const Eigen::MatrixXd>& rewards, double gamma) {
  const GeometricReference geo = geometric_reference(ens);
  return solve_rkl(geo.policy, rewards, gamma, geo.log_normalizers);
}

FklSolution solve_fkl(const ConditionalPolicy& ref, const Eigen::Ref<const Eigen::MatrixXd>& rewards, double gamma) {
  const Eigen::Index nx = ref.num_prompts();
  const Eigen::Index ny = ref.num_responses();
  check_shapes(nx, ny, rewards, gamma);
  Eigen::MatrixXd table = Eigen::MatrixXd::Zero(nx, ny);
  Eigen::VectorXd z(nx), residuals(nx), support_max(nx);
  for (Eigen::Index x = 0; x < nx; ++x) {
    const NormalizerRoot root = fkl_normalizer(ref.table().row(x), rewards.row(x), gamma, x);
    z[x] = root.z;
    support_max[x] = root.support_max;
    for (Eigen::Index y = 0; y < ny; ++y)
      if (ref(x, y) > 0) table(x, y) = ref(x, y) / (gamma * (root.z - rewards(x, y)));
    const double sum = table.row(x).sum();
    residuals[x] = std::abs(sum - 1.0);
    table.row(x) /= sum;
  }
  return {gamma, ConditionalPolicy(std::move(table)), z, residuals, support_max};
}

FklSolution solve_fkl(const ReferenceEnsemble& ens, const Eigen::Ref<const Eigen::MatrixXd>& rewards, double gamma) {
  return solve_fkl(arithmetic_reference(ens), rewards, gamma);
}

double shift_policy_check(const ReferenceEnsemble& ens, const Eigen::Ref<const Eigen::MatrixXd>& rewards, double gamma,
                          double delta) {
  const Eigen::MatrixXd shifted = rewards.array() + delta;
  const RklSolution base = solve_rkl(ens, rewards, gamma);
  const RklSolution moved = solve_rkl(ens, shifted, gamma);
  return (base.policy.table() - moved.policy.table()).cwiseAbs().maxCoeff();
}

double policy_reward_sensitivity(const ReferenceEnsemble& ens, const Eigen::Ref<const Eigen::MatrixXd>& rewards,
                                 double gamma, Eigen::Index x, Eigen::Index y) {
  const double p = solve_rkl(ens, rewards, gamma).policy(x, y);
  return gamma * p * (1.0 - p);
}

}  // namespace multiref
