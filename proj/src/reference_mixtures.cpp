#include "multiref/reference_mixtures.hpp"

#include <atomic>
#include <string>

namespace multiref {

namespace {
std::atomic<double> g_escort_fault{0.0};
}

namespace testing {
void set_escort_fault(double tilt) noexcept { g_escort_fault.store(tilt); }
double escort_fault() noexcept { return g_escort_fault.load(); }
}  // namespace testing

ConditionalPolicy::ConditionalPolicy(Eigen::MatrixXd table) : table_(std::move(table)) {
  if (table_.rows() < 1 || table_.cols() < 1) fail(ErrorKind::InvalidArgument, "policy table must be non-empty");
  for (Eigen::Index x = 0; x < table_.rows(); ++x) {
    const std::string what = "policy row " + std::to_string(x);
    table_.row(x) = detail::checked_probabilities<double>(table_.row(x).transpose(), what.c_str(), false).transpose();
  }
}

ConditionalPolicy ConditionalPolicy::uniform(Eigen::Index num_prompts, Eigen::Index num_responses) {
  return ConditionalPolicy(Eigen::MatrixXd::Constant(num_prompts, num_responses, 1.0 / num_responses));
}

ConditionalPolicy ConditionalPolicy::from_rows(std::span<const CategoricalDistribution> rows) {
  if (rows.empty()) fail(ErrorKind::InvalidArgument, "policy needs at least one row");
  Eigen::MatrixXd t(static_cast<Eigen::Index>(rows.size()), rows.front().size());
  for (std::size_t x = 0; x < rows.size(); ++x) {
    if (rows[x].size() != t.cols()) fail(ErrorKind::InvalidArgument, "policy rows differ in length");
    t.row(static_cast<Eigen::Index>(x)) = rows[x].probs().transpose();
  }
  return ConditionalPolicy(std::move(t));
}

ReferenceEnsemble::ReferenceEnsemble(std::vector<ConditionalPolicy> members, SimplexWeights weights)
    : members_(std::move(members)), weights_(std::move(weights)) {
  if (members_.empty()) fail(ErrorKind::InvalidArgument, "ensemble needs at least one member");
  if (static_cast<Eigen::Index>(members_.size()) != weights_.size())
    fail(ErrorKind::InvalidArgument, "ensemble has " + std::to_string(members_.size()) + " members but " +
                                         std::to_string(weights_.size()) + " weights");
  for (const auto& m : members_) {
    if (m.num_prompts() != members_.front().num_prompts() || m.num_responses() != members_.front().num_responses())
      fail(ErrorKind::InvalidArgument, "ensemble members differ in shape");
  }
}

std::vector<CategoricalDistribution> ReferenceEnsemble::rows(Eigen::Index x) const {
  std::vector<CategoricalDistribution> out;
  out.reserve(members_.size());
  for (const auto& m : members_) out.push_back(m.row(x));
  return out;
}

ReferenceEnsemble ReferenceEnsemble::single(std::size_t i) const {
  return ReferenceEnsemble({members_.at(i)}, SimplexWeights{1.0});
}

GeometricReference geometric_reference(const ReferenceEnsemble& ens) {
  const Eigen::Index nx = ens.num_prompts();
  const double fault = testing::escort_fault();
  if (ens.size() == 1 && fault == 0.0) {
    return {ens.member(0), Eigen::VectorXd::Ones(nx), Eigen::VectorXd::Zero(nx)};
  }
  Eigen::MatrixXd table(nx, ens.num_responses());
  Eigen::VectorXd log_f(nx);
  for (Eigen::Index x = 0; x < nx; ++x) {
    const auto rows = ens.rows(x);
    Vec<double> lw = geometric_log_weights<double>(rows, ens.weights());
    if (lw.maxCoeff() == kNegInf<double>)
      fail(ErrorKind::EmptySupportIntersection, "no response is supported by every reference at prompt " + std::to_string(x));
    if (fault != 0.0 && lw[0] != kNegInf<double>) lw[0] += fault;
    auto normalized = normalize_log_weights(lw);
    table.row(x) = normalized.distribution.probs().transpose();
    log_f[x] = normalized.log_normalizer;
  }
  return {ConditionalPolicy(std::move(table)), exp_exact(log_f.array()).matrix(), log_f};
}

CategoricalDistribution arithmetic_mixture(std::span<const CategoricalDistribution> qs, const SimplexWeights& w) {
  if (qs.empty() || static_cast<Eigen::Index>(qs.size()) != w.size())
    fail(ErrorKind::InvalidArgument, "arithmetic mixture: need one weight per component");
  if (qs.size() == 1) return qs.front();
  Vec<double> m = Vec<double>::Zero(qs.front().size());
  for (std::size_t i = 0; i < qs.size(); ++i) m += w[static_cast<Eigen::Index>(i)] * qs[i].probs();
  return CategoricalDistribution(std::move(m));
}

ConditionalPolicy arithmetic_reference(const ReferenceEnsemble& ens) {
  if (ens.size() == 1) return ens.member(0);
  Eigen::MatrixXd table = Eigen::MatrixXd::Zero(ens.num_prompts(), ens.num_responses());
  for (std::size_t i = 0; i < ens.size(); ++i)
    table += ens.weights()[static_cast<Eigen::Index>(i)] * ens.member(i).table();
  return ConditionalPolicy(std::move(table));
}

double tilted_kl_decomposition_residual(const CategoricalDistribution& p,
                                        std::span<const CategoricalDistribution> qs,
                                        const SimplexWeights& alpha) {
  double weighted = 0.0;
  for (std::size_t i = 0; i < qs.size(); ++i) weighted += alpha[static_cast<Eigen::Index>(i)] * kl_divergence(p, qs[i]);
  const Vec<double> lw = geometric_log_weights<double>(qs, alpha);
  if (lw.maxCoeff() == kNegInf<double>) fail(ErrorKind::AbsoluteContinuityViolation, "components share no support");
  const auto geo = normalize_log_weights(lw);
  return weighted - (kl_divergence(p, geo.distribution) - geo.log_normalizer);
}

double average_kl_decomposition_residual(std::span<const CategoricalDistribution> qs,
                                         const SimplexWeights& beta,
                                         const CategoricalDistribution& p) {
  double weighted = 0.0;
  double weighted_entropy = 0.0;
  for (std::size_t i = 0; i < qs.size(); ++i) {
    const double b = beta[static_cast<Eigen::Index>(i)];
    weighted += b * kl_divergence(qs[i], p);
    weighted_entropy += b * entropy(qs[i]);
  }
  const auto mix = arithmetic_mixture(qs, beta);
  return weighted - (entropy(mix) - weighted_entropy + kl_divergence(mix, p));
}

}  // namespace multiref
