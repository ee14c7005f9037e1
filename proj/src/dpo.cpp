#include "multiref/dpo.hpp"

#include <cmath>
#include <limits>
#include <string>

namespace multiref {

namespace {

void check_compatible(const TabularPolicyParams& params, const ConditionalPolicy& ref, const PreferenceDataset& data,
                      double gamma) {
  if (params.logits.rows() != ref.num_prompts() || params.logits.cols() != ref.num_responses())
    fail(ErrorKind::InvalidArgument, "policy logits and reference differ in shape");
  if (data.num_prompts != ref.num_prompts() || data.num_responses != ref.num_responses())
    fail(ErrorKind::InvalidArgument, "dataset shape does not match the reference");
  if (!(gamma > 0) || !std::isfinite(gamma)) fail(ErrorKind::InvalidArgument, "gamma must be positive and finite");
}

std::string where(const PreferenceTriple& t, Eigen::Index y) {
  return "response " + std::to_string(y) + " at prompt " + std::to_string(t.prompt);
}

// One pass over the dataset. When `grad` is non-null the analytic gradient with
// respect to the logits is accumulated into it.
double evaluate(const TabularPolicyParams& params, const ConditionalPolicy& ref, const PreferenceDataset& data,
                double gamma, KlMode mode, bool floor_probabilities, Eigen::MatrixXd* grad, std::size_t& floored) {
  check_compatible(params, ref, data, gamma);
  const Eigen::MatrixXd log_pi = params.log_policy();
  const double inv_gamma = 1.0 / gamma;
  double loss = 0.0;

  if (mode == KlMode::Reverse) {
    for (const auto& t : data.triples) {
      const double rw = ref(t.prompt, t.chosen);
      const double rl = ref(t.prompt, t.rejected);
      if (rw <= 0) fail(ErrorKind::AbsoluteContinuityViolation, "reference assigns zero probability to " + where(t, t.chosen));
      if (rl <= 0) fail(ErrorKind::AbsoluteContinuityViolation, "reference assigns zero probability to " + where(t, t.rejected));
      double arg = 0.0;
      if (t.chosen != t.rejected) {
        arg = inv_gamma * ((log_pi(t.prompt, t.chosen) - std::log(rw)) - (log_pi(t.prompt, t.rejected) - std::log(rl)));
      }
      loss += log_sigmoid(arg);
      if (grad && t.chosen != t.rejected) {
        const double g = sigmoid(-arg) * inv_gamma;
        (*grad)(t.prompt, t.chosen) += g;
        (*grad)(t.prompt, t.rejected) -= g;
      }
    }
    return loss;
  }

  const Eigen::MatrixXd pi = exp_exact(log_pi.array()).matrix();
  for (const auto& t : data.triples) {
    auto ratio = [&](Eigen::Index y, bool& is_floored) {
      double p = pi(t.prompt, y);
      is_floored = false;
      if (p < kProbabilityFloor) {
        if (!floor_probabilities) {
          if (p <= 0) fail(ErrorKind::DivisionByZeroPolicy, "policy assigns zero probability to " + where(t, y));
        } else {
          p = kProbabilityFloor;
          is_floored = true;
          ++floored;
        }
      }
      return ref(t.prompt, y) / p;
    };
    if (t.chosen == t.rejected) {
      bool f = false;
      (void)ratio(t.chosen, f);
      loss += log_sigmoid(0.0);
      continue;
    }
    bool floored_w = false, floored_l = false;
    const double aw = ratio(t.chosen, floored_w);
    const double al = ratio(t.rejected, floored_l);
    const double arg = inv_gamma * (al - aw);
    loss += log_sigmoid(arg);
    if (grad) {
      // d(ref/pi_y)/d logit_b = -(ref/pi_y)(delta_yb - pi_b)
      const double s = sigmoid(-arg) * inv_gamma;
      const auto row = pi.row(t.prompt);
      if (!floored_l) {
        (*grad).row(t.prompt) += s * al * row;
        (*grad)(t.prompt, t.rejected) -= s * al;
      }
      if (!floored_w) {
        (*grad).row(t.prompt) -= s * aw * row;
        (*grad)(t.prompt, t.chosen) += s * aw;
      }
    }
  }
  return loss;
}

}  // namespace

TabularPolicyParams TabularPolicyParams::from_reference(const ConditionalPolicy& ref, bool clamp) {
  Eigen::MatrixXd logits(ref.num_prompts(), ref.num_responses());
  for (Eigen::Index x = 0; x < logits.rows(); ++x)
    for (Eigen::Index y = 0; y < logits.cols(); ++y) {
      const double p = ref(x, y);
      logits(x, y) = p > 0 ? std::log(p) : (clamp ? std::log(kProbabilityFloor) : kNegInf<double>);
    }
  return {std::move(logits)};
}

Eigen::MatrixXd TabularPolicyParams::log_policy() const {
  Eigen::MatrixXd out(logits.rows(), logits.cols());
  for (Eigen::Index x = 0; x < logits.rows(); ++x) {
    const double lse = log_sum_exp(logits.row(x));
    if (!std::isfinite(lse)) fail(ErrorKind::NonFiniteLoss, "logit row " + std::to_string(x) + " has no finite normalizer");
    out.row(x) = logits.row(x).array() - lse;
  }
  return out;
}

ConditionalPolicy TabularPolicyParams::policy() const { return ConditionalPolicy(exp_exact(log_policy().array()).matrix()); }

void DpoTrainConfig::validate() const {
  if (!(gamma > 0)) fail(ErrorKind::InvalidArgument, "gamma must be positive");
  if (!(step_size > 0)) fail(ErrorKind::InvalidArgument, "step_size must be positive");
  if (max_iters < 1) fail(ErrorKind::InvalidArgument, "max_iters must be at least 1");
  if (!(grad_tolerance > 0)) fail(ErrorKind::InvalidArgument, "grad_tolerance must be positive");
}

double dpo_loss_rkl(const TabularPolicyParams& params, const ConditionalPolicy& ref, const PreferenceDataset& data,
                    double gamma) {
  std::size_t floored = 0;
  return evaluate(params, ref, data, gamma, KlMode::Reverse, true, nullptr, floored);
}

double dpo_loss_fkl(const TabularPolicyParams& params, const ConditionalPolicy& ref, const PreferenceDataset& data,
                    double gamma, bool floor_probabilities, LossDiagnostics* diagnostics) {
  std::size_t floored = 0;
  const double loss = evaluate(params, ref, data, gamma, KlMode::Forward, floor_probabilities, nullptr, floored);
  if (diagnostics) diagnostics->floored_evaluations += floored;
  return loss;
}

LossAndGradient dpo_loss_and_gradient(const TabularPolicyParams& params, const ConditionalPolicy& ref,
                                      const PreferenceDataset& data, double gamma, KlMode mode,
                                      bool floor_probabilities) {
  LossAndGradient out;
  out.gradient = Eigen::MatrixXd::Zero(params.logits.rows(), params.logits.cols());
  out.loss = evaluate(params, ref, data, gamma, mode, floor_probabilities, &out.gradient, out.floored_evaluations);
  return out;
}

DpoTrainResult dpo_train(const TabularPolicyParams& init, const ConditionalPolicy& ref, const PreferenceDataset& data,
                         const DpoTrainConfig& config) {
  config.validate();
  constexpr int kMaxHalvings = 30;
  DpoTrainResult result{init, {}, false, false, 0};
  for (std::size_t iter = 1; iter <= config.max_iters; ++iter) {
    const LossAndGradient lg =
        dpo_loss_and_gradient(result.params, ref, data, config.gamma, config.mode, config.floor_probabilities);
    result.floored_evaluations += lg.floored_evaluations;
    if (!std::isfinite(lg.loss))
      fail(ErrorKind::NonFiniteLoss, "loss is not finite at iteration " + std::to_string(iter));
    const double grad_norm = lg.gradient.cwiseAbs().maxCoeff();
    if (grad_norm <= config.grad_tolerance) {
      result.trace.push_back({iter, lg.loss, grad_norm, 0.0});
      result.converged = true;
      break;
    }
    double step = config.step_size;
    bool accepted = false;
    TabularPolicyParams candidate;
    for (int h = 0; h <= kMaxHalvings; ++h, step *= 0.5) {
      candidate.logits = result.params.logits + step * lg.gradient;
      std::size_t floored = 0;
      const double next = evaluate(candidate, ref, data, config.gamma, config.mode, config.floor_probabilities,
                                   nullptr, floored);
      if (std::isfinite(next) && next > lg.loss) {
        accepted = true;
        break;
      }
    }
    result.trace.push_back({iter, lg.loss, grad_norm, accepted ? step : 0.0});
    if (!accepted) {
      result.stalled = true;
      break;
    }
    result.params = std::move(candidate);
  }
  return result;
}

ImplicitRewardRanges implicit_reward_ranges(const ConditionalPolicy& pi, const ConditionalPolicy& ref, double gamma) {
  if (pi.num_prompts() != ref.num_prompts() || pi.num_responses() != ref.num_responses())
    fail(ErrorKind::InvalidArgument, "implicit_reward_ranges: shape mismatch");
  if (!(gamma > 0)) fail(ErrorKind::InvalidArgument, "gamma must be positive");
  ImplicitRewardRanges out;
  for (Eigen::Index x = 0; x < pi.num_prompts(); ++x) {
    double lo_log = std::numeric_limits<double>::infinity(), hi_log = -lo_log;
    double lo_ratio = lo_log, hi_ratio = -lo_log;
    for (Eigen::Index y = 0; y < pi.num_responses(); ++y) {
      const double p = pi(x, y), q = ref(x, y);
      if (p <= 0 && q <= 0) continue;
      if (p <= 0) fail(ErrorKind::DivisionByZeroPolicy, "policy is zero where the reference is not, prompt " + std::to_string(x));
      if (q <= 0) fail(ErrorKind::AbsoluteContinuityViolation, "reference is zero where the policy is not, prompt " + std::to_string(x));
      const double lr = std::log(p) - std::log(q);
      const double ratio = q / p;
      lo_log = std::min(lo_log, lr);
      hi_log = std::max(hi_log, lr);
      lo_ratio = std::min(lo_ratio, ratio);
      hi_ratio = std::max(hi_ratio, ratio);
    }
    if (hi_log >= lo_log) {
      out.b_max = std::max(out.b_max, (hi_log - lo_log) / gamma);
      out.d_max = std::max(out.d_max, (hi_ratio - lo_ratio) / gamma);
    }
  }
  return out;
}

}  // namespace multiref
