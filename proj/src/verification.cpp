#include "multiref/verification.hpp"

#include <cmath>
#include <cstdio>
#include <limits>

#include "multiref/closed_form_policies.hpp"
#include "multiref/dpo.hpp"
#include "multiref/experiments.hpp"
#include "multiref/objectives_gaps.hpp"
#include "multiref/oracle.hpp"
#include "multiref/parallel.hpp"
#include "multiref/preference_rewards.hpp"

namespace multiref::verify {

namespace {

constexpr std::uint64_t kSuiteSeed = 0x5EED0F7E57ULL;

struct Bound {
  const char* name;
  double bound;
  bool upper;
};

// Runs `body` on `instances` independent streams and keeps, per metric, the
// worst value seen. `body` returns one value per bound, already the worst
// within its instance.
template <typename Body>
CheckResult run_check(const char* name, std::uint64_t id, std::size_t instances, unsigned threads,
                      std::vector<Bound> specs, Body&& body) {
  std::vector<std::vector<double>> values(instances);
  parallel_for(instances, threads, [&](std::size_t i) {
    Rng rng(derive_seed(kSuiteSeed, id, i));
    values[i] = body(rng, i);
  });
  CheckResult out{name, instances, {}};
  for (std::size_t m = 0; m < specs.size(); ++m) {
    Metric metric{specs[m].name, specs[m].upper ? -std::numeric_limits<double>::infinity()
                                                : std::numeric_limits<double>::infinity(),
                  specs[m].bound, specs[m].upper};
    for (const auto& v : values) {
      const double x = v.at(m);
      if (std::isnan(x)) metric.worst = x;
      if (std::isnan(metric.worst)) break;
      metric.worst = specs[m].upper ? std::max(metric.worst, x) : std::min(metric.worst, x);
    }
    out.metrics.push_back(metric);
  }
  return out;
}

Eigen::Index uniform_between(Rng& rng, Eigen::Index lo, Eigen::Index hi) {
  return lo + static_cast<Eigen::Index>(rng.uniform_index(static_cast<std::size_t>(hi - lo + 1)));
}

double random_gamma(Rng& rng) {
  static constexpr double kGammas[] = {0.5, 1.0, 2.0};
  return kGammas[rng.uniform_index(3)];
}

CategoricalDistribution mixed_row(Eigen::Index n, Rng& rng, double mix) {
  return CategoricalDistribution((1.0 - mix) * sample_dirichlet(n, 1.0, rng).probs().array() +
                                 mix / static_cast<double>(n));
}

SimplexWeights random_weights(std::size_t k, Rng& rng) {
  return SimplexWeights(mixed_row(static_cast<Eigen::Index>(k), rng, 0.5).probs());
}

double linf(const Eigen::VectorXd& a, const Eigen::VectorXd& b) { return (a - b).cwiseAbs().maxCoeff(); }

// (1/gamma) log sum_y prod_i pi_i^alpha_i exp(gamma r), evaluated with plain
// powers and sums.
double direct_max_value(const ReferenceEnsemble& ens, const Eigen::MatrixXd& r, double gamma, Eigen::Index x) {
  double s = 0.0;
  for (Eigen::Index y = 0; y < ens.num_responses(); ++y) {
    double prod = std::exp(gamma * r(x, y));
    for (std::size_t i = 0; i < ens.size(); ++i)
      prod *= std::pow(ens.member(i)(x, y), ens.weights()[static_cast<Eigen::Index>(i)]);
    s += prod;
  }
  return std::log(s) / gamma;
}

PreferenceDataset random_triples(Eigen::Index nx, Eigen::Index ny, std::size_t n, Rng& rng) {
  PreferenceDataset d{nx, ny, {}};
  for (std::size_t i = 0; i < n; ++i) {
    PreferenceTriple t;
    t.prompt = static_cast<Eigen::Index>(rng.uniform_index(static_cast<std::size_t>(nx)));
    t.chosen = static_cast<Eigen::Index>(rng.uniform_index(static_cast<std::size_t>(ny)));
    t.rejected = (t.chosen + 1 + static_cast<Eigen::Index>(rng.uniform_index(static_cast<std::size_t>(ny - 1)))) % ny;
    t.first = t.chosen;
    t.second = t.rejected;
    d.triples.push_back(t);
  }
  return d;
}

CheckResult dpo_gradient_check(const char* name, std::uint64_t id, KlMode mode, std::size_t instances,
                               unsigned threads) {
  return run_check(name, id, instances, threads, {{"gradient_relative_error", 1e-5, true}},
                   [mode](Rng& rng, std::size_t) {
                     const Eigen::Index nx = uniform_between(rng, 1, 3);
                     const Eigen::Index ny = uniform_between(rng, 2, 6);
                     const std::size_t k = static_cast<std::size_t>(uniform_between(rng, 1, 3));
                     const double gamma = random_gamma(rng);
                     const ReferenceEnsemble ens = random_ensemble(nx, ny, k, random_weights(k, rng), rng, 0.5);
                     const ConditionalPolicy ref =
                         mode == KlMode::Reverse ? geometric_reference(ens).policy : arithmetic_reference(ens);
                     TabularPolicyParams params{Eigen::MatrixXd(nx, ny)};
                     for (Eigen::Index x = 0; x < nx; ++x)
                       for (Eigen::Index y = 0; y < ny; ++y) params.logits(x, y) = 3.0 * rng.uniform() - 1.5;
                     const PreferenceDataset data =
                         random_triples(nx, ny, 1 + rng.uniform_index(40), rng);
                     const auto lg = dpo_loss_and_gradient(params, ref, data, gamma, mode);
                     const double eps = 1e-6;
                     Eigen::MatrixXd fd(nx, ny);
                     for (Eigen::Index x = 0; x < nx; ++x)
                       for (Eigen::Index y = 0; y < ny; ++y) {
                         TabularPolicyParams plus = params, minus = params;
                         plus.logits(x, y) += eps;
                         minus.logits(x, y) -= eps;
                         const double lp = mode == KlMode::Reverse ? dpo_loss_rkl(plus, ref, data, gamma)
                                                                   : dpo_loss_fkl(plus, ref, data, gamma);
                         const double lm = mode == KlMode::Reverse ? dpo_loss_rkl(minus, ref, data, gamma)
                                                                   : dpo_loss_fkl(minus, ref, data, gamma);
                         fd(x, y) = (lp - lm) / (2 * eps);
                       }
                     const double scale = lg.gradient.cwiseAbs().maxCoeff();
                     return std::vector<double>{(fd - lg.gradient).cwiseAbs().maxCoeff() / scale};
                   });
}

}  // namespace

bool Metric::passed() const noexcept {
  if (std::isnan(worst)) return false;
  return upper ? worst <= bound : worst >= bound;
}

bool CheckResult::passed() const noexcept {
  for (const auto& m : metrics)
    if (!m.passed()) return false;
  return true;
}

std::string CheckResult::summary() const {
  std::string out;
  for (const auto& m : metrics) {
    char buf[160];
    std::snprintf(buf, sizeof buf, "%s%s=%.3e (%s %.0e)", out.empty() ? "" : "; ", m.name.c_str(), m.worst,
                  m.upper ? "<=" : ">=", m.bound);
    out += buf;
  }
  return out;
}

CheckInstance random_check_instance(Rng& rng, Eigen::Index max_prompts, Eigen::Index max_responses,
                                    std::size_t max_k) {
  const Eigen::Index nx = uniform_between(rng, 1, max_prompts);
  const Eigen::Index ny = uniform_between(rng, 2, max_responses);
  const auto k = static_cast<std::size_t>(uniform_between(rng, 1, static_cast<Eigen::Index>(max_k)));
  const double gamma = random_gamma(rng);
  SimplexWeights w = random_weights(k, rng);
  ReferenceEnsemble ens = random_ensemble(nx, ny, k, w, rng, 0.5);
  Eigen::MatrixXd r(nx, ny);
  for (Eigen::Index x = 0; x < nx; ++x)
    for (Eigen::Index y = 0; y < ny; ++y) r(x, y) = rng.uniform();
  return {std::move(ens), std::move(r), gamma};
}

CheckResult theorem1_oracle_equivalence(std::size_t instances, unsigned threads) {
  return run_check("theorem1_oracle_equivalence", 1, instances, threads,
                   {{"policy_linf", 1e-6, true}, {"closed_minus_oracle", 1e-9, true}, {"oracle_minus_closed", 1e-9, true}},
                   [](Rng& rng, std::size_t) {
                     const CheckInstance inst = random_check_instance(rng);
                     const RklSolution sol = solve_rkl(inst.ensemble, inst.rewards, inst.gamma);
                     double d = 0, above = -1, below = -1;
                     for (Eigen::Index x = 0; x < inst.rewards.rows(); ++x) {
                       const OracleResult o = maximize_rkl_objective(inst.ensemble, inst.rewards, inst.gamma, x);
                       d = std::max(d, linf(o.policy.probs(), sol.policy.table().row(x).transpose()));
                       above = std::max(above, sol.objective_value[x] - o.value);
                       below = std::max(below, o.value - sol.objective_value[x]);
                     }
                     return std::vector<double>{d, above, below};
                   });
}

// Shares stream id 1 with the oracle check so both see the same instances.
CheckResult theorem1_value_formula(std::size_t instances, unsigned threads) {
  return run_check("theorem1_value_formula", 1, instances, threads,
                   {{"closed_form_value_error", 1e-10, true},
                    {"multi_kl_objective_error", 1e-10, true},
                    {"escort_objective_error", 1e-10, true}},
                   [](Rng& rng, std::size_t) {
                     const CheckInstance inst = random_check_instance(rng);
                     const GeometricReference geo = geometric_reference(inst.ensemble);
                     const RklSolution sol = solve_rkl(inst.ensemble, inst.rewards, inst.gamma);
                     double e0 = 0, e1 = 0, e2 = 0;
                     for (Eigen::Index x = 0; x < inst.rewards.rows(); ++x) {
                       const double direct = direct_max_value(inst.ensemble, inst.rewards, inst.gamma, x);
                       e0 = std::max(e0, std::abs(sol.objective_value[x] - direct));
                       e1 = std::max(e1, std::abs(multi_rkl_objective(inst.ensemble, sol.policy, inst.rewards,
                                                                      inst.gamma, x) - direct));
                       const double escort = rkl_objective(geo.policy, sol.policy, inst.rewards, inst.gamma, x);
                       e2 = std::max(e2, std::abs(escort - (direct - geo.log_normalizers[x] / inst.gamma)));
                     }
                     return std::vector<double>{e0, e1, e2};
                   });
}

CheckResult theorem5_fkl_solution(std::size_t instances, unsigned threads) {
  return run_check(
      "theorem5_fkl_solution", 3, instances, threads,
      {{"normalization_error", 1e-10, true},
       {"first_order_residual", 1e-8, true},
       {"bracket_violations", 0.0, true},
       {"oracle_policy_linf", 1e-5, true},
       {"oracle_first_order_residual", 1e-4, true},
       {"reference_instance_z_error", 1e-9, true}},
      [](Rng& rng, std::size_t i) {
        const CheckInstance inst = random_check_instance(rng);
        const ConditionalPolicy ref = arithmetic_reference(inst.ensemble);
        const FklSolution sol = solve_fkl(ref, inst.rewards, inst.gamma);
        double norm = 0, foc = 0, bracket = 0, olinf = 0, ofoc = 0;
        for (Eigen::Index x = 0; x < inst.rewards.rows(); ++x) {
          const auto p = sol.policy.table().row(x);
          norm = std::max(norm, std::abs(p.sum() - 1.0));
          const double z = sol.z_tilde[x];
          for (Eigen::Index y = 0; y < p.size(); ++y)
            if (ref(x, y) > 0) foc = std::max(foc, std::abs(inst.rewards(x, y) + ref(x, y) / (inst.gamma * p[y]) - z));
          if (!(sol.support_max_reward[x] < z) || !(z <= inst.rewards.row(x).maxCoeff() + 1.0 / inst.gamma)) bracket += 1;
          const OracleResult o = maximize_fkl_objective(inst.ensemble, inst.rewards, inst.gamma, x);
          olinf = std::max(olinf, linf(o.policy.probs(), p.transpose()));
          const Eigen::VectorXd q = o.policy.probs();
          const double z_hat = q.dot(inst.rewards.row(x).transpose()) + 1.0 / inst.gamma;
          for (Eigen::Index y = 0; y < q.size(); ++y)
            if (ref(x, y) > 0) ofoc = std::max(ofoc, std::abs(inst.rewards(x, y) + ref(x, y) / (inst.gamma * q[y]) - z_hat));
        }
        double zerr = 0;
        if (i == 0) {
          const ConditionalPolicy half(Eigen::MatrixXd::Constant(1, 2, 0.5));
          Eigen::MatrixXd r(1, 2);
          r << 1.0, 0.0;
          zerr = std::abs(solve_fkl(half, r, 1.0).z_tilde[0] - (1.0 + std::sqrt(0.5)));
        }
        return std::vector<double>{norm, foc, bracket, olinf, ofoc, zerr};
      });
}

CheckResult lemma4_escort_decomposition(std::size_t instances, unsigned threads) {
  return run_check("lemma4_escort_decomposition", 4, instances, threads, {{"residual", 1e-12, true}},
                   [](Rng& rng, std::size_t) {
                     const Eigen::Index ny = uniform_between(rng, 2, 8);
                     const auto k = static_cast<std::size_t>(uniform_between(rng, 1, 4));
                     std::vector<CategoricalDistribution> qs;
                     for (std::size_t i = 0; i < k; ++i) qs.push_back(sample_dirichlet(ny, 1.0, rng));
                     const CategoricalDistribution p = sample_dirichlet(ny, 1.0, rng);
                     const SimplexWeights a = random_weights(k, rng);
                     return std::vector<double>{std::abs(tilted_kl_decomposition_residual(p, qs, a))};
                   });
}

CheckResult lemma7_mixture_decomposition(std::size_t instances, unsigned threads) {
  return run_check("lemma7_mixture_decomposition", 5, instances, threads, {{"residual", 1e-12, true}},
                   [](Rng& rng, std::size_t) {
                     const Eigen::Index ny = uniform_between(rng, 2, 8);
                     const auto k = static_cast<std::size_t>(uniform_between(rng, 1, 4));
                     std::vector<CategoricalDistribution> qs;
                     for (std::size_t i = 0; i < k; ++i) qs.push_back(sample_dirichlet(ny, 1.0, rng));
                     const CategoricalDistribution p = sample_dirichlet(ny, 1.0, rng);
                     const SimplexWeights b = random_weights(k, rng);
                     return std::vector<double>{std::abs(average_kl_decomposition_residual(qs, b, p))};
                   });
}

CheckResult lemma3_shift_invariance(std::size_t instances, unsigned threads) {
  return run_check("lemma3_shift_invariance", 6, instances, threads, {{"policy_linf", 1e-12, true}},
                   [](Rng& rng, std::size_t) {
                     const CheckInstance inst = random_check_instance(rng);
                     const double delta = 20.0 * rng.uniform() - 10.0;
                     return std::vector<double>{shift_policy_check(inst.ensemble, inst.rewards, inst.gamma, delta)};
                   });
}

CheckResult escort_normalizer_bound(std::size_t instances, unsigned threads) {
  return run_check("escort_normalizer_bound", 7, instances, threads, {{"max_normalizer", 1.0 + 1e-12, true}},
                   [](Rng& rng, std::size_t) {
                     const Eigen::Index nx = uniform_between(rng, 1, 4);
                     const Eigen::Index ny = uniform_between(rng, 2, 8);
                     const auto k = static_cast<std::size_t>(uniform_between(rng, 1, 4));
                     const ReferenceEnsemble ens = random_ensemble(nx, ny, k, random_weights(k, rng), rng);
                     return std::vector<double>{geometric_reference(ens).normalizers.maxCoeff()};
                   });
}

CheckResult corollary1_rkl_slack(std::size_t instances, unsigned threads) {
  return run_check("corollary1_rkl_slack", 8, instances, threads, {{"min_slack", -1e-10, false}},
                   [](Rng& rng, std::size_t) {
                     const CheckInstance inst = random_check_instance(rng);
                     double s = std::numeric_limits<double>::infinity();
                     for (Eigen::Index x = 0; x < inst.rewards.rows(); ++x)
                       s = std::min(s, holder_corollary_slack(inst.ensemble, inst.rewards, inst.gamma, x, KlMode::Reverse));
                     return std::vector<double>{s};
                   });
}

CheckResult corollary2_fkl_slack(std::size_t instances, unsigned threads) {
  return run_check("corollary2_fkl_slack", 9, instances, threads, {{"min_slack", -1e-10, false}},
                   [](Rng& rng, std::size_t) {
                     const CheckInstance inst = random_check_instance(rng);
                     double s = std::numeric_limits<double>::infinity();
                     for (Eigen::Index x = 0; x < inst.rewards.rows(); ++x)
                       s = std::min(s, holder_corollary_slack(inst.ensemble, inst.rewards, inst.gamma, x, KlMode::Forward));
                     return std::vector<double>{s};
                   });
}

CheckResult proposition2_objective_bound(std::size_t instances, unsigned threads) {
  return run_check("proposition2_objective_bound", 10, instances, threads, {{"lhs_minus_rhs", 0.0, true}},
                   [](Rng& rng, std::size_t) {
                     const CheckInstance inst = random_check_instance(rng);
                     const RewardTable r(inst.rewards, 1.0);
                     double worst = -std::numeric_limits<double>::infinity();
                     for (std::size_t i = 0; i < inst.ensemble.size(); ++i)
                       for (Eigen::Index x = 0; x < inst.rewards.rows(); ++x) {
                         const BoundCheck b = objective_difference_bound_check(inst.ensemble, i, r, inst.gamma, x);
                         worst = std::max(worst, b.lhs - b.rhs);
                       }
                     return std::vector<double>{worst};
                   });
}

CheckResult proposition1_gap_correlation(std::size_t instances, unsigned threads) {
  return run_check("proposition1_gap_correlation", 11, instances, threads, {{"gap_minus_correlation", 1e-10, true}},
                   [](Rng& rng, std::size_t) {
                     const CheckInstance inst = random_check_instance(rng);
                     Eigen::MatrixXd r_hat(inst.rewards.rows(), inst.rewards.cols());
                     for (Eigen::Index x = 0; x < r_hat.rows(); ++x)
                       for (Eigen::Index y = 0; y < r_hat.cols(); ++y) r_hat(x, y) = rng.uniform();
                     double worst = -std::numeric_limits<double>::infinity();
                     for (Eigen::Index x = 0; x < r_hat.rows(); ++x) {
                       const auto [gap, corr] = gap_correlation_bound(inst.ensemble, inst.rewards, r_hat, inst.gamma, x);
                       worst = std::max(worst, gap - corr);
                     }
                     return std::vector<double>{worst};
                   });
}

CheckResult lemma6_sensitivity(std::size_t instances, unsigned threads) {
  return run_check("lemma6_sensitivity", 12, instances, threads, {{"relative_error", 1e-5, true}},
                   [](Rng& rng, std::size_t) {
                     const CheckInstance inst = random_check_instance(rng);
                     const auto x = static_cast<Eigen::Index>(rng.uniform_index(static_cast<std::size_t>(inst.rewards.rows())));
                     const auto y = static_cast<Eigen::Index>(rng.uniform_index(static_cast<std::size_t>(inst.rewards.cols())));
                     const double eps = 1e-6;
                     Eigen::MatrixXd plus = inst.rewards, minus = inst.rewards;
                     plus(x, y) += eps;
                     minus(x, y) -= eps;
                     const double fd = (solve_rkl(inst.ensemble, plus, inst.gamma).policy(x, y) -
                                        solve_rkl(inst.ensemble, minus, inst.gamma).policy(x, y)) /
                                       (2 * eps);
                     const double an = policy_reward_sensitivity(inst.ensemble, inst.rewards, inst.gamma, x, y);
                     return std::vector<double>{std::abs(fd - an) / std::abs(an)};
                   });
}

CheckResult mle_exhaustive_agreement(std::size_t instances, unsigned threads) {
  return run_check("mle_exhaustive_agreement", 13, instances, threads,
                   {{"index_mismatches", 0.0, true}, {"shift_tie_failures", 0.0, true}},
                   [](Rng& rng, std::size_t) {
                     const Eigen::Index nx = uniform_between(rng, 1, 3);
                     const Eigen::Index ny = uniform_between(rng, 2, 6);
                     const std::size_t grid = static_cast<std::size_t>(uniform_between(rng, 2, 16));
                     const std::size_t size = static_cast<std::size_t>(uniform_between(rng, 1, 32));
                     const RewardTable truth = random_lattice_table(nx, ny, 1.0, grid, rng);
                     const RewardClass cls = reward_class_grid(nx, ny, 1.0, grid, size, rng, truth);
                     const ReferenceEnsemble ens = random_ensemble(nx, ny, 1, SimplexWeights{1.0}, rng);
                     const PromptDistribution rho{CategoricalDistribution::uniform(nx)};
                     const PreferenceDataset data =
                         generate_preference_dataset(ens.member(0), rho, truth, 1 + rng.uniform_index(300), rng);
                     const double mismatch = mle_reward(cls, data).index == exhaustive_mle(cls, data) ? 0.0 : 1.0;

                     // A constant shift per table leaves every likelihood unchanged.
                     Eigen::MatrixXd base = 0.5 * truth.values();
                     const RewardTable low(base, 1.0);
                     const RewardTable high((base.array() + 0.25).matrix(), 1.0);
                     double ties = 0.0;
                     for (const RewardClass& c : {RewardClass{{low, high}, std::nullopt}, RewardClass{{high, low}, std::nullopt}}) {
                       if (mle_reward(c, data).index != 0) ties += 1;
                       if (exhaustive_mle(c, data) != 0) ties += 1;
                     }
                     return std::vector<double>{mismatch, ties};
                   });
}

CheckResult dpo_gradient_rkl(std::size_t instances, unsigned threads) {
  return dpo_gradient_check("dpo_gradient_rkl", 14, KlMode::Reverse, instances, threads);
}

CheckResult dpo_gradient_fkl(std::size_t instances, unsigned threads) {
  return dpo_gradient_check("dpo_gradient_fkl", 15, KlMode::Forward, instances, threads);
}

const std::vector<SuiteEntry>& suite() {
  static const std::vector<SuiteEntry> entries = {
      {"theorem1_oracle_equivalence", 100, 10, theorem1_oracle_equivalence},
      {"theorem1_value_formula", 100, 100, theorem1_value_formula},
      {"theorem5_fkl_solution", 100, 10, theorem5_fkl_solution},
      {"lemma4_escort_decomposition", 10000, 100, lemma4_escort_decomposition},
      {"lemma7_mixture_decomposition", 10000, 100, lemma7_mixture_decomposition},
      {"lemma3_shift_invariance", 10000, 100, lemma3_shift_invariance},
      {"escort_normalizer_bound", 10000, 100, escort_normalizer_bound},
      {"corollary1_rkl_slack", 10000, 100, corollary1_rkl_slack},
      {"corollary2_fkl_slack", 10000, 100, corollary2_fkl_slack},
      {"proposition2_objective_bound", 10000, 100, proposition2_objective_bound},
      {"proposition1_gap_correlation", 10000, 100, proposition1_gap_correlation},
      {"lemma6_sensitivity", 100, 100, lemma6_sensitivity},
      {"mle_exhaustive_agreement", 1000, 100, mle_exhaustive_agreement},
      {"dpo_gradient_rkl", 100, 100, dpo_gradient_rkl},
      {"dpo_gradient_fkl", 100, 100, dpo_gradient_fkl},
  };
  return entries;
}

std::vector<CheckResult> run_suite(bool quick, unsigned threads, const std::function<void(const CheckResult&)>& on_result) {
  std::vector<CheckResult> out;
  for (const auto& e : suite()) {
    out.push_back(e.run(quick ? e.quick_instances : e.full_instances, threads));
    if (on_result) on_result(out.back());
  }
  return out;
}

}  // namespace multiref::verify
