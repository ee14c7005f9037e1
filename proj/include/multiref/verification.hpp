#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <functional>
#include <string>
#include <vector>

#include "multiref/reference_mixtures.hpp"
#include "multiref/rng.hpp"

namespace multiref::verify {

/// A monitored statistic: the worst value over all instances against a bound.
struct Metric {
  std::string name;
  double worst = 0.0;
  double bound = 0.0;
  bool upper = true;  // worst <= bound when set, worst >= bound otherwise

  bool passed() const noexcept;
};

struct CheckResult {
  std::string name;
  std::size_t instances = 0;
  std::vector<Metric> metrics;

  bool passed() const noexcept;
  std::string summary() const;
};

/// Random instance used by the checks: |X| in [1, max_prompts], |Y| in
/// [2, max_responses], K in [1, max_k], gamma in {0.5, 1, 2}, member rows
/// 0.5 Dirichlet(1) + 0.5 uniform, weights of the same form, rewards uniform
/// on [0, 1].
struct CheckInstance {
  ReferenceEnsemble ensemble;
  Eigen::MatrixXd rewards;
  double gamma;
};
CheckInstance random_check_instance(Rng& rng, Eigen::Index max_prompts = 4, Eigen::Index max_responses = 8,
                                    std::size_t max_k = 4);

CheckResult theorem1_oracle_equivalence(std::size_t instances, unsigned threads);
CheckResult theorem1_value_formula(std::size_t instances, unsigned threads);
CheckResult theorem5_fkl_solution(std::size_t instances, unsigned threads);
CheckResult lemma4_escort_decomposition(std::size_t instances, unsigned threads);
CheckResult lemma7_mixture_decomposition(std::size_t instances, unsigned threads);
CheckResult lemma3_shift_invariance(std::size_t instances, unsigned threads);
CheckResult escort_normalizer_bound(std::size_t instances, unsigned threads);
CheckResult corollary1_rkl_slack(std::size_t instances, unsigned threads);
CheckResult corollary2_fkl_slack(std::size_t instances, unsigned threads);
CheckResult proposition2_objective_bound(std::size_t instances, unsigned threads);
CheckResult proposition1_gap_correlation(std::size_t instances, unsigned threads);
CheckResult lemma6_sensitivity(std::size_t instances, unsigned threads);
CheckResult mle_exhaustive_agreement(std::size_t instances, unsigned threads);
CheckResult dpo_gradient_rkl(std::size_t instances, unsigned threads);
CheckResult dpo_gradient_fkl(std::size_t instances, unsigned threads);

struct SuiteEntry {
  std::string name;
  std::size_t full_instances;
  std::size_t quick_instances;
  std::function<CheckResult(std::size_t, unsigned)> run;
};

/// The suite in execution order; theorem1_oracle_equivalence comes first.
const std::vector<SuiteEntry>& suite();

/// Runs every check; `on_result` sees each result as soon as it is ready.
std::vector<CheckResult> run_suite(bool quick, unsigned threads,
                                   const std::function<void(const CheckResult&)>& on_result = {});

}  // namespace multiref::verify
