#include "multiref/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "multiref/closed_form_policies.hpp"
#include "multiref/parallel.hpp"

namespace multiref {

void SweepConfig::validate() const {
  if (num_prompts < 1 || num_responses < 1) fail(ErrorKind::InvalidArgument, "shape must be positive");
  if (k < 1) fail(ErrorKind::InvalidArgument, "K must be at least 1");
  if (!(gamma > 0) || !std::isfinite(gamma)) fail(ErrorKind::InvalidArgument, "gamma must be positive");
  if (!(r_max > 0) || !std::isfinite(r_max)) fail(ErrorKind::InvalidArgument, "r_max must be positive");
  if (class_size < 1) fail(ErrorKind::InvalidArgument, "class_size must be at least 1");
  if (grid_points < 1) fail(ErrorKind::InvalidArgument, "grid_points must be at least 1");
  if (trials < 1) fail(ErrorKind::InvalidArgument, "trials must be at least 1");
  if (n_values.empty()) fail(ErrorKind::InvalidArgument, "n_values must be non-empty");
  for (std::size_t i = 0; i < n_values.size(); ++i) {
    if (n_values[i] < 1) fail(ErrorKind::InvalidArgument, "n_values must be positive");
    if (i > 0 && n_values[i] <= n_values[i - 1]) fail(ErrorKind::InvalidArgument, "n_values must be strictly increasing");
  }
  if (weights && static_cast<std::size_t>(weights->size()) != k)
    fail(ErrorKind::InvalidArgument, "weights must have K entries");
}

SimplexWeights SweepConfig::effective_weights() const {
  return weights ? *weights : SimplexWeights::uniform(static_cast<Eigen::Index>(k));
}

ReferenceEnsemble random_ensemble(Eigen::Index num_prompts, Eigen::Index num_responses, std::size_t k,
                                  const SimplexWeights& weights, Rng& rng, double uniform_mix) {
  std::vector<ConditionalPolicy> members;
  members.reserve(k);
  for (std::size_t i = 0; i < k; ++i) {
    Eigen::MatrixXd t(num_prompts, num_responses);
    for (Eigen::Index x = 0; x < num_prompts; ++x)
      t.row(x) = ((1.0 - uniform_mix) * sample_dirichlet(num_responses, 1.0, rng).probs().array() +
                  uniform_mix / static_cast<double>(num_responses))
                     .transpose();
    members.emplace_back(std::move(t));
  }
  return ReferenceEnsemble(std::move(members), weights);
}

TrialInstance make_trial_instance(const SweepConfig& config, std::uint64_t instance_seed) {
  Rng rng(instance_seed);
  ReferenceEnsemble ens =
      random_ensemble(config.num_prompts, config.num_responses, config.k, config.effective_weights(), rng);
  RewardTable r_true =
      random_lattice_table(config.num_prompts, config.num_responses, config.r_max, config.grid_points, rng);
  RewardClass cls = reward_class_grid(config.num_prompts, config.num_responses, config.r_max, config.grid_points,
                                      config.class_size, rng, r_true);
  PromptDistribution rho{CategoricalDistribution::uniform(config.num_prompts)};
  return {std::move(ens), std::move(r_true), std::move(cls), std::move(rho)};
}

TrialSeeds trial_seeds(std::uint64_t seed, std::size_t n_index, std::size_t trial) {
  return {derive_seed(seed, 0xFFFFFFFFULL, trial), derive_seed(seed, n_index, trial)};
}

namespace {

TrialRecord run_pipeline(const SweepConfig& config, KlMode mode, std::size_t n, const TrialSeeds& seeds) {
  const TrialInstance inst = make_trial_instance(config, seeds.instance);
  const ConditionalPolicy ref = mode == KlMode::Reverse ? geometric_reference(inst.ensemble).policy
                                                        : arithmetic_reference(inst.ensemble);
  Rng data_rng(seeds.data);
  const PreferenceDataset data = generate_preference_dataset(ref, inst.rho, inst.r_true, n, data_rng);
  const MleResult mle = mle_reward(inst.reward_class, data);
  const GapReport rep = mode == KlMode::Reverse
                            ? suboptimality_gap_rkl(inst.ensemble, inst.r_true.values(), mle.reward.values(),
                                                    config.gamma, inst.rho)
                            : suboptimality_gap_fkl(inst.ensemble, inst.r_true.values(), mle.reward.values(),
                                                    config.gamma, inst.rho);
  TrialRecord rec;
  rec.n = n;
  rec.suboptimality_gap = rep.suboptimality_gap;
  rec.optimality_gap = rep.optimality_gap;
  rec.mle_index = mle.index;
  rec.mle_hit = inst.reward_class.true_index && mle.index == *inst.reward_class.true_index;
  rec.seed_used = seeds.data;
  return rec;
}

double mean_of(const std::vector<double>& v) {
  double s = 0.0;
  for (double a : v) s += a;
  return s / static_cast<double>(v.size());
}

double standard_error(const std::vector<double>& v, double mean) {
  if (v.size() < 2) return 0.0;
  double ss = 0.0;
  for (double a : v) ss += (a - mean) * (a - mean);
  return std::sqrt(ss / static_cast<double>(v.size() - 1)) / std::sqrt(static_cast<double>(v.size()));
}

}  // namespace

TrialRecord run_pipeline_rkl(const SweepConfig& config, std::size_t n, const TrialSeeds& seeds) {
  config.validate();
  return run_pipeline(config, KlMode::Reverse, n, seeds);
}

TrialRecord run_pipeline_fkl(const SweepConfig& config, std::size_t n, const TrialSeeds& seeds) {
  config.validate();
  return run_pipeline(config, KlMode::Forward, n, seeds);
}

LogLogFit fit_log_log(const std::vector<std::size_t>& n_values, const std::vector<double>& means) {
  if (n_values.size() != means.size()) fail(ErrorKind::InvalidArgument, "fit_log_log: length mismatch");
  LogLogFit fit;
  std::vector<double> xs, ys;
  for (std::size_t i = 0; i < means.size(); ++i) {
    if (means[i] > kSaturationThreshold) {
      fit.used_n.push_back(n_values[i]);
      xs.push_back(std::log(static_cast<double>(n_values[i])));
      ys.push_back(std::log(means[i]));
    } else {
      fit.saturated_n.push_back(n_values[i]);
    }
  }
  if (xs.size() < 3)
    fail(ErrorKind::InsufficientData, "only " + std::to_string(xs.size()) +
                                          " n values have a mean gap above 1e-12; at least 3 are needed for the fit");
  const double mx = mean_of(xs), my = mean_of(ys);
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    sxx += (xs[i] - mx) * (xs[i] - mx);
    sxy += (xs[i] - mx) * (ys[i] - my);
    syy += (ys[i] - my) * (ys[i] - my);
  }
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  fit.r_squared = syy > 0 ? (sxy * sxy) / (sxx * syy) : 1.0;
  return fit;
}

std::vector<SweepAggregate> aggregate_records(const std::vector<std::size_t>& n_values, std::size_t trials,
                                              const std::vector<TrialRecord>& records) {
  if (records.size() != n_values.size() * trials) fail(ErrorKind::InvalidArgument, "aggregate_records: row count mismatch");
  std::vector<SweepAggregate> out;
  for (std::size_t i = 0; i < n_values.size(); ++i) {
    std::vector<double> sub, opt;
    double hits = 0.0;
    for (std::size_t t = 0; t < trials; ++t) {
      const TrialRecord& r = records[i * trials + t];
      sub.push_back(r.suboptimality_gap);
      opt.push_back(r.optimality_gap);
      hits += r.mle_hit ? 1.0 : 0.0;
    }
    SweepAggregate a;
    a.n = n_values[i];
    a.mean_subopt = mean_of(sub);
    a.se_subopt = standard_error(sub, a.mean_subopt);
    a.mean_opt = mean_of(opt);
    a.se_opt = standard_error(opt, a.mean_opt);
    a.hit_rate = hits / static_cast<double>(trials);
    std::vector<double> sorted = sub;
    std::sort(sorted.begin(), sorted.end());
    const auto rank = static_cast<std::size_t>(std::ceil(0.9 * static_cast<double>(trials)));
    a.p90_subopt = sorted[std::max<std::size_t>(rank, 1) - 1];
    out.push_back(a);
  }
  return out;
}

SweepResult run_sweep_trials(const SweepConfig& config, unsigned threads) {
  config.validate();
  const std::size_t rows = config.n_values.size() * config.trials;
  std::vector<TrialRecord> records(rows);
  parallel_for(rows, threads, [&](std::size_t idx) {
    const std::size_t ni = idx / config.trials;
    const std::size_t trial = idx % config.trials;
    TrialRecord rec = run_pipeline(config, config.mode, config.n_values[ni], trial_seeds(config.seed, ni, trial));
    rec.trial = trial;
    records[idx] = rec;
  });
  SweepResult result{config, std::move(records), {}, {}};
  result.aggregates = aggregate_records(config.n_values, config.trials, result.records);
  return result;
}

SweepResult sweep(const SweepConfig& config, unsigned threads) {
  SweepResult result = run_sweep_trials(config, threads);
  std::vector<double> means;
  for (const auto& a : result.aggregates) means.push_back(a.mean_subopt);
  result.fit = fit_log_log(result.config.n_values, means);
  return result;
}

std::vector<std::vector<std::size_t>> positive_compositions(std::size_t total, std::size_t parts) {
  std::vector<std::vector<std::size_t>> out;
  if (parts == 0 || total < parts) return out;
  std::vector<std::size_t> cur;
  auto rec = [&](auto& self, std::size_t remaining, std::size_t slots) -> void {
    if (slots == 1) {
      cur.push_back(remaining);
      out.push_back(cur);
      cur.pop_back();
      return;
    }
    for (std::size_t c = 1; c + (slots - 1) <= remaining; ++c) {
      cur.push_back(c);
      self(self, remaining - c, slots - 1);
      cur.pop_back();
    }
  };
  rec(rec, total, parts);
  return out;
}

AlphaSearchResult optimal_alpha_search(const std::vector<ConditionalPolicy>& members,
                                       const Eigen::Ref<const Eigen::MatrixXd>& r, double gamma, Eigen::Index x,
                                       std::size_t grid_resolution) {
  if (members.size() < 2) fail(ErrorKind::InvalidArgument, "optimal_alpha_search needs K >= 2");
  if (grid_resolution < 2) fail(ErrorKind::InvalidArgument, "grid_resolution must be at least 2");
  if (!(gamma > 0)) fail(ErrorKind::InvalidArgument, "gamma must be positive");
  const Eigen::Index ny = members.front().num_responses();
  if (r.rows() != members.front().num_prompts() || r.cols() != ny)
    fail(ErrorKind::InvalidArgument, "optimal_alpha_search: reward shape mismatch");

  const std::size_t total = grid_resolution + 1;
  const auto comps = positive_compositions(total, members.size());
  std::optional<AlphaSearchResult> best;
  for (const auto& c : comps) {
    Eigen::VectorXd alpha(static_cast<Eigen::Index>(c.size()));
    for (std::size_t i = 0; i < c.size(); ++i)
      alpha[static_cast<Eigen::Index>(i)] = static_cast<double>(c[i]) / static_cast<double>(total);
    Vec<double> lw(ny);
    for (Eigen::Index y = 0; y < ny; ++y) {
      double s = gamma * r(x, y);
      for (std::size_t i = 0; i < members.size(); ++i) {
        const double p = members[i](x, y);
        s = p > 0 ? s + alpha[static_cast<Eigen::Index>(i)] * std::log(p) : kNegInf<double>;
        if (p <= 0) break;
      }
      lw[y] = s;
    }
    const double lse = log_sum_exp(lw);
    if (!std::isfinite(lse)) fail(ErrorKind::EmptySupportIntersection, "optimal_alpha_search: member supports do not intersect");
    const double value = lse / gamma;
    if (!best || value > best->value + 1e-12 * std::max(1.0, std::abs(best->value)))
      best = AlphaSearchResult{SimplexWeights(alpha), value, 0};
  }
  best->evaluated = comps.size();
  return *best;
}

}  // namespace multiref
