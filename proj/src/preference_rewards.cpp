#include "multiref/preference_rewards.hpp"

#include <string>

namespace multiref {

RewardTable::RewardTable(Eigen::MatrixXd values, double r_max) : values_(std::move(values)), r_max_(r_max) {
  if (!(r_max_ > 0) || !std::isfinite(r_max_)) fail(ErrorKind::InvalidArgument, "r_max must be positive and finite");
  if (values_.size() == 0) fail(ErrorKind::InvalidArgument, "reward table must be non-empty");
  for (Eigen::Index x = 0; x < values_.rows(); ++x) {
    for (Eigen::Index y = 0; y < values_.cols(); ++y) {
      const double v = values_(x, y);
      if (!(v >= 0 && v <= r_max_))
        fail(ErrorKind::InvalidArgument, "reward(" + std::to_string(x) + "," + std::to_string(y) + ") = " +
                                             std::to_string(v) + " outside [0, r_max]");
    }
  }
}

double bt_preference_probability(const RewardTable& r, Eigen::Index x, Eigen::Index y, Eigen::Index y_prime) {
  return sigmoid(r(x, y) - r(x, y_prime));
}

PreferenceDataset generate_preference_dataset(const ConditionalPolicy& ref_policy,
                                              const PromptDistribution& rho,
                                              const RewardTable& r_true,
                                              std::size_t n,
                                              Rng& rng) {
  if (rho.dist.size() != ref_policy.num_prompts() || r_true.num_prompts() != ref_policy.num_prompts() ||
      r_true.num_responses() != ref_policy.num_responses())
    fail(ErrorKind::InvalidArgument, "generate_preference_dataset: shape mismatch");
  if (n < 1) fail(ErrorKind::InvalidArgument, "generate_preference_dataset: n must be at least 1");

  std::vector<CategoricalDistribution> rows;
  rows.reserve(static_cast<std::size_t>(ref_policy.num_prompts()));
  for (Eigen::Index x = 0; x < ref_policy.num_prompts(); ++x) rows.push_back(ref_policy.row(x));

  PreferenceDataset data{ref_policy.num_prompts(), ref_policy.num_responses(), {}};
  data.triples.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    PreferenceTriple t;
    t.prompt = sample(rho.dist, rng);
    const auto& row = rows[static_cast<std::size_t>(t.prompt)];
    t.first = sample(row, rng);
    t.second = sample(row, rng);
    t.draw = rng.uniform();
    const bool first_wins = t.draw < bt_preference_probability(r_true, t.prompt, t.first, t.second);
    t.chosen = first_wins ? t.first : t.second;
    t.rejected = first_wins ? t.second : t.first;
    data.triples.push_back(t);
  }
  return data;
}

double bt_log_likelihood(const RewardTable& r, const PreferenceDataset& data) {
  if (data.triples.empty()) fail(ErrorKind::EmptyDataset, "bt_log_likelihood: dataset is empty");
  double acc = 0.0;
  for (const auto& t : data.triples) acc += log_sigmoid(r(t.prompt, t.chosen) - r(t.prompt, t.rejected));
  return acc / static_cast<double>(data.triples.size());
}

PreferenceCounts::PreferenceCounts(const PreferenceDataset& data) : total_(data.triples.size()) {
  const Eigen::Index ny = data.num_responses;
  std::vector<double> counts(static_cast<std::size_t>(data.num_prompts * ny * ny), 0.0);
  for (const auto& t : data.triples) counts[static_cast<std::size_t>((t.prompt * ny + t.chosen) * ny + t.rejected)] += 1.0;
  for (Eigen::Index x = 0; x < data.num_prompts; ++x)
    for (Eigen::Index w = 0; w < ny; ++w)
      for (Eigen::Index l = 0; l < ny; ++l) {
        const double c = counts[static_cast<std::size_t>((x * ny + w) * ny + l)];
        if (c > 0) cells_.push_back({x, w, l, c});
      }
}

double PreferenceCounts::log_likelihood(const Eigen::MatrixXd& rewards) const {
  if (total_ == 0) fail(ErrorKind::EmptyDataset, "log_likelihood: dataset is empty");
  double acc = 0.0;
  for (const auto& c : cells_) acc += c.count * log_sigmoid(rewards(c.x, c.chosen) - rewards(c.x, c.rejected));
  return acc / static_cast<double>(total_);
}

MleResult mle_reward(const RewardClass& cls, const PreferenceDataset& data) {
  if (cls.candidates.empty()) fail(ErrorKind::InvalidArgument, "mle_reward: reward class is empty");
  if (data.triples.empty()) fail(ErrorKind::EmptyDataset, "mle_reward: dataset is empty");
  const PreferenceCounts counts(data);
  std::size_t best = 0;
  double best_ll = counts.log_likelihood(cls.candidates.front().values());
  for (std::size_t k = 1; k < cls.candidates.size(); ++k) {
    const double ll = counts.log_likelihood(cls.candidates[k].values());
    if (improves_likelihood(ll, best_ll)) {
      best_ll = ll;
      best = k;
    }
  }
  return {best, cls.candidates[best], best_ll};
}

double lattice_value(std::size_t k, std::size_t grid_points, double r_max) {
  if (grid_points <= 1) return 0.0;
  return static_cast<double>(k) * r_max / static_cast<double>(grid_points - 1);
}

RewardTable random_lattice_table(Eigen::Index num_prompts, Eigen::Index num_responses, double r_max,
                                 std::size_t grid_points, Rng& rng) {
  if (grid_points < 1) fail(ErrorKind::InvalidArgument, "grid_points must be at least 1");
  Eigen::MatrixXd v(num_prompts, num_responses);
  for (Eigen::Index x = 0; x < num_prompts; ++x)
    for (Eigen::Index y = 0; y < num_responses; ++y)
      v(x, y) = lattice_value(rng.uniform_index(grid_points), grid_points, r_max);
  return RewardTable(std::move(v), r_max);
}

RewardClass reward_class_grid(Eigen::Index num_prompts, Eigen::Index num_responses, double r_max,
                              std::size_t grid_points, std::size_t class_size, Rng& rng,
                              const RewardTable& include) {
  if (class_size < 1) fail(ErrorKind::InvalidArgument, "class_size must be at least 1");
  if (include.num_prompts() != num_prompts || include.num_responses() != num_responses || include.r_max() != r_max)
    fail(ErrorKind::InvalidArgument, "reward_class_grid: included table does not match the class shape");
  RewardClass cls;
  cls.candidates.reserve(class_size);
  cls.candidates.push_back(include);
  for (std::size_t k = 1; k < class_size; ++k)
    cls.candidates.push_back(random_lattice_table(num_prompts, num_responses, r_max, grid_points, rng));
  cls.true_index = 0;
  return cls;
}

}  // namespace multiref
