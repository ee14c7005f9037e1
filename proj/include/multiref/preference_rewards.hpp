#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <utility>
#include <vector>

#include "multiref/distributions.hpp"
#include "multiref/reference_mixtures.hpp"

namespace multiref {

/// Numerically stable logistic sigmoid.
inline double sigmoid(double t) noexcept {
  if (t >= 0) return 1.0 / (1.0 + std::exp(-t));
  const double e = std::exp(t);
  return e / (1.0 + e);
}

/// log(sigmoid(t)) without overflow or cancellation for large |t|.
inline double log_sigmoid(double t) noexcept {
  return t >= 0 ? -std::log1p(std::exp(-t)) : t - std::log1p(std::exp(t));
}

/// r(x, y) with every entry in [0, r_max].
class RewardTable {
 public:
  RewardTable(Eigen::MatrixXd values, double r_max);

  const Eigen::MatrixXd& values() const noexcept { return values_; }
  double r_max() const noexcept { return r_max_; }
  Eigen::Index num_prompts() const noexcept { return values_.rows(); }
  Eigen::Index num_responses() const noexcept { return values_.cols(); }
  double operator()(Eigen::Index x, Eigen::Index y) const { return values_(x, y); }

  friend bool operator==(const RewardTable& a, const RewardTable& b) {
    return a.r_max_ == b.r_max_ && a.values_ == b.values_;
  }

 private:
  Eigen::MatrixXd values_;
  double r_max_;
};

/// Finite reward class; true_index marks the ground-truth table when known.
struct RewardClass {
  std::vector<RewardTable> candidates;
  std::optional<std::size_t> true_index;
};

/// One preference observation. `first`/`second` are the two raw draws and
/// `draw` the uniform that decided the label, kept for reproducibility.
struct PreferenceTriple {
  Eigen::Index prompt = 0;
  Eigen::Index chosen = 0;
  Eigen::Index rejected = 0;
  Eigen::Index first = 0;
  Eigen::Index second = 0;
  double draw = 0.0;
};

struct PreferenceDataset {
  Eigen::Index num_prompts = 0;
  Eigen::Index num_responses = 0;
  std::vector<PreferenceTriple> triples;

  std::size_t size() const noexcept { return triples.size(); }
};

/// rho(x).
struct PromptDistribution {
  CategoricalDistribution dist;
};

/// sigma(r(x,y) - r(x,y')).
double bt_preference_probability(const RewardTable& r, Eigen::Index x, Eigen::Index y, Eigen::Index y_prime);

/// Draws n triples: x ~ rho, two i.i.d. responses from ref_policy(.|x), the
/// first labeled chosen with probability sigma(r(x,y1) - r(x,y2)). Pairs with
/// y1 == y2 are kept.
PreferenceDataset generate_preference_dataset(const ConditionalPolicy& ref_policy,
                                              const PromptDistribution& rho,
                                              const RewardTable& r_true,
                                              std::size_t n,
                                              Rng& rng);

/// (1/n) sum_i log sigma(r(x_i, y_w^i) - r(x_i, y_l^i)).
double bt_log_likelihood(const RewardTable& r, const PreferenceDataset& data);

/// Sufficient statistic for Bradley-Terry likelihoods: the number of times
/// each (x, chosen, rejected) cell occurs.
class PreferenceCounts {
 public:
  explicit PreferenceCounts(const PreferenceDataset& data);

  double log_likelihood(const Eigen::MatrixXd& rewards) const;
  std::size_t total() const noexcept { return total_; }

 private:
  struct Cell {
    Eigen::Index x, chosen, rejected;
    double count;
  };
  std::vector<Cell> cells_;
  std::size_t total_ = 0;
};

struct MleResult {
  std::size_t index;
  RewardTable reward;
  double log_likelihood;
};

/// Likelihoods within this relative distance of the running best count as a
/// tie. Mathematically tied candidates (e.g. constant shifts) can differ by a
/// few ulps depending on summation order.
inline constexpr double kLikelihoodTieTolerance = 1e-12;

/// True when `ll` beats `best` by more than the tie tolerance.
inline bool improves_likelihood(double ll, double best) noexcept {
  return ll > best + kLikelihoodTieTolerance * std::max(1.0, std::abs(best));
}

/// Candidate of maximal likelihood; ties resolve to the lowest index.
MleResult mle_reward(const RewardClass& cls, const PreferenceDataset& data);

/// Lattice {0, r_max/(g-1), ..., r_max}; g = 1 collapses to {0}.
double lattice_value(std::size_t k, std::size_t grid_points, double r_max);

/// Table with entries drawn uniformly from the lattice.
RewardTable random_lattice_table(Eigen::Index num_prompts, Eigen::Index num_responses, double r_max,
                                 std::size_t grid_points, Rng& rng);

/// `include` at index 0 (true_index = 0) followed by class_size - 1 random
/// lattice tables of the same shape.
RewardClass reward_class_grid(Eigen::Index num_prompts, Eigen::Index num_responses, double r_max,
                              std::size_t grid_points, std::size_t class_size, Rng& rng,
                              const RewardTable& include);

}  // namespace multiref
