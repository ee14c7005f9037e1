#pragma once

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

#include "multiref/closed_form_policies.hpp"
#include "multiref/dpo.hpp"
#include "multiref/experiments.hpp"
#include "multiref/objectives_gaps.hpp"
#include "multiref/preference_rewards.hpp"
#include "multiref/reference_mixtures.hpp"

namespace multiref::io {

using Json = nlohmann::json;

inline constexpr std::string_view kToolName = "multiref-align";
inline constexpr std::string_view kVersion = "0.1.0";

/// 64-bit FNV-1a.
std::uint64_t fnv1a64(std::string_view bytes) noexcept;
std::string hex64(std::uint64_t v);

/// `# multiref-align 0.1.0 config_hash=<hex>`
std::string csv_header_line(std::uint64_t config_hash);

/// Top-level "meta" object for JSON outputs.
Json meta_object(std::uint64_t config_hash, const Json& config);

std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, std::string_view text);

/// Parses JSON text; errors become ConfigParse naming `what`.
Json parse_json(std::string_view text, std::string_view what);

/// Pretty-printed, key-sorted, trailing newline.
std::string dump(const Json& j);

Json matrix_to_json(const Eigen::MatrixXd& m);
Json vector_to_json(const Eigen::VectorXd& v);
Eigen::MatrixXd matrix_from_json(const Json& j, std::string_view field);
Eigen::VectorXd vector_from_json(const Json& j, std::string_view field);

/// {"members": [table, ...], "weights": [...]}, each table a list of rows.
Json ensemble_to_json(const ReferenceEnsemble& ens);
ReferenceEnsemble ensemble_from_json(const Json& j);

/// {"r_max": r, "values": [[...], ...]}
Json reward_to_json(const RewardTable& r);
RewardTable reward_from_json(const Json& j);

Json rkl_solution_to_json(const RklSolution& s);
Json fkl_solution_to_json(const FklSolution& s);
Json gap_report_to_json(const GapReport& g);
Json coverage_to_json(const CoverageReport& c);

/// Rows `i,x,y_w,y_l`.
std::string dataset_to_csv(const PreferenceDataset& data, std::uint64_t config_hash);
PreferenceDataset dataset_from_csv(std::string_view text, Eigen::Index num_prompts, Eigen::Index num_responses);

/// Rows `iter,loss,grad_norm,step_size`.
std::string trace_to_csv(const std::vector<TraceEntry>& trace, std::uint64_t config_hash);

/// Rows `n,trial,subopt_gap,opt_gap,mle_hit,seed`.
std::string sweep_raw_csv(const SweepResult& result, std::uint64_t config_hash);
/// Rows `n,mean_subopt,se_subopt,mean_opt,se_opt,hit_rate`.
std::string sweep_aggregate_csv(const SweepResult& result, std::uint64_t config_hash);
/// Fit, per-n aggregates including the 90th percentile, and the config echo.
Json sweep_summary_json(const SweepResult& result);

Json sweep_config_to_json(const SweepConfig& c);
SweepConfig sweep_config_from_json(const Json& j);

/// Round-trip decimal text for a double (%.17g).
std::string format_double(double v);

}  // namespace multiref::io
