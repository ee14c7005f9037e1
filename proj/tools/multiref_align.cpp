// multiref-align: command-line driver for the multiref library.
//
// Exit codes: 0 success, 2 config parse, 3 IO, 4 numerical or domain error,
// 5 verification failure.

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include "multiref/closed_form_policies.hpp"
#include "multiref/dpo.hpp"
#include "multiref/errors.hpp"
#include "multiref/experiments.hpp"
#include "multiref/io.hpp"
#include "multiref/verification.hpp"

namespace fs = std::filesystem;
using multiref::ErrorKind;
using multiref::io::Json;

namespace {

enum Exit : int { kOk = 0, kConfigParse = 2, kIo = 3, kNumerical = 4, kVerifyFailed = 5 };

int exit_code_for(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::ConfigParse: return kConfigParse;
    case ErrorKind::Io: return kIo;
    default: return kNumerical;
  }
}

struct GlobalOptions {
  unsigned threads = 0;
  std::string out;
  std::optional<std::uint64_t> seed;
};

// A loaded config document plus what every output needs from it.
struct LoadedConfig {
  Json doc;
  fs::path dir;
  std::uint64_t hash;
  std::string label;
  fs::path output_dir;
};

LoadedConfig load_config(const std::string& path, const GlobalOptions& g) {
  const std::string bytes = multiref::io::read_text_file(path);
  LoadedConfig c;
  c.doc = multiref::io::parse_json(bytes, path);
  if (!c.doc.is_object()) multiref::fail(ErrorKind::ConfigParse, path + ": top level must be an object");
  c.dir = fs::path(path).parent_path();
  std::string hashed = bytes;
  if (g.seed) hashed += "\nseed=" + std::to_string(*g.seed);
  c.hash = multiref::io::fnv1a64(hashed);
  c.label = fs::path(path).stem().string();
  if (c.doc.contains("label")) {
    if (!c.doc["label"].is_string() || c.doc["label"].get<std::string>().empty())
      multiref::fail(ErrorKind::ConfigParse, "field 'label': must be a non-empty string");
    c.label = c.doc["label"].get<std::string>();
  }
  c.output_dir = ".";
  if (c.doc.contains("output_dir")) {
    if (!c.doc["output_dir"].is_string()) multiref::fail(ErrorKind::ConfigParse, "field 'output_dir': must be a string");
    c.output_dir = c.doc["output_dir"].get<std::string>();
  }
  if (!g.out.empty()) c.output_dir = g.out;
  return c;
}

// A field that is either an inline object or a path (relative to the config
// file) to a JSON document.
Json inline_or_file(const LoadedConfig& c, const std::string& field) {
  if (!c.doc.contains(field)) multiref::fail(ErrorKind::ConfigParse, "field '" + field + "': missing");
  const Json& v = c.doc[field];
  if (v.is_string()) {
    const fs::path p = c.dir / v.get<std::string>();
    return multiref::io::parse_json(multiref::io::read_text_file(p), p.string());
  }
  if (!v.is_object()) multiref::fail(ErrorKind::ConfigParse, "field '" + field + "': expected an object or a path");
  return v;
}

double number_field(const Json& doc, const std::string& field, std::optional<double> fallback = std::nullopt) {
  if (!doc.contains(field)) {
    if (fallback) return *fallback;
    multiref::fail(ErrorKind::ConfigParse, "field '" + field + "': missing");
  }
  if (!doc[field].is_number()) multiref::fail(ErrorKind::ConfigParse, "field '" + field + "': must be a number");
  return doc[field].get<double>();
}

Json with_meta(Json body, const LoadedConfig& c) {
  body["meta"] = multiref::io::meta_object(c.hash, c.doc);
  body["label"] = c.label;
  return body;
}

int cmd_verify(bool quick, const std::string& fault, const GlobalOptions& g) {
  if (!fault.empty()) {
    if (fault != "escort-normalizer") multiref::fail(ErrorKind::ConfigParse, "unknown fault '" + fault + "'");
    multiref::testing::set_escort_fault(0.5);
  }
  std::optional<std::string> first_failure;
  Json report = Json::array();
  const auto results = multiref::verify::run_suite(quick, g.threads, [&](const multiref::verify::CheckResult& r) {
    std::printf("%-4s %-30s n=%-6zu %s\n", r.passed() ? "PASS" : "FAIL", r.name.c_str(), r.instances,
                r.summary().c_str());
    std::fflush(stdout);
    if (!r.passed() && !first_failure) first_failure = r.name;
    report.push_back(Json{{"name", r.name}, {"instances", r.instances}, {"passed", r.passed()}, {"summary", r.summary()}});
  });
  if (!g.out.empty())
    multiref::io::write_text_file(fs::path(g.out) / "verify_report.json",
                                  multiref::io::dump(Json{{"quick", quick}, {"checks", report}}));
  if (first_failure) {
    std::printf("verify FAILED: first failing check: %s\n", first_failure->c_str());
    return kVerifyFailed;
  }
  std::printf("verify passed: %zu checks\n", results.size());
  return kOk;
}

int cmd_solve(const std::string& config_path, std::string mode_text, const GlobalOptions& g) {
  const LoadedConfig c = load_config(config_path, g);
  if (mode_text.empty()) {
    if (!c.doc.contains("mode") || !c.doc["mode"].is_string())
      multiref::fail(ErrorKind::ConfigParse, "field 'mode': give --mode or a mode field");
    mode_text = c.doc["mode"].get<std::string>();
  }
  const multiref::KlMode mode = [&] {
    try {
      return multiref::parse_kl_mode(mode_text);
    } catch (const multiref::Error& e) {
      multiref::fail(ErrorKind::ConfigParse, std::string("field 'mode': ") + e.what());
    }
  }();
  const double gamma = number_field(c.doc, "gamma");
  if (!(gamma > 0)) multiref::fail(ErrorKind::ConfigParse, "field 'gamma': must be positive");
  const multiref::ReferenceEnsemble ens = multiref::io::ensemble_from_json(inline_or_file(c, "ensemble"));
  const multiref::RewardTable r = multiref::io::reward_from_json(inline_or_file(c, "reward"));
  if (r.num_prompts() != ens.num_prompts() || r.num_responses() != ens.num_responses())
    multiref::fail(ErrorKind::ConfigParse, "field 'reward': shape does not match the ensemble");

  Json body;
  if (mode == multiref::KlMode::Reverse) {
    const auto sol = multiref::solve_rkl(ens, r, gamma);
    body = multiref::io::rkl_solution_to_json(sol);
    for (Eigen::Index x = 0; x < ens.num_prompts(); ++x)
      std::printf("x=%lld objective=%s\n", static_cast<long long>(x),
                  multiref::io::format_double(sol.objective_value[x]).c_str());
  } else {
    const auto sol = multiref::solve_fkl(ens, r, gamma);
    body = multiref::io::fkl_solution_to_json(sol);
    Json objective = Json::array();
    for (Eigen::Index x = 0; x < ens.num_prompts(); ++x) {
      const double v = multiref::multi_fkl_objective(ens, sol.policy, r.values(), gamma, x);
      objective.push_back(v);
      std::printf("x=%lld objective=%s z_tilde=%s\n", static_cast<long long>(x),
                  multiref::io::format_double(v).c_str(), multiref::io::format_double(sol.z_tilde[x]).c_str());
    }
    body["objective_value"] = std::move(objective);
  }
  const fs::path out = c.output_dir / ("solution_" + std::string(multiref::to_string(mode)) + ".json");
  multiref::io::write_text_file(out, multiref::io::dump(with_meta(std::move(body), c)));
  std::printf("wrote %s\n", out.string().c_str());
  return kOk;
}

int cmd_sweep(const std::string& config_path, const GlobalOptions& g) {
  const LoadedConfig c = load_config(config_path, g);
  Json sweep_doc = c.doc;
  sweep_doc.erase("label");
  sweep_doc.erase("output_dir");
  multiref::SweepConfig cfg = multiref::io::sweep_config_from_json(sweep_doc);
  if (g.seed) cfg.seed = *g.seed;

  multiref::SweepResult result = multiref::run_sweep_trials(cfg, g.threads);
  const std::string tag = std::string(multiref::to_string(cfg.mode));
  const fs::path raw = c.output_dir / ("sweep_" + tag + "_raw.csv");
  const fs::path agg = c.output_dir / ("sweep_" + tag + "_aggregate.csv");
  multiref::io::write_text_file(raw, multiref::io::sweep_raw_csv(result, c.hash));
  multiref::io::write_text_file(agg, multiref::io::sweep_aggregate_csv(result, c.hash));
  for (const auto& a : result.aggregates)
    std::printf("n=%-6zu mean_subopt=%.6e se=%.2e p90=%.3e hit_rate=%.3f\n", a.n, a.mean_subopt, a.se_subopt,
                a.p90_subopt, a.hit_rate);

  std::vector<double> means;
  for (const auto& a : result.aggregates) means.push_back(a.mean_subopt);
  result.fit = multiref::fit_log_log(cfg.n_values, means);
  const fs::path summary = c.output_dir / ("sweep_" + tag + "_summary.json");
  multiref::io::write_text_file(summary, multiref::io::dump(with_meta(multiref::io::sweep_summary_json(result), c)));
  std::printf("slope=%.4f intercept=%.4f r2=%.4f saturated=%zu\n", result.fit.slope, result.fit.intercept,
              result.fit.r_squared, result.fit.saturated_n.size());
  std::printf("wrote %s, %s, %s\n", raw.string().c_str(), agg.string().c_str(), summary.string().c_str());
  return kOk;
}

int cmd_dpo(const std::string& config_path, const GlobalOptions& g) {
  const LoadedConfig c = load_config(config_path, g);
  multiref::DpoTrainConfig tc;
  if (c.doc.contains("mode")) {
    if (!c.doc["mode"].is_string()) multiref::fail(ErrorKind::ConfigParse, "field 'mode': must be a string");
    try {
      tc.mode = multiref::parse_kl_mode(c.doc["mode"].get<std::string>());
    } catch (const multiref::Error& e) {
      multiref::fail(ErrorKind::ConfigParse, std::string("field 'mode': ") + e.what());
    }
  }
  tc.gamma = number_field(c.doc, "gamma", 1.0);
  tc.step_size = number_field(c.doc, "step_size", tc.step_size);
  tc.max_iters = static_cast<std::size_t>(number_field(c.doc, "max_iters", static_cast<double>(tc.max_iters)));
  tc.grad_tolerance = number_field(c.doc, "grad_tolerance", tc.grad_tolerance);
  if (c.doc.contains("floor_probabilities")) {
    if (!c.doc["floor_probabilities"].is_boolean())
      multiref::fail(ErrorKind::ConfigParse, "field 'floor_probabilities': must be a boolean");
    tc.floor_probabilities = c.doc["floor_probabilities"].get<bool>();
  }
  try {
    tc.validate();
  } catch (const multiref::Error& e) {
    multiref::fail(ErrorKind::ConfigParse, e.what());
  }

  const multiref::ReferenceEnsemble ens = multiref::io::ensemble_from_json(inline_or_file(c, "ensemble"));
  const multiref::ConditionalPolicy ref = tc.mode == multiref::KlMode::Reverse
                                              ? multiref::geometric_reference(ens).policy
                                              : multiref::arithmetic_reference(ens);

  multiref::PreferenceDataset data;
  bool generated = false;
  if (!c.doc.contains("dataset")) multiref::fail(ErrorKind::ConfigParse, "field 'dataset': missing");
  const Json& ds = c.doc["dataset"];
  if (ds.is_string()) {
    data = multiref::io::dataset_from_csv(multiref::io::read_text_file(c.dir / ds.get<std::string>()),
                                          ens.num_prompts(), ens.num_responses());
  } else if (ds.is_object()) {
    LoadedConfig sub = c;
    sub.doc = ds;
    const multiref::RewardTable r = multiref::io::reward_from_json(inline_or_file(sub, "reward"));
    if (r.num_prompts() != ens.num_prompts() || r.num_responses() != ens.num_responses())
      multiref::fail(ErrorKind::ConfigParse, "field 'dataset.reward': shape does not match the ensemble");
    const double n = number_field(ds, "n");
    if (!(n >= 1)) multiref::fail(ErrorKind::ConfigParse, "field 'dataset.n': must be at least 1");
    std::uint64_t seed = ds.contains("seed") ? ds["seed"].get<std::uint64_t>() : 0;
    if (g.seed) seed = *g.seed;
    multiref::Rng rng(seed);
    const multiref::PromptDistribution rho{multiref::CategoricalDistribution::uniform(ens.num_prompts())};
    data = multiref::generate_preference_dataset(ref, rho, r, static_cast<std::size_t>(n), rng);
    generated = true;
  } else {
    multiref::fail(ErrorKind::ConfigParse, "field 'dataset': expected a CSV path or a generator object");
  }
  if (data.triples.empty()) multiref::fail(ErrorKind::EmptyDataset, "dataset has no rows");

  const auto init = multiref::TabularPolicyParams::from_reference(ref, tc.floor_probabilities);
  const multiref::DpoTrainResult res = multiref::dpo_train(init, ref, data, tc);

  Json body{{"mode", multiref::to_string(tc.mode)},
            {"gamma", tc.gamma},
            {"converged", res.converged},
            {"stalled", res.stalled},
            {"iterations", res.trace.size()},
            {"final_loss", res.trace.empty() ? 0.0 : res.trace.back().loss},
            {"floored_evaluations", res.floored_evaluations},
            {"logits", multiref::io::matrix_to_json(res.params.logits)},
            {"policy", multiref::io::matrix_to_json(res.params.policy().table())}};
  try {
    const auto ranges = multiref::implicit_reward_ranges(res.params, ref, tc.gamma);
    body["implicit_reward_ranges"] = Json{{"b_max", ranges.b_max}, {"d_max", ranges.d_max}};
  } catch (const multiref::Error& e) {
    body["implicit_reward_ranges"] = Json{{"error", e.what()}};
  }
  const fs::path params = c.output_dir / "dpo_params.json";
  const fs::path trace = c.output_dir / "dpo_trace.csv";
  multiref::io::write_text_file(params, multiref::io::dump(with_meta(std::move(body), c)));
  multiref::io::write_text_file(trace, multiref::io::trace_to_csv(res.trace, c.hash));
  if (generated) multiref::io::write_text_file(c.output_dir / "dpo_dataset.csv", multiref::io::dataset_to_csv(data, c.hash));
  std::printf("iterations=%zu converged=%s stalled=%s final_loss=%s\n", res.trace.size(),
              res.converged ? "true" : "false", res.stalled ? "true" : "false",
              multiref::io::format_double(res.trace.empty() ? 0.0 : res.trace.back().loss).c_str());
  std::printf("wrote %s, %s\n", params.string().c_str(), trace.string().c_str());
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multi-reference KL-regularized alignment toolkit"};
  app.require_subcommand(1);
  GlobalOptions g;
  std::uint64_t seed = 0;
  app.add_option("--threads", g.threads, "worker threads (0: all cores)");
  app.add_option("--out", g.out, "output directory (overrides the config)");
  auto* seed_opt = app.add_option("--seed", seed, "seed override");

  auto* verify = app.add_subcommand("verify", "run the oracle-equivalence and identity suites");
  bool quick = false;
  std::string fault;
  verify->add_flag("--quick", quick, "reduced instance counts");
  verify->add_option("--inject-fault", fault)->group("");

  auto* solve = app.add_subcommand("solve", "closed-form policies for an ensemble and reward");
  std::string solve_config, mode;
  solve->add_option("--config", solve_config, "config JSON")->required();
  solve->add_option("--mode", mode, "rkl or fkl");

  auto* sweep = app.add_subcommand("sweep", "sample-complexity sweep");
  std::string sweep_config;
  sweep->add_option("--config", sweep_config, "config JSON")->required();

  auto* dpo = app.add_subcommand("dpo", "tabular DPO training");
  std::string dpo_config;
  dpo->add_option("--config", dpo_config, "config JSON")->required();

  for (auto* sub : {verify, solve, sweep, dpo}) {
    sub->add_option("--threads", g.threads, "worker threads (0: all cores)");
    sub->add_option("--out", g.out, "output directory (overrides the config)");
    sub->add_option("--seed", seed, "seed override");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kConfigParse;
  }
  bool seed_given = seed_opt->count() > 0;
  for (auto* sub : {verify, solve, sweep, dpo})
    if (sub->parsed() && sub->get_option("--seed")->count() > 0) seed_given = true;
  if (seed_given) g.seed = seed;

  try {
    if (verify->parsed()) return cmd_verify(quick, fault, g);
    if (solve->parsed()) return cmd_solve(solve_config, mode, g);
    if (sweep->parsed()) return cmd_sweep(sweep_config, g);
    if (dpo->parsed()) return cmd_dpo(dpo_config, g);
  } catch (const multiref::Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return exit_code_for(e.kind());
  } catch (const nlohmann::json::exception& e) {
    std::fprintf(stderr, "error [ConfigParse]: %s\n", e.what());
    return kConfigParse;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kNumerical;
  }
  return kOk;
}
