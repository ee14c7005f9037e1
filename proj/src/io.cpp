#include "multiref/io.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

namespace multiref::io {

namespace {

[[noreturn]] void parse_error(std::string_view field, const std::string& msg) {
  fail(ErrorKind::ConfigParse, "field '" + std::string(field) + "': " + msg);
}

const Json& required(const Json& j, std::string_view field) {
  if (!j.is_object()) parse_error(field, "enclosing value is not an object");
  const auto it = j.find(std::string(field));
  if (it == j.end()) parse_error(field, "missing");
  return *it;
}

template <typename T>
T as(const Json& j, std::string_view field) {
  try {
    return j.get<T>();
  } catch (const nlohmann::json::exception& e) {
    parse_error(field, e.what());
  }
}

// Rethrows domain-validation failures as ConfigParse errors naming the field.
template <typename F>
auto validated(std::string_view field, F&& f) {
  try {
    return f();
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::ConfigParse) throw;
    parse_error(field, e.what());
  }
}

std::string csv_row(std::initializer_list<std::string> cells) {
  std::string out;
  bool first = true;
  for (const auto& c : cells) {
    if (!first) out += ',';
    out += c;
    first = false;
  }
  out += '\n';
  return out;
}

}  // namespace

std::uint64_t fnv1a64(std::string_view bytes) noexcept {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

std::string csv_header_line(std::uint64_t config_hash) {
  return "# " + std::string(kToolName) + " " + std::string(kVersion) + " config_hash=" + hex64(config_hash) + "\n";
}

Json meta_object(std::uint64_t config_hash, const Json& config) {
  return Json{{"tool", kToolName}, {"version", kVersion}, {"config_hash", hex64(config_hash)}, {"config", config}};
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::Io, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  if (in.bad()) fail(ErrorKind::Io, "error reading " + path.string());
  return ss.str();
}

void write_text_file(const std::filesystem::path& path, std::string_view text) {
  std::error_code ec;
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path(), ec);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorKind::Io, "cannot write " + path.string());
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!out) fail(ErrorKind::Io, "error writing " + path.string());
}

Json parse_json(std::string_view text, std::string_view what) {
  try {
    return Json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    fail(ErrorKind::ConfigParse, std::string(what) + ": " + e.what());
  }
}

std::string dump(const Json& j) { return j.dump(2) + "\n"; }

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

Json matrix_to_json(const Eigen::MatrixXd& m) {
  Json rows = Json::array();
  for (Eigen::Index x = 0; x < m.rows(); ++x) {
    Json row = Json::array();
    for (Eigen::Index y = 0; y < m.cols(); ++y) row.push_back(m(x, y));
    rows.push_back(std::move(row));
  }
  return rows;
}

Json vector_to_json(const Eigen::VectorXd& v) {
  Json out = Json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v[i]);
  return out;
}

Eigen::MatrixXd matrix_from_json(const Json& j, std::string_view field) {
  if (!j.is_array() || j.empty()) parse_error(field, "expected a non-empty array of rows");
  const std::size_t cols = j.front().is_array() ? j.front().size() : 0;
  if (cols == 0) parse_error(field, "rows must be non-empty arrays");
  Eigen::MatrixXd m(static_cast<Eigen::Index>(j.size()), static_cast<Eigen::Index>(cols));
  for (std::size_t x = 0; x < j.size(); ++x) {
    if (!j[x].is_array() || j[x].size() != cols) parse_error(field, "rows differ in length");
    for (std::size_t y = 0; y < cols; ++y) {
      if (!j[x][y].is_number()) parse_error(field, "entries must be numbers");
      m(static_cast<Eigen::Index>(x), static_cast<Eigen::Index>(y)) = j[x][y].get<double>();
    }
  }
  return m;
}

Eigen::VectorXd vector_from_json(const Json& j, std::string_view field) {
  if (!j.is_array() || j.empty()) parse_error(field, "expected a non-empty array of numbers");
  Eigen::VectorXd v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) {
    if (!j[i].is_number()) parse_error(field, "entries must be numbers");
    v[static_cast<Eigen::Index>(i)] = j[i].get<double>();
  }
  return v;
}

Json ensemble_to_json(const ReferenceEnsemble& ens) {
  Json members = Json::array();
  for (const auto& m : ens.members()) members.push_back(matrix_to_json(m.table()));
  return Json{{"members", std::move(members)}, {"weights", vector_to_json(ens.weights().weights())}};
}

ReferenceEnsemble ensemble_from_json(const Json& j) {
  const Json& members_json = required(j, "members");
  if (!members_json.is_array() || members_json.empty()) parse_error("members", "expected a non-empty array of tables");
  std::vector<ConditionalPolicy> members;
  for (std::size_t i = 0; i < members_json.size(); ++i) {
    const std::string field = "members[" + std::to_string(i) + "]";
    Eigen::MatrixXd t = matrix_from_json(members_json[i], field);
    members.push_back(validated(field, [&] { return ConditionalPolicy(std::move(t)); }));
  }
  SimplexWeights weights = SimplexWeights::uniform(static_cast<Eigen::Index>(members.size()));
  if (j.contains("weights")) {
    Eigen::VectorXd w = vector_from_json(j["weights"], "weights");
    weights = validated("weights", [&] { return SimplexWeights(std::move(w)); });
  }
  return validated("members", [&] { return ReferenceEnsemble(std::move(members), std::move(weights)); });
}

Json reward_to_json(const RewardTable& r) { return Json{{"r_max", r.r_max()}, {"values", matrix_to_json(r.values())}}; }

RewardTable reward_from_json(const Json& j) {
  const double r_max = as<double>(required(j, "r_max"), "r_max");
  Eigen::MatrixXd values = matrix_from_json(required(j, "values"), "values");
  return validated("values", [&] { return RewardTable(std::move(values), r_max); });
}

Json rkl_solution_to_json(const RklSolution& s) {
  return Json{{"mode", "rkl"},
              {"gamma", s.gamma},
              {"policy", matrix_to_json(s.policy.table())},
              {"log_partition", vector_to_json(s.log_partition)},
              {"log_escort_normalizer", vector_to_json(s.log_escort_normalizer)},
              {"objective_value", vector_to_json(s.objective_value)}};
}

Json fkl_solution_to_json(const FklSolution& s) {
  return Json{{"mode", "fkl"},
              {"gamma", s.gamma},
              {"policy", matrix_to_json(s.policy.table())},
              {"z_tilde", vector_to_json(s.z_tilde)},
              {"normalization_residual", vector_to_json(s.residuals)},
              {"support_max_reward", vector_to_json(s.support_max_reward)}};
}

Json gap_report_to_json(const GapReport& g) {
  Json prompt;
  if (const auto* x = std::get_if<Eigen::Index>(&g.prompt)) prompt = *x;
  else prompt = vector_to_json(std::get<PromptDistribution>(g.prompt).dist.probs());
  return Json{{"mode", to_string(g.mode)},
              {"j_value", g.j_value},
              {"j_gamma", g.j_gamma},
              {"optimality_gap", g.optimality_gap},
              {"suboptimality_gap", g.suboptimality_gap},
              {"prompt", std::move(prompt)}};
}

Json coverage_to_json(const CoverageReport& c) {
  return Json{{"constant", c.constant}, {"x", c.x}, {"y", c.y}, {"kl_radius", c.kl_radius}};
}

std::string dataset_to_csv(const PreferenceDataset& data, std::uint64_t config_hash) {
  std::string out = csv_header_line(config_hash) + "i,x,y_w,y_l\n";
  for (std::size_t i = 0; i < data.triples.size(); ++i) {
    const auto& t = data.triples[i];
    out += csv_row({std::to_string(i), std::to_string(t.prompt), std::to_string(t.chosen), std::to_string(t.rejected)});
  }
  return out;
}

PreferenceDataset dataset_from_csv(std::string_view text, Eigen::Index num_prompts, Eigen::Index num_responses) {
  PreferenceDataset data{num_prompts, num_responses, {}};
  std::istringstream in{std::string(text)};
  std::string line;
  bool header_seen = false;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line.front() == '#') continue;
    if (!header_seen) {
      if (line != "i,x,y_w,y_l") parse_error("dataset", "expected header 'i,x,y_w,y_l', got '" + line + "'");
      header_seen = true;
      continue;
    }
    long long i = 0, x = 0, w = 0, l = 0;
    char tail = 0;
    if (std::sscanf(line.c_str(), "%lld,%lld,%lld,%lld%c", &i, &x, &w, &l, &tail) != 4)
      parse_error("dataset", "malformed row at line " + std::to_string(lineno));
    if (x < 0 || x >= num_prompts || w < 0 || w >= num_responses || l < 0 || l >= num_responses)
      parse_error("dataset", "index out of range at line " + std::to_string(lineno));
    PreferenceTriple t;
    t.prompt = x;
    t.chosen = t.first = w;
    t.rejected = t.second = l;
    data.triples.push_back(t);
  }
  if (!header_seen) parse_error("dataset", "missing header");
  return data;
}

std::string trace_to_csv(const std::vector<TraceEntry>& trace, std::uint64_t config_hash) {
  std::string out = csv_header_line(config_hash) + "iter,loss,grad_norm,step_size\n";
  for (const auto& e : trace)
    out += csv_row({std::to_string(e.iter), format_double(e.loss), format_double(e.grad_norm), format_double(e.step_size)});
  return out;
}

std::string sweep_raw_csv(const SweepResult& result, std::uint64_t config_hash) {
  std::string out = csv_header_line(config_hash) + "n,trial,subopt_gap,opt_gap,mle_hit,seed\n";
  for (const auto& r : result.records)
    out += csv_row({std::to_string(r.n), std::to_string(r.trial), format_double(r.suboptimality_gap),
                    format_double(r.optimality_gap), r.mle_hit ? "1" : "0", std::to_string(r.seed_used)});
  return out;
}

std::string sweep_aggregate_csv(const SweepResult& result, std::uint64_t config_hash) {
  std::string out = csv_header_line(config_hash) + "n,mean_subopt,se_subopt,mean_opt,se_opt,hit_rate\n";
  for (const auto& a : result.aggregates)
    out += csv_row({std::to_string(a.n), format_double(a.mean_subopt), format_double(a.se_subopt),
                    format_double(a.mean_opt), format_double(a.se_opt), format_double(a.hit_rate)});
  return out;
}

Json sweep_summary_json(const SweepResult& result) {
  Json per_n = Json::array();
  for (const auto& a : result.aggregates)
    per_n.push_back(Json{{"n", a.n},
                         {"mean_subopt", a.mean_subopt},
                         {"se_subopt", a.se_subopt},
                         {"p90_subopt", a.p90_subopt},
                         {"mean_opt", a.mean_opt},
                         {"se_opt", a.se_opt},
                         {"hit_rate", a.hit_rate}});
  return Json{{"fit",
               {{"slope", result.fit.slope},
                {"intercept", result.fit.intercept},
                {"r_squared", result.fit.r_squared},
                {"used_n", result.fit.used_n},
                {"saturated_n", result.fit.saturated_n}}},
              {"aggregates", std::move(per_n)},
              {"instance_randomization",
               "reference rows Dirichlet(1); true reward uniform on the reward lattice; prompts uniform"},
              {"sweep", sweep_config_to_json(result.config)}};
}

Json sweep_config_to_json(const SweepConfig& c) {
  Json j{{"shape", {c.num_prompts, c.num_responses}},
         {"K", c.k},
         {"gamma", c.gamma},
         {"r_max", c.r_max},
         {"class_size", c.class_size},
         {"grid_points", c.grid_points},
         {"n_values", c.n_values},
         {"trials", c.trials},
         {"seed", c.seed},
         {"mode", to_string(c.mode)}};
  j["weights"] = vector_to_json(c.effective_weights().weights());
  return j;
}

SweepConfig sweep_config_from_json(const Json& j) {
  SweepConfig c;
  if (!j.is_object()) parse_error("sweep", "expected an object");
  if (j.contains("shape")) {
    const auto shape = as<std::vector<long long>>(j["shape"], "shape");
    if (shape.size() != 2 || shape[0] < 1 || shape[1] < 1) parse_error("shape", "expected [num_prompts, num_responses]");
    c.num_prompts = shape[0];
    c.num_responses = shape[1];
  }
  if (j.contains("K")) c.k = as<std::size_t>(j["K"], "K");
  if (j.contains("gamma")) c.gamma = as<double>(j["gamma"], "gamma");
  if (j.contains("r_max")) c.r_max = as<double>(j["r_max"], "r_max");
  if (j.contains("class_size")) c.class_size = as<std::size_t>(j["class_size"], "class_size");
  if (j.contains("grid_points")) c.grid_points = as<std::size_t>(j["grid_points"], "grid_points");
  if (j.contains("n_values")) c.n_values = as<std::vector<std::size_t>>(j["n_values"], "n_values");
  if (j.contains("trials")) c.trials = as<std::size_t>(j["trials"], "trials");
  if (j.contains("seed")) c.seed = as<std::uint64_t>(j["seed"], "seed");
  if (j.contains("mode")) c.mode = validated("mode", [&] { return parse_kl_mode(as<std::string>(j["mode"], "mode")); });
  if (j.contains("weights")) {
    Eigen::VectorXd w = vector_from_json(j["weights"], "weights");
    c.weights = validated("weights", [&] { return SimplexWeights(std::move(w)); });
  }
  validated("sweep", [&] {
    c.validate();
    return 0;
  });
  return c;
}

}  // namespace multiref::io
