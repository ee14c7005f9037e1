#include <doctest.h>

#include "process.hpp"

using namespace multiref::test;
namespace fs = std::filesystem;

namespace {

const std::string kEnsemble = R"({"members": [[[0.5, 0.3, 0.2]], [[0.2, 0.3, 0.5]]], "weights": [0.5, 0.5]})";
const std::string kReward = R"({"r_max": 1.0, "values": [[1.0, 0.5, 0.0]]})";

std::string small_sweep(const std::string& mode, const std::string& n_values) {
  return R"({"mode": ")" + mode + R"(", "shape": [2, 8], "K": 2, "class_size": 64, "n_values": )" + n_values +
         R"(, "trials": 20, "seed": 5})";
}

}  // namespace

TEST_SUITE("cli") {

TEST_CASE("usage errors are config errors") {
  CHECK(run_cli("").exit_code != 0);
  CHECK(run_cli("solve").exit_code == 2);
  CHECK(run_cli("--help").exit_code == 0);
}

TEST_CASE("solve writes a solution file") {
  const fs::path out = scratch("solve_ok");
  const RunResult r = run_cli("solve --config " + quote(config_path("solve_example.json")) + " --mode rkl --out " +
                              quote(out.string()));
  CHECK_MESSAGE(r.exit_code == 0, r.output);
  CHECK(fs::exists(out / "solution_rkl.json"));
  CHECK(slurp(out / "solution_rkl.json").find("\"config_hash\"") != std::string::npos);
  const RunResult f = run_cli("solve --config " + quote(config_path("solve_example.json")) + " --mode fkl --out " +
                              quote(out.string()));
  CHECK_MESSAGE(f.exit_code == 0, f.output);
  CHECK(fs::exists(out / "solution_fkl.json"));
}

TEST_CASE("solve error exits") {
  const fs::path dir = scratch("solve_err");
  CHECK(run_cli("solve --config " + quote((dir / "missing.json").string()) + " --mode rkl").exit_code == 3);

  spit(dir / "bad_weights.json",
       R"({"gamma": 1, "mode": "rkl", "reward": )" + kReward +
           R"(, "ensemble": {"members": [[[0.5, 0.3, 0.2]], [[0.2, 0.3, 0.5]]], "weights": [0.5, 0.4]}})");
  const RunResult w = run_cli("solve --config " + quote((dir / "bad_weights.json").string()) + " --out " +
                              quote(dir.string()));
  CHECK(w.exit_code == 2);
  CHECK(w.output.find("weights") != std::string::npos);

  spit(dir / "disjoint.json", R"({"gamma": 1, "mode": "rkl", "reward": )" + kReward +
                                  R"(, "ensemble": {"members": [[[1, 0, 0]], [[0, 1, 0]]]}})");
  CHECK(run_cli("solve --config " + quote((dir / "disjoint.json").string()) + " --out " + quote(dir.string()))
            .exit_code == 4);

  spit(dir / "missing_input.json", R"({"gamma": 1, "mode": "rkl", "reward": "nope.json", "ensemble": )" + kEnsemble + "}");
  CHECK(run_cli("solve --config " + quote((dir / "missing_input.json").string()) + " --out " + quote(dir.string()))
            .exit_code == 3);

  spit(dir / "not_json.json", "{gamma: ");
  CHECK(run_cli("solve --config " + quote((dir / "not_json.json").string()) + " --mode rkl").exit_code == 2);
}

TEST_CASE("sweep writes three files and reruns byte-identically") {
  const fs::path dir = scratch("sweep_ok");
  spit(dir / "sweep.json", small_sweep("rkl", "[16, 32, 64, 128]"));
  const std::string base = "sweep --config " + quote((dir / "sweep.json").string()) + " --out ";
  const RunResult a = run_cli(base + quote((dir / "a").string()) + " --threads 1");
  CHECK_MESSAGE(a.exit_code == 0, a.output);
  for (const char* f : {"sweep_rkl_raw.csv", "sweep_rkl_aggregate.csv", "sweep_rkl_summary.json"})
    CHECK(fs::exists(dir / "a" / f));
  const RunResult b = run_cli(base + quote((dir / "b").string()) + " --threads 3");
  CHECK(b.exit_code == 0);
  for (const char* f : {"sweep_rkl_raw.csv", "sweep_rkl_aggregate.csv", "sweep_rkl_summary.json"})
    CHECK(slurp(dir / "a" / f) == slurp(dir / "b" / f));
}

TEST_CASE("sweep seed override changes the hash") {
  const fs::path dir = scratch("sweep_seed");
  spit(dir / "sweep.json", small_sweep("fkl", "[16, 32, 64, 128]"));
  const std::string base = "sweep --config " + quote((dir / "sweep.json").string());
  CHECK(run_cli(base + " --out " + quote((dir / "a").string())).exit_code == 0);
  CHECK(run_cli(base + " --seed 99 --out " + quote((dir / "b").string())).exit_code == 0);
  CHECK(run_cli("--seed 99 " + base + " --out " + quote((dir / "c").string())).exit_code == 0);
  const std::string a = slurp(dir / "a" / "sweep_fkl_raw.csv");
  const std::string b = slurp(dir / "b" / "sweep_fkl_raw.csv");
  CHECK(a.substr(0, a.find('\n')) != b.substr(0, b.find('\n')));
  CHECK(a != b);
  CHECK(b == slurp(dir / "c" / "sweep_fkl_raw.csv"));
}

TEST_CASE("sweep with too few unsaturated sizes exits with a numerical error") {
  const fs::path dir = scratch("sweep_insufficient");
  spit(dir / "sweep.json", small_sweep("rkl", "[16, 32]"));
  const RunResult r = run_cli("sweep --config " + quote((dir / "sweep.json").string()) + " --out " + quote(dir.string()));
  CHECK(r.exit_code == 4);
  CHECK(r.output.find("InsufficientData") != std::string::npos);
}

TEST_CASE("dpo example trains and reruns identically") {
  const fs::path dir = scratch("dpo_ok");
  const std::string base = "dpo --config " + quote(config_path("dpo_example.json")) + " --out ";
  const RunResult a = run_cli(base + quote((dir / "a").string()));
  CHECK_MESSAGE(a.exit_code == 0, a.output);
  CHECK(run_cli(base + quote((dir / "b").string()) + " --threads 8").exit_code == 0);
  for (const char* f : {"dpo_trace.csv", "dpo_params.json", "dpo_dataset.csv"}) {
    CHECK(fs::exists(dir / "a" / f));
    CHECK(slurp(dir / "a" / f) == slurp(dir / "b" / f));
  }
}

TEST_CASE("dpo on identical responses converges at iteration 1") {
  const fs::path dir = scratch("dpo_identical");
  spit(dir / "data.csv", "i,x,y_w,y_l\n0,0,1,1\n1,0,2,2\n2,0,0,0\n");
  spit(dir / "dpo.json", R"({"mode": "rkl", "gamma": 1, "ensemble": )" + kEnsemble + R"(, "dataset": "data.csv"})");
  const RunResult r = run_cli("dpo --config " + quote((dir / "dpo.json").string()) + " --out " + quote(dir.string()));
  CHECK_MESSAGE(r.exit_code == 0, r.output);
  const std::string trace = slurp(dir / "dpo_trace.csv");
  CHECK(trace.find("\n1,") != std::string::npos);
  CHECK(trace.find("\n2,") == std::string::npos);
  CHECK(slurp(dir / "dpo_params.json").find("\"converged\": true") != std::string::npos);
}

TEST_CASE("forward dpo with an unfloored zero probability fails") {
  const fs::path dir = scratch("dpo_zero");
  spit(dir / "data.csv", "i,x,y_w,y_l\n0,0,0,2\n");
  spit(dir / "dpo.json", R"({"mode": "fkl", "gamma": 1, "floor_probabilities": false, "ensemble": )"
                         R"({"members": [[[0.5, 0.5, 0.0]], [[0.3, 0.7, 0.0]]]}, "dataset": "data.csv"})");
  const RunResult r = run_cli("dpo --config " + quote((dir / "dpo.json").string()) + " --out " + quote(dir.string()));
  CHECK(r.exit_code == 4);
  CHECK(r.output.find("DivisionByZeroPolicy") != std::string::npos);
}

TEST_CASE("quick verify passes and the injected fault is caught") {
  const fs::path dir = scratch("verify");
  const RunResult ok = run_cli("verify --quick --out " + quote(dir.string()));
  CHECK_MESSAGE(ok.exit_code == 0, ok.output);
  CHECK(fs::exists(dir / "verify_report.json"));
  const RunResult bad = run_cli("verify --quick --inject-fault escort-normalizer");
  CHECK(bad.exit_code == 5);
  CHECK(bad.output.find("first failing check: theorem1_oracle_equivalence") != std::string::npos);
}

}  // TEST_SUITE
