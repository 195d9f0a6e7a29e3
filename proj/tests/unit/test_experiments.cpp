#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <sstream>
#include <string>

#include "ergokit/experiments.hpp"

using namespace ergokit;
namespace fs = std::filesystem;

namespace {

std::string cli() { return ERGOKIT_CLI_PATH; }

fs::path scratch() {
  const fs::path dir = fs::temp_directory_path() / ("ergokit_cli_" + std::to_string(::getpid()));
  fs::create_directories(dir);
  return dir;
}

int run(const std::string& args, const std::string& env = "") {
  const std::string cmd = env + (env.empty() ? "" : " ") + cli() + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(is), std::istreambuf_iterator<char>()};
}

std::string config_error_path(const Json& raw) {
  try {
    resolve_config(raw);
  } catch (const ConfigError& e) {
    return e.path();
  }
  return "";
}

}  // namespace

TEST(ResolveConfig, FillsDefaultsInCanonicalOrder) {
  const Json cfg = resolve_config(Json::parse(R"({"params": {"cost": "x"}, "experiment": "poisson",
                                                  "model": {"name": "ar1"}})"));
  EXPECT_EQ(cfg.begin().key(), "experiment");
  EXPECT_EQ(cfg["model"]["rho"], 0.5);
  EXPECT_EQ(cfg["grid"]["points"], 401);
  EXPECT_EQ(cfg["params"]["mode"], "auto");
  EXPECT_EQ(cfg["output"]["format"], "csv");
  EXPECT_EQ(resolve_config(cfg), cfg);
}

TEST(ResolveConfig, NamesTheOffendingKey) {
  EXPECT_EQ(config_error_path(Json::parse(R"({"experiment": "gradcheck", "model": {"name": "ar1"}})")), "mc.seed");
  EXPECT_EQ(config_error_path(Json::parse(R"({"experiment": "decay", "model": {"name": "ar1", "colour": 1}})")),
            "model.colour");
  EXPECT_EQ(config_error_path(Json::parse(R"({"experiment": "decay", "model": {"name": "ar2"}})")), "model.name");
  EXPECT_EQ(config_error_path(Json::parse(R"({"experiment": "decay", "model": {"name": "ar1", "rho": 1.2}})")),
            "model.rho");
  EXPECT_EQ(config_error_path(Json::parse(R"({"experiment": "nope"})")), "experiment");
  EXPECT_EQ(config_error_path(Json::parse(R"({"experiment": "bernstein", "extra": 1})")), "extra");
}

TEST(ResolveConfig, EmbeddedConfigDropsOutputPath) {
  const Json cfg = resolve_config(Json::parse(R"({"experiment": "bernstein", "output": {"path": "/tmp/a.json"}})"));
  EXPECT_TRUE(cfg["output"].contains("path"));
  EXPECT_FALSE(embedded_config(cfg)["output"].contains("path"));
}

TEST(RunExperiment, BernsteinArtifactRoundTrips) {
  const Json cfg = resolve_config(Json::parse(R"({"experiment": "bernstein", "params": {"m": 10}})"));
  const ExperimentOutput out = run_experiment(cfg);
  EXPECT_TRUE(out.check_pass);
  const Json doc = Json::parse(out.text);
  EXPECT_EQ(doc["config"], embedded_config(cfg));
  EXPECT_EQ(resolve_config(config_from_artifact(out.text)), embedded_config(cfg));
  EXPECT_EQ(run_experiment(resolve_config(config_from_artifact(out.text))).text, out.text);
}

TEST(SetPath, CreatesIntermediateObjects) {
  Json j = Json::object();
  set_path(j, "a.b.c", 3);
  set_path(j, "a.d", "x");
  EXPECT_EQ(j["a"]["b"]["c"], 3);
  EXPECT_EQ(j["a"]["d"], "x");
}

TEST(Cli, ExitCodes) {
  const fs::path dir = scratch();
  EXPECT_EQ(run("drift --model ar1 --delta 0.05 --grid -8:8:161 --out " + (dir / "ok.json").string()), 0);
  EXPECT_EQ(run("drift --model ar1 --delta 0.1 --grid -8:8:161 --out " + (dir / "bad.json").string()), 2);
  EXPECT_EQ(run("gradcheck --model ar1 --n 1000"), 1);
  EXPECT_EQ(run("decay --model ar9"), 1);
  EXPECT_EQ(run("run " + (dir / "missing.json").string()), 1);
  EXPECT_EQ(run("--no-such-flag"), 1);
  EXPECT_EQ(run("--help"), 0);
}

TEST(Cli, DecayCsvHasOneRowPerStepAndFooter) {
  const fs::path out = scratch() / "decay.csv";
  ASSERT_EQ(run("decay --model ar1 --grid -8:8:161 --tmax 12 --out " + out.string()), 0);
  std::istringstream is(slurp(out));
  std::string line;
  int rows = 0, footers = 0;
  std::getline(is, line);
  EXPECT_EQ(line.rfind("# config: ", 0), 0u);
  std::getline(is, line);
  EXPECT_EQ(line.rfind("t,", 0), 0u);
  bool has_rho = false;
  while (std::getline(is, line)) {
    if (line.rfind("# ", 0) == 0) {
      ++footers;
      has_rho = has_rho || line.rfind("# rho0=", 0) == 0;
    } else {
      ++rows;
    }
  }
  EXPECT_EQ(rows, 13);
  EXPECT_GT(footers, 0);
  EXPECT_TRUE(has_rho);
}

TEST(Cli, RunsAreReproducibleAndReplayable) {
  const fs::path dir = scratch();
  const std::string args = "lyapunov --model tanh1 --x0 0,1 --horizon 50 --reps 64 --seed 11 --out ";
  ASSERT_EQ(run(args + (dir / "a.csv").string()), 0);
  ASSERT_EQ(run(args + (dir / "b.csv").string()), 0);
  EXPECT_EQ(slurp(dir / "a.csv"), slurp(dir / "b.csv"));
  EXPECT_EQ(run("replay " + (dir / "a.csv").string()), 0);

  std::string tampered = slurp(dir / "a.csv");
  tampered.insert(tampered.find('\n') + 1, "t,extra\n");
  std::ofstream(dir / "c.csv", std::ios::binary) << tampered;
  EXPECT_EQ(run("replay " + (dir / "c.csv").string()), 2);
}

TEST(Cli, ThreadCountDoesNotChangeArtifacts) {
  const fs::path dir = scratch();
  const std::string args = "gradcheck --model rotcon2 --f tanh --x 1,-0.5 --t 3 --n 5000 --seed 4 --out ";
  ASSERT_EQ(run(args + (dir / "t1.json").string(), "ERGOKIT_THREADS=1"), 0);
  ASSERT_EQ(run(args + (dir / "t4.json").string(), "ERGOKIT_THREADS=4"), 0);
  EXPECT_EQ(slurp(dir / "t1.json"), slurp(dir / "t4.json"));
}

TEST(Cli, ConfigFileWithOverrides) {
  const fs::path dir = scratch();
  std::ofstream(dir / "cfg.json") << R"({"experiment": "contraction", "model": {"name": "ar1"},
                                        "mc": {"seed": 3, "reps": 200}, "params": {"x0": [0, 1]}})";
  ASSERT_EQ(run("run " + (dir / "cfg.json").string() + " --t0 2 --out " + (dir / "c.csv").string()), 0);
  const Json embedded = config_from_artifact(slurp(dir / "c.csv"));
  EXPECT_EQ(embedded["params"]["t0"], 2);
  EXPECT_EQ(embedded["mc"]["reps"], 200);
}
