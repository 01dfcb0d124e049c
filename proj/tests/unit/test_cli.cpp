#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>
#include <string>

#include <sys/wait.h>

#include <gtest/gtest.h>

#include "isotori/config.hpp"
#include "isotori/runner.hpp"
#include "support/error_kind.hpp"

using namespace isotori;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string first_line(const fs::path& p) {
  std::ifstream in(p);
  std::string line;
  std::getline(in, line);
  return line;
}

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("isotori_cli_test_" + name);
  fs::remove_all(dir);
  return dir;
}

std::string config_message(const std::string& text) {
  try {
    parse_config(text);
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::config);
    return e.what();
  }
  ADD_FAILURE() << "no error for " << text;
  return {};
}

int run_binary(const fs::path& config, const fs::path& out) {
  const std::string cmd = std::string("\"") + ISOTORI_CLI_PATH + "\" -c \"" + config.string() + "\" -o \"" +
                          out.string() + "\" > \"" + (out.string() + ".stdout") + "\" 2>&1";
  const int raw = std::system(cmd.c_str());
  return WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
}

ExecuteOptions quiet() {
  ExecuteOptions o;
  o.diagnostics = nullptr;
  return o;
}

}  // namespace

TEST(Config, MinimalDocumentTakesDefaults) {
  const auto cfg = parse_config(R"({"system": "action_oscillators", "n": 2, "s": 1, "command": "check"})");
  EXPECT_EQ(cfg.command, Command::check);
  EXPECT_EQ(cfg.system.kind, ModelKind::action_oscillators);
  EXPECT_EQ(cfg.system.n, 2u);
  EXPECT_EQ(cfg.system.s, 1u);
  EXPECT_EQ(cfg.system.parameters.at("omega").size(), 2u);
  EXPECT_EQ(cfg.tolerances, Tolerances{});
  EXPECT_EQ(cfg.eps_grid, std::vector<double>{0.0});
  EXPECT_FALSE(cfg.alpha.has_value());
  EXPECT_EQ(cfg.kappa, 1u);
  EXPECT_EQ(cfg.hypothesis_samples, 100u);
}

TEST(Config, ErrorsNameTheKey) {
  EXPECT_NE(config_message(R"({"system": "lyapunov", "command": "check", "tolerances": {"tol_unit": -1}})")
                .find("tolerances.tol_unit"),
            std::string::npos);
  EXPECT_NE(config_message(R"({"system": "lyapunov", "command": "check", "colour": 1})").find("colour"),
            std::string::npos);
  EXPECT_NE(config_message(R"({"system": "lyapunov", "command": "check", "epsilon": "big"})").find("epsilon"),
            std::string::npos);
  EXPECT_NE(config_message(R"({"system": "lyapunov"})").find("command"), std::string::npos);
  EXPECT_NE(config_message(R"({"system": "lyapunov", "command": "fly"})").find("command"), std::string::npos);
  EXPECT_NE(config_message(R"({"system": "lyapunov", "command": "check", "kappa": 2})").find("kappa"),
            std::string::npos);
  EXPECT_NE(config_message(R"({"system": "isotropic_momentum", "command": "nondeg", "alpha": [0, 0]})").find("alpha"),
            std::string::npos);
  EXPECT_NE(config_message(R"({"system": "lyapunov", "command": "continue", "beta_grid": {}})").find("beta_grid"),
            std::string::npos);
  EXPECT_NE(config_message(R"({"system": "lyapunov", "command": "continue", "eps_grid": []})").find("eps_grid"),
            std::string::npos);
  EXPECT_FALSE(config_message("{not json").empty());
}

TEST(Config, JsonRoundTrip) {
  for (const char* name : {"check_system_a", "continue_system_c", "freq_system_a", "nondeg_system_c"}) {
    const auto cfg = parse_config(slurp(fs::path(ISOTORI_CONFIG_DIR) / (std::string(name) + ".json")));
    EXPECT_EQ(parse_config(to_json(cfg)), cfg) << name;
  }
}

TEST(Csv, FormatDoubleRoundTrips) {
  for (double x : {0.0, 1.0, -2.5, 0.1, 1.0 / 3.0, 6.02214076e23, 5e-324}) {
    EXPECT_EQ(std::strtod(format_double(x).c_str(), nullptr), x);
  }
  EXPECT_EQ(format_double(0.1), "0.1");
  EXPECT_EQ(format_double(std::numeric_limits<double>::quiet_NaN()), "nan");
}

TEST(Execute, NondegOnIsotropicMomentum) {
  auto cfg = parse_config(slurp(fs::path(ISOTORI_CONFIG_DIR) / "nondeg_system_c.json"));
  cfg.outputs = scratch("nondeg").string();
  ASSERT_EQ(execute(cfg, quiet()), exit_pass);
  const auto doc = nlohmann::json::parse(slurp(fs::path(cfg.outputs) / "criterion.json"));
  EXPECT_NEAR(doc["criterion"]["margin"].get<double>(), 1.0 - std::sqrt(2.0) / 2.0, 1e-12);
  EXPECT_TRUE(doc["nondegenerate"].get<bool>());
  EXPECT_TRUE(doc["q_path_nondegenerate"].get<bool>());
}

TEST(Execute, RunLogEchoesTheSourceVerbatim) {
  const std::string text = slurp(fs::path(ISOTORI_CONFIG_DIR) / "nondeg_system_c.json");
  auto cfg = parse_config(text);
  cfg.outputs = scratch("runlog").string();
  auto opts = quiet();
  opts.source_text = text;
  execute(cfg, opts);
  const std::string log = slurp(fs::path(cfg.outputs) / "run.log");
  EXPECT_NE(log.find(text), std::string::npos);
  EXPECT_LT(log.find("# config as given:"), log.find("# config resolved:"));
  EXPECT_NE(log.find("exit 0"), std::string::npos);
}

TEST(Execute, CheckWritesHypotheses) {
  auto cfg = parse_config(slurp(fs::path(ISOTORI_CONFIG_DIR) / "check_system_a.json"));
  cfg.outputs = scratch("check").string();
  cfg.hypothesis_samples = 20;
  EXPECT_EQ(execute(cfg, quiet()), exit_pass);
  EXPECT_TRUE(fs::exists(fs::path(cfg.outputs) / "hypotheses.json"));
}

TEST(Execute, ContinueOutputsAreDeterministic) {
  auto cfg = parse_config(R"({"command": "continue", "system": "action_oscillators",
                              "beta_grid": {"step": 0.05, "count": 2}, "eps_grid": [0, 0.05],
                              "samples": {"grid_per_cycle": 3}})");
  cfg.outputs = scratch("det_a").string();
  ASSERT_EQ(execute(cfg, quiet()), exit_pass);
  const fs::path a = cfg.outputs;
  cfg.outputs = scratch("det_b").string();
  ASSERT_EQ(execute(cfg, quiet()), exit_pass);
  const fs::path b = cfg.outputs;
  for (const char* f : {"family.csv", "torus_samples.csv"}) {
    EXPECT_EQ(slurp(a / f), slurp(b / f)) << f;
  }
  EXPECT_EQ(first_line(a / "family.csv"),
            "beta_1,beta_2,eps,y_norm,residual,freq_1,freq_2,converged,unit_multiplicity");
  EXPECT_EQ(first_line(a / "torus_samples.csv"), "record_id,theta_1,theta_2,x_1,x_2,x_3,x_4,x_5,x_6,F_dev_max");
}

TEST(Binary, EmptyGridIsAConfigError) {
  const fs::path dir = scratch("bin_empty");
  fs::create_directories(dir);
  const fs::path cfg = dir / "cfg.json";
  std::ofstream(cfg) << R"({"command": "continue", "system": "lyapunov", "beta_grid": {"count": 0}})";
  EXPECT_EQ(run_binary(cfg, dir / "out"), 2);
  EXPECT_NE(slurp(dir.string() + "/out.stdout").find("beta_grid"), std::string::npos);
}

TEST(Binary, MissingConfigFile) {
  const fs::path dir = scratch("bin_missing");
  fs::create_directories(dir);
  EXPECT_EQ(run_binary(dir / "absent.json", dir / "out"), 2);
}

TEST(Binary, NondegPasses) {
  const fs::path dir = scratch("bin_nondeg");
  fs::create_directories(dir);
  EXPECT_EQ(run_binary(fs::path(ISOTORI_CONFIG_DIR) / "nondeg_system_c.json", dir / "out"), 0);
  EXPECT_TRUE(fs::exists(dir / "out" / "criterion.json"));
}

TEST(Binary, ResonantFloquetFails) {
  const fs::path dir = scratch("bin_resonant");
  fs::create_directories(dir);
  EXPECT_EQ(run_binary(fs::path(ISOTORI_CONFIG_DIR) / "floquet_resonant.json", dir / "out"), 1);
  const auto doc = nlohmann::json::parse(slurp(dir / "out" / "monodromy.json"));
  EXPECT_FALSE(doc["hypothesis_iii"]["pass"].get<bool>());
  EXPECT_EQ(first_line(dir / "out" / "multipliers.csv"), "index,re,im,abs_minus_one");
}

TEST(Execute, FreqFlagsTheUncoupledLevel) {
  auto cfg = parse_config(slurp(fs::path(ISOTORI_CONFIG_DIR) / "freq_system_a.json"));
  cfg.outputs = scratch("freq").string();
  cfg.beta_count = {3, 3};
  cfg.samples = false;
  // eps = 0 has a vanishing twist, so the run is a principled failure
  EXPECT_EQ(execute(cfg, quiet()), exit_failure);
  EXPECT_EQ(first_line(fs::path(cfg.outputs) / "twist.csv"), "beta_1,beta_2,eps,det");
  const auto doc = nlohmann::json::parse(slurp(fs::path(cfg.outputs) / "twist.json"));
  EXPECT_FALSE(doc["nondegenerate"].get<bool>());
}
