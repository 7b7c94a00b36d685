#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>

#include "nlfilm/field.hpp"
#include "nlfilm/io.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

const char* kTinySlab =
    "grid: {dims: [16, 16, 8], lengths: [4.0, 4.0, 4.0]}\n"
    "domain: {cross_section: rectangle, size: [1.5, 1.5], center: [2.0, 2.0], interval: [1.5, 2.5], "
    "horizon: [0.5, 0.5]}\n";

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
    dir_ = fs::temp_directory_path() / ("nlfilm_cli_" + std::string(info->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override {
    if (!HasFailure()) fs::remove_all(dir_);
  }

  int run(const std::string& args) const {
    const std::string cmd = std::string(NLFILM_CLI) + " " + args + " > " + (dir_ / "stdout.txt").string() + " 2> " +
                            (dir_ / "stderr.txt").string();
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  }

  fs::path write_config(const std::string& name, const std::string& text) const {
    const fs::path p = dir_ / name;
    std::ofstream(p) << text;
    return p;
  }

  static std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream s;
    s << in.rdbuf();
    return s.str();
  }

  static json read_json(const fs::path& p) { return json::parse(slurp(p)); }

  fs::path dir_;
};

TEST_F(Cli, KernelCheckWritesReportAndFinalManifest) {
  const fs::path out = dir_ / "kernel";
  ASSERT_EQ(run("kernel check --radii 5 --out " + out.string()), 0) << slurp(dir_ / "stderr.txt");
  const json man = read_json(out / "manifest.json");
  EXPECT_FALSE(man.at("partial").get<bool>());
  EXPECT_EQ(man.at("status"), "pass");
  const json rep = read_json(out / "kernel_report.json");
  EXPECT_NEAR(rep.at("mass").get<double>(), 3.0, 1e-6);
  EXPECT_TRUE(fs::exists(out / "q_profile.csv"));
  EXPECT_TRUE(fs::exists(out / "reduction.csv"));
}

TEST_F(Cli, SameSeedGivesIdenticalOutputs) {
  const fs::path cfg = write_config("tiny.yaml", kTinySlab);
  const fs::path a = dir_ / "a", b = dir_ / "b", c = dir_ / "c";
  const std::string common = "nlgrad nullspace --samples 5 --dump 1 --config " + cfg.string();
  ASSERT_EQ(run(common + " --seed 7 --out " + a.string()), 0) << slurp(dir_ / "stderr.txt");
  ASSERT_EQ(run(common + " --seed 7 --out " + b.string()), 0);
  ASSERT_EQ(run(common + " --seed 8 --out " + c.string()), 0);
  EXPECT_EQ(slurp(a / "nullspace.json"), slurp(b / "nullspace.json"));
  EXPECT_EQ(slurp(a / "basis_0.bin"), slurp(b / "basis_0.bin"));
  EXPECT_NE(slurp(a / "nullspace.json"), slurp(c / "nullspace.json"));

  ASSERT_EQ(run("geometry weight --points 11 --config " + cfg.string() + " --seed 3 --out " + a.string()), 0);
  ASSERT_EQ(run("geometry weight --points 11 --config " + cfg.string() + " --seed 3 --out " + b.string()), 0);
  EXPECT_EQ(slurp(a / "weight_profile.csv"), slurp(b / "weight_profile.csv"));
  EXPECT_EQ(slurp(a / "weight_columns.csv"), slurp(b / "weight_columns.csv"));
}

TEST_F(Cli, ZeroForceSweepHasZeroGapColumn) {
  const fs::path cfg = write_config(
      "sweep.yaml",
      std::string(kTinySlab) +
          "density: {family: power, p: 2, v: [0, 0, 0]}\n"
          "regime: {name: aniso}\n"
          "sweep: {eps_list: [0.4, 0.2], force_amplitude: 0, test_fields: 3}\n");
  const fs::path out = dir_ / "sweep";
  ASSERT_EQ(run("gamma sweep --config " + cfg.string() + " --out " + out.string()), 0) << slurp(dir_ / "stderr.txt");
  std::ifstream csv(out / "sweep.csv");
  std::string line;
  std::getline(csv, line);
  EXPECT_EQ(line.rfind("epsilon,energy,gap,", 0), 0u);
  int rows = 0;
  while (std::getline(csv, line)) {
    std::stringstream s(line);
    std::string eps, energy, gap;
    std::getline(s, eps, ',');
    std::getline(s, energy, ',');
    std::getline(s, gap, ',');
    EXPECT_EQ(std::stod(gap), 0.0) << line;
    EXPECT_EQ(std::stod(energy), 0.0) << line;
    ++rows;
  }
  EXPECT_EQ(rows, 2);
  EXPECT_FALSE(read_json(out / "manifest.json").at("partial").get<bool>());
  EXPECT_TRUE(fs::exists(out / "limit_minimizer.bin"));
}

TEST_F(Cli, ConfigErrorsExitWithThree) {
  const fs::path bad = write_config("bad.yaml", "regime:\n  horizonn: [1, 0.1]\n");
  EXPECT_EQ(run("kernel check --config " + bad.string() + " --out " + (dir_ / "x").string()), 3);
  EXPECT_NE(slurp(dir_ / "stderr.txt").find("regime.horizonn"), std::string::npos);
  const fs::path thick = write_config("thick.yaml", "regime: {epsilon: 0.1, horizon: [1.0, 0.2]}\n");
  EXPECT_EQ(run("energy eval --config " + thick.string() + " --out " + (dir_ / "y").string()), 3);
  EXPECT_EQ(run("kernel frobnicate"), 3);
  EXPECT_EQ(run("--config " + (dir_ / "missing.yaml").string() + " kernel check"), 3);
}

TEST_F(Cli, ApplyAndFieldInfo) {
  nlfilm::Grid<3> g({8, 8, 8}, {2.0, 2.0, 2.0});
  nlfilm::Field<3> u(g, 3);
  for (std::size_t i = 0; i < g.size(); ++i) {
    const auto x = g.node(i);
    u(0, i) = 2.0 * x[0] - x[2];
    u(1, i) = std::sin(x[1]);
  }
  nlfilm::io::write_field(dir_ / "u.bin", u);
  ASSERT_EQ(run("nlgrad apply --in " + (dir_ / "u.bin").string() + " --result " + (dir_ / "du.bin").string() +
                " --kernel bump:0.5 --horizon 0.5,0.5 --realization spectral --op gradient"),
            0)
      << slurp(dir_ / "stderr.txt");
  const auto du = nlfilm::io::read_field<3>(dir_ / "du.bin");
  EXPECT_EQ(du.components, 9);
  ASSERT_EQ(run("field info --in " + (dir_ / "du.bin").string()), 0);
  const json info = read_json(dir_ / "stdout.txt");
  EXPECT_EQ(info.at("components"), 9);
  EXPECT_EQ(info.at("dims"), json({8, 8, 8}));
  EXPECT_TRUE(info.at("finite").get<bool>());
  EXPECT_EQ(run("field info --in " + (dir_ / "nothing.bin").string()), 4);
}

}  // namespace
