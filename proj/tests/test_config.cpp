#include "insitu/config.hpp"

#include "fixtures.hpp"

#include <gtest/gtest.h>

#include <fstream>

using namespace insitu;
using insitu::test::TempDir;

TEST(ConfigFiles, TomlAndJsonAgree) {
  const std::string toml = R"(
seed = 17
[grid]
start_hz = 200.0
step_hz = 50.0
stop_hz = 400.0
[training]
max_epochs = 12
l2 = 0.0
)";
  const std::string json = R"({"seed": 17, "grid": {"start_hz": 200.0, "step_hz": 50.0, "stop_hz": 400.0},
                               "training": {"max_epochs": 12, "l2": 0.0}})";
  const auto a = RunConfig::from_json(parse_config_text(toml, false));
  const auto b = RunConfig::from_json(parse_config_text(json, true));
  EXPECT_EQ(a.grid.size(), 5);
  EXPECT_EQ(a.grid, b.grid);
  EXPECT_EQ(a.training.max_epochs, 12);
  EXPECT_EQ(a.training.l2, 0.0);
  EXPECT_EQ(*a.seed, 17u);
  EXPECT_EQ(a.hash(), b.hash());
}

TEST(ConfigFiles, UnknownKeysAreErrors) {
  EXPECT_THROW(RunConfig::from_json(parse_config_text("[training]\nmax_epoch = 3\n", false)),
               std::invalid_argument);
  EXPECT_THROW(RunConfig::from_json(parse_config_text("colour = 3\n", false)), std::invalid_argument);
  EXPECT_THROW(parse_config_text("[grid\n", false), std::runtime_error);
}

TEST(ConfigFiles, ScenarioAndRangeWarnings) {
  const std::string toml = R"(
[scenario]
name = "wide"
lx_m = 1.5
ly_m = 0.6
source_distance_m = 1.21
flow_resistivity_kns_m4 = 54.7
thickness_mm = 20.0
[parameter_space]
flow_resistivity_kns_m4 = { min = 1.0, max = 100.0, sampling = "log-uniform" }
)";
  const auto c = RunConfig::from_json(parse_config_text(toml, false));
  ASSERT_TRUE(c.scenario.has_value());
  EXPECT_EQ(c.scenario->name, "wide");
  EXPECT_DOUBLE_EQ(c.scenario->material.thickness, 0.02);
  ASSERT_EQ(c.warnings.size(), 2u);
  EXPECT_NE(c.warnings[0].find("lx_m"), std::string::npos);
  EXPECT_NE(c.warnings[1].find("flow_resistivity"), std::string::npos);
}

TEST(ConfigFiles, ShippedConfigsLoadCleanly) {
  const auto data = std::filesystem::path(INSITU_DATA_DIR);
  const auto desk = RunConfig::load(data / "desk_dataset.toml");
  EXPECT_TRUE(desk.warnings.empty());
  EXPECT_EQ(desk.generation.train_base_cases, 20);
  EXPECT_EQ(desk.generation.draws_per_case, 300);
  EXPECT_TRUE(desk.training.decoupled_weight_decay);
  int scenarios = 0;
  for (const auto& e : std::filesystem::directory_iterator(data / "scenarios")) {
    if (e.path().extension() != ".toml") continue;
    const auto c = RunConfig::load(e.path());
    ASSERT_TRUE(c.scenario.has_value()) << e.path();
    EXPECT_TRUE(c.warnings.empty()) << e.path();
    ++scenarios;
  }
  EXPECT_EQ(scenarios, 8);
}

TEST(ConfigFiles, ReportsPathOnError) {
  TempDir dir("cfg");
  const auto p = dir.path() / "bad.toml";
  std::ofstream(p) << "[mesh]\nelements = 3\n";
  try {
    RunConfig::load(p);
    FAIL() << "expected a throw";
  } catch (const std::exception& e) {
    EXPECT_NE(std::string(e.what()).find("bad.toml"), std::string::npos);
  }
}
