#include <gtest/gtest.h>

#include <filesystem>

#include "rssiloc/scenario.hpp"

using namespace rssiloc;

namespace {

std::string sensors_json(const std::string& extra) {
  std::string s = "[";
  for (int i = 1; i <= 6; ++i) {
    if (i > 1) s += ",";
    s += R"({"id":)" + std::to_string(i) + R"(,"position":[)" + std::to_string(2 * i - 7) + ",1.5,1]" + extra + "}";
  }
  return s + "]";
}

std::string minimal(const std::string& sensor_extra, double a = -6, double b = 2) {
  return R"({"sensors":)" + sensors_json(sensor_extra) + R"(,"zone":{"inside_max_x":)" + std::to_string(a) +
         R"(,"outside_min_x":)" + std::to_string(b) + "}}";
}

}  // namespace

TEST(Scenario, ExplicitSensorsLoad) {
  const auto sc = parse_scenario(minimal(R"(,"ref_power_dbm":-45,"floor_dbm":-95)"));
  ASSERT_EQ(sc.sensors.size(), 6u);
  for (const auto& s : sc.sensors.sensors()) {
    EXPECT_EQ(s.floor_dbm, -95.0);
    EXPECT_EQ(s.ref_power_dbm, -45.0);
  }
}

TEST(Scenario, OmittedCalibrationUsesDefaults) {
  const auto sc = parse_scenario(minimal(""));
  for (const auto& s : sc.sensors.sensors()) {
    EXPECT_EQ(s.floor_dbm, kDefaultFloorDbm);
    EXPECT_EQ(s.ref_power_dbm, kDefaultRefPowerDbm);
  }
  EXPECT_EQ(sc.channel.pathloss_exponent, 2.0);
  EXPECT_EQ(sc.channel.likelihood_variance, 9.0);
  EXPECT_EQ(sc.filter.n_particles, 300u);
  EXPECT_EQ(sc.channel.pattern, AntennaPattern::directional());
}

TEST(Scenario, InvertedZoneRejected) {
  try {
    parse_scenario(minimal("", 2, 1));
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("inside_max_x must be < outside_min_x"), std::string::npos);
  }
}

TEST(Scenario, UnknownFieldRejected) {
  EXPECT_THROW(parse_scenario(minimal(R"(,"gain":1)")), ConfigError);
  EXPECT_THROW(parse_scenario(R"({"sensors":[],"zone":{}})"), ConfigError);
  EXPECT_THROW(parse_scenario("{not json"), ConfigError);
}

TEST(Scenario, JsonRoundTripAndHash) {
  auto sc = offcenter_scenario();
  sc.filter.resampling = ResamplingScheme::Systematic;
  sc.calibration = CalibrationMode::Global;
  const auto back = scenario_from_json(scenario_to_json(sc));
  EXPECT_EQ(scenario_to_json(back), scenario_to_json(sc));
  EXPECT_EQ(scenario_hash(back), scenario_hash(sc));
  EXPECT_NE(scenario_hash(sc), scenario_hash(default_scenario()));
}

TEST(Scenario, PatternByName) {
  const auto j = nlohmann::json::parse(minimal(""));
  auto k = j;
  k["channel"] = {{"pattern", "omni"}};
  EXPECT_EQ(scenario_from_json(k).channel.pattern, AntennaPattern::omnidirectional());
  k["channel"] = {{"pattern", "fancy"}};
  EXPECT_THROW(scenario_from_json(k), ConfigError);
}

TEST(Scenario, ShippedFilesMatchBuiltins) {
  const std::filesystem::path dir = RSSILOC_SOURCE_DIR "/scenarios";
  EXPECT_EQ(scenario_to_json(load_scenario(dir / "default.json")), scenario_to_json(default_scenario()));
  EXPECT_EQ(scenario_to_json(load_scenario(dir / "offcenter.json")), scenario_to_json(offcenter_scenario()));
}

TEST(Scenario, DefaultsValidate) {
  EXPECT_NO_THROW(default_scenario().validate());
  EXPECT_NO_THROW(offcenter_scenario().validate());
}
