#include <gtest/gtest.h>

#include "rssiloc/model.hpp"

using namespace rssiloc;

TEST(ZoneThresholds, ClassifiesAroundBoundaries) {
  const ZoneThresholds z{-6.0, 2.0};
  EXPECT_EQ(z.classify(-6.1), ZoneLabel::Inside);
  EXPECT_EQ(z.classify(2.1), ZoneLabel::Outside);
  EXPECT_EQ(z.classify(-2.0), ZoneLabel::Transition);
  EXPECT_EQ(z.classify(-6.0), ZoneLabel::Inside);
  EXPECT_EQ(z.classify(2.0), ZoneLabel::Outside);
}

TEST(ZoneThresholds, RejectsInvertedOrder) {
  const ZoneThresholds z{2.0, 1.0};
  try {
    z.validate();
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_STREQ(e.what(), "inside_max_x must be < outside_min_x");
  }
}

TEST(ZoneThresholds, DeriveLabelsIsMonotoneForMonotonePath) {
  std::vector<double> p;
  for (int i = 0; i <= 200; ++i) p.push_back(10.0 - 0.1 * i);
  const auto l = derive_labels(p, {});
  for (std::size_t i = 1; i < l.size(); ++i) EXPECT_GE(to_int(l[i]), to_int(l[i - 1]));
  EXPECT_EQ(l.front(), ZoneLabel::Outside);
  EXPECT_EQ(l.back(), ZoneLabel::Inside);
}

TEST(SensorArray, Invariants) {
  EXPECT_THROW(SensorArray(std::vector<SensorInfo>{}), ConfigError);
  EXPECT_THROW(SensorArray({{1, {}, -40, -95}, {1, {1, 0, 0}, -40, -95}}), ConfigError);
  EXPECT_THROW(SensorArray({{1, {}, -95, -40}}), ConfigError);
  const SensorArray a({{3, {}, -40, -95}, {7, {1, 0, 0}, -40, -95}});
  EXPECT_EQ(a.index_of(7), 1u);
  EXPECT_FALSE(a.index_of(4).has_value());
}

TEST(MeasurementSeries, ValidateChecksTicksAndWidth) {
  const SensorArray a({{1, {}, -40, -95}});
  MeasurementSeries s;
  s.frames = {{0, {-50.0}}, {1, {std::nullopt}}};
  EXPECT_NO_THROW(s.validate(a));
  s.frames[1].tick = 0;
  EXPECT_THROW(s.validate(a), ConfigError);
  s.frames[1] = {2, {-50.0, -51.0}};
  EXPECT_THROW(s.validate(a), ConfigError);
}

TEST(GroundTruth, GridCheck) {
  MeasurementSeries s;
  s.frames = {{0, {}}, {1, {}}};
  GroundTruthTrack t;
  t.samples = {{0, {}, ZoneLabel::Outside}, {1, {}, ZoneLabel::Outside}};
  EXPECT_NO_THROW(check_same_grid(s, t));
  t.samples[1].tick = 2;
  EXPECT_THROW(check_same_grid(s, t), ConfigError);
}

TEST(ZoneLabel, IntConversion) {
  EXPECT_EQ(zone_from_int(1), ZoneLabel::Transition);
  EXPECT_THROW(zone_from_int(3), ConfigError);
}
