#include <cmath>

#include <gtest/gtest.h>

#include "pmd/schedule.hpp"

using namespace pmd;

TEST(Stepsize, EtaOverT) {
  EXPECT_DOUBLE_EQ(stepsize(EtaOverT{0.5}, 2, 100, 1), 0.25);
  EXPECT_DOUBLE_EQ(stepsize(EtaOverT{1.0}, 1, 100, 1), 1.0);
  // eta > 1 clamps until t >= eta.
  EXPECT_DOUBLE_EQ(stepsize(EtaOverT{3.0}, 1, 100, 1), 1.0);
  EXPECT_DOUBLE_EQ(stepsize(EtaOverT{3.0}, 2, 100, 1), 1.0);
  EXPECT_DOUBLE_EQ(stepsize(EtaOverT{3.0}, 6, 100, 1), 0.5);
}

TEST(Stepsize, CappedHarmonic) {
  const CappedHarmonic loose{1e-9, 1e9, 2.0};
  EXPECT_DOUBLE_EQ(stepsize(loose, 1, 5000, 2), 1.0);
  EXPECT_DOUBLE_EQ(stepsize(loose, 3, 5000, 2), 0.5);
  // 0.1 / 1024^{1/3} = 0.1 / 10.079368399158986.
  EXPECT_NEAR(stepsize(CappedHarmonic{10.0, 1.0, 2.0}, 1, 1024, 2), 0.009921256574801247, 1e-15);
  EXPECT_NEAR(stepsize(CappedHarmonic{10.0, 1.0, 2.0}, 500, 1024, 2), 2.0 / 501.0, 1e-15);
}

TEST(Stepsize, OffsetPower) {
  EXPECT_DOUBLE_EQ(stepsize(EtaOverOffsetPower{1.0, 10.0, 1.0}, 5, 1, 1), 1.0 / 15.0);
  EXPECT_DOUBLE_EQ(stepsize(EtaOverOffsetPower{2.0, 0.0, 0.5}, 16, 1, 1), 0.5);
  EXPECT_DOUBLE_EQ(stepsize(EtaOverOffsetPower{1.0, 0.0, 1.0}, 7, 1, 1), stepsize(EtaOverT{1.0}, 7, 1, 1));
}

TEST(Stepsize, RangeProperty) {
  const std::vector<StepSchedule> schedules = {EtaOverT{1.0}, EtaOverT{0.3}, CappedHarmonic{}, CappedHarmonic{0.1, 5.0, 1.0},
                                               EtaOverOffsetPower{1.0, 10.0, 0.7}};
  for (const auto& s : schedules) {
    double prev = 2.0;
    for (std::size_t t = 1; t <= 2000; ++t) {
      const double g = stepsize(s, t, 1000, 2);
      EXPECT_GT(g, 0.0);
      EXPECT_LE(g, 1.0);
      EXPECT_LE(g, prev);
      prev = g;
    }
  }
}

TEST(Stepsize, Errors) {
  EXPECT_THROW(stepsize(EtaOverT{1.0}, 0, 1, 1), Error);
  EXPECT_THROW(validate(StepSchedule{EtaOverT{0.0}}), Error);
  EXPECT_THROW(validate(StepSchedule{CappedHarmonic{-1.0, 1.0, 2.0}}), Error);
  EXPECT_THROW(validate(StepSchedule{EtaOverOffsetPower{1.0, -1.0, 1.0}}), Error);
  EXPECT_NO_THROW(validate(StepSchedule{CappedHarmonic{}}));
}

TEST(ParticleCount, Schedules) {
  EXPECT_EQ(particle_count(FixedCount{1500}, 1), 1500u);
  EXPECT_EQ(particle_count(FixedCount{1500}, 999), 1500u);
  EXPECT_EQ(particle_count(LinearCount{3}, 7), 21u);
  EXPECT_EQ(particle_count(PowerCount{2.0, 1.5}, 4), 16u);
  EXPECT_EQ(particle_count(PowerCount{0.3, 2.0}, 2), 2u);
  EXPECT_EQ(particle_count(PowerCount{0.01, 0.0}, 5), 1u);
  EXPECT_THROW(particle_count(FixedCount{1}, 0), Error);
}

TEST(ParticleCount, NondecreasingAndPositive) {
  const std::vector<ParticleSchedule> schedules = {FixedCount{10}, LinearCount{1}, PowerCount{0.5, 0.5}, PowerCount{3.0, 2.0}};
  for (const auto& s : schedules) {
    std::size_t prev = 0;
    for (std::size_t t = 1; t <= 500; ++t) {
      const std::size_t m = particle_count(s, t);
      EXPECT_GE(m, 1u);
      EXPECT_GE(m, prev);
      prev = m;
    }
  }
}

TEST(ParticleCount, Validation) {
  EXPECT_THROW(validate(ParticleSchedule{FixedCount{0}}), Error);
  EXPECT_THROW(validate(ParticleSchedule{LinearCount{0}}), Error);
  EXPECT_THROW(validate(ParticleSchedule{PowerCount{0.0, 1.0}}), Error);
  EXPECT_THROW(validate(ParticleSchedule{PowerCount{1.0, -1.0}}), Error);
}
