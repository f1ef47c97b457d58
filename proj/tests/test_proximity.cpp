#include "gridtac/proximity.hpp"
#include "gridtac/rng.hpp"

#include <gtest/gtest.h>

using namespace gridtac;

namespace {

ReferenceSet flat_refs(int w, int h, std::uint8_t level)
{
  FusionParams p;
  p.n_frames = 3;
  p.m_backgrounds = 3;
  std::vector<Frame> frames(3, Frame(w, h, level));
  return build_references(frames, p);
}

} // namespace

TEST(Proximity, DecisionTableBoundaries)
{
  const ProximityParams p;
  EXPECT_EQ(classify_proximity_state(0.49, 0.9, p), ProximityState::Normal);
  EXPECT_EQ(classify_proximity_state(0.5, 0.19, p), ProximityState::Approaching);
  EXPECT_EQ(classify_proximity_state(0.5, 0.2, p), ProximityState::Noise);
  EXPECT_EQ(classify_proximity_state(3.0, -1.0, p), ProximityState::Approaching);
  EXPECT_EQ(classify_proximity_state(3.0, 1.0, p), ProximityState::Noise);
}

TEST(Proximity, FrameEqualToBackgroundIsNormal)
{
  const auto refs = flat_refs(16, 12, 60);
  const auto rec = classify_proximity(Frame(16, 12, 60), refs, {}, 4);
  EXPECT_EQ(rec.frame_index, 4u);
  EXPECT_EQ(rec.e_total, 0.0);
  EXPECT_EQ(rec.c_total, 0.0);
  EXPECT_EQ(rec.state, ProximityState::Normal);
  EXPECT_EQ(proximity_score(rec, {}), 0.0);
}

TEST(Proximity, FilterIsMinimumOverClampedDifferences)
{
  FusionParams p;
  p.n_frames = 3;
  p.m_backgrounds = 3;
  std::vector<Frame> bgs{Frame(2, 1, 10), Frame(2, 1, 50), Frame(2, 1, 30)};
  const auto refs = build_references(bgs, p);
  Frame f(2, 1, std::vector<std::uint8_t>{100, 40, 20, 5, 5, 5});
  const auto ff = filter_background(f, refs);
  EXPECT_EQ(ff.filtered[0](0, 0), 50); // min(90, 50, 70)
  EXPECT_EQ(ff.filtered[1](0, 0), 0);  // 40 - 50 clamps
  EXPECT_EQ(ff.filtered[2](0, 0), 0);
  EXPECT_EQ(ff.filtered[0](1, 0), 0);
}

TEST(Proximity, UniformBrightnessIsNoise)
{
  // A broadband flash lifts all channels together: high correlation.
  const auto refs = flat_refs(32, 24, 20);
  Rng r(31);
  Frame f(32, 24);
  for (int y = 0; y < 24; ++y) {
    for (int x = 0; x < 32; ++x) {
      const auto v = static_cast<std::uint8_t>(40 + r.below(150));
      for (int c = 0; c < 3; ++c) {
        f.at(x, y, c) = v;
      }
    }
  }
  const auto rec = classify_proximity(f, refs, {});
  EXPECT_EQ(rec.c_total, 1.0);
  EXPECT_EQ(rec.state, ProximityState::Noise);
}

TEST(Proximity, ChannelSeparatedLightIsApproaching)
{
  // Side lights of different colours reach different parts of an object.
  const auto refs = flat_refs(32, 24, 20);
  Frame f(32, 24, 20);
  for (int y = 0; y < 24; ++y) {
    for (int x = 0; x < 32; ++x) {
      const int c = (x / 4 + y / 4) % 3;
      f.at(x, y, c) = static_cast<std::uint8_t>(60 + 3 * x);
    }
  }
  const auto rec = classify_proximity(f, refs, {});
  EXPECT_LT(rec.c_total, 0.2);
  EXPECT_GE(rec.e_total, 0.5);
  EXPECT_EQ(rec.state, ProximityState::Approaching);
  const double s = proximity_score(rec, {});
  EXPECT_GT(s, 0.0);
  EXPECT_LE(s, 1.0);
}

TEST(Proximity, SizeMismatchThrows)
{
  const auto refs = flat_refs(8, 8, 10);
  EXPECT_THROW(classify_proximity(Frame(8, 7), refs, {}), InvalidInput);
}

TEST(Proximity, ScoreIsZeroOutsideApproachingAndBounded)
{
  Rng r(32);
  const ProximityParams p;
  for (int t = 0; t < 200; ++t) {
    ProximityRecord rec;
    rec.e_total = 8.0 * r.uniform();
    rec.c_total = r.uniform(-1.0, 1.0);
    rec.state = classify_proximity_state(rec.e_total, rec.c_total, p);
    const double s = proximity_score(rec, p);
    if (rec.state != ProximityState::Approaching) {
      EXPECT_EQ(s, 0.0);
    } else {
      EXPECT_GE(s, 0.0);
      EXPECT_LE(s, 1.0);
    }
  }
}

TEST(Proximity, ParamsValidate)
{
  ProximityParams p;
  p.tau_c = 1.5;
  EXPECT_THROW(p.validate(), ConfigError);
  p = {};
  p.tau_e = -0.1;
  EXPECT_THROW(p.validate(), ConfigError);
}
