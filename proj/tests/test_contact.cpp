#include "gridtac/contact.hpp"
#include "gridtac/rng.hpp"

#include <gtest/gtest.h>

using namespace gridtac;

namespace {

// Bright grid lines every `pitch` pixels on a dark field.
Frame grid_frame(int w, int h, int pitch, int shift = 0, std::uint8_t line = 180)
{
  Frame f(w, h, 5);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      if ((x + shift) % pitch == 0 || y % pitch == 0) {
        for (int c = 0; c < 3; ++c) {
          f.at(x, y, c) = line;
        }
      }
    }
  }
  return f;
}

ReferenceSet grid_refs(int w, int h, int pitch)
{
  FusionParams p;
  p.n_frames = 3;
  p.m_backgrounds = 3;
  std::vector<Frame> frames(3, grid_frame(w, h, pitch));
  return build_references(frames, p);
}

ContactRecord rec(double s)
{
  ContactRecord r;
  r.s_total = s;
  r.state = classify_contact_state(s, {});
  return r;
}

} // namespace

TEST(Contact, ThresholdIsStrict)
{
  const ContactParams p;
  EXPECT_EQ(classify_contact_state(0.59, p), ContactState::Touched);
  EXPECT_EQ(classify_contact_state(0.6, p), ContactState::Untouched);
  EXPECT_EQ(classify_contact_state(0.61, p), ContactState::Untouched);
}

TEST(Contact, ReferenceFrameHasFullSimilarity)
{
  const auto refs = grid_refs(40, 30, 8);
  const auto r = grid_similarity(grid_frame(40, 30, 8), refs, {}, 9);
  EXPECT_EQ(r.frame_index, 9u);
  EXPECT_EQ(r.s_total, 1.0);
  EXPECT_EQ(r.state, ContactState::Untouched);
}

TEST(Contact, DarkFrameHasZeroSimilarity)
{
  const auto refs = grid_refs(40, 30, 8);
  const auto r = grid_similarity(Frame(40, 30, 0), refs, {});
  EXPECT_EQ(r.s_total, 0.0);
  EXPECT_EQ(r.state, ContactState::Touched);
}

TEST(Contact, SimilarityIsAFractionAndMonotoneInErasure)
{
  const auto refs = grid_refs(48, 32, 8);
  Rng r(41);
  auto f = grid_frame(48, 32, 8);
  double prev = grid_similarity(f, refs, {}).s_total;
  for (int step = 0; step < 12; ++step) {
    // Darken a random block; similarity can only fall.
    const int x0 = static_cast<int>(r.below(40));
    const int y0 = static_cast<int>(r.below(24));
    for (int y = y0; y < y0 + 8; ++y) {
      for (int x = x0; x < x0 + 8; ++x) {
        for (int c = 0; c < 3; ++c) {
          f.at(x, y, c) = 0;
        }
      }
    }
    const double s = grid_similarity(f, refs, {}).s_total;
    EXPECT_LE(s, prev);
    EXPECT_GE(s, 0.0);
    prev = s;
  }
}

TEST(Contact, ShiftedGridLosesSimilarity)
{
  const auto refs = grid_refs(48, 32, 8);
  const auto r = grid_similarity(grid_frame(48, 32, 8, 4), refs, {});
  EXPECT_LT(r.s_total, 0.9);
}

TEST(Contact, EmptyGridReferenceIsAConfigError)
{
  FusionParams p;
  p.n_frames = 3;
  p.m_backgrounds = 3;
  std::vector<Frame> frames(3, Frame(8, 8, 0));
  const auto refs = build_references(frames, p);
  EXPECT_THROW(grid_similarity(Frame(8, 8), refs, {}), ConfigError);
}

TEST(Slip, FlipFromTouchedToUntouched)
{
  std::vector<ContactRecord> h{rec(0.4), rec(0.7)};
  EXPECT_TRUE(detect_slip(h, {}, true));
  EXPECT_FALSE(detect_slip(h, {}, false));
}

TEST(Slip, RiseOverWindowMinimum)
{
  const ContactParams p;
  std::vector<ContactRecord> h{rec(0.30), rec(0.40), rec(0.45), rec(0.39)};
  EXPECT_TRUE(detect_slip(h, p, true)); // 0.39 - 0.30 >= 0.08
  h = {rec(0.30), rec(0.40), rec(0.45), rec(0.46), rec(0.47)};
  EXPECT_FALSE(detect_slip(h, p, true)); // minimum of the last 3 is 0.40
  h = {rec(0.5)};
  EXPECT_FALSE(detect_slip(h, p, true));
}

TEST(Slip, SteadyOrFallingSimilarityNeverSlips)
{
  Rng r(42);
  const ContactParams p;
  for (int t = 0; t < 100; ++t) {
    std::vector<ContactRecord> h;
    double s = 0.59;
    for (int i = 0; i < 10; ++i) {
      s -= 0.03 * r.uniform();
      h.push_back(rec(s));
      EXPECT_FALSE(detect_slip(h, p, true));
    }
  }
}

TEST(Fuse, PrecedenceTable)
{
  using P = ProximityState;
  using C = ContactState;
  EXPECT_EQ(fuse_verdict(P::Noise, C::Touched), Verdict::NoiseSuppressed);
  EXPECT_EQ(fuse_verdict(P::Noise, C::Untouched), Verdict::NoiseSuppressed);
  EXPECT_EQ(fuse_verdict(P::Approaching, C::Touched), Verdict::InContact);
  EXPECT_EQ(fuse_verdict(P::Normal, C::Touched), Verdict::InContact);
  EXPECT_EQ(fuse_verdict(P::Approaching, C::Untouched), Verdict::ObjectNear);
  EXPECT_EQ(fuse_verdict(P::Normal, C::Untouched), Verdict::Idle);
}

TEST(Fuse, RequiresMatchingFrames)
{
  ProximityRecord p;
  ContactRecord c;
  p.frame_index = 3;
  c.frame_index = 4;
  EXPECT_THROW(fuse(p, c), InvalidInput);
  c.frame_index = 3;
  EXPECT_EQ(fuse(p, c).verdict, Verdict::Idle);
}
