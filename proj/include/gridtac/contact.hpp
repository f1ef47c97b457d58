#pragma once

// Contact classification by grid similarity, slip detection, and the
// noise-aware fusion of proximity and contact states.

#include "gridtac/errors.hpp"
#include "gridtac/frames.hpp"
#include "gridtac/fusion.hpp"
#include "gridtac/proximity.hpp"

#include <algorithm>
#include <cstddef>
#include <span>
#include <string_view>

namespace gridtac {

struct ContactParams
{
  std::uint8_t tau_b = 35;
  double tau_g = 0.6;
  double slip_rise = 0.08;
  int slip_window = 3;
  double blur_sigma = 1.0;

  void validate() const
  {
    if (!(tau_g > 0.0 && tau_g <= 1.0)) {
      throw ConfigError("contact.tau_g must be in (0, 1]");
    }
    if (!(slip_rise > 0.0)) {
      throw ConfigError("contact.slip_rise must be > 0");
    }
    if (slip_window < 1) {
      throw ConfigError("contact.slip_window must be >= 1");
    }
    if (!(blur_sigma > 0.0)) {
      throw ConfigError("contact.blur_sigma must be > 0");
    }
  }
};

enum class ContactState { Touched, Untouched };

inline std::string_view to_string(ContactState s)
{
  return s == ContactState::Touched ? "Touched" : "Untouched";
}

struct ContactRecord
{
  std::size_t frame_index = 0;
  double s_r = 1.0;
  double s_g = 1.0;
  double s_b = 1.0;
  double s_total = 1.0;
  ContactState state = ContactState::Untouched;

  friend bool operator==(const ContactRecord&, const ContactRecord&) = default;
};

inline ContactState classify_contact_state(double s_total, const ContactParams& p)
{
  return s_total < p.tau_g ? ContactState::Touched : ContactState::Untouched;
}

/// Fraction of each channel's reference grid pixels still present in the
/// current frame's grid mask, averaged over channels.
inline ContactRecord grid_similarity(const Frame& f, const ReferenceSet& refs, const ContactParams& params,
                                     std::size_t frame_index = 0)
{
  if (f.width() != refs.width() || f.height() != refs.height()) {
    throw InvalidInput("grid_similarity: frame and references differ in size");
  }
  const auto kernel = GaussianKernel::make(params.blur_sigma);
  const auto ch = split_channels(f);
  std::array<double, 3> s{};
  for (int c = 0; c < 3; ++c) {
    const auto& ref = refs.grid_ref[c];
    const auto ref_on = ref.count();
    if (ref_on == 0) {
      throw ConfigError(std::string("grid reference channel ") + to_string(static_cast<ChannelTag>(c)) +
                        " has no grid pixels; the reference is unusable");
    }
    const auto current = binarize(gaussian_blur(ch[c], kernel), params.tau_b);
    auto a = ref.data();
    auto b = current.data();
    std::size_t both = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
      both += a[i] & b[i];
    }
    s[c] = static_cast<double>(both) / static_cast<double>(ref_on);
  }
  ContactRecord rec;
  rec.frame_index = frame_index;
  rec.s_r = s[0];
  rec.s_g = s[1];
  rec.s_b = s[2];
  rec.s_total = (s[0] + s[1] + s[2]) / 3.0;
  rec.state = classify_contact_state(rec.s_total, params);
  return rec;
}

/// Slip while holding: the newest record flipped Touched -> Untouched, or its
/// similarity rose by at least slip_rise over the minimum of the preceding
/// slip_window records.
inline bool detect_slip(std::span<const ContactRecord> history, const ContactParams& params, bool holding)
{
  if (!holding || history.size() < 2) {
    return false;
  }
  const auto& cur = history.back();
  const auto& prev = history[history.size() - 2];
  if (prev.state == ContactState::Touched && cur.state == ContactState::Untouched) {
    return true;
  }
  const std::size_t window = std::min<std::size_t>(static_cast<std::size_t>(params.slip_window), history.size() - 1);
  double lowest = prev.s_total;
  for (std::size_t k = 1; k <= window; ++k) {
    lowest = std::min(lowest, history[history.size() - 1 - k].s_total);
  }
  return cur.s_total - lowest >= params.slip_rise;
}

enum class Verdict { Idle, ObjectNear, InContact, NoiseSuppressed };

inline std::string_view to_string(Verdict v)
{
  switch (v) {
  case Verdict::Idle: return "Idle";
  case Verdict::ObjectNear: return "ObjectNear";
  case Verdict::InContact: return "InContact";
  case Verdict::NoiseSuppressed: return "NoiseSuppressed";
  }
  return "?";
}

struct FusedState
{
  ProximityRecord proximity;
  ContactRecord contact;
  Verdict verdict = Verdict::Idle;
};

/// Precedence: Noise > Touched > Approaching > Idle.
inline Verdict fuse_verdict(ProximityState p, ContactState c)
{
  if (p == ProximityState::Noise) {
    return Verdict::NoiseSuppressed;
  }
  if (c == ContactState::Touched) {
    return Verdict::InContact;
  }
  if (p == ProximityState::Approaching) {
    return Verdict::ObjectNear;
  }
  return Verdict::Idle;
}

inline FusedState fuse(const ProximityRecord& p, const ContactRecord& c)
{
  if (p.frame_index != c.frame_index) {
    throw InvalidInput("fuse: proximity frame " + std::to_string(p.frame_index) + " != contact frame " +
                       std::to_string(c.frame_index));
  }
  return {p, c, fuse_verdict(p.state, c.state)};
}

} // namespace gridtac
