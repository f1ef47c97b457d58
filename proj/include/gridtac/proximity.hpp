#pragma once

// Proximity classification from background-filtered channel entropy and
// inter-channel correlation.

#include "gridtac/errors.hpp"
#include "gridtac/frames.hpp"
#include "gridtac/fusion.hpp"

#include <algorithm>
#include <cstddef>
#include <string_view>

namespace gridtac {

struct ProximityParams
{
  double tau_e = 0.5; // bits
  double tau_c = 0.2;

  void validate() const
  {
    if (!(tau_e >= 0.0)) {
      throw ConfigError("proximity.tau_e must be >= 0");
    }
    if (!(tau_c >= -1.0 && tau_c <= 1.0)) {
      throw ConfigError("proximity.tau_c must be in [-1, 1]");
    }
  }
};

enum class ProximityState { Normal, Approaching, Noise };

inline std::string_view to_string(ProximityState s)
{
  switch (s) {
  case ProximityState::Normal: return "Normal";
  case ProximityState::Approaching: return "Approaching";
  case ProximityState::Noise: return "Noise";
  }
  return "?";
}

struct ProximityRecord
{
  std::size_t frame_index = 0;
  double e_total = 0.0;
  double c_rg = 0.0;
  double c_rb = 0.0;
  double c_gb = 0.0;
  double c_total = 0.0;
  ProximityState state = ProximityState::Normal;

  friend bool operator==(const ProximityRecord&, const ProximityRecord&) = default;
};

struct FilteredFrame
{
  Channels filtered;  // per-channel result of the cumulative intersection
  Frame intersection; // filtered channels merged
};

/// Subtract every background reference (clamped at 0) and fold the results
/// with a per-pixel minimum, starting from the all-255 plane.
inline FilteredFrame filter_background(const Frame& f, const ReferenceSet& refs)
{
  if (f.width() != refs.width() || f.height() != refs.height()) {
    throw InvalidInput("filter_background: frame is " + std::to_string(f.width()) + "x" +
                       std::to_string(f.height()) + ", references are " + std::to_string(refs.width()) + "x" +
                       std::to_string(refs.height()));
  }
  const int w = f.width();
  const int h = f.height();
  FilteredFrame out{{ChannelPlane(w, h, ChannelTag::r, 255), ChannelPlane(w, h, ChannelTag::g, 255),
                     ChannelPlane(w, h, ChannelTag::b, 255)},
                    Frame{}};
  auto src = f.data();
  std::array<std::span<std::uint8_t>, 3> dst{out.filtered[0].data(), out.filtered[1].data(),
                                            out.filtered[2].data()};
  const std::size_t n = f.pixel_count();
  for (const auto& bg : refs.background_planes) {
    for (int c = 0; c < 3; ++c) {
      auto b = bg[c].data();
      auto d = dst[c];
      for (std::size_t i = 0; i < n; ++i) {
        const std::uint8_t v = src[3 * i + c];
        const std::uint8_t delta = v > b[i] ? static_cast<std::uint8_t>(v - b[i]) : 0;
        d[i] = std::min(d[i], delta);
      }
    }
  }
  out.intersection = merge_channels(out.filtered);
  return out;
}

/// The three-way decision table: Normal below tau_e, else Approaching when
/// correlation is below tau_c, else Noise.
inline ProximityState classify_proximity_state(double e_total, double c_total, const ProximityParams& p)
{
  if (e_total < p.tau_e) {
    return ProximityState::Normal;
  }
  if (c_total < p.tau_c) {
    return ProximityState::Approaching;
  }
  return ProximityState::Noise;
}

inline ProximityRecord classify_proximity(const FilteredFrame& ff, const ProximityParams& params,
                                          std::size_t frame_index = 0)
{
  ProximityRecord rec;
  rec.frame_index = frame_index;
  rec.e_total = entropy(to_gray(ff.intersection));
  rec.c_rg = correlation(ff.filtered[0], ff.filtered[1]);
  rec.c_rb = correlation(ff.filtered[0], ff.filtered[2]);
  rec.c_gb = correlation(ff.filtered[1], ff.filtered[2]);
  rec.c_total = (rec.c_rg + rec.c_rb + rec.c_gb) / 3.0;
  rec.state = classify_proximity_state(rec.e_total, rec.c_total, params);
  return rec;
}

inline ProximityRecord classify_proximity(const Frame& f, const ReferenceSet& refs, const ProximityParams& params,
                                          std::size_t frame_index = 0)
{
  return classify_proximity(filter_background(f, refs), params, frame_index);
}

/// Continuous approach score in [0, 1] built from how far entropy sits
/// above its threshold and correlation below its own. Zero unless the
/// record is Approaching.
inline double proximity_score(const ProximityRecord& rec, const ProximityParams& params)
{
  if (rec.state != ProximityState::Approaching) {
    return 0.0;
  }
  auto margin = [](double excess, double scale) {
    const double s = std::abs(scale);
    return s > 0.0 ? std::min(1.0, excess / s) : 1.0;
  };
  const double e_part = margin(rec.e_total - params.tau_e, params.tau_e);
  const double c_part = margin(params.tau_c - rec.c_total, params.tau_c);
  return std::clamp(0.5 * e_part + 0.5 * c_part, 0.0, 1.0);
}

} // namespace gridtac
