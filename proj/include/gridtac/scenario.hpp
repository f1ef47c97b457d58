#pragma once

// Grasp controller and the scripted-scene driver that runs it in closed
// loop against the lattice simulator and renderer.

#include "gridtac/contact.hpp"
#include "gridtac/errors.hpp"
#include "gridtac/frames.hpp"
#include "gridtac/fusion.hpp"
#include "gridtac/lattice.hpp"
#include "gridtac/optics.hpp"
#include "gridtac/proximity.hpp"
#include "gridtac/rng.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <deque>
#include <fstream>
#include <functional>
#include <istream>
#include <limits>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

namespace gridtac {

// ---------------------------------------------------------------------------
// Controller

struct ControllerParams
{
  int approach_persist = 5; // consecutive ObjectNear frames before closing
  int touch_persist = 2;    // consecutive InContact frames before holding
  int release_persist = 2;  // clear frames required before going idle again
  double close_rate = 1.0;  // degrees per frame, closing and opening
  double mm_per_degree = 0.25;
  double max_angle = 40.0;  // fully closed
  int transport_frames = 20;

  void validate() const
  {
    if (approach_persist < 1 || touch_persist < 1 || release_persist < 1) {
      throw ConfigError("controller persistence counts must be >= 1");
    }
    if (!(close_rate > 0.0) || !(mm_per_degree > 0.0) || !(max_angle > 0.0)) {
      throw ConfigError("controller.close_rate, mm_per_degree and max_angle must be > 0");
    }
    if (transport_frames < 1) {
      throw ConfigError("controller.transport_frames must be >= 1");
    }
  }
};

enum class Phase { Idle, Closing, Holding, Transporting, Returning, Releasing };
enum class Position { A, B, InTransit };

inline std::string_view to_string(Phase p)
{
  switch (p) {
  case Phase::Idle: return "Idle";
  case Phase::Closing: return "Closing";
  case Phase::Holding: return "Holding";
  case Phase::Transporting: return "Transporting";
  case Phase::Returning: return "Returning";
  case Phase::Releasing: return "Releasing";
  }
  return "?";
}

inline std::string_view to_string(Position p)
{
  switch (p) {
  case Position::A: return "A";
  case Position::B: return "B";
  case Position::InTransit: return "in-transit";
  }
  return "?";
}

struct GripperState
{
  Phase phase = Phase::Idle;
  double angle = 0.0; // degrees closed
  Position position = Position::A;
  int streak = 0;     // consecutive qualifying frames for the pending transition
  int timer = 0;      // travel frames left
  int travelled = 0;  // frames spent transporting

  bool holding() const { return phase == Phase::Holding || phase == Phase::Transporting; }

  friend bool operator==(const GripperState&, const GripperState&) = default;
};

namespace scenario_detail {

inline void check_state(const GripperState& s, const ControllerParams& p)
{
  const auto phase = static_cast<int>(s.phase);
  const auto pos = static_cast<int>(s.position);
  if (phase < 0 || phase > static_cast<int>(Phase::Releasing) || pos < 0 || pos > static_cast<int>(Position::InTransit)) {
    throw InvariantViolation("gripper state holds an unknown phase or position");
  }
  if (!(s.angle >= 0.0 && s.angle <= p.max_angle) || s.streak < 0 || s.timer < 0 || s.travelled < 0) {
    throw InvariantViolation("gripper state out of range: angle " + std::to_string(s.angle) + ", streak " +
                             std::to_string(s.streak) + ", timer " + std::to_string(s.timer));
  }
  if ((s.phase == Phase::Idle || s.phase == Phase::Closing) && s.position != Position::A) {
    throw InvariantViolation(std::string("gripper is ") + std::string(to_string(s.phase)) + " away from A");
  }
}

/// Opening, travelling home and waiting for a clear view, shared by
/// Releasing and Returning.
inline GripperState wind_down(GripperState s, Verdict v, const ControllerParams& p)
{
  if (s.phase == Phase::Returning) {
    s.angle = std::max(0.0, s.angle - p.close_rate);
    if (s.timer > 0) {
      --s.timer;
    }
    if (s.timer == 0) {
      s.position = Position::A;
    }
  } else if (s.angle > 0.0) {
    s.angle = std::max(0.0, s.angle - p.close_rate);
  } else if (s.position != Position::A) {
    s.position = Position::InTransit;
    if (s.timer > 0) {
      --s.timer;
    }
    if (s.timer == 0) {
      s.position = Position::A;
    }
  }
  if (s.position == Position::A && s.angle == 0.0) {
    s.streak = v == Verdict::InContact ? 0 : s.streak + 1;
    if (s.streak >= p.release_persist) {
      s = GripperState{};
    }
  }
  return s;
}

} // namespace scenario_detail

/// One controller tick. NoiseSuppressed (and anything but ObjectNear)
/// breaks the approach streak; only InContact builds the touch streak.
inline GripperState step(GripperState s, const FusedState& fused, bool slip, const ControllerParams& p)
{
  scenario_detail::check_state(s, p);
  const Verdict v = fused.verdict;
  switch (s.phase) {
  case Phase::Idle:
    s.streak = v == Verdict::ObjectNear ? s.streak + 1 : 0;
    if (s.streak >= p.approach_persist) {
      s.phase = Phase::Closing;
      s.streak = 0;
    }
    return s;
  case Phase::Closing:
    s.streak = v == Verdict::InContact ? s.streak + 1 : 0;
    if (s.streak >= p.touch_persist) {
      s.phase = Phase::Holding;
      s.streak = 0;
    } else if (s.angle >= p.max_angle) {
      // Closed on nothing: open again.
      s.phase = Phase::Releasing;
      s.streak = 0;
      s.timer = 0;
    } else {
      s.angle = std::min(p.max_angle, s.angle + p.close_rate);
    }
    return s;
  case Phase::Holding:
    s.phase = Phase::Transporting;
    s.position = Position::InTransit;
    s.timer = p.transport_frames;
    s.travelled = 0;
    return s;
  case Phase::Transporting:
    if (slip) {
      s.phase = Phase::Returning;
      s.timer = s.travelled;
      s.travelled = 0;
      s.streak = 0;
      if (s.timer == 0) {
        s.position = Position::A;
      }
      return s;
    }
    ++s.travelled;
    if (--s.timer == 0) {
      s.phase = Phase::Releasing;
      s.position = Position::B;
      s.timer = p.transport_frames;
      s.travelled = 0;
      s.streak = 0;
    }
    return s;
  case Phase::Returning:
  case Phase::Releasing: return scenario_detail::wind_down(s, v, p);
  }
  throw InvariantViolation("unreachable gripper phase");
}

// ---------------------------------------------------------------------------
// Scripts
//
// One event per line: `frame_start frame_end event_type key=value ...`,
// frames inclusive, '#' starts a comment.
//
//   0 0 duration frames=400
//   40 160 object id=b1 radius=6 curvature=40 tint=1,0.85,0.6 texture=3 x=0 y=0 distance=30
//   40 60 approach id=b1 from=30 to=1        # distance track, mm; negative presses
//   61 70 hold id=b1
//   71 75 press id=b1 depth=1.0              # ramps to 1.0 mm penetration
//   90 99 withdraw id=b1 rate=0.15           # slides out by rate mm per frame
//   200 212 noise boost=2000 radius=40 cx=0.4 cy=0.5 jitter=0.05

struct ObjectSpec
{
  std::string id;
  std::size_t first = 0; // lifetime, inclusive
  std::size_t last = 0;
  double radius = 6.0;     // visible cap, mm
  double curvature = 40.0; // radius of the contact indenter, mm
  std::array<double, 3> tint{1.0, 1.0, 1.0};
  std::uint64_t texture_seed = 1;
  Vec2 offset{0.0, 0.0}; // from the window centre, mm
  double distance = 30.0; // initial track value
};

enum class MotionKind { Approach, Hold, Press, Withdraw };

struct MotionEvent
{
  std::size_t object = 0;
  MotionKind kind = MotionKind::Hold;
  std::size_t start = 0;
  std::size_t end = 0;
  std::optional<double> from;
  double to = 0.0;   // approach/press target; hold level when set
  double rate = 0.0; // withdraw, mm per frame
  bool has_to = false;
  std::size_t line = 0;
};

struct ScenarioScript
{
  std::size_t duration = 0;
  std::vector<ObjectSpec> objects;
  std::vector<MotionEvent> motions;
  std::vector<NoiseEvent> noises;

  /// Per object distance track over the whole timeline (NaN outside the
  /// object's lifetime) plus the per frame withdraw rate.
  struct Track
  {
    std::vector<double> distance;
    std::vector<double> withdraw;
  };

  void validate() const
  {
    auto overlap = [](std::size_t a0, std::size_t a1, std::size_t b0, std::size_t b1) { return a0 <= b1 && b0 <= a1; };
    for (std::size_t i = 0; i < objects.size(); ++i) {
      const auto& o = objects[i];
      if (o.first > o.last || (duration > 0 && o.last >= duration) || (duration == 0)) {
        throw InvalidInput("object " + o.id + " lifetime outside the script duration");
      }
      if (!(o.radius > 0.0) || !(o.curvature > 0.0)) {
        throw InvalidInput("object " + o.id + " needs positive radius and curvature");
      }
      for (std::size_t j = 0; j < i; ++j) {
        if (overlap(o.first, o.last, objects[j].first, objects[j].last)) {
          throw InvalidInput("objects " + objects[j].id + " and " + o.id + " are in view at the same time");
        }
      }
    }
    for (std::size_t i = 0; i < motions.size(); ++i) {
      const auto& m = motions[i];
      const auto& o = objects.at(m.object);
      if (m.start > m.end || m.start < o.first || m.end > o.last) {
        throw ParseError(m.line, "event outside the lifetime of object " + o.id);
      }
      for (std::size_t j = 0; j < i; ++j) {
        if (motions[j].object == m.object && overlap(m.start, m.end, motions[j].start, motions[j].end)) {
          throw ParseError(m.line, "event overlaps an earlier event of object " + o.id);
        }
      }
    }
    for (std::size_t i = 0; i < noises.size(); ++i) {
      noises[i].validate();
      if (noises[i].end_frame >= duration) {
        throw InvalidInput("noise event ends after the script duration");
      }
      for (std::size_t j = 0; j < i; ++j) {
        if (overlap(noises[i].start_frame, noises[i].end_frame, noises[j].start_frame, noises[j].end_frame)) {
          throw InvalidInput("noise events overlap");
        }
      }
    }
  }

  Track track(std::size_t object) const
  {
    const auto& o = objects.at(object);
    Track t;
    t.distance.assign(duration, std::numeric_limits<double>::quiet_NaN());
    t.withdraw.assign(duration, 0.0);
    std::vector<const MotionEvent*> at(duration, nullptr);
    for (const auto& m : motions) {
      if (m.object == object) {
        for (std::size_t f = m.start; f <= m.end; ++f) {
          at[f] = &m;
        }
      }
    }
    double v = o.distance;
    double from = v;
    const MotionEvent* current = nullptr;
    for (std::size_t f = o.first; f <= o.last; ++f) {
      const MotionEvent* m = at[f];
      if (m != current) {
        from = m != nullptr && m->from ? *m->from : v;
        current = m;
      }
      if (m != nullptr) {
        const double frac = static_cast<double>(f - m->start + 1) / static_cast<double>(m->end - m->start + 1);
        switch (m->kind) {
        case MotionKind::Approach:
        case MotionKind::Press: v = from + (m->to - from) * frac; break;
        case MotionKind::Hold: v = m->has_to ? m->to : from; break;
        case MotionKind::Withdraw:
          v += m->rate;
          t.withdraw[f] = m->rate;
          break;
        }
      }
      t.distance[f] = v;
    }
    return t;
  }
};

namespace scenario_detail {

inline double parse_number(std::string_view s, std::size_t line, std::string_view key)
{
  double v = 0.0;
  const auto* end = s.data() + s.size();
  const auto r = std::from_chars(s.data(), end, v);
  if (r.ec != std::errc{} || r.ptr != end || !std::isfinite(v)) {
    throw ParseError(line, "bad number for " + std::string(key) + ": '" + std::string(s) + "'");
  }
  return v;
}

inline std::size_t parse_count(std::string_view s, std::size_t line, std::string_view what)
{
  std::size_t v = 0;
  const auto* end = s.data() + s.size();
  const auto r = std::from_chars(s.data(), end, v);
  if (r.ec != std::errc{} || r.ptr != end) {
    throw ParseError(line, "bad " + std::string(what) + ": '" + std::string(s) + "'");
  }
  return v;
}

class KeyValues
{
public:
  KeyValues(std::vector<std::string> tokens, std::size_t line) : line_(line)
  {
    for (auto& t : tokens) {
      const auto eq = t.find('=');
      if (eq == std::string::npos || eq == 0) {
        throw ParseError(line, "expected key=value, got '" + t + "'");
      }
      auto key = t.substr(0, eq);
      if (kv_.count(key) != 0) {
        throw ParseError(line, "duplicate key " + key);
      }
      kv_[key] = t.substr(eq + 1);
    }
  }

  bool has(const std::string& k) const { return kv_.count(k) != 0; }

  std::string text(const std::string& k)
  {
    auto it = kv_.find(k);
    if (it == kv_.end()) {
      throw ParseError(line_, "missing " + k + "=");
    }
    used_.push_back(k);
    return it->second;
  }

  double number(const std::string& k) { return parse_number(text(k), line_, k); }

  double number(const std::string& k, double fallback) { return has(k) ? number(k) : fallback; }

  std::vector<double> numbers(const std::string& k)
  {
    std::vector<double> out;
    std::string s = text(k);
    std::size_t pos = 0;
    while (true) {
      const auto comma = s.find(',', pos);
      out.push_back(parse_number(std::string_view(s).substr(pos, comma - pos), line_, k));
      if (comma == std::string::npos) {
        break;
      }
      pos = comma + 1;
    }
    return out;
  }

  void done() const
  {
    for (const auto& [k, v] : kv_) {
      if (std::find(used_.begin(), used_.end(), k) == used_.end()) {
        throw ParseError(line_, "unknown key " + k);
      }
    }
  }

private:
  std::size_t line_;
  std::map<std::string, std::string> kv_;
  std::vector<std::string> used_;
};

} // namespace scenario_detail

inline ScenarioScript parse_script(std::istream& in)
{
  using scenario_detail::KeyValues;
  ScenarioScript script;
  std::optional<std::size_t> declared;
  std::size_t max_end = 0;
  bool any = false;
  std::map<std::string, std::size_t> ids;
  std::string raw;
  std::size_t line = 0;
  while (std::getline(in, raw)) {
    ++line;
    if (const auto hash = raw.find('#'); hash != std::string::npos) {
      raw.erase(hash);
    }
    std::istringstream ls(raw);
    std::vector<std::string> tok;
    for (std::string t; ls >> t;) {
      tok.push_back(t);
    }
    if (tok.empty()) {
      continue;
    }
    if (tok.size() < 3) {
      throw ParseError(line, "expected 'frame_start frame_end event_type key=value ...'");
    }
    const std::size_t s = scenario_detail::parse_count(tok[0], line, "frame_start");
    const std::size_t e = scenario_detail::parse_count(tok[1], line, "frame_end");
    if (s > e) {
      throw ParseError(line, "frame_start exceeds frame_end");
    }
    const std::string type = tok[2];
    KeyValues kv(std::vector<std::string>(tok.begin() + 3, tok.end()), line);

    if (type == "duration") {
      if (declared) {
        throw ParseError(line, "duration given twice");
      }
      declared = scenario_detail::parse_count(kv.text("frames"), line, "frames");
    } else if (type == "object") {
      ObjectSpec o;
      o.id = kv.text("id");
      if (ids.count(o.id) != 0) {
        throw ParseError(line, "object " + o.id + " defined twice");
      }
      o.first = s;
      o.last = e;
      o.radius = kv.number("radius", o.radius);
      o.curvature = kv.number("curvature", o.curvature);
      o.distance = kv.number("distance", o.distance);
      o.offset = Vec2(kv.number("x", 0.0), kv.number("y", 0.0));
      if (kv.has("texture")) {
        o.texture_seed = scenario_detail::parse_count(kv.text("texture"), line, "texture");
      }
      if (kv.has("tint")) {
        const auto t = kv.numbers("tint");
        if (t.size() != 3) {
          throw ParseError(line, "tint needs three comma-separated values");
        }
        o.tint = {t[0], t[1], t[2]};
      }
      if (!(o.radius > 0.0) || !(o.curvature > 0.0)) {
        throw ParseError(line, "object radius and curvature must be > 0");
      }
      ids[o.id] = script.objects.size();
      script.objects.push_back(o);
    } else if (type == "approach" || type == "hold" || type == "press" || type == "withdraw") {
      MotionEvent m;
      m.line = line;
      m.start = s;
      m.end = e;
      const auto id = kv.text("id");
      auto it = ids.find(id);
      if (it == ids.end()) {
        throw ParseError(line, "unknown object " + id);
      }
      m.object = it->second;
      if (type == "approach") {
        m.kind = MotionKind::Approach;
        if (kv.has("from")) {
          m.from = kv.number("from");
        }
        m.to = kv.number("to");
        m.has_to = true;
      } else if (type == "hold") {
        m.kind = MotionKind::Hold;
        if (kv.has("at")) {
          m.to = kv.number("at");
          m.has_to = true;
        }
      } else if (type == "press") {
        m.kind = MotionKind::Press;
        const double depth = kv.number("depth");
        if (!(depth >= 0.0)) {
          throw ParseError(line, "press depth must be >= 0");
        }
        m.to = -depth;
        m.has_to = true;
      } else {
        m.kind = MotionKind::Withdraw;
        m.rate = kv.number("rate");
        if (!(m.rate > 0.0)) {
          throw ParseError(line, "withdraw rate must be > 0");
        }
      }
      script.motions.push_back(m);
    } else if (type == "noise") {
      NoiseEvent n;
      n.start_frame = s;
      n.end_frame = e;
      n.boost = kv.number("boost");
      n.jitter = kv.number("jitter", n.jitter);
      n.beam_radius = kv.number("radius", 0.0);
      n.beam_center = Vec2(kv.number("cx", 0.5), kv.number("cy", 0.5));
      if (!(n.boost >= 0.0) || !(n.jitter >= 0.0 && n.jitter <= 1.0)) {
        throw ParseError(line, "noise needs boost >= 0 and jitter in [0, 1]");
      }
      script.noises.push_back(n);
    } else {
      throw ParseError(line, "unknown event type '" + type + "'");
    }
    kv.done();
    if (type != "duration") {
      max_end = std::max(max_end, e);
      any = true;
    }
  }
  script.duration = declared ? *declared : (any ? max_end + 1 : 0);
  if (declared && any && max_end >= *declared) {
    throw ParseError(line, "events run past duration " + std::to_string(*declared));
  }
  script.validate();
  return script;
}

inline ScenarioScript parse_script(std::string_view text)
{
  std::istringstream in{std::string(text)};
  return parse_script(in);
}

inline ScenarioScript load_script(const std::filesystem::path& path)
{
  std::ifstream in(path);
  if (!in) {
    throw IoError("cannot open script " + path.string());
  }
  return parse_script(in);
}

// ---------------------------------------------------------------------------
// Runner

struct PipelineConfig
{
  FusionParams fusion;
  ProximityParams proximity;
  ContactParams contact;
  LatticeConfig lattice;
  RenderConfig render;
  ControllerParams controller;
  double max_press_mm = 1.25; // the finger cannot push an object deeper than this

  void validate() const
  {
    fusion.validate();
    proximity.validate();
    contact.validate();
    lattice.validate();
    render.validate();
    controller.validate();
    if (!(max_press_mm > 0.0 && max_press_mm < lattice.depth_mm())) {
      throw ConfigError("scenario.max_press_mm must be in (0, lattice depth)");
    }
  }
};

struct FrameRecord
{
  std::size_t frame_index = 0;
  FusedState fused;
  double score = 0.0;
  bool slip = false;
  GripperState state; // after this frame's controller step
  bool object_present = false;
  double object_distance = 0.0; // mm above the surface
  double press_depth = 0.0;     // mm of penetration
  bool noise_active = false;
};

struct AttemptRecord
{
  std::size_t start_frame = 0;      // Idle -> Closing
  std::optional<std::size_t> first_approaching;
  std::optional<std::size_t> first_touched;
  bool noise_triggered = false;
  enum class Outcome { Pending, Delivered, Slipped, Missed } outcome = Outcome::Pending;

  std::optional<long> lead() const
  {
    if (!first_approaching || !first_touched) {
      return std::nullopt;
    }
    return static_cast<long>(*first_touched) - static_cast<long>(*first_approaching);
  }
};

inline std::string_view to_string(AttemptRecord::Outcome o)
{
  switch (o) {
  case AttemptRecord::Outcome::Pending: return "pending";
  case AttemptRecord::Outcome::Delivered: return "delivered";
  case AttemptRecord::Outcome::Slipped: return "slipped";
  case AttemptRecord::Outcome::Missed: return "missed";
  }
  return "?";
}

struct ScenarioSummary
{
  std::size_t frames = 0;
  std::size_t attempts = 0;
  std::size_t successes = 0;
  std::size_t slips = 0;
  std::size_t misses = 0;
  std::size_t noise_frames = 0;            // frames with a flash in view
  std::size_t noise_frames_suppressed = 0; // of those, fused as NoiseSuppressed
  std::size_t noise_triggered_grasps = 0;
  std::size_t solves = 0;
};

struct ScenarioReport
{
  bool closed_loop = true;
  std::vector<FrameRecord> frames; // one per frame after the reference preamble
  std::vector<AttemptRecord> attempts;
  ScenarioSummary summary;
  std::optional<ReferenceSet> references;
};

struct RunOptions
{
  bool closed_loop = true;
  std::size_t solve_cache = 256;
  std::function<void(std::size_t, const Frame&)> on_frame; // every rendered frame, in order
};

/// Random albedo pattern standing in for an object's surface texture.
inline ChannelPlane object_texture(std::uint64_t seed)
{
  ChannelPlane t(16, 16, ChannelTag::gray, 0);
  Rng r(mix_seed(seed, 0x7e47u));
  for (auto& v : t.data()) {
    v = static_cast<std::uint8_t>(128 + r.below(128));
  }
  return t;
}

namespace scenario_detail {

/// Solved fields keyed by object and quantized penetration. Each new solve
/// warm-starts from the previously solved field of the same object.
class SolveCache
{
public:
  SolveCache(const Lattice& lat, std::size_t capacity) : lat_(&lat), capacity_(std::max<std::size_t>(capacity, 1)) {}

  const DeformationField& get(std::size_t object, const Indenter& ind)
  {
    const Key key{object, std::llround(ind.depth * 1e6)};
    if (auto it = cache_.find(key); it != cache_.end()) {
      return it->second;
    }
    const DeformationField* warm = nullptr;
    if (last_ && last_->first == object) {
      if (auto it = cache_.find(*last_); it != cache_.end()) {
        warm = &it->second;
      }
    }
    auto field = solve_static(*lat_, ind, SolverOptions{}, warm);
    ++solves_;
    if (cache_.size() >= capacity_) {
      const Key drop = order_.front();
      order_.pop_front();
      cache_.erase(drop);
      if (last_ && *last_ == drop) {
        last_.reset();
      }
    }
    order_.push_back(key);
    last_ = key;
    return cache_.emplace(key, std::move(field)).first->second;
  }

  std::size_t solves() const { return solves_; }

private:
  using Key = std::pair<std::size_t, long long>;
  const Lattice* lat_;
  std::size_t capacity_;
  std::map<Key, DeformationField> cache_;
  std::deque<Key> order_;
  std::optional<Key> last_;
  std::size_t solves_ = 0;
};

enum class Hold { Free, Attached, Dropping, Gone };

} // namespace scenario_detail

/// Runs the script frame by frame: solve (when pressed) -> render ->
/// proximity -> contact -> fuse/slip -> controller. The first
/// fusion.n_frames frames are rendered empty and become the references.
/// Open loop skips the controller and puts objects exactly on their track.
inline ScenarioReport run_scenario(const ScenarioScript& script, const PipelineConfig& cfg, const RunOptions& opt = {})
{
  using scenario_detail::Hold;
  cfg.validate();
  script.validate();
  const std::size_t n_ref = static_cast<std::size_t>(cfg.fusion.n_frames);
  ScenarioReport report;
  report.closed_loop = opt.closed_loop;
  report.summary.frames = script.duration;
  if (script.duration == 0) {
    return report;
  }
  if (script.duration < n_ref) {
    throw InvalidInput("script is shorter than the " + std::to_string(n_ref) + "-frame reference preamble");
  }
  for (const auto& o : script.objects) {
    if (o.first < n_ref) {
      throw InvalidInput("object " + o.id + " appears inside the reference preamble");
    }
  }
  for (const auto& n : script.noises) {
    if (n.start_frame < n_ref) {
      throw InvalidInput("noise event inside the reference preamble");
    }
  }

  const Lattice lat = build_lattice(cfg.lattice);
  const Renderer renderer(lat, LightRig::standard(), cfg.render);
  scenario_detail::SolveCache cache(lat, opt.solve_cache);
  ContactParams cp = cfg.contact;
  cp.tau_b = cfg.fusion.tau_b;
  cp.blur_sigma = cfg.fusion.blur_sigma;

  std::vector<ScenarioScript::Track> tracks;
  std::vector<SceneObject> scene_objects;
  for (std::size_t i = 0; i < script.objects.size(); ++i) {
    const auto& o = script.objects[i];
    tracks.push_back(script.track(i));
    SceneObject so;
    so.texture = object_texture(o.texture_seed);
    so.tint = o.tint;
    so.radius = o.radius;
    so.lateral_offset = o.offset;
    scene_objects.push_back(std::move(so));
  }
  std::vector<Hold> hold(script.objects.size(), Hold::Free);
  double attached_offset = 0.0;

  GripperState state;
  std::vector<ContactRecord> slip_history;
  std::deque<bool> clean_window; // per frame: object present and no flash
  std::optional<std::size_t> first_approaching;
  std::vector<Frame> preamble;

  for (std::size_t t = 0; t < script.duration; ++t) {
    const NoiseEvent* noise = nullptr;
    for (const auto& n : script.noises) {
      if (n.active(t)) {
        noise = &n;
      }
    }
    std::optional<std::size_t> obj;
    double effective = 0.0;
    for (std::size_t i = 0; i < script.objects.size(); ++i) {
      const auto& o = script.objects[i];
      if (t < o.first || t > o.last || hold[i] == Hold::Gone) {
        continue;
      }
      const auto& tr = tracks[i];
      if (hold[i] == Hold::Attached || hold[i] == Hold::Dropping) {
        if (tr.withdraw[t] > 0.0) {
          attached_offset += tr.withdraw[t];
        } else if (hold[i] == Hold::Dropping) {
          hold[i] = Hold::Gone;
          continue;
        }
        effective = attached_offset;
      } else {
        effective = tr.distance[t] - (opt.closed_loop ? state.angle * cfg.controller.mm_per_degree : 0.0);
      }
      obj = i;
    }

    FrameRecord rec;
    rec.frame_index = t;
    rec.noise_active = noise != nullptr;
    SceneState scene;
    scene.frame_seed = t;
    scene.noise = noise;
    SceneObject shown;
    Indenter ind;
    std::vector<double> strain;
    if (obj) {
      const auto& o = script.objects[*obj];
      rec.object_present = true;
      rec.object_distance = std::max(0.0, effective);
      rec.press_depth = std::min(cfg.max_press_mm, std::max(0.0, -effective));
      shown = scene_objects[*obj];
      shown.distance = rec.object_distance;
      scene.object = &shown;
      if (rec.press_depth > 0.0) {
        ind.shape = IndenterShape::Sphere;
        ind.radius = o.curvature;
        ind.center = Vec2(0.5 * lat.cfg.width_mm(), 0.5 * lat.cfg.height_mm()) + o.offset;
        ind.depth = rec.press_depth;
        try {
          const auto& field = cache.get(*obj, ind);
          strain = cell_strain(lat, field);
          scene.field = &field;
          scene.strain = strain;
          scene.indenter = &ind;
        } catch (const SolverError& e) {
          throw SolverError("frame " + std::to_string(t) + ", object " + o.id + " at depth " +
                              std::to_string(rec.press_depth) + " mm: " + e.what(),
                            e.best_residual());
        }
      }
    }

    const Frame frame = renderer.render(scene);
    if (opt.on_frame) {
      opt.on_frame(t, frame);
    }
    if (t < n_ref) {
      preamble.push_back(frame);
      if (t + 1 == n_ref) {
        report.references = build_references(preamble, cfg.fusion);
        preamble.clear();
      }
      continue;
    }
    const auto& refs = *report.references;

    const auto prox = classify_proximity(frame, refs, cfg.proximity, t);
    const auto cont = grid_similarity(frame, refs, cp, t);
    rec.fused = fuse(prox, cont);
    rec.score = proximity_score(prox, cfg.proximity);
    if (rec.noise_active) {
      ++report.summary.noise_frames;
      if (rec.fused.verdict == Verdict::NoiseSuppressed) {
        ++report.summary.noise_frames_suppressed;
      }
    }

    if (opt.closed_loop) {
      const bool holding = state.holding();
      if (!holding) {
        slip_history.clear();
      } else if (rec.fused.verdict != Verdict::NoiseSuppressed) {
        slip_history.push_back(cont);
        rec.slip = detect_slip(slip_history, cp, true);
      }

      if (state.phase == Phase::Idle && !first_approaching && prox.state == ProximityState::Approaching) {
        first_approaching = t;
      }
      clean_window.push_back(rec.object_present && !rec.noise_active);
      if (clean_window.size() > static_cast<std::size_t>(cfg.controller.approach_persist)) {
        clean_window.pop_front();
      }

      const GripperState before = state;
      state = step(state, rec.fused, rec.slip, cfg.controller);

      if (!report.attempts.empty() && !report.attempts.back().first_touched &&
          report.attempts.back().outcome == AttemptRecord::Outcome::Pending &&
          cont.state == ContactState::Touched && rec.fused.verdict != Verdict::NoiseSuppressed) {
        report.attempts.back().first_touched = t;
      }
      if (before.phase == Phase::Idle && state.phase == Phase::Closing) {
        AttemptRecord a;
        a.start_frame = t;
        a.first_approaching = first_approaching;
        a.noise_triggered = std::find(clean_window.begin(), clean_window.end(), false) != clean_window.end();
        report.attempts.push_back(a);
        ++report.summary.attempts;
        if (a.noise_triggered) {
          ++report.summary.noise_triggered_grasps;
        }
      }
      if (before.phase == Phase::Closing && state.phase == Phase::Holding && obj) {
        hold[*obj] = Hold::Attached;
        attached_offset = effective;
      }
      if (before.phase == Phase::Closing && state.phase == Phase::Releasing) {
        ++report.summary.misses;
        report.attempts.back().outcome = AttemptRecord::Outcome::Missed;
      }
      if (before.phase == Phase::Transporting && state.phase == Phase::Returning) {
        ++report.summary.slips;
        report.attempts.back().outcome = AttemptRecord::Outcome::Slipped;
        for (auto& h : hold) {
          if (h == Hold::Attached) {
            h = Hold::Dropping;
          }
        }
      }
      if (before.phase == Phase::Transporting && state.phase == Phase::Releasing) {
        ++report.summary.successes;
        report.attempts.back().outcome = AttemptRecord::Outcome::Delivered;
        for (auto& h : hold) {
          if (h == Hold::Attached || h == Hold::Dropping) {
            h = Hold::Gone;
          }
        }
      }
      if (state.phase == Phase::Idle && before.phase != Phase::Idle) {
        first_approaching.reset();
      }
      if (state.phase == Phase::Idle && prox.state != ProximityState::Approaching && !rec.object_present) {
        first_approaching.reset();
      }
    }
    rec.state = state;
    report.frames.push_back(rec);
  }
  report.summary.solves = cache.solves();
  return report;
}

// ---------------------------------------------------------------------------
// Report output. Column order is fixed.

constexpr std::string_view kDetectionHeader = "frame_index,e_total,c_rg,c_rb,c_gb,c_total,proximity_state,score,"
                                              "s_r,s_g,s_b,s_total,contact_state,fused_verdict,slip_flag";
constexpr std::string_view kTimelineHeader =
  "frame_index,phase,angle,position,object_present,object_distance,press_depth,noise_active";

namespace scenario_detail {

inline std::string fixed(double v)
{
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

} // namespace scenario_detail

inline std::string detection_row(const FusedState& f, double score, bool slip)
{
  using scenario_detail::fixed;
  const auto& p = f.proximity;
  const auto& c = f.contact;
  std::string row = std::to_string(p.frame_index);
  for (double v : {p.e_total, p.c_rg, p.c_rb, p.c_gb, p.c_total}) {
    row += ',' + fixed(v);
  }
  row += ',' + std::string(to_string(p.state)) + ',' + fixed(score);
  for (double v : {c.s_r, c.s_g, c.s_b, c.s_total}) {
    row += ',' + fixed(v);
  }
  row += ',' + std::string(to_string(c.state)) + ',' + std::string(to_string(f.verdict)) + ',' + (slip ? "1" : "0");
  return row;
}

inline void write_detections(std::ostream& os, const ScenarioReport& r)
{
  os << kDetectionHeader << '\n';
  for (const auto& f : r.frames) {
    os << detection_row(f.fused, f.score, f.slip) << '\n';
  }
}

inline void write_timeline(std::ostream& os, const ScenarioReport& r)
{
  using scenario_detail::fixed;
  os << kTimelineHeader << '\n';
  for (const auto& f : r.frames) {
    os << f.frame_index << ',' << to_string(f.state.phase) << ',' << fixed(f.state.angle) << ','
       << to_string(f.state.position) << ',' << (f.object_present ? 1 : 0) << ',' << fixed(f.object_distance) << ','
       << fixed(f.press_depth) << ',' << (f.noise_active ? 1 : 0) << '\n';
  }
}

inline void write_summary(std::ostream& os, const ScenarioReport& r)
{
  const auto& s = r.summary;
  os << "closed_loop=" << (r.closed_loop ? 1 : 0) << '\n'
     << "frames=" << s.frames << '\n'
     << "grasp_attempts=" << s.attempts << '\n'
     << "successes=" << s.successes << '\n'
     << "slips=" << s.slips << '\n'
     << "misses=" << s.misses << '\n'
     << "noise_frames=" << s.noise_frames << '\n'
     << "noise_frames_suppressed=" << s.noise_frames_suppressed << '\n'
     << "noise_triggered_grasps=" << s.noise_triggered_grasps << '\n'
     << "lattice_solves=" << s.solves << '\n';
  for (std::size_t i = 0; i < r.attempts.size(); ++i) {
    const auto& a = r.attempts[i];
    const std::string k = "attempt_" + std::to_string(i + 1) + ".";
    os << k << "start_frame=" << a.start_frame << '\n' << k << "outcome=" << to_string(a.outcome) << '\n';
    if (const auto lead = a.lead()) {
      os << k << "proximity_lead=" << *lead << '\n';
    }
  }
}

// ---------------------------------------------------------------------------
// Assembly monitoring

struct AssemblyParams
{
  double band = 0.02;   // drop below the grip baseline that flags a misalignment
  int baseline_window = 5;
  SsimParams ssim;

  void validate() const
  {
    if (!(band > 0.0) || baseline_window < 1) {
      throw ConfigError("assembly monitor needs band > 0 and baseline_window >= 1");
    }
  }
};

struct AssemblyEvent
{
  enum class Kind { Misalignment, Recovered } kind = Kind::Misalignment;
  std::size_t frame = 0;
  double ssim = 0.0;
  double baseline = 0.0;
};

struct AssemblyTrace
{
  std::vector<double> ssim;
  std::vector<AssemblyEvent> events;
};

/// SSIM of each frame against the open-gripper reference. The grip
/// baseline is the rolling mean of the last baseline_window frames that
/// were not misaligned; a drop of more than `band` below it opens a
/// misalignment, climbing back within the band closes it.
inline AssemblyTrace assembly_monitor(std::span<const Frame> frames, const Frame& reference, const AssemblyParams& p = {})
{
  p.validate();
  AssemblyTrace out;
  const auto ref = to_gray(reference);
  std::deque<double> window;
  bool misaligned = false;
  for (std::size_t i = 0; i < frames.size(); ++i) {
    const double s = ssim(to_gray(frames[i]), ref, p.ssim);
    out.ssim.push_back(s);
    const bool ready = window.size() == static_cast<std::size_t>(p.baseline_window);
    double baseline = 0.0;
    for (double v : window) {
      baseline += v;
    }
    baseline = window.empty() ? s : baseline / static_cast<double>(window.size());
    if (ready && !misaligned && s < baseline - p.band) {
      misaligned = true;
      out.events.push_back({AssemblyEvent::Kind::Misalignment, i, s, baseline});
    } else if (misaligned && s >= baseline - p.band) {
      misaligned = false;
      out.events.push_back({AssemblyEvent::Kind::Recovered, i, s, baseline});
    }
    if (!misaligned) {
      window.push_back(s);
      if (window.size() > static_cast<std::size_t>(p.baseline_window)) {
        window.pop_front();
      }
    }
  }
  return out;
}

} // namespace gridtac
