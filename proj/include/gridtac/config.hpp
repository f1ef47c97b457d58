#pragma once

// Run configuration: every module's parameter block plus io paths and the
// seed, read from flat `section.key = value` text.

#include "gridtac/errors.hpp"
#include "gridtac/scenario.hpp"

#include <charconv>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <istream>
#include <map>
#include <sstream>
#include <string>

namespace gridtac {

struct RunConfig
{
  PipelineConfig pipeline;
  std::filesystem::path frames_dir;
  std::filesystem::path refs_dir;
  std::filesystem::path out_dir;

  std::uint64_t seed() const { return pipeline.render.seed; }
  void set_seed(std::uint64_t s) { pipeline.render.seed = s; }

  void validate() const { pipeline.validate(); }
};

namespace config_detail {

inline std::string trim(const std::string& s)
{
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) {
    return {};
  }
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

template <class T>
T parse_int(const std::string& v, std::size_t line, const std::string& key)
{
  T out{};
  const auto* end = v.data() + v.size();
  const auto r = std::from_chars(v.data(), end, out);
  if (r.ec != std::errc{} || r.ptr != end) {
    throw ParseError(line, key + ": expected an integer, got '" + v + "'");
  }
  return out;
}

inline double parse_real(const std::string& v, std::size_t line, const std::string& key)
{
  double out = 0.0;
  const auto* end = v.data() + v.size();
  const auto r = std::from_chars(v.data(), end, out);
  if (r.ec != std::errc{} || r.ptr != end || !std::isfinite(out)) {
    throw ParseError(line, key + ": expected a number, got '" + v + "'");
  }
  return out;
}

inline bool parse_bool(const std::string& v, std::size_t line, const std::string& key)
{
  if (v == "true" || v == "1") {
    return true;
  }
  if (v == "false" || v == "0") {
    return false;
  }
  throw ParseError(line, key + ": expected true or false, got '" + v + "'");
}

using Setter = std::function<void(RunConfig&, const std::string&, std::size_t)>;

inline const std::map<std::string, Setter>& setters()
{
  static const std::map<std::string, Setter> table = [] {
    std::map<std::string, Setter> t;
    auto real = [&t](const std::string& key, auto member) {
      t[key] = [key, member](RunConfig& c, const std::string& v, std::size_t line) {
        member(c) = parse_real(v, line, key);
      };
    };
    auto integer = [&t](const std::string& key, auto member) {
      t[key] = [key, member](RunConfig& c, const std::string& v, std::size_t line) {
        member(c) = parse_int<int>(v, line, key);
      };
    };

    integer("fusion.n_frames", [](RunConfig& c) -> int& { return c.pipeline.fusion.n_frames; });
    integer("fusion.m_backgrounds", [](RunConfig& c) -> int& { return c.pipeline.fusion.m_backgrounds; });
    t["fusion.tau_b"] = [](RunConfig& c, const std::string& v, std::size_t line) {
      const int tau = parse_int<int>(v, line, "fusion.tau_b");
      if (tau < 0 || tau > 255) {
        throw ConfigError("fusion.tau_b must be in [0, 255], got " + v);
      }
      c.pipeline.fusion.tau_b = static_cast<std::uint8_t>(tau);
      c.pipeline.contact.tau_b = static_cast<std::uint8_t>(tau);
    };
    t["fusion.blur_sigma"] = [](RunConfig& c, const std::string& v, std::size_t line) {
      c.pipeline.fusion.blur_sigma = parse_real(v, line, "fusion.blur_sigma");
      c.pipeline.contact.blur_sigma = c.pipeline.fusion.blur_sigma;
    };

    real("proximity.tau_e", [](RunConfig& c) -> double& { return c.pipeline.proximity.tau_e; });
    real("proximity.tau_c", [](RunConfig& c) -> double& { return c.pipeline.proximity.tau_c; });

    real("contact.tau_g", [](RunConfig& c) -> double& { return c.pipeline.contact.tau_g; });
    real("contact.slip_rise", [](RunConfig& c) -> double& { return c.pipeline.contact.slip_rise; });
    integer("contact.slip_window", [](RunConfig& c) -> int& { return c.pipeline.contact.slip_window; });

    integer("lattice.nx", [](RunConfig& c) -> int& { return c.pipeline.lattice.nx; });
    integer("lattice.ny", [](RunConfig& c) -> int& { return c.pipeline.lattice.ny; });
    integer("lattice.nz", [](RunConfig& c) -> int& { return c.pipeline.lattice.nz; });
    real("lattice.dx", [](RunConfig& c) -> double& { return c.pipeline.lattice.dx; });
    real("lattice.dy", [](RunConfig& c) -> double& { return c.pipeline.lattice.dy; });
    real("lattice.dz", [](RunConfig& c) -> double& { return c.pipeline.lattice.dz; });
    real("lattice.k_struct", [](RunConfig& c) -> double& { return c.pipeline.lattice.k_struct; });
    real("lattice.k_diag", [](RunConfig& c) -> double& { return c.pipeline.lattice.k_diag; });
    real("lattice.skin_thickness", [](RunConfig& c) -> double& { return c.pipeline.lattice.skin_thickness; });
    real("lattice.guard_ratio", [](RunConfig& c) -> double& { return c.pipeline.lattice.guard_ratio; });
    real("lattice.k_guard", [](RunConfig& c) -> double& { return c.pipeline.lattice.k_guard; });
    t["lattice.top_fixed"] = [](RunConfig& c, const std::string& v, std::size_t line) {
      c.pipeline.lattice.top_fixed = parse_bool(v, line, "lattice.top_fixed");
    };

    integer("render.width", [](RunConfig& c) -> int& { return c.pipeline.render.width; });
    integer("render.height", [](RunConfig& c) -> int& { return c.pipeline.render.height; });
    real("render.background_level", [](RunConfig& c) -> double& { return c.pipeline.render.background_level; });
    real("render.baseline_grid_gain", [](RunConfig& c) -> double& { return c.pipeline.render.baseline_grid_gain; });
    real("render.wall_face_gain", [](RunConfig& c) -> double& { return c.pipeline.render.wall_face_gain; });
    real("render.face_full_tilt", [](RunConfig& c) -> double& { return c.pipeline.render.face_full_tilt; });
    real("render.reflection_gain", [](RunConfig& c) -> double& { return c.pipeline.render.reflection_gain; });
    real("render.strain_dimming", [](RunConfig& c) -> double& { return c.pipeline.render.strain_dimming; });
    real("render.skin_gain", [](RunConfig& c) -> double& { return c.pipeline.render.skin_gain; });
    real("render.slope_gain", [](RunConfig& c) -> double& { return c.pipeline.render.slope_gain; });
    real("render.object_gain", [](RunConfig& c) -> double& { return c.pipeline.render.object_gain; });
    real("render.object_shininess", [](RunConfig& c) -> double& { return c.pipeline.render.object_shininess; });
    real("render.blur_per_mm", [](RunConfig& c) -> double& { return c.pipeline.render.blur_per_mm; });
    real("render.attenuation_per_mm", [](RunConfig& c) -> double& { return c.pipeline.render.attenuation_per_mm; });
    real("render.line_half_width", [](RunConfig& c) -> double& { return c.pipeline.render.line_half_width; });
    integer("render.wall_samples", [](RunConfig& c) -> int& { return c.pipeline.render.wall_samples; });
    real("render.parallax_mm", [](RunConfig& c) -> double& { return c.pipeline.render.parallax_mm; });
    real("render.ae_ceiling", [](RunConfig& c) -> double& { return c.pipeline.render.ae_ceiling; });
    real("render.noise_amplitude", [](RunConfig& c) -> double& { return c.pipeline.render.noise_amplitude; });
    real("render.noise_probability", [](RunConfig& c) -> double& { return c.pipeline.render.noise_probability; });

    integer("controller.approach_persist", [](RunConfig& c) -> int& { return c.pipeline.controller.approach_persist; });
    integer("controller.touch_persist", [](RunConfig& c) -> int& { return c.pipeline.controller.touch_persist; });
    integer("controller.release_persist", [](RunConfig& c) -> int& { return c.pipeline.controller.release_persist; });
    real("controller.close_rate", [](RunConfig& c) -> double& { return c.pipeline.controller.close_rate; });
    real("controller.mm_per_degree", [](RunConfig& c) -> double& { return c.pipeline.controller.mm_per_degree; });
    real("controller.max_angle", [](RunConfig& c) -> double& { return c.pipeline.controller.max_angle; });
    integer("controller.transport_frames", [](RunConfig& c) -> int& { return c.pipeline.controller.transport_frames; });
    real("scenario.max_press_mm", [](RunConfig& c) -> double& { return c.pipeline.max_press_mm; });

    t["run.seed"] = [](RunConfig& c, const std::string& v, std::size_t line) {
      c.set_seed(parse_int<std::uint64_t>(v, line, "run.seed"));
    };
    t["run.frames_dir"] = [](RunConfig& c, const std::string& v, std::size_t) { c.frames_dir = v; };
    t["run.refs_dir"] = [](RunConfig& c, const std::string& v, std::size_t) { c.refs_dir = v; };
    t["run.out_dir"] = [](RunConfig& c, const std::string& v, std::size_t) { c.out_dir = v; };
    return t;
  }();
  return table;
}

} // namespace config_detail

/// Reads `section.key = value` lines over the defaults. Blank lines and
/// '#' comments are skipped; unknown keys and repeated keys are errors.
/// The result is validated before it is returned.
inline RunConfig parse_config(std::istream& in, RunConfig cfg = {})
{
  const auto& table = config_detail::setters();
  std::map<std::string, std::size_t> seen;
  std::string raw;
  std::size_t line = 0;
  while (std::getline(in, raw)) {
    ++line;
    if (const auto hash = raw.find('#'); hash != std::string::npos) {
      raw.erase(hash);
    }
    const std::string text = config_detail::trim(raw);
    if (text.empty()) {
      continue;
    }
    const auto eq = text.find('=');
    if (eq == std::string::npos) {
      throw ParseError(line, "expected 'section.key = value'");
    }
    const std::string key = config_detail::trim(text.substr(0, eq));
    const std::string value = config_detail::trim(text.substr(eq + 1));
    auto it = table.find(key);
    if (it == table.end()) {
      throw ParseError(line, "unknown key '" + key + "'");
    }
    if (auto prev = seen.find(key); prev != seen.end()) {
      throw ParseError(line, key + " already set on line " + std::to_string(prev->second));
    }
    seen[key] = line;
    if (value.empty()) {
      throw ParseError(line, key + " has no value");
    }
    it->second(cfg, value, line);
  }
  cfg.validate();
  return cfg;
}

inline RunConfig parse_config(std::string_view text)
{
  std::istringstream in{std::string(text)};
  return parse_config(in);
}

inline RunConfig load_config(const std::filesystem::path& path)
{
  std::ifstream in(path);
  if (!in) {
    throw IoError("cannot open config " + path.string());
  }
  return parse_config(in);
}

} // namespace gridtac
