#pragma once

// Phenomenological renderer for the grid sensor.
//
// A frame is the sum of:
//   - the grid image: cell walls seen from the camera side, drawn from the
//     (possibly deformed) lattice geometry, lit per channel by the light rig;
//   - strain brightening: per-cell strain splatted onto the pixel raster;
//   - a skin term over the contact footprint for light touches;
//   - the transmitted image of an object above the surface, blurred and
//     attenuated with distance and shaded separately by each light;
//   - a flash (light noise), white and common to all channels;
// followed by an auto-exposure ceiling on the mean, sparse sensor noise and
// 8-bit quantization.

#include "gridtac/errors.hpp"
#include "gridtac/frames.hpp"
#include "gridtac/lattice.hpp"
#include "gridtac/rng.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

namespace gridtac {

struct Light
{
  double azimuth_deg = 0.0;
  std::array<double, 3> weights{1.0, 0.0, 0.0}; // r, g, b
  double intensity = 1.0;
};

struct LightRig
{
  std::vector<Light> lights;
  double elevation_deg = 20.0; // side lights sit low over the surface

  /// Three side lights 120 degrees apart, one per channel.
  static LightRig standard()
  {
    LightRig rig;
    rig.lights = {{0.0, {1.0, 0.0, 0.0}, 1.0}, {120.0, {0.0, 1.0, 0.0}, 1.0}, {240.0, {0.0, 0.0, 1.0}, 1.0}};
    return rig;
  }

  void validate() const
  {
    if (lights.empty()) {
      throw ConfigError("light rig needs at least one light");
    }
    for (const auto& l : lights) {
      for (double w : l.weights) {
        if (!(w >= 0.0 && w <= 1.0)) {
          throw ConfigError("light channel weights must be in [0, 1]");
        }
      }
      if (!(l.intensity >= 0.0)) {
        throw ConfigError("light intensity must be >= 0");
      }
    }
    if (!(elevation_deg > 0.0 && elevation_deg < 90.0)) {
      throw ConfigError("light elevation must be in (0, 90) degrees");
    }
  }
};

struct SceneObject
{
  ChannelPlane texture{1, 1, ChannelTag::gray, 255}; // albedo, 255 = 1
  std::array<double, 3> tint{1.0, 1.0, 1.0};
  double distance = 0.0;       // mm above the sensor surface
  Vec2 lateral_offset{0, 0};   // mm from the window centre
  double radius = 3.0;         // mm, visible cap of the object

  void validate() const
  {
    if (!(distance >= 0.0)) {
      throw InvalidInput("object distance must be >= 0");
    }
    if (!(radius > 0.0)) {
      throw InvalidInput("object radius must be > 0");
    }
    for (double t : tint) {
      if (!(t >= 0.0)) {
        throw InvalidInput("object tint must be >= 0");
      }
    }
  }
};

/// A flash of external white light. `boost` is the peak intensity added to
/// every channel; the beam falls off as a Gaussian of `beam_radius` pixels
/// around `beam_center` (fractions of width/height). A non-positive
/// beam_radius lights the frame uniformly. `jitter` is the relative
/// per-pixel flicker, shared by all channels.
struct NoiseEvent
{
  std::size_t start_frame = 0;
  std::size_t end_frame = 0;
  double boost = 0.0;
  double jitter = 0.05;
  Vec2 beam_center{0.5, 0.5};
  double beam_radius = 0.0;

  void validate() const
  {
    if (start_frame > end_frame) {
      throw InvalidInput("noise event start must not exceed its end");
    }
    if (!(boost >= 0.0)) {
      throw InvalidInput("noise boost must be >= 0");
    }
    if (!(jitter >= 0.0 && jitter <= 1.0)) {
      throw InvalidInput("noise jitter must be in [0, 1]");
    }
  }

  bool active(std::size_t frame) const { return frame >= start_frame && frame <= end_frame; }
};

struct RenderConfig
{
  int width = 320;
  int height = 240;
  double background_level = 15.0;     // diffuse interior glow
  double baseline_grid_gain = 70.0;   // peak of an undeformed grid line
  double wall_face_gain = 150.0;      // tilted wall faces catching side light
  double face_full_tilt = 2.0;        // pixels of tilt for full face brightness
  double reflection_gain = 40.0;      // per unit cell strain
  double strain_dimming = 10.0;       // grid line loss per unit cell strain
  double skin_gain = 12.0;            // light-touch footprint brightening
  double slope_gain = 500.0;          // pressed-surface slope facing a light
  double object_gain = 150.0;         // transmitted object peak at contact
  double object_shininess = 4.0;      // exponent sharpening the lit crescents
  double blur_per_mm = 0.8;           // object blur sigma, pixels per mm
  double attenuation_per_mm = 0.78;   // transmission factor per mm
  double line_half_width = 1.5;       // pixels
  int wall_samples = 4;               // samples across each wall layer
  double parallax_mm = 12.0;          // camera distance to the fixed layer
  double ae_ceiling = 100.0;          // exposure caps the frame mean here
  double noise_amplitude = 1.0;       // sensor noise, intensity levels
  double noise_probability = 0.1;     // chance a sample carries noise
  std::uint64_t seed = 1;

  void validate() const
  {
    if (width < 1 || height < 1) {
      throw ConfigError("render size must be positive");
    }
    for (double g : {background_level, baseline_grid_gain, wall_face_gain, reflection_gain, skin_gain, slope_gain,
                      object_gain}) {
      if (!(g >= 0.0)) {
        throw ConfigError("render gains must be >= 0");
      }
    }
    if (!(strain_dimming >= 0.0)) {
      throw ConfigError("render.strain_dimming must be >= 0");
    }
    if (!(object_shininess >= 1.0)) {
      throw ConfigError("render.object_shininess must be >= 1");
    }
    if (!(blur_per_mm > 0.0)) {
      throw ConfigError("render.blur_per_mm must be > 0");
    }
    if (!(attenuation_per_mm > 0.0 && attenuation_per_mm <= 1.0)) {
      throw ConfigError("render.attenuation_per_mm must be in (0, 1]");
    }
    if (!(line_half_width > 0.0) || wall_samples < 1 || !(face_full_tilt > 0.0)) {
      throw ConfigError("render.line_half_width and render.face_full_tilt must be > 0, render.wall_samples >= 1");
    }
    if (!(parallax_mm > 0.0) || !(ae_ceiling > 0.0)) {
      throw ConfigError("render.parallax_mm and render.ae_ceiling must be > 0");
    }
    if (!(noise_amplitude >= 0.0) || !(noise_probability >= 0.0 && noise_probability <= 1.0)) {
      throw ConfigError("render sensor noise settings out of range");
    }
  }
};

/// Everything that changes from frame to frame.
struct SceneState
{
  const DeformationField* field = nullptr; // null: undeformed lattice
  std::span<const double> strain;          // per cell; empty: zero strain
  const Indenter* indenter = nullptr;      // contact footprint for the skin term
  const SceneObject* object = nullptr;
  const NoiseEvent* noise = nullptr;       // an active flash
  std::uint64_t frame_seed = 0;
};

namespace optics_detail {

/// Widths of three successive box filters whose combination approximates a
/// Gaussian of the given sigma.
inline std::array<int, 3> box_widths(double sigma)
{
  const double ideal = std::sqrt(12.0 * sigma * sigma / 3.0 + 1.0);
  int wl = static_cast<int>(std::floor(ideal));
  if (wl % 2 == 0) {
    --wl;
  }
  const int wu = wl + 2;
  const double m_ideal = (12.0 * sigma * sigma - 3.0 * wl * wl - 12.0 * wl - 9.0) / (-4.0 * wl - 4.0);
  const int m = static_cast<int>(std::lround(m_ideal));
  return {0 < m ? wl : wu, 1 < m ? wl : wu, 2 < m ? wl : wu};
}

/// Running-sum box filter of odd width along one axis over rows/columns
/// [lo, hi] of the other axis, with clamped edges.
inline void box_pass(const RealPlane& in, RealPlane& out, int width, bool horizontal, int lo, int hi)
{
  const int r = width / 2;
  const int len = horizontal ? in.width() : in.height();
  auto at = [&](int line, int i) {
    i = std::clamp(i, 0, len - 1);
    return horizontal ? in(i, line) : in(line, i);
  };
  const double inv = 1.0 / width;
  for (int line = lo; line <= hi; ++line) {
    double acc = 0.0;
    for (int i = -r; i <= r; ++i) {
      acc += at(line, i);
    }
    for (int i = 0; i < len; ++i) {
      (horizontal ? out(i, line) : out(line, i)) = acc * inv;
      acc += at(line, i + r + 1) - at(line, i - r);
    }
  }
}

/// Gaussian-like blur (three box passes per axis) of a real plane with
/// clamped edges. The input vanishes outside rows [y0, y1], which bounds the
/// rows the horizontal passes have to visit.
inline RealPlane blur_real(const RealPlane& in, double sigma, int y0, int y1)
{
  if (!(sigma > 0.0) || y0 > y1) {
    return in;
  }
  const auto widths = box_widths(sigma);
  RealPlane a = in;
  RealPlane b(in.width(), in.height());
  for (int wdt : widths) {
    box_pass(a, b, wdt, true, y0, y1);
    std::swap(a, b);
  }
  for (int wdt : widths) {
    box_pass(a, b, wdt, false, 0, in.width() - 1);
    std::swap(a, b);
  }
  return a;
}

/// Adds a line of triangular cross-section along segment a-b, with one gain
/// per output plane. Pixels whose foot point falls outside [0, 1) of the
/// segment are left to the neighbouring segment so polyline joints are not
/// counted twice.
template <std::size_t N>
void draw_segment(std::array<RealPlane, N>& out, const Vec2& a, const Vec2& b, const std::array<double, N>& gain,
                  double half_width, bool last)
{
  const int w = out[0].width();
  const int h = out[0].height();
  const Vec2 d = b - a;
  const double len2 = d.squaredNorm();
  const int x0 = std::max(0, static_cast<int>(std::floor(std::min(a.x(), b.x()) - half_width)));
  const int x1 = std::min(w - 1, static_cast<int>(std::ceil(std::max(a.x(), b.x()) + half_width)));
  const int y0 = std::max(0, static_cast<int>(std::floor(std::min(a.y(), b.y()) - half_width)));
  const int y1 = std::min(h - 1, static_cast<int>(std::ceil(std::max(a.y(), b.y()) + half_width)));
  for (int y = y0; y <= y1; ++y) {
    for (int x = x0; x <= x1; ++x) {
      const Vec2 p(x + 0.5, y + 0.5);
      double t = len2 > 0.0 ? (p - a).dot(d) / len2 : 0.0;
      if (t < 0.0 || t > 1.0 || (t == 1.0 && !last)) {
        continue;
      }
      const double dist = (p - (a + t * d)).norm();
      if (dist < half_width) {
        const double profile = 1.0 - dist / half_width;
        for (std::size_t i = 0; i < N; ++i) {
          if (gain[i] != 0.0) {
            out[i](x, y) += gain[i] * profile;
          }
        }
      }
    }
  }
}

} // namespace optics_detail

class Renderer
{
public:
  Renderer(const Lattice& lat, LightRig rig, RenderConfig cfg) : lat_(&lat), rig_(std::move(rig)), cfg_(cfg)
  {
    rig_.validate();
    cfg_.validate();
    sx_ = cfg_.width / lat.cfg.width_mm();
    sy_ = cfg_.height / lat.cfg.height_mm();
    const double cx = 0.5 * lat.cfg.width_mm();
    const double cy = 0.5 * lat.cfg.height_mm();
    const double half_diag = std::hypot(cx, cy);
    for (int c = 0; c < 3; ++c) {
      illum_[c] = RealPlane(cfg_.width, cfg_.height);
    }
    // Each side light is brightest on its own side of the window.
    for (int y = 0; y < cfg_.height; ++y) {
      for (int x = 0; x < cfg_.width; ++x) {
        const double mx = (x + 0.5) / sx_ - cx;
        const double my = (y + 0.5) / sy_ - cy;
        for (const auto& l : rig_.lights) {
          const double a = l.azimuth_deg * M_PI / 180.0;
          const double exposure = 0.85 + 0.15 * (mx * std::cos(a) + my * std::sin(a)) / half_diag;
          for (int c = 0; c < 3; ++c) {
            illum_[c](x, y) += l.weights[static_cast<std::size_t>(c)] * l.intensity * exposure;
          }
        }
      }
    }
    rest_grid_ = grid_image(nullptr);
  }

  const RenderConfig& config() const { return cfg_; }
  const LightRig& rig() const { return rig_; }
  const Lattice& lattice() const { return *lat_; }

  /// Wall edges seen end-on (lit like the background) plus the faces of
  /// tilted walls, which catch the side light they lean towards.
  struct GridImage
  {
    RealPlane edge;
    std::array<RealPlane, 3> face; // already lit, per channel
  };

  /// Grid image drawn from the lattice geometry. Each wall layer (between
  /// corner layers k and k+1) is drawn at wall_samples depths, so a tilted
  /// wall smears across the pixels between its two ends.
  GridImage grid_image(const DeformationField* field) const
  {
    const auto& lc = lat_->cfg;
    std::array<RealPlane, 4> planes;
    for (auto& p : planes) {
      p = RealPlane(cfg_.width, cfg_.height);
    }
    const int layers = lc.nz;
    const int samples = cfg_.wall_samples;
    const double edge_gain = cfg_.baseline_grid_gain / (layers * samples);
    const double face_gain = cfg_.wall_face_gain / (layers * samples);
    const double cx = 0.5 * lc.width_mm();
    const double cy = 0.5 * lc.height_mm();

    // Projected positions (pixels) of every corner node.
    std::vector<Vec2> proj(static_cast<std::size_t>(lat_->corner_count()));
    for (int k = 0; k <= lc.nz; ++k) {
      const double depth = cfg_.parallax_mm + k * lc.dz;
      for (int j = 0; j <= lc.ny; ++j) {
        for (int i = 0; i <= lc.nx; ++i) {
          const int n = lat_->corner(i, j, k);
          const Vec3& p = lat_->nodes[static_cast<std::size_t>(n)].rest;
          Vec3 u = Vec3::Zero();
          if (field != nullptr) {
            u = field->u[static_cast<std::size_t>(n)];
          }
          // Layers pushed towards the camera look magnified about the centre.
          const double mag = depth / std::max(depth + u.z(), 1e-3);
          const double x = cx + (p.x() + u.x() - cx) * mag;
          const double y = cy + (p.y() + u.y() - cy) * mag;
          proj[static_cast<std::size_t>(n)] = Vec2(x * sx_, y * sy_);
        }
      }
    }

    auto wall = [&](int k, int i0, int j0, int i1, int j1, bool last) {
      const Vec2 a0 = proj[static_cast<std::size_t>(lat_->corner(i0, j0, k))];
      const Vec2 b0 = proj[static_cast<std::size_t>(lat_->corner(i1, j1, k))];
      const Vec2 a1 = proj[static_cast<std::size_t>(lat_->corner(i0, j0, k + 1))];
      const Vec2 b1 = proj[static_cast<std::size_t>(lat_->corner(i1, j1, k + 1))];
      std::array<double, 4> gain{edge_gain, 0.0, 0.0, 0.0};
      if (face_gain > 0.0) {
        // Lean of the wall across its own plane, in pixels.
        const Vec2 along = b0 - a0;
        const double len = along.norm();
        if (len > 0.0) {
          const Vec2 normal(-along.y() / len, along.x() / len);
          const double lean = 0.5 * ((a1 - a0) + (b1 - b0)).dot(normal);
          const Vec2 dir = lean >= 0.0 ? normal : Vec2(-normal);
          const double amount = std::min(1.0, std::abs(lean) / cfg_.face_full_tilt);
          for (const auto& l : rig_.lights) {
            const double az = l.azimuth_deg * M_PI / 180.0;
            const double facing = std::max(0.0, dir.x() * std::cos(az) + dir.y() * std::sin(az));
            for (int c = 0; c < 3; ++c) {
              gain[static_cast<std::size_t>(c + 1)] +=
                face_gain * amount * facing * l.weights[static_cast<std::size_t>(c)] * l.intensity;
            }
          }
        }
      }
      for (int s = 0; s < samples; ++s) {
        const double t = (s + 0.5) / samples;
        optics_detail::draw_segment(planes, Vec2((1.0 - t) * a0 + t * a1), Vec2((1.0 - t) * b0 + t * b1), gain,
                                    cfg_.line_half_width, last);
      }
    };
    for (int k = 0; k < layers; ++k) {
      for (int j = 0; j <= lc.ny; ++j) {
        for (int i = 0; i < lc.nx; ++i) {
          wall(k, i, j, i + 1, j, i + 1 == lc.nx);
        }
      }
      for (int i = 0; i <= lc.nx; ++i) {
        for (int j = 0; j < lc.ny; ++j) {
          wall(k, i, j, i, j + 1, j + 1 == lc.ny);
        }
      }
    }
    return {std::move(planes[0]), {std::move(planes[1]), std::move(planes[2]), std::move(planes[3])}};
  }

  /// Per-cell strain splatted onto the pixel raster: each layer is sampled
  /// bilinearly between cell centres, and layers are summed with weights
  /// that favour the camera side (weight nz - k, normalized).
  RealPlane project_strain(std::span<const double> strain) const
  {
    const auto& lc = lat_->cfg;
    RealPlane out(cfg_.width, cfg_.height);
    if (strain.empty()) {
      return out;
    }
    if (strain.size() != static_cast<std::size_t>(lc.cell_count())) {
      throw InvalidInput("project_strain: strain has " + std::to_string(strain.size()) + " cells, lattice has " +
                         std::to_string(lc.cell_count()));
    }
    const double wsum = 0.5 * lc.nz * (lc.nz + 1);
    // Collapse layers first; the splat is linear so the order is free.
    std::vector<double> flat(static_cast<std::size_t>(lc.nx * lc.ny), 0.0);
    for (int k = 0; k < lc.nz; ++k) {
      const double w = (lc.nz - k) / wsum;
      for (int j = 0; j < lc.ny; ++j) {
        for (int i = 0; i < lc.nx; ++i) {
          flat[static_cast<std::size_t>(i + lc.nx * j)] += w * strain[static_cast<std::size_t>(lat_->cell(i, j, k))];
        }
      }
    }
    for (int y = 0; y < cfg_.height; ++y) {
      // Continuous cell coordinate of this pixel, cell centres at integers.
      const double fy = (y + 0.5) / sy_ / lc.dy - 0.5;
      const int j0 = static_cast<int>(std::floor(fy));
      const double ty = fy - j0;
      for (int x = 0; x < cfg_.width; ++x) {
        const double fx = (x + 0.5) / sx_ / lc.dx - 0.5;
        const int i0 = static_cast<int>(std::floor(fx));
        const double tx = fx - i0;
        double v = 0.0;
        for (int b = 0; b <= 1; ++b) {
          for (int a = 0; a <= 1; ++a) {
            const int i = i0 + a;
            const int j = j0 + b;
            if (i < 0 || j < 0 || i >= lc.nx || j >= lc.ny) {
              continue;
            }
            v += (a ? tx : 1.0 - tx) * (b ? ty : 1.0 - ty) * flat[static_cast<std::size_t>(i + lc.nx * j)];
          }
        }
        out(x, y) = v;
      }
    }
    return out;
  }

  /// Side light caught by the slopes of the pressed contact surface. The
  /// surface gradient comes from the contact-layer z displacements, is
  /// interpolated bilinearly between corners, and each light brightens the
  /// slopes that face it.
  std::array<RealPlane, 3> slope_image(const DeformationField& field) const
  {
    const auto& lc = lat_->cfg;
    const int cx = lc.nx + 1;
    const int cy = lc.ny + 1;
    std::vector<Vec2> grad(static_cast<std::size_t>(cx) * cy);
    auto h = [&](int i, int j) { return field.u[static_cast<std::size_t>(lat_->corner(i, j, lc.nz))].z(); };
    for (int j = 0; j < cy; ++j) {
      for (int i = 0; i < cx; ++i) {
        const int i0 = std::max(0, i - 1);
        const int i1 = std::min(lc.nx, i + 1);
        const int j0 = std::max(0, j - 1);
        const int j1 = std::min(lc.ny, j + 1);
        grad[static_cast<std::size_t>(j) * cx + i] =
          Vec2((h(i1, j) - h(i0, j)) / ((i1 - i0) * lc.dx), (h(i, j1) - h(i, j0)) / ((j1 - j0) * lc.dy));
      }
    }
    std::array<RealPlane, 3> out;
    for (auto& p : out) {
      p = RealPlane(cfg_.width, cfg_.height);
    }
    std::vector<Vec2> dirs;
    for (const auto& l : rig_.lights) {
      const double az = l.azimuth_deg * M_PI / 180.0;
      dirs.emplace_back(std::cos(az), std::sin(az));
    }
    for (int y = 0; y < cfg_.height; ++y) {
      const double gy = std::clamp((y + 0.5) / sy_ / lc.dy, 0.0, static_cast<double>(lc.ny));
      const int j = std::min(static_cast<int>(gy), lc.ny - 1);
      const double ty = gy - j;
      for (int x = 0; x < cfg_.width; ++x) {
        const double gx = std::clamp((x + 0.5) / sx_ / lc.dx, 0.0, static_cast<double>(lc.nx));
        const int i = std::min(static_cast<int>(gx), lc.nx - 1);
        const double tx = gx - i;
        auto at = [&](int a, int b) { return grad[static_cast<std::size_t>(b) * cx + a]; };
        const Vec2 g = (1 - ty) * ((1 - tx) * at(i, j) + tx * at(i + 1, j)) + ty * ((1 - tx) * at(i, j + 1) + tx * at(i + 1, j + 1));
        for (std::size_t l = 0; l < dirs.size(); ++l) {
          const double facing = g.dot(dirs[l]);
          if (facing <= 0.0) {
            continue;
          }
          const auto& light = rig_.lights[l];
          for (int c = 0; c < 3; ++c) {
            out[c](x, y) += cfg_.slope_gain * light.weights[static_cast<std::size_t>(c)] * light.intensity * facing;
          }
        }
      }
    }
    return out;
  }

  /// Transmitted object image per channel, before blur. `box` receives the
  /// pixel bounds of the object's footprint (x0, x1, y0, y1).
  std::array<RealPlane, 3> object_image(const SceneObject& obj, std::array<int, 4>* box = nullptr) const
  {
    obj.validate();
    const auto& lc = lat_->cfg;
    std::array<RealPlane, 3> out;
    for (auto& p : out) {
      p = RealPlane(cfg_.width, cfg_.height);
    }
    const double ox = 0.5 * lc.width_mm() + obj.lateral_offset.x();
    const double oy = 0.5 * lc.height_mm() + obj.lateral_offset.y();
    const double el = rig_.elevation_deg * M_PI / 180.0;
    const double atten = cfg_.object_gain * std::pow(cfg_.attenuation_per_mm, obj.distance);
    const int tw = obj.texture.width();
    const int th = obj.texture.height();
    const int bx0 = std::max(0, static_cast<int>(std::floor((ox - obj.radius) * sx_)));
    const int bx1 = std::min(cfg_.width - 1, static_cast<int>(std::ceil((ox + obj.radius) * sx_)));
    const int by0 = std::max(0, static_cast<int>(std::floor((oy - obj.radius) * sy_)));
    const int by1 = std::min(cfg_.height - 1, static_cast<int>(std::ceil((oy + obj.radius) * sy_)));
    if (box != nullptr) {
      *box = {bx0, bx1, by0, by1};
    }
    if (atten <= 0.0) {
      return out;
    }
    struct LitDir
    {
      double x, y, z;
      std::array<double, 3> weight; // light channel weights * intensity * tint * gain
    };
    std::vector<LitDir> dirs;
    for (const auto& l : rig_.lights) {
      const double az = l.azimuth_deg * M_PI / 180.0;
      LitDir d{std::cos(az) * std::cos(el), std::sin(az) * std::cos(el), std::sin(el), {}};
      for (int c = 0; c < 3; ++c) {
        const auto cc = static_cast<std::size_t>(c);
        d.weight[cc] = atten * l.weights[cc] * l.intensity * obj.tint[cc] / 255.0;
      }
      dirs.push_back(d);
    }
    const double shine = cfg_.object_shininess;
    for (int y = by0; y <= by1; ++y) {
      for (int x = bx0; x <= bx1; ++x) {
        const double nx = ((x + 0.5) / sx_ - ox) / obj.radius;
        const double ny = ((y + 0.5) / sy_ - oy) / obj.radius;
        const double r2 = nx * nx + ny * ny;
        if (r2 >= 1.0) {
          continue;
        }
        const double nz = std::sqrt(1.0 - r2);
        const int tx = std::clamp(static_cast<int>((nx + 1.0) * 0.5 * tw), 0, tw - 1);
        const int ty = std::clamp(static_cast<int>((ny + 1.0) * 0.5 * th), 0, th - 1);
        const double albedo = obj.texture(tx, ty);
        for (const auto& d : dirs) {
          const double lambert = nx * d.x + ny * d.y + nz * d.z;
          if (lambert <= 0.0) {
            continue;
          }
          const double shade = albedo * std::pow(lambert, shine);
          for (int c = 0; c < 3; ++c) {
            out[c](x, y) += d.weight[static_cast<std::size_t>(c)] * shade;
          }
        }
      }
    }
    return out;
  }

  Frame render(const SceneState& scene) const
  {
    const int w = cfg_.width;
    const int h = cfg_.height;
    const std::size_t n = static_cast<std::size_t>(w) * h;

    const GridImage deformed = scene.field != nullptr ? grid_image(scene.field) : GridImage{};
    const GridImage& grid = scene.field != nullptr ? deformed : rest_grid_;
    const RealPlane strain = project_strain(scene.strain);

    std::vector<char> footprint;
    if (scene.indenter != nullptr && scene.indenter->depth > 0.0 &&
        scene.indenter->depth < lat_->cfg.skin_thickness) {
      footprint.assign(n, 0);
      for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
          footprint[static_cast<std::size_t>(y) * w + x] =
            scene.indenter->penetration(Vec2((x + 0.5) / sx_, (y + 0.5) / sy_)).has_value();
        }
      }
    }

    std::array<RealPlane, 3> slope;
    if (scene.field != nullptr && cfg_.slope_gain > 0.0) {
      slope = slope_image(*scene.field);
    }

    std::array<RealPlane, 3> object;
    if (scene.object != nullptr) {
      const double sigma = cfg_.blur_per_mm * scene.object->distance;
      std::array<int, 4> box{};
      auto img = object_image(*scene.object, &box);
      for (int c = 0; c < 3; ++c) {
        object[c] = optics_detail::blur_real(img[c], sigma, box[2], box[3]);
      }
    }

    Rng rng(mix_seed(cfg_.seed, scene.frame_seed));
    RealPlane flash;
    if (scene.noise != nullptr && scene.noise->boost > 0.0) {
      scene.noise->validate();
      flash = RealPlane(w, h);
      const auto& ne = *scene.noise;
      const double bx = ne.beam_center.x() * w;
      const double by = ne.beam_center.y() * h;
      for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
          double profile = 1.0;
          if (ne.beam_radius > 0.0) {
            const double dx = x + 0.5 - bx;
            const double dy = y + 0.5 - by;
            profile = std::exp(-0.5 * (dx * dx + dy * dy) / (ne.beam_radius * ne.beam_radius));
          }
          flash(x, y) = ne.boost * profile * (1.0 + ne.jitter * rng.uniform(-1.0, 1.0));
        }
      }
    }

    const double occlusion = cfg_.baseline_grid_gain > 0.0 ? 2.0 / cfg_.baseline_grid_gain : 0.0;
    std::vector<double> pre(3 * n);
    double total = 0.0;
    for (int c = 0; c < 3; ++c) {
      auto il = illum_[c].data();
      auto g = grid.edge.data();
      auto face = grid.face[c].data();
      auto st = strain.data();
      for (std::size_t i = 0; i < n; ++i) {
        // Strained walls scatter the light they would otherwise guide.
        const double edge = st.empty() ? g[i] : g[i] * std::max(0.0, 1.0 - cfg_.strain_dimming * st[i]);
        double v = il[i] * (cfg_.background_level + edge) + face[i];
        if (!st.empty()) {
          v += il[i] * cfg_.reflection_gain * st[i];
        }
        if (!footprint.empty() && footprint[i]) {
          v += il[i] * cfg_.skin_gain;
        }
        // Light entering through the contact surface passes between the
        // walls, not through them.
        const double open = 1.0 - std::min(1.0, edge * occlusion);
        if (!slope[c].empty()) {
          v += open * slope[c].data()[i];
        }
        if (scene.object != nullptr) {
          v += open * object[c].data()[i];
        }
        if (!flash.empty()) {
          v += flash.data()[i];
        }
        pre[3 * i + static_cast<std::size_t>(c)] = v;
        total += v;
      }
    }

    const double mean = total / static_cast<double>(3 * n);
    const double gain = mean > cfg_.ae_ceiling ? cfg_.ae_ceiling / mean : 1.0;
    std::vector<std::uint8_t> px(3 * n);
    for (std::size_t i = 0; i < 3 * n; ++i) {
      double v = std::floor(gain * pre[i] + 0.5);
      if (rng.uniform() < cfg_.noise_probability) {
        v += rng.next() & 1u ? cfg_.noise_amplitude : -cfg_.noise_amplitude;
      }
      px[i] = static_cast<std::uint8_t>(std::clamp(v, 0.0, 255.0));
    }
    return {w, h, std::move(px)};
  }

private:
  const Lattice* lat_;
  LightRig rig_;
  RenderConfig cfg_;
  double sx_ = 1.0; // pixels per mm
  double sy_ = 1.0;
  std::array<RealPlane, 3> illum_;
  GridImage rest_grid_;
};

} // namespace gridtac
