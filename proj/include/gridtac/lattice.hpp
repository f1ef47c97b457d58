#pragma once

// Lattice spring model of the multi-layer grid elastomer.
//
// Geometry: nx * ny * nz cubic cells. Every cell contributes its 8 corner
// nodes (shared with neighbours) and one centre node. Axis-aligned cell
// edges are structure springs (k_struct); the centre connects to all 8
// corners through diagonal springs (k_diag).
//
// Axes: x, y span the sensing window; z points from the camera side
// (layer k = 0, z = 0) towards the contact surface (layer k = nz). An
// indenter pushing into the surface therefore moves contact nodes towards -z.

#include "gridtac/errors.hpp"

#include <Eigen/Core>
#include <Eigen/CholmodSupport>
#include <Eigen/SparseCore>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <ostream>
#include <vector>

namespace gridtac {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;

struct LatticeConfig
{
  int nx = 16;
  int ny = 12;
  int nz = 6;
  double dx = 0.8; // mm
  double dy = 0.8;
  double dz = 0.8;
  double k_struct = 1.0; // force / mm
  double k_diag = 0.5;
  double skin_thickness = 0.5; // mm, consumed by the renderer
  bool top_fixed = true;
  // One-sided guard keeping each vertical edge's z extent above
  // guard_ratio * dz, so cell layers cannot fold through one another.
  double guard_ratio = 0.5;
  double k_guard = 10.0; // force / mm; 0 disables

  void validate() const
  {
    if (nx < 1 || ny < 1 || nz < 1) {
      throw ConfigError("lattice cell counts must be >= 1");
    }
    if (!(dx > 0 && dy > 0 && dz > 0)) {
      throw ConfigError("lattice cell sizes must be > 0");
    }
    if (!(k_struct > 0 && k_diag > 0)) {
      throw ConfigError("lattice stiffnesses must be > 0");
    }
    if (!(skin_thickness >= 0)) {
      throw ConfigError("lattice.skin_thickness must be >= 0");
    }
    if (!(guard_ratio >= 0.0 && guard_ratio < 1.0) || !(k_guard >= 0.0)) {
      throw ConfigError("lattice.guard_ratio must be in [0, 1) and lattice.k_guard >= 0");
    }
  }

  double width_mm() const { return nx * dx; }
  double height_mm() const { return ny * dy; }
  double depth_mm() const { return nz * dz; }
  int cell_count() const { return nx * ny * nz; }
};

struct LatticeNode
{
  Vec3 rest;
  bool fixed = false;
};

struct Spring
{
  int a = 0;
  int b = 0;
  double rest_length = 0.0;
  double stiffness = 0.0;
  bool diagonal = false;
};

class Lattice
{
public:
  LatticeConfig cfg;
  std::vector<LatticeNode> nodes;
  std::vector<Spring> springs;
  std::vector<int> vertical_edges; // structure springs along z, lower node first

  int corner_count() const { return (cfg.nx + 1) * (cfg.ny + 1) * (cfg.nz + 1); }

  int corner(int i, int j, int k) const { return i + (cfg.nx + 1) * (j + (cfg.ny + 1) * k); }

  int center(int i, int j, int k) const { return corner_count() + i + cfg.nx * (j + cfg.ny * k); }

  int cell(int i, int j, int k) const { return i + cfg.nx * (j + cfg.ny * k); }

  /// Indices of the springs belonging to cell (i, j, k): 12 edges, 8 diagonals.
  const std::vector<int>& cell_springs(int cell_index) const { return cell_springs_[static_cast<std::size_t>(cell_index)]; }

  /// Corner nodes on the contact surface (layer k = nz).
  std::vector<int> contact_surface() const
  {
    std::vector<int> out;
    for (int j = 0; j <= cfg.ny; ++j) {
      for (int i = 0; i <= cfg.nx; ++i) {
        out.push_back(corner(i, j, cfg.nz));
      }
    }
    return out;
  }

  friend Lattice build_lattice(const LatticeConfig& cfg);

private:
  std::vector<std::vector<int>> cell_springs_;
};

inline Lattice build_lattice(const LatticeConfig& cfg)
{
  cfg.validate();
  Lattice lat;
  lat.cfg = cfg;
  const int nc = lat.corner_count();
  lat.nodes.resize(static_cast<std::size_t>(nc + cfg.cell_count()));
  for (int k = 0; k <= cfg.nz; ++k) {
    for (int j = 0; j <= cfg.ny; ++j) {
      for (int i = 0; i <= cfg.nx; ++i) {
        auto& n = lat.nodes[static_cast<std::size_t>(lat.corner(i, j, k))];
        n.rest = Vec3(i * cfg.dx, j * cfg.dy, k * cfg.dz);
        n.fixed = cfg.top_fixed && k == 0;
      }
    }
  }
  for (int k = 0; k < cfg.nz; ++k) {
    for (int j = 0; j < cfg.ny; ++j) {
      for (int i = 0; i < cfg.nx; ++i) {
        lat.nodes[static_cast<std::size_t>(lat.center(i, j, k))].rest =
          Vec3((i + 0.5) * cfg.dx, (j + 0.5) * cfg.dy, (k + 0.5) * cfg.dz);
      }
    }
  }

  auto add = [&](int a, int b, double k, bool diag) {
    const double len = (lat.nodes[static_cast<std::size_t>(b)].rest - lat.nodes[static_cast<std::size_t>(a)].rest).norm();
    lat.springs.push_back({a, b, len, k, diag});
    return static_cast<int>(lat.springs.size() - 1);
  };

  // Structure springs, each edge created once; remember edge ids for cells.
  std::vector<int> ex(static_cast<std::size_t>(nc), -1), ey(static_cast<std::size_t>(nc), -1),
    ez(static_cast<std::size_t>(nc), -1);
  for (int k = 0; k <= cfg.nz; ++k) {
    for (int j = 0; j <= cfg.ny; ++j) {
      for (int i = 0; i <= cfg.nx; ++i) {
        const int c = lat.corner(i, j, k);
        if (i < cfg.nx) {
          ex[static_cast<std::size_t>(c)] = add(c, lat.corner(i + 1, j, k), cfg.k_struct, false);
        }
        if (j < cfg.ny) {
          ey[static_cast<std::size_t>(c)] = add(c, lat.corner(i, j + 1, k), cfg.k_struct, false);
        }
        if (k < cfg.nz) {
          ez[static_cast<std::size_t>(c)] = add(c, lat.corner(i, j, k + 1), cfg.k_struct, false);
          lat.vertical_edges.push_back(ez[static_cast<std::size_t>(c)]);
        }
      }
    }
  }

  lat.cell_springs_.resize(static_cast<std::size_t>(cfg.cell_count()));
  for (int k = 0; k < cfg.nz; ++k) {
    for (int j = 0; j < cfg.ny; ++j) {
      for (int i = 0; i < cfg.nx; ++i) {
        auto& cs = lat.cell_springs_[static_cast<std::size_t>(lat.cell(i, j, k))];
        for (int b = 0; b <= 1; ++b) {
          for (int a = 0; a <= 1; ++a) {
            cs.push_back(ex[static_cast<std::size_t>(lat.corner(i, j + a, k + b))]);
            cs.push_back(ey[static_cast<std::size_t>(lat.corner(i + a, j, k + b))]);
            cs.push_back(ez[static_cast<std::size_t>(lat.corner(i + a, j + b, k))]);
          }
        }
        const int ctr = lat.center(i, j, k);
        for (int c = 0; c < 8; ++c) {
          cs.push_back(add(ctr, lat.corner(i + (c & 1), j + ((c >> 1) & 1), k + ((c >> 2) & 1)), cfg.k_diag, true));
        }
      }
    }
  }
  return lat;
}

// ---------------------------------------------------------------------------
// Indenters

enum class IndenterShape { Sphere, Cylinder, Plane };

struct Indenter
{
  IndenterShape shape = IndenterShape::Sphere;
  double radius = 5.0;       // mm; sphere and cylinder
  double axis_deg = 0.0;     // cylinder axis direction in the xy plane
  Vec2 center{0.0, 0.0};     // first-contact point on the surface, mm
  double twist_deg = 0.0;    // rotation of the contact patch about z
  double depth = 0.0;        // mm of penetration past first contact
  Vec2 shear{0.0, 0.0};      // lateral offset of the contact patch, mm

  void validate() const
  {
    if (!(depth >= 0.0)) {
      throw InvalidInput("indenter depth must be >= 0");
    }
    if (shape != IndenterShape::Plane && !(radius > 0.0)) {
      throw InvalidInput("indenter radius must be > 0");
    }
  }

  /// How far the indenter surface at lateral point p reaches past the
  /// undeformed contact surface, or nullopt if p is outside the footprint.
  std::optional<double> penetration(const Vec2& p) const
  {
    if (depth <= 0.0) {
      return std::nullopt;
    }
    double r = 0.0;
    switch (shape) {
    case IndenterShape::Plane: return depth;
    case IndenterShape::Sphere: r = (p - center).norm(); break;
    case IndenterShape::Cylinder: {
      const double a = axis_deg * M_PI / 180.0;
      const Vec2 dir(std::cos(a), std::sin(a));
      const Vec2 d = p - center;
      r = std::abs(d.x() * dir.y() - d.y() * dir.x());
      break;
    }
    }
    if (r >= radius) {
      return std::nullopt;
    }
    const double sag = radius - std::sqrt(radius * radius - r * r);
    if (sag >= depth) {
      return std::nullopt;
    }
    return depth - sag;
  }

  /// Prescribed displacement of a contact-surface node with rest position p.
  std::optional<Vec3> surface_displacement(const Vec3& p) const
  {
    const Vec2 xy(p.x(), p.y());
    const auto pen = penetration(xy);
    if (!pen) {
      return std::nullopt;
    }
    Vec2 lateral = shear;
    if (twist_deg != 0.0) {
      const double t = twist_deg * M_PI / 180.0;
      const Vec2 d = xy - center;
      const Vec2 rot(std::cos(t) * d.x() - std::sin(t) * d.y(), std::sin(t) * d.x() + std::cos(t) * d.y());
      lateral += rot - d;
    }
    return Vec3(lateral.x(), lateral.y(), -*pen);
  }
};

// ---------------------------------------------------------------------------
// Static solve

struct SolverOptions
{
  double tol = -1.0;        // max residual force; <= 0 selects 1e-6 * k_struct * dx
  int max_iterations = 10000;
};

struct DeformationField
{
  std::vector<Vec3> u;            // per-node displacement, mm
  std::vector<int> contact_nodes; // nodes pinned by the indenter
  double residual = 0.0;          // max unbalanced force on free nodes
  double energy = 0.0;
  int iterations = 0;
};

namespace lattice_detail {

/// Compression of a vertical edge past the guard height (0 when inactive).
inline double guard_gap(const Lattice& lat, const Spring& s, const std::vector<Vec3>& u)
{
  const auto a = static_cast<std::size_t>(s.a);
  const auto b = static_cast<std::size_t>(s.b);
  const double h = lat.nodes[b].rest.z() + u[b].z() - lat.nodes[a].rest.z() - u[a].z();
  return std::max(0.0, lat.cfg.guard_ratio * s.rest_length - h);
}

inline double spring_energy(const Lattice& lat, const std::vector<Vec3>& u)
{
  double e = 0.0;
  for (const auto& s : lat.springs) {
    const Vec3 d = lat.nodes[static_cast<std::size_t>(s.b)].rest + u[static_cast<std::size_t>(s.b)] -
                   lat.nodes[static_cast<std::size_t>(s.a)].rest - u[static_cast<std::size_t>(s.a)];
    const double ext = d.norm() - s.rest_length;
    e += 0.5 * s.stiffness * ext * ext;
  }
  if (lat.cfg.k_guard > 0.0) {
    for (int id : lat.vertical_edges) {
      const double g = guard_gap(lat, lat.springs[static_cast<std::size_t>(id)], u);
      e += 0.5 * lat.cfg.k_guard * g * g;
    }
  }
  return e;
}

/// Net spring force acting on every node.
inline std::vector<Vec3> spring_forces(const Lattice& lat, const std::vector<Vec3>& u)
{
  std::vector<Vec3> f(lat.nodes.size(), Vec3::Zero());
  for (const auto& s : lat.springs) {
    const auto a = static_cast<std::size_t>(s.a);
    const auto b = static_cast<std::size_t>(s.b);
    const Vec3 d = lat.nodes[b].rest + u[b] - lat.nodes[a].rest - u[a];
    const double len = d.norm();
    if (len <= 0.0) {
      continue;
    }
    const Vec3 t = (s.stiffness * (len - s.rest_length) / len) * d; // tension pulls a towards b
    f[a] += t;
    f[b] -= t;
  }
  if (lat.cfg.k_guard > 0.0) {
    for (int id : lat.vertical_edges) {
      const auto& s = lat.springs[static_cast<std::size_t>(id)];
      const double push = lat.cfg.k_guard * guard_gap(lat, s, u);
      f[static_cast<std::size_t>(s.a)].z() -= push;
      f[static_cast<std::size_t>(s.b)].z() += push;
    }
  }
  return f;
}

} // namespace lattice_detail

/// Total spring energy of a displacement field.
inline double lattice_energy(const Lattice& lat, const std::vector<Vec3>& u)
{
  return lattice_detail::spring_energy(lat, u);
}

/// Displacement boundary conditions implied by an indenter: fixed nodes at
/// zero, contact nodes at the indenter surface. Returns the initial field
/// (free nodes at zero) and a per-node constrained flag.
inline std::vector<Vec3> boundary_extension(const Lattice& lat, const Indenter& ind, std::vector<char>& constrained,
                                            std::vector<int>& contact)
{
  std::vector<Vec3> u(lat.nodes.size(), Vec3::Zero());
  constrained.assign(lat.nodes.size(), 0);
  contact.clear();
  for (std::size_t n = 0; n < lat.nodes.size(); ++n) {
    constrained[n] = lat.nodes[n].fixed ? 1 : 0;
  }
  for (int n : lat.contact_surface()) {
    const auto& node = lat.nodes[static_cast<std::size_t>(n)];
    if (node.fixed) {
      continue;
    }
    if (auto disp = ind.surface_displacement(node.rest)) {
      u[static_cast<std::size_t>(n)] = *disp;
      constrained[static_cast<std::size_t>(n)] = 1;
      contact.push_back(n);
    }
  }
  return u;
}

namespace lattice_detail {

struct NewtonState
{
  const Lattice& lat;
  const std::vector<char>& constrained;
  std::vector<int> dof; // first DOF of each free node, -1 if constrained
  int ndof = 0;
  int iterations = 0;
  Eigen::CholmodSupernodalLLT<Eigen::SparseMatrix<double>> llt;
  bool analyzed = false;
  double shift = 0.0;

  NewtonState(const Lattice& l, const std::vector<char>& c) : lat(l), constrained(c), dof(l.nodes.size(), -1)
  {
    // Indefinite trial matrices are expected; fail fast and quietly.
    llt.cholmod().print = 0;
    llt.cholmod().quick_return_if_not_posdef = 1;
    for (std::size_t n = 0; n < lat.nodes.size(); ++n) {
      if (!constrained[n]) {
        dof[n] = ndof;
        ndof += 3;
      }
    }
  }

  double residual(const std::vector<Vec3>& f) const
  {
    double r = 0.0;
    for (std::size_t n = 0; n < f.size(); ++n) {
      if (!constrained[n]) {
        r = std::max(r, f[n].norm());
      }
    }
    return r;
  }

  Eigen::SparseMatrix<double> hessian(const std::vector<Vec3>& u, double shift) const
  {
    std::vector<Eigen::Triplet<double>> trip;
    trip.reserve(lat.springs.size() * 36 + static_cast<std::size_t>(ndof));
    for (const auto& s : lat.springs) {
      const auto a = static_cast<std::size_t>(s.a);
      const auto b = static_cast<std::size_t>(s.b);
      const int da = dof[a];
      const int db = dof[b];
      if (da < 0 && db < 0) {
        continue;
      }
      const Vec3 d = lat.nodes[b].rest + u[b] - lat.nodes[a].rest - u[a];
      const double len = d.norm();
      if (len <= 0.0) {
        continue;
      }
      const Vec3 nrm = d / len;
      const double geo = 1.0 - s.rest_length / len;
      const Eigen::Matrix3d nn = nrm * nrm.transpose();
      const Eigen::Matrix3d K = s.stiffness * (nn + geo * (Eigen::Matrix3d::Identity() - nn));
      for (int r = 0; r < 3; ++r) {
        for (int c = 0; c < 3; ++c) {
          const double v = K(r, c);
          if (da >= 0) {
            trip.emplace_back(da + r, da + c, v);
          }
          if (db >= 0) {
            trip.emplace_back(db + r, db + c, v);
          }
          if (da >= 0 && db >= 0) {
            trip.emplace_back(da + r, db + c, -v);
            trip.emplace_back(db + r, da + c, -v);
          }
        }
      }
    }
    if (lat.cfg.k_guard > 0.0) {
      for (int id : lat.vertical_edges) {
        const auto& s = lat.springs[static_cast<std::size_t>(id)];
        if (guard_gap(lat, s, u) <= 0.0) {
          continue;
        }
        const int za = dof[static_cast<std::size_t>(s.a)];
        const int zb = dof[static_cast<std::size_t>(s.b)];
        const double k = lat.cfg.k_guard;
        if (za >= 0) {
          trip.emplace_back(za + 2, za + 2, k);
        }
        if (zb >= 0) {
          trip.emplace_back(zb + 2, zb + 2, k);
        }
        if (za >= 0 && zb >= 0) {
          trip.emplace_back(za + 2, zb + 2, -k);
          trip.emplace_back(zb + 2, za + 2, -k);
        }
      }
    }
    for (int i = 0; i < ndof; ++i) {
      trip.emplace_back(i, i, shift);
    }
    Eigen::SparseMatrix<double> H(ndof, ndof);
    H.setFromTriplets(trip.begin(), trip.end());
    return H;
  }

  /// Newton iterations with backtracking until the residual drops to tol.
  /// Returns the final residual.
  double minimize(std::vector<Vec3>& u, double tol, int max_iterations)
  {
    auto forces = spring_forces(lat, u);
    double energy = spring_energy(lat, u);
    double res = residual(forces);
    std::vector<Vec3> trial(u);
    while (res > tol && ndof > 0) {
      if (iterations >= max_iterations) {
        throw SolverError("solve_static did not converge in " + std::to_string(max_iterations) + " iterations", res);
      }
      ++iterations;

      const auto H = hessian(u, 0.0);
      Eigen::VectorXd g(ndof);
      for (std::size_t n = 0; n < lat.nodes.size(); ++n) {
        if (dof[n] >= 0) {
          g.segment<3>(dof[n]) = forces[n]; // force = -gradient
        }
      }
      // Shift the diagonal until the Hessian is positive definite; the
      // shift relaxes again after full Newton steps.
      Eigen::SparseMatrix<double> Hs;
      for (;;) {
        Hs = H;
        Hs.diagonal().array() += shift + 1e-10 * lat.cfg.k_struct;
        if (!analyzed) {
          llt.analyzePattern(Hs);
          analyzed = true;
        }
        llt.factorize(Hs);
        if (llt.info() == Eigen::Success) {
          break;
        }
        shift = std::max(2.0 * shift, 1e-4 * lat.cfg.k_struct);
        if (shift > 1e6 * lat.cfg.k_struct) {
          throw SolverError("solve_static: factorization failed", res);
        }
      }
      const Eigen::VectorXd step = llt.solve(g);

      double alpha = 1.0;
      double trial_energy = energy;
      bool accepted = false;
      const double slope = g.dot(step);
      for (int ls = 0; ls < 40; ++ls) {
        for (std::size_t n = 0; n < lat.nodes.size(); ++n) {
          trial[n] = dof[n] >= 0 ? Vec3(u[n] + alpha * step.segment<3>(dof[n])) : u[n];
        }
        trial_energy = spring_energy(lat, trial);
        if (trial_energy <= energy - 1e-4 * alpha * slope) {
          accepted = true;
          break;
        }
        alpha *= 0.5;
      }
      if (!accepted) {
        // Energy is flat to rounding; keep the step only if forces improve.
        const double r_trial = residual(spring_forces(lat, trial));
        if (!(r_trial < res)) {
          throw SolverError("solve_static: line search stalled", res);
        }
      }
      if (alpha == 1.0) {
        shift = shift < 1e-8 * lat.cfg.k_struct ? 0.0 : 0.25 * shift;
      } else if (alpha < 0.5) {
        shift = std::max(2.0 * shift, 1e-4 * lat.cfg.k_struct);
      }
      u.swap(trial);
      energy = trial_energy;
      forces = spring_forces(lat, u);
      res = residual(forces);
    }
    return res;
  }
};

} // namespace lattice_detail

/// Minimizes total spring energy under the indenter's displacement boundary
/// conditions.
///
/// Damped Newton iterations (full Hessian with an adaptive diagonal shift
/// when it is indefinite, sparse Cholesky, backtracking line search). Prescribed
/// displacements are applied along a straight loading path in increments of
/// at most a quarter cell so the lattice follows the non-inverted branch. A
/// warm start (a previously solved field on the same lattice) becomes the
/// start of that path.
inline DeformationField solve_static(const Lattice& lat, const Indenter& ind, SolverOptions opt = {},
                                     const DeformationField* warm = nullptr)
{
  ind.validate();
  const double tol = opt.tol > 0.0 ? opt.tol : 1e-6 * lat.cfg.k_struct * lat.cfg.dx;

  DeformationField field;
  std::vector<char> constrained;
  const auto target = boundary_extension(lat, ind, constrained, field.contact_nodes);

  std::vector<Vec3> start(lat.nodes.size(), Vec3::Zero());
  if (warm != nullptr && warm->u.size() == start.size()) {
    start = warm->u;
    for (std::size_t n = 0; n < start.size(); ++n) {
      if (lat.nodes[n].fixed) {
        start[n] = Vec3::Zero();
      }
    }
  }

  double travel = 0.0;
  for (std::size_t n = 0; n < start.size(); ++n) {
    if (constrained[n]) {
      travel = std::max(travel, (target[n] - start[n]).norm());
    }
  }
  const double max_step = 0.25 * std::min({lat.cfg.dx, lat.cfg.dy, lat.cfg.dz});
  const int steps = std::max(1, static_cast<int>(std::ceil(travel / max_step)));

  lattice_detail::NewtonState newton(lat, constrained);
  field.u = start;
  for (int s = 1; s <= steps; ++s) {
    const double t = static_cast<double>(s) / steps;
    for (std::size_t n = 0; n < start.size(); ++n) {
      if (constrained[n]) {
        field.u[n] = start[n] + t * (target[n] - start[n]);
      }
    }
    const double step_tol = s == steps ? tol : std::max(tol, 1e-3 * lat.cfg.k_struct * lat.cfg.dx);
    field.residual = newton.minimize(field.u, step_tol, opt.max_iterations);
  }
  field.energy = lattice_detail::spring_energy(lat, field.u);
  field.iterations = newton.iterations;
  return field;
}

inline DeformationField solve_static(const Lattice& lat, const Indenter& ind, double tol)
{
  SolverOptions opt;
  opt.tol = tol;
  return solve_static(lat, ind, opt);
}

/// Per cell mean absolute relative elongation of its 20 springs.
inline std::vector<double> cell_strain(const Lattice& lat, const DeformationField& field)
{
  if (field.u.size() != lat.nodes.size()) {
    throw InvalidInput("cell_strain: field does not belong to this lattice");
  }
  std::vector<double> spring_strain(lat.springs.size());
  for (std::size_t s = 0; s < lat.springs.size(); ++s) {
    const auto& sp = lat.springs[s];
    const auto a = static_cast<std::size_t>(sp.a);
    const auto b = static_cast<std::size_t>(sp.b);
    const double len = (lat.nodes[b].rest + field.u[b] - lat.nodes[a].rest - field.u[a]).norm();
    spring_strain[s] = std::abs(len - sp.rest_length) / sp.rest_length;
  }
  std::vector<double> out(static_cast<std::size_t>(lat.cfg.cell_count()), 0.0);
  for (int c = 0; c < lat.cfg.cell_count(); ++c) {
    const auto& ids = lat.cell_springs(c);
    double sum = 0.0;
    for (int s : ids) {
      sum += spring_strain[static_cast<std::size_t>(s)];
    }
    out[static_cast<std::size_t>(c)] = sum / static_cast<double>(ids.size());
  }
  return out;
}

/// Force the elastomer exerts on the indenter: the net spring force on the
/// indenter-pinned nodes. A pressed surface pushes back along +z; a
/// sheared patch pulls the indenter back against the shear.
inline Vec3 reaction_force(const Lattice& lat, const DeformationField& field)
{
  if (field.u.size() != lat.nodes.size()) {
    throw InvalidInput("reaction_force: field does not belong to this lattice");
  }
  const auto f = lattice_detail::spring_forces(lat, field.u);
  Vec3 total = Vec3::Zero();
  for (int n : field.contact_nodes) {
    total += f[static_cast<std::size_t>(n)];
  }
  return total;
}

/// Plain-text export, one record per line:
///   node <id> <x> <y> <z> <fixed>
///   spring <a> <b> <rest_length> <stiffness>
///   disp <id> <ux> <uy> <uz>
inline void export_text(std::ostream& os, const Lattice& lat, const DeformationField* field = nullptr)
{
  os.precision(9);
  for (std::size_t n = 0; n < lat.nodes.size(); ++n) {
    const auto& p = lat.nodes[n].rest;
    os << "node " << n << ' ' << p.x() << ' ' << p.y() << ' ' << p.z() << ' ' << (lat.nodes[n].fixed ? 1 : 0) << '\n';
  }
  for (const auto& s : lat.springs) {
    os << "spring " << s.a << ' ' << s.b << ' ' << s.rest_length << ' ' << s.stiffness << '\n';
  }
  if (field != nullptr) {
    for (std::size_t n = 0; n < field->u.size(); ++n) {
      const auto& u = field->u[n];
      os << "disp " << n << ' ' << u.x() << ' ' << u.y() << ' ' << u.z() << '\n';
    }
  }
}

} // namespace gridtac
