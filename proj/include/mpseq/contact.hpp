#ifndef MPSEQ_CONTACT_HPP_
#define MPSEQ_CONTACT_HPP_

#include <array>
#include <cmath>
#include <limits>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "mpseq/kinematics.hpp"

namespace mpseq {

using Rng = std::mt19937_64;

enum class Shape { Round, Square, Triangle };

inline std::string_view to_string(Shape s) {
  switch (s) {
    case Shape::Round: return "round";
    case Shape::Square: return "square";
    case Shape::Triangle: return "triangle";
  }
  return "?";
}

inline Shape shape_from_string(std::string_view s) {
  if (s == "round") return Shape::Round;
  if (s == "square") return Shape::Square;
  if (s == "triangle") return Shape::Triangle;
  throw std::invalid_argument("unknown shape '" + std::string(s) + "'");
}

// All lengths in meters. The hole frame is the world frame; the hole axis is +z.
struct TaskGeometry {
  Shape shape = Shape::Round;
  double hole_size = 0.030;  // diameter, side, or circumscribed diameter
  double clearance = 0.0001;
  double insertion_depth = 0.020;
  double plate_top_z = 0.0;
  double peg_length = 0.050;

  double peg_size() const { return hole_size - clearance; }
};

// One row of the pegs-and-holes dimension table, in the table's units.
struct GeometryPreset {
  std::string_view name;
  Shape shape;
  double hole_size_mm;
  double insertion_depth_mm;
  std::string_view material;
  double clearance_mm;
};

inline constexpr std::array<GeometryPreset, 4> kGeometryPresets{{
    {"round", Shape::Round, 30.0, 20.0, "aluminum", 0.1},
    {"round_tight", Shape::Round, 30.0, 20.0, "aluminum", 0.04},
    {"square", Shape::Square, 20.5, 20.0, "plastic", 1.0},
    {"triangle", Shape::Triangle, 25.1, 20.0, "plastic", 1.0},
}};

inline TaskGeometry geometry_from_preset(const GeometryPreset& p) {
  TaskGeometry g;
  g.shape = p.shape;
  g.hole_size = p.hole_size_mm / 1000.0;
  g.insertion_depth = p.insertion_depth_mm / 1000.0;
  g.clearance = p.clearance_mm / 1000.0;
  return g;
}

/// Looks up a preset row by name ("round", "round_tight", "square", "triangle").
inline TaskGeometry build_geometry(std::string_view name,
                                   std::span<const GeometryPreset> table = kGeometryPresets) {
  for (const auto& row : table)
    if (row.name == name) return geometry_from_preset(row);
  throw std::invalid_argument("unknown task preset '" + std::string(name) + "'");
}

/// First table row with the given shape (the round row is the 0.1 mm one).
inline TaskGeometry build_geometry(Shape shape,
                                   std::span<const GeometryPreset> table = kGeometryPresets) {
  for (const auto& row : table)
    if (row.shape == shape) return geometry_from_preset(row);
  throw std::invalid_argument("no preset for shape '" + std::string(to_string(shape)) + "'");
}

struct ContactConfig {
  double k_p = 1e5;     // N/m per sample point
  double k_v = 50.0;    // N s/m per sample point
  double mu = 0.3;
  int n_rim = 32;       // rim samples for round profiles
  int edge_points = 4;  // extra samples per polygon edge
  double f_noise_sigma = 0.05;
  double tau_noise_sigma = 0.005;
  double contact_eps = 0.5;
  double max_penetration = 0.002;
  double friction_v_reg = 1e-4;  // m/s, regularizes the Coulomb cone at rest
  double depth_tolerance = 0.0005;
  double chamfer = 0.001;  // 45 deg bevel on the hole's top edge, width in m
  double edge_blend = 1e-4;  // m, rounding of solid edges

  void validate() const {
    if (!(k_p > 0.0)) throw std::invalid_argument("contact: k_p must be > 0");
    if (!(k_v >= 0.0)) throw std::invalid_argument("contact: k_v must be >= 0");
    if (!(mu >= 0.0)) throw std::invalid_argument("contact: mu must be >= 0");
    if (n_rim < 8) throw std::invalid_argument("contact: n_rim must be >= 8");
    if (edge_points < 0) throw std::invalid_argument("contact: edge_points must be >= 0");
    if (!(edge_blend > 0.0)) throw std::invalid_argument("contact: edge_blend must be > 0");
    if (!(chamfer >= 0.0)) throw std::invalid_argument("contact: chamfer must be >= 0");
    if (!(contact_eps > 0.0)) throw std::invalid_argument("contact: contact_eps must be > 0");
    if (!(f_noise_sigma >= 0.0) || !(tau_noise_sigma >= 0.0))
      throw std::invalid_argument("contact: noise sigmas must be >= 0");
  }
};

// Convex cross-section in the xy plane, centered on the axis.
class Profile {
 public:
  static Profile make(Shape shape, double size) {
    Profile p;
    p.shape_ = shape;
    switch (shape) {
      case Shape::Round:
        p.radius_ = 0.5 * size;
        break;
      case Shape::Square: {
        const double h = 0.5 * size;
        p.vertices_ = {{h, h}, {-h, h}, {-h, -h}, {h, -h}};
        break;
      }
      case Shape::Triangle: {
        // Equilateral; size is the circumscribed-circle diameter.
        const double r = 0.5 * size;
        for (int i = 0; i < 3; ++i) {
          const double a = kPi / 2.0 + i * 2.0 * kPi / 3.0;
          p.vertices_.emplace_back(r * std::cos(a), r * std::sin(a));
        }
        break;
      }
    }
    const auto n = p.vertices_.size();
    for (std::size_t i = 0; i < n; ++i) {
      const Eigen::Vector2d e = p.vertices_[(i + 1) % n] - p.vertices_[i];
      const Eigen::Vector2d normal(e.y(), -e.x());
      p.normals_.push_back(normal.normalized());
      p.offsets_.push_back(p.normals_.back().dot(p.vertices_[i]));
    }
    return p;
  }

  Shape shape() const { return shape_; }

  /// Signed distance to the boundary (negative inside) and its gradient.
  double signed_distance(const Eigen::Vector2d& q, Eigen::Vector2d* grad) const {
    if (shape_ == Shape::Round) {
      const double r = q.norm();
      if (grad) *grad = r > 0.0 ? Eigen::Vector2d(q / r) : Eigen::Vector2d(1.0, 0.0);
      return r - radius_;
    }
    const auto n = vertices_.size();
    double best = -std::numeric_limits<double>::infinity();
    std::size_t arg = 0;
    for (std::size_t i = 0; i < n; ++i) {
      const double d = normals_[i].dot(q) - offsets_[i];
      if (d > best) {
        best = d;
        arg = i;
      }
    }
    if (best <= 0.0) {
      if (grad) *grad = normals_[arg];
      return best;
    }
    double dmin = std::numeric_limits<double>::infinity();
    Eigen::Vector2d closest = Eigen::Vector2d::Zero();
    for (std::size_t i = 0; i < n; ++i) {
      const Eigen::Vector2d a = vertices_[i];
      const Eigen::Vector2d e = vertices_[(i + 1) % n] - a;
      const double s = std::clamp((q - a).dot(e) / e.squaredNorm(), 0.0, 1.0);
      const Eigen::Vector2d c = a + s * e;
      const double d = (q - c).norm();
      if (d < dmin) {
        dmin = d;
        closest = c;
      }
    }
    if (grad) *grad = (q - closest) / dmin;
    return dmin;
  }

  bool contains(const Eigen::Vector2d& q, double tol = 0.0) const {
    return signed_distance(q, nullptr) <= tol;
  }

  /// Points on the boundary: n_circle for round, vertices plus per_edge for polygons.
  std::vector<Eigen::Vector2d> boundary_samples(int n_circle, int per_edge) const {
    std::vector<Eigen::Vector2d> out;
    if (shape_ == Shape::Round) {
      for (int i = 0; i < n_circle; ++i) {
        const double a = 2.0 * kPi * i / n_circle;
        out.emplace_back(radius_ * std::cos(a), radius_ * std::sin(a));
      }
      return out;
    }
    const auto n = vertices_.size();
    for (std::size_t i = 0; i < n; ++i) {
      const Eigen::Vector2d a = vertices_[i];
      const Eigen::Vector2d b = vertices_[(i + 1) % n];
      out.push_back(a);
      for (int k = 1; k <= per_edge; ++k) out.push_back(a + (b - a) * (double(k) / (per_edge + 1)));
    }
    return out;
  }

 private:
  Shape shape_ = Shape::Round;
  double radius_ = 0.0;
  std::vector<Eigen::Vector2d> vertices_;
  std::vector<Eigen::Vector2d> normals_;
  std::vector<double> offsets_;
};

struct ContactResult {
  Wrench wrench;      // on the peg, world axes, about the peg tip
  double depth = 0.0;
  int n_active = 0;
  // Linearization about the current state: dF ~= -stiffness * dx - damping * dv,
  // with dx, dv expressed as (linear, angular) at the tip.
  Matrix6d stiffness = Matrix6d::Zero();
  Matrix6d damping = Matrix6d::Zero();
};

// A single penetrating sample: world point, unit direction of the force on the
// peg, and penetration depth.
struct PointContact {
  Eigen::Vector3d point;
  Eigen::Vector3d normal;
  double penetration = 0.0;
};

struct FaceDepth {
  double depth;
  Eigen::Vector3d normal;
};

/// Point-sampled penalty contact between a prismatic peg and a plate with a
/// prismatic blind hole, its top edge beveled at 45 deg. Two sample sets are checked: the peg's bottom rim and
/// face center against the plate/hole solid, and the hole's top edge against
/// the peg body (catches side-wall wedging of a tilted peg).
class ContactModel {
 public:
  ContactModel() = default;
  ContactModel(const TaskGeometry& geom, const ContactConfig& cfg)
      : geom_(geom),
        cfg_(cfg),
        hole_(Profile::make(geom.shape, geom.hole_size)),
        peg_(Profile::make(geom.shape, geom.peg_size())) {
    if (!(geom.clearance > 0.0)) throw std::invalid_argument("geometry: clearance must be > 0");
    cfg.validate();
    for (const auto& q : peg_.boundary_samples(cfg.n_rim, cfg.edge_points))
      rim_.emplace_back(q.x(), q.y(), 0.0);
    n_rim_ = static_cast<int>(rim_.size());
    rim_.emplace_back(0.0, 0.0, 0.0);
    for (const auto& q : hole_.boundary_samples(2 * cfg.n_rim, cfg.edge_points * 2))
      edge_.emplace_back(q.x(), q.y(), geom.plate_top_z - cfg.chamfer);
    if (cfg.chamfer > 0.0) {
      // Outer lip of the bevel. A triangle's circumradius is twice its inradius.
      const double grow = geom.shape == Shape::Triangle ? 4.0 : 2.0;
      const Profile lip = Profile::make(geom.shape, geom.hole_size + grow * cfg.chamfer);
      for (const auto& q : lip.boundary_samples(2 * cfg.n_rim, cfg.edge_points * 2))
        edge_.emplace_back(q.x(), q.y(), geom.plate_top_z);
    }
  }

  const TaskGeometry& geometry() const { return geom_; }
  const ContactConfig& config() const { return cfg_; }
  const Profile& hole_profile() const { return hole_; }
  const Profile& peg_profile() const { return peg_; }
  std::span<const Eigen::Vector3d> rim_samples() const { return rim_; }
  std::span<const Eigen::Vector3d> edge_samples() const { return edge_; }

  /// Penetration of a world point into the plate/hole solid. Returns false when free.
  bool environment_penetration(const Eigen::Vector3d& x, PointContact* out) const {
    Eigen::Vector2d g;
    const double s = hole_.signed_distance(x.head<2>(), &g);
    const double z = x.z() - geom_.plate_top_z;
    const Eigen::Vector3d wall(-g.x(), -g.y(), 0.0);
    bool hit = false;
    if (s > 0.0 && z < 0.0) {
      // Plate around the hole: z < 0, s > 0 and z < s - chamfer.
      const double bevel = (s - cfg_.chamfer - z) * std::sqrt(0.5);
      if (bevel > 0.0) {
        const Eigen::Vector3d slope = Eigen::Vector3d(-g.x(), -g.y(), 1.0) * std::sqrt(0.5);
        const FaceDepth faces[] = {{-z, Eigen::Vector3d::UnitZ()}, {s, wall}, {bevel, slope}};
        *out = {x, Eigen::Vector3d::Zero(), 0.0};
        blend_faces(faces, &out->normal, &out->penetration);
        hit = true;
      }
    }
    const double below = -geom_.insertion_depth - z;
    if (below > 0.0 && (!hit || below > out->penetration)) {
      *out = {x, Eigen::Vector3d::UnitZ(), below};
      hit = true;
    }
    return hit;
  }

  /// Penetration of a fixed world point into the peg body at the given pose.
  bool peg_penetration(const Pose& peg, const Eigen::Matrix3d& r, const Eigen::Vector3d& x,
                       PointContact* out) const {
    const Eigen::Vector3d q = r.transpose() * (x - peg.translation);
    if (q.z() < 0.0 || q.z() > geom_.peg_length) return false;
    Eigen::Vector2d g;
    const double s = peg_.signed_distance(q.head<2>(), &g);
    if (s >= 0.0) return false;
    const FaceDepth faces[] = {{q.z(), r.col(2)}, {-s, -(r * Eigen::Vector3d(g.x(), g.y(), 0.0))}};
    *out = {x, Eigen::Vector3d::Zero(), 0.0};
    blend_faces(faces, &out->normal, &out->penetration);
    return true;
  }

  void collect(const Pose& peg, std::vector<PointContact>* out) const {
    out->clear();
    const Eigen::Matrix3d r = rotation_matrix(peg.rotation);
    PointContact c;
    for (const auto& p : rim_) {
      const Eigen::Vector3d x = peg.translation + r * p;
      if (environment_penetration(x, &c)) out->push_back(c);
    }
    for (const auto& e : edge_) {
      if (peg_penetration(peg, r, e, &c)) out->push_back(c);
    }
  }

  /// Static-plus-viscous force on the peg at one contact sample.
  Eigen::Vector3d point_force(const PointContact& c, const Eigen::Vector3d& u, double* fn_out) const {
    const double delta = std::min(c.penetration, cfg_.max_penetration);
    double fn = cfg_.k_p * delta - cfg_.k_v * u.dot(c.normal);
    fn = std::max(fn, 0.0);
    if (fn_out) *fn_out = fn;
    Eigen::Vector3d f = fn * c.normal;
    const Eigen::Vector3d ut = u - u.dot(c.normal) * c.normal;
    const double vt = ut.norm();
    if (fn > 0.0 && vt > 0.0 && cfg_.mu > 0.0)
      f -= cfg_.mu * fn * ut / std::max(vt, cfg_.friction_v_reg);
    return f;
  }

  ContactResult evaluate(const Pose& peg, const Twist& twist) const {
    ContactResult res;
    thread_local std::vector<PointContact> contacts;
    collect(peg, &contacts);
    for (const auto& c : contacts) {
      const Eigen::Vector3d arm = c.point - peg.translation;
      const Eigen::Vector3d u = twist.linear + twist.angular.cross(arm);
      double fn = 0.0;
      const Eigen::Vector3d f = point_force(c, u, &fn);
      if (fn <= 0.0) continue;
      ++res.n_active;
      res.wrench.force += f;
      res.wrench.torque += arm.cross(f);

      // Point Jacobian G = [I, -[arm]x]; wrench map is G^T.
      Eigen::Matrix<double, 3, 6> jac;
      jac << Eigen::Matrix3d::Identity(), -skew(arm);
      const Eigen::Matrix3d nn = c.normal * c.normal.transpose();
      if (c.penetration < cfg_.max_penetration)
        res.stiffness.noalias() += cfg_.k_p * jac.transpose() * nn * jac;
      Eigen::Matrix3d d = cfg_.k_v * nn;
      if (cfg_.mu > 0.0) {
        const Eigen::Vector3d ut = u - u.dot(c.normal) * c.normal;
        const double vt = ut.norm();
        const Eigen::Matrix3d tangential = Eigen::Matrix3d::Identity() - nn;
        if (vt < cfg_.friction_v_reg) {
          d += cfg_.mu * fn / cfg_.friction_v_reg * tangential;
        } else {
          const Eigen::Vector3d t = ut / vt;
          d += cfg_.mu * fn / vt * (tangential - t * t.transpose());
        }
      }
      res.damping.noalias() += jac.transpose() * d * jac;
    }
    res.depth = insertion_depth(peg);
    return res;
  }

  /// Depth of the lowest rim point below the plate top, counted only when
  /// every rim point lies within the hole cross-section.
  double insertion_depth(const Pose& peg) const {
    const Eigen::Matrix3d r = rotation_matrix(peg.rotation);
    double lowest = std::numeric_limits<double>::infinity();
    for (int i = 0; i < n_rim_; ++i) {
      const Eigen::Vector3d x = peg.translation + r * rim_[i];
      if (!hole_.contains(x.head<2>(), cfg_.depth_tolerance)) return 0.0;
      lowest = std::min(lowest, x.z());
    }
    return std::max(0.0, geom_.plate_top_z - lowest);
  }

 private:
  // Depth of the nearest face; normals of faces within edge_blend of it are
  // mixed in, which rounds the edges and keeps the force continuous.
  void blend_faces(std::span<const FaceDepth> faces, Eigen::Vector3d* n, double* depth) const {
    double d = std::numeric_limits<double>::infinity();
    for (const auto& f : faces) d = std::min(d, f.depth);
    Eigen::Vector3d sum = Eigen::Vector3d::Zero();
    for (const auto& f : faces) {
      const double w = std::max(0.0, 1.0 - (f.depth - d) / cfg_.edge_blend);
      sum += w * w * f.normal;
    }
    *n = sum.normalized();
    *depth = d;
  }

  TaskGeometry geom_;
  ContactConfig cfg_;
  Profile hole_;
  Profile peg_;
  std::vector<Eigen::Vector3d> rim_;  // peg frame; last entry is the face center
  int n_rim_ = 0;
  std::vector<Eigen::Vector3d> edge_;  // world frame
};

inline ContactResult contact_wrench(const TaskGeometry& geom, const Pose& peg_pose,
                                    const Twist& peg_twist, const ContactConfig& cfg) {
  return ContactModel(geom, cfg).evaluate(peg_pose, peg_twist);
}

/// True wrench plus zero-mean Gaussian noise on each axis.
inline Wrench sense_wrench(const ContactResult& truth, const ContactConfig& cfg, Rng& rng) {
  std::normal_distribution<double> n01(0.0, 1.0);
  Wrench w = truth.wrench;
  for (int i = 0; i < 3; ++i) w.force[i] += cfg.f_noise_sigma * n01(rng);
  for (int i = 0; i < 3; ++i) w.torque[i] += cfg.tau_noise_sigma * n01(rng);
  return w;
}

inline bool in_contact(const Wrench& w, const ContactConfig& cfg) {
  return w.force.norm() > cfg.contact_eps || w.torque.norm() > cfg.contact_eps * 0.1;
}

}  // namespace mpseq

#endif  // MPSEQ_CONTACT_HPP_
