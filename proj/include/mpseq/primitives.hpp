#ifndef MPSEQ_PRIMITIVES_HPP_
#define MPSEQ_PRIMITIVES_HPP_

#include <string>
#include <string_view>
#include <vector>

#include "mpseq/kinematics.hpp"

namespace mpseq {

enum class Family { FreeSpace, InContact };
enum class Archetype { TranslateUntilContact, Translate, RotateUntilContact, Rotate, Insert };
enum class StopKind { ForceThreshold, DistanceReached, PoseReached };
enum class MpStatus { Success, Failure, Continue };

inline std::string_view to_string(Family f) {
  return f == Family::FreeSpace ? "free" : "contact";
}

inline std::string_view to_string(Archetype a) {
  switch (a) {
    case Archetype::TranslateUntilContact: return "Tc";
    case Archetype::Translate: return "T";
    case Archetype::RotateUntilContact: return "Rc";
    case Archetype::Rotate: return "R";
    case Archetype::Insert: return "I";
  }
  return "?";
}

inline std::string_view to_string(MpStatus s) {
  switch (s) {
    case MpStatus::Success: return "SUCCESS";
    case MpStatus::Failure: return "FAILURE";
    case MpStatus::Continue: return "CONTINUE";
  }
  return "?";
}

// Signed task-frame direction: index 0-2 linear x,y,z; 3-5 angular x,y,z.
struct Axis {
  int index = 2;
  int sign = -1;

  bool angular() const { return index >= 3; }
  Vector6d unit() const {
    Vector6d u = Vector6d::Zero();
    u[index] = sign;
    return u;
  }
  std::string name() const {
    std::string s = sign > 0 ? "+" : "-";
    s += "xyz"[index % 3];
    return s;
  }
  bool operator==(const Axis&) const = default;
};

// Fields not relevant to the kind stay at zero.
struct StopSpec {
  StopKind kind = StopKind::ForceThreshold;
  double f_thr = 0.0;   // N or N m along the motion direction
  double d = 0.0;       // m or rad
  double eps = 0.0;     // m, insert pose tolerance
  double timeout = 2.0; // s
};

struct ManipulationPrimitive {
  int id = 0;
  Family family = Family::FreeSpace;
  Archetype archetype = Archetype::TranslateUntilContact;
  Axis axis;
  double speed = 0.0;  // m/s or rad/s
  double f_d = 0.0;    // N along z, in-contact only
  double k_dt = 0.0;   // insert compliance, (m/s)/N
  double k_dr = 0.0;   // insert compliance, (rad/s)/(N m)
  StopSpec stop;

  std::string label() const;
};

struct Catalog {
  std::vector<ManipulationPrimitive> primitives;
  std::vector<int> free_indices;
  std::vector<int> contact_indices;

  const ManipulationPrimitive& operator[](int id) const { return primitives.at(id); }
  std::size_t size() const { return primitives.size(); }
};

inline std::string ManipulationPrimitive::label() const {
  auto num = [](double v) {
    std::string s = std::to_string(v);
    s.erase(s.find_last_not_of('0') + 1);
    if (!s.empty() && s.back() == '.') s.pop_back();
    return s;
  };
  std::string s = std::string(to_string(family)) + ":" + std::string(to_string(archetype));
  if (archetype == Archetype::Insert)
    return s + "(kdr=" + num(k_dr) + ",fd=" + num(f_d) + ")";
  s += axis.name();
  const bool ang = axis.angular();
  if (stop.kind == StopKind::DistanceReached)
    s += "(" + num(stop.d / (ang ? kDeg : kMm)) + (ang ? "deg" : "mm") + ")";
  else
    s += "(v=" + num(speed / (ang ? kDeg : kMm)) + ",thr=" + num(stop.f_thr) + ")";
  return s;
}

// Stop timeouts: 2 s where the until-contact and insert conditions state one;
// 3 s added for fixed-distance moves so that every primitive terminates.
inline constexpr double kUntilContactTimeout = 2.0;
inline constexpr double kDistanceTimeout = 3.0;

/// Expands the 8 rows of the primitive table into 89 entries, free-space
/// first. Axis order within a row: +x, -x, +y, -y, +z, -z.
inline Catalog build_catalog() {
  Catalog cat;
  auto add = [&](ManipulationPrimitive mp) {
    mp.id = static_cast<int>(cat.primitives.size());
    (mp.family == Family::FreeSpace ? cat.free_indices : cat.contact_indices).push_back(mp.id);
    cat.primitives.push_back(mp);
  };
  auto axes = [](bool linear, int n_dims) {
    std::vector<Axis> out;
    for (int k = 0; k < n_dims; ++k)
      for (int sign : {+1, -1}) out.push_back({(linear ? 0 : 3) + k, sign});
    return out;
  };

  // Free space, translate until contact.
  {
    ManipulationPrimitive mp;
    mp.family = Family::FreeSpace;
    mp.archetype = Archetype::TranslateUntilContact;
    mp.axis = {2, -1};
    mp.speed = 10.0 * kMm;
    mp.stop = {StopKind::ForceThreshold, 8.0, 0.0, 0.0, kUntilContactTimeout};
    add(mp);
  }
  // Free space, translate.
  for (const Axis& ax : axes(true, 3))
    for (double d : {2.0, 4.0}) {
      ManipulationPrimitive mp;
      mp.family = Family::FreeSpace;
      mp.archetype = Archetype::Translate;
      mp.axis = ax;
      mp.speed = 10.0 * kMm;
      mp.stop = {StopKind::DistanceReached, 15.0, d * kMm, 0.0, kDistanceTimeout};
      add(mp);
    }
  // Free space, rotate.
  for (const Axis& ax : axes(false, 3))
    for (double d : {2.0, 4.0}) {
      ManipulationPrimitive mp;
      mp.family = Family::FreeSpace;
      mp.archetype = Archetype::Rotate;
      mp.axis = ax;
      mp.speed = 9.0 * kDeg;
      mp.stop = {StopKind::DistanceReached, 1.0, d * kDeg, 0.0, kDistanceTimeout};
      add(mp);
    }
  // In contact, translate until next contact.
  for (const Axis& ax : axes(true, 2))
    for (double v : {4.0, 7.5})
      for (double thr : {8.0, 15.0}) {
        ManipulationPrimitive mp;
        mp.family = Family::InContact;
        mp.archetype = Archetype::TranslateUntilContact;
        mp.axis = ax;
        mp.speed = v * kMm;
        mp.f_d = -3.0;
        mp.stop = {StopKind::ForceThreshold, thr, 0.0, 0.0, kUntilContactTimeout};
        add(mp);
      }
  // In contact, rotate until next contact.
  for (const Axis& ax : axes(false, 3))
    for (double v : {4.0, 7.0})
      for (double thr : {0.1, 0.5}) {
        ManipulationPrimitive mp;
        mp.family = Family::InContact;
        mp.archetype = Archetype::RotateUntilContact;
        mp.axis = ax;
        mp.speed = v * kDeg;
        mp.f_d = -3.0;
        mp.stop = {StopKind::ForceThreshold, thr, 0.0, 0.0, kUntilContactTimeout};
        add(mp);
      }
  // In contact, translate.
  for (const Axis& ax : axes(true, 2))
    for (double d : {2.0, 4.0}) {
      ManipulationPrimitive mp;
      mp.family = Family::InContact;
      mp.archetype = Archetype::Translate;
      mp.axis = ax;
      mp.speed = 10.0 * kMm;
      mp.f_d = -3.0;
      mp.stop = {StopKind::DistanceReached, 15.0, d * kMm, 0.0, kDistanceTimeout};
      add(mp);
    }
  // In contact, rotate.
  for (const Axis& ax : axes(false, 3))
    for (double d : {2.0, 4.0}) {
      ManipulationPrimitive mp;
      mp.family = Family::InContact;
      mp.archetype = Archetype::Rotate;
      mp.axis = ax;
      mp.speed = 4.6 * kDeg;
      mp.f_d = -3.0;
      mp.stop = {StopKind::DistanceReached, 1.0, d * kDeg, 0.0, kDistanceTimeout};
      add(mp);
    }
  // Insert.
  for (double kdr : {0.05, 0.1})
    for (double fd : {-5.0, -12.0}) {
      ManipulationPrimitive mp;
      mp.family = Family::InContact;
      mp.archetype = Archetype::Insert;
      mp.axis = {2, -1};
      mp.f_d = fd;
      mp.k_dt = 0.01;
      mp.k_dr = kdr;
      mp.stop = {StopKind::PoseReached, 0.0, 0.0, 2.0 * kMm, kUntilContactTimeout};
      add(mp);
    }
  return cat;
}

/// Measured signals handed to a primitive. The pose is the peg tip in the
/// task frame; the wrench is the one the tool exerts on the environment,
/// expressed in task-frame axes about the tip (pressing down reads -z).
struct SensorSnapshot {
  Pose pose;
  Wrench wrench;
  double t = 0.0;
};

struct DesiredSignals {
  Twist twist;
  Wrench wrench;
};

/// Commanded twist and wrench of a primitive for the current measurements.
/// Insert regulates the measured wrench to zero on every axis but the
/// insertion axis, which is force tracked instead.
inline DesiredSignals desired_signals(const ManipulationPrimitive& mp, const SensorSnapshot& s) {
  DesiredSignals out;
  if (mp.archetype == Archetype::Insert) {
    Vector6d kd;
    kd << mp.k_dt, mp.k_dt, 0.0, mp.k_dr, mp.k_dr, mp.k_dr;
    out.twist = Twist::from_vector(-kd.cwiseProduct(s.wrench.vector()));
    out.wrench.force.z() = mp.f_d;
    return out;
  }
  out.twist = Twist::from_vector(mp.speed * mp.axis.unit());
  if (mp.family == Family::InContact) out.wrench.force.z() = mp.f_d;
  return out;
}

/// Projection of the measured force (linear axes) or torque (angular axes)
/// on the motion direction.
inline double projected_reaction(const ManipulationPrimitive& mp, const Wrench& w) {
  return w.vector().dot(mp.axis.unit());
}

/// Stop condition. `progress` is the (translation, rotation-vector) change of
/// the tip since the primitive started, in task-frame axes; `goal` is the
/// insert target in the task frame. SUCCESS is checked before FAILURE.
inline MpStatus evaluate_stop(const ManipulationPrimitive& mp, double elapsed,
                              const SensorSnapshot& s, const Vector6d& progress,
                              const Pose& goal, double w_rot = kDefaultRotWeight) {
  const StopSpec& st = mp.stop;
  switch (mp.archetype) {
    case Archetype::TranslateUntilContact:
    case Archetype::RotateUntilContact:
      if (projected_reaction(mp, s.wrench) > st.f_thr) return MpStatus::Success;
      if (elapsed > st.timeout) return MpStatus::Failure;
      return MpStatus::Continue;
    case Archetype::Translate:
    case Archetype::Rotate:
      if (progress.dot(mp.axis.unit()) > st.d) return MpStatus::Success;
      if (projected_reaction(mp, s.wrench) > st.f_thr) return MpStatus::Failure;
      if (elapsed > st.timeout) return MpStatus::Failure;
      return MpStatus::Continue;
    case Archetype::Insert:
      if (pose_distance(s.pose, goal, w_rot) < st.eps) return MpStatus::Success;
      if (elapsed > st.timeout) return MpStatus::Failure;
      return MpStatus::Continue;
  }
  return MpStatus::Continue;
}

}  // namespace mpseq

#endif  // MPSEQ_PRIMITIVES_HPP_
