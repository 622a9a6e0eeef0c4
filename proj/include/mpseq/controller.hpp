#ifndef MPSEQ_CONTROLLER_HPP_
#define MPSEQ_CONTROLLER_HPP_

#include <cmath>
#include <functional>
#include <stdexcept>

#include "mpseq/contact.hpp"
#include "mpseq/kinematics.hpp"
#include "mpseq/primitives.hpp"

namespace mpseq {

struct ControllerConfig {
  double dt = 0.002;
  double k_adm_t = 2e-3;  // (m/s)/N
  double k_adm_r = 0.1;   // (rad/s)/(N m)
  double v_max = 0.020;
  double w_max = 20.0 * kDeg;
  double f_abort = 40.0;
  int abort_ticks = 3;    // consecutive ticks above f_abort before aborting
  int settle_ticks = 25;

  void validate() const {
    if (!(dt > 0.0)) throw std::invalid_argument("controller: dt must be > 0");
    if (!(k_adm_t >= 0.0) || !(k_adm_r >= 0.0))
      throw std::invalid_argument("controller: admittance gains must be >= 0");
    if (!(v_max > 0.0) || !(w_max > 0.0))
      throw std::invalid_argument("controller: velocity limits must be > 0");
    if (!(f_abort > 15.0)) throw std::invalid_argument("controller: f_abort must exceed every f_thr");
    if (abort_ticks < 1 || settle_ticks < 1)
      throw std::invalid_argument("controller: tick counts must be >= 1");
  }
};

/// Plant state: the peg tip in the true hole frame plus the estimated hole
/// frame that all commands and measurements are expressed in.
class World {
 public:
  World() = default;
  World(const TaskGeometry& geom, const ContactConfig& contact, const Pose& hole_estimate,
        const Pose& peg_tip)
      : model_(geom, contact), estimate_(hole_estimate), peg_(peg_tip) {
    est_rot_ = rotation_matrix(estimate_.rotation);
  }

  const ContactModel& model() const { return model_; }
  const TaskGeometry& geometry() const { return model_.geometry(); }
  const ContactConfig& contact_config() const { return model_.config(); }
  const Pose& peg() const { return peg_; }
  const Pose& hole_estimate() const { return estimate_; }
  const Twist& last_twist() const { return twist_; }
  void set_peg(const Pose& p) { peg_ = p; }
  void stop() { twist_ = {}; }

  ContactResult contact() const { return model_.evaluate(peg_, twist_); }
  double true_depth() const { return model_.insertion_depth(peg_); }

  Pose task_pose() const { return compose(inverse(estimate_), peg_); }

  /// Converts an on-peg world wrench into the tool-applied wrench in task axes.
  Wrench to_task_applied(const Wrench& on_peg) const {
    return {-(est_rot_.transpose() * on_peg.force), -(est_rot_.transpose() * on_peg.torque)};
  }

  /// Rotates a 6x6 world-frame linearization into task axes.
  Matrix6d to_task(const Matrix6d& m) const {
    Matrix6d r = Matrix6d::Zero();
    r.topLeftCorner<3, 3>() = est_rot_;
    r.bottomRightCorner<3, 3>() = est_rot_;
    return r.transpose() * m * r;
  }

  SensorSnapshot sense(const ContactResult& truth, Rng& rng, double t) const {
    return {task_pose(), to_task_applied(sense_wrench(truth, model_.config(), rng)), t};
  }

  /// Moves the peg with a task-frame twist held for dt.
  void apply(const Twist& task_twist, double dt) {
    twist_ = {est_rot_ * task_twist.linear, est_rot_ * task_twist.angular};
    peg_ = integrate(peg_, twist_, dt);
  }

 private:
  ContactModel model_;
  Pose estimate_;
  Eigen::Matrix3d est_rot_ = Eigen::Matrix3d::Identity();
  Pose peg_;
  Twist twist_;
};

struct TraceRecord {
  double t = 0.0;
  Pose pose;
  Wrench wrench;
  Twist twist;
};
using TraceSink = std::function<void(const TraceRecord&)>;

struct MpOutcome {
  MpStatus status = MpStatus::Failure;
  double duration = 0.0;
  SensorSnapshot end_snapshot;
  int ticks = 0;
  bool aborted = false;
};

inline Twist clamp_twist(const Twist& v, const ControllerConfig& cfg) {
  Twist out = v;
  const double nl = out.linear.norm();
  if (nl > cfg.v_max) out.linear *= cfg.v_max / nl;
  const double na = out.angular.norm();
  if (na > cfg.w_max) out.angular *= cfg.w_max / na;
  return out;
}

/// One admittance update v = v0 + A (f_ref - f), solved linearly-implicitly
/// against the contact stiffness and damping so the loop stays stable for
/// any number of active contact points. `explicit_cmd` is v0 + A (f_ref - f)
/// evaluated with the measured wrench; `gains` is the diagonal of A.
inline Twist implicit_admittance(const World& world, const ContactResult& truth,
                                 const Vector6d& explicit_cmd, const Vector6d& gains,
                                 const ControllerConfig& cfg) {
  if (gains.isZero(0.0) || truth.n_active == 0) return Twist::from_vector(explicit_cmd);
  const Matrix6d k = world.to_task(truth.stiffness);
  const Matrix6d d = world.to_task(truth.damping);
  const Twist& prev_w = world.last_twist();
  const Matrix6d rot_t = [&] {
    Matrix6d r = Matrix6d::Zero();
    const Eigen::Matrix3d e = rotation_matrix(world.hole_estimate().rotation);
    r.topLeftCorner<3, 3>() = e.transpose();
    r.bottomRightCorner<3, 3>() = e.transpose();
    return r;
  }();
  const Vector6d prev = rot_t * prev_w.vector();
  const Matrix6d lhs = Matrix6d::Identity() + gains.asDiagonal() * (k * cfg.dt + d);
  const Vector6d rhs = explicit_cmd + gains.asDiagonal() * (d * prev);
  return Twist::from_vector(lhs.partialPivLu().solve(rhs));
}

/// Feedback gain diagonal of a primitive: force-tracked axes for ordinary
/// primitives, full compliance plus z tracking for insert.
inline Vector6d feedback_gains(const ManipulationPrimitive& mp, const Wrench& f_des,
                               const ControllerConfig& cfg) {
  Vector6d g = Vector6d::Zero();
  if (mp.archetype == Archetype::Insert) {
    g << mp.k_dt, mp.k_dt, cfg.k_adm_t, mp.k_dr, mp.k_dr, mp.k_dr;
    return g;
  }
  const Vector6d fd = f_des.vector();
  for (int i = 0; i < 6; ++i)
    if (fd[i] != 0.0) g[i] = i < 3 ? cfg.k_adm_t : cfg.k_adm_r;
  // In contact, translations without a commanded velocity follow the
  // desired wrench (zero where unset) instead of holding position.
  if (mp.family == Family::InContact)
    for (int i = 0; i < 3; ++i)
      if (i != mp.axis.index) g[i] = cfg.k_adm_t;
  return g;
}

inline Vector6d task_progress(const Pose& start, const Pose& now) {
  Vector6d p;
  p.head<3>() = now.translation - start.translation;
  p.tail<3>() = rotation_vector(rotation_matrix(now.rotation) *
                                rotation_matrix(start.rotation).transpose());
  return p;
}

/// Runs one primitive at the control rate until its stop condition fires or
/// the safety limit trips. `goal` is the insert target in the task frame.
inline MpOutcome execute_mp(World& world, const ManipulationPrimitive& mp,
                            const ControllerConfig& cfg, Rng& rng, const Pose& goal,
                            double w_rot = kDefaultRotWeight, const TraceSink* trace = nullptr) {
  MpOutcome out;
  const Pose start = world.task_pose();
  int over_limit = 0;
  for (int tick = 0;; ++tick) {
    const double t = tick * cfg.dt;
    const ContactResult truth = world.contact();
    const SensorSnapshot snap = world.sense(truth, rng, t);
    const MpStatus status = evaluate_stop(mp, t, snap, task_progress(start, snap.pose), goal, w_rot);
    if (status != MpStatus::Continue) {
      out.status = status;
      out.ticks = tick;
      out.duration = t;
      out.end_snapshot = snap;
      return out;
    }
    over_limit = snap.wrench.force.norm() > cfg.f_abort ? over_limit + 1 : 0;
    if (over_limit >= cfg.abort_ticks) {
      out.status = MpStatus::Failure;
      out.aborted = true;
      out.ticks = tick;
      out.duration = t;
      out.end_snapshot = snap;
      world.stop();
      return out;
    }

    const DesiredSignals ds = desired_signals(mp, snap);
    const Vector6d gains = feedback_gains(mp, ds.wrench, cfg);
    Vector6d cmd = ds.twist.vector();
    // Insert's compliance already sits in ds.twist; only z is tracked here.
    Vector6d track = gains;
    if (mp.archetype == Archetype::Insert) track << 0, 0, cfg.k_adm_t, 0, 0, 0;
    cmd += track.cwiseProduct(ds.wrench.vector() - snap.wrench.vector());
    const Twist v = clamp_twist(implicit_admittance(world, truth, cmd, gains, cfg), cfg);
    if (trace && *trace) (*trace)({t, snap.pose, snap.wrench, v});
    world.apply(v, cfg.dt);
  }
}

/// Holds still with force regulation off and returns the final measurement.
inline SensorSnapshot settle(World& world, const ControllerConfig& cfg, Rng& rng) {
  world.stop();
  SensorSnapshot snap;
  const ContactResult truth = world.contact();
  for (int i = 0; i < cfg.settle_ticks; ++i) {
    snap = world.sense(truth, rng, (i + 1) * cfg.dt);
  }
  return snap;
}

}  // namespace mpseq

#endif  // MPSEQ_CONTROLLER_HPP_
