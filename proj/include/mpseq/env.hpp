#ifndef MPSEQ_ENV_HPP_
#define MPSEQ_ENV_HPP_

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "mpseq/contact.hpp"
#include "mpseq/controller.hpp"
#include "mpseq/kinematics.hpp"
#include "mpseq/primitives.hpp"

namespace mpseq {

enum class Sampling { UniformInBox, OnBoundary };

inline std::string_view to_string(Sampling s) {
  return s == Sampling::UniformInBox ? "uniform" : "boundary";
}

// Half-widths in mm / deg, applied to each of the six pose components.
struct PerturbationSpec {
  std::string name = "custom";
  double init_pos_mm = 0.0;
  double init_rot_deg = 0.0;
  double hole_pos_mm = 0.0;
  double hole_rot_deg = 0.0;
  Sampling sampling = Sampling::UniformInBox;
};

/// Samples a (mm, mm, mm, deg, deg, deg) offset inside the box, or on its
/// boundary by stretching the largest normalized component to +-1.
inline Vector6d sample_offset(double pos_half, double rot_half, Sampling sampling, Rng& rng) {
  Vector6d half;
  half << pos_half, pos_half, pos_half, rot_half, rot_half, rot_half;
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Vector6d n;
  for (int i = 0; i < 6; ++i) n[i] = u(rng);
  if (sampling == Sampling::OnBoundary) {
    int arg = -1;
    double best = -1.0;
    for (int i = 0; i < 6; ++i)
      if (half[i] > 0.0 && std::abs(n[i]) > best) {
        best = std::abs(n[i]);
        arg = i;
      }
    if (arg >= 0) n[arg] = n[arg] < 0.0 ? -1.0 : 1.0;
  }
  return n.cwiseProduct(half);
}

inline Pose offset_to_pose(const Vector6d& mm_deg) {
  return {mm_deg.head<3>() / 1000.0, mm_deg.tail<3>() * kDeg};
}

struct TaskSpec {
  std::string name = "round";
  TaskGeometry geometry;
  ContactConfig contact;
};

struct RewardConfig {
  double c1 = 1.0;
  double c2 = 0.1;
  double c3 = 0.5;
  double k1 = 0.020 * 0.020;  // m^2
  double w_rot = kDefaultRotWeight;
};

struct EnvConfig {
  ControllerConfig controller;
  RewardConfig reward;
  int max_steps = 20;
  double success_fraction = 0.9;
  double start_height = 0.010;
  double gamma = 0.99;
};

struct EnvState {
  Pose p;
  Wrench f_ext;
  bool contact = false;
  int step_index = 0;
};

enum class EpisodeOutcome { Running, Success, FailureTimeout, FailureAbort };

inline std::string_view to_string(EpisodeOutcome o) {
  switch (o) {
    case EpisodeOutcome::Running: return "RUNNING";
    case EpisodeOutcome::Success: return "SUCCESS";
    case EpisodeOutcome::FailureTimeout: return "FAILURE_TIMEOUT";
    case EpisodeOutcome::FailureAbort: return "FAILURE_ABORT";
  }
  return "?";
}

struct StepLog {
  int mp = 0;
  MpStatus status = MpStatus::Failure;
  double duration = 0.0;
  double reward = 0.0;
};

struct EpisodeRecord {
  std::string condition;
  std::string task;
  std::uint64_t noise_seed = 0;
  Vector6d dp_init = Vector6d::Zero();  // mm, deg
  Vector6d dp_hole = Vector6d::Zero();  // mm, deg
  std::vector<StepLog> steps;
  EpisodeOutcome outcome = EpisodeOutcome::Running;
  double total_return = 0.0;
  double final_depth = 0.0;

  double wall_time() const {
    double t = 0.0;
    for (const auto& s : steps) t += s.duration;
    return t;
  }
};

struct StepResult {
  EnvState state;
  double reward = 0.0;
  bool done = false;
  EpisodeOutcome outcome = EpisodeOutcome::Running;
  MpOutcome mp;
};

inline const std::vector<int>& feasible_actions(const EnvState& s, const Catalog& cat) {
  return s.contact ? cat.contact_indices : cat.free_indices;
}

inline bool episode_success(double true_depth, const TaskGeometry& geom, double fraction = 0.9) {
  return true_depth >= fraction * geom.insertion_depth;
}

inline bool episode_success(const World& world, const TaskGeometry& geom, double fraction = 0.9) {
  return episode_success(world.true_depth(), geom, fraction);
}

/// Reward of one transition: closeness to the goal, minus primitive
/// duration, minus c3 when the primitive failed.
inline double transition_reward(const RewardConfig& rc, const Pose& p_next, const Pose& goal,
                                 double duration, MpStatus status) {
  const double d = pose_distance(p_next, goal, rc.w_rot);
  const double s = status == MpStatus::Success ? 0.0 : -1.0;
  return rc.c1 * (std::exp(-d * d / rc.k1) - 1.0) - rc.c2 * duration + rc.c3 * s;
}

/// Episodic peg-in-hole MDP over primitive indices. The true hole frame is
/// the world frame; the agent only sees poses relative to the estimate.
class PegEnv {
 public:
  PegEnv(TaskSpec task, const Catalog& catalog, EnvConfig cfg = {})
      : task_(std::move(task)), catalog_(&catalog), cfg_(cfg) {
    task_.contact.validate();
    cfg_.controller.validate();
    goal_.translation = {0.0, 0.0, task_.geometry.plate_top_z - task_.geometry.insertion_depth};
  }

  const TaskSpec& task() const { return task_; }
  const EnvConfig& config() const { return cfg_; }
  const Catalog& catalog() const { return *catalog_; }
  const Pose& goal() const { return goal_; }
  const EnvState& state() const { return state_; }
  const World& world() const { return world_; }
  const EpisodeRecord& record() const { return record_; }
  bool done() const { return done_; }

  EnvState reset(const PerturbationSpec& perturb, Rng& rng) {
    const Vector6d dp_init = sample_offset(perturb.init_pos_mm, perturb.init_rot_deg, perturb.sampling, rng);
    const Vector6d dp_hole = sample_offset(perturb.hole_pos_mm, perturb.hole_rot_deg, perturb.sampling, rng);
    const std::uint64_t noise_seed = rng();
    return reset_with(perturb.name, dp_init, dp_hole, noise_seed);
  }

  /// Deterministic reset from explicit offsets; used by replay.
  EnvState reset_with(const std::string& condition, const Vector6d& dp_init_mm_deg,
                      const Vector6d& dp_hole_mm_deg, std::uint64_t noise_seed) {
    const Pose estimate = offset_to_pose(dp_hole_mm_deg);
    Pose rel = offset_to_pose(dp_init_mm_deg);
    rel.translation.z() += task_.geometry.plate_top_z + cfg_.start_height;
    world_ = World(task_.geometry, task_.contact, estimate, compose(estimate, rel));
    noise_ = Rng(noise_seed);
    record_ = {};
    record_.condition = condition;
    record_.task = task_.name;
    record_.noise_seed = noise_seed;
    record_.dp_init = dp_init_mm_deg;
    record_.dp_hole = dp_hole_mm_deg;
    discount_ = 1.0;
    done_ = false;
    const SensorSnapshot snap = world_.sense(world_.contact(), noise_, 0.0);
    state_ = {snap.pose, snap.wrench, in_contact(snap.wrench, task_.contact), 0};
    return state_;
  }

  /// Observation fed to the networks: tip pose minus the goal pose.
  Vector6d observation() const { return observation(state_); }
  Vector6d observation(const EnvState& s) const {
    Vector6d o;
    o.head<3>() = s.p.translation - goal_.translation;
    o.tail<3>() = s.p.rotation;
    return o;
  }

  StepResult step(int action, const TraceSink* trace = nullptr) {
    if (done_) throw std::logic_error("step called on a finished episode");
    const auto& feasible = feasible_actions(state_, *catalog_);
    if (std::find(feasible.begin(), feasible.end(), action) == feasible.end())
      throw std::invalid_argument("action " + std::to_string(action) + " is not feasible in the " +
                                  (state_.contact ? "in-contact" : "free-space") + " state");
    return step_with((*catalog_)[action], action, trace);
  }

  /// Executes an arbitrary primitive without contact gating; `log_id` is what
  /// the episode record stores for it (-1 for primitives outside the catalog).
  StepResult step_with(const ManipulationPrimitive& mp, int log_id, const TraceSink* trace = nullptr) {
    if (done_) throw std::logic_error("step called on a finished episode");
    StepResult r;
    r.mp = execute_mp(world_, mp, cfg_.controller, noise_, goal_, cfg_.reward.w_rot, trace);
    const SensorSnapshot snap = settle(world_, cfg_.controller, noise_);
    r.state = {snap.pose, snap.wrench, in_contact(snap.wrench, task_.contact), state_.step_index + 1};
    r.reward = transition_reward(cfg_.reward, r.state.p, goal_, r.mp.duration, r.mp.status);

    const double depth = world_.true_depth();
    if (episode_success(depth, task_.geometry, cfg_.success_fraction)) {
      r.outcome = EpisodeOutcome::Success;
    } else if (r.mp.aborted) {
      r.outcome = EpisodeOutcome::FailureAbort;
    } else if (r.state.step_index >= cfg_.max_steps) {
      r.outcome = EpisodeOutcome::FailureTimeout;
    }
    r.done = r.outcome != EpisodeOutcome::Running;

    record_.steps.push_back({log_id, r.mp.status, r.mp.duration, r.reward});
    record_.total_return += discount_ * r.reward;
    discount_ *= cfg_.gamma;
    record_.outcome = r.outcome;
    record_.final_depth = depth;
    state_ = r.state;
    done_ = r.done;
    return r;
  }

 private:
  TaskSpec task_;
  const Catalog* catalog_;
  EnvConfig cfg_;
  Pose goal_;
  World world_;
  Rng noise_;
  EnvState state_;
  EpisodeRecord record_;
  double discount_ = 1.0;
  bool done_ = false;
};

}  // namespace mpseq

#endif  // MPSEQ_ENV_HPP_
