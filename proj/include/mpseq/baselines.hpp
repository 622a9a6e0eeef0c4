#ifndef MPSEQ_BASELINES_HPP_
#define MPSEQ_BASELINES_HPP_

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "mpseq/env.hpp"
#include "mpseq/ppo.hpp"
#include "mpseq/train.hpp"

namespace mpseq {

// ---------------------------------------------------------------------------
// Continuous-displacement learner

struct ContinuousBaselineConfig {
  double max_translation = 2.0 * kMm;  // per step, at |action| = 1
  double max_rotation = 2.0 * kDeg;
  double step_duration = 0.25;         // s
  double position_gain = 20.0;         // 1/s, pose tracking inside a step
  double w_d = 100.0;                  // per meter of pose distance
  double w_f = 1.0;
  double success_bonus = 10.0;
  double force_threshold = 30.0;       // N
  int max_steps = 40;

  void validate() const {
    if (!(max_translation > 0.0) || !(max_rotation > 0.0) || !(step_duration > 0.0))
      throw std::invalid_argument("baseline: scales and step duration must be > 0");
    if (!(w_d >= 0.0) || !(w_f >= 0.0) || !(success_bonus >= 0.0))
      throw std::invalid_argument("baseline: reward weights must be >= 0");
    if (max_steps < 1) throw std::invalid_argument("baseline: max_steps must be >= 1");
  }
};

struct BaselineStep {
  Vector6d obs = Vector6d::Zero();
  double reward = 0.0;
  bool done = false;
  bool success = false;
  double force = 0.0;
};

/// Peg-in-hole with a 6-D displacement action executed under compliant pose
/// tracking. Shares geometry, contact, sensing and reset sampling with PegEnv.
class ContinuousEnv {
 public:
  ContinuousEnv(TaskSpec task, EnvConfig env_cfg = {}, ContinuousBaselineConfig cfg = {})
      : task_(std::move(task)), env_cfg_(env_cfg), cfg_(cfg) {
    task_.contact.validate();
    env_cfg_.controller.validate();
    cfg_.validate();
    goal_.translation = {0.0, 0.0, task_.geometry.plate_top_z - task_.geometry.insertion_depth};
  }

  const ContinuousBaselineConfig& config() const { return cfg_; }
  const EnvConfig& env_config() const { return env_cfg_; }
  const World& world() const { return world_; }
  bool done() const { return done_; }
  int steps() const { return steps_; }

  Vector6d reset(const PerturbationSpec& perturb, Rng& rng) {
    const Vector6d dp_init = sample_offset(perturb.init_pos_mm, perturb.init_rot_deg, perturb.sampling, rng);
    const Vector6d dp_hole = sample_offset(perturb.hole_pos_mm, perturb.hole_rot_deg, perturb.sampling, rng);
    const Pose estimate = offset_to_pose(dp_hole);
    Pose rel = offset_to_pose(dp_init);
    rel.translation.z() += task_.geometry.plate_top_z + env_cfg_.start_height;
    world_ = World(task_.geometry, task_.contact, estimate, compose(estimate, rel));
    noise_ = Rng(rng());
    steps_ = 0;
    done_ = false;
    return observation();
  }

  Vector6d observation() const {
    const Pose p = world_.task_pose();
    Vector6d o;
    o.head<3>() = p.translation - goal_.translation;
    o.tail<3>() = p.rotation;
    return o;
  }

  BaselineStep step(const Vector6d& action) {
    if (done_) throw std::logic_error("baseline step called on a finished episode");
    const ControllerConfig& cc = env_cfg_.controller;
    const Vector6d a = action.cwiseMax(-1.0).cwiseMin(1.0);
    const Pose start = world_.task_pose();
    Pose target = start;
    target.translation += a.head<3>() * cfg_.max_translation;
    const Eigen::Vector3d dr = a.tail<3>() * cfg_.max_rotation;
    target.rotation = rotation_vector(rotation_matrix(dr) * rotation_matrix(start.rotation));

    Vector6d gains;
    gains << cc.k_adm_t, cc.k_adm_t, cc.k_adm_t, cc.k_adm_r, cc.k_adm_r, cc.k_adm_r;
    const int ticks = static_cast<int>(std::lround(cfg_.step_duration / cc.dt));
    int over = 0;
    bool halted = false;
    for (int k = 0; k < ticks; ++k) {
      const ContactResult truth = world_.contact();
      const SensorSnapshot s = world_.sense(truth, noise_, k * cc.dt);
      over = s.wrench.force.norm() > cc.f_abort ? over + 1 : 0;
      if (over >= cc.abort_ticks) halted = true;
      if (halted) {
        world_.stop();
        break;
      }
      Vector6d err;
      err.head<3>() = target.translation - s.pose.translation;
      err.tail<3>() = rotation_vector(rotation_matrix(target.rotation) *
                                      rotation_matrix(s.pose.rotation).transpose());
      Vector6d cmd = cfg_.position_gain * err - gains.cwiseProduct(s.wrench.vector());
      world_.apply(clamp_twist(implicit_admittance(world_, truth, cmd, gains, cc), cc), cc.dt);
    }
    const SensorSnapshot end = settle(world_, cc, noise_);
    ++steps_;

    BaselineStep r;
    r.obs = observation();
    r.force = end.wrench.force.norm();
    r.success = episode_success(world_, task_.geometry, env_cfg_.success_fraction);
    r.reward = -cfg_.w_d * pose_distance(end.pose, goal_, env_cfg_.reward.w_rot) -
               (r.force > cfg_.force_threshold ? cfg_.w_f : 0.0) +
               (r.success ? cfg_.success_bonus : 0.0);
    r.done = r.success || steps_ >= cfg_.max_steps;
    done_ = r.done;
    return r;
  }

 private:
  TaskSpec task_;
  EnvConfig env_cfg_;
  ContinuousBaselineConfig cfg_;
  Pose goal_;
  World world_;
  Rng noise_;
  int steps_ = 0;
  bool done_ = false;
};

/// Diagonal Gaussian policy with a state-independent log standard deviation.
struct GaussianPolicy {
  Mlp value;
  Mlp mean;
  Eigen::VectorXd log_std;
  RunningMeanStd obs_rms{kObsSize};
  AdamState value_opt;
  AdamState mean_opt;
  AdamState std_opt;

  static GaussianPolicy create(Rng& rng, double init_log_std = -0.5) {
    GaussianPolicy p;
    p.value = Mlp({kCriticSize, kHidden, kHidden, 1}, rng, 1.0);
    p.mean = Mlp({kObsSize, kHidden, kHidden, 6}, rng, 0.01);
    p.log_std = Eigen::VectorXd::Constant(6, init_log_std);
    p.value_opt.reset(p.value.parameter_count());
    p.mean_opt.reset(p.mean.parameter_count());
    p.std_opt.reset(6);
    return p;
  }
};

inline double gaussian_log_prob(const Eigen::VectorXd& a, const Eigen::VectorXd& mu,
                                const Eigen::VectorXd& log_std) {
  const Eigen::ArrayXd z = (a - mu).array() / log_std.array().exp();
  return (-0.5 * z.square() - log_std.array() - 0.5 * std::log(2.0 * kPi)).sum();
}

inline double gaussian_entropy(const Eigen::VectorXd& log_std) {
  return (log_std.array() + 0.5 * (1.0 + std::log(2.0 * kPi))).sum();
}

struct GaussianTransition {
  Eigen::VectorXd obs;
  double elapsed = 0.0;
  Eigen::VectorXd action;  // pre-clipping sample
  double logp = 0.0;
  double value = 0.0;
  double reward = 0.0;
  bool done = false;
};

class GaussianModel {
 public:
  using Sample = GaussianTransition;

  explicit GaussianModel(GaussianPolicy& p) : p_(&p) {}

  void zero_grad() {
    gv_ = Eigen::VectorXd::Zero(p_->value.parameter_count());
    gm_ = Eigen::VectorXd::Zero(p_->mean.parameter_count());
    gs_ = Eigen::VectorXd::Zero(6);
  }

  static int group(const Sample&) { return 0; }

  void accumulate(const Sample& s, double adv, double ret, double w, double wv, const PpoConfig& cfg,
                  LossStats& st) {
    Mlp::Cache mc;
    const Eigen::VectorXd mu = p_->mean.forward(s.obs, mc);
    const Eigen::VectorXd var = (2.0 * p_->log_std.array()).exp().matrix();
    const double logp = gaussian_log_prob(s.action, mu, p_->log_std);
    const SurrogateTerm sur = clipped_surrogate(logp, s.logp, adv, cfg.clip_eps);
    const Eigen::VectorXd diff = s.action - mu;
    // d logp / d mu and d logp / d log_std; entropy only depends on log_std.
    const Eigen::VectorXd dmu = diff.cwiseQuotient(var);
    const Eigen::VectorXd dls = (diff.array().square() / var.array() - 1.0).matrix();
    p_->mean.backward(mc, w * sur.dlogp * dmu, gm_);
    gs_ += w * (sur.dlogp * dls - cfg.ent_coef * Eigen::VectorXd::Ones(6));

    Mlp::Cache vc;
    const double v = p_->value.forward(critic_input(s.obs, s.elapsed), vc)[0];
    Eigen::VectorXd g(1);
    g[0] = wv * cfg.vf_coef * (v - ret);
    p_->value.backward(vc, g, gv_);

    st.policy += w * sur.loss;
    st.value += wv * 0.5 * (v - ret) * (v - ret);
    st.entropy += w * gaussian_entropy(p_->log_std);
    st.approx_kl += w * (s.logp - logp);
    st.clip_frac += w * (sur.clipped ? 1.0 : 0.0);
  }

  void step(const PpoConfig& cfg) {
    const AdamConfig ac{cfg.lr};
    DiscreteModel::clip_and_step(p_->value.parameters(), gv_, p_->value_opt, ac, cfg.max_grad_norm);
    DiscreteModel::clip_and_step(p_->mean.parameters(), gm_, p_->mean_opt, ac, cfg.max_grad_norm);
    DiscreteModel::clip_and_step(p_->log_std, gs_, p_->std_opt, ac, cfg.max_grad_norm);
  }

 private:
  GaussianPolicy* p_;
  Eigen::VectorXd gv_, gm_, gs_;
};

struct BaselineEpisode {
  std::vector<GaussianTransition> steps;
  std::vector<Eigen::VectorXd> raw_obs;
  bool success = false;
  double total_return = 0.0;
};

inline BaselineEpisode run_baseline_episode(ContinuousEnv& env, const GaussianPolicy& p,
                                            const PerturbationSpec& perturb, std::uint64_t seed,
                                            bool greedy) {
  Rng rng(seed);
  Eigen::VectorXd raw = env.reset(perturb, rng);
  std::normal_distribution<double> n01(0.0, 1.0);
  BaselineEpisode out;
  double disc = 1.0;
  while (!env.done()) {
    const Eigen::VectorXd obs = p.obs_rms.normalize(raw);
    const Eigen::VectorXd mu = p.mean.forward(obs);
    Eigen::VectorXd a = mu;
    if (!greedy)
      for (int i = 0; i < 6; ++i) a[i] += std::exp(p.log_std[i]) * n01(rng);
    const double elapsed = static_cast<double>(env.steps()) / env.config().max_steps;
    const BaselineStep r = env.step(a);
    GaussianTransition t;
    t.obs = obs;
    t.elapsed = elapsed;
    t.action = a;
    t.logp = gaussian_log_prob(a, mu, p.log_std);
    t.value = p.value.forward(critic_input(obs, elapsed))[0];
    t.reward = r.reward;
    t.done = r.done;
    out.steps.push_back(t);
    out.raw_obs.push_back(raw);
    out.total_return += disc * r.reward;
    disc *= env.env_config().gamma;
    out.success = r.success;
    raw = r.obs;
  }
  return out;
}

/// PPO on the continuous-displacement agent; same loop and bookkeeping as
/// the discrete trainer, so curves are directly comparable.
inline TrainResult train_baseline(GaussianPolicy& policy, const TaskSpec& task,
                                  const PerturbationSpec& perturb, const EnvConfig& env_cfg,
                                  const ContinuousBaselineConfig& bcfg, const TrainConfig& cfg,
                                  const CurveCallback& on_curve = {}) {
  cfg.ppo.validate();
  const int threads = resolve_threads(cfg.workers, cfg.threads);
  std::vector<ContinuousEnv> envs;
  for (int i = 0; i < threads; ++i) envs.emplace_back(task, env_cfg, bcfg);
  Rng update_rng(splitmix64(cfg.ppo.seed ^ 0xba5eULL));
  TrainResult res;
  for (int update = 0; res.env_steps < cfg.budget_steps; ++update) {
    const GaussianPolicy snapshot = policy;
    std::vector<BaselineEpisode> eps(cfg.ppo.episodes_per_update);
    parallel_for(cfg.ppo.episodes_per_update, threads, [&](int w, int i) {
      eps[i] = run_baseline_episode(envs[w], snapshot, perturb, episode_seed(cfg.ppo.seed, update, i), false);
    });
    std::vector<GaussianTransition> batch;
    std::vector<Eigen::VectorXd> raw;
    CurvePoint pt;
    pt.update = update;
    for (const auto& e : eps) {
      batch.insert(batch.end(), e.steps.begin(), e.steps.end());
      raw.insert(raw.end(), e.raw_obs.begin(), e.raw_obs.end());
      pt.success_rate += e.success ? 1.0 : 0.0;
      pt.mean_return += e.total_return;
      pt.mean_length += static_cast<double>(e.steps.size());
    }
    const double n_ep = static_cast<double>(eps.size());
    pt.success_rate /= n_ep;
    pt.mean_return /= n_ep;
    pt.mean_length /= n_ep;
    std::vector<double> r, v;
    std::vector<bool> d;
    for (const auto& t : batch) {
      r.push_back(t.reward);
      v.push_back(t.value);
      d.push_back(t.done);
    }
    Advantages a = gae(r, v, d, cfg.ppo.gamma, cfg.ppo.lambda);
    normalize_advantages(a.adv);
    GaussianModel model(policy);
    pt.loss = ppo_update(model, batch, a.adv, a.ret, cfg.ppo, update_rng);
    policy.obs_rms.update(raw);
    res.env_steps += static_cast<long>(batch.size());
    res.episodes += static_cast<long>(eps.size());
    pt.env_steps = res.env_steps;
    pt.episodes = res.episodes;
    res.curve.push_back(pt);
    if (on_curve) on_curve(pt);
  }
  return res;
}

// ---------------------------------------------------------------------------
// Manually defined primitive sequence

struct ScriptedStep {
  ManipulationPrimitive mp;
  int catalog_id = -1;  // -1 when the primitive is not a catalog entry
};

struct ScriptedSequence {
  std::string name;
  std::vector<ScriptedStep> steps;

  void validate() const {
    if (steps.empty()) throw std::invalid_argument("scripted sequence must not be empty");
  }
};

inline int find_in_catalog(const Catalog& cat, const ManipulationPrimitive& mp) {
  for (const auto& c : cat.primitives)
    if (c.family == mp.family && c.archetype == mp.archetype && c.axis == mp.axis &&
        c.speed == mp.speed && c.f_d == mp.f_d && c.k_dr == mp.k_dr && c.stop.kind == mp.stop.kind &&
        c.stop.f_thr == mp.stop.f_thr && c.stop.d == mp.stop.d)
      return c.id;
  return -1;
}

/// Tilt, drop onto the hole edge, slide until the low side catches the wall,
/// rotate back and insert. Rotations are about the hole frame, whose z axis
/// points out of the plate: tilting about +y lowers the +x side of the peg.
inline ScriptedSequence manual_sequence(const Catalog& cat, double tilt_deg = 5.0) {
  ScriptedSequence s;
  s.name = "manual";
  ManipulationPrimitive tilt;
  tilt.family = Family::FreeSpace;
  tilt.archetype = Archetype::Rotate;
  tilt.axis = {4, +1};
  tilt.speed = 9.0 * kDeg;
  tilt.stop = {StopKind::DistanceReached, 1.0, tilt_deg * kDeg, 0.0, kDistanceTimeout};

  auto pick = [&](Family f, Archetype a, Axis ax, auto&& pred) {
    for (const auto& c : cat.primitives)
      if (c.family == f && c.archetype == a && c.axis == ax && pred(c)) return c;
    throw std::logic_error("manual sequence: primitive missing from catalog");
  };
  const auto down = pick(Family::FreeSpace, Archetype::TranslateUntilContact, Axis{2, -1},
                         [](const auto&) { return true; });
  const auto slide = pick(Family::InContact, Archetype::TranslateUntilContact, Axis{0, +1},
                          [](const auto& c) { return c.speed == 4.0 * kMm && c.stop.f_thr == 15.0; });
  const auto untilt = pick(Family::InContact, Archetype::RotateUntilContact, Axis{4, -1},
                           [](const auto& c) { return c.speed == 4.0 * kDeg && c.stop.f_thr == 0.5; });
  const auto insert = pick(Family::InContact, Archetype::Insert, Axis{2, -1},
                           [](const auto& c) { return c.k_dr == 0.1 && c.f_d == -12.0; });
  for (const auto& mp : {tilt, down, slide, untilt, insert}) s.steps.push_back({mp, find_in_catalog(cat, mp)});
  return s;
}

/// Plays the sequence open-loop: every step runs whatever the previous one
/// returned; only a finished episode (inserted or aborted) stops it early.
inline EpisodeRecord run_scripted(PegEnv& env, const ScriptedSequence& seq) {
  seq.validate();
  for (const auto& st : seq.steps) {
    if (env.done()) break;
    env.step_with(st.mp, st.catalog_id);
  }
  return env.record();
}

}  // namespace mpseq

#endif  // MPSEQ_BASELINES_HPP_
