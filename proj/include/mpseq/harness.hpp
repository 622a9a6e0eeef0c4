#ifndef MPSEQ_HARNESS_HPP_
#define MPSEQ_HARNESS_HPP_

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"
#include "mpseq/baselines.hpp"
#include "mpseq/checkpoint.hpp"
#include "mpseq/env.hpp"
#include "mpseq/train.hpp"

namespace mpseq {

// Thrown for bad user configuration (the CLI maps it to exit code 2).
struct ConfigError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// ---------------------------------------------------------------------------
// Perturbation presets

inline PerturbationSpec preset(const std::string& name) {
  if (name == "TC1") return {name, 1.0, 1.0, 0.0, 0.0, Sampling::UniformInBox};
  if (name == "TC2") return {name, 2.0, 2.0, 1.0, 1.0, Sampling::UniformInBox};
  if (name == "EC1") return {name, 0.0, 0.0, 0.5, 0.5, Sampling::OnBoundary};
  if (name == "EC2") return {name, 0.0, 0.0, 1.5, 1.5, Sampling::OnBoundary};
  if (name == "EC3") return {name, 1.0, 1.0, 0.5, 0.5, Sampling::OnBoundary};
  throw ConfigError("unknown condition '" + name + "' (expected TC1, TC2, EC1, EC2 or EC3)");
}

inline const std::vector<std::string>& preset_names() {
  static const std::vector<std::string> n{"TC1", "TC2", "EC1", "EC2", "EC3"};
  return n;
}

// ---------------------------------------------------------------------------
// Task files. Dimensions are kept in millimeters exactly as written so a
// load/save cycle reproduces every value bit for bit.

struct TaskFile {
  std::string name = "round";
  Shape shape = Shape::Round;
  double hole_size_mm = 30.0;
  double clearance_mm = 0.1;
  double insertion_depth_mm = 20.0;
  double peg_length_mm = 50.0;
  ContactConfig contact;

  static TaskFile from_preset(const std::string& name) {
    for (const auto& row : kGeometryPresets)
      if (row.name == name) {
        TaskFile t;
        t.name = name;
        t.shape = row.shape;
        t.hole_size_mm = row.hole_size_mm;
        t.clearance_mm = row.clearance_mm;
        t.insertion_depth_mm = row.insertion_depth_mm;
        return t;
      }
    throw ConfigError("unknown task preset '" + name + "'");
  }

  TaskSpec spec() const {
    if (!(hole_size_mm > 0.0) || !(clearance_mm > 0.0) || !(clearance_mm < hole_size_mm) ||
        !(insertion_depth_mm > 0.0) || !(peg_length_mm > insertion_depth_mm))
      throw ConfigError("task '" + name + "': inconsistent dimensions");
    TaskSpec t;
    t.name = name;
    t.geometry.shape = shape;
    t.geometry.hole_size = hole_size_mm / 1000.0;
    t.geometry.clearance = clearance_mm / 1000.0;
    t.geometry.insertion_depth = insertion_depth_mm / 1000.0;
    t.geometry.peg_length = peg_length_mm / 1000.0;
    t.contact = contact;
    try {
      t.contact.validate();
    } catch (const std::invalid_argument& e) {
      throw ConfigError(e.what());
    }
    return t;
  }
};

inline Json contact_to_json(const ContactConfig& c) {
  return {{"k_p", c.k_p},
          {"k_v", c.k_v},
          {"mu", c.mu},
          {"n_rim", c.n_rim},
          {"edge_points", c.edge_points},
          {"f_noise_sigma", c.f_noise_sigma},
          {"tau_noise_sigma", c.tau_noise_sigma},
          {"contact_eps", c.contact_eps},
          {"max_penetration", c.max_penetration},
          {"friction_v_reg", c.friction_v_reg},
          {"depth_tolerance", c.depth_tolerance},
          {"chamfer", c.chamfer},
          {"edge_blend", c.edge_blend}};
}

// Reads known keys into `out`, rejecting anything it does not recognize.
class JsonReader {
 public:
  JsonReader(const Json& j, std::string where) : j_(j), where_(std::move(where)) {
    if (!j_.is_object()) throw ConfigError(where_ + ": expected an object");
  }
  template <class T>
  void get(const char* key, T& out) {
    seen_.insert(key);
    if (!j_.contains(key)) return;
    try {
      out = j_.at(key).get<T>();
    } catch (const Json::exception& e) {
      throw ConfigError(where_ + "." + key + ": " + e.what());
    }
  }
  bool has(const char* key) const { return j_.contains(key); }
  const Json& at(const char* key) {
    seen_.insert(key);
    return j_.at(key);
  }
  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it)
      if (!seen_.count(it.key())) throw ConfigError(where_ + ": unknown key '" + it.key() + "'");
  }

 private:
  const Json& j_;
  std::string where_;
  std::set<std::string> seen_;
};

inline ContactConfig contact_from_json(const Json& j, ContactConfig c = {}) {
  JsonReader r(j, "contact");
  r.get("k_p", c.k_p);
  r.get("k_v", c.k_v);
  r.get("mu", c.mu);
  r.get("n_rim", c.n_rim);
  r.get("edge_points", c.edge_points);
  r.get("f_noise_sigma", c.f_noise_sigma);
  r.get("tau_noise_sigma", c.tau_noise_sigma);
  r.get("contact_eps", c.contact_eps);
  r.get("max_penetration", c.max_penetration);
  r.get("friction_v_reg", c.friction_v_reg);
  r.get("depth_tolerance", c.depth_tolerance);
  r.get("chamfer", c.chamfer);
  r.get("edge_blend", c.edge_blend);
  r.finish();
  return c;
}

inline Json task_to_json(const TaskFile& t) {
  return {{"name", t.name},
          {"shape", std::string(to_string(t.shape))},
          {"hole_size_mm", t.hole_size_mm},
          {"clearance_mm", t.clearance_mm},
          {"insertion_depth_mm", t.insertion_depth_mm},
          {"peg_length_mm", t.peg_length_mm},
          {"contact", contact_to_json(t.contact)}};
}

/// A string names a preset row; an object may start from one via "preset"
/// and override any field.
inline TaskFile task_from_json(const Json& j) {
  if (j.is_string()) return TaskFile::from_preset(j.get<std::string>());
  JsonReader r(j, "task");
  TaskFile t;
  if (r.has("preset")) t = TaskFile::from_preset(r.at("preset").get<std::string>());
  r.get("name", t.name);
  if (r.has("shape")) {
    try {
      t.shape = shape_from_string(r.at("shape").get<std::string>());
    } catch (const std::invalid_argument& e) {
      throw ConfigError(e.what());
    }
  }
  r.get("hole_size_mm", t.hole_size_mm);
  r.get("clearance_mm", t.clearance_mm);
  r.get("insertion_depth_mm", t.insertion_depth_mm);
  r.get("peg_length_mm", t.peg_length_mm);
  if (r.has("contact")) t.contact = contact_from_json(r.at("contact"), t.contact);
  r.finish();
  t.spec();
  return t;
}

inline std::string read_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw ConfigError("cannot open " + path);
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

inline void write_file(const std::string& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write " + path);
  f << text;
}

inline Json parse_json(const std::string& text, const std::string& where) {
  try {
    return Json::parse(text);
  } catch (const Json::parse_error& e) {
    throw ConfigError(where + ": " + e.what());
  }
}

inline TaskFile load_task_file(const std::string& path) {
  return task_from_json(parse_json(read_file(path), path));
}

inline void save_task_file(const std::string& path, const TaskFile& t) {
  write_file(path, task_to_json(t).dump(2) + "\n");
}

// ---------------------------------------------------------------------------
// Experiment configuration

struct ExperimentConfig {
  TaskFile task = [] {
    TaskFile t = TaskFile::from_preset("round");
    t.clearance_mm = 0.2;  // relaxed in simulation, see README
    return t;
  }();
  std::string condition = "TC1";
  std::uint64_t seed = 1;
  EnvConfig env;
  TrainConfig train;
  ContinuousBaselineConfig baseline;
  int eval_trials = 50;
  std::uint64_t eval_seed = 1000;
  std::string out_dir = "runs/default";
};

inline Json experiment_to_json(const ExperimentConfig& c) {
  const auto& p = c.train.ppo;
  const auto& ctl = c.env.controller;
  const auto& rw = c.env.reward;
  const auto& b = c.baseline;
  return {
      {"task", task_to_json(c.task)},
      {"condition", c.condition},
      {"seed", c.seed},
      {"env",
       {{"max_steps", c.env.max_steps},
        {"success_fraction", c.env.success_fraction},
        {"start_height_mm", c.env.start_height * 1000.0},
        {"gamma", c.env.gamma},
        {"reward", {{"c1", rw.c1}, {"c2", rw.c2}, {"c3", rw.c3}, {"k1", rw.k1}, {"w_rot", rw.w_rot}}},
        {"controller",
         {{"dt", ctl.dt},
          {"k_adm_t", ctl.k_adm_t},
          {"k_adm_r", ctl.k_adm_r},
          {"v_max", ctl.v_max},
          {"w_max", ctl.w_max},
          {"f_abort", ctl.f_abort},
          {"abort_ticks", ctl.abort_ticks},
          {"settle_ticks", ctl.settle_ticks}}}}},
      {"train",
       {{"budget_steps", c.train.budget_steps},
        {"workers", c.train.workers},
        {"threads", c.train.threads},
        {"gamma", p.gamma},
        {"lambda", p.lambda},
        {"clip_eps", p.clip_eps},
        {"epochs", p.epochs},
        {"minibatch", p.minibatch},
        {"lr", p.lr},
        {"ent_coef", p.ent_coef},
        {"vf_coef", p.vf_coef},
        {"max_grad_norm", p.max_grad_norm},
        {"episodes_per_update", p.episodes_per_update}}},
      {"baseline",
       {{"max_translation_mm", b.max_translation * 1000.0},
        {"max_rotation_deg", b.max_rotation / kDeg},
        {"step_duration", b.step_duration},
        {"position_gain", b.position_gain},
        {"w_d", b.w_d},
        {"w_f", b.w_f},
        {"success_bonus", b.success_bonus},
        {"force_threshold", b.force_threshold},
        {"max_steps", b.max_steps}}},
      {"eval", {{"trials", c.eval_trials}, {"seed", c.eval_seed}}},
      {"out_dir", c.out_dir}};
}

inline ExperimentConfig experiment_from_json(const Json& j, ExperimentConfig c = {}) {
  JsonReader r(j, "config");
  if (r.has("task")) c.task = task_from_json(r.at("task"));
  r.get("condition", c.condition);
  preset(c.condition);
  r.get("seed", c.seed);
  if (r.has("env")) {
    JsonReader e(r.at("env"), "env");
    e.get("max_steps", c.env.max_steps);
    e.get("success_fraction", c.env.success_fraction);
    double sh = c.env.start_height * 1000.0;
    e.get("start_height_mm", sh);
    c.env.start_height = sh / 1000.0;
    e.get("gamma", c.env.gamma);
    if (e.has("reward")) {
      JsonReader w(e.at("reward"), "env.reward");
      w.get("c1", c.env.reward.c1);
      w.get("c2", c.env.reward.c2);
      w.get("c3", c.env.reward.c3);
      w.get("k1", c.env.reward.k1);
      w.get("w_rot", c.env.reward.w_rot);
      w.finish();
    }
    if (e.has("controller")) {
      auto& ctl = c.env.controller;
      JsonReader k(e.at("controller"), "env.controller");
      k.get("dt", ctl.dt);
      k.get("k_adm_t", ctl.k_adm_t);
      k.get("k_adm_r", ctl.k_adm_r);
      k.get("v_max", ctl.v_max);
      k.get("w_max", ctl.w_max);
      k.get("f_abort", ctl.f_abort);
      k.get("abort_ticks", ctl.abort_ticks);
      k.get("settle_ticks", ctl.settle_ticks);
      k.finish();
    }
    e.finish();
  }
  if (r.has("train")) {
    auto& p = c.train.ppo;
    JsonReader t(r.at("train"), "train");
    t.get("budget_steps", c.train.budget_steps);
    t.get("workers", c.train.workers);
    t.get("threads", c.train.threads);
    t.get("gamma", p.gamma);
    t.get("lambda", p.lambda);
    t.get("clip_eps", p.clip_eps);
    t.get("epochs", p.epochs);
    t.get("minibatch", p.minibatch);
    t.get("lr", p.lr);
    t.get("ent_coef", p.ent_coef);
    t.get("vf_coef", p.vf_coef);
    t.get("max_grad_norm", p.max_grad_norm);
    t.get("episodes_per_update", p.episodes_per_update);
    t.finish();
  }
  if (r.has("baseline")) {
    auto& b = c.baseline;
    JsonReader t(r.at("baseline"), "baseline");
    double mt = b.max_translation * 1000.0, mr = b.max_rotation / kDeg;
    t.get("max_translation_mm", mt);
    t.get("max_rotation_deg", mr);
    b.max_translation = mt / 1000.0;
    b.max_rotation = mr * kDeg;
    t.get("step_duration", b.step_duration);
    t.get("position_gain", b.position_gain);
    t.get("w_d", b.w_d);
    t.get("w_f", b.w_f);
    t.get("success_bonus", b.success_bonus);
    t.get("force_threshold", b.force_threshold);
    t.get("max_steps", b.max_steps);
    t.finish();
  }
  if (r.has("eval")) {
    JsonReader t(r.at("eval"), "eval");
    t.get("trials", c.eval_trials);
    t.get("seed", c.eval_seed);
    t.finish();
  }
  r.get("out_dir", c.out_dir);
  r.finish();
  c.train.ppo.seed = c.seed;
  c.train.ppo.gamma = c.env.gamma;
  try {
    c.env.controller.validate();
    c.train.ppo.validate();
    c.baseline.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  if (c.env.max_steps < 1) throw ConfigError("env.max_steps must be >= 1");
  if (c.eval_trials < 1) throw ConfigError("eval.trials must be >= 1");
  if (c.train.budget_steps < 1) throw ConfigError("train.budget_steps must be >= 1");
  return c;
}

/// 64-bit FNV-1a, used to fingerprint configurations in manifests.
inline std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : s) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

inline Json make_manifest(const std::string& command, const Json& config, std::uint64_t seed,
                          const std::vector<std::string>& files) {
  return {{"command", command},
          {"version", MPSEQ_VERSION},
          {"seed", seed},
          {"config_hash", hex64(fnv1a(config.dump()))},
          {"config", config},
          {"files", files}};
}

// ---------------------------------------------------------------------------
// Episode records

inline Json vec6_to_json(const Vector6d& v) { return Json(std::vector<double>(v.data(), v.data() + 6)); }

inline Vector6d vec6_from_json(const Json& j) {
  const auto d = j.get<std::vector<double>>();
  if (d.size() != 6) throw std::runtime_error("expected 6 numbers");
  return Eigen::Map<const Vector6d>(d.data());
}

inline Json record_to_json(const EpisodeRecord& r) {
  Json steps = Json::array();
  for (const auto& s : r.steps)
    steps.push_back({{"mp", s.mp},
                     {"status", std::string(to_string(s.status))},
                     {"duration", s.duration},
                     {"reward", s.reward}});
  return {{"condition", r.condition},
          {"task", r.task},
          {"noise_seed", r.noise_seed},
          {"dp_init", vec6_to_json(r.dp_init)},
          {"dp_hole", vec6_to_json(r.dp_hole)},
          {"steps", steps},
          {"outcome", std::string(to_string(r.outcome))},
          {"total_return", r.total_return},
          {"final_depth", r.final_depth}};
}

inline MpStatus mp_status_from_string(const std::string& s) {
  if (s == "SUCCESS") return MpStatus::Success;
  if (s == "FAILURE") return MpStatus::Failure;
  if (s == "CONTINUE") return MpStatus::Continue;
  throw std::runtime_error("unknown primitive status '" + s + "'");
}

inline EpisodeOutcome outcome_from_string(const std::string& s) {
  for (auto o : {EpisodeOutcome::Running, EpisodeOutcome::Success, EpisodeOutcome::FailureTimeout,
                 EpisodeOutcome::FailureAbort})
    if (to_string(o) == s) return o;
  throw std::runtime_error("unknown episode outcome '" + s + "'");
}

inline EpisodeRecord record_from_json(const Json& j) {
  EpisodeRecord r;
  r.condition = j.at("condition").get<std::string>();
  r.task = j.at("task").get<std::string>();
  r.noise_seed = j.at("noise_seed").get<std::uint64_t>();
  r.dp_init = vec6_from_json(j.at("dp_init"));
  r.dp_hole = vec6_from_json(j.at("dp_hole"));
  for (const auto& s : j.at("steps"))
    r.steps.push_back({s.at("mp").get<int>(), mp_status_from_string(s.at("status").get<std::string>()),
                       s.at("duration").get<double>(), s.at("reward").get<double>()});
  r.outcome = outcome_from_string(j.at("outcome").get<std::string>());
  r.total_return = j.at("total_return").get<double>();
  r.final_depth = j.at("final_depth").get<double>();
  return r;
}

/// Re-executes a recorded episode from its offsets, noise seed and primitive
/// ids. Ids of -1 (primitives outside the catalog) cannot be replayed.
inline EpisodeRecord replay(PegEnv& env, const EpisodeRecord& rec, const TraceSink* trace = nullptr) {
  env.reset_with(rec.condition, rec.dp_init, rec.dp_hole, rec.noise_seed);
  for (const auto& s : rec.steps) {
    if (env.done()) break;
    if (s.mp < 0 || s.mp >= static_cast<int>(env.catalog().size()))
      throw std::runtime_error("replay: step uses a primitive outside the catalog");
    env.step_with(env.catalog()[s.mp], s.mp, trace);
  }
  return env.record();
}

// ---------------------------------------------------------------------------
// Evaluation

struct EvalReport {
  std::string condition;
  std::string task;
  int trials = 0;
  int successes = 0;
  double success_rate = 0.0;
  double mean_length = 0.0;     // primitives per episode
  double mean_duration = 0.0;   // s of primitive execution per episode
  double ci_low = 0.0;
  double ci_high = 0.0;
};

/// Wilson score interval for a binomial proportion.
inline std::pair<double, double> wilson_interval(int successes, int trials, double z = 1.959963984540054) {
  if (trials <= 0) return {0.0, 1.0};
  const double n = trials;
  const double p = successes / n;
  const double z2 = z * z;
  const double denom = 1.0 + z2 / n;
  const double center = (p + z2 / (2.0 * n)) / denom;
  const double half = z * std::sqrt(p * (1.0 - p) / n + z2 / (4.0 * n * n)) / denom;
  // Exact endpoints at 0 and n; the closed form leaves rounding residue there.
  return {successes == 0 ? 0.0 : std::max(0.0, center - half),
          successes == trials ? 1.0 : std::min(1.0, center + half)};
}

inline EvalReport summarize(const std::string& condition, const std::string& task,
                            const std::vector<EpisodeRecord>& recs) {
  EvalReport r;
  r.condition = condition;
  r.task = task;
  r.trials = static_cast<int>(recs.size());
  for (const auto& e : recs) {
    r.successes += e.outcome == EpisodeOutcome::Success ? 1 : 0;
    r.mean_length += static_cast<double>(e.steps.size());
    r.mean_duration += e.wall_time();
  }
  if (r.trials > 0) {
    r.success_rate = static_cast<double>(r.successes) / r.trials;
    r.mean_length /= r.trials;
    r.mean_duration /= r.trials;
  }
  std::tie(r.ci_low, r.ci_high) = wilson_interval(r.successes, r.trials);
  return r;
}

inline Json report_to_json(const EvalReport& r) {
  return {{"condition", r.condition},     {"task", r.task},
          {"trials", r.trials},           {"successes", r.successes},
          {"success_rate", r.success_rate}, {"mean_length", r.mean_length},
          {"mean_duration", r.mean_duration}, {"ci_low", r.ci_low},
          {"ci_high", r.ci_high}};
}

struct EvalOptions {
  int trials = 50;
  std::uint64_t seed = 1000;
  int threads = 1;
};

/// Greedy rollouts of the policy under a condition. Trial i always sees the
/// same offsets and noise for a given seed, whatever the policy.
inline EvalReport evaluate(const PolicyBundle& b, const TaskSpec& task, const Catalog& cat,
                           const EnvConfig& env_cfg, const PerturbationSpec& cond,
                           const EvalOptions& opt, std::vector<EpisodeRecord>* records = nullptr) {
  if (opt.trials < 1) throw std::invalid_argument("evaluate: trials must be >= 1");
  const int threads = std::max(1, std::min(opt.threads, opt.trials));
  std::vector<PegEnv> envs;
  for (int i = 0; i < threads; ++i) envs.emplace_back(task, cat, env_cfg);
  std::vector<EpisodeRecord> recs(opt.trials);
  parallel_for(opt.trials, threads, [&](int w, int i) {
    recs[i] = run_episode(envs[w], b, cond, episode_seed(opt.seed, 0, i), true).record;
  });
  if (records) *records = recs;
  return summarize(cond.name, task.name, recs);
}

/// Same trial offsets as evaluate, played through the manual sequence.
inline EvalReport evaluate_scripted(const ScriptedSequence& seq, const TaskSpec& task, const Catalog& cat,
                                    const EnvConfig& env_cfg, const PerturbationSpec& cond,
                                    const EvalOptions& opt, std::vector<EpisodeRecord>* records = nullptr) {
  PegEnv env(task, cat, env_cfg);
  std::vector<EpisodeRecord> recs;
  for (int i = 0; i < opt.trials; ++i) {
    Rng rng(episode_seed(opt.seed, 0, i));
    env.reset(cond, rng);
    recs.push_back(run_scripted(env, seq));
  }
  if (records) *records = recs;
  return summarize(cond.name + "/scripted", task.name, recs);
}

/// Uniform random choice among the feasible primitives.
inline EvalReport evaluate_random(const TaskSpec& task, const Catalog& cat, const EnvConfig& env_cfg,
                                  const PerturbationSpec& cond, const EvalOptions& opt) {
  PegEnv env(task, cat, env_cfg);
  std::vector<EpisodeRecord> recs;
  for (int i = 0; i < opt.trials; ++i) {
    Rng rng(episode_seed(opt.seed, 0, i));
    env.reset(cond, rng);
    while (!env.done()) {
      const auto& f = feasible_actions(env.state(), cat);
      env.step(f[std::uniform_int_distribution<std::size_t>(0, f.size() - 1)(rng)]);
    }
    recs.push_back(env.record());
  }
  return summarize(cond.name + "/random", task.name, recs);
}

/// Every (trained shape, evaluated shape) pair; rows are policies, columns
/// are tasks, both in the order given.
inline std::vector<std::vector<EvalReport>> transfer_matrix(
    const std::vector<std::pair<std::string, const PolicyBundle*>>& policies,
    const std::vector<TaskSpec>& tasks, const Catalog& cat, const EnvConfig& env_cfg,
    const PerturbationSpec& cond, const EvalOptions& opt) {
  std::vector<std::vector<EvalReport>> m;
  for (const auto& [name, pol] : policies) {
    if (!pol) throw std::invalid_argument("transfer_matrix: missing policy for " + name);
    std::vector<EvalReport> row;
    for (const auto& t : tasks) {
      EvalReport r = evaluate(*pol, t, cat, env_cfg, cond, opt);
      r.condition = name + "->" + t.name + "/" + cond.name;
      row.push_back(r);
    }
    m.push_back(std::move(row));
  }
  return m;
}

/// First logged point whose success rate reaches `level`; -1 when none does.
inline long steps_to_success(const std::vector<CurvePoint>& curve, double level) {
  for (const auto& p : curve)
    if (p.success_rate >= level) return p.env_steps;
  return -1;
}

inline Json curve_point_to_json(const CurvePoint& p) {
  return {{"update", p.update},
          {"env_steps", p.env_steps},
          {"episodes", p.episodes},
          {"success_rate", p.success_rate},
          {"mean_return", p.mean_return},
          {"mean_length", p.mean_length},
          {"policy_loss", p.loss.policy},
          {"value_loss", p.loss.value},
          {"entropy", p.loss.entropy},
          {"approx_kl", p.loss.approx_kl}};
}

// ---------------------------------------------------------------------------
// Plots (static SVG)

struct Series {
  std::string label;
  std::vector<double> x;
  std::vector<double> y;
  std::string color = "#1f77b4";
};

inline std::string svg_line_plot(const std::string& title, const std::string& xlabel,
                                 const std::string& ylabel, const std::vector<Series>& series) {
  const double W = 640, H = 400, L = 70, R = 20, T = 40, B = 55;
  double x0 = 0, x1 = 1, y0 = 0, y1 = 1;
  bool first = true;
  for (const auto& s : series)
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      if (first) {
        x0 = x1 = s.x[i];
        y0 = y1 = s.y[i];
        first = false;
      }
      x0 = std::min(x0, s.x[i]);
      x1 = std::max(x1, s.x[i]);
      y0 = std::min(y0, s.y[i]);
      y1 = std::max(y1, s.y[i]);
    }
  if (x1 <= x0) x1 = x0 + 1;
  if (y1 <= y0) y1 = y0 + 1;
  auto px = [&](double x) { return L + (x - x0) / (x1 - x0) * (W - L - R); };
  auto py = [&](double y) { return H - B - (y - y0) / (y1 - y0) * (H - T - B); };
  std::ostringstream o;
  o.precision(6);
  o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\">\n"
    << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
    << "<text x=\"" << W / 2 << "\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">" << title << "</text>\n"
    << "<line x1=\"" << L << "\" y1=\"" << H - B << "\" x2=\"" << W - R << "\" y2=\"" << H - B
    << "\" stroke=\"black\"/>\n"
    << "<line x1=\"" << L << "\" y1=\"" << T << "\" x2=\"" << L << "\" y2=\"" << H - B << "\" stroke=\"black\"/>\n";
  for (int k = 0; k <= 4; ++k) {
    const double xv = x0 + (x1 - x0) * k / 4.0, yv = y0 + (y1 - y0) * k / 4.0;
    o << "<text x=\"" << px(xv) << "\" y=\"" << H - B + 16 << "\" text-anchor=\"middle\" font-size=\"11\">"
      << xv << "</text>\n"
      << "<text x=\"" << L - 6 << "\" y=\"" << py(yv) + 4 << "\" text-anchor=\"end\" font-size=\"11\">" << yv
      << "</text>\n";
  }
  o << "<text x=\"" << (L + W - R) / 2 << "\" y=\"" << H - 12 << "\" text-anchor=\"middle\" font-size=\"12\">"
    << xlabel << "</text>\n"
    << "<text x=\"16\" y=\"" << (T + H - B) / 2 << "\" text-anchor=\"middle\" font-size=\"12\" transform=\"rotate(-90 16 "
    << (T + H - B) / 2 << ")\">" << ylabel << "</text>\n";
  int li = 0;
  for (const auto& s : series) {
    o << "<polyline fill=\"none\" stroke=\"" << s.color << "\" stroke-width=\"1.5\" points=\"";
    for (std::size_t i = 0; i < s.x.size(); ++i) o << px(s.x[i]) << "," << py(s.y[i]) << " ";
    o << "\"/>\n";
    o << "<text x=\"" << L + 10 << "\" y=\"" << T + 14 + 16 * li << "\" font-size=\"12\" fill=\"" << s.color
      << "\">" << s.label << "</text>\n";
    ++li;
  }
  o << "</svg>\n";
  return o.str();
}

inline std::string svg_bar_chart(const std::string& title, const std::vector<EvalReport>& reports) {
  const double W = 120.0 + 90.0 * static_cast<double>(reports.size()), H = 360, B = 70, T = 40, L = 60;
  std::ostringstream o;
  o.precision(6);
  o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\">\n"
    << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
    << "<text x=\"" << W / 2 << "\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">" << title << "</text>\n";
  const double ph = H - B - T;
  for (int k = 0; k <= 4; ++k) {
    const double y = H - B - ph * k / 4.0;
    o << "<line x1=\"" << L << "\" y1=\"" << y << "\" x2=\"" << W - 20 << "\" y2=\"" << y
      << "\" stroke=\"#ddd\"/>\n<text x=\"" << L - 6 << "\" y=\"" << y + 4
      << "\" text-anchor=\"end\" font-size=\"11\">" << k * 25 << "%</text>\n";
  }
  for (std::size_t i = 0; i < reports.size(); ++i) {
    const auto& r = reports[i];
    const double x = L + 20 + 90.0 * static_cast<double>(i);
    const double h = ph * r.success_rate;
    o << "<rect x=\"" << x << "\" y=\"" << H - B - h << "\" width=\"50\" height=\"" << h
      << "\" fill=\"#4c72b0\"/>\n"
      << "<line x1=\"" << x + 25 << "\" y1=\"" << H - B - ph * r.ci_high << "\" x2=\"" << x + 25 << "\" y2=\""
      << H - B - ph * r.ci_low << "\" stroke=\"black\"/>\n"
      << "<text x=\"" << x + 25 << "\" y=\"" << H - B + 16 << "\" text-anchor=\"middle\" font-size=\"10\">"
      << r.condition << "</text>\n"
      << "<text x=\"" << x + 25 << "\" y=\"" << H - B + 30 << "\" text-anchor=\"middle\" font-size=\"10\">"
      << r.task << "</text>\n";
  }
  o << "</svg>\n";
  return o.str();
}

}  // namespace mpseq

#endif  // MPSEQ_HARNESS_HPP_
