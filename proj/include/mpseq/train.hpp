#ifndef MPSEQ_TRAIN_HPP_
#define MPSEQ_TRAIN_HPP_

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <thread>
#include <vector>

#include "mpseq/env.hpp"
#include "mpseq/ppo.hpp"

namespace mpseq {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Seed of one episode; independent of how episodes are spread over threads.
inline std::uint64_t episode_seed(std::uint64_t seed, std::uint64_t stream, std::uint64_t index) {
  return splitmix64(splitmix64(splitmix64(seed) ^ stream) ^ index);
}

struct TrainConfig {
  PpoConfig ppo;
  long budget_steps = 200000;  // environment steps (one primitive each)
  int workers = 16;            // concurrent environments, at most
  int threads = 0;             // 0: min(workers, hardware threads)
};

struct CurvePoint {
  int update = 0;
  long env_steps = 0;
  long episodes = 0;
  double success_rate = 0.0;
  double mean_return = 0.0;
  double mean_length = 0.0;
  LossStats loss;
};

struct TrainResult {
  std::vector<CurvePoint> curve;
  long env_steps = 0;
  long episodes = 0;
};

struct EpisodeRollout {
  std::vector<Transition> steps;
  std::vector<Eigen::VectorXd> raw_obs;
  EpisodeRecord record;
};

/// Runs one episode with the bundle. Greedy picks the most likely primitive;
/// otherwise actions are sampled. Everything random derives from `seed`.
inline EpisodeRollout run_episode(PegEnv& env, const PolicyBundle& b, const PerturbationSpec& perturb,
                                  std::uint64_t seed, bool greedy) {
  Rng rng(seed);
  env.reset(perturb, rng);
  EpisodeRollout out;
  const Catalog& cat = env.catalog();
  while (!env.done()) {
    const Eigen::VectorXd raw = env.observation();
    const Eigen::VectorXd obs = b.obs_rms.normalize(raw);
    const bool contact = env.state().contact;
    const Categorical dist = forward_policy(b, obs, contact);
    const double elapsed = static_cast<double>(env.state().step_index) / env.config().max_steps;
    const int a = greedy ? dist.mode() : dist.sample(rng);
    const int id = (contact ? cat.contact_indices : cat.free_indices).at(a);
    const StepResult r = env.step(id);
    Transition t;
    t.obs = obs;
    t.elapsed = elapsed;
    t.head = contact ? Head::Contact : Head::Free;
    t.action = a;
    t.logp = dist.log_prob(a);
    t.value = forward_value(b, obs, elapsed);
    t.reward = r.reward;
    t.done = r.done;
    // A safety abort cuts the episode short without making the state
    // absorbing: fold the value of the state it stopped in into the target,
    // otherwise aborting would be a cheap way to stop collecting step costs.
    if (r.outcome == EpisodeOutcome::FailureAbort)
      t.reward += env.config().gamma *
                  forward_value(b, b.obs_rms.normalize(env.observation()),
                                static_cast<double>(env.state().step_index) / env.config().max_steps);
    out.steps.push_back(std::move(t));
    out.raw_obs.push_back(raw);
  }
  out.record = env.record();
  return out;
}

inline int resolve_threads(int workers, int threads) {
  if (threads > 0) return std::min(threads, std::max(1, workers));
  const unsigned hw = std::max(1u, std::thread::hardware_concurrency());
  return std::max(1, std::min(workers, static_cast<int>(hw)));
}

/// Runs `n` jobs on up to `threads` threads; job i writes only slot i, so the
/// result order never depends on scheduling.
inline void parallel_for(int n, int threads, const std::function<void(int, int)>& job) {
  threads = std::max(1, std::min(threads, n));
  if (threads == 1) {
    for (int i = 0; i < n; ++i) job(0, i);
    return;
  }
  std::atomic<int> next{0};
  std::vector<std::thread> pool;
  std::exception_ptr err;
  std::atomic<bool> failed{false};
  for (int w = 0; w < threads; ++w)
    pool.emplace_back([&, w] {
      try {
        for (int i = next++; i < n && !failed; i = next++) job(w, i);
      } catch (...) {
        if (!failed.exchange(true)) err = std::current_exception();
      }
    });
  for (auto& t : pool) t.join();
  if (err) std::rethrow_exception(err);
}

using CurveCallback = std::function<void(const CurvePoint&)>;
using EpisodeCallback = std::function<void(int update, const EpisodeRecord&)>;

/// PPO training of the discrete agent. Collection runs on worker threads
/// against a snapshot of the bundle; the update is single-threaded.
inline TrainResult train(PolicyBundle& bundle, const TaskSpec& task, const Catalog& catalog,
                         const PerturbationSpec& perturb, const EnvConfig& env_cfg,
                         const TrainConfig& cfg, const CurveCallback& on_curve = {},
                         const EpisodeCallback& on_episode = {}) {
  cfg.ppo.validate();
  if (cfg.budget_steps < 1) throw std::invalid_argument("train: budget must be >= 1 step");
  const int threads = resolve_threads(cfg.workers, cfg.threads);
  std::vector<PegEnv> envs;
  for (int i = 0; i < threads; ++i) envs.emplace_back(task, catalog, env_cfg);
  Rng update_rng(splitmix64(cfg.ppo.seed ^ 0x5eedULL));

  TrainResult res;
  for (int update = 0; res.env_steps < cfg.budget_steps; ++update) {
    const PolicyBundle snapshot = bundle;
    std::vector<EpisodeRollout> eps(cfg.ppo.episodes_per_update);
    parallel_for(cfg.ppo.episodes_per_update, threads, [&](int w, int i) {
      eps[i] = run_episode(envs[w], snapshot, perturb, episode_seed(cfg.ppo.seed, update, i), false);
    });

    std::vector<Transition> batch;
    std::vector<Eigen::VectorXd> raw;
    CurvePoint pt;
    pt.update = update;
    for (const auto& e : eps) {
      batch.insert(batch.end(), e.steps.begin(), e.steps.end());
      raw.insert(raw.end(), e.raw_obs.begin(), e.raw_obs.end());
      pt.success_rate += e.record.outcome == EpisodeOutcome::Success ? 1.0 : 0.0;
      pt.mean_return += e.record.total_return;
      pt.mean_length += static_cast<double>(e.steps.size());
      if (on_episode) on_episode(update, e.record);
    }
    const double n_ep = static_cast<double>(eps.size());
    pt.success_rate /= n_ep;
    pt.mean_return /= n_ep;
    pt.mean_length /= n_ep;

    Advantages a = gae(batch, cfg.ppo.gamma, cfg.ppo.lambda);
    normalize_advantages(a.adv);
    DiscreteModel model(bundle);
    pt.loss = ppo_update(model, batch, a.adv, a.ret, cfg.ppo, update_rng);
    bundle.obs_rms.update(raw);

    res.env_steps += static_cast<long>(batch.size());
    res.episodes += static_cast<long>(eps.size());
    pt.env_steps = res.env_steps;
    pt.episodes = res.episodes;
    res.curve.push_back(pt);
    if (on_curve) on_curve(pt);
  }
  return res;
}

}  // namespace mpseq

#endif  // MPSEQ_TRAIN_HPP_
