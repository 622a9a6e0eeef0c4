#ifndef MPSEQ_PPO_HPP_
#define MPSEQ_PPO_HPP_

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "mpseq/mlp.hpp"

namespace mpseq {

struct PpoConfig {
  double gamma = 0.99;
  double lambda = 0.95;
  double clip_eps = 0.2;
  int epochs = 4;
  int minibatch = 64;
  double lr = 3e-4;
  double ent_coef = 0.01;
  double vf_coef = 0.5;
  double max_grad_norm = 0.5;
  int episodes_per_update = 32;
  std::uint64_t seed = 1;

  void validate() const {
    if (!(gamma > 0.0 && gamma <= 1.0)) throw std::invalid_argument("ppo: gamma must be in (0, 1]");
    if (!(lambda >= 0.0 && lambda <= 1.0)) throw std::invalid_argument("ppo: lambda must be in [0, 1]");
    if (!(clip_eps > 0.0)) throw std::invalid_argument("ppo: clip_eps must be > 0");
    if (epochs < 1 || minibatch < 1 || episodes_per_update < 1)
      throw std::invalid_argument("ppo: epochs, minibatch and episodes_per_update must be >= 1");
    if (!(lr > 0.0)) throw std::invalid_argument("ppo: lr must be > 0");
  }
};

/// Softmax distribution over one head's logits.
class Categorical {
 public:
  explicit Categorical(const Eigen::VectorXd& logits) {
    const double m = logits.maxCoeff();
    const Eigen::ArrayXd e = (logits.array() - m).exp();
    const double s = e.sum();
    logp_ = logits.array() - m - std::log(s);
    p_ = e / s;
  }

  int size() const { return static_cast<int>(p_.size()); }
  const Eigen::VectorXd& probs() const { return p_; }
  double prob(int a) const { return p_[a]; }
  double log_prob(int a) const { return logp_[a]; }
  double entropy() const { return -(p_.array() * logp_.array()).sum(); }

  int mode() const {
    Eigen::Index i = 0;
    p_.maxCoeff(&i);
    return static_cast<int>(i);
  }

  template <class Gen>
  int sample(Gen& rng) const {
    const double u = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
    double c = 0.0;
    for (int i = 0; i < size(); ++i) {
      c += p_[i];
      if (u < c) return i;
    }
    return size() - 1;
  }

  // Gradients w.r.t. the logits.
  Eigen::VectorXd grad_log_prob(int a) const {
    Eigen::VectorXd g = -p_;
    g[a] += 1.0;
    return g;
  }
  Eigen::VectorXd grad_entropy() const {
    const double h = entropy();
    return (-(p_.array() * (logp_.array() + h))).matrix();
  }

 private:
  Eigen::VectorXd p_;
  Eigen::VectorXd logp_;
};

inline constexpr int kObsSize = 6;
inline constexpr int kHidden = 64;
// The critic also sees the elapsed fraction of the episode. Episodes are cut
// at a step limit the pose cannot reveal, so without it returns-to-go are
// aliased in time and late actions look better than they are.
inline constexpr int kCriticSize = kObsSize + 1;

inline Eigen::VectorXd critic_input(const Eigen::VectorXd& obs, double elapsed) {
  Eigen::VectorXd x(obs.size() + 1);
  x << obs, elapsed;
  return x;
}

enum class Head { Free = 0, Contact = 1 };

/// Value net plus the two gated policy heads, their optimizer state and the
/// observation normalizer.
struct PolicyBundle {
  Mlp value;
  Mlp free_head;
  Mlp contact_head;
  RunningMeanStd obs_rms{kObsSize};
  AdamState value_opt;
  AdamState free_opt;
  AdamState contact_opt;

  static PolicyBundle create(int n_free, int n_contact, Rng& rng, double head_gain = 0.01) {
    PolicyBundle b;
    b.value = Mlp({kCriticSize, kHidden, kHidden, 1}, rng, 1.0);
    b.free_head = Mlp({kObsSize, kHidden, kHidden, n_free}, rng, head_gain);
    b.contact_head = Mlp({kObsSize, kHidden, kHidden, n_contact}, rng, head_gain);
    b.reset_optimizers();
    return b;
  }

  void reset_optimizers() {
    value_opt.reset(value.parameter_count());
    free_opt.reset(free_head.parameter_count());
    contact_opt.reset(contact_head.parameter_count());
  }

  const Mlp& head(Head h) const { return h == Head::Free ? free_head : contact_head; }
  Mlp& head(Head h) { return h == Head::Free ? free_head : contact_head; }
};

inline void require_finite_obs(const Eigen::VectorXd& obs) {
  if (obs.size() != kObsSize) throw std::invalid_argument("policy: observation must have 6 entries");
  if (!obs.allFinite()) throw std::invalid_argument("policy: non-finite observation");
}

/// Distribution of the head selected by the contact flag. `obs` is already
/// normalized.
inline Categorical forward_policy(const PolicyBundle& b, const Eigen::VectorXd& obs, bool contact) {
  require_finite_obs(obs);
  return Categorical(b.head(contact ? Head::Contact : Head::Free).forward(obs));
}

/// `elapsed` = step index / step limit.
inline double forward_value(const PolicyBundle& b, const Eigen::VectorXd& obs, double elapsed) {
  require_finite_obs(obs);
  return b.value.forward(critic_input(obs, elapsed))[0];
}

/// Deep copy for curriculum training. Parameters and normalizer carry over;
/// optimizer moments start fresh.
inline PolicyBundle warm_start(const PolicyBundle& src, const PolicyBundle& like) {
  auto check = [](const Mlp& a, const Mlp& b, const char* name) {
    if (a.sizes() != b.sizes())
      throw std::invalid_argument(std::string("warm_start: shape mismatch in ") + name);
  };
  check(src.value, like.value, "value net");
  check(src.free_head, like.free_head, "free-space head");
  check(src.contact_head, like.contact_head, "in-contact head");
  PolicyBundle out = src;
  out.reset_optimizers();
  return out;
}

inline PolicyBundle warm_start(const PolicyBundle& src) { return warm_start(src, src); }

// One collected transition of the discrete agent.
struct Transition {
  Eigen::VectorXd obs;  // normalized
  double elapsed = 0.0; // step index / step limit
  Head head = Head::Free;
  int action = 0;       // index within the head
  double logp = 0.0;
  double value = 0.0;
  double reward = 0.0;
  bool done = false;
};

struct Advantages {
  std::vector<double> adv;
  std::vector<double> ret;
};

/// Generalized advantage estimation over a concatenation of episodes. The
/// last transition of every episode must carry done = true.
inline Advantages gae(const std::vector<double>& rewards, const std::vector<double>& values,
                      const std::vector<bool>& dones, double gamma, double lambda) {
  const std::size_t n = rewards.size();
  if (values.size() != n || dones.size() != n) throw std::invalid_argument("gae: length mismatch");
  Advantages out;
  out.adv.assign(n, 0.0);
  out.ret.assign(n, 0.0);
  double next_adv = 0.0;
  double next_v = 0.0;
  for (std::size_t k = n; k-- > 0;) {
    const double live = dones[k] ? 0.0 : 1.0;
    const double delta = rewards[k] + gamma * next_v * live - values[k];
    out.adv[k] = delta + gamma * lambda * live * next_adv;
    out.ret[k] = out.adv[k] + values[k];
    next_adv = out.adv[k];
    next_v = values[k];
  }
  return out;
}

inline Advantages gae(const std::vector<Transition>& traj, double gamma, double lambda) {
  std::vector<double> r, v;
  std::vector<bool> d;
  for (const auto& t : traj) {
    r.push_back(t.reward);
    v.push_back(t.value);
    d.push_back(t.done);
  }
  return gae(r, v, d, gamma, lambda);
}

inline void normalize_advantages(std::vector<double>& adv) {
  if (adv.size() < 2) return;
  const double n = static_cast<double>(adv.size());
  const double mean = std::accumulate(adv.begin(), adv.end(), 0.0) / n;
  double var = 0.0;
  for (double a : adv) var += (a - mean) * (a - mean);
  const double sd = std::sqrt(var / n) + 1e-8;
  for (double& a : adv) a = (a - mean) / sd;
}

struct LossStats {
  double policy = 0.0;
  double value = 0.0;
  double entropy = 0.0;
  double approx_kl = 0.0;
  double clip_frac = 0.0;
  int samples = 0;
};

/// Per-sample loss coefficients shared by every model: the clipped surrogate
/// term -min(rho A, clip(rho) A) differentiated w.r.t. the new log-prob.
struct SurrogateTerm {
  double loss = 0.0;
  double dlogp = 0.0;
  bool clipped = false;
};

inline SurrogateTerm clipped_surrogate(double logp_new, double logp_old, double adv, double clip_eps) {
  const double rho = std::exp(logp_new - logp_old);
  const double unclipped = rho * adv;
  const double clipped = std::clamp(rho, 1.0 - clip_eps, 1.0 + clip_eps) * adv;
  SurrogateTerm t;
  if (unclipped <= clipped) {
    t.loss = -unclipped;
    t.dlogp = -unclipped;
  } else {
    t.loss = -clipped;
    t.clipped = true;
  }
  return t;
}

/// Discrete agent adapter for ppo_update. A model provides zero_grad,
/// accumulate (loss and gradient of one sample with weight w) and step.
class DiscreteModel {
 public:
  using Sample = Transition;

  explicit DiscreteModel(PolicyBundle& b) : b_(&b) {}

  void zero_grad() {
    gv_ = Eigen::VectorXd::Zero(b_->value.parameter_count());
    gf_ = Eigen::VectorXd::Zero(b_->free_head.parameter_count());
    gc_ = Eigen::VectorXd::Zero(b_->contact_head.parameter_count());
  }

  static int group(const Transition& s) { return s.head == Head::Free ? 0 : 1; }

  // wp weights the policy terms, wv the value term.
  void accumulate(const Transition& s, double adv, double ret, double wp, double wv, const PpoConfig& cfg,
                  LossStats& st) {
    const Mlp& net = b_->head(s.head);
    Mlp::Cache pc;
    const Categorical dist(net.forward(s.obs, pc));
    const double logp = dist.log_prob(s.action);
    const SurrogateTerm sur = clipped_surrogate(logp, s.logp, adv, cfg.clip_eps);
    const double ent = dist.entropy();
    Eigen::VectorXd g_logits = wp * (sur.dlogp * dist.grad_log_prob(s.action) -
                                    cfg.ent_coef * dist.grad_entropy());
    net.backward(pc, g_logits, s.head == Head::Free ? gf_ : gc_);

    Mlp::Cache vc;
    const double v = b_->value.forward(critic_input(s.obs, s.elapsed), vc)[0];
    Eigen::VectorXd g_v(1);
    g_v[0] = wv * cfg.vf_coef * (v - ret);
    b_->value.backward(vc, g_v, gv_);

    st.policy += wp * sur.loss;
    st.value += wv * 0.5 * (v - ret) * (v - ret);
    st.entropy += wv * ent;
    st.approx_kl += wv * (s.logp - logp);
    st.clip_frac += wv * (sur.clipped ? 1.0 : 0.0);
  }

  // Total loss of the sample as used by accumulate (for gradient checks).
  double loss(const Transition& s, double adv, double ret, const PpoConfig& cfg) const {
    const Categorical dist(b_->head(s.head).forward(s.obs));
    const double v = b_->value.forward(critic_input(s.obs, s.elapsed))[0];
    return clipped_surrogate(dist.log_prob(s.action), s.logp, adv, cfg.clip_eps).loss +
           cfg.vf_coef * 0.5 * (v - ret) * (v - ret) - cfg.ent_coef * dist.entropy();
  }

  const Eigen::VectorXd& value_grad() const { return gv_; }
  const Eigen::VectorXd& head_grad(Head h) const { return h == Head::Free ? gf_ : gc_; }

  void step(const PpoConfig& cfg) {
    const AdamConfig ac{cfg.lr};
    clip_and_step(b_->value.parameters(), gv_, b_->value_opt, ac, cfg.max_grad_norm);
    clip_and_step(b_->free_head.parameters(), gf_, b_->free_opt, ac, cfg.max_grad_norm);
    clip_and_step(b_->contact_head.parameters(), gc_, b_->contact_opt, ac, cfg.max_grad_norm);
  }

  static void clip_and_step(Eigen::VectorXd& theta, Eigen::VectorXd& g, AdamState& s,
                            const AdamConfig& ac, double max_norm) {
    const double n = g.norm();
    if (max_norm > 0.0 && n > max_norm) g *= max_norm / n;
    adam_step(theta, g, s, ac);
  }

 private:
  PolicyBundle* b_;
  Eigen::VectorXd gv_, gf_, gc_;
};

/// Clipped-surrogate update over a collected batch. `adv` should already be
/// normalized. Within a minibatch the policy and entropy terms are averaged
/// per group (policy head) and summed over groups, so a head that is rarely
/// visited still gets a full-strength update. The value loss is a plain mean.
/// With rho = 1 and a single group the policy loss equals -mean(A).
template <class Model>
LossStats ppo_update(Model& model, const std::vector<typename Model::Sample>& batch,
                     const std::vector<double>& adv, const std::vector<double>& ret,
                     const PpoConfig& cfg, Rng& rng) {
  cfg.validate();
  if (adv.size() != batch.size() || ret.size() != batch.size())
    throw std::invalid_argument("ppo_update: advantage/return length mismatch");
  LossStats total;
  if (batch.empty()) return total;
  std::vector<std::size_t> idx(batch.size());
  std::iota(idx.begin(), idx.end(), 0);
  int n_mb = 0;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::shuffle(idx.begin(), idx.end(), rng);
    for (std::size_t start = 0; start < idx.size(); start += cfg.minibatch) {
      const std::size_t end = std::min(idx.size(), start + static_cast<std::size_t>(cfg.minibatch));
      const double wv = 1.0 / static_cast<double>(end - start);
      std::array<int, 2> count{0, 0};
      for (std::size_t k = start; k < end; ++k) ++count.at(Model::group(batch[idx[k]]));
      LossStats st;
      model.zero_grad();
      for (std::size_t k = start; k < end; ++k) {
        const std::size_t i = idx[k];
        const double wp = 1.0 / count[Model::group(batch[i])];
        model.accumulate(batch[i], adv[i], ret[i], wp, wv, cfg, st);
      }
      const double l = st.policy + cfg.vf_coef * st.value - cfg.ent_coef * st.entropy;
      if (!std::isfinite(l)) {
        std::ostringstream os;
        os << "ppo_update: non-finite loss (policy " << st.policy << ", value " << st.value
           << ", entropy " << st.entropy << ") at epoch " << epoch << ", minibatch starting " << start;
        throw std::runtime_error(os.str());
      }
      model.step(cfg);
      total.policy += st.policy;
      total.value += st.value;
      total.entropy += st.entropy;
      total.approx_kl += st.approx_kl;
      total.clip_frac += st.clip_frac;
      ++n_mb;
    }
  }
  total.policy /= n_mb;
  total.value /= n_mb;
  total.entropy /= n_mb;
  total.approx_kl /= n_mb;
  total.clip_frac /= n_mb;
  total.samples = static_cast<int>(batch.size());
  return total;
}

}  // namespace mpseq

#endif  // MPSEQ_PPO_HPP_
