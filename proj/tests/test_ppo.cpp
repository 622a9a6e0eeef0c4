#include <gtest/gtest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>

#include "mpseq/checkpoint.hpp"
#include "mpseq/ppo.hpp"
#include "mpseq/train.hpp"

using namespace mpseq;

namespace {

Eigen::VectorXd random_vec(int n, Rng& rng, double scale = 1.0) {
  std::normal_distribution<double> g(0.0, scale);
  Eigen::VectorXd v(n);
  for (int i = 0; i < n; ++i) v[i] = g(rng);
  return v;
}

double max_rel_error(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  double worst = 0.0;
  for (Eigen::Index i = 0; i < a.size(); ++i) {
    const double den = std::max({std::abs(a[i]), std::abs(b[i]), 1e-6});
    worst = std::max(worst, std::abs(a[i] - b[i]) / den);
  }
  return worst;
}

std::vector<Transition> random_batch(const PolicyBundle& b, Rng& rng, int n, bool both_heads) {
  std::vector<Transition> out;
  for (int i = 0; i < n; ++i) {
    Transition t;
    t.obs = random_vec(kObsSize, rng);
    t.elapsed = (i % 20) / 20.0;
    t.head = both_heads && i % 3 == 0 ? Head::Contact : Head::Free;
    const Categorical d = forward_policy(b, t.obs, t.head == Head::Contact);
    t.action = d.sample(rng);
    t.logp = d.log_prob(t.action);
    t.value = forward_value(b, t.obs, t.elapsed);
    t.reward = -1.0;
    t.done = i % 5 == 4;
    out.push_back(t);
  }
  return out;
}

}  // namespace

TEST(ForwardPolicy, ZeroOutputLayerIsUniform) {
  Rng rng(1);
  PolicyBundle b = PolicyBundle::create(25, 64, rng, 0.0);
  const Eigen::VectorXd obs = random_vec(kObsSize, rng);
  const Categorical f = forward_policy(b, obs, false);
  const Categorical c = forward_policy(b, obs, true);
  EXPECT_EQ(f.size(), 25);
  EXPECT_EQ(c.size(), 64);
  for (int i = 0; i < 25; ++i) EXPECT_NEAR(f.prob(i), 1.0 / 25, 1e-15);
  for (int i = 0; i < 64; ++i) EXPECT_NEAR(c.prob(i), 1.0 / 64, 1e-15);
}

TEST(ForwardPolicy, ProbabilitiesAndLogProbsAgree) {
  Rng rng(2);
  for (int k = 0; k < 20; ++k) {
    PolicyBundle b = PolicyBundle::create(25, 64, rng, 3.0);
    const Eigen::VectorXd obs = random_vec(kObsSize, rng, 2.0);
    for (bool contact : {false, true}) {
      const Categorical d = forward_policy(b, obs, contact);
      EXPECT_NEAR(d.probs().sum(), 1.0, 1e-9);
      for (int a = 0; a < d.size(); ++a) EXPECT_NEAR(std::exp(d.log_prob(a)), d.prob(a), 1e-9);
      for (int s = 0; s < 50; ++s) {
        const int a = d.sample(rng);
        EXPECT_GE(a, 0);
        EXPECT_LT(a, d.size());
      }
    }
  }
}

TEST(ForwardPolicy, RejectsNonFiniteObservation) {
  Rng rng(3);
  const PolicyBundle b = PolicyBundle::create(25, 64, rng);
  Eigen::VectorXd obs = Eigen::VectorXd::Zero(kObsSize);
  obs[2] = std::nan("");
  EXPECT_THROW(forward_policy(b, obs, false), std::invalid_argument);
  EXPECT_THROW(forward_value(b, obs, 0.0), std::invalid_argument);
  EXPECT_THROW(forward_policy(b, Eigen::VectorXd::Zero(5), false), std::invalid_argument);
}

TEST(Surrogate, ShiftInvariantLogits) {
  Rng rng(4);
  for (int k = 0; k < 50; ++k) {
    const Eigen::VectorXd logits = random_vec(10, rng, 2.0);
    const Eigen::VectorXd shifted = logits.array() + 7.25;
    const Categorical a(logits), b(shifted);
    const int act = k % 10;
    const double old = a.log_prob(act) + 0.1 * (k % 5 - 2);
    const double adv = (k % 2 ? 1.0 : -1.0) * 0.8;
    EXPECT_NEAR(clipped_surrogate(a.log_prob(act), old, adv, 0.2).loss,
                clipped_surrogate(b.log_prob(act), old, adv, 0.2).loss, 1e-9);
    EXPECT_NEAR(a.entropy(), b.entropy(), 1e-9);
  }
}

TEST(Gae, LambdaZeroIsTdError) {
  const std::vector<double> r{-1, -0.5, -2, -0.1};
  const std::vector<double> v{0.3, -0.2, 0.7, 0.1};
  const std::vector<bool> d{false, false, false, true};
  const double g = 0.9;
  const Advantages a = gae(r, v, d, g, 0.0);
  for (int k = 0; k < 4; ++k) {
    const double next = k + 1 < 4 && !d[k] ? v[k + 1] : 0.0;
    EXPECT_DOUBLE_EQ(a.adv[k], r[k] + g * next - v[k]);
    EXPECT_DOUBLE_EQ(a.ret[k], a.adv[k] + v[k]);
  }
}

TEST(Gae, GammaZero) {
  const std::vector<double> r{-1, -0.5, -2};
  const std::vector<double> v{0.3, -0.2, 0.7};
  const Advantages a = gae(r, v, {false, false, true}, 0.0, 0.95);
  for (int k = 0; k < 3; ++k) EXPECT_DOUBLE_EQ(a.adv[k], r[k] - v[k]);
}

TEST(Gae, SingleStep) {
  const Advantages a = gae({-1.0}, {0.5}, {true}, 0.99, 0.95);
  EXPECT_DOUBLE_EQ(a.adv[0], -1.5);
}

TEST(Gae, EpisodesDoNotLeak) {
  const Advantages joint = gae({-1, -1, -3}, {0, 0, 0}, {false, true, true}, 0.9, 0.9);
  const Advantages second = gae({-3}, {0}, {true}, 0.9, 0.9);
  EXPECT_DOUBLE_EQ(joint.adv[2], second.adv[0]);
  EXPECT_DOUBLE_EQ(joint.adv[1], -1.0);
  EXPECT_THROW(gae({-1.0}, {0.5, 0.2}, {true}, 0.9, 0.9), std::invalid_argument);
}

TEST(MlpGrad, ToyNetFiniteDifferences) {
  Rng rng(5);
  Mlp net({6, 8, 4}, rng, 1.0);
  net.parameters() += random_vec(static_cast<int>(net.parameter_count()), rng, 0.1);
  const Eigen::VectorXd x = random_vec(6, rng);
  const int act = 2;
  // Loss: -A * log pi(a) - c * H, the shape used by the policy heads.
  auto loss = [&](const Mlp& m) {
    const Categorical d(m.forward(x));
    return -0.7 * d.log_prob(act) - 0.01 * d.entropy();
  };
  Mlp::Cache c;
  const Categorical d(net.forward(x, c));
  Eigen::VectorXd grad = Eigen::VectorXd::Zero(net.parameter_count());
  net.backward(c, -0.7 * d.grad_log_prob(act) - 0.01 * d.grad_entropy(), grad);

  Eigen::VectorXd fd(net.parameter_count());
  const double eps = 1e-5;
  for (Eigen::Index i = 0; i < fd.size(); ++i) {
    Mlp p = net, m = net;
    p.parameters()[i] += eps;
    m.parameters()[i] -= eps;
    fd[i] = (loss(p) - loss(m)) / (2 * eps);
  }
  EXPECT_LT(max_rel_error(grad, fd), 1e-4);
}

TEST(PpoUpdate, RatioOneGivesMinusMeanAdvantage) {
  Rng rng(6);
  PolicyBundle b = PolicyBundle::create(25, 64, rng);
  const auto batch = random_batch(b, rng, 40, false);
  std::vector<double> adv, ret;
  for (int i = 0; i < 40; ++i) {
    adv.push_back(std::sin(i * 1.3));
    ret.push_back(-1.0);
  }
  PpoConfig cfg;
  cfg.epochs = 1;
  cfg.minibatch = 40;
  const double mean = std::accumulate(adv.begin(), adv.end(), 0.0) / 40;
  DiscreteModel model(b);
  const LossStats st = ppo_update(model, batch, adv, ret, cfg, rng);
  EXPECT_NEAR(st.policy, -mean, 1e-12);
  EXPECT_NEAR(st.approx_kl, 0.0, 1e-12);
  EXPECT_EQ(st.clip_frac, 0.0);
}

TEST(PpoUpdate, ZeroAdvantagesOnlyMoveValue) {
  Rng rng(7);
  PolicyBundle b = PolicyBundle::create(25, 64, rng);
  const PolicyBundle before = b;
  const auto batch = random_batch(b, rng, 30, true);
  const std::vector<double> adv(30, 0.0), ret(30, -3.0);
  PpoConfig cfg;
  cfg.ent_coef = 0.0;
  DiscreteModel model(b);
  ppo_update(model, batch, adv, ret, cfg, rng);
  EXPECT_EQ(b.free_head.parameters(), before.free_head.parameters());
  EXPECT_EQ(b.contact_head.parameters(), before.contact_head.parameters());
  EXPECT_GT((b.value.parameters() - before.value.parameters()).norm(), 0.0);
}

TEST(PpoUpdate, ModelGradientsMatchFiniteDifferences) {
  Rng rng(8);
  PolicyBundle b = PolicyBundle::create(25, 64, rng, 1.0);
  const auto batch = random_batch(b, rng, 6, true);
  PpoConfig cfg;
  for (std::size_t k = 0; k < batch.size(); ++k) {
    Transition s = batch[k];
    s.logp += 0.05;  // ratio away from 1, inside the clip range
    const double adv = k % 2 ? 0.9 : -1.1, ret = -2.0;
    DiscreteModel m(b);
    m.zero_grad();
    LossStats st;
    m.accumulate(s, adv, ret, 1.0, 1.0, cfg, st);
    auto check = [&](Mlp& net, const Eigen::VectorXd& analytic) {
      Eigen::VectorXd fd(net.parameter_count());
      for (Eigen::Index i = 0; i < fd.size(); ++i) {
        const double keep = net.parameters()[i];
        net.parameters()[i] = keep + 1e-5;
        const double lp = DiscreteModel(b).loss(s, adv, ret, cfg);
        net.parameters()[i] = keep - 1e-5;
        const double lm = DiscreteModel(b).loss(s, adv, ret, cfg);
        net.parameters()[i] = keep;
        fd[i] = (lp - lm) / 2e-5;
      }
      EXPECT_LT(max_rel_error(analytic, fd), 1e-4);
    };
    check(b.value, m.value_grad());
    check(b.head(s.head), m.head_grad(s.head));
  }
}

TEST(PpoUpdate, RejectsMismatchedLengths) {
  Rng rng(9);
  PolicyBundle b = PolicyBundle::create(25, 64, rng);
  const auto batch = random_batch(b, rng, 5, false);
  DiscreteModel model(b);
  EXPECT_THROW(ppo_update(model, batch, std::vector<double>(4), std::vector<double>(5), PpoConfig{}, rng),
               std::invalid_argument);
}

TEST(PpoConfigValidate, Ranges) {
  PpoConfig c;
  c.gamma = 0.0;
  EXPECT_THROW(c.validate(), std::invalid_argument);
  c = {};
  c.clip_eps = 0.0;
  EXPECT_THROW(c.validate(), std::invalid_argument);
  c = {};
  c.lambda = 1.5;
  EXPECT_THROW(c.validate(), std::invalid_argument);
}

TEST(WarmStart, CopySemantics) {
  Rng rng(10);
  PolicyBundle src = PolicyBundle::create(25, 64, rng, 1.0);
  src.free_opt.t = 17;
  PolicyBundle copy = warm_start(src);
  EXPECT_EQ(copy.free_opt.t, 0);
  EXPECT_EQ(copy.free_opt.m, Eigen::VectorXd::Zero(copy.free_head.parameter_count()));
  for (int k = 0; k < 10; ++k) {
    const Eigen::VectorXd obs = random_vec(kObsSize, rng);
    for (bool c : {false, true})
      EXPECT_EQ(forward_policy(src, obs, c).probs(), forward_policy(copy, obs, c).probs());
  }
  const Eigen::VectorXd orig = src.contact_head.parameters();
  copy.contact_head.parameters().setConstant(0.5);
  EXPECT_EQ(src.contact_head.parameters(), orig);
}

TEST(WarmStart, ShapeMismatch) {
  Rng rng(11);
  const PolicyBundle a = PolicyBundle::create(25, 64, rng);
  const PolicyBundle b = PolicyBundle::create(25, 60, rng);
  EXPECT_THROW(warm_start(a, b), std::invalid_argument);
}

TEST(RunningMeanStd, MergeMatchesPooledStatistics) {
  Rng rng(12);
  std::vector<Eigen::VectorXd> all;
  RunningMeanStd rms(3);
  for (int chunk = 0; chunk < 4; ++chunk) {
    std::vector<Eigen::VectorXd> xs;
    for (int i = 0; i < 10 + chunk; ++i) xs.push_back(random_vec(3, rng, 1.0 + chunk));
    rms.update(xs);
    all.insert(all.end(), xs.begin(), xs.end());
  }
  Eigen::VectorXd mean = Eigen::VectorXd::Zero(3), var = Eigen::VectorXd::Zero(3);
  for (const auto& x : all) mean += x;
  mean /= static_cast<double>(all.size());
  for (const auto& x : all) var += (x - mean).cwiseAbs2();
  var /= static_cast<double>(all.size());
  EXPECT_LT((rms.mean - mean).norm(), 1e-12);
  EXPECT_LT((rms.var - var).norm(), 1e-12);
}

TEST(Checkpoint, RoundTripIsByteIdentical) {
  Rng rng(13);
  Checkpoint c;
  c.bundle = PolicyBundle::create(25, 64, rng, 1.0);
  c.bundle.obs_rms.update({random_vec(6, rng), random_vec(6, rng), random_vec(6, rng)});
  c.bundle.value_opt.m = random_vec(static_cast<int>(c.bundle.value.parameter_count()), rng);
  c.bundle.value_opt.t = 3;
  c.seed = 12345678901234ULL;
  c.config = {{"note", "x"}, {"lr", 0.1 + 0.2}};
  const std::string path = (std::filesystem::temp_directory_path() / "mpseq_test.ckpt").string();
  save_checkpoint(path, c);
  const Checkpoint back = load_checkpoint(path);
  EXPECT_EQ(checkpoint_text(back), checkpoint_text(c));
  EXPECT_EQ(back.bundle.value.parameters(), c.bundle.value.parameters());
  EXPECT_EQ(back.bundle.obs_rms.var, c.bundle.obs_rms.var);
  std::remove(path.c_str());
}

TEST(Checkpoint, RejectsGarbage) {
  EXPECT_THROW(checkpoint_from_text("not json"), std::runtime_error);
  EXPECT_THROW(checkpoint_from_text("{\"format\":\"other\"}"), std::runtime_error);
  EXPECT_THROW(load_checkpoint("/nonexistent/dir/x.ckpt"), std::runtime_error);
}

TEST(Train, DeterministicSingleThreaded) {
  const Catalog cat = build_catalog();
  TaskSpec task;
  task.geometry = build_geometry(Shape::Round);
  task.geometry.clearance = 0.2 * kMm;
  task.contact.f_noise_sigma = 0.0;
  task.contact.tau_noise_sigma = 0.0;
  const PerturbationSpec tc1{"TC1", 1, 1, 0, 0, Sampling::UniformInBox};
  TrainConfig cfg;
  cfg.budget_steps = 300;
  cfg.threads = 1;
  cfg.ppo.episodes_per_update = 4;
  auto run = [&] {
    Rng rng(cfg.ppo.seed);
    PolicyBundle b = PolicyBundle::create(25, 64, rng);
    const TrainResult r = train(b, task, cat, tc1, EnvConfig{}, cfg);
    return std::make_pair(r, b);
  };
  const auto [r1, b1] = run();
  const auto [r2, b2] = run();
  ASSERT_EQ(r1.curve.size(), r2.curve.size());
  for (std::size_t i = 0; i < r1.curve.size(); ++i) {
    EXPECT_EQ(r1.curve[i].mean_return, r2.curve[i].mean_return);
    EXPECT_EQ(r1.curve[i].loss.policy, r2.curve[i].loss.policy);
    EXPECT_GE(r1.curve[i].success_rate, 0.0);
    EXPECT_LE(r1.curve[i].success_rate, 1.0);
  }
  EXPECT_GE(r1.env_steps, cfg.budget_steps);
  EXPECT_EQ(b1.contact_head.parameters(), b2.contact_head.parameters());
}

TEST(Train, ThreadCountDoesNotChangeResult) {
  const Catalog cat = build_catalog();
  TaskSpec task;
  task.geometry = build_geometry(Shape::Round);
  task.geometry.clearance = 0.2 * kMm;
  const PerturbationSpec tc1{"TC1", 1, 1, 0, 0, Sampling::UniformInBox};
  TrainConfig cfg;
  cfg.budget_steps = 150;
  cfg.ppo.episodes_per_update = 4;
  auto run = [&](int threads) {
    cfg.threads = threads;
    Rng rng(cfg.ppo.seed);
    PolicyBundle b = PolicyBundle::create(25, 64, rng);
    train(b, task, cat, tc1, EnvConfig{}, cfg);
    return b.value.parameters();
  };
  EXPECT_EQ(run(1), run(3));
}
