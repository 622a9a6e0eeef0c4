#include <gtest/gtest.h>

#include <cstdio>
#include <filesystem>

#include "mpseq/harness.hpp"

using namespace mpseq;

namespace {

std::string temp_path(const std::string& name) {
  return (std::filesystem::temp_directory_path() / name).string();
}

TaskSpec round_task() {
  TaskFile t = TaskFile::from_preset("round");
  t.clearance_mm = 0.2;
  return t.spec();
}

}  // namespace

TEST(Presets, AllConditions) {
  const PerturbationSpec tc1 = preset("TC1");
  EXPECT_EQ(tc1.init_pos_mm, 1.0);
  EXPECT_EQ(tc1.init_rot_deg, 1.0);
  EXPECT_EQ(tc1.hole_pos_mm, 0.0);
  EXPECT_EQ(tc1.hole_rot_deg, 0.0);
  EXPECT_EQ(tc1.sampling, Sampling::UniformInBox);
  const PerturbationSpec tc2 = preset("TC2");
  EXPECT_EQ(tc2.init_pos_mm, 2.0);
  EXPECT_EQ(tc2.hole_pos_mm, 1.0);
  EXPECT_EQ(tc2.sampling, Sampling::UniformInBox);
  const PerturbationSpec ec1 = preset("EC1");
  EXPECT_EQ(ec1.init_pos_mm, 0.0);
  EXPECT_EQ(ec1.hole_pos_mm, 0.5);
  EXPECT_EQ(ec1.sampling, Sampling::OnBoundary);
  const PerturbationSpec ec2 = preset("EC2");
  EXPECT_EQ(ec2.hole_pos_mm, 1.5);
  EXPECT_EQ(ec2.hole_rot_deg, 1.5);
  const PerturbationSpec ec3 = preset("EC3");
  EXPECT_EQ(ec3.init_pos_mm, 1.0);
  EXPECT_EQ(ec3.hole_rot_deg, 0.5);
  EXPECT_EQ(ec3.sampling, Sampling::OnBoundary);
  EXPECT_THROW(preset("TC3"), ConfigError);
}

TEST(Wilson, IntervalOrdered) {
  for (int n : {1, 10, 50}) {
    for (int k = 0; k <= n; ++k) {
      const auto [lo, hi] = wilson_interval(k, n);
      EXPECT_LE(0.0, lo);
      EXPECT_LE(lo, static_cast<double>(k) / n + 1e-12);
      EXPECT_LE(static_cast<double>(k) / n - 1e-12, hi);
      EXPECT_LE(hi, 1.0);
    }
  }
  const auto [lo, hi] = wilson_interval(25, 50);
  EXPECT_NEAR(lo, 0.366, 1e-3);
  EXPECT_NEAR(hi, 0.634, 1e-3);
}

TEST(TaskFile, RoundTripIsBitExact) {
  TaskFile t = TaskFile::from_preset("triangle");
  t.clearance_mm = 0.1 + 0.2;
  t.contact.mu = 1.0 / 3.0;
  t.contact.k_p = 123456.789;
  const std::string path = temp_path("mpseq_task.json");
  save_task_file(path, t);
  const TaskFile back = load_task_file(path);
  EXPECT_EQ(back.name, t.name);
  EXPECT_EQ(back.shape, t.shape);
  EXPECT_EQ(back.hole_size_mm, t.hole_size_mm);
  EXPECT_EQ(back.clearance_mm, t.clearance_mm);
  EXPECT_EQ(back.insertion_depth_mm, t.insertion_depth_mm);
  EXPECT_EQ(back.contact.mu, t.contact.mu);
  EXPECT_EQ(back.contact.k_p, t.contact.k_p);
  EXPECT_EQ(back.contact.chamfer, t.contact.chamfer);
  EXPECT_EQ(task_to_json(back).dump(), task_to_json(t).dump());
  std::remove(path.c_str());
}

TEST(TaskFile, PresetsMatchGeometryTable) {
  for (const char* name : {"round", "round_tight", "square", "triangle"}) {
    const TaskSpec s = TaskFile::from_preset(name).spec();
    const TaskGeometry g = build_geometry(name);
    EXPECT_EQ(s.geometry.hole_size, g.hole_size) << name;
    EXPECT_EQ(s.geometry.clearance, g.clearance) << name;
    EXPECT_EQ(s.geometry.insertion_depth, g.insertion_depth) << name;
  }
  EXPECT_THROW(TaskFile::from_preset("hexagon"), ConfigError);
}

TEST(Config, UnknownKeysRejected) {
  EXPECT_THROW(experiment_from_json(Json::parse(R"({"conditon": "TC1"})")), ConfigError);
  EXPECT_THROW(task_from_json(Json::parse(R"({"preset": "round", "clearence_mm": 0.2})")), ConfigError);
  EXPECT_THROW(task_from_json(Json::parse(R"({"preset": "round", "contact": {"kp": 1}})")), ConfigError);
  EXPECT_THROW(task_from_json(Json::parse(R"({"preset": "round", "clearance_mm": -1})")), ConfigError);
  EXPECT_THROW(parse_json("{", "inline"), ConfigError);
  EXPECT_THROW(read_file("/nonexistent/config.json"), ConfigError);
}

TEST(Config, ExperimentRoundTrip) {
  ExperimentConfig c;
  c.condition = "EC2";
  c.train.ppo.lr = 1e-3 / 3.0;
  c.env.reward.k1 = 2.5e-4;
  c.baseline.w_d = 7.5;
  const ExperimentConfig back = experiment_from_json(experiment_to_json(c));
  EXPECT_EQ(experiment_to_json(back).dump(), experiment_to_json(c).dump());
  EXPECT_EQ(back.train.ppo.lr, c.train.ppo.lr);
  EXPECT_EQ(back.env.reward.k1, c.env.reward.k1);
}

TEST(Config, PartialOverride) {
  const ExperimentConfig c = experiment_from_json(Json::parse(R"({"train": {"budget_steps": 1234}})"));
  EXPECT_EQ(c.train.budget_steps, 1234);
  EXPECT_EQ(c.train.ppo.lr, PpoConfig{}.lr);
  EXPECT_EQ(c.condition, "TC1");
}

TEST(Records, JsonRoundTrip) {
  const Catalog cat = build_catalog();
  PegEnv env(round_task(), cat);
  Rng rng(3);
  env.reset(preset("TC1"), rng);
  while (!env.done()) env.step(feasible_actions(env.state(), cat).front());
  const EpisodeRecord r = env.record();
  const EpisodeRecord back = record_from_json(Json::parse(record_to_json(r).dump()));
  EXPECT_EQ(record_to_json(back).dump(), record_to_json(r).dump());
}

TEST(Replay, ReproducesLoggedEpisode) {
  const Catalog cat = build_catalog();
  PegEnv env(round_task(), cat);
  Rng rng(4);
  env.reset(preset("TC2"), rng);
  const std::vector<int> plan{0, 88, 30, 88};
  for (int id : plan) {
    if (env.done()) break;
    const auto& f = feasible_actions(env.state(), cat);
    env.step(std::find(f.begin(), f.end(), id) != f.end() ? id : f.front());
  }
  const EpisodeRecord rec = env.record();
  PegEnv again(round_task(), cat);
  const EpisodeRecord re = replay(again, rec);
  EXPECT_EQ(record_to_json(re).dump(), record_to_json(rec).dump());
}

TEST(Evaluate, DeterministicAndThreadIndependent) {
  const Catalog cat = build_catalog();
  Rng rng(5);
  const PolicyBundle b = PolicyBundle::create(25, 64, rng, 1.0);
  EvalOptions opt;
  opt.trials = 6;
  std::vector<EpisodeRecord> r1, r2;
  const EvalReport a = evaluate(b, round_task(), cat, EnvConfig{}, preset("TC1"), opt, &r1);
  opt.threads = 3;
  const EvalReport c = evaluate(b, round_task(), cat, EnvConfig{}, preset("TC1"), opt, &r2);
  EXPECT_EQ(a.successes, c.successes);
  EXPECT_EQ(a.mean_length, c.mean_length);
  for (int i = 0; i < 6; ++i) EXPECT_EQ(record_to_json(r1[i]).dump(), record_to_json(r2[i]).dump());
  EXPECT_EQ(a.trials, 6);
  EXPECT_LE(a.ci_low, a.success_rate);
  EXPECT_GE(a.ci_high, a.success_rate);
}

TEST(Evaluate, ScriptedSeesSameOffsets) {
  const Catalog cat = build_catalog();
  Rng rng(6);
  const PolicyBundle b = PolicyBundle::create(25, 64, rng);
  EvalOptions opt;
  opt.trials = 4;
  std::vector<EpisodeRecord> learned, scripted;
  evaluate(b, round_task(), cat, EnvConfig{}, preset("EC2"), opt, &learned);
  evaluate_scripted(manual_sequence(cat), round_task(), cat, EnvConfig{}, preset("EC2"), opt, &scripted);
  for (int i = 0; i < 4; ++i) {
    EXPECT_EQ(learned[i].dp_hole, scripted[i].dp_hole);
    EXPECT_EQ(learned[i].dp_init, scripted[i].dp_init);
  }
}

TEST(TransferMatrix, ShapeAndDiagonal) {
  const Catalog cat = build_catalog();
  Rng rng(7);
  const PolicyBundle a = PolicyBundle::create(25, 64, rng, 1.0);
  const PolicyBundle b = PolicyBundle::create(25, 64, rng, 1.0);
  const PolicyBundle c = PolicyBundle::create(25, 64, rng, 1.0);
  std::vector<TaskSpec> tasks;
  for (const char* n : {"round", "square", "triangle"}) tasks.push_back(TaskFile::from_preset(n).spec());
  EvalOptions opt;
  opt.trials = 2;
  const auto m = transfer_matrix({{"round", &a}, {"square", &b}, {"triangle", &c}}, tasks, cat, EnvConfig{},
                                 preset("EC2"), opt);
  ASSERT_EQ(m.size(), 3u);
  for (const auto& row : m) ASSERT_EQ(row.size(), 3u);
  EXPECT_EQ(m[1][0].condition, "square->round/EC2");
  // The diagonal entry is the plain evaluation of that policy on its own task.
  const EvalReport d = evaluate(b, tasks[1], cat, EnvConfig{}, preset("EC2"), opt);
  EXPECT_EQ(m[1][1].successes, d.successes);
  EXPECT_EQ(m[1][1].mean_length, d.mean_length);
  EXPECT_THROW(transfer_matrix({{"x", nullptr}}, tasks, cat, EnvConfig{}, preset("EC2"), opt),
               std::invalid_argument);
}

TEST(Curves, StepsToSuccess) {
  std::vector<CurvePoint> c(3);
  c[0].env_steps = 100;
  c[0].success_rate = 0.2;
  c[1].env_steps = 200;
  c[1].success_rate = 0.5;
  c[2].env_steps = 300;
  c[2].success_rate = 0.9;
  EXPECT_EQ(steps_to_success(c, 0.5), 200);
  EXPECT_EQ(steps_to_success(c, 0.95), -1);
}

TEST(Manifest, ConfigHash) {
  EXPECT_EQ(hex64(fnv1a("")), "cbf29ce484222325");
  EXPECT_NE(fnv1a("a"), fnv1a("b"));
  const Json cfg = experiment_to_json(ExperimentConfig{});
  const Json m = make_manifest("train", cfg, 3, {"policy.ckpt"});
  EXPECT_EQ(m["config_hash"], hex64(fnv1a(cfg.dump())));
  EXPECT_EQ(m["version"], MPSEQ_VERSION);
}

TEST(Plots, SvgWellFormed) {
  const std::string s = svg_line_plot("t", "x", "y", {Series{"a", {0, 1, 2}, {0, 0.5, 1}}});
  EXPECT_EQ(s.rfind("<svg", 0), 0u);
  EXPECT_NE(s.find("</svg>"), std::string::npos);
  EvalReport r;
  r.condition = "TC1";
  r.success_rate = 0.5;
  const std::string b = svg_bar_chart("bars", {r});
  EXPECT_NE(b.find("</svg>"), std::string::npos);
}
