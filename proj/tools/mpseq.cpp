// Command line front end: train, eval, transfer, baseline, catalog, replay.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "mpseq/harness.hpp"

namespace fs = std::filesystem;
using namespace mpseq;

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitRuntime = 3;

struct CommonFlags {
  std::string config_path;
  std::string task;
  double clearance_mm = 0.0;
  std::string condition;
  std::uint64_t seed = 0;
  std::string out;
  int threads = 0;
  bool no_noise = false;
  CLI::Option* o_task = nullptr;
  CLI::Option* o_clear = nullptr;
  CLI::Option* o_cond = nullptr;
  CLI::Option* o_seed = nullptr;
  CLI::Option* o_out = nullptr;
  CLI::Option* o_threads = nullptr;

  void add(CLI::App* app) {
    app->add_option("--config", config_path, "JSON experiment config; its values override flags");
    o_task = app->add_option("--task", task, "task preset: round, round_tight, square, triangle");
    o_clear = app->add_option("--clearance-mm", clearance_mm, "override the task clearance");
    o_cond = app->add_option("--preset,--condition", condition, "TC1, TC2, EC1, EC2 or EC3");
    o_seed = app->add_option("--seed", seed, "master seed");
    o_out = app->add_option("--out", out, "output directory");
    o_threads = app->add_option("--threads", threads, "collection threads (0: automatic)");
    app->add_flag("--no-noise", no_noise, "disable sensor noise");
  }

  ExperimentConfig resolve(ExperimentConfig c) const {
    if (*o_task) c.task = TaskFile::from_preset(task);
    if (*o_clear) c.task.clearance_mm = clearance_mm;
    if (*o_cond) c.condition = condition;
    if (*o_seed) c.seed = seed;
    if (*o_out) c.out_dir = out;
    if (*o_threads) c.train.threads = threads;
    if (no_noise) {
      c.task.contact.f_noise_sigma = 0.0;
      c.task.contact.tau_noise_sigma = 0.0;
    }
    if (!config_path.empty()) c = experiment_from_json(parse_json(read_file(config_path), config_path), c);
    return experiment_from_json(experiment_to_json(c));
  }
};

void ensure_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw std::runtime_error("cannot create " + dir + ": " + ec.message());
}

std::string path_in(const std::string& dir, const std::string& name) { return (fs::path(dir) / name).string(); }

void write_manifest(const std::string& dir, const std::string& command, const ExperimentConfig& c,
                    const std::vector<std::string>& files) {
  write_file(path_in(dir, "manifest.json"),
             make_manifest(command, experiment_to_json(c), c.seed, files).dump(2) + "\n");
}

std::string report_line(const EvalReport& r) {
  char buf[256];
  std::snprintf(buf, sizeof buf, "%-24s %-12s %4d/%-4d  %.3f  [%.3f, %.3f]  len %.2f  t %.2fs",
                r.condition.c_str(), r.task.c_str(), r.successes, r.trials, r.success_rate, r.ci_low,
                r.ci_high, r.mean_length, r.mean_duration);
  return buf;
}

EvalOptions eval_options(const ExperimentConfig& c, int trials) {
  EvalOptions o;
  o.trials = trials;
  o.seed = c.eval_seed;
  o.threads = resolve_threads(c.train.workers, c.train.threads);
  return o;
}

// ---------------------------------------------------------------------------

int cmd_train(const CommonFlags& f, long budget, const std::string& init_from) {
  ExperimentConfig c = f.resolve({});
  if (budget > 0) c.train.budget_steps = budget;
  c = experiment_from_json(experiment_to_json(c));
  const TaskSpec task = c.task.spec();
  const PerturbationSpec cond = preset(c.condition);
  const Catalog cat = build_catalog();

  Rng init_rng(splitmix64(c.seed));
  PolicyBundle bundle = PolicyBundle::create(static_cast<int>(cat.free_indices.size()),
                                             static_cast<int>(cat.contact_indices.size()), init_rng);
  if (!init_from.empty()) bundle = warm_start(load_checkpoint(init_from).bundle, bundle);

  ensure_dir(c.out_dir);
  std::ofstream curve_log(path_in(c.out_dir, "curve.jsonl"), std::ios::binary);
  std::ofstream episode_log(path_in(c.out_dir, "episodes.jsonl"), std::ios::binary);
  if (!curve_log || !episode_log) throw std::runtime_error("cannot open logs in " + c.out_dir);

  const TrainResult res = train(
      bundle, task, cat, cond, c.env, c.train,
      [&](const CurvePoint& p) {
        curve_log << curve_point_to_json(p).dump() << "\n";
        std::fprintf(stderr, "update %4d  steps %7ld  success %.3f  return %8.3f  length %5.2f\n", p.update,
                     p.env_steps, p.success_rate, p.mean_return, p.mean_length);
      },
      [&](int update, const EpisodeRecord& r) {
        Json j = record_to_json(r);
        j["update"] = update;
        episode_log << j.dump() << "\n";
      });

  Checkpoint ck{bundle, experiment_to_json(c), c.seed};
  save_checkpoint(path_in(c.out_dir, "policy.ckpt"), ck);

  Series s{"success rate", {}, {}};
  Series ret{"mean return / 20", {}, {}, "#d62728"};
  for (const auto& p : res.curve) {
    s.x.push_back(static_cast<double>(p.env_steps));
    s.y.push_back(p.success_rate);
    ret.x.push_back(static_cast<double>(p.env_steps));
    ret.y.push_back(p.mean_return / c.env.max_steps);
  }
  write_file(path_in(c.out_dir, "curve.svg"),
             svg_line_plot("Training " + task.name + " " + c.condition, "environment steps", "", {s, ret}));

  std::vector<EpisodeRecord> recs;
  const EvalReport rep = evaluate(bundle, task, cat, c.env, cond, eval_options(c, c.eval_trials), &recs);
  write_file(path_in(c.out_dir, "eval.json"), report_to_json(rep).dump(2) + "\n");
  write_file(path_in(c.out_dir, "summary.txt"), report_line(rep) + "\n");
  write_manifest(c.out_dir, init_from.empty() ? "train" : "train --init-from " + init_from, c,
                 {"policy.ckpt", "curve.jsonl", "episodes.jsonl", "curve.svg", "eval.json", "summary.txt"});
  std::cout << report_line(rep) << "\n";
  return 0;
}

int cmd_eval(const CommonFlags& f, const std::string& ckpt_path, int trials, bool all_conditions) {
  if (!fs::exists(ckpt_path)) throw ConfigError("checkpoint not found: " + ckpt_path);
  const Checkpoint ck = load_checkpoint(ckpt_path);
  ExperimentConfig base;
  try {
    base = experiment_from_json(ck.config);
  } catch (const ConfigError&) {
  }
  ExperimentConfig c = f.resolve(base);
  if (trials > 0) c.eval_trials = trials;
  if (!f.o_out->count()) c.out_dir = path_in(fs::path(ckpt_path).parent_path().string(), "eval");
  const TaskSpec task = c.task.spec();
  const Catalog cat = build_catalog();

  std::vector<std::string> conds = all_conditions ? preset_names() : std::vector<std::string>{c.condition};
  std::vector<EvalReport> reports;
  std::string episodes, summary;
  for (const auto& name : conds) {
    std::vector<EpisodeRecord> recs;
    reports.push_back(evaluate(ck.bundle, task, cat, c.env, preset(name), eval_options(c, c.eval_trials), &recs));
    for (const auto& r : recs) episodes += record_to_json(r).dump() + "\n";
    summary += report_line(reports.back()) + "\n";
  }
  ensure_dir(c.out_dir);
  Json arr = Json::array();
  for (const auto& r : reports) arr.push_back(report_to_json(r));
  write_file(path_in(c.out_dir, "report.json"), arr.dump(2) + "\n");
  write_file(path_in(c.out_dir, "episodes.jsonl"), episodes);
  write_file(path_in(c.out_dir, "summary.txt"), summary);
  write_file(path_in(c.out_dir, "eval.svg"), svg_bar_chart("Evaluation " + task.name, reports));
  write_manifest(c.out_dir, "eval " + ckpt_path, c, {"report.json", "episodes.jsonl", "summary.txt", "eval.svg"});
  std::cout << summary;
  return 0;
}

int cmd_transfer(const CommonFlags& f, const std::vector<std::string>& ckpts, int trials) {
  ExperimentConfig c = f.resolve({});
  if (trials > 0) c.eval_trials = trials;
  if (!f.o_cond->count() && f.config_path.empty()) c.condition = "EC2";
  const std::vector<std::string> shapes{"round", "square", "triangle"};
  if (ckpts.size() != shapes.size())
    throw ConfigError("transfer expects three checkpoints: round, square, triangle");
  std::vector<Checkpoint> loaded;
  for (const auto& p : ckpts) {
    if (!fs::exists(p)) throw ConfigError("checkpoint not found: " + p);
    loaded.push_back(load_checkpoint(p));
  }
  std::vector<std::pair<std::string, const PolicyBundle*>> pols;
  std::vector<TaskSpec> tasks;
  for (std::size_t i = 0; i < shapes.size(); ++i) {
    pols.emplace_back(shapes[i], &loaded[i].bundle);
    TaskFile t = TaskFile::from_preset(shapes[i]);
    if (f.o_clear->count()) t.clearance_mm = f.clearance_mm;
    t.contact = c.task.contact;
    tasks.push_back(t.spec());
  }
  const Catalog cat = build_catalog();
  const auto m = transfer_matrix(pols, tasks, cat, c.env, preset(c.condition), eval_options(c, c.eval_trials));

  ensure_dir(c.out_dir);
  Json grid = Json::array();
  std::string summary = "trained\\evaluated";
  for (const auto& s : shapes) summary += "\t" + s;
  summary += "\n";
  std::vector<EvalReport> flat;
  for (std::size_t i = 0; i < m.size(); ++i) {
    Json row = Json::array();
    summary += shapes[i];
    for (const auto& r : m[i]) {
      row.push_back(report_to_json(r));
      char buf[32];
      std::snprintf(buf, sizeof buf, "\t%d/%d", r.successes, r.trials);
      summary += buf;
      flat.push_back(r);
    }
    summary += "\n";
    grid.push_back(row);
  }
  write_file(path_in(c.out_dir, "transfer.json"), grid.dump(2) + "\n");
  write_file(path_in(c.out_dir, "transfer.txt"), summary);
  write_file(path_in(c.out_dir, "transfer.svg"), svg_bar_chart("Transfer " + c.condition, flat));
  write_manifest(c.out_dir, "transfer", c, {"transfer.json", "transfer.txt", "transfer.svg"});
  std::cout << summary;
  return 0;
}

int cmd_baseline(const CommonFlags& f, const std::string& kind, long budget, int trials) {
  ExperimentConfig c = f.resolve({});
  if (budget > 0) c.train.budget_steps = budget;
  if (trials > 0) c.eval_trials = trials;
  const TaskSpec task = c.task.spec();
  const PerturbationSpec cond = preset(c.condition);
  ensure_dir(c.out_dir);
  if (kind == "scripted") {
    const Catalog cat = build_catalog();
    std::vector<EpisodeRecord> recs;
    const EvalReport r =
        evaluate_scripted(manual_sequence(cat), task, cat, c.env, cond, eval_options(c, c.eval_trials), &recs);
    std::string episodes;
    for (const auto& e : recs) episodes += record_to_json(e).dump() + "\n";
    write_file(path_in(c.out_dir, "report.json"), report_to_json(r).dump(2) + "\n");
    write_file(path_in(c.out_dir, "episodes.jsonl"), episodes);
    write_file(path_in(c.out_dir, "summary.txt"), report_line(r) + "\n");
    write_manifest(c.out_dir, "baseline scripted", c, {"report.json", "episodes.jsonl", "summary.txt"});
    std::cout << report_line(r) << "\n";
    return 0;
  }
  if (kind != "continuous") throw ConfigError("baseline kind must be 'continuous' or 'scripted'");
  Rng init_rng(splitmix64(c.seed));
  GaussianPolicy pol = GaussianPolicy::create(init_rng);
  std::ofstream curve_log(path_in(c.out_dir, "curve.jsonl"), std::ios::binary);
  const TrainResult res = train_baseline(pol, task, cond, c.env, c.baseline, c.train, [&](const CurvePoint& p) {
    curve_log << curve_point_to_json(p).dump() << "\n";
    std::fprintf(stderr, "update %4d  steps %7ld  success %.3f  return %8.3f\n", p.update, p.env_steps,
                 p.success_rate, p.mean_return);
  });
  Series s{"continuous baseline", {}, {}};
  for (const auto& p : res.curve) {
    s.x.push_back(static_cast<double>(p.env_steps));
    s.y.push_back(p.success_rate);
  }
  write_file(path_in(c.out_dir, "curve.svg"), svg_line_plot("Continuous baseline", "environment steps",
                                                            "success rate", {s}));
  const long at50 = steps_to_success(res.curve, 0.5);
  const std::string line = "steps to 50% success: " + (at50 < 0 ? std::string("not reached") : std::to_string(at50));
  write_file(path_in(c.out_dir, "summary.txt"), line + "\n");
  write_manifest(c.out_dir, "baseline continuous", c, {"curve.jsonl", "curve.svg", "summary.txt"});
  std::cout << line << "\n";
  return 0;
}

int cmd_catalog(bool as_json) {
  const Catalog cat = build_catalog();
  if (as_json) {
    Json arr = Json::array();
    for (const auto& m : cat.primitives)
      arr.push_back({{"id", m.id},
                     {"family", std::string(to_string(m.family))},
                     {"archetype", std::string(to_string(m.archetype))},
                     {"axis", m.axis.name()},
                     {"speed", m.speed},
                     {"f_d", m.f_d},
                     {"k_dt", m.k_dt},
                     {"k_dr", m.k_dr},
                     {"f_thr", m.stop.f_thr},
                     {"d", m.stop.d},
                     {"eps", m.stop.eps},
                     {"timeout", m.stop.timeout},
                     {"label", m.label()}});
    std::cout << arr.dump(2) << "\n";
    return 0;
  }
  for (const auto& m : cat.primitives) std::printf("%2d  %s\n", m.id, m.label().c_str());
  return 0;
}

int cmd_replay(const CommonFlags& f, const std::string& path, int line_no) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open " + path);
  std::string line;
  for (int i = 0; i <= line_no; ++i)
    if (!std::getline(in, line)) throw ConfigError("episode log has no line " + std::to_string(line_no));
  const EpisodeRecord rec = record_from_json(parse_json(line, path));
  ExperimentConfig c = f.resolve({});
  if (!f.o_task->count() && f.config_path.empty()) c.task = TaskFile::from_preset(rec.task);
  const Catalog cat = build_catalog();
  PegEnv env(c.task.spec(), cat, c.env);
  int step = 0;
  std::printf("step,t,x_mm,y_mm,z_mm,rx_deg,ry_deg,rz_deg,fx,fy,fz,tx,ty,tz\n");
  const TraceSink sink = [&](const TraceRecord& r) {
    const auto& p = r.pose;
    const auto& w = r.wrench;
    std::printf("%d,%.3f,%.4f,%.4f,%.4f,%.4f,%.4f,%.4f,%.4f,%.4f,%.4f,%.5f,%.5f,%.5f\n", step, r.t,
                p.translation.x() / kMm, p.translation.y() / kMm, p.translation.z() / kMm, p.rotation.x() / kDeg,
                p.rotation.y() / kDeg, p.rotation.z() / kDeg, w.force.x(), w.force.y(), w.force.z(), w.torque.x(),
                w.torque.y(), w.torque.z());
  };
  env.reset_with(rec.condition, rec.dp_init, rec.dp_hole, rec.noise_seed);
  for (const auto& s : rec.steps) {
    if (env.done()) break;
    if (s.mp < 0 || s.mp >= static_cast<int>(cat.size()))
      throw ConfigError("episode uses a primitive outside the catalog");
    env.step_with(cat[s.mp], s.mp, &sink);
    ++step;
  }
  const EpisodeRecord again = env.record();
  std::fprintf(stderr, "replayed %zu primitives, outcome %s (recorded %s)\n", again.steps.size(),
               std::string(to_string(again.outcome)).c_str(), std::string(to_string(rec.outcome)).c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Learning manipulation primitive sequences for peg-in-hole"};
  app.require_subcommand(1);

  CommonFlags train_f, eval_f, transfer_f, base_f, replay_f;
  long budget = 0;
  std::string init_from;
  auto* train_cmd = app.add_subcommand("train", "train the primitive policy with PPO");
  train_f.add(train_cmd);
  train_cmd->add_option("--budget", budget, "environment steps");
  train_cmd->add_option("--init-from", init_from, "warm start from a checkpoint");

  std::string ckpt;
  int trials = 0;
  bool all_conditions = false;
  auto* eval_cmd = app.add_subcommand("eval", "greedy evaluation of a checkpoint");
  eval_f.add(eval_cmd);
  eval_cmd->add_option("--checkpoint", ckpt, "policy checkpoint")->required();
  eval_cmd->add_option("--trials", trials, "episodes per condition");
  eval_cmd->add_flag("--all", all_conditions, "evaluate every TC/EC preset");

  std::vector<std::string> ckpts;
  auto* transfer_cmd = app.add_subcommand("transfer", "3x3 shape transfer matrix");
  transfer_f.add(transfer_cmd);
  transfer_cmd->add_option("--checkpoints", ckpts, "round, square and triangle checkpoints")->required();
  transfer_cmd->add_option("--trials", trials, "episodes per cell");

  std::string kind;
  auto* base_cmd = app.add_subcommand("baseline", "continuous-action learner or scripted sequence");
  base_f.add(base_cmd);
  base_cmd->add_option("kind", kind, "continuous | scripted")->required();
  base_cmd->add_option("--budget", budget, "environment steps (continuous)");
  base_cmd->add_option("--trials", trials, "episodes (scripted)");

  bool as_json = false;
  auto* cat_cmd = app.add_subcommand("catalog", "print the primitive catalog");
  cat_cmd->add_flag("--json", as_json, "JSON output");

  std::string episode_path;
  int line_no = 0;
  auto* replay_cmd = app.add_subcommand("replay", "re-run a logged episode and print the per-tick trace");
  replay_f.add(replay_cmd);
  replay_cmd->add_option("episodes", episode_path, "JSONL episode log")->required();
  replay_cmd->add_option("--line", line_no, "zero-based line in the log");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kExitConfig;
  }

  try {
    if (*train_cmd) return cmd_train(train_f, budget, init_from);
    if (*eval_cmd) return cmd_eval(eval_f, ckpt, trials, all_conditions);
    if (*transfer_cmd) return cmd_transfer(transfer_f, ckpts, trials);
    if (*base_cmd) return cmd_baseline(base_f, kind, budget, trials);
    if (*cat_cmd) return cmd_catalog(as_json);
    if (*replay_cmd) return cmd_replay(replay_f, episode_path, line_no);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return 0;
}
