#include "jsrl/cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <sstream>
#include <thread>

#include "jsrl/checkpoint.hpp"
#include "jsrl/errors.hpp"
#include "jsrl/eval.hpp"
#include "jsrl/exact.hpp"
#include "jsrl/instances.hpp"
#include "jsrl/ppo.hpp"
#include "jsrl/rng.hpp"

#ifndef JSRL_VERSION
#define JSRL_VERSION "0.0.0"
#endif

namespace fs = std::filesystem;

namespace jsrl {

std::string version_string() {
  return std::string("jobshop ") + JSRL_VERSION + " (checkpoint format " + kCheckpointFormat +
         " v" + std::to_string(kCheckpointVersion) + ")";
}

namespace {

int default_workers() {
  return std::max(1, static_cast<int>(std::thread::hardware_concurrency()));
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw DataError("cannot write '" + path.string() + "'");
  f << text;
  if (!f) throw DataError("failed writing '" + path.string() + "'");
}

fs::path prepare_out(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw DataError("cannot create output directory '" + dir + "': " + ec.message());
  return fs::path(dir);
}

LabeledInstance load_labeled(const std::string& path) {
  return {fs::path(path).stem().string(), read_instance_file(path)};
}

std::vector<int> parse_widths(const std::string& text) {
  std::vector<int> widths;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      widths.push_back(std::stoi(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::logic_error&) {
      throw ConfigError("bad FFN width list '" + text + "'");
    }
  }
  return widths;
}

struct GenArgs {
  int jobs = 0;
  int machines = 0;
  std::string dist = "gaussian:100:10";
  int count = 1;
  std::uint64_t seed = 0;
};

struct TrainArgs {
  std::string data;
  std::string resume;
  TrainConfig train;
  ModelConfig model;
  std::string ffn = "1100,550,110";
  std::string kl_direction = "old_new";
  int checkpoint_every = 0;
};

struct SolveArgs {
  std::string checkpoint;
  std::string instance;
};

struct ExactArgs {
  std::string instance;
  double time_limit = 10.0;
};

struct BenchArgs {
  std::string data;
  std::string checkpoint;
  double time_limit = 10.0;
  std::string mode = "both";
};

int cmd_gen(const GenArgs& a, const fs::path& out_dir, std::ostream& out) {
  if (a.count < 1) throw ConfigError("--count must be >= 1");
  GeneratorSpec spec{a.jobs, a.machines, parse_distribution(a.dist), 0};
  const std::string cls = std::to_string(a.jobs) + "x" + std::to_string(a.machines);
  std::string manifest = "file,jobs,machines,distribution,seed\n";
  for (int i = 0; i < a.count; ++i) {
    spec.seed = derive_seed(a.seed, static_cast<std::uint64_t>(i));
    const Instance inst = generate(spec);
    const std::string name =
        cls + "_" + std::to_string(a.seed) + "_" + std::to_string(i) + ".jssp";
    write_instance_file((out_dir / name).string(), inst);
    manifest += name + "," + std::to_string(a.jobs) + "," + std::to_string(a.machines) + "," +
                distribution_tag(spec.distribution) + "," + std::to_string(spec.seed) + "\n";
  }
  write_text(out_dir / "manifest.csv", manifest);
  out << manifest;
  return kExitOk;
}

int cmd_train(TrainArgs a, int workers, const fs::path& out_dir, std::ostream& out) {
  const auto dataset = load_dataset(a.data);
  if (dataset.empty()) throw ConfigError("dataset directory '" + a.data + "' holds no instances");

  auto save = [&](const Trainer& t, const std::string& name) {
    save_checkpoint((out_dir / name).string(), t.checkpoint());
    write_text(out_dir / "train_log.csv", training_log_csv(t.log()));
  };

  std::optional<Trainer> trainer;
  if (!a.resume.empty()) {
    trainer.emplace(Trainer::resume(dataset, load_checkpoint(a.resume), a.train.episodes,
                                    workers));
  } else {
    if (a.kl_direction == "old_new")
      a.train.kl_direction = KlDirection::kOldNew;
    else if (a.kl_direction == "new_old")
      a.train.kl_direction = KlDirection::kNewOld;
    else
      throw ConfigError("--kl-direction must be old_new or new_old");
    a.model.ffn_widths = parse_widths(a.ffn);
    a.train.workers = workers;
    trainer.emplace(dataset, a.train, a.model);
  }

  try {
    trainer->run(a.checkpoint_every, [&](const Trainer& t) { save(t, "checkpoint.json"); });
  } catch (const NumericError&) {
    save(*trainer, "diagnostic.json");
    throw;
  }
  save(*trainer, "checkpoint.json");
  const TrainLog log = trainer->log();
  out << "episodes=" << log.size() << " final_mean_return="
      << format_number(log.empty() ? 0.0 : log.back().mean_return)
      << " beta=" << format_number(trainer->beta()) << "\n";
  return kExitOk;
}

int cmd_solve(const SolveArgs& a, const fs::path& out_dir, std::ostream& out) {
  const Checkpoint ckpt = load_checkpoint(a.checkpoint);
  const LabeledInstance item = load_labeled(a.instance);
  const GreedyResult r = greedy_solve(item.instance, ckpt.nets.actor, ckpt.model.time_unit);
  write_text(out_dir / (item.id + "_schedule.csv"), schedule_csv(r.schedule));
  out << "makespan=" << r.makespan << "\n";
  return kExitOk;
}

int cmd_exact(const ExactArgs& a, const fs::path& out_dir, std::ostream& out) {
  const LabeledInstance item = load_labeled(a.instance);
  ExactOptions options;
  options.time_limit = a.time_limit;
  const ExactResult r = branch_and_bound(item.instance, options);
  write_text(out_dir / (item.id + "_exact.csv"), schedule_csv(r.schedule));
  out << "makespan=" << r.makespan << " optimal=" << (r.optimal ? "true" : "false")
      << " nodes=" << r.nodes << "\n";
  return kExitOk;
}

int cmd_bench(const BenchArgs& a, int workers, const fs::path& out_dir, std::ostream& out) {
  const Checkpoint ckpt = load_checkpoint(a.checkpoint);
  const auto dataset = load_dataset(a.data);
  if (dataset.empty()) throw ConfigError("dataset directory '" + a.data + "' holds no instances");
  BenchConfig config;
  config.time_limit = a.time_limit;
  config.workers = workers;
  if (a.mode == "quality")
    config.mode = BenchMode::kQuality;
  else if (a.mode == "time")
    config.mode = BenchMode::kTime;
  else if (a.mode == "both")
    config.mode = BenchMode::kBoth;
  else
    throw ConfigError("--mode must be quality, time or both");
  const BenchResult r = bench(dataset, ckpt.nets.actor, ckpt.model.time_unit, config);
  write_text(out_dir / "records.csv", records_csv(r.records));
  write_text(out_dir / "summary.csv", summary_csv(r.summary));
  write_text(out_dir / "profile_time.csv", profile_csv(r.time_profile));
  write_text(out_dir / "profile_objective.csv", profile_csv(r.objective_profile));
  out << summary_csv(r.summary);
  return kExitOk;
}

int cmd_export(const std::string& instance, const fs::path& out_dir, std::ostream& out) {
  const LabeledInstance item = load_labeled(instance);
  const MilpModel model = build_milp(item.instance);
  const fs::path path = out_dir / (item.id + ".lp");
  write_text(path, export_lp(model));
  out << path.string() << " variables=" << model.variables.size()
      << " constraints=" << model.constraints.size() << "\n";
  return kExitOk;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Job-shop scheduling with a learned dispatching policy", "jobshop"};
  app.set_config("--config", "", "key = value configuration file; flags override it");
  app.require_subcommand(0, 1);
  bool show_version = false;
  app.add_flag("--version", show_version, "Print toolkit and checkpoint-format versions");

  std::string out_dir = "out";
  int workers = default_workers();
  auto common = [&](CLI::App* sub) {
    sub->configurable();
    sub->add_option("--out", out_dir, "Output directory")->capture_default_str();
    return sub;
  };

  GenArgs gen;
  auto* gen_cmd = common(app.add_subcommand("gen", "Generate random instances"));
  gen_cmd->add_option("--jobs", gen.jobs, "Number of jobs")->required();
  gen_cmd->add_option("--machines", gen.machines, "Number of machines")->required();
  gen_cmd->add_option("--dist", gen.dist, "gaussian:<mean>:<std> or poisson:<lambda>")
      ->capture_default_str();
  gen_cmd->add_option("--count", gen.count, "Number of instances")->capture_default_str();
  gen_cmd->add_option("--seed", gen.seed, "Root seed")->capture_default_str();

  TrainArgs tr;
  auto* train_cmd = common(app.add_subcommand("train", "Train actor and critic"));
  train_cmd->add_option("--data", tr.data, "Directory of .jssp training instances")->required();
  train_cmd->add_option("--resume", tr.resume, "Checkpoint to resume from");
  train_cmd->add_option("--episodes", tr.train.episodes, "Total episodes")->capture_default_str();
  train_cmd->add_option("--rollouts", tr.train.rollouts, "Roll-outs per episode")
      ->capture_default_str();
  train_cmd->add_option("--beta0", tr.train.beta0, "Initial KL penalty")->capture_default_str();
  train_cmd->add_option("--kl-target", tr.train.kl_target, "KL target")->capture_default_str();
  train_cmd->add_option("--actor-steps", tr.train.actor_steps)->capture_default_str();
  train_cmd->add_option("--critic-steps", tr.train.critic_steps)->capture_default_str();
  train_cmd->add_option("--actor-lr", tr.train.actor_lr)->capture_default_str();
  train_cmd->add_option("--critic-lr", tr.train.critic_lr)->capture_default_str();
  train_cmd->add_option("--reward-scale", tr.train.reward_scale, "Divides rewards for learning")
      ->capture_default_str();
  train_cmd->add_option("--seed", tr.train.seed)->capture_default_str();
  train_cmd->add_option("--kl-direction", tr.kl_direction, "old_new or new_old")
      ->capture_default_str();
  train_cmd->add_option("--guard-factor", tr.train.guard_factor)->capture_default_str();
  train_cmd->add_flag("--phi-literal", tr.train.phi_literal, "Use the signed return ratio");
  train_cmd->add_option("--hidden1", tr.model.hidden1)->capture_default_str();
  train_cmd->add_option("--hidden2", tr.model.hidden2)->capture_default_str();
  train_cmd->add_option("--ffn", tr.ffn, "Critic FFN widths, comma separated")
      ->capture_default_str();
  train_cmd->add_option("--time-unit", tr.model.time_unit)->capture_default_str();
  train_cmd->add_option("--checkpoint-every", tr.checkpoint_every, "0 = only at the end")
      ->capture_default_str();
  train_cmd->add_option("--workers", workers, "Roll-out threads");

  SolveArgs solve;
  auto* solve_cmd = common(app.add_subcommand("solve", "Greedy schedule from a checkpoint"));
  solve_cmd->add_option("--checkpoint", solve.checkpoint)->required();
  solve_cmd->add_option("--instance", solve.instance)->required();

  ExactArgs exact;
  auto* exact_cmd = common(app.add_subcommand("exact", "Branch-and-bound solve"));
  exact_cmd->add_option("--instance", exact.instance)->required();
  exact_cmd->add_option("--time-limit", exact.time_limit, "Seconds")->capture_default_str();

  BenchArgs bn;
  auto* bench_cmd = common(app.add_subcommand("bench", "Compare the policy with the exact solver"));
  bench_cmd->add_option("--data", bn.data)->required();
  bench_cmd->add_option("--checkpoint", bn.checkpoint)->required();
  bench_cmd->add_option("--time-limit", bn.time_limit, "Seconds per exact run")
      ->capture_default_str();
  bench_cmd->add_option("--mode", bn.mode, "quality, time or both")->capture_default_str();
  bench_cmd->add_option("--workers", workers, "Benchmark threads");

  std::string export_instance;
  auto* export_cmd = common(app.add_subcommand("export", "Write the MILP as an LP file"));
  export_cmd->add_option("--instance", export_instance)->required();

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::Success& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    err << "error[config]: " << e.what() << "\n";
    return kExitConfig;
  }

  if (show_version) {
    out << version_string() << "\n";
    return kExitOk;
  }

  try {
    if (workers < 1) throw ConfigError("--workers must be >= 1");
    if (*gen_cmd) return cmd_gen(gen, prepare_out(out_dir), out);
    if (*train_cmd) return cmd_train(tr, workers, prepare_out(out_dir), out);
    if (*solve_cmd) return cmd_solve(solve, prepare_out(out_dir), out);
    if (*exact_cmd) return cmd_exact(exact, prepare_out(out_dir), out);
    if (*bench_cmd) return cmd_bench(bn, workers, prepare_out(out_dir), out);
    if (*export_cmd) return cmd_export(export_instance, prepare_out(out_dir), out);
    out << app.help();
    return kExitOk;
  } catch (const ConfigError& e) {
    err << "error[config]: " << e.what() << "\n";
    return kExitConfig;
  } catch (const NumericError& e) {
    err << "error[numeric]: " << e.what() << "\n";
    return kExitNumeric;
  } catch (const Error& e) {
    err << "error[data]: " << e.what() << "\n";
    return kExitData;
  }
}

}  // namespace jsrl
