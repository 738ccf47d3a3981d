// Copyright (c) 2026 deitsp contributors
// SPDX-License-Identifier: Apache-2.0
//
// Benchmark harness: data generation, training, solving, evaluation, and
// schedule inspection as reproducible subcommands. Every artifact-producing
// run writes a <out>.manifest.json sidecar holding the fully resolved flag
// list; `deitsp replay` re-executes one against a fresh output path.

#include <algorithm>
#include <cstdlib>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "deitsp/dataset.hpp"
#include "deitsp/diffusion.hpp"
#include "deitsp/inference.hpp"
#include "deitsp/io_util.hpp"
#include "deitsp/manifest.hpp"
#include "deitsp/model.hpp"
#include "deitsp/training.hpp"
#include "deitsp/tsplib.hpp"
#include "deitsp/version.hpp"

namespace {

using namespace deitsp;

int run_command(std::vector<std::string> args);  // forward, for replay

std::uint64_t resolve_seed(bool given, std::uint64_t value) {
  if (given) return value;
  if (const char* env = std::getenv("DEITSP_SEED")) {
    const long v = parse_long(env, "DEITSP_SEED");
    if (v < 0) throw UsageError("DEITSP_SEED must be non-negative");
    return static_cast<std::uint64_t>(v);
  }
  return 0;
}

std::pair<double, double> parse_interval(const std::string& text) {
  const auto comma = text.find(',');
  if (comma == std::string::npos)
    throw UsageError("--interval expects \"lo,hi\", got \"" + text + "\"");
  const double lo = parse_double(text.substr(0, comma), "--interval lo");
  const double hi = parse_double(text.substr(comma + 1), "--interval hi");
  return {lo, hi};
}

ScheduleKind parse_schedule(const std::string& name) {
  const auto kind = schedule_kind_from_name(name);
  if (!kind)
    throw UsageError("unknown schedule \"" + name +
                     "\" (expected linear, cosine, or inverse)");
  return *kind;
}

void emit_manifest(const std::string& command, std::vector<std::string> argv,
                   std::uint64_t seed, const std::string& started,
                   std::vector<std::string> outputs) {
  RunManifest m;
  m.version = kVersion;
  m.command = command;
  m.argv = std::move(argv);
  m.seed = seed;
  m.started = started;
  m.finished = current_utc_timestamp();
  m.outputs = outputs;
  write_manifest(manifest_path_for(outputs.front()), m);
}

// Inference flags shared by solve and eval.
struct InferenceFlags {
  int iters = 1;
  std::string schedule = "inverse";
  std::string interval;
  bool two_opt = true;
  std::uint64_t seed = 0;
  int workers = 1;

  void attach(CLI::App* cmd, CLI::Option** seed_opt) {
    cmd->add_option("--iters", iters, "denoise iterations (M)")
        ->check(CLI::PositiveNumber);
    cmd->add_option("--schedule", schedule,
                    "re-noise schedule: linear, cosine, or inverse");
    cmd->add_option("--interval", interval,
                    "schedule sampling interval override, \"lo,hi\"");
    cmd->add_flag("--two-opt,!--no-two-opt", two_opt,
                  "refine each decoded tour with 2-opt (default on)");
    *seed_opt = cmd->add_option("--seed", seed, "RNG seed");
    cmd->add_option("--workers", workers, "parallel instance solvers")
        ->check(CLI::PositiveNumber);
  }

  InferenceConfig to_config(std::uint64_t resolved_seed) const {
    InferenceConfig cfg;
    cfg.iterations = iters;
    cfg.schedule = parse_schedule(schedule);
    if (!interval.empty()) cfg.interval = parse_interval(interval);
    cfg.two_opt = two_opt;
    cfg.seed = resolved_seed;
    return cfg;
  }

  // Canonical argv fragment with everything resolved.
  void canonical(std::vector<std::string>& argv,
                 std::uint64_t resolved_seed) const {
    argv.insert(argv.end(), {"--iters", std::to_string(iters)});
    argv.insert(argv.end(), {"--schedule", schedule});
    if (!interval.empty()) argv.insert(argv.end(), {"--interval", interval});
    argv.push_back(two_opt ? "--two-opt" : "--no-two-opt");
    argv.insert(argv.end(), {"--seed", std::to_string(resolved_seed)});
    argv.insert(argv.end(), {"--workers", std::to_string(workers)});
  }
};

bool looks_like_dataset(const std::string& text) {
  const auto start = text.find_first_not_of(" \t\r\n");
  return start != std::string::npos && text.compare(start, 2, "n=") == 0;
}

std::string format_loss_curve(const std::vector<StepRecord>& curve) {
  std::string out;
  for (const StepRecord& s : curve) {
    out += std::to_string(s.step);
    out += ',';
    out += format_double(s.loss.ce_far);
    out += ',';
    out += format_double(s.loss.ce_near);
    out += ',';
    out += format_double(s.loss.consistency);
    out += ',';
    out += format_double(s.loss.total);
    out += '\n';
  }
  return out;
}

int run_command(std::vector<std::string> args) {
  CLI::App app{"binary-diffusion TSP solver and benchmark harness"};
  app.set_version_flag("--version", std::string(kVersion));
  app.require_subcommand(1);

  // ---- gen-data ----------------------------------------------------------
  auto* gen = app.add_subcommand(
      "gen-data", "generate labeled instances via the exact solver");
  int gen_n = 10, gen_count = 1;
  std::uint64_t gen_seed = 0;
  std::string gen_out;
  gen->add_option("--n", gen_n, "nodes per instance (3..16)")->required();
  gen->add_option("--count", gen_count, "instances to generate")
      ->required()
      ->check(CLI::PositiveNumber);
  auto* gen_seed_opt = gen->add_option("--seed", gen_seed, "RNG seed");
  gen->add_option("--out", gen_out, "output dataset path")->required();

  // ---- train -------------------------------------------------------------
  auto* train_cmd =
      app.add_subcommand("train", "fit the denoiser on a labeled dataset");
  std::string train_data, train_out;
  ModelConfig train_model;  // desk-scale defaults
  TrainingConfig train_cfg;
  std::uint64_t train_seed = 0;
  train_cmd->add_option("--data", train_data, "labeled dataset")->required();
  train_cmd->add_option("--out", train_out, "checkpoint path")->required();
  train_cmd->add_option("--steps", train_cfg.steps, "max optimizer steps")
      ->check(CLI::PositiveNumber);
  train_cmd->add_option("--batch", train_cfg.batch_size, "records per step")
      ->check(CLI::PositiveNumber);
  train_cmd->add_option("--dim", train_model.dim, "hidden width");
  train_cmd->add_option("--heads", train_model.heads, "attention heads");
  train_cmd->add_option("--layers", train_model.layers, "stacked layers");
  train_cmd->add_option("--groups", train_model.groups,
                        "head group-norm groups");
  train_cmd->add_option("--T", train_model.diffusion_steps,
                        "diffusion steps");
  train_cmd->add_option("--k", train_cfg.consistency_gap,
                        "consistency timestep gap");
  train_cmd->add_option("--lambda", train_cfg.consistency_weight,
                        "consistency term weight");
  train_cmd->add_option("--lr", train_cfg.lr, "Adam learning rate");
  train_cmd->add_option("--plateau-window", train_cfg.plateau_window,
                        "early-stop window in steps (0 disables)");
  train_cmd->add_option("--plateau-tol", train_cfg.plateau_tolerance,
                        "improvement below this counts as stalled");
  auto* train_seed_opt =
      train_cmd->add_option("--seed", train_seed, "RNG seed");

  // ---- solve -------------------------------------------------------------
  auto* solve_cmd = app.add_subcommand(
      "solve", "solve instances from a dataset or TSPLIB file");
  std::string solve_model, solve_input, solve_out;
  InferenceFlags solve_flags;
  CLI::Option* solve_seed_opt = nullptr;
  solve_cmd->add_option("--model", solve_model, "checkpoint")->required();
  solve_cmd->add_option("--input", solve_input, "dataset or TSPLIB file")
      ->required();
  solve_cmd->add_option("--out", solve_out, "results path")->required();
  solve_flags.attach(solve_cmd, &solve_seed_opt);

  // ---- eval --------------------------------------------------------------
  auto* eval_cmd = app.add_subcommand(
      "eval", "solve a labeled dataset and aggregate length/gap/time");
  std::string eval_model, eval_data, eval_out;
  InferenceFlags eval_flags;
  CLI::Option* eval_seed_opt = nullptr;
  eval_cmd->add_option("--model", eval_model, "checkpoint")->required();
  eval_cmd->add_option("--data", eval_data, "labeled dataset")->required();
  eval_cmd->add_option("--out", eval_out, "results path")->required();
  eval_flags.attach(eval_cmd, &eval_seed_opt);

  // ---- schedule-dump -----------------------------------------------------
  auto* sched_cmd = app.add_subcommand(
      "schedule-dump", "print the re-noise timesteps a config produces");
  std::string sched_kind = "inverse", sched_interval, sched_out;
  int sched_iters = 1, sched_T = 1000;
  sched_cmd->add_option("--kind", sched_kind, "linear, cosine, or inverse");
  sched_cmd->add_option("--interval", sched_interval, "override, \"lo,hi\"");
  sched_cmd->add_option("--iters", sched_iters, "denoise iterations (M)")
      ->required()
      ->check(CLI::PositiveNumber);
  sched_cmd->add_option("--T", sched_T, "diffusion steps");
  sched_cmd->add_option("--out", sched_out, "write here instead of stdout");

  // ---- tsplib-info -------------------------------------------------------
  auto* info_cmd =
      app.add_subcommand("tsplib-info", "summarize a TSPLIB instance");
  std::string info_input, info_out;
  info_cmd->add_option("--input", info_input, "TSPLIB file")->required();
  info_cmd->add_option("--out", info_out, "write here instead of stdout");

  // ---- replay ------------------------------------------------------------
  auto* replay_cmd = app.add_subcommand(
      "replay", "re-run a manifest against a fresh output path");
  std::string replay_manifest, replay_out;
  replay_cmd->add_option("manifest", replay_manifest, "manifest sidecar")
      ->required();
  replay_cmd->add_option("--out", replay_out, "replacement output path")
      ->required();

  std::reverse(args.begin(), args.end());
  try {
    app.parse(args);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  if (gen->parsed()) {
    const std::string started = current_utc_timestamp();
    const std::uint64_t seed = resolve_seed(!gen_seed_opt->empty(), gen_seed);
    const auto records = generate_labeled_dataset(gen_n, gen_count, seed);
    write_dataset(gen_out, records);
    emit_manifest("gen-data",
                  {"gen-data", "--n", std::to_string(gen_n), "--count",
                   std::to_string(gen_count), "--seed", std::to_string(seed),
                   "--out", gen_out},
                  seed, started, {gen_out});
    std::cout << "wrote " << records.size() << " records to " << gen_out
              << "\n";
    return 0;
  }

  if (train_cmd->parsed()) {
    const std::string started = current_utc_timestamp();
    const std::uint64_t seed =
        resolve_seed(!train_seed_opt->empty(), train_seed);
    train_model.validate();
    train_cfg.seed = seed;
    train_cfg.validate(train_model.diffusion_steps);
    const auto data = read_dataset(train_data);

    Model model(train_model, seed);
    int last_logged = 0;
    const TrainingResult result =
        train(model, data, train_cfg, [&](const StepRecord& s) {
          if (s.step - last_logged >= 100 || s.step == 1) {
            std::cerr << "step " << s.step << " loss "
                      << format_double(s.loss.total) << "\n";
            last_logged = s.step;
          }
        });

    model.save(train_out);
    const std::string curve_path = train_out + ".loss.txt";
    write_file_atomic(curve_path, format_loss_curve(result.curve));
    emit_manifest(
        "train",
        {"train", "--data", train_data, "--steps",
         std::to_string(train_cfg.steps), "--batch",
         std::to_string(train_cfg.batch_size), "--dim",
         std::to_string(train_model.dim), "--heads",
         std::to_string(train_model.heads), "--layers",
         std::to_string(train_model.layers), "--groups",
         std::to_string(train_model.groups), "--T",
         std::to_string(train_model.diffusion_steps), "--k",
         std::to_string(train_cfg.consistency_gap), "--lambda",
         format_double(train_cfg.consistency_weight), "--lr",
         format_double(train_cfg.lr), "--plateau-window",
         std::to_string(train_cfg.plateau_window), "--plateau-tol",
         format_double(train_cfg.plateau_tolerance), "--seed",
         std::to_string(seed), "--out", train_out},
        seed, started, {train_out, curve_path});
    std::cout << "trained " << result.steps_run << " steps"
              << (result.stopped_early ? " (stopped on plateau)" : "")
              << ", final loss "
              << format_double(result.curve.back().loss.total) << "\n";
    return 0;
  }

  if (solve_cmd->parsed()) {
    const std::string started = current_utc_timestamp();
    const std::uint64_t seed =
        resolve_seed(!solve_seed_opt->empty(), solve_flags.seed);
    const Model model = Model::load(solve_model);
    const InferenceConfig icfg = solve_flags.to_config(seed);
    // Validate the schedule before any real work.
    if (icfg.interval)
      make_iteration_schedule(icfg.schedule, icfg.iterations,
                              model.config().diffusion_steps,
                              icfg.interval->first, icfg.interval->second);
    else
      make_iteration_schedule(icfg.schedule, icfg.iterations,
                              model.config().diffusion_steps);

    const std::string text = read_file(solve_input);
    std::vector<DatasetRecord> records;
    if (looks_like_dataset(text)) {
      records = read_dataset(solve_input);
    } else {
      TspInstance inst = parse_tsplib(text, solve_input);
      const auto optimum = known_optimum(inst.name());
      records.push_back(
          DatasetRecord{std::move(inst), Tour{}, optimum.value_or(0.0)});
    }

    const std::string method =
        icfg.two_opt ? "deitsp+2opt" : "deitsp";
    const EvalOutcome outcome =
        evaluate(model, records, icfg, method, solve_flags.workers);
    write_results(solve_out, outcome.records);

    std::vector<std::string> argv = {"solve", "--model", solve_model,
                                     "--input", solve_input};
    solve_flags.canonical(argv, seed);
    argv.insert(argv.end(), {"--out", solve_out});
    emit_manifest("solve", std::move(argv), seed, started, {solve_out});
    for (const ResultRecord& r : outcome.records)
      std::cout << format_result_record(r) << "\n";
    return 0;
  }

  if (eval_cmd->parsed()) {
    const std::string started = current_utc_timestamp();
    const std::uint64_t seed =
        resolve_seed(!eval_seed_opt->empty(), eval_flags.seed);
    const Model model = Model::load(eval_model);
    const InferenceConfig icfg = eval_flags.to_config(seed);
    if (icfg.interval)
      make_iteration_schedule(icfg.schedule, icfg.iterations,
                              model.config().diffusion_steps,
                              icfg.interval->first, icfg.interval->second);
    else
      make_iteration_schedule(icfg.schedule, icfg.iterations,
                              model.config().diffusion_steps);
    const auto data = read_dataset(eval_data);
    const std::string method = icfg.two_opt ? "deitsp+2opt" : "deitsp";
    const EvalOutcome outcome =
        evaluate(model, data, icfg, method, eval_flags.workers);
    write_results(eval_out, outcome.records);

    std::vector<std::string> argv = {"eval", "--model", eval_model, "--data",
                                     eval_data};
    eval_flags.canonical(argv, seed);
    argv.insert(argv.end(), {"--out", eval_out});
    emit_manifest("eval", std::move(argv), seed, started, {eval_out});
    std::cout << format_eval_summary(outcome) << "\n";
    return 0;
  }

  if (sched_cmd->parsed()) {
    const std::string started = current_utc_timestamp();
    const ScheduleKind kind = parse_schedule(sched_kind);
    const IterationSchedule schedule =
        sched_interval.empty()
            ? make_iteration_schedule(kind, sched_iters, sched_T)
            : [&] {
                const auto [lo, hi] = parse_interval(sched_interval);
                return make_iteration_schedule(kind, sched_iters, sched_T, lo,
                                               hi);
              }();
    std::string out;
    for (int tau : schedule.taus) {
      out += std::to_string(tau);
      out += '\n';
    }
    if (sched_out.empty()) {
      std::cout << out;
    } else {
      write_file_atomic(sched_out, out);
      std::vector<std::string> argv = {"schedule-dump", "--kind", sched_kind};
      if (!sched_interval.empty())
        argv.insert(argv.end(), {"--interval", sched_interval});
      argv.insert(argv.end(),
                  {"--iters", std::to_string(sched_iters), "--T",
                   std::to_string(sched_T), "--out", sched_out});
      emit_manifest("schedule-dump", std::move(argv), 0, started, {sched_out});
    }
    return 0;
  }

  if (info_cmd->parsed()) {
    const std::string started = current_utc_timestamp();
    const TspInstance inst = load_tsplib_file(info_input);
    std::string out = "name=" + inst.name() + "\n";
    out += "nodes=" + std::to_string(inst.size()) + "\n";
    out += "metric=" + std::string(metric_mode_name(inst.metric_mode())) +
           "\n";
    const auto optimum = known_optimum(inst.name());
    out += "optimum=" +
           (optimum ? format_double(*optimum) : std::string("unknown")) +
           "\n";
    if (info_out.empty()) {
      std::cout << out;
    } else {
      write_file_atomic(info_out, out);
      emit_manifest("tsplib-info",
                    {"tsplib-info", "--input", info_input, "--out", info_out},
                    0, started, {info_out});
    }
    return 0;
  }

  if (replay_cmd->parsed()) {
    const RunManifest manifest = read_manifest(replay_manifest);
    std::vector<std::string> argv = manifest.argv;
    bool replaced = false;
    for (size_t i = 0; i + 1 < argv.size(); ++i)
      if (argv[i] == "--out") {
        argv[i + 1] = replay_out;
        replaced = true;
        break;
      }
    if (!replaced)
      throw DataError(replay_manifest +
                      ": stored argv has no --out to redirect");
    return run_command(std::move(argv));
  }

  return 0;  // unreachable: require_subcommand(1)
}

}  // namespace

int main(int argc, char** argv) {
  std::vector<std::string> args;
  args.reserve(static_cast<size_t>(argc > 1 ? argc - 1 : 0));
  for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
  try {
    return run_command(std::move(args));
  } catch (const UsageError& e) {  // covers ConfigError and ShapeError
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const DataError& e) {  // covers UnsupportedFormatError
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const SizeError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 4;
  } catch (const NumericError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 5;
  }
}
