#include "ramcg/checkpoint.hpp"
#include "ramcg/config.hpp"
#include "ramcg/metrics.hpp"
#include "ramcg/synth.hpp"
#include "ramcg/trainer.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <random>

namespace fs = std::filesystem;
using namespace ramcg;

namespace {

struct CliArgs {
  std::string config_file;
  std::string out;
  std::string run_dir;
  long seed = -1;
  std::string baseline;
  std::string ablation;
  bool force = false;
  bool deterministic = true;
  int task = -1;
};

ExperimentConfig build_config(const CliArgs& args) {
  ExperimentConfig cfg;
  if (!args.config_file.empty()) apply_config_file(cfg, args.config_file);
  if (args.seed >= 0) cfg.set_seed(static_cast<uint64_t>(args.seed));
  if (!args.out.empty()) cfg.out_dir = args.out;
  if (!args.baseline.empty()) cfg.plan.baseline = baseline_from_string(args.baseline);
  if (!args.ablation.empty()) cfg.plan.ablation = ablation_from_string(args.ablation);
  cfg.plan.deterministic = args.deterministic;
  if (!cfg.plan.deterministic && args.seed < 0) {
    // non-deterministic mode draws a fresh seed; the resolved config records
    // it so the run stays reproducible after the fact
    std::random_device rd;
    cfg.set_seed((static_cast<uint64_t>(rd()) << 32) ^ rd());
  }
  return cfg;
}

void prepare_out_dir(const fs::path& dir, bool force) {
  if (fs::exists(dir) && !fs::is_empty(dir) && !force)
    throw ConfigError("output directory " + dir.string() + " is not empty (use --force)");
  fs::create_directories(dir);
}

void write_file(const fs::path& p, const std::string& content) {
  std::ofstream out(p, std::ios::binary);
  if (!out) throw DataError("cannot write " + p.string());
  out << content;
}

TaskSequence obtain_sequence(const ExperimentConfig& cfg, std::vector<std::string>* warnings) {
  if (!cfg.dataset.empty()) return load_sequence_dir(cfg.dataset);
  SynthStream stream = synth_stream(cfg.synth);
  if (warnings) *warnings = stream.warnings;
  return std::move(stream.sequence);
}

int cmd_synth(const CliArgs& args) {
  ExperimentConfig cfg = build_config(args);
  prepare_out_dir(cfg.out_dir, args.force);
  SynthStream stream = synth_stream(cfg.synth);
  std::vector<std::string> provenance;
  provenance.push_back("generator config below");
  std::istringstream resolved(resolved_config(cfg));
  for (std::string line; std::getline(resolved, line);) provenance.push_back(line);
  save_synth_stream(stream, cfg.out_dir, provenance);
  std::cout << "wrote " << stream.sequence.num_tasks() << " tasks to " << cfg.out_dir << "\n";
  for (const auto& w : stream.warnings) std::cout << "warning: " << w << "\n";
  return 0;
}

int cmd_run(const CliArgs& args) {
  const auto t_start = std::chrono::steady_clock::now();
  ExperimentConfig cfg = build_config(args);
  cfg.plan.validate();
  prepare_out_dir(cfg.out_dir, args.force);
  write_file(fs::path(cfg.out_dir) / "config.resolved", resolved_config(cfg));

  std::ostringstream log;
  std::vector<std::string> warnings;
  TaskSequence seq = obtain_sequence(cfg, &warnings);
  for (const auto& w : warnings) log << "warning: " << w << "\n";
  log << "tasks: " << seq.num_tasks() << ", feature_dim: " << seq.feature_dim
      << ", max_classes: " << seq.max_classes() << "\n";
  log << "baseline: " << to_string(cfg.plan.baseline)
      << ", ablation: " << to_string(cfg.plan.ablation) << "\n";

  const fs::path out_dir = cfg.out_dir;
  char buf[64];

  if (cfg.plan.baseline == BaselineKind::RamCg) {
    ContinualRun run(sequence_provider(seq), seq.num_tasks(), seq.feature_dim, seq.max_classes(),
                     cfg.plan);
    run.run_all();
    emit_report(run.rmatrix(), out_dir);
    save_checkpoint(out_dir / "checkpoint", run.model());
    for (int t = 0; t < seq.num_tasks(); ++t)
      log << "task " << t + 1 << ": train loss " << run.first_epoch_loss(t) << " -> "
          << run.last_epoch_loss(t) << "\n";
    log << "claimed weights after final task: " << run.model().registry.union_mask().count()
        << " / " << run.model().backbone.n_theta() << "\n";
    const int T = seq.num_tasks();
    log << "final ACC " << acc_at(run.rmatrix(), T);
    if (T >= 2) log << ", final BWF " << bwf_at(run.rmatrix(), T);
    log << "\n";
  } else if (cfg.plan.baseline == BaselineKind::Retrained) {
    BaselineResult result = run_retrained_baseline(seq, cfg.plan);
    emit_report(result.rmatrix, out_dir);
    const int T = seq.num_tasks();
    log << "final ACC " << acc_at(result.rmatrix, T);
    if (T >= 2) log << ", final BWF " << bwf_at(result.rmatrix, T);
    log << "\n";
  } else {
    BaselineResult result = run_joint_baseline(seq, cfg.plan);
    std::ostringstream acc_file;
    Scalar mean = 0.0;
    for (size_t t = 0; t < result.accuracies.size(); ++t) {
      std::snprintf(buf, sizeof(buf), "%.6f", result.accuracies[t]);
      acc_file << t + 1 << '\t' << buf << '\n';
      mean += result.accuracies[t];
    }
    mean /= static_cast<Scalar>(result.accuracies.size());
    write_file(out_dir / "joint_accuracy.tsv", acc_file.str());
    std::snprintf(buf, sizeof(buf), "%.6f", mean);
    write_file(out_dir / "metrics.tsv",
               "step\tacc\tbwf\n" + std::to_string(seq.num_tasks()) + "\t" + buf + "\t\n");
    log << "joint ACC " << mean << "\n";
  }

  const auto elapsed =
      std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() - t_start);
  log << "elapsed_ms: " << elapsed.count() << "\n";
  write_file(out_dir / "run.log", log.str());
  std::cout << "run complete: " << out_dir.string() << "\n";
  return 0;
}

int cmd_eval(const CliArgs& args) {
  const fs::path run_dir = args.run_dir;
  ExperimentConfig cfg;
  apply_config_file(cfg, run_dir / "config.resolved");
  if (cfg.plan.baseline != BaselineKind::RamCg)
    throw DataError("eval requires a run with per-task masks (baseline ramcg)");
  if (args.task < 1) throw ConfigError("eval: --task is 1-based and required");

  TaskSequence seq = obtain_sequence(cfg, nullptr);
  RamCgModel model = make_model(cfg.plan, seq.feature_dim, seq.max_classes());
  load_checkpoint(run_dir / "checkpoint", model);

  const int t = args.task - 1;
  if (t >= model.registry.num_committed())
    throw ProtocolError("eval: task " + std::to_string(args.task) + " has no committed mask");

  const TaskGraph& g = seq.tasks[static_cast<size_t>(t)];
  Tape tape;
  Var h = model.features_forward(tape, g);
  Var logits = model.logits_forward(tape, h, model.registry.task_mask(t));
  const Scalar acc =
      masked_accuracy(tape.value(logits), g.labels, g.split_mask(Split::Test), g.num_classes);

  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6f", acc);
  std::cout << "task " << args.task << " accuracy " << buf << "\n";
  std::ofstream append(run_dir / "eval.tsv", std::ios::app);
  append << args.task << '\t' << buf << '\n';
  return 0;
}

int cmd_sweep(const CliArgs& args) {
  ExperimentConfig cfg = build_config(args);
  prepare_out_dir(cfg.out_dir, args.force);
  const fs::path out_dir = cfg.out_dir;
  write_file(out_dir / "config.resolved", resolved_config(cfg));

  std::ostringstream sweep;
  sweep << "channels\tratio\tacc\tbwf\n";
  char buf[64];
  for (int ch : cfg.sweep_channels) {
    for (Scalar ratio : cfg.sweep_ratios) {
      ExperimentConfig cell = cfg;
      cell.plan.channels = ch;
      cell.plan.select_ratio = ratio;
      cell.plan.baseline = BaselineKind::RamCg;
      std::snprintf(buf, sizeof(buf), "channels_%d_ratio_%g", ch, ratio);
      cell.out_dir = (out_dir / buf).string();

      CliArgs cell_args = args;
      cell_args.force = true;
      cell_args.config_file.clear();
      // reuse cmd_run by writing the cell config out and pointing at it
      fs::create_directories(cell.out_dir);
      const fs::path cell_cfg = fs::path(cell.out_dir) / "cell.config";
      write_file(cell_cfg, resolved_config(cell));
      cell_args.config_file = cell_cfg.string();
      cell_args.out = cell.out_dir;
      cell_args.seed = -1;
      cell_args.baseline.clear();
      cell_args.ablation.clear();
      const int rc = cmd_run(cell_args);
      if (rc != 0) return rc;

      RMatrix r = load_rmatrix(fs::path(cell.out_dir) / "rmatrix.tsv");
      const int T = r.num_steps();
      std::snprintf(buf, sizeof(buf), "%.6f", acc_at(r, T));
      sweep << ch << '\t' << ratio << '\t' << buf << '\t';
      if (T >= 2) {
        std::snprintf(buf, sizeof(buf), "%.6f", bwf_at(r, T));
        sweep << buf;
      }
      sweep << '\n';
    }
  }
  write_file(out_dir / "sweep.tsv", sweep.str());
  std::cout << "sweep complete: " << (out_dir / "sweep.tsv").string() << "\n";
  return 0;
}

int cmd_report(const CliArgs& args) {
  const fs::path run_dir = args.run_dir;
  RMatrix r = load_rmatrix(run_dir / "rmatrix.tsv");
  emit_report(r, run_dir);
  std::cout << "step\tacc\tbwf\n";
  char buf[64];
  for (int T = 1; T <= r.num_steps(); ++T) {
    std::snprintf(buf, sizeof(buf), "%.6f", acc_at(r, T));
    std::cout << T << '\t' << buf;
    if (T >= 2) {
      std::snprintf(buf, sizeof(buf), "%.6f", bwf_at(r, T));
      std::cout << '\t' << buf;
    }
    std::cout << '\n';
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"relation-aware continual graph learning harness"};
  app.require_subcommand(1);

  CliArgs args;

  auto add_common = [&](CLI::App* sub, bool with_data_flags) {
    sub->add_option("--config", args.config_file, "key = value config file");
    sub->add_option("--out", args.out, "output directory");
    sub->add_option("--seed", args.seed, "seed for data generation and training");
    if (with_data_flags) {
      sub->add_option("--baseline", args.baseline, "ramcg|retrained|joint");
      sub->add_option("--ablation", args.ablation, "none|no_encoder|plain_gcn");
    }
    sub->add_flag("--force", args.force, "allow writing into a non-empty directory");
    sub->add_option("--deterministic", args.deterministic,
                    "seeded deterministic mode (default on)");
  };

  CLI::App* synth = app.add_subcommand("synth", "generate a synthetic task stream");
  add_common(synth, false);

  CLI::App* run = app.add_subcommand("run", "train and evaluate over a task sequence");
  add_common(run, true);

  CLI::App* eval = app.add_subcommand("eval", "re-evaluate one task from a run checkpoint");
  eval->add_option("--run", args.run_dir, "run directory")->required();
  eval->add_option("--task", args.task, "1-based task index")->required();

  CLI::App* sweep = app.add_subcommand("sweep", "channels x selection-ratio grid");
  add_common(sweep, false);

  CLI::App* report = app.add_subcommand("report", "recompute metrics from rmatrix.tsv");
  report->add_option("--run", args.run_dir, "run directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 1;
  }

  try {
    if (synth->parsed()) return cmd_synth(args);
    if (run->parsed()) return cmd_run(args);
    if (eval->parsed()) return cmd_eval(args);
    if (sweep->parsed()) return cmd_sweep(args);
    if (report->parsed()) return cmd_report(args);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 1;
  } catch (const NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return 3;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 2;
  } catch (const ProtocolError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const DimensionError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}
