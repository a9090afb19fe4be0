#pragma once

#include "ramcg/synth.hpp"
#include "ramcg/trainer.hpp"

#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace ramcg {

/// Everything a run needs: data source, plan, output. Every field has a
/// default; unknown keys are rejected by name.
struct ExperimentConfig {
  std::string dataset;  // task-sequence directory; empty means generate synth
  SynthStreamConfig synth;
  TrainPlan plan;
  std::string out_dir = "run";
  std::vector<int> sweep_channels = {2, 4, 6, 8};
  std::vector<Scalar> sweep_ratios = {20, 50, 70, 90};

  /// Seed applied to both plan and synth unless overridden per key.
  void set_seed(uint64_t s) {
    plan.seed = s;
    synth.seed = s;
  }
};

/// Applies `key = value` lines (# comments, blank lines allowed).
void apply_config_file(ExperimentConfig& cfg, const std::filesystem::path& path);

/// Applies one key=value pair; throws ConfigError naming unknown keys.
void apply_config_kv(ExperimentConfig& cfg, const std::string& key, const std::string& value);

/// All keys with their final values, in a fixed order; parseable by
/// apply_config_file for bit-for-bit reproduction.
std::string resolved_config(const ExperimentConfig& cfg);

}  // namespace ramcg
