#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "grpolab/grpo.hpp"
#include "grpolab/policy.hpp"
#include "grpolab/rewards.hpp"

namespace grpolab {

/// Full run configuration. Keys in config files mirror the trainer setup
/// names (num_generations, max_completion_length, reward_weights, ...).
/// Presets fix (answer_mode, max_completion_length) per experiment; every
/// field stays overridable afterwards.
struct RunConfig {
  Hyperparams hyper;
  RewardConfig rewards;
  PolicyConfig policy;

  std::string dataset;  // JSONL path or synthetic:<difficulty>:<count>:<seed>
  std::string vocab = "arithmetic";  // builtin name or token-list JSON path
  std::string checkpoint_dir = "checkpoints";
  std::string checkpoint_format = "json";  // json | bin
  int save_every = 50;
  std::uint64_t seed = 42;
  std::string preset;
  std::string prompt_prefix;  // prepended when the vocabulary covers it

  // Applies one of exp1/exp2/exp3 (paper-scale lengths) or the *-toy
  // variants (desk-scale lengths and learning rate).
  void apply_preset(std::string_view name);

  // Syncs derived fields (reward max_len tracks max_completion_length)
  // and validates everything. Call after the last override.
  void finalize();
};

/// Flat "key = value" file, '#' comments. Unknown keys are rejected.
void apply_config_file(RunConfig& config, const std::filesystem::path& path);

/// Single key/value override; shares the file parser's key table.
void apply_config_entry(RunConfig& config, std::string_view key, std::string_view value);

/// Builds the vocabulary named by config.vocab: "arithmetic", "ascii", or a
/// path to a JSON array of tokens.
Vocabulary build_vocabulary(const std::string& spec);

}  // namespace grpolab
