#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "grpolab/checkpoint.hpp"
#include "grpolab/config.hpp"
#include "grpolab/curation.hpp"
#include "grpolab/grpo.hpp"
#include "grpolab/tasks.hpp"

namespace grpolab {

/// Loads a dataset path, or generates one from the scheme
/// synthetic:<difficulty>:<count>[:<seed>].
std::vector<ProblemRecord> load_dataset(const std::string& spec);

/// Records -> trainable tasks. Every record needs an answer; questions must
/// encode under the vocabulary. prompt_prefix is prepended when non-empty
/// and encodable (it stays inert otherwise).
std::vector<TaskInstance> tasks_from_records(const std::vector<ProblemRecord>& records,
                                             const Vocabulary& vocab, int max_prompt_length,
                                             const std::string& prompt_prefix);

struct TrainOutputs {
  std::filesystem::path metrics_path;
  std::vector<std::filesystem::path> checkpoint_paths;
  int steps_run = 0;
};

/// Full training run: initial checkpoint (the frozen reference), one
/// train_step per batch for max_steps or one epoch (whichever first),
/// periodic checkpoints, a StepMetrics JSONL line per step, and a final
/// checkpoint. Byte-deterministic for a fixed config.
TrainOutputs run_train(const RunConfig& config);

struct EvalVerdict {
  std::string id;
  bool correct = false;
  std::optional<std::string> extracted;
};

struct EvalReport {
  std::string benchmark;
  int n_problems = 0;
  int n_correct = 0;
  double pass_at_1 = 0.0;
  std::vector<EvalVerdict> verdicts;
  std::vector<std::string> skipped;  // records without a gold answer
};

/// Zero-shot pass@1: one sampled attempt per problem at the given
/// temperature, graded by the accuracy rule.
EvalReport run_eval(const Checkpoint& checkpoint, const std::vector<ProblemRecord>& benchmark,
                    const std::string& benchmark_name, double temperature,
                    int max_completion_length, int max_prompt_length,
                    const std::string& prompt_prefix, std::uint64_t seed);

void write_eval_report(const EvalReport& report, const std::filesystem::path& path);

std::vector<StepMetrics> load_metrics_jsonl(const std::filesystem::path& path);
void write_metrics_csv(const std::vector<StepMetrics>& metrics,
                       const std::filesystem::path& path);

struct SeriesSummary {
  double min = 0.0, max = 0.0, final = 0.0;
};

struct ReportSummary {
  SeriesSummary reward, completion_length, kl;
  // Final-decile mean reward under half the peak-decile mean.
  bool reward_collapse = false;
  double peak_decile_reward = 0.0;
  double final_decile_reward = 0.0;
};

ReportSummary summarize_metrics(const std::vector<StepMetrics>& metrics);

}  // namespace grpolab
