#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "grpolab/policy.hpp"
#include "grpolab/rewards.hpp"
#include "grpolab/tasks.hpp"
#include "grpolab/vocab.hpp"

namespace grpolab {

enum class OptimizerKind { sgd, adam };

OptimizerKind optimizer_from_string(std::string_view s);
std::string to_string(OptimizerKind k);

struct Hyperparams {
  int group_size = 6;
  double clip_eps = 0.2;
  double kl_beta = 0.04;
  double learning_rate = 1.0e-6;
  double min_lr_rate = 0.1;    // floor of the cosine decay, as a rate
  double warmup_ratio = 0.1;   // linear warmup fraction of max_steps
  int max_steps = 500;
  int grad_accum = 4;
  double std_floor = 1e-8;
  double temperature = 0.7;
  int max_prompt_length = 32;
  int max_completion_length = 64;
  int tasks_per_step = 4;
  // Plain ascent by default; the adaptive-moment mode rescales sparse toy
  // gradients per coordinate and is what the *-toy presets select.
  OptimizerKind optimizer = OptimizerKind::sgd;

  void validate() const;  // throws std::invalid_argument
};

/// One prompt's sampled group: G completions with the log-probabilities
/// recorded under the sampling policy (old) and the frozen reference,
/// rewards, and group-normalized advantages.
struct Group {
  Prompt prompt;
  std::vector<Completion> completions;
  std::vector<std::vector<double>> old_logprobs;
  std::vector<std::vector<double>> ref_logprobs;
  std::vector<double> rewards;
  std::vector<double> advantages;
  double temperature = 0.7;

  std::size_t size() const { return completions.size(); }
  std::size_t token_count() const;
};

/// Group-normalized advantages: (r - mean) / sample std (divisor G-1).
/// Groups whose spread falls below std_floor map to all-zero advantages.
std::vector<double> compute_advantages(std::span<const double> rewards, double std_floor);

/// Per-token divergence estimator rho - log(rho) - 1 with
/// rho = exp(ref_logprob - cur_logprob). Non-negative, zero iff equal.
double kl_value(double ref_logprob_token, double cur_logprob_token);

struct TokenTerm {
  double ratio = 1.0;  // exp(cur - old)
  double term = 0.0;   // min(ratio * A, clip(ratio) * A)
  double kl = 0.0;     // against the reference policy
};

/// Per-completion, per-token surrogate internals under cur_params.
std::vector<std::vector<TokenTerm>> surrogate_token_terms(const Group& group,
                                                          const PolicyParams& cur_params,
                                                          const Hyperparams& hyper);

struct ObjectiveParts {
  double policy_term = 0.0;  // token mean of the clipped surrogate terms
  double kl_term = 0.0;      // token mean of the KL estimator
  std::size_t token_count = 0;

  double value(double kl_beta) const { return policy_term - kl_beta * kl_term; }
};

ObjectiveParts surrogate_parts(const Group& group, const PolicyParams& cur_params,
                               const Hyperparams& hyper);

/// The clipped surrogate objective: token mean of
/// min(ratio * A, clip(ratio, 1-eps, 1+eps) * A) minus kl_beta times the
/// token mean of the KL estimator. Advantages broadcast over each
/// completion's tokens.
double surrogate_objective(const Group& group, const PolicyParams& cur_params,
                           const Hyperparams& hyper);

/// Analytic ascent gradient of surrogate_objective. Tokens whose clipped
/// branch is active and smaller contribute no policy gradient; the KL term
/// always contributes.
std::vector<double> objective_gradient(const Group& group, const PolicyParams& cur_params,
                                       const Hyperparams& hyper);

/// Same, accumulated into grad (size param_count) scaled by `scale`.
void accumulate_objective_gradient(const Group& group, const PolicyParams& cur_params,
                                   const Hyperparams& hyper, double scale,
                                   std::span<double> grad);

/// Scheduled learning rate: linear warmup from 0 over warmup_ratio *
/// max_steps, then cosine decay to min_lr_rate * learning_rate at max_steps.
double lr_at(int step, const Hyperparams& hyper);

/// Samples G completions for a prompt from old_params and records old/ref
/// log-probabilities. Rewards and advantages are left for score_group.
Group build_group(const PolicyParams& old_params, const PolicyParams& ref_params,
                  const Prompt& prompt, const Hyperparams& hyper, std::uint64_t seed);

/// Scores a sampled group against the gold answer and fills rewards and
/// advantages. Returns the per-completion breakdowns for metric logging.
std::vector<RewardBreakdown> score_group(Group& group, std::string_view gold,
                                         const Vocabulary& vocab, const RewardConfig& config,
                                         const Hyperparams& hyper);

struct StepMetrics {
  int step = 0;
  double mean_reward = 0.0;
  double mean_accuracy_component = 0.0;
  double mean_completion_length = 0.0;
  double mean_kl = 0.0;
  double objective_value = 0.0;
  double grad_norm = 0.0;
};

struct TrainStepResult {
  PolicyParams params;
  StepMetrics metrics;
};

struct StepComputation {
  std::vector<double> grad;  // batch-mean ascent gradient
  StepMetrics metrics;       // grad_norm already filled
};

/// Sampling, scoring and gradient accumulation for one step, without the
/// parameter update. The incoming params double as the sampling snapshot
/// (pi_old). A non-finite gradient aborts with NumericalError.
StepComputation compute_train_step(const PolicyParams& params, const PolicyParams& ref_params,
                                   int step_index, std::span<const TaskInstance> tasks,
                                   const Vocabulary& vocab, const Hyperparams& hyper,
                                   const RewardConfig& reward_config, std::uint64_t seed);

/// One GRPO update: snapshot the incoming params as the sampling policy,
/// sample a group per task, score, accumulate the batch-mean objective
/// gradient over grad_accum micro-batches in fixed order, and apply a
/// single plain ascent step at the scheduled learning rate. A non-finite
/// gradient aborts with NumericalError and leaves params untouched.
TrainStepResult train_step(const PolicyParams& params, const PolicyParams& ref_params,
                           int step_index, std::span<const TaskInstance> tasks,
                           const Vocabulary& vocab, const Hyperparams& hyper,
                           const RewardConfig& reward_config, std::uint64_t seed);

/// Adaptive-moment ascent state (beta1 0.9, beta2 0.999, eps 1e-8).
class AdamState {
 public:
  explicit AdamState(std::size_t param_count);
  // In-place ascent step at rate lr.
  void apply(std::span<double> weights, std::span<const double> grad, double lr);

 private:
  std::vector<double> m_, v_;
  long long t_ = 0;
};

/// Convenience wrapper owning the frozen reference snapshot and step counter.
class Trainer {
 public:
  Trainer(Vocabulary vocab, Hyperparams hyper, RewardConfig reward_config,
          PolicyParams initial_params);

  StepMetrics step(std::span<const TaskInstance> tasks, std::uint64_t seed);

  const PolicyParams& params() const { return params_; }
  const PolicyParams& ref_params() const { return ref_params_; }
  const Vocabulary& vocab() const { return vocab_; }
  int step_index() const { return step_index_; }

 private:
  Vocabulary vocab_;
  Hyperparams hyper_;
  RewardConfig reward_config_;
  PolicyParams params_;
  PolicyParams ref_params_;
  AdamState adam_;
  int step_index_ = 0;
};

}  // namespace grpolab
