#include "grpolab/grpo.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "grpolab/util.hpp"

namespace grpolab {

OptimizerKind optimizer_from_string(std::string_view s) {
  if (s == "sgd") return OptimizerKind::sgd;
  if (s == "adam") return OptimizerKind::adam;
  throw std::invalid_argument("unknown optimizer '" + std::string(s) +
                              "' (expected sgd or adam)");
}

std::string to_string(OptimizerKind k) { return k == OptimizerKind::sgd ? "sgd" : "adam"; }

void Hyperparams::validate() const {
  if (group_size < 2) throw std::invalid_argument("group_size must be >= 2");
  if (!(clip_eps > 0.0 && clip_eps < 1.0))
    throw std::invalid_argument("clip_eps must lie in (0, 1)");
  if (kl_beta < 0.0) throw std::invalid_argument("kl_beta must be >= 0");
  if (!(learning_rate > 0.0)) throw std::invalid_argument("learning_rate must be > 0");
  if (!(std_floor > 0.0)) throw std::invalid_argument("std_floor must be > 0");
  if (!(min_lr_rate > 0.0 && min_lr_rate <= 1.0))
    throw std::invalid_argument("min_lr_rate must lie in (0, 1]");
  if (warmup_ratio < 0.0 || warmup_ratio > 1.0)
    throw std::invalid_argument("warmup_ratio must lie in [0, 1]");
  if (max_steps < 0) throw std::invalid_argument("max_steps must be >= 0");
  if (grad_accum < 1) throw std::invalid_argument("grad_accum must be >= 1");
  if (!(temperature > 0.0)) throw std::invalid_argument("temperature must be > 0");
  if (max_prompt_length < 1 || max_completion_length < 1)
    throw std::invalid_argument("length limits must be >= 1");
  if (tasks_per_step < 1) throw std::invalid_argument("tasks_per_step must be >= 1");
}

std::size_t Group::token_count() const {
  std::size_t n = 0;
  for (const Completion& c : completions) n += c.token_ids.size();
  return n;
}

std::vector<double> compute_advantages(std::span<const double> rewards, double std_floor) {
  const std::size_t g = rewards.size();
  if (g < 2) throw std::invalid_argument("compute_advantages: need a group of >= 2 rewards");
  if (!(std_floor > 0.0)) throw std::invalid_argument("std_floor must be > 0");
  double mean = 0.0;
  for (double r : rewards) {
    if (!std::isfinite(r)) throw std::invalid_argument("compute_advantages: non-finite reward");
    mean += r;
  }
  mean /= static_cast<double>(g);
  double ss = 0.0;
  for (double r : rewards) ss += (r - mean) * (r - mean);
  const double sample_std = std::sqrt(ss / static_cast<double>(g - 1));

  std::vector<double> advantages(g, 0.0);
  if (sample_std < std_floor) return advantages;  // degenerate group
  for (std::size_t i = 0; i < g; ++i) advantages[i] = (rewards[i] - mean) / sample_std;
  return advantages;
}

double kl_value(double ref_logprob_token, double cur_logprob_token) {
  if (!std::isfinite(ref_logprob_token) || !std::isfinite(cur_logprob_token))
    throw std::invalid_argument("kl_value: non-finite log-probability");
  // rho - log(rho) - 1 with rho = exp(ref - cur); expm1 keeps the value
  // non-negative near rho = 1.
  const double log_rho = ref_logprob_token - cur_logprob_token;
  return std::expm1(log_rho) - log_rho;
}

namespace {

void check_group_alignment(const Group& group) {
  const std::size_t g = group.size();
  if (group.old_logprobs.size() != g || group.ref_logprobs.size() != g ||
      group.advantages.size() != g)
    throw std::invalid_argument("group: per-completion lists misaligned");
  for (std::size_t i = 0; i < g; ++i) {
    const std::size_t len = group.completions[i].token_ids.size();
    if (group.old_logprobs[i].size() != len || group.ref_logprobs[i].size() != len)
      throw std::invalid_argument("group: per-token log-prob lists misaligned");
  }
}

}  // namespace

std::vector<std::vector<TokenTerm>> surrogate_token_terms(const Group& group,
                                                          const PolicyParams& cur_params,
                                                          const Hyperparams& hyper) {
  check_group_alignment(group);
  const double lo = 1.0 - hyper.clip_eps, hi = 1.0 + hyper.clip_eps;
  std::vector<std::vector<TokenTerm>> terms(group.size());
  for (std::size_t i = 0; i < group.size(); ++i) {
    const SequenceScore cur =
        sequence_logprob(cur_params, group.prompt, group.completions[i], group.temperature);
    const double adv = group.advantages[i];
    terms[i].resize(cur.per_token.size());
    for (std::size_t t = 0; t < cur.per_token.size(); ++t) {
      TokenTerm& tt = terms[i][t];
      tt.ratio = std::exp(cur.per_token[t] - group.old_logprobs[i][t]);
      tt.term = std::min(tt.ratio * adv, std::clamp(tt.ratio, lo, hi) * adv);
      tt.kl = kl_value(group.ref_logprobs[i][t], cur.per_token[t]);
    }
  }
  return terms;
}

ObjectiveParts surrogate_parts(const Group& group, const PolicyParams& cur_params,
                               const Hyperparams& hyper) {
  const auto terms = surrogate_token_terms(group, cur_params, hyper);
  ObjectiveParts parts;
  for (const auto& completion_terms : terms) {
    for (const TokenTerm& tt : completion_terms) {
      parts.policy_term += tt.term;
      parts.kl_term += tt.kl;
      ++parts.token_count;
    }
  }
  if (parts.token_count > 0) {
    parts.policy_term /= static_cast<double>(parts.token_count);
    parts.kl_term /= static_cast<double>(parts.token_count);
  }
  return parts;
}

double surrogate_objective(const Group& group, const PolicyParams& cur_params,
                           const Hyperparams& hyper) {
  return surrogate_parts(group, cur_params, hyper).value(hyper.kl_beta);
}

void accumulate_objective_gradient(const Group& group, const PolicyParams& cur_params,
                                   const Hyperparams& hyper, double scale,
                                   std::span<double> grad) {
  check_group_alignment(group);
  const std::size_t n_tokens = group.token_count();
  if (n_tokens == 0) return;
  const double lo = 1.0 - hyper.clip_eps, hi = 1.0 + hyper.clip_eps;
  const double per_token_scale = scale / static_cast<double>(n_tokens);

  std::vector<double> weights;
  for (std::size_t i = 0; i < group.size(); ++i) {
    const SequenceScore cur =
        sequence_logprob(cur_params, group.prompt, group.completions[i], group.temperature);
    const double adv = group.advantages[i];
    weights.assign(cur.per_token.size(), 0.0);
    for (std::size_t t = 0; t < cur.per_token.size(); ++t) {
      const double ratio = std::exp(cur.per_token[t] - group.old_logprobs[i][t]);
      const double unclipped = ratio * adv;
      const double clipped = std::clamp(ratio, lo, hi) * adv;
      // d(ratio * A)/d(logprob) = ratio * A when the unclipped branch
      // attains the min; the clipped branch is constant in theta.
      double w = unclipped <= clipped ? ratio * adv : 0.0;
      // d(-beta * kl)/d(logprob) = -beta * (1 - rho)
      const double rho = std::exp(group.ref_logprobs[i][t] - cur.per_token[t]);
      w -= hyper.kl_beta * (1.0 - rho);
      weights[t] = w * per_token_scale;
    }
    accumulate_weighted_logprob_gradient(cur_params, group.prompt, group.completions[i],
                                         group.temperature, weights, grad);
  }
}

std::vector<double> objective_gradient(const Group& group, const PolicyParams& cur_params,
                                       const Hyperparams& hyper) {
  std::vector<double> grad(cur_params.param_count(), 0.0);
  accumulate_objective_gradient(group, cur_params, hyper, 1.0, grad);
  return grad;
}

double lr_at(int step, const Hyperparams& hyper) {
  if (step < 0 || step > hyper.max_steps)
    throw std::invalid_argument("lr_at: step " + std::to_string(step) + " outside [0, " +
                                std::to_string(hyper.max_steps) + "]");
  const long long warmup = std::llround(hyper.warmup_ratio * hyper.max_steps);
  if (warmup > 0 && step <= warmup)
    return hyper.learning_rate * static_cast<double>(step) / static_cast<double>(warmup);
  const double min_lr = hyper.min_lr_rate * hyper.learning_rate;
  if (step >= hyper.max_steps) return min_lr;
  const double t = static_cast<double>(step - warmup) /
                   static_cast<double>(hyper.max_steps - warmup);
  return min_lr + (hyper.learning_rate - min_lr) * 0.5 * (1.0 + std::cos(M_PI * t));
}

Group build_group(const PolicyParams& old_params, const PolicyParams& ref_params,
                  const Prompt& prompt, const Hyperparams& hyper, std::uint64_t seed) {
  Group group;
  group.prompt = prompt;
  group.temperature = hyper.temperature;
  group.completions.reserve(hyper.group_size);
  for (int i = 0; i < hyper.group_size; ++i) {
    Completion c = sample_completion(old_params, prompt, hyper.max_completion_length,
                                     hyper.temperature, derive_seed(seed, i));
    group.old_logprobs.push_back(c.per_token_logprob);
    group.ref_logprobs.push_back(
        sequence_logprob(ref_params, prompt, c, hyper.temperature).per_token);
    group.completions.push_back(std::move(c));
  }
  return group;
}

std::vector<RewardBreakdown> score_group(Group& group, std::string_view gold,
                                         const Vocabulary& vocab, const RewardConfig& config,
                                         const Hyperparams& hyper) {
  std::vector<RewardBreakdown> breakdowns;
  breakdowns.reserve(group.size());
  group.rewards.clear();
  for (const Completion& c : group.completions) {
    const std::string text = vocab.decode(c.token_ids);
    breakdowns.push_back(composite_reward(c, text, gold, config));
    group.rewards.push_back(breakdowns.back().total);
  }
  group.advantages = compute_advantages(group.rewards, hyper.std_floor);
  return breakdowns;
}

StepComputation compute_train_step(const PolicyParams& params, const PolicyParams& ref_params,
                                   int step_index, std::span<const TaskInstance> tasks,
                                   const Vocabulary& vocab, const Hyperparams& hyper,
                                   const RewardConfig& reward_config, std::uint64_t seed) {
  hyper.validate();
  reward_config.validate();
  if (tasks.empty()) throw std::invalid_argument("train_step: empty task batch");

  // The incoming params double as the sampling snapshot (pi_old); a single
  // inner update per sampling round keeps every ratio anchored there.
  std::vector<Group> groups;
  groups.reserve(tasks.size());
  StepMetrics metrics;
  metrics.step = step_index;
  double kl_sum = 0.0, objective_sum = 0.0;
  std::size_t token_sum = 0, completion_count = 0;
  for (std::size_t ti = 0; ti < tasks.size(); ++ti) {
    Group group = build_group(params, ref_params, tasks[ti].prompt, hyper,
                              derive_seed(seed, 1 + ti));
    const auto breakdowns =
        score_group(group, tasks[ti].gold_answer, vocab, reward_config, hyper);
    for (std::size_t i = 0; i < group.size(); ++i) {
      metrics.mean_reward += group.rewards[i];
      metrics.mean_accuracy_component += breakdowns[i].accuracy_component;
      metrics.mean_completion_length += group.completions[i].length();
      ++completion_count;
    }
    const ObjectiveParts parts = surrogate_parts(group, params, hyper);
    objective_sum += parts.value(hyper.kl_beta);
    kl_sum += parts.kl_term * static_cast<double>(parts.token_count);
    token_sum += parts.token_count;
    groups.push_back(std::move(group));
  }
  metrics.mean_reward /= static_cast<double>(completion_count);
  metrics.mean_accuracy_component /= static_cast<double>(completion_count);
  metrics.mean_completion_length /= static_cast<double>(completion_count);
  metrics.mean_kl = token_sum > 0 ? kl_sum / static_cast<double>(token_sum) : 0.0;
  metrics.objective_value = objective_sum / static_cast<double>(groups.size());

  // Batch gradient, accumulated micro-batch by micro-batch in fixed order.
  std::vector<double> grad(params.param_count(), 0.0);
  const double group_scale = 1.0 / static_cast<double>(groups.size());
  const std::size_t chunk =
      (groups.size() + hyper.grad_accum - 1) / static_cast<std::size_t>(hyper.grad_accum);
  for (std::size_t begin = 0; begin < groups.size(); begin += chunk) {
    const std::size_t end = std::min(groups.size(), begin + chunk);
    for (std::size_t g = begin; g < end; ++g)
      accumulate_objective_gradient(groups[g], params, hyper, group_scale, grad);
  }

  double norm_sq = 0.0;
  for (std::size_t i = 0; i < grad.size(); ++i) {
    if (!std::isfinite(grad[i]))
      throw NumericalError("train_step " + std::to_string(step_index) +
                           ": non-finite gradient at parameter " + std::to_string(i) +
                           "; params left unchanged");
    norm_sq += grad[i] * grad[i];
  }
  metrics.grad_norm = std::sqrt(norm_sq);
  return {std::move(grad), metrics};
}

TrainStepResult train_step(const PolicyParams& params, const PolicyParams& ref_params,
                           int step_index, std::span<const TaskInstance> tasks,
                           const Vocabulary& vocab, const Hyperparams& hyper,
                           const RewardConfig& reward_config, std::uint64_t seed) {
  StepComputation c = compute_train_step(params, ref_params, step_index, tasks, vocab, hyper,
                                         reward_config, seed);
  TrainStepResult result{params, c.metrics};
  const double lr = lr_at(std::min(step_index, hyper.max_steps), hyper);
  for (std::size_t i = 0; i < c.grad.size(); ++i) result.params.weights[i] += lr * c.grad[i];
  if (!result.params.all_finite())
    throw NumericalError("train_step " + std::to_string(step_index) +
                         ": non-finite parameter after update; params left unchanged");
  return result;
}

AdamState::AdamState(std::size_t param_count) : m_(param_count, 0.0), v_(param_count, 0.0) {}

void AdamState::apply(std::span<double> weights, std::span<const double> grad, double lr) {
  if (weights.size() != m_.size() || grad.size() != m_.size())
    throw std::invalid_argument("adam: size mismatch");
  constexpr double kBeta1 = 0.9, kBeta2 = 0.999, kEps = 1e-8;
  ++t_;
  const double bc1 = 1.0 - std::pow(kBeta1, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(kBeta2, static_cast<double>(t_));
  for (std::size_t i = 0; i < m_.size(); ++i) {
    m_[i] = kBeta1 * m_[i] + (1.0 - kBeta1) * grad[i];
    v_[i] = kBeta2 * v_[i] + (1.0 - kBeta2) * grad[i] * grad[i];
    const double mhat = m_[i] / bc1;
    const double vhat = v_[i] / bc2;
    weights[i] += lr * mhat / (std::sqrt(vhat) + kEps);
  }
}

Trainer::Trainer(Vocabulary vocab, Hyperparams hyper, RewardConfig reward_config,
                 PolicyParams initial_params)
    : vocab_(std::move(vocab)),
      hyper_(hyper),
      reward_config_(reward_config),
      params_(initial_params),
      ref_params_(std::move(initial_params)),
      adam_(params_.param_count()) {
  hyper_.validate();
  reward_config_.validate();
}

StepMetrics Trainer::step(std::span<const TaskInstance> tasks, std::uint64_t seed) {
  if (hyper_.optimizer == OptimizerKind::sgd) {
    TrainStepResult result = train_step(params_, ref_params_, step_index_, tasks, vocab_,
                                        hyper_, reward_config_, seed);
    params_ = std::move(result.params);
    ++step_index_;
    return result.metrics;
  }
  StepComputation c = compute_train_step(params_, ref_params_, step_index_, tasks, vocab_,
                                         hyper_, reward_config_, seed);
  // Lazy application: steps with an all-zero gradient (constant-reward
  // batches) leave the moment estimates untouched, so one sparse reward hit
  // lands exactly one bounded update instead of a decaying train of them.
  const bool any_signal =
      std::any_of(c.grad.begin(), c.grad.end(), [](double g) { return g != 0.0; });
  if (any_signal) {
    const double lr = lr_at(std::min(step_index_, hyper_.max_steps), hyper_);
    PolicyParams updated = params_;
    adam_.apply(updated.weights, c.grad, lr);
    if (!updated.all_finite())
      throw NumericalError("train_step " + std::to_string(step_index_) +
                           ": non-finite parameter after update; params left unchanged");
    params_ = std::move(updated);
  }
  ++step_index_;
  return c.metrics;
}

}  // namespace grpolab
