#pragma once

#include <string_view>

#include "grpolab/policy.hpp"

namespace grpolab {

enum class AnswerMode { accuracy, cosine };

AnswerMode answer_mode_from_string(std::string_view s);
std::string to_string(AnswerMode m);

/// Weights and schedule endpoints of the composite rule-based reward.
/// total = weight_answer * answer component + weight_format * format
/// component. The cosine endpoints interpolate with rho(t) = (1+cos(pi t))/2
/// over t = length / max_len.
struct RewardConfig {
  double weight_format = 1.0;
  double weight_answer = 2.0;
  AnswerMode answer_mode = AnswerMode::accuracy;
  double correct_short = 1.0;
  double correct_long = 0.5;
  double wrong_short = -0.5;
  double wrong_long = 0.0;
  int max_len = 64;
  // Strict reading of the format rule: the boxed answer must follow
  // </think>. Relax to tags-only by clearing this.
  bool require_boxed_after_think = true;

  void validate() const;  // throws std::invalid_argument
};

struct RewardBreakdown {
  double accuracy_component = 0.0;
  double format_component = 0.0;
  double total = 0.0;
  bool correct = false;
  double length_fraction = 0.0;
};

/// 1 iff the last boxed expression is equivalent to the gold answer.
double accuracy_reward(std::string_view completion_text, std::string_view gold);

/// Length-scheduled answer reward. Correct completions decay from
/// correct_short at length 0 to correct_long at max_len; wrong ones rise
/// from wrong_short to wrong_long. gen_len must not exceed max_len.
double cosine_reward(bool correct, int gen_len, const RewardConfig& config);

/// 1 iff the reasoning block is well-formed (and, by default, a boxed answer
/// follows it).
double format_reward(std::string_view completion_text, const RewardConfig& config);

RewardBreakdown composite_reward(const Completion& completion, std::string_view text,
                                 std::string_view gold, const RewardConfig& config);

}  // namespace grpolab
