#include "grpolab/rewards.hpp"

#include <cmath>
#include <stdexcept>

#include "grpolab/verifier.hpp"

namespace grpolab {

AnswerMode answer_mode_from_string(std::string_view s) {
  if (s == "accuracy") return AnswerMode::accuracy;
  if (s == "cosine") return AnswerMode::cosine;
  throw std::invalid_argument("unknown answer mode '" + std::string(s) +
                              "' (expected accuracy or cosine)");
}

std::string to_string(AnswerMode m) {
  return m == AnswerMode::accuracy ? "accuracy" : "cosine";
}

void RewardConfig::validate() const {
  if (weight_format < 0.0 || weight_answer < 0.0)
    throw std::invalid_argument("reward weights must be non-negative");
  if (max_len < 1) throw std::invalid_argument("reward max_len must be >= 1");
  if (!(correct_long < correct_short))
    throw std::invalid_argument("cosine endpoints: need correct_long < correct_short");
  if (!(wrong_short < wrong_long))
    throw std::invalid_argument("cosine endpoints: need wrong_short < wrong_long");
  if (!(wrong_long <= 0.0) || !(0.0 <= correct_long))
    throw std::invalid_argument("cosine endpoints: need wrong_long <= 0 <= correct_long");
}

double accuracy_reward(std::string_view completion_text, std::string_view gold) {
  const auto boxed = extract_boxed(completion_text);
  if (!boxed) return 0.0;
  return answers_equivalent(*boxed, gold) ? 1.0 : 0.0;
}

double cosine_reward(bool correct, int gen_len, const RewardConfig& config) {
  if (gen_len < 0 || gen_len > config.max_len)
    throw std::invalid_argument("cosine_reward: gen_len " + std::to_string(gen_len) +
                                " outside [0, " + std::to_string(config.max_len) + "]");
  const double t = static_cast<double>(gen_len) / config.max_len;
  const double rho = 0.5 * (1.0 + std::cos(M_PI * t));
  if (correct) return config.correct_long + (config.correct_short - config.correct_long) * rho;
  return config.wrong_long + (config.wrong_short - config.wrong_long) * rho;
}

double format_reward(std::string_view completion_text, const RewardConfig& config) {
  const FormatVerdict v = check_format(completion_text);
  if (!v.has_think_block) return 0.0;
  if (config.require_boxed_after_think) {
    if (!v.answer_after_think) return 0.0;
    // An empty box is not an answer.
    const auto boxed = extract_boxed(completion_text.substr(v.think_span->second));
    if (!boxed || normalize_answer(*boxed).empty()) return 0.0;
  }
  return 1.0;
}

RewardBreakdown composite_reward(const Completion& completion, std::string_view text,
                                 std::string_view gold, const RewardConfig& config) {
  RewardBreakdown out;
  out.correct = accuracy_reward(text, gold) == 1.0;
  out.length_fraction = static_cast<double>(completion.length()) / config.max_len;
  out.accuracy_component = config.answer_mode == AnswerMode::accuracy
                               ? (out.correct ? 1.0 : 0.0)
                               : cosine_reward(out.correct, completion.length(), config);
  out.format_component = format_reward(text, config);
  out.total = config.weight_answer * out.accuracy_component +
              config.weight_format * out.format_component;
  return out;
}

}  // namespace grpolab
