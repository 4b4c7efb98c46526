#pragma once

#include <cstdint>
#include <string>

#include "grpolab/policy.hpp"
#include "grpolab/vocab.hpp"

namespace grpolab {

enum class Difficulty { easy, medium, hard };

Difficulty difficulty_from_string(std::string_view s);
std::string to_string(Difficulty d);

struct TaskInstance {
  Prompt prompt;
  std::string gold_answer;
  Difficulty difficulty = Difficulty::easy;
};

/// Synthetic arithmetic prompts: easy "a+b=" (single digit), medium "a+b="
/// (two digit), hard "a+b*c=" (single digit, precedence applies). The gold
/// answer is the exact integer result. Deterministic per seed.
TaskInstance generate_arithmetic_task(const Vocabulary& vocab, std::uint64_t seed,
                                      Difficulty difficulty);

}  // namespace grpolab
