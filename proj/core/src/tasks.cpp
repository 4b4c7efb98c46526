#include "grpolab/tasks.hpp"

#include <stdexcept>

#include "grpolab/util.hpp"

namespace grpolab {

Difficulty difficulty_from_string(std::string_view s) {
  if (s == "easy") return Difficulty::easy;
  if (s == "medium") return Difficulty::medium;
  if (s == "hard") return Difficulty::hard;
  throw std::invalid_argument("unknown difficulty '" + std::string(s) + "'");
}

std::string to_string(Difficulty d) {
  switch (d) {
    case Difficulty::easy: return "easy";
    case Difficulty::medium: return "medium";
    case Difficulty::hard: return "hard";
  }
  return "easy";
}

TaskInstance generate_arithmetic_task(const Vocabulary& vocab, std::uint64_t seed,
                                      Difficulty difficulty) {
  Rng rng(seed);
  std::string text;
  long long answer = 0;
  switch (difficulty) {
    case Difficulty::easy: {
      const long long a = rng.uniform_int(0, 9), b = rng.uniform_int(0, 9);
      text = std::to_string(a) + "+" + std::to_string(b) + "=";
      answer = a + b;
      break;
    }
    case Difficulty::medium: {
      const long long a = rng.uniform_int(10, 99), b = rng.uniform_int(10, 99);
      text = std::to_string(a) + "+" + std::to_string(b) + "=";
      answer = a + b;
      break;
    }
    case Difficulty::hard: {
      const long long a = rng.uniform_int(0, 9), b = rng.uniform_int(0, 9);
      const long long c = rng.uniform_int(0, 9);
      text = std::to_string(a) + "+" + std::to_string(b) + "*" + std::to_string(c) + "=";
      answer = a + b * c;
      break;
    }
  }
  TaskInstance task;
  task.prompt = make_prompt(vocab, text, 32);
  task.gold_answer = std::to_string(answer);
  task.difficulty = difficulty;
  return task;
}

}  // namespace grpolab
