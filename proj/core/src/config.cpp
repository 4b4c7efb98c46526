#include "grpolab/config.hpp"

#include <charconv>
#include <fstream>

#include <nlohmann/json.hpp>

#include "grpolab/util.hpp"

namespace grpolab {

namespace {

std::string_view trim_view(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r'))
    s.remove_suffix(1);
  return s;
}

double parse_double(std::string_view key, std::string_view value) {
  try {
    return std::stod(std::string(value));
  } catch (const std::exception&) {
    throw std::invalid_argument("config key '" + std::string(key) + "': bad number '" +
                                std::string(value) + "'");
  }
}

long long parse_int(std::string_view key, std::string_view value) {
  long long out = 0;
  const auto* begin = value.data();
  const auto* end = value.data() + value.size();
  auto [ptr, ec] = std::from_chars(begin, end, out);
  if (ec != std::errc() || ptr != end)
    throw std::invalid_argument("config key '" + std::string(key) + "': bad integer '" +
                                std::string(value) + "'");
  return out;
}

bool parse_bool(std::string_view key, std::string_view value) {
  if (value == "true" || value == "1") return true;
  if (value == "false" || value == "0") return false;
  throw std::invalid_argument("config key '" + std::string(key) + "': bad boolean '" +
                              std::string(value) + "'");
}

// "1.0, 2.0" -> format weight, answer weight (the trainer setup ordering).
void parse_reward_weights(RunConfig& config, std::string_view value) {
  const std::size_t comma = value.find(',');
  if (comma == std::string_view::npos)
    throw std::invalid_argument("reward_weights: expected 'format_w, answer_w'");
  config.rewards.weight_format = parse_double("reward_weights", trim_view(value.substr(0, comma)));
  config.rewards.weight_answer = parse_double("reward_weights", trim_view(value.substr(comma + 1)));
}

}  // namespace

void RunConfig::apply_preset(std::string_view name) {
  preset = std::string(name);
  const bool toy = preset.ends_with("-toy");
  const std::string_view base = toy ? std::string_view(preset).substr(0, preset.size() - 4)
                                    : std::string_view(preset);
  if (base != "exp1" && base != "exp2" && base != "exp3")
    throw std::invalid_argument("unknown preset '" + preset +
                                "' (expected exp1/exp2/exp3, optionally with -toy)");

  rewards.answer_mode = base == "exp3" ? AnswerMode::cosine : AnswerMode::accuracy;
  hyper.max_completion_length = base == "exp1" ? 4096 : 3584;
  hyper.max_prompt_length = 512;
  hyper.learning_rate = 1.0e-6;
  hyper.max_steps = 500;
  if (base == "exp3")
    prompt_prefix = "Reply in English only, do not use other languages";

  if (toy) {
    hyper.max_completion_length = 32;
    hyper.max_prompt_length = 32;
    hyper.learning_rate = 1.0e-2;
    hyper.max_steps = 1000;
    hyper.tasks_per_step = 24;
    hyper.optimizer = OptimizerKind::adam;
    // From-scratch toy policies need the exploration that the frozen-
    // reference pull suppresses; the desk-scale window keeps short prompts
    // visible behind the think block.
    hyper.kl_beta = 0.0;
    policy.context_window = 12;
  }
}

void RunConfig::finalize() {
  rewards.max_len = hyper.max_completion_length;
  hyper.validate();
  rewards.validate();
  if (save_every < 1) throw std::invalid_argument("save_steps must be >= 1");
  if (checkpoint_format != "json" && checkpoint_format != "bin")
    throw std::invalid_argument("checkpoint_format must be json or bin");
}

void apply_config_entry(RunConfig& config, std::string_view key, std::string_view value) {
  if (key == "preset") config.apply_preset(value);
  else if (key == "num_generations") config.hyper.group_size = static_cast<int>(parse_int(key, value));
  else if (key == "clip_eps") config.hyper.clip_eps = parse_double(key, value);
  else if (key == "kl_beta") config.hyper.kl_beta = parse_double(key, value);
  else if (key == "learning_rate") config.hyper.learning_rate = parse_double(key, value);
  else if (key == "lr_scheduler_type") {
    if (value != "cosine_with_min_lr")
      throw std::invalid_argument("lr_scheduler_type: only cosine_with_min_lr is supported");
  } else if (key == "min_lr_rate") config.hyper.min_lr_rate = parse_double(key, value);
  else if (key == "warmup_ratio") config.hyper.warmup_ratio = parse_double(key, value);
  else if (key == "max_steps") config.hyper.max_steps = static_cast<int>(parse_int(key, value));
  else if (key == "gradient_accumulation_steps")
    config.hyper.grad_accum = static_cast<int>(parse_int(key, value));
  else if (key == "std_floor") config.hyper.std_floor = parse_double(key, value);
  else if (key == "temperature") config.hyper.temperature = parse_double(key, value);
  else if (key == "max_prompt_length")
    config.hyper.max_prompt_length = static_cast<int>(parse_int(key, value));
  else if (key == "max_completion_length")
    config.hyper.max_completion_length = static_cast<int>(parse_int(key, value));
  else if (key == "tasks_per_step")
    config.hyper.tasks_per_step = static_cast<int>(parse_int(key, value));
  else if (key == "optimizer") config.hyper.optimizer = optimizer_from_string(value);
  else if (key == "answer_mode") config.rewards.answer_mode = answer_mode_from_string(value);
  else if (key == "reward_weights") parse_reward_weights(config, value);
  else if (key == "cosine_correct_short") config.rewards.correct_short = parse_double(key, value);
  else if (key == "cosine_correct_long") config.rewards.correct_long = parse_double(key, value);
  else if (key == "cosine_wrong_short") config.rewards.wrong_short = parse_double(key, value);
  else if (key == "cosine_wrong_long") config.rewards.wrong_long = parse_double(key, value);
  else if (key == "require_boxed_after_think")
    config.rewards.require_boxed_after_think = parse_bool(key, value);
  else if (key == "context_window")
    config.policy.context_window = static_cast<int>(parse_int(key, value));
  else if (key == "embed_dim") config.policy.embed_dim = static_cast<int>(parse_int(key, value));
  else if (key == "hidden_dim") config.policy.hidden_dim = static_cast<int>(parse_int(key, value));
  else if (key == "dataset") config.dataset = std::string(value);
  else if (key == "vocab") config.vocab = std::string(value);
  else if (key == "checkpoint_dir") config.checkpoint_dir = std::string(value);
  else if (key == "checkpoint_format") config.checkpoint_format = std::string(value);
  else if (key == "save_steps") config.save_every = static_cast<int>(parse_int(key, value));
  else if (key == "seed") config.seed = static_cast<std::uint64_t>(parse_int(key, value));
  else if (key == "prompt_prefix") config.prompt_prefix = std::string(value);
  else
    throw std::invalid_argument("unknown config key '" + std::string(key) + "'");
}

void apply_config_file(RunConfig& config, const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open config '" + path.string() + "'");
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::string_view s = trim_view(line);
    if (s.empty() || s.front() == '#') continue;
    const std::size_t eq = s.find('=');
    if (eq == std::string_view::npos)
      throw std::invalid_argument(path.string() + ":" + std::to_string(line_no) +
                                  ": expected 'key = value'");
    const std::string_view key = trim_view(s.substr(0, eq));
    const std::string_view value = trim_view(s.substr(eq + 1));
    try {
      apply_config_entry(config, key, value);
    } catch (const std::invalid_argument& e) {
      throw std::invalid_argument(path.string() + ":" + std::to_string(line_no) + ": " +
                                  e.what());
    }
  }
}

Vocabulary build_vocabulary(const std::string& spec) {
  if (spec == "arithmetic") return Vocabulary::arithmetic();
  if (spec == "ascii") return Vocabulary::ascii_full();
  std::ifstream in(spec);
  if (!in) throw DataError("cannot open vocabulary '" + spec + "'");
  nlohmann::json j = nlohmann::json::parse(in, nullptr, false);
  if (j.is_discarded() || !j.is_array())
    throw DataError("vocabulary '" + spec + "' must be a JSON array of tokens");
  return Vocabulary::from_tokens(j.get<std::vector<std::string>>());
}

}  // namespace grpolab
