#include "grpolab/run.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include <nlohmann/json.hpp>

#include "grpolab/rewards.hpp"
#include "grpolab/util.hpp"
#include "grpolab/verifier.hpp"

namespace grpolab {

using nlohmann::json;

namespace {

void write_atomic(const std::filesystem::path& path, const std::string& content) {
  const std::filesystem::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw DataError("cannot write '" + tmp.string() + "'");
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
  }
  std::filesystem::rename(tmp, path);
}

std::vector<ProblemRecord> generate_synthetic(const std::string& spec) {
  // synthetic:<difficulty>:<count>[:<seed>]
  std::vector<std::string> parts;
  std::size_t pos = 0;
  while (pos <= spec.size()) {
    const std::size_t colon = spec.find(':', pos);
    parts.push_back(spec.substr(pos, colon == std::string::npos ? colon : colon - pos));
    if (colon == std::string::npos) break;
    pos = colon + 1;
  }
  if (parts.size() < 3 || parts.size() > 4)
    throw DataError("synthetic dataset spec must be synthetic:<difficulty>:<count>[:<seed>]");
  Difficulty difficulty = Difficulty::easy;
  long long count = 0;
  std::uint64_t seed = 0;
  try {
    difficulty = difficulty_from_string(parts[1]);
    count = std::stoll(parts[2]);
    if (parts.size() == 4) seed = std::stoull(parts[3]);
  } catch (const std::exception&) {
    throw DataError("bad synthetic dataset spec '" + spec + "'");
  }
  if (count < 1) throw DataError("synthetic dataset count must be >= 1");

  // Rendering tasks only needs a tokenizer; the arithmetic vocabulary
  // covers every difficulty.
  const Vocabulary vocab = Vocabulary::arithmetic();
  std::vector<ProblemRecord> records;
  records.reserve(static_cast<std::size_t>(count));
  for (long long i = 0; i < count; ++i) {
    const TaskInstance task = generate_arithmetic_task(vocab, derive_seed(seed, i), difficulty);
    ProblemRecord r;
    r.id = parts[1] + "-" + std::to_string(seed) + "-" + std::to_string(i);
    r.question = task.prompt.text;
    r.solution = "\\boxed{" + task.gold_answer + "}";
    r.gold_answer = task.gold_answer;
    r.source = Source::synthetic;
    records.push_back(std::move(r));
  }
  return records;
}

std::string join_prefix(const std::string& prefix, const std::string& question) {
  return prefix.empty() ? question : prefix + " " + question;
}

json metrics_to_json(const StepMetrics& m) {
  json j;
  j["step"] = m.step;
  j["mean_reward"] = m.mean_reward;
  j["mean_accuracy_component"] = m.mean_accuracy_component;
  j["mean_completion_length"] = m.mean_completion_length;
  j["mean_kl"] = m.mean_kl;
  j["objective_value"] = m.objective_value;
  j["grad_norm"] = m.grad_norm;
  return j;
}

std::string number_str(double v) { return json(v).dump(); }

}  // namespace

std::vector<ProblemRecord> load_dataset(const std::string& spec) {
  if (spec.empty()) throw DataError("no dataset configured");
  if (spec.starts_with("synthetic:")) return generate_synthetic(spec);
  return load_jsonl(spec);
}

std::vector<TaskInstance> tasks_from_records(const std::vector<ProblemRecord>& records,
                                             const Vocabulary& vocab, int max_prompt_length,
                                             const std::string& prompt_prefix) {
  const bool use_prefix = !prompt_prefix.empty() && vocab.can_encode(prompt_prefix + " ");
  std::vector<TaskInstance> tasks;
  tasks.reserve(records.size());
  for (const ProblemRecord& r : records) {
    if (!r.gold_answer || r.gold_answer->empty())
      throw DataError("record '" + r.id + "' has no gold answer; cannot train on it");
    TaskInstance task;
    const std::string text = use_prefix ? join_prefix(prompt_prefix, r.question) : r.question;
    task.prompt = make_prompt(vocab, text, max_prompt_length);
    task.gold_answer = *r.gold_answer;
    tasks.push_back(std::move(task));
  }
  return tasks;
}

TrainOutputs run_train(const RunConfig& config_in) {
  RunConfig config = config_in;
  config.finalize();

  const Vocabulary vocab = build_vocabulary(config.vocab);
  const PolicyParams initial =
      PolicyParams::random_init(vocab, config.policy, derive_seed(config.seed, 0x1a17));

  std::vector<ProblemRecord> records = load_dataset(config.dataset);
  if (records.empty()) throw DataError("dataset '" + config.dataset + "' is empty");
  std::vector<TaskInstance> tasks =
      tasks_from_records(records, vocab, config.hyper.max_prompt_length, config.prompt_prefix);

  // Single-epoch order, fixed by the run seed.
  Rng shuffle_rng(derive_seed(config.seed, 0x0e0c4));
  for (std::size_t i = tasks.size(); i > 1; --i) {
    const std::size_t j =
        static_cast<std::size_t>(shuffle_rng.uniform_int(0, static_cast<std::int64_t>(i) - 1));
    std::swap(tasks[i - 1], tasks[j]);
  }

  const std::size_t batch = static_cast<std::size_t>(config.hyper.tasks_per_step);
  const int steps_per_epoch = static_cast<int>((tasks.size() + batch - 1) / batch);
  const int total_steps = std::min(config.hyper.max_steps, steps_per_epoch);

  std::filesystem::create_directories(config.checkpoint_dir);
  const std::string ext = config.checkpoint_format == "bin" ? ".bin" : ".json";
  const auto checkpoint_path = [&](int step) {
    char name[40];
    std::snprintf(name, sizeof(name), "checkpoint-%06d%s", step, ext.c_str());
    return std::filesystem::path(config.checkpoint_dir) / name;
  };

  TrainOutputs outputs;
  outputs.metrics_path = std::filesystem::path(config.checkpoint_dir) / "metrics.jsonl";
  save_checkpoint(vocab, initial, checkpoint_path(0));
  outputs.checkpoint_paths.push_back(checkpoint_path(0));
  std::string metrics_lines;
  write_atomic(outputs.metrics_path, metrics_lines);

  Trainer trainer(vocab, config.hyper, config.rewards, initial);
  for (int step = 0; step < total_steps; ++step) {
    const std::size_t begin = static_cast<std::size_t>(step) * batch;
    const std::size_t end = std::min(tasks.size(), begin + batch);
    const StepMetrics metrics =
        trainer.step(std::span(tasks).subspan(begin, end - begin),
                     derive_seed(config.seed, 0x57e9, static_cast<std::uint64_t>(step)));
    metrics_lines += metrics_to_json(metrics).dump() + "\n";
    write_atomic(outputs.metrics_path, metrics_lines);
    const int done = step + 1;
    if (done % config.save_every == 0) {
      save_checkpoint(vocab, trainer.params(), checkpoint_path(done));
      outputs.checkpoint_paths.push_back(checkpoint_path(done));
    }
    outputs.steps_run = done;
  }
  if (total_steps > 0 && total_steps % config.save_every != 0) {
    save_checkpoint(vocab, trainer.params(), checkpoint_path(total_steps));
    outputs.checkpoint_paths.push_back(checkpoint_path(total_steps));
  }
  return outputs;
}

EvalReport run_eval(const Checkpoint& checkpoint, const std::vector<ProblemRecord>& benchmark,
                    const std::string& benchmark_name, double temperature,
                    int max_completion_length, int max_prompt_length,
                    const std::string& prompt_prefix, std::uint64_t seed) {
  EvalReport report;
  report.benchmark = benchmark_name;
  const Vocabulary& vocab = checkpoint.vocab;
  const bool use_prefix = !prompt_prefix.empty() && vocab.can_encode(prompt_prefix + " ");
  for (std::size_t i = 0; i < benchmark.size(); ++i) {
    const ProblemRecord& r = benchmark[i];
    if (!r.gold_answer || r.gold_answer->empty()) {
      report.skipped.push_back(r.id);
      continue;
    }
    const std::string text = use_prefix ? join_prefix(prompt_prefix, r.question) : r.question;
    const Prompt prompt = make_prompt(vocab, text, max_prompt_length);
    const Completion completion = sample_completion(
        checkpoint.params, prompt, max_completion_length, temperature, derive_seed(seed, i));
    const std::string rendered = vocab.decode(completion.token_ids);
    EvalVerdict verdict;
    verdict.id = r.id;
    verdict.extracted = extract_boxed(rendered);
    verdict.correct = accuracy_reward(rendered, *r.gold_answer) == 1.0;
    if (verdict.correct) ++report.n_correct;
    report.verdicts.push_back(std::move(verdict));
  }
  report.n_problems = static_cast<int>(report.verdicts.size());
  if (report.n_problems == 0)
    throw DataError("benchmark '" + benchmark_name + "' has no evaluable problems");
  report.pass_at_1 = static_cast<double>(report.n_correct) / report.n_problems;
  return report;
}

void write_eval_report(const EvalReport& report, const std::filesystem::path& path) {
  json j;
  j["benchmark"] = report.benchmark;
  j["n_problems"] = report.n_problems;
  j["n_correct"] = report.n_correct;
  j["pass_at_1"] = report.pass_at_1;
  json verdicts = json::array();
  for (const EvalVerdict& v : report.verdicts) {
    json jv;
    jv["id"] = v.id;
    jv["correct"] = v.correct ? 1 : 0;
    jv["extracted"] = v.extracted ? json(*v.extracted) : json(nullptr);
    verdicts.push_back(std::move(jv));
  }
  j["verdicts"] = std::move(verdicts);
  j["skipped"] = report.skipped;
  write_atomic(path, j.dump(2) + "\n");
}

std::vector<StepMetrics> load_metrics_jsonl(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open metrics log '" + path.string() + "'");
  std::vector<StepMetrics> metrics;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    json j = json::parse(line, nullptr, false);
    if (j.is_discarded())
      throw DataError(path.string() + ": line " + std::to_string(line_no) +
                      ": malformed JSON");
    StepMetrics m;
    try {
      m.step = j.at("step").get<int>();
      m.mean_reward = j.at("mean_reward").get<double>();
      m.mean_accuracy_component = j.at("mean_accuracy_component").get<double>();
      m.mean_completion_length = j.at("mean_completion_length").get<double>();
      m.mean_kl = j.at("mean_kl").get<double>();
      m.objective_value = j.at("objective_value").get<double>();
      m.grad_norm = j.at("grad_norm").get<double>();
    } catch (const json::exception& e) {
      throw DataError(path.string() + ": line " + std::to_string(line_no) + ": " + e.what());
    }
    metrics.push_back(m);
  }
  return metrics;
}

void write_metrics_csv(const std::vector<StepMetrics>& metrics,
                       const std::filesystem::path& path) {
  std::string out = "step,mean_reward,mean_len,mean_kl,objective,grad_norm\n";
  for (const StepMetrics& m : metrics) {
    out += std::to_string(m.step) + "," + number_str(m.mean_reward) + "," +
           number_str(m.mean_completion_length) + "," + number_str(m.mean_kl) + "," +
           number_str(m.objective_value) + "," + number_str(m.grad_norm) + "\n";
  }
  write_atomic(path, out);
}

ReportSummary summarize_metrics(const std::vector<StepMetrics>& metrics) {
  if (metrics.empty()) throw DataError("metrics log is empty");
  ReportSummary s;
  const auto summarize = [&](auto field) {
    SeriesSummary out;
    out.min = out.max = out.final = metrics.front().*field;
    for (const StepMetrics& m : metrics) {
      out.min = std::min(out.min, m.*field);
      out.max = std::max(out.max, m.*field);
    }
    out.final = metrics.back().*field;
    return out;
  };
  s.reward = summarize(&StepMetrics::mean_reward);
  s.completion_length = summarize(&StepMetrics::mean_completion_length);
  s.kl = summarize(&StepMetrics::mean_kl);

  // Contiguous deciles; the final one is compared against the peak.
  const std::size_t n = metrics.size();
  const std::size_t decile = (n + 9) / 10;
  double peak = -HUGE_VAL, final_mean = 0.0;
  for (std::size_t begin = 0; begin < n; begin += decile) {
    const std::size_t end = std::min(n, begin + decile);
    double mean = 0.0;
    for (std::size_t i = begin; i < end; ++i) mean += metrics[i].mean_reward;
    mean /= static_cast<double>(end - begin);
    peak = std::max(peak, mean);
    final_mean = mean;
  }
  s.peak_decile_reward = peak;
  s.final_decile_reward = final_mean;
  s.reward_collapse = final_mean < 0.5 * peak;
  return s;
}

}  // namespace grpolab
