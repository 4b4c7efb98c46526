#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "grpolab/checkpoint.hpp"
#include "grpolab/config.hpp"
#include "grpolab/curation.hpp"
#include "grpolab/grpo.hpp"
#include "grpolab/rewards.hpp"
#include "grpolab/run.hpp"
#include "grpolab/util.hpp"
#include "grpolab/verifier.hpp"

namespace {

using grpolab::DataError;
using nlohmann::json;

std::vector<std::string> split_csv(const std::string& s) {
  std::vector<std::string> out;
  std::size_t pos = 0;
  while (pos <= s.size()) {
    const std::size_t comma = s.find(',', pos);
    std::string part = s.substr(pos, comma == std::string::npos ? comma : comma - pos);
    while (!part.empty() && part.front() == ' ') part.erase(part.begin());
    while (!part.empty() && part.back() == ' ') part.pop_back();
    if (!part.empty()) out.push_back(std::move(part));
    if (comma == std::string::npos) break;
    pos = comma + 1;
  }
  return out;
}

struct TrainArgs {
  std::string preset;
  std::string config_file;
  std::vector<std::string> overrides;  // key=value
  std::string dataset;
  std::string checkpoint_dir;
  long long seed = -1;
  int max_steps = -1;
  std::string answer_mode;
};

grpolab::RunConfig assemble_config(const TrainArgs& args) {
  grpolab::RunConfig config;
  if (!args.preset.empty()) config.apply_preset(args.preset);
  if (!args.config_file.empty()) grpolab::apply_config_file(config, args.config_file);
  for (const std::string& kv : args.overrides) {
    const std::size_t eq = kv.find('=');
    if (eq == std::string::npos)
      throw std::invalid_argument("--set expects key=value, got '" + kv + "'");
    grpolab::apply_config_entry(config, kv.substr(0, eq), kv.substr(eq + 1));
  }
  if (!args.dataset.empty()) config.dataset = args.dataset;
  if (!args.checkpoint_dir.empty()) config.checkpoint_dir = args.checkpoint_dir;
  if (args.seed >= 0) config.seed = static_cast<std::uint64_t>(args.seed);
  if (args.max_steps >= 0) config.hyper.max_steps = args.max_steps;
  if (!args.answer_mode.empty())
    config.rewards.answer_mode = grpolab::answer_mode_from_string(args.answer_mode);
  config.finalize();
  return config;
}

int cmd_train(const TrainArgs& args) {
  const grpolab::RunConfig config = assemble_config(args);
  const grpolab::TrainOutputs outputs = grpolab::run_train(config);
  std::cout << "trained " << outputs.steps_run << " steps; metrics at "
            << outputs.metrics_path.string() << "; " << outputs.checkpoint_paths.size()
            << " checkpoints in " << config.checkpoint_dir << "\n";
  return 0;
}

struct EvalArgs {
  std::string checkpoint;
  std::string benchmark;
  std::string out = "eval_report.json";
  std::string name;
  std::string prompt_prefix;
  double temperature = 0.7;
  int max_completion_length = 64;
  int max_prompt_length = 32;
  long long seed = 42;
};

int cmd_eval(const EvalArgs& args) {
  const grpolab::Checkpoint checkpoint = grpolab::load_checkpoint(args.checkpoint);
  const auto benchmark = grpolab::load_dataset(args.benchmark);
  std::string name = args.name;
  if (name.empty()) name = std::filesystem::path(args.benchmark).stem().string();
  const grpolab::EvalReport report = grpolab::run_eval(
      checkpoint, benchmark, name, args.temperature, args.max_completion_length,
      args.max_prompt_length, args.prompt_prefix, static_cast<std::uint64_t>(args.seed));
  grpolab::write_eval_report(report, args.out);
  std::cout << name << ": pass@1 = " << report.pass_at_1 << " (" << report.n_correct << "/"
            << report.n_problems << ", " << report.skipped.size() << " skipped)\n";
  return 0;
}

struct VerifyArgs {
  std::string in;
  std::string out;
};

int cmd_verify(const VerifyArgs& args) {
  std::ifstream in(args.in);
  if (!in) throw DataError("cannot open '" + args.in + "'");
  std::string out_text;
  std::string line;
  std::size_t line_no = 0;
  const grpolab::RewardConfig format_config;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    json j = json::parse(line, nullptr, false);
    if (j.is_discarded())
      throw DataError(args.in + ": line " + std::to_string(line_no) + ": malformed JSON");
    for (const char* key : {"id", "prediction", "gold"})
      if (!j.contains(key))
        throw DataError(args.in + ": line " + std::to_string(line_no) +
                        ": missing required key '" + key + "'");
    const std::string prediction = j.at("prediction").get<std::string>();
    const std::string gold = j.at("gold").get<std::string>();
    json result;
    result["id"] = j.at("id");
    const auto extracted = grpolab::extract_boxed(prediction);
    result["extracted"] = extracted ? json(*extracted) : json(nullptr);
    result["correct"] = grpolab::accuracy_reward(prediction, gold) == 1.0 ? 1 : 0;
    result["format_ok"] = grpolab::format_reward(prediction, format_config) == 1.0 ? 1 : 0;
    out_text += result.dump() + "\n";
  }
  std::ofstream out(args.out);
  if (!out) throw DataError("cannot write '" + args.out + "'");
  out << out_text;
  std::cout << "verified " << line_no << " records -> " << args.out << "\n";
  return 0;
}

struct ReportArgs {
  std::string log;
  std::string csv = "metrics.csv";
};

int cmd_report(const ReportArgs& args) {
  const auto metrics = grpolab::load_metrics_jsonl(args.log);
  const grpolab::ReportSummary summary = grpolab::summarize_metrics(metrics);
  grpolab::write_metrics_csv(metrics, args.csv);
  const auto series = [](const char* label, const grpolab::SeriesSummary& s) {
    std::printf("%-18s min %.6g  max %.6g  final %.6g\n", label, s.min, s.max, s.final);
  };
  std::printf("steps: %zu (csv: %s)\n", metrics.size(), args.csv.c_str());
  series("mean_reward", summary.reward);
  series("completion_length", summary.completion_length);
  series("mean_kl", summary.kl);
  std::printf("reward collapse: %s (final decile %.6g vs peak decile %.6g)\n",
              summary.reward_collapse ? "YES" : "no", summary.final_decile_reward,
              summary.peak_decile_reward);
  return 0;
}

struct CurateArgs {
  std::string in;
  std::string out;
  std::string audit;
  std::string stages = "boxed,difficulty,noise";
  double drop_above = 0.9;
  std::string scorer = "heuristic";
  std::string checkpoint;
  int scorer_samples = 8;
  double temperature = 0.7;
  int max_completion_length = 64;
  long long seed = 42;
};

int cmd_curate(const CurateArgs& args) {
  auto records = grpolab::load_jsonl(args.in);
  std::unique_ptr<grpolab::Scorer> scorer;
  if (args.scorer == "heuristic") {
    scorer = std::make_unique<grpolab::HeuristicScorer>();
  } else if (args.scorer == "policy") {
    if (args.checkpoint.empty())
      throw std::invalid_argument("--scorer policy requires --checkpoint");
    grpolab::Checkpoint cp = grpolab::load_checkpoint(args.checkpoint);
    scorer = std::make_unique<grpolab::PolicyPassRateScorer>(
        std::move(cp.vocab), std::move(cp.params), args.scorer_samples, args.temperature,
        args.max_completion_length, static_cast<std::uint64_t>(args.seed));
  } else {
    throw std::invalid_argument("unknown scorer '" + args.scorer +
                                "' (expected heuristic or policy)");
  }
  const auto stages = split_csv(args.stages);
  if (stages.empty()) throw std::invalid_argument("--stages must name at least one stage");
  grpolab::PipelineResult result =
      grpolab::run_curation_pipeline(std::move(records), stages, *scorer, args.drop_above);
  grpolab::save_jsonl(result.kept, args.out);
  if (!args.audit.empty()) {
    std::vector<grpolab::ProblemRecord> all = result.kept;
    for (const auto& r : result.dropped) all.push_back(r);
    grpolab::save_jsonl(all, args.audit);
  }
  for (const grpolab::StageCount& c : result.counts)
    std::cout << c.stage << ": " << c.in << " -> " << c.out << "\n";
  std::cout << "kept " << result.kept.size() << " records -> " << args.out << "\n";
  return 0;
}

struct MixArgs {
  std::string s1;
  std::string deepscaler;
  std::string easy;
  std::string counts = "3000,3000,1000";
  long long seed = 42;
  std::string out;
};

int cmd_mix(const MixArgs& args) {
  const auto counts = split_csv(args.counts);
  if (counts.size() != 3) throw std::invalid_argument("--counts expects n1,n2,n3");
  std::size_t n[3];
  for (int i = 0; i < 3; ++i) {
    const long long v = std::stoll(counts[i]);
    if (v < 0) throw std::invalid_argument("--counts entries must be >= 0");
    n[i] = static_cast<std::size_t>(v);
  }
  const auto mixed = grpolab::mix_datasets(
      grpolab::load_jsonl(args.s1), grpolab::load_jsonl(args.deepscaler),
      grpolab::load_jsonl(args.easy), n[0], n[1], n[2], static_cast<std::uint64_t>(args.seed));
  grpolab::save_jsonl(mixed, args.out);
  std::cout << "mixed " << mixed.size() << " records -> " << args.out << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"grpolab: group-relative policy optimization on a toy reasoning policy"};
  app.require_subcommand(1);

  TrainArgs train_args;
  auto* train = app.add_subcommand("train", "Run GRPO training");
  train->add_option("--preset", train_args.preset, "exp1|exp2|exp3 or exp1-toy|exp2-toy|exp3-toy");
  train->add_option("--config", train_args.config_file, "flat key = value config file");
  train->add_option("--set", train_args.overrides, "override a config key (key=value)");
  train->add_option("--dataset", train_args.dataset, "JSONL path or synthetic:<difficulty>:<count>[:<seed>]");
  train->add_option("--checkpoint-dir", train_args.checkpoint_dir, "output directory");
  train->add_option("--seed", train_args.seed, "run seed");
  train->add_option("--max-steps", train_args.max_steps, "cap on optimizer steps");
  train->add_option("--answer-mode", train_args.answer_mode, "accuracy|cosine");

  EvalArgs eval_args;
  auto* eval = app.add_subcommand("eval", "Zero-shot pass@1 evaluation");
  eval->add_option("--checkpoint", eval_args.checkpoint, "policy checkpoint")->required();
  eval->add_option("--benchmark", eval_args.benchmark, "JSONL path or synthetic:...")->required();
  eval->add_option("--out", eval_args.out, "report path (JSON)");
  eval->add_option("--name", eval_args.name, "benchmark name for the report");
  eval->add_option("--prompt-prefix", eval_args.prompt_prefix, "optional instruction prefix");
  eval->add_option("--temperature", eval_args.temperature, "sampling temperature");
  eval->add_option("--max-completion-length", eval_args.max_completion_length, "generation budget");
  eval->add_option("--max-prompt-length", eval_args.max_prompt_length, "prompt budget");
  eval->add_option("--seed", eval_args.seed, "sampling seed");

  VerifyArgs verify_args;
  auto* verify = app.add_subcommand("verify", "Grade {id, prediction, gold} records");
  verify->add_option("--in", verify_args.in, "input JSONL")->required();
  verify->add_option("--out", verify_args.out, "output JSONL")->required();

  ReportArgs report_args;
  auto* report = app.add_subcommand("report", "Summarize a metrics log");
  report->add_option("--log", report_args.log, "metrics JSONL from train")->required();
  report->add_option("--csv", report_args.csv, "CSV export path");

  CurateArgs curate_args;
  auto* curate = app.add_subcommand("curate", "Run the dataset curation pipeline");
  curate->add_option("--in", curate_args.in, "input JSONL")->required();
  curate->add_option("--out", curate_args.out, "curated JSONL")->required();
  curate->add_option("--audit", curate_args.audit, "also write kept+dropped with traces");
  curate->add_option("--stages", curate_args.stages, "comma list of boxed,difficulty,noise");
  curate->add_option("--drop-above", curate_args.drop_above, "difficulty drop threshold");
  curate->add_option("--scorer", curate_args.scorer, "heuristic|policy");
  curate->add_option("--checkpoint", curate_args.checkpoint, "checkpoint for --scorer policy");
  curate->add_option("--scorer-samples", curate_args.scorer_samples, "attempts per record");
  curate->add_option("--temperature", curate_args.temperature, "scorer sampling temperature");
  curate->add_option("--max-completion-length", curate_args.max_completion_length,
                     "scorer generation budget");
  curate->add_option("--seed", curate_args.seed, "scorer seed");

  MixArgs mix_args;
  auto* mix = app.add_subcommand("mix", "Sample and shuffle from three pools");
  mix->add_option("--s1", mix_args.s1, "open-s1 style pool")->required();
  mix->add_option("--deepscaler", mix_args.deepscaler, "open-deepscaler style pool")->required();
  mix->add_option("--easy", mix_args.easy, "easy pool")->required();
  mix->add_option("--counts", mix_args.counts, "n1,n2,n3");
  mix->add_option("--seed", mix_args.seed, "shuffle seed");
  mix->add_option("--out", mix_args.out, "output JSONL")->required();

  try {
    app.parse(argc, argv);
    if (train->parsed()) return cmd_train(train_args);
    if (eval->parsed()) return cmd_eval(eval_args);
    if (verify->parsed()) return cmd_verify(verify_args);
    if (report->parsed()) return cmd_report(report_args);
    if (curate->parsed()) return cmd_curate(curate_args);
    if (mix->parsed()) return cmd_mix(mix_args);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  } catch (const grpolab::NumericalError& e) {
    std::cerr << "numerical abort: " << e.what() << "\n";
    return 3;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 2;
  } catch (const std::invalid_argument& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
