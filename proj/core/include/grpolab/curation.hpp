#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "grpolab/policy.hpp"
#include "grpolab/vocab.hpp"

namespace grpolab {

enum class Source { s1, deepscaler, synthetic };

Source source_from_string(std::string_view s);
std::string to_string(Source s);

struct TraceEntry {
  std::string stage;
  bool kept = true;
  std::string reason;

  friend bool operator==(const TraceEntry&, const TraceEntry&) = default;
};

struct ProblemRecord {
  std::string id;
  std::string question;
  std::string solution;
  std::optional<std::string> gold_answer;
  Source source = Source::synthetic;
  std::optional<double> difficulty_score;
  std::vector<TraceEntry> filter_trace;

  friend bool operator==(const ProblemRecord&, const ProblemRecord&) = default;
};

/// Estimated probability that a reference solver answers the record
/// correctly, in [0, 1]. Deterministic for a fixed record and scorer state.
/// Implementations may throw; the difficulty filter keeps such records.
class Scorer {
 public:
  virtual ~Scorer() = default;
  virtual double score(const ProblemRecord& record) const = 0;
};

/// Length proxy: short questions are presumed easy. score = 1 - min(1,
/// question_length / 64). A stand-in for model-based judging.
class HeuristicScorer : public Scorer {
 public:
  double score(const ProblemRecord& record) const override;
};

/// Pass rate of a trained toy policy over k sampled attempts per record.
class PolicyPassRateScorer : public Scorer {
 public:
  PolicyPassRateScorer(Vocabulary vocab, PolicyParams params, int samples,
                       double temperature, int max_completion_length, std::uint64_t seed);
  double score(const ProblemRecord& record) const override;

 private:
  Vocabulary vocab_;
  PolicyParams params_;
  int samples_;
  double temperature_;
  int max_completion_length_;
  std::uint64_t seed_;
};

enum class NoiseVerdict { clean, noisy, multipart };
using NoiseJudge = std::function<NoiseVerdict(const ProblemRecord&)>;

/// Default deterministic judge: more than one question mark -> multipart;
/// unbalanced braces in the solution or an empty question -> noisy.
NoiseVerdict default_noise_judge(const ProblemRecord& record);

struct FilterResult {
  std::vector<ProblemRecord> kept;
  std::vector<ProblemRecord> dropped;
};

/// Keeps records whose solution carries an extractable boxed answer.
FilterResult filter_boxed(std::vector<ProblemRecord> records);

/// Drops records scored above drop_above (too easy). Every seen record
/// gets its difficulty_score recorded; scorer failures keep the record.
FilterResult filter_difficulty(std::vector<ProblemRecord> records, const Scorer& scorer,
                               double drop_above);

FilterResult filter_noise(std::vector<ProblemRecord> records,
                          const NoiseJudge& judge = default_noise_judge);

struct StageCount {
  std::string stage;
  std::size_t in = 0;
  std::size_t out = 0;
};

struct PipelineResult {
  std::vector<ProblemRecord> kept;
  std::vector<ProblemRecord> dropped;  // with traces up to the dropping stage
  std::vector<StageCount> counts;
};

/// Runs the named stages ("boxed", "difficulty", "noise") in the given
/// order. Unknown stage names are rejected.
PipelineResult run_curation_pipeline(std::vector<ProblemRecord> records,
                                     const std::vector<std::string>& stages,
                                     const Scorer& scorer, double drop_above,
                                     const NoiseJudge& judge = default_noise_judge);

/// Uniform sample without replacement of (n1, n2, n3) records from the
/// three pools, concatenated and shuffled deterministically by seed.
std::vector<ProblemRecord> mix_datasets(const std::vector<ProblemRecord>& open_s1,
                                        const std::vector<ProblemRecord>& open_deepscaler,
                                        const std::vector<ProblemRecord>& easy_pool,
                                        std::size_t n1, std::size_t n2, std::size_t n3,
                                        std::uint64_t seed);

/// JSONL schema: {"id", "question", "solution", "answer": str|null,
/// "source"}; difficulty_score and filter_trace round-trip when present.
std::vector<ProblemRecord> load_jsonl(const std::filesystem::path& path);
void save_jsonl(const std::vector<ProblemRecord>& records, const std::filesystem::path& path);

}  // namespace grpolab
