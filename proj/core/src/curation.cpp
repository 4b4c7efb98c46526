#include "grpolab/curation.hpp"

#include <algorithm>
#include <fstream>

#include <nlohmann/json.hpp>

#include "grpolab/rewards.hpp"
#include "grpolab/util.hpp"
#include "grpolab/verifier.hpp"

namespace grpolab {

using nlohmann::json;

Source source_from_string(std::string_view s) {
  if (s == "s1") return Source::s1;
  if (s == "deepscaler") return Source::deepscaler;
  if (s == "synthetic") return Source::synthetic;
  throw DataError("unknown source tag '" + std::string(s) + "'");
}

std::string to_string(Source s) {
  switch (s) {
    case Source::s1: return "s1";
    case Source::deepscaler: return "deepscaler";
    case Source::synthetic: return "synthetic";
  }
  return "synthetic";
}

double HeuristicScorer::score(const ProblemRecord& record) const {
  const double len = static_cast<double>(record.question.size());
  return 1.0 - std::min(1.0, len / 64.0);
}

PolicyPassRateScorer::PolicyPassRateScorer(Vocabulary vocab, PolicyParams params, int samples,
                                           double temperature, int max_completion_length,
                                           std::uint64_t seed)
    : vocab_(std::move(vocab)),
      params_(std::move(params)),
      samples_(samples),
      temperature_(temperature),
      max_completion_length_(max_completion_length),
      seed_(seed) {
  if (samples_ < 1) throw std::invalid_argument("scorer needs samples >= 1");
}

double PolicyPassRateScorer::score(const ProblemRecord& record) const {
  if (!record.gold_answer) throw DataError("record '" + record.id + "' has no gold answer");
  const Prompt prompt = make_prompt(vocab_, record.question, 512);
  // Per-record stream keyed by the id, so scoring order cannot matter.
  std::uint64_t record_key = 0xcbf29ce484222325ULL;  // FNV-1a
  for (unsigned char c : record.id) record_key = (record_key ^ c) * 0x100000001b3ULL;
  int solved = 0;
  for (int k = 0; k < samples_; ++k) {
    const Completion c = sample_completion(params_, prompt, max_completion_length_,
                                           temperature_, derive_seed(seed_, record_key, k));
    if (accuracy_reward(vocab_.decode(c.token_ids), *record.gold_answer) == 1.0) ++solved;
  }
  return static_cast<double>(solved) / samples_;
}

NoiseVerdict default_noise_judge(const ProblemRecord& record) {
  if (std::count(record.question.begin(), record.question.end(), '?') > 1)
    return NoiseVerdict::multipart;
  if (record.question.empty()) return NoiseVerdict::noisy;
  long depth = 0;
  for (char c : record.solution) {
    if (c == '{') ++depth;
    else if (c == '}') --depth;
    if (depth < 0) return NoiseVerdict::noisy;
  }
  return depth == 0 ? NoiseVerdict::clean : NoiseVerdict::noisy;
}

namespace {

FilterResult split_by(std::vector<ProblemRecord> records, const std::string& stage,
                      const std::function<std::pair<bool, std::string>(ProblemRecord&)>& judge) {
  FilterResult result;
  for (ProblemRecord& r : records) {
    auto [keep, reason] = judge(r);
    r.filter_trace.push_back({stage, keep, reason});
    (keep ? result.kept : result.dropped).push_back(std::move(r));
  }
  return result;
}

}  // namespace

FilterResult filter_boxed(std::vector<ProblemRecord> records) {
  return split_by(std::move(records), "boxed", [](ProblemRecord& r) {
    const bool ok = extract_boxed(r.solution).has_value();
    return std::pair{ok, ok ? std::string("ok") : std::string("no-boxed")};
  });
}

FilterResult filter_difficulty(std::vector<ProblemRecord> records, const Scorer& scorer,
                               double drop_above) {
  if (drop_above < 0.0 || drop_above > 1.0)
    throw std::invalid_argument("drop_above must lie in [0, 1]");
  return split_by(std::move(records), "difficulty", [&](ProblemRecord& r) {
    double s = 0.0;
    try {
      s = scorer.score(r);
    } catch (const std::exception&) {
      r.difficulty_score.reset();
      return std::pair{true, std::string("score-error")};
    }
    r.difficulty_score = s;
    if (s > drop_above) return std::pair{false, std::string("trivial")};
    return std::pair{true, std::string("ok")};
  });
}

FilterResult filter_noise(std::vector<ProblemRecord> records, const NoiseJudge& judge) {
  return split_by(std::move(records), "noise", [&](ProblemRecord& r) {
    switch (judge(r)) {
      case NoiseVerdict::clean: return std::pair{true, std::string("ok")};
      case NoiseVerdict::multipart: return std::pair{false, std::string("multipart")};
      case NoiseVerdict::noisy: break;
    }
    return std::pair{false, std::string("noisy")};
  });
}

PipelineResult run_curation_pipeline(std::vector<ProblemRecord> records,
                                     const std::vector<std::string>& stages,
                                     const Scorer& scorer, double drop_above,
                                     const NoiseJudge& judge) {
  PipelineResult result;
  result.kept = std::move(records);
  for (const std::string& stage : stages) {
    const std::size_t in = result.kept.size();
    FilterResult fr;
    if (stage == "boxed") fr = filter_boxed(std::move(result.kept));
    else if (stage == "difficulty")
      fr = filter_difficulty(std::move(result.kept), scorer, drop_above);
    else if (stage == "noise") fr = filter_noise(std::move(result.kept), judge);
    else throw std::invalid_argument("unknown curation stage '" + stage + "'");
    result.kept = std::move(fr.kept);
    for (ProblemRecord& r : fr.dropped) result.dropped.push_back(std::move(r));
    result.counts.push_back({stage, in, result.kept.size()});
  }
  return result;
}

namespace {

std::vector<ProblemRecord> sample_without_replacement(const std::vector<ProblemRecord>& pool,
                                                      std::size_t n, const char* pool_name,
                                                      Rng& rng) {
  if (pool.size() < n)
    throw DataError(std::string("mix_datasets: pool '") + pool_name + "' has " +
                    std::to_string(pool.size()) + " records, need " + std::to_string(n));
  // Partial Fisher-Yates over an index vector.
  std::vector<std::size_t> idx(pool.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  std::vector<ProblemRecord> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t j =
        i + static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(idx.size() - i) - 1));
    std::swap(idx[i], idx[j]);
    out.push_back(pool[idx[i]]);
  }
  return out;
}

}  // namespace

std::vector<ProblemRecord> mix_datasets(const std::vector<ProblemRecord>& open_s1,
                                        const std::vector<ProblemRecord>& open_deepscaler,
                                        const std::vector<ProblemRecord>& easy_pool,
                                        std::size_t n1, std::size_t n2, std::size_t n3,
                                        std::uint64_t seed) {
  Rng rng(seed);
  std::vector<ProblemRecord> mixed = sample_without_replacement(open_s1, n1, "open_s1", rng);
  for (auto& r : sample_without_replacement(open_deepscaler, n2, "open_deepscaler", rng))
    mixed.push_back(std::move(r));
  for (auto& r : sample_without_replacement(easy_pool, n3, "easy_pool", rng))
    mixed.push_back(std::move(r));
  for (std::size_t i = mixed.size(); i > 1; --i) {
    const std::size_t j = static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(i) - 1));
    std::swap(mixed[i - 1], mixed[j]);
  }
  return mixed;
}

namespace {

json record_to_json(const ProblemRecord& r) {
  json j;
  j["id"] = r.id;
  j["question"] = r.question;
  j["solution"] = r.solution;
  j["answer"] = r.gold_answer ? json(*r.gold_answer) : json(nullptr);
  j["source"] = to_string(r.source);
  if (r.difficulty_score) j["difficulty_score"] = *r.difficulty_score;
  if (!r.filter_trace.empty()) {
    json trace = json::array();
    for (const TraceEntry& t : r.filter_trace)
      trace.push_back({{"stage", t.stage}, {"kept", t.kept}, {"reason", t.reason}});
    j["filter_trace"] = std::move(trace);
  }
  return j;
}

ProblemRecord record_from_json(const json& j, std::size_t line_no) {
  const auto fail = [line_no](const std::string& what) -> DataError {
    return DataError("line " + std::to_string(line_no) + ": " + what);
  };
  if (!j.is_object()) throw fail("expected a JSON object");
  ProblemRecord r;
  for (const char* key : {"id", "question", "solution"}) {
    if (!j.contains(key)) throw fail(std::string("missing required key '") + key + "'");
    if (!j.at(key).is_string()) throw fail(std::string("key '") + key + "' must be a string");
  }
  r.id = j.at("id").get<std::string>();
  r.question = j.at("question").get<std::string>();
  r.solution = j.at("solution").get<std::string>();
  if (j.contains("answer") && !j.at("answer").is_null()) {
    if (!j.at("answer").is_string()) throw fail("key 'answer' must be a string or null");
    r.gold_answer = j.at("answer").get<std::string>();
  }
  if (j.contains("source")) {
    if (!j.at("source").is_string()) throw fail("key 'source' must be a string");
    try {
      r.source = source_from_string(j.at("source").get<std::string>());
    } catch (const DataError& e) {
      throw fail(e.what());
    }
  }
  if (j.contains("difficulty_score") && !j.at("difficulty_score").is_null()) {
    if (!j.at("difficulty_score").is_number()) throw fail("key 'difficulty_score' must be a number");
    r.difficulty_score = j.at("difficulty_score").get<double>();
  }
  if (j.contains("filter_trace")) {
    if (!j.at("filter_trace").is_array()) throw fail("key 'filter_trace' must be an array");
    for (const json& t : j.at("filter_trace")) {
      if (!t.is_object() || !t.contains("stage") || !t.contains("kept") || !t.contains("reason"))
        throw fail("filter_trace entries need stage/kept/reason");
      r.filter_trace.push_back({t.at("stage").get<std::string>(), t.at("kept").get<bool>(),
                                t.at("reason").get<std::string>()});
    }
  }
  return r;
}

}  // namespace

std::vector<ProblemRecord> load_jsonl(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open '" + path.string() + "'");
  std::vector<ProblemRecord> records;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    json j = json::parse(line, nullptr, false);
    if (j.is_discarded())
      throw DataError(path.string() + ": line " + std::to_string(line_no) +
                      ": malformed JSON");
    try {
      records.push_back(record_from_json(j, line_no));
    } catch (const DataError& e) {
      throw DataError(path.string() + ": " + e.what());
    }
  }
  return records;
}

void save_jsonl(const std::vector<ProblemRecord>& records, const std::filesystem::path& path) {
  const std::filesystem::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp);
    if (!out) throw DataError("cannot write '" + tmp.string() + "'");
    for (const ProblemRecord& r : records) out << record_to_json(r).dump() << '\n';
  }
  std::filesystem::rename(tmp, path);
}

}  // namespace grpolab
