#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "grpolab/policy.hpp"
#include "grpolab/tasks.hpp"
#include "grpolab/util.hpp"
#include "grpolab/vocab.hpp"
#include "test_helpers.hpp"

using namespace grpolab;

namespace {

const PolicyConfig kTiny{4, 4, 8};  // 396 params with the arithmetic vocabulary

std::vector<double> softmax(const std::vector<double>& logits, double temperature) {
  double m = -HUGE_VAL;
  for (double z : logits) m = std::max(m, z / temperature);
  std::vector<double> p(logits.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) sum += p[i] = std::exp(logits[i] / temperature - m);
  for (double& x : p) x /= sum;
  return p;
}

}  // namespace

TEST_CASE("vocabulary basics") {
  const Vocabulary v = Vocabulary::arithmetic();
  CHECK(v.size() == 20);
  CHECK(v.token(v.eos_id()) == "<eos>");
  CHECK(v.token(v.pad_id()) == "<pad>");

  SUBCASE("reserved markers encode as single tokens") {
    const auto ids = v.encode("<think>3+4=</think>\\boxed{7}");
    CHECK(ids.size() == 9);
    CHECK(ids.front() == v.id_of("<think>"));
    CHECK(v.decode(ids) == "<think>3+4=</think>\\boxed{7}");
  }
  SUBCASE("unknown characters are rejected") {
    CHECK_THROWS_AS((void)v.encode("3+x="), DataError);
  }
  SUBCASE("decode hides pad and eos") {
    const std::vector<int> ids{v.id_of("7"), v.pad_id(), v.eos_id()};
    CHECK(v.decode(ids) == "7");
    CHECK(v.decode(ids, /*skip_structural=*/false) == "7<eos>");
  }
  SUBCASE("duplicate or missing required tokens are rejected") {
    CHECK_THROWS_AS((void)Vocabulary::from_tokens({"a", "a", "<eos>", "<pad>"}), DataError);
    CHECK_THROWS_AS((void)Vocabulary::from_tokens({"a", "b", "<pad>"}), DataError);
  }
  SUBCASE("ascii vocabulary covers plain text") {
    const Vocabulary full = Vocabulary::ascii_full();
    CHECK(full.can_encode("Reply in English only, do not use other languages"));
    const auto ids = full.encode("ab }c");
    CHECK(v.size() < full.size());
    CHECK(full.decode(ids) == "ab }c");
  }
}

TEST_CASE("forward_logits") {
  const Vocabulary v = Vocabulary::arithmetic();

  SUBCASE("all-zero weights give uniform logits") {
    const PolicyParams p = PolicyParams::zeros(v, kTiny);
    const auto logits = forward_logits(p, v.encode("3+4="));
    for (double z : logits) CHECK(z == logits[0]);
  }
  SUBCASE("deterministic for identical contexts") {
    const PolicyParams p = PolicyParams::random_init(v, kTiny, 7);
    const auto a = forward_logits(p, v.encode("3+4="));
    const auto b = forward_logits(p, v.encode("3+4="));
    CHECK(a == b);
  }
  SUBCASE("softmax over logits sums to 1 for 100 random draws") {
    for (std::uint64_t s = 0; s < 100; ++s) {
      const PolicyParams p = PolicyParams::random_init(v, kTiny, s, 0.5);
      const auto logits = forward_logits(p, v.encode("9*2="));
      const auto probs = softmax(logits, 0.7);
      const double total = std::accumulate(probs.begin(), probs.end(), 0.0);
      CHECK(std::abs(total - 1.0) < 1e-9);
    }
  }
  SUBCASE("out-of-vocabulary id is rejected") {
    const PolicyParams p = PolicyParams::zeros(v, kTiny);
    CHECK_THROWS_AS((void)forward_logits(p, std::vector<int>{v.size()}), std::invalid_argument);
  }
  SUBCASE("empty and overlong contexts are padded/windowed") {
    const PolicyParams p = PolicyParams::random_init(v, kTiny, 3);
    CHECK(forward_logits(p, std::vector<int>{}).size() == std::size_t(v.size()));
    const auto long_ctx = v.encode("1+2=3+4=5+6=");
    const auto tail_ctx = std::vector<int>(long_ctx.end() - kTiny.context_window, long_ctx.end());
    CHECK(forward_logits(p, long_ctx) == forward_logits(p, tail_ctx));
  }
  SUBCASE("parameter partitions add up") {
    const PolicyParams p = PolicyParams::zeros(v, kTiny);
    CHECK(p.param_count() == p.embedding_size() + p.hidden_size() + p.output_size());
    CHECK(p.weights.size() == p.param_count());
    CHECK(p.param_count() < 2000);
  }
}

TEST_CASE("sample_completion") {
  const Vocabulary v = Vocabulary::arithmetic();
  const PolicyParams p = PolicyParams::random_init(v, kTiny, 11);
  const Prompt prompt = make_prompt(v, "3+4=", 32);

  SUBCASE("same seed reproduces the identical completion") {
    const Completion a = sample_completion(p, prompt, 16, 0.7, 99);
    const Completion b = sample_completion(p, prompt, 16, 0.7, 99);
    CHECK(a.token_ids == b.token_ids);
    CHECK(a.per_token_logprob == b.per_token_logprob);
    CHECK(a.terminated_by_eos == b.terminated_by_eos);
  }
  SUBCASE("max_len 1 gives length exactly 1") {
    const Completion c = sample_completion(p, prompt, 1, 0.7, 5);
    CHECK(c.length() == 1);
  }
  SUBCASE("stops at eos and keeps it in the sequence") {
    for (std::uint64_t s = 0; s < 50; ++s) {
      const Completion c = sample_completion(p, prompt, 64, 1.0, s);
      CHECK(c.length() <= 64);
      if (c.terminated_by_eos) CHECK(c.token_ids.back() == v.eos_id());
      for (double lp : c.per_token_logprob) CHECK(lp <= 0.0);
    }
  }
  SUBCASE("non-positive temperature is rejected") {
    CHECK_THROWS_AS((void)sample_completion(p, prompt, 4, 0.0, 1), std::invalid_argument);
    CHECK_THROWS_AS((void)sample_completion(p, prompt, 0, 0.7, 1), std::invalid_argument);
  }
  SUBCASE("single-token frequencies match softmax(logits/T) within 3 standard errors") {
    const double temperature = 0.7;
    const auto probs = softmax(forward_logits(p, prompt.token_ids), temperature);
    std::vector<int> counts(v.size(), 0);
    const int n = 10000;
    for (int i = 0; i < n; ++i)
      ++counts[sample_completion(p, prompt, 1, temperature, 1000 + i).token_ids[0]];
    for (int t = 0; t < v.size(); ++t) {
      const double expect = probs[t] * n;
      const double se = std::sqrt(probs[t] * (1.0 - probs[t]) * n);
      CHECK(std::abs(counts[t] - expect) <= 3.0 * se + 1e-9);
    }
  }
}

TEST_CASE("sequence_logprob") {
  const Vocabulary v = Vocabulary::arithmetic();
  const PolicyParams p = PolicyParams::random_init(v, kTiny, 21);
  const Prompt prompt = make_prompt(v, "8+1=", 32);

  SUBCASE("re-scoring under the generating params matches stored logprobs") {
    const Completion c = sample_completion(p, prompt, 24, 0.7, 123);
    const SequenceScore s = sequence_logprob(p, prompt, c, 0.7);
    REQUIRE(s.per_token.size() == c.per_token_logprob.size());
    for (std::size_t i = 0; i < s.per_token.size(); ++i)
      CHECK(std::abs(s.per_token[i] - c.per_token_logprob[i]) < 1e-9);
    CHECK(std::abs(s.total - std::accumulate(s.per_token.begin(), s.per_token.end(), 0.0)) <
          1e-12);
  }
  SUBCASE("uniform policy gives -L log V") {
    const PolicyParams uniform = PolicyParams::zeros(v, kTiny);
    Completion c;
    c.token_ids = v.encode("12+3=");
    c.per_token_logprob.assign(c.token_ids.size(), 0.0);
    const SequenceScore s = sequence_logprob(uniform, prompt, c, 0.7);
    const double expect = -double(c.token_ids.size()) * std::log(double(v.size()));
    CHECK(std::abs(s.total - expect) < 1e-9);
  }
  SUBCASE("two parameter draws differ by the per-token logit gaps") {
    const PolicyParams q = PolicyParams::random_init(v, kTiny, 22);
    const Completion c = sample_completion(p, prompt, 12, 0.7, 4);
    const double temperature = 0.9;
    double expect_gap = 0.0;
    for (std::size_t t = 0; t < c.token_ids.size(); ++t) {
      std::vector<int> ctx = prompt.token_ids;
      ctx.insert(ctx.end(), c.token_ids.begin(), c.token_ids.begin() + t);
      const auto lp = [&](const PolicyParams& params) {
        const auto probs = softmax(forward_logits(params, ctx), temperature);
        return std::log(probs[c.token_ids[t]]);
      };
      expect_gap += lp(p) - lp(q);
    }
    const double got_gap =
        sequence_logprob(p, prompt, c, temperature).total -
        sequence_logprob(q, prompt, c, temperature).total;
    CHECK(std::abs(got_gap - expect_gap) < 1e-9);
  }
}

TEST_CASE("logprob_gradient") {
  const Vocabulary v = Vocabulary::arithmetic();
  const Prompt prompt = make_prompt(v, "5+6=", 32);

  SUBCASE("matches central finite differences on random instances") {
    Rng rng(31);
    for (std::uint64_t s = 0; s < 10; ++s) {
      const PolicyParams p = PolicyParams::random_init(v, kTiny, 100 + s, 0.3);
      const Completion c = sample_completion(p, prompt, 10, 0.8, s);
      const auto grad = logprob_gradient(p, prompt, c, 0.8);
      const auto coords = testing::sample_coords(rng, 20, p.param_count());
      const double err = testing::gradient_check(
          p, grad, coords, 1e-5,
          [&](const PolicyParams& q) { return sequence_logprob(q, prompt, c, 0.8).total; });
      CHECK(err < 1e-4);
    }
  }
  SUBCASE("length-0 completion gives the zero vector") {
    const PolicyParams p = PolicyParams::random_init(v, kTiny, 40);
    const auto grad = logprob_gradient(p, prompt, Completion{}, 0.7);
    CHECK(std::all_of(grad.begin(), grad.end(), [](double g) { return g == 0.0; }));
  }
  SUBCASE("score-function identity: sampled gradients average to zero") {
    const PolicyParams p = PolicyParams::random_init(v, kTiny, 50, 0.1);
    std::vector<double> mean(p.param_count(), 0.0);
    const int n = 10000;
    for (int i = 0; i < n; ++i) {
      const Completion c = sample_completion(p, prompt, 6, 1.0, 7000 + i);
      const auto g = logprob_gradient(p, prompt, c, 1.0);
      for (std::size_t k = 0; k < mean.size(); ++k) mean[k] += g[k] / n;
    }
    double norm = 0.0;
    for (double m : mean) norm += m * m;
    // Monte Carlo error scales as 1/sqrt(n); the norm over ~400 coordinates
    // stays well under 0.05 for a centered estimator.
    CHECK(std::sqrt(norm) < 0.05);
  }
}

TEST_CASE("generate_arithmetic_task") {
  const Vocabulary v = Vocabulary::arithmetic();

  SUBCASE("easy/medium render a+b= with the exact sum") {
    for (std::uint64_t s = 0; s < 200; ++s) {
      for (Difficulty d : {Difficulty::easy, Difficulty::medium}) {
        const TaskInstance t = generate_arithmetic_task(v, s, d);
        const std::size_t plus = t.prompt.text.find('+');
        REQUIRE(plus != std::string::npos);
        REQUIRE(t.prompt.text.back() == '=');
        const long a = std::stol(t.prompt.text.substr(0, plus));
        const long b = std::stol(t.prompt.text.substr(plus + 1));
        CHECK(t.gold_answer == std::to_string(a + b));
        if (d == Difficulty::easy) CHECK((a <= 9 && b <= 9));
        else CHECK((a >= 10 && b >= 10 && a <= 99 && b <= 99));
      }
    }
  }
  SUBCASE("hard respects precedence") {
    for (std::uint64_t s = 0; s < 200; ++s) {
      const TaskInstance t = generate_arithmetic_task(v, s, Difficulty::hard);
      const std::size_t plus = t.prompt.text.find('+');
      const std::size_t star = t.prompt.text.find('*');
      REQUIRE(plus < star);
      const long a = std::stol(t.prompt.text.substr(0, plus));
      const long b = std::stol(t.prompt.text.substr(plus + 1, star - plus - 1));
      const long c = std::stol(t.prompt.text.substr(star + 1));
      CHECK(t.gold_answer == std::to_string(a + b * c));
    }
  }
  SUBCASE("same seed gives the identical instance") {
    const TaskInstance a = generate_arithmetic_task(v, 77, Difficulty::easy);
    const TaskInstance b = generate_arithmetic_task(v, 77, Difficulty::easy);
    CHECK(a.prompt.text == b.prompt.text);
    CHECK(a.gold_answer == b.gold_answer);
    CHECK(a.prompt.token_ids == b.prompt.token_ids);
  }
}
