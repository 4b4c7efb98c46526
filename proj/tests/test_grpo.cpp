#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "grpolab/checkpoint.hpp"
#include "grpolab/grpo.hpp"
#include "grpolab/tasks.hpp"
#include "grpolab/util.hpp"
#include "test_helpers.hpp"

using namespace grpolab;

namespace {

const PolicyConfig kTiny{4, 4, 8};

Hyperparams toy_hyper() {
  Hyperparams h;
  h.group_size = 3;
  h.max_completion_length = 8;
  h.max_prompt_length = 32;
  h.learning_rate = 0.05;
  h.temperature = 0.8;
  h.max_steps = 10;
  h.tasks_per_step = 2;
  return h;
}

// A group sampled from one net, with old/ref drawn from other nets so the
// ratios and KL terms are non-trivial.
Group random_group(const Vocabulary& vocab, std::uint64_t seed, int g, double kl_beta_unused,
                   const Hyperparams& hyper, PolicyParams* out_cur = nullptr) {
  (void)kl_beta_unused;
  const PolicyParams sampler = PolicyParams::random_init(vocab, kTiny, seed, 0.3);
  const PolicyParams old_net = PolicyParams::random_init(vocab, kTiny, seed + 1000, 0.3);
  const PolicyParams ref_net = PolicyParams::random_init(vocab, kTiny, seed + 2000, 0.3);
  const PolicyParams cur_net = PolicyParams::random_init(vocab, kTiny, seed + 3000, 0.3);
  const TaskInstance task = generate_arithmetic_task(vocab, seed, Difficulty::easy);

  Group group;
  group.prompt = task.prompt;
  group.temperature = hyper.temperature;
  Rng rng(seed);
  std::vector<double> rewards;
  for (int i = 0; i < g; ++i) {
    Completion c = sample_completion(sampler, task.prompt, hyper.max_completion_length,
                                     hyper.temperature, derive_seed(seed, i));
    group.old_logprobs.push_back(
        sequence_logprob(old_net, task.prompt, c, hyper.temperature).per_token);
    group.ref_logprobs.push_back(
        sequence_logprob(ref_net, task.prompt, c, hyper.temperature).per_token);
    group.completions.push_back(std::move(c));
    rewards.push_back(rng.uniform() < 0.5 ? 0.0 : 3.0 * rng.uniform());
  }
  group.rewards = rewards;
  group.advantages = compute_advantages(rewards, hyper.std_floor);
  if (out_cur) *out_cur = cur_net;
  return group;
}

double l2(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

}  // namespace

TEST_CASE("compute_advantages spec examples") {
  SUBCASE("constant group maps to all zeros") {
    const auto a = compute_advantages(std::vector<double>{1, 1, 1, 1, 1, 1}, 1e-8);
    CHECK(std::all_of(a.begin(), a.end(), [](double x) { return x == 0.0; }));
  }
  SUBCASE("two-element group under sample std") {
    const auto a = compute_advantages(std::vector<double>{1, 0}, 1e-8);
    CHECK(a[0] == doctest::Approx(0.70710678118654746).epsilon(1e-12));
    CHECK(a[1] == doctest::Approx(-0.70710678118654746).epsilon(1e-12));
  }
  SUBCASE("single high reward yields the unique positive advantage") {
    const auto a = compute_advantages(std::vector<double>{3, 1, 1, 1, 1, 1}, 1e-8);
    CHECK(a[0] == doctest::Approx(2.0412414523193148).epsilon(1e-10));
    for (int i = 1; i < 6; ++i) {
      CHECK(a[i] == doctest::Approx(-0.40824829046386296).epsilon(1e-10));
      CHECK(a[i] < 0.0);
    }
    CHECK(std::abs(std::accumulate(a.begin(), a.end(), 0.0)) < 1e-10);
  }
  SUBCASE("group of one is rejected") {
    CHECK_THROWS_AS((void)compute_advantages(std::vector<double>{1.0}, 1e-8),
                    std::invalid_argument);
  }
  SUBCASE("non-finite rewards are rejected") {
    CHECK_THROWS_AS((void)compute_advantages(std::vector<double>{1.0, HUGE_VAL}, 1e-8),
                    std::invalid_argument);
  }
}

TEST_CASE("advantage normalization and affine invariance") {
  Rng rng(808);
  for (int it = 0; it < 500; ++it) {
    const int g = static_cast<int>(rng.uniform_int(2, 16));
    std::vector<double> rewards(g);
    for (double& r : rewards) r = 4.0 * rng.uniform() - 2.0;
    rewards[0] += 1.0;  // ensure spread
    const auto a = compute_advantages(rewards, 1e-8);

    const double mean = std::accumulate(a.begin(), a.end(), 0.0) / g;
    double ss = 0.0;
    for (double x : a) ss += (x - mean) * (x - mean);
    CHECK(std::abs(mean) <= 1e-10);
    CHECK(std::abs(std::sqrt(ss / (g - 1)) - 1.0) <= 1e-8);

    const double scale = 0.1 + 5.0 * rng.uniform();
    const double shift = 10.0 * rng.uniform() - 5.0;
    std::vector<double> mapped(rewards);
    for (double& r : mapped) r = scale * r + shift;
    const auto b = compute_advantages(mapped, 1e-8);
    for (int i = 0; i < g; ++i) CHECK(a[i] == doctest::Approx(b[i]).epsilon(1e-9));
  }
}

TEST_CASE("kl_value") {
  CHECK(kl_value(-1.5, -1.5) == 0.0);
  CHECK(kl_value(-1.0 + std::log(2.0), -1.0) ==
        doctest::Approx(2.0 - std::log(2.0) - 1.0).epsilon(1e-10));  // 0.30685...
  CHECK(kl_value(-1.0 - std::log(2.0), -1.0) ==
        doctest::Approx(0.5 + std::log(2.0) - 1.0).epsilon(1e-10));  // 0.19314...

  Rng rng(99);
  for (int i = 0; i < 10000; ++i) {
    const double ref = -6.0 * rng.uniform();
    const double cur = -6.0 * rng.uniform();
    const double kl = kl_value(ref, cur);
    CHECK(kl >= 0.0);
    if (ref != cur) CHECK(kl > 0.0);
  }
  CHECK_THROWS_AS((void)kl_value(HUGE_VAL, 0.0), std::invalid_argument);
}

TEST_CASE("surrogate_objective") {
  const Vocabulary vocab = Vocabulary::arithmetic();
  Hyperparams hyper = toy_hyper();

  SUBCASE("cur = old with equal lengths gives 0; KL term exactly 0 when ref = cur") {
    const PolicyParams net = PolicyParams::random_init(vocab, kTiny, 5, 0.3);
    const TaskInstance task = generate_arithmetic_task(vocab, 5, Difficulty::easy);
    Group group;
    group.prompt = task.prompt;
    group.temperature = hyper.temperature;
    for (int i = 0; i < 4; ++i) {
      Completion c;
      c.token_ids = vocab.encode("1+2=");  // equal lengths across the group
      c.per_token_logprob.assign(4, 0.0);
      const auto score = sequence_logprob(net, task.prompt, c, hyper.temperature);
      c.per_token_logprob = score.per_token;
      group.old_logprobs.push_back(score.per_token);
      group.ref_logprobs.push_back(score.per_token);
      group.completions.push_back(std::move(c));
    }
    group.rewards = {2.0, 0.0, 1.0, 0.5};
    group.advantages = compute_advantages(group.rewards, hyper.std_floor);

    hyper.kl_beta = 0.0;
    CHECK(std::abs(surrogate_objective(group, net, hyper)) < 1e-9);
    hyper.kl_beta = 0.7;
    const ObjectiveParts parts = surrogate_parts(group, net, hyper);
    CHECK(parts.kl_term == 0.0);
    CHECK(std::abs(parts.value(hyper.kl_beta)) < 1e-9);
  }

  SUBCASE("token-weighted mean advantage when ratios are all 1") {
    PolicyParams cur;
    Group group = random_group(vocab, 17, 3, 0.0, hyper, &cur);
    // Rewrite old = cur so every ratio is exactly one.
    for (std::size_t i = 0; i < group.size(); ++i)
      group.old_logprobs[i] =
          sequence_logprob(cur, group.prompt, group.completions[i], hyper.temperature).per_token;
    hyper.kl_beta = 0.0;
    double weighted = 0.0;
    std::size_t tokens = 0;
    for (std::size_t i = 0; i < group.size(); ++i) {
      weighted += group.advantages[i] * group.completions[i].length();
      tokens += group.completions[i].token_ids.size();
    }
    CHECK(surrogate_objective(group, cur, hyper) ==
          doctest::Approx(weighted / double(tokens)).epsilon(1e-9));
  }

  SUBCASE("clip binds: single completion, A=+1, ratio 1.5, eps 0.2 gives 1.2") {
    const PolicyParams net = PolicyParams::random_init(vocab, kTiny, 23, 0.3);
    const TaskInstance task = generate_arithmetic_task(vocab, 23, Difficulty::easy);
    Completion c = sample_completion(net, task.prompt, 1, hyper.temperature, 7);
    const auto score = sequence_logprob(net, task.prompt, c, hyper.temperature);
    Group group;
    group.prompt = task.prompt;
    group.temperature = hyper.temperature;
    group.completions.push_back(c);
    group.old_logprobs.push_back({score.per_token[0] - std::log(1.5)});
    group.ref_logprobs.push_back(score.per_token);
    group.completions.push_back(Completion{});
    group.old_logprobs.push_back({});
    group.ref_logprobs.push_back({});
    group.rewards = {1.0, 0.0};
    group.advantages = {1.0, 0.0};
    hyper.kl_beta = 0.0;
    hyper.clip_eps = 0.2;
    CHECK(surrogate_objective(group, net, hyper) == doctest::Approx(1.2).epsilon(1e-9));
  }

  SUBCASE("per-token terms never exceed either branch") {
    for (std::uint64_t s = 0; s < 30; ++s) {
      PolicyParams cur;
      const Group group = random_group(vocab, 300 + s, 4, 0.0, hyper, &cur);
      const auto terms = surrogate_token_terms(group, cur, hyper);
      for (std::size_t i = 0; i < terms.size(); ++i) {
        const double adv = group.advantages[i];
        for (const TokenTerm& t : terms[i]) {
          CHECK(t.term <= t.ratio * adv + 1e-12);
          CHECK(t.term <=
                std::clamp(t.ratio, 1.0 - hyper.clip_eps, 1.0 + hyper.clip_eps) * adv + 1e-12);
          CHECK(t.kl >= 0.0);
        }
      }
    }
  }

  SUBCASE("misaligned logprob lists are rejected") {
    PolicyParams cur;
    Group group = random_group(vocab, 55, 3, 0.0, hyper, &cur);
    group.old_logprobs[0].pop_back();
    CHECK_THROWS_AS((void)surrogate_objective(group, cur, hyper), std::invalid_argument);
  }
}

TEST_CASE("objective_gradient matches finite differences") {
  const Vocabulary vocab = Vocabulary::arithmetic();
  Hyperparams hyper = toy_hyper();
  hyper.kl_beta = 0.04;
  Rng rng(4242);
  for (std::uint64_t s = 0; s < 20; ++s) {
    PolicyParams cur;
    const Group group = random_group(vocab, 900 + s, 3, hyper.kl_beta, hyper, &cur);
    const auto grad = objective_gradient(group, cur, hyper);
    const auto coords = testing::sample_coords(rng, 20, cur.param_count());
    const double err = testing::gradient_check(
        cur, grad, coords, 1e-5,
        [&](const PolicyParams& q) { return surrogate_objective(group, q, hyper); });
    CHECK(err < 1e-4);
  }
}

TEST_CASE("objective_gradient corner cases") {
  const Vocabulary vocab = Vocabulary::arithmetic();
  Hyperparams hyper = toy_hyper();

  SUBCASE("all advantages zero with beta 0 gives the zero gradient") {
    PolicyParams cur;
    Group group = random_group(vocab, 71, 3, 0.0, hyper, &cur);
    std::fill(group.advantages.begin(), group.advantages.end(), 0.0);
    hyper.kl_beta = 0.0;
    const auto grad = objective_gradient(group, cur, hyper);
    CHECK(l2(grad) == 0.0);
  }

  SUBCASE("clipped-out token contributes zero policy gradient") {
    // A > 0 with the ratio held above 1 + eps: the min picks the constant
    // clipped branch, so the whole gradient vanishes when beta = 0.
    hyper.kl_beta = 0.0;
    for (std::uint64_t s = 0; s < 10; ++s) {
      const PolicyParams net = PolicyParams::random_init(vocab, kTiny, 600 + s, 0.3);
      const TaskInstance task = generate_arithmetic_task(vocab, s, Difficulty::easy);
      Completion c = sample_completion(net, task.prompt, 1, hyper.temperature, s);
      const auto score = sequence_logprob(net, task.prompt, c, hyper.temperature);
      Group group;
      group.prompt = task.prompt;
      group.temperature = hyper.temperature;
      group.completions.push_back(c);
      group.old_logprobs.push_back({score.per_token[0] - std::log(2.0)});  // ratio 2 > 1.2
      group.ref_logprobs.push_back(score.per_token);
      group.completions.push_back(Completion{});
      group.old_logprobs.push_back({});
      group.ref_logprobs.push_back({});
      group.rewards = {1.0, 0.0};
      group.advantages = {1.0, -1.0};
      CHECK(l2(objective_gradient(group, net, hyper)) == 0.0);
    }
  }
}

TEST_CASE("lr_at") {
  Hyperparams hyper;
  hyper.learning_rate = 2.0;
  hyper.max_steps = 500;
  hyper.warmup_ratio = 0.1;
  hyper.min_lr_rate = 0.1;

  CHECK(lr_at(0, hyper) == 0.0);
  CHECK(lr_at(50, hyper) == 2.0);  // warmup end hits the peak exactly
  CHECK(lr_at(500, hyper) == doctest::Approx(0.2).epsilon(1e-12));
  CHECK(lr_at(25, hyper) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK_THROWS_AS((void)lr_at(-1, hyper), std::invalid_argument);
  CHECK_THROWS_AS((void)lr_at(501, hyper), std::invalid_argument);

  SUBCASE("monotone decay after warmup") {
    for (int s = 51; s <= 500; ++s) CHECK(lr_at(s, hyper) <= lr_at(s - 1, hyper) + 1e-15);
  }
  SUBCASE("no warmup when the ratio is zero") {
    hyper.warmup_ratio = 0.0;
    CHECK(lr_at(0, hyper) == 2.0);
    CHECK(lr_at(500, hyper) == doctest::Approx(0.2));
  }
}

TEST_CASE("train_step") {
  const Vocabulary vocab = Vocabulary::arithmetic();
  Hyperparams hyper = toy_hyper();
  RewardConfig rc;
  rc.max_len = hyper.max_completion_length;
  const PolicyParams init = PolicyParams::random_init(vocab, kTiny, 1, 0.3);
  std::vector<TaskInstance> tasks;
  for (std::uint64_t s = 0; s < 4; ++s)
    tasks.push_back(generate_arithmetic_task(vocab, s, Difficulty::easy));

  SUBCASE("deterministic metrics and params for a fixed seed") {
    const TrainStepResult a = train_step(init, init, 0, tasks, vocab, hyper, rc, 11);
    const TrainStepResult b = train_step(init, init, 0, tasks, vocab, hyper, rc, 11);
    CHECK(a.params.weights == b.params.weights);
    CHECK(a.metrics.mean_reward == b.metrics.mean_reward);
    CHECK(a.metrics.grad_norm == b.metrics.grad_norm);
    CHECK(a.metrics.mean_kl >= -1e-9);
  }
  SUBCASE("empty batch is rejected") {
    CHECK_THROWS_AS((void)train_step(init, init, 0, {}, vocab, hyper, rc, 1),
                    std::invalid_argument);
  }
  SUBCASE("equal rewards everywhere with beta 0 leave the parameters unchanged") {
    // An untrained net on hard tasks never earns a reward, so every group
    // is constant-zero and the advantages vanish.
    Hyperparams h = hyper;
    h.kl_beta = 0.0;
    h.max_completion_length = 4;
    RewardConfig rc2 = rc;
    rc2.max_len = 4;
    const TrainStepResult r = train_step(init, init, 1, tasks, vocab, h, rc2, 3);
    CHECK(r.metrics.mean_reward == 0.0);
    CHECK(r.params.weights == init.weights);
  }
  SUBCASE("reference snapshot stays bit-identical through trainer steps") {
    Trainer trainer(vocab, hyper, rc, init);
    const std::filesystem::path ref0 = std::filesystem::temp_directory_path() / "ref0.bin";
    const std::filesystem::path refN = std::filesystem::temp_directory_path() / "refN.bin";
    save_checkpoint(vocab, trainer.ref_params(), ref0);
    for (int s = 0; s < 3; ++s) trainer.step(tasks, 100 + s);
    save_checkpoint(vocab, trainer.ref_params(), refN);
    std::ifstream a(ref0, std::ios::binary), b(refN, std::ios::binary);
    const std::string bytes_a((std::istreambuf_iterator<char>(a)), {});
    const std::string bytes_b((std::istreambuf_iterator<char>(b)), {});
    CHECK(bytes_a == bytes_b);
    CHECK(trainer.step_index() == 3);
  }
  SUBCASE("adam trainer is deterministic too") {
    Hyperparams h = hyper;
    h.optimizer = OptimizerKind::adam;
    Trainer t1(vocab, h, rc, init);
    Trainer t2(vocab, h, rc, init);
    for (int s = 0; s < 3; ++s) {
      t1.step(tasks, 500 + s);
      t2.step(tasks, 500 + s);
    }
    CHECK(t1.params().weights == t2.params().weights);
  }
}

TEST_CASE("hyperparameter validation") {
  Hyperparams h;
  h.validate();
  Hyperparams bad = h;
  bad.group_size = 1;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  bad = h;
  bad.clip_eps = 1.0;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  bad = h;
  bad.learning_rate = 0.0;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  bad = h;
  bad.std_floor = 0.0;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
}
