#include "grpolab/policy.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "grpolab/util.hpp"

namespace grpolab {

namespace {

void check_token_ids(std::span<const int> ids, int vocab_size, const char* what) {
  for (int id : ids) {
    if (id < 0 || id >= vocab_size)
      throw std::invalid_argument(std::string(what) + ": token id " +
                                  std::to_string(id) + " out of vocabulary");
  }
}

// Last W ids of (prompt ++ completion[0..upto)), left-padded with pad_id.
void fill_window(const PolicyParams& p, std::span<const int> prompt,
                 std::span<const int> completion, std::size_t upto,
                 std::vector<int>& window) {
  const int w = p.context_window;
  window.assign(w, p.pad_id);
  std::size_t total = prompt.size() + upto;
  int slot = w;
  for (std::size_t taken = 0; taken < total && slot > 0; ++taken) {
    std::size_t src = total - 1 - taken;
    --slot;
    window[slot] = src < prompt.size() ? prompt[src] : completion[src - prompt.size()];
  }
}

struct ForwardCache {
  std::vector<double> x;       // concatenated embeddings, W*D
  std::vector<double> h;       // tanh hidden, H
  std::vector<double> logits;  // V
  std::vector<double> probs;   // softmax(logits / T), V
  double logz = 0.0;           // logsumexp(logits / T)
};

void forward_window(const PolicyParams& p, std::span<const int> window, ForwardCache& c) {
  const int w = p.context_window, d = p.embed_dim, hd = p.hidden_dim, v = p.vocab_size;
  const double* wt = p.weights.data();
  const double* emb = wt + p.embedding_offset();
  const double* w1 = wt + p.hidden_offset();
  const double* b1 = w1 + std::size_t(hd) * w * d;
  const double* w2 = wt + p.output_offset();
  const double* b2 = w2 + std::size_t(v) * hd;

  c.x.resize(std::size_t(w) * d);
  for (int k = 0; k < w; ++k) {
    const double* row = emb + std::size_t(window[k]) * d;
    std::copy(row, row + d, c.x.begin() + std::size_t(k) * d);
  }
  c.h.resize(hd);
  const int in = w * d;
  for (int j = 0; j < hd; ++j) {
    double a = b1[j];
    const double* row = w1 + std::size_t(j) * in;
    for (int k = 0; k < in; ++k) a += row[k] * c.x[k];
    c.h[j] = std::tanh(a);
  }
  c.logits.resize(v);
  for (int o = 0; o < v; ++o) {
    double z = b2[o];
    const double* row = w2 + std::size_t(o) * hd;
    for (int j = 0; j < hd; ++j) z += row[j] * c.h[j];
    c.logits[o] = z;
  }
}

// Fills probs/logz for softmax(logits / T).
void softmax_temp(ForwardCache& c, double temperature) {
  const std::size_t v = c.logits.size();
  c.probs.resize(v);
  double m = -HUGE_VAL;
  for (double z : c.logits) m = std::max(m, z / temperature);
  double sum = 0.0;
  for (std::size_t i = 0; i < v; ++i) {
    c.probs[i] = std::exp(c.logits[i] / temperature - m);
    sum += c.probs[i];
  }
  c.logz = m + std::log(sum);
  for (double& p : c.probs) p /= sum;
}

}  // namespace

Prompt make_prompt(const Vocabulary& vocab, std::string_view text, int max_prompt_length) {
  Prompt p;
  p.text = std::string(text);
  p.token_ids = vocab.encode(text);
  if (static_cast<int>(p.token_ids.size()) > max_prompt_length)
    throw DataError("prompt exceeds max_prompt_length (" +
                    std::to_string(p.token_ids.size()) + " > " +
                    std::to_string(max_prompt_length) + "): " + p.text);
  return p;
}

PolicyParams PolicyParams::zeros(const Vocabulary& vocab, const PolicyConfig& cfg) {
  PolicyParams p;
  p.context_window = cfg.context_window;
  p.embed_dim = cfg.embed_dim;
  p.hidden_dim = cfg.hidden_dim;
  p.vocab_size = vocab.size();
  p.pad_id = vocab.pad_id();
  p.eos_id = vocab.eos_id();
  if (cfg.context_window < 1 || cfg.embed_dim < 1 || cfg.hidden_dim < 1)
    throw std::invalid_argument("policy dimensions must be positive");
  p.weights.assign(p.param_count(), 0.0);
  return p;
}

PolicyParams PolicyParams::random_init(const Vocabulary& vocab, const PolicyConfig& cfg,
                                       std::uint64_t seed, double scale) {
  PolicyParams p = zeros(vocab, cfg);
  Rng rng(seed);
  for (double& w : p.weights) w = scale * rng.normal();
  return p;
}

bool PolicyParams::all_finite() const {
  return std::all_of(weights.begin(), weights.end(),
                     [](double w) { return std::isfinite(w); });
}

std::vector<double> forward_logits(const PolicyParams& params, std::span<const int> context) {
  check_token_ids(context, params.vocab_size, "forward_logits");
  std::vector<int> window;
  fill_window(params, context, {}, 0, window);
  ForwardCache c;
  forward_window(params, window, c);
  return std::move(c.logits);
}

Completion sample_completion(const PolicyParams& params, const Prompt& prompt,
                             int max_len, double temperature, std::uint64_t seed) {
  if (temperature <= 0.0) throw std::invalid_argument("temperature must be positive");
  if (max_len < 1) throw std::invalid_argument("max_len must be >= 1");
  check_token_ids(prompt.token_ids, params.vocab_size, "sample_completion");

  Completion out;
  Rng rng(seed);
  std::vector<int> window;
  ForwardCache c;
  for (int t = 0; t < max_len; ++t) {
    fill_window(params, prompt.token_ids, out.token_ids, out.token_ids.size(), window);
    forward_window(params, window, c);
    softmax_temp(c, temperature);
    const double u = rng.uniform();
    double cum = 0.0;
    int chosen = params.vocab_size - 1;
    for (int v = 0; v < params.vocab_size; ++v) {
      cum += c.probs[v];
      if (u < cum) {
        chosen = v;
        break;
      }
    }
    out.token_ids.push_back(chosen);
    out.per_token_logprob.push_back(c.logits[chosen] / temperature - c.logz);
    if (chosen == params.eos_id) {
      out.terminated_by_eos = true;
      break;
    }
  }
  return out;
}

SequenceScore sequence_logprob(const PolicyParams& params, const Prompt& prompt,
                               const Completion& completion, double temperature) {
  if (temperature <= 0.0) throw std::invalid_argument("temperature must be positive");
  check_token_ids(prompt.token_ids, params.vocab_size, "sequence_logprob");
  check_token_ids(completion.token_ids, params.vocab_size, "sequence_logprob");

  SequenceScore score;
  std::vector<int> window;
  ForwardCache c;
  for (std::size_t t = 0; t < completion.token_ids.size(); ++t) {
    fill_window(params, prompt.token_ids, completion.token_ids, t, window);
    forward_window(params, window, c);
    softmax_temp(c, temperature);
    const double lp = c.logits[completion.token_ids[t]] / temperature - c.logz;
    score.per_token.push_back(lp);
    score.total += lp;
  }
  return score;
}

void accumulate_weighted_logprob_gradient(const PolicyParams& params, const Prompt& prompt,
                                          const Completion& completion, double temperature,
                                          std::span<const double> token_weights,
                                          std::span<double> grad) {
  if (temperature <= 0.0) throw std::invalid_argument("temperature must be positive");
  if (token_weights.size() != completion.token_ids.size())
    throw std::invalid_argument("token_weights length mismatch");
  if (grad.size() != params.param_count())
    throw std::invalid_argument("gradient buffer size mismatch");
  check_token_ids(prompt.token_ids, params.vocab_size, "logprob_gradient");
  check_token_ids(completion.token_ids, params.vocab_size, "logprob_gradient");

  const int w = params.context_window, d = params.embed_dim;
  const int hd = params.hidden_dim, v = params.vocab_size;
  const int in = w * d;
  const double* wt = params.weights.data();
  const double* w1 = wt + params.hidden_offset();
  const double* w2 = wt + params.output_offset();
  double* g_emb = grad.data() + params.embedding_offset();
  double* g_w1 = grad.data() + params.hidden_offset();
  double* g_b1 = g_w1 + std::size_t(hd) * in;
  double* g_w2 = grad.data() + params.output_offset();
  double* g_b2 = g_w2 + std::size_t(v) * hd;

  std::vector<int> window;
  ForwardCache c;
  std::vector<double> gz(v), gh(hd), ga(hd), gx(in);
  for (std::size_t t = 0; t < completion.token_ids.size(); ++t) {
    const double weight = token_weights[t];
    if (weight == 0.0) continue;
    fill_window(params, prompt.token_ids, completion.token_ids, t, window);
    forward_window(params, window, c);
    softmax_temp(c, temperature);
    const int y = completion.token_ids[t];

    // d logp(y) / d logits = (onehot(y) - softmax) / T
    for (int o = 0; o < v; ++o) gz[o] = weight * ((o == y ? 1.0 : 0.0) - c.probs[o]) / temperature;

    for (int o = 0; o < v; ++o) {
      g_b2[o] += gz[o];
      double* row = g_w2 + std::size_t(o) * hd;
      for (int j = 0; j < hd; ++j) row[j] += gz[o] * c.h[j];
    }
    std::fill(gh.begin(), gh.end(), 0.0);
    for (int o = 0; o < v; ++o) {
      const double* row = w2 + std::size_t(o) * hd;
      for (int j = 0; j < hd; ++j) gh[j] += row[j] * gz[o];
    }
    for (int j = 0; j < hd; ++j) ga[j] = gh[j] * (1.0 - c.h[j] * c.h[j]);
    std::fill(gx.begin(), gx.end(), 0.0);
    for (int j = 0; j < hd; ++j) {
      g_b1[j] += ga[j];
      double* row = g_w1 + std::size_t(j) * in;
      const double* wrow = w1 + std::size_t(j) * in;
      for (int k = 0; k < in; ++k) {
        row[k] += ga[j] * c.x[k];
        gx[k] += wrow[k] * ga[j];
      }
    }
    for (int k = 0; k < w; ++k) {
      double* erow = g_emb + std::size_t(window[k]) * d;
      for (int dd = 0; dd < d; ++dd) erow[dd] += gx[std::size_t(k) * d + dd];
    }
  }
}

std::vector<double> logprob_gradient(const PolicyParams& params, const Prompt& prompt,
                                     const Completion& completion, double temperature) {
  std::vector<double> grad(params.param_count(), 0.0);
  std::vector<double> ones(completion.token_ids.size(), 1.0);
  accumulate_weighted_logprob_gradient(params, prompt, completion, temperature, ones, grad);
  return grad;
}

}  // namespace grpolab
