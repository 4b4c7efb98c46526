#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "grpolab/vocab.hpp"

namespace grpolab {

struct PolicyConfig {
  int context_window = 8;
  int embed_dim = 16;
  int hidden_dim = 32;
};

struct Prompt {
  std::vector<int> token_ids;
  std::string text;
};

Prompt make_prompt(const Vocabulary& vocab, std::string_view text, int max_prompt_length);

struct Completion {
  std::vector<int> token_ids;
  std::vector<double> per_token_logprob;  // under the generating distribution
  bool terminated_by_eos = false;

  int length() const { return static_cast<int>(token_ids.size()); }
};

/// Flat parameter set of a fixed-window one-hidden-layer token policy.
/// Layout: token embeddings (V*D), then hidden layer (H*(W*D) weights + H
/// biases), then output projection (V*H weights + V biases). A value type:
/// copies are the pi_old / pi_ref snapshots.
struct PolicyParams {
  int context_window = 0;
  int embed_dim = 0;
  int hidden_dim = 0;
  int vocab_size = 0;
  int pad_id = 0;
  int eos_id = 0;
  std::vector<double> weights;

  static PolicyParams zeros(const Vocabulary& vocab, const PolicyConfig& cfg);
  // Gaussian init, scale 0.02, deterministic per seed.
  static PolicyParams random_init(const Vocabulary& vocab, const PolicyConfig& cfg,
                                  std::uint64_t seed, double scale = 0.02);

  std::size_t embedding_size() const { return std::size_t(vocab_size) * embed_dim; }
  std::size_t hidden_size() const {
    return std::size_t(hidden_dim) * context_window * embed_dim + hidden_dim;
  }
  std::size_t output_size() const { return std::size_t(vocab_size) * hidden_dim + vocab_size; }
  std::size_t param_count() const { return embedding_size() + hidden_size() + output_size(); }

  std::size_t embedding_offset() const { return 0; }
  std::size_t hidden_offset() const { return embedding_size(); }
  std::size_t output_offset() const { return embedding_size() + hidden_size(); }

  bool all_finite() const;
};

/// Logits over the vocabulary for an arbitrary-length context. The last
/// context_window ids are used, left-padded with the pad id. Throws
/// std::invalid_argument on out-of-vocabulary ids.
std::vector<double> forward_logits(const PolicyParams& params, std::span<const int> context);

/// Ancestral sampling from softmax(logits / temperature), stopping at <eos>
/// or max_len. per_token_logprob records the temperature-scaled distribution
/// actually sampled from. Identical (params, prompt, seed, temperature)
/// reproduce the identical completion.
Completion sample_completion(const PolicyParams& params, const Prompt& prompt,
                             int max_len, double temperature, std::uint64_t seed);

struct SequenceScore {
  double total = 0.0;
  std::vector<double> per_token;
};

/// Teacher-forced log-probability of a completion after a prompt, under the
/// same temperature-scaled distribution used for sampling.
SequenceScore sequence_logprob(const PolicyParams& params, const Prompt& prompt,
                               const Completion& completion, double temperature);

/// d(sequence_logprob.total)/d(theta), one entry per parameter.
std::vector<double> logprob_gradient(const PolicyParams& params, const Prompt& prompt,
                                     const Completion& completion, double temperature);

/// Accumulates sum_t weight[t] * d(logprob_t)/d(theta) into grad (which must
/// have param_count entries). Shared backprop core for the policy-gradient
/// and KL terms.
void accumulate_weighted_logprob_gradient(const PolicyParams& params, const Prompt& prompt,
                                          const Completion& completion, double temperature,
                                          std::span<const double> token_weights,
                                          std::span<double> grad);

}  // namespace grpolab
