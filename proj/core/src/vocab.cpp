#include "grpolab/vocab.hpp"

#include <algorithm>
#include <unordered_set>

#include "grpolab/util.hpp"

namespace grpolab {

namespace {

std::vector<std::string> reserved_tokens() {
  return {std::string(kThinkOpen), std::string(kThinkClose),
          std::string(kBoxedOpen), std::string(kBraceClose), std::string(kEos),
          std::string(kPad)};
}

}  // namespace

Vocabulary Vocabulary::arithmetic() {
  std::vector<std::string> toks;
  for (char c = '0'; c <= '9'; ++c) toks.push_back(std::string(1, c));
  for (char c : {'+', '-', '*', '='}) toks.push_back(std::string(1, c));
  for (auto& r : reserved_tokens()) toks.push_back(r);
  return from_tokens(std::move(toks));
}

Vocabulary Vocabulary::ascii_full() {
  std::vector<std::string> toks;
  for (char c = ' '; c <= '~'; ++c) {
    if (c == '}') continue;  // already reserved as the box-closing token
    toks.push_back(std::string(1, c));
  }
  for (auto& r : reserved_tokens()) toks.push_back(r);
  return from_tokens(std::move(toks));
}

Vocabulary Vocabulary::from_tokens(std::vector<std::string> tokens) {
  Vocabulary v;
  v.tokens_ = std::move(tokens);
  std::unordered_set<std::string> seen;
  for (int id = 0; id < v.size(); ++id) {
    const std::string& tok = v.tokens_[id];
    if (tok.empty()) throw DataError("vocabulary: empty token at id " + std::to_string(id));
    if (!seen.insert(tok).second)
      throw DataError("vocabulary: duplicate token '" + tok + "'");
    v.index_.emplace(tok, id);
    if (tok.size() > 1) v.multi_char_ids_.push_back(id);
  }
  std::sort(v.multi_char_ids_.begin(), v.multi_char_ids_.end(),
            [&](int a, int b) { return v.tokens_[a].size() > v.tokens_[b].size(); });
  auto eos = v.find(kEos);
  if (!eos) throw DataError("vocabulary: missing required token <eos>");
  v.eos_id_ = *eos;
  auto pad = v.find(kPad);
  if (!pad) throw DataError("vocabulary: missing required token <pad>");
  v.pad_id_ = *pad;
  return v;
}

const std::string& Vocabulary::token(int id) const {
  if (id < 0 || id >= size())
    throw std::invalid_argument("vocabulary: token id " + std::to_string(id) + " out of range");
  return tokens_[id];
}

std::optional<int> Vocabulary::find(std::string_view tok) const {
  auto it = index_.find(std::string(tok));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

int Vocabulary::id_of(std::string_view tok) const {
  auto id = find(tok);
  if (!id) throw DataError("vocabulary: unknown token '" + std::string(tok) + "'");
  return *id;
}

std::vector<int> Vocabulary::encode(std::string_view text) const {
  std::vector<int> out;
  std::size_t pos = 0;
  while (pos < text.size()) {
    int matched = -1;
    for (int id : multi_char_ids_) {
      const std::string& tok = tokens_[id];
      if (text.compare(pos, tok.size(), tok) == 0) {
        matched = id;
        break;
      }
    }
    if (matched < 0) {
      auto it = index_.find(std::string(1, text[pos]));
      if (it == index_.end())
        throw DataError("vocabulary: cannot encode character '" +
                        std::string(1, text[pos]) + "' at offset " +
                        std::to_string(pos));
      matched = it->second;
    }
    out.push_back(matched);
    pos += tokens_[matched].size();
  }
  return out;
}

bool Vocabulary::can_encode(std::string_view text) const {
  try {
    encode(text);
    return true;
  } catch (const DataError&) {
    return false;
  }
}

std::string Vocabulary::decode(std::span<const int> ids, bool skip_structural) const {
  std::string out;
  for (int id : ids) {
    if (id == pad_id_) continue;
    if (skip_structural && id == eos_id_) continue;
    out += token(id);
  }
  return out;
}

}  // namespace grpolab
