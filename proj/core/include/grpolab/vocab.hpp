#pragma once

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace grpolab {

inline constexpr std::string_view kThinkOpen = "<think>";
inline constexpr std::string_view kThinkClose = "</think>";
inline constexpr std::string_view kBoxedOpen = "\\boxed{";
inline constexpr std::string_view kBraceClose = "}";
inline constexpr std::string_view kEos = "<eos>";
inline constexpr std::string_view kPad = "<pad>";

/// Dense token table. Ids are 0..size()-1 in list order. The reserved
/// markers (<think>, </think>, \boxed{, }, <eos>) are single entries; <pad>
/// backs left-padding of short contexts.
class Vocabulary {
 public:
  // Digits, + - * =, the reserved markers and <pad>. 20 tokens.
  static Vocabulary arithmetic();
  // Arithmetic plus printable ASCII, so any plain-text question encodes.
  static Vocabulary ascii_full();
  // Validates density, uniqueness and the presence of <eos> and <pad>.
  static Vocabulary from_tokens(std::vector<std::string> tokens);

  int size() const { return static_cast<int>(tokens_.size()); }
  const std::string& token(int id) const;
  std::optional<int> find(std::string_view tok) const;
  int id_of(std::string_view tok) const;  // throws DataError when absent

  int eos_id() const { return eos_id_; }
  int pad_id() const { return pad_id_; }

  // Greedy longest-match tokenization; throws DataError on uncovered text.
  std::vector<int> encode(std::string_view text) const;
  bool can_encode(std::string_view text) const;

  // Concatenates token strings. <pad> never renders; <eos> renders only
  // when skip_structural is false.
  std::string decode(std::span<const int> ids, bool skip_structural = true) const;

  const std::vector<std::string>& tokens() const { return tokens_; }

 private:
  Vocabulary() = default;
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, int> index_;
  std::vector<int> multi_char_ids_;  // sorted by token length, longest first
  int eos_id_ = -1;
  int pad_id_ = -1;
};

}  // namespace grpolab
