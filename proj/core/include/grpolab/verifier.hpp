#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <utility>

namespace grpolab {

/// Exact rational; canonical form has den > 0 and gcd(|num|, den) == 1.
struct Rational {
  long long num = 0;
  long long den = 1;

  friend bool operator==(const Rational&, const Rational&) = default;
};

/// Canonicalize; returns nullopt when den == 0 or reduction overflows.
std::optional<Rational> make_rational(long long num, long long den);

/// Parses an already-normalized answer as integer, decimal, or a/b fraction.
std::optional<Rational> parse_rational(std::string_view normalized);

struct ExtractedAnswer {
  std::string raw;
  std::string normalized;
  std::optional<Rational> numeric_value;
};

ExtractedAnswer analyze_answer(std::string_view raw);

/// Brace-balanced content of the LAST \boxed{...} occurrence. Nested braces
/// are matched; unbalanced braces after the last marker yield nullopt.
std::optional<std::string> extract_boxed(std::string_view text);

/// Deterministic cleanup, applied in a fixed order: trim; drop \left \right
/// \! \, ; remove internal whitespace; rewrite \frac{a}{b} and \dfrac{a}{b}
/// to a/b; strip one trailing % or \%; strip surrounding $; lowercase bare
/// alphabetic runs. Idempotent and total.
std::string normalize_answer(std::string_view raw);

/// Equal normalized strings, or equal exact rationals when both sides parse.
bool answers_equivalent(std::string_view a, std::string_view b);

struct FormatVerdict {
  bool has_think_block = false;
  // Offsets of the block: start of <think> to one past </think>.
  std::optional<std::pair<std::size_t, std::size_t>> think_span;
  bool answer_after_think = false;
};

/// has_think_block requires exactly one <think> followed by exactly one
/// </think>; answer_after_think requires a boxed answer past the close tag.
FormatVerdict check_format(std::string_view text);

}  // namespace grpolab
