#include "grpolab/verifier.hpp"

#include <cctype>
#include <cmath>
#include <numeric>

namespace grpolab {

namespace {

constexpr std::string_view kBoxedMarker = "\\boxed{";
constexpr std::string_view kOpenTag = "<think>";
constexpr std::string_view kCloseTag = "</think>";

bool is_space(char c) {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && is_space(s.front())) s.remove_prefix(1);
  while (!s.empty() && is_space(s.back())) s.remove_suffix(1);
  return s;
}

void erase_all(std::string& s, std::string_view what) {
  std::size_t pos = 0;
  while ((pos = s.find(what, pos)) != std::string::npos) {
    s.erase(pos, what.size());
    // An erase can splice a new occurrence together; back off to catch it.
    pos = pos > what.size() ? pos - what.size() : 0;
  }
}

// Balanced {...} group starting at s[pos] == '{'. Returns inner content and
// advances pos past the closing brace; nullopt when unbalanced.
std::optional<std::string> take_brace_group(std::string_view s, std::size_t& pos) {
  if (pos >= s.size() || s[pos] != '{') return std::nullopt;
  int depth = 0;
  const std::size_t start = pos + 1;
  for (std::size_t i = pos; i < s.size(); ++i) {
    if (s[i] == '{') ++depth;
    else if (s[i] == '}') {
      --depth;
      if (depth == 0) {
        std::string inner(s.substr(start, i - start));
        pos = i + 1;
        return inner;
      }
    }
  }
  return std::nullopt;
}

std::string rewrite_fracs(std::string_view in) {
  std::string s(in);
  std::size_t scan = 0;
  while (scan < s.size()) {
    const std::size_t f = s.find("\\frac{", scan);
    const std::size_t df = s.find("\\dfrac{", scan);
    std::size_t at = std::min(f, df);
    if (at == std::string::npos) break;
    const std::size_t marker_len = (at == df && df != std::string::npos) ? 6 : 5;  // \dfrac vs \frac
    std::size_t pos = at + marker_len;
    auto a = take_brace_group(s, pos);
    auto b = a ? take_brace_group(s, pos) : std::nullopt;
    if (!a || !b) {
      scan = at + marker_len;  // malformed; leave untouched
      continue;
    }
    const std::string replacement = rewrite_fracs(*a) + "/" + rewrite_fracs(*b);
    s.replace(at, pos - at, replacement);
    scan = at + replacement.size();
  }
  return s;
}

std::size_t count_occurrences(std::string_view s, std::string_view what) {
  std::size_t n = 0, pos = 0;
  while ((pos = s.find(what, pos)) != std::string_view::npos) {
    ++n;
    pos += what.size();
  }
  return n;
}

std::optional<long long> parse_integer(std::string_view s) {
  if (s.empty()) return std::nullopt;
  bool negative = false;
  if (s.front() == '+' || s.front() == '-') {
    negative = s.front() == '-';
    s.remove_prefix(1);
  }
  if (s.empty() || s.size() > 18) return std::nullopt;
  long long value = 0;
  for (char c : s) {
    if (c < '0' || c > '9') return std::nullopt;
    value = value * 10 + (c - '0');
  }
  return negative ? -value : value;
}

}  // namespace

std::optional<Rational> make_rational(long long num, long long den) {
  if (den == 0) return std::nullopt;
  if (den < 0) {
    num = -num;
    den = -den;
  }
  const long long g = std::gcd(num < 0 ? -num : num, den);
  if (g > 1) {
    num /= g;
    den /= g;
  }
  return Rational{num, den};
}

std::optional<Rational> parse_rational(std::string_view s) {
  if (s.empty()) return std::nullopt;
  const std::size_t slash = s.find('/');
  if (slash != std::string_view::npos) {
    if (s.find('/', slash + 1) != std::string_view::npos) return std::nullopt;
    auto num = parse_integer(s.substr(0, slash));
    auto den = parse_integer(s.substr(slash + 1));
    if (!num || !den) return std::nullopt;
    return make_rational(*num, *den);
  }
  bool negative = false;
  if (s.front() == '+' || s.front() == '-') {
    negative = s.front() == '-';
    s.remove_prefix(1);
  }
  const std::size_t dot = s.find('.');
  std::string_view int_part = s, frac_part;
  if (dot != std::string_view::npos) {
    int_part = s.substr(0, dot);
    frac_part = s.substr(dot + 1);
    if (frac_part.find('.') != std::string_view::npos) return std::nullopt;
  }
  if (int_part.empty() && frac_part.empty()) return std::nullopt;
  if (int_part.size() + frac_part.size() > 18) return std::nullopt;
  long long digits = 0;
  for (std::string_view part : {int_part, frac_part}) {
    for (char c : part) {
      if (c < '0' || c > '9') return std::nullopt;
      digits = digits * 10 + (c - '0');
    }
  }
  long long den = 1;
  for (std::size_t i = 0; i < frac_part.size(); ++i) den *= 10;
  return make_rational(negative ? -digits : digits, den);
}

std::optional<std::string> extract_boxed(std::string_view text) {
  const std::size_t at = text.rfind(kBoxedMarker);
  if (at == std::string_view::npos) return std::nullopt;
  std::size_t pos = at + kBoxedMarker.size() - 1;  // the marker's own '{'
  auto inner = take_brace_group(text, pos);
  if (!inner) return std::nullopt;
  return inner;
}

std::string normalize_answer(std::string_view raw) {
  std::string s(trim(raw));
  erase_all(s, "\\left");
  erase_all(s, "\\right");
  erase_all(s, "\\!");
  erase_all(s, "\\,");
  std::erase_if(s, is_space);
  s = rewrite_fracs(s);
  if (s.ends_with("\\%")) s.erase(s.size() - 2);
  else if (s.ends_with("%")) s.pop_back();
  while (!s.empty() && s.front() == '$') s.erase(s.begin());
  while (!s.empty() && s.back() == '$') s.pop_back();
  // Lowercase bare alphabetic runs; runs led by a backslash are LaTeX
  // commands whose case is significant.
  for (std::size_t i = 0; i < s.size();) {
    if (std::isalpha(static_cast<unsigned char>(s[i]))) {
      const bool command = i > 0 && s[i - 1] == '\\';
      std::size_t j = i;
      while (j < s.size() && std::isalpha(static_cast<unsigned char>(s[j]))) ++j;
      if (!command)
        for (std::size_t k = i; k < j; ++k)
          s[k] = static_cast<char>(std::tolower(static_cast<unsigned char>(s[k])));
      i = j;
    } else {
      ++i;
    }
  }
  return s;
}

ExtractedAnswer analyze_answer(std::string_view raw) {
  ExtractedAnswer out;
  out.raw = std::string(raw);
  out.normalized = normalize_answer(raw);
  out.numeric_value = parse_rational(out.normalized);
  return out;
}

bool answers_equivalent(std::string_view a, std::string_view b) {
  const ExtractedAnswer ea = analyze_answer(a), eb = analyze_answer(b);
  if (ea.normalized == eb.normalized) return true;
  return ea.numeric_value && eb.numeric_value && *ea.numeric_value == *eb.numeric_value;
}

FormatVerdict check_format(std::string_view text) {
  FormatVerdict v;
  if (count_occurrences(text, kOpenTag) != 1 || count_occurrences(text, kCloseTag) != 1)
    return v;
  const std::size_t open = text.find(kOpenTag);
  const std::size_t close = text.find(kCloseTag);
  if (close < open) return v;
  v.has_think_block = true;
  v.think_span = {open, close + kCloseTag.size()};
  v.answer_after_think = extract_boxed(text.substr(v.think_span->second)).has_value();
  return v;
}

}  // namespace grpolab
