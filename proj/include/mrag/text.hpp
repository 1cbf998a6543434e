#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace mrag {

namespace detail {

struct DecodedCp {
  char32_t cp;
  std::size_t len;
};

/// Decodes one UTF-8 sequence at s[pos]. Malformed bytes decode as U+FFFD of
/// length 1 so tokenization never fails.
inline DecodedCp decode_utf8(std::string_view s, std::size_t pos) noexcept {
  const auto b0 = static_cast<unsigned char>(s[pos]);
  if (b0 < 0x80) return {b0, 1};
  std::size_t len = 0;
  char32_t cp = 0;
  if ((b0 & 0xE0) == 0xC0) {
    len = 2;
    cp = b0 & 0x1F;
  } else if ((b0 & 0xF0) == 0xE0) {
    len = 3;
    cp = b0 & 0x0F;
  } else if ((b0 & 0xF8) == 0xF0) {
    len = 4;
    cp = b0 & 0x07;
  } else {
    return {0xFFFD, 1};
  }
  if (pos + len > s.size()) return {0xFFFD, 1};
  for (std::size_t i = 1; i < len; ++i) {
    const auto b = static_cast<unsigned char>(s[pos + i]);
    if ((b & 0xC0) != 0x80) return {0xFFFD, 1};
    cp = (cp << 6) | (b & 0x3F);
  }
  return {cp, len};
}

inline bool is_space_cp(char32_t cp) noexcept {
  switch (cp) {
    case 0x09: case 0x0A: case 0x0B: case 0x0C: case 0x0D: case 0x20:
    case 0x85: case 0xA0: case 0x1680: case 0x2028: case 0x2029:
    case 0x202F: case 0x205F: case 0x3000: case 0xFEFF:
      return true;
    default:
      return cp >= 0x2000 && cp <= 0x200B;
  }
}

/// Letter/digit classification without a locale. ASCII is exact; outside ASCII
/// the known punctuation, symbol and emoji blocks are symbols and every other
/// assigned-looking code point counts as a word character.
inline bool is_word_cp(char32_t cp) noexcept {
  if (cp < 0x80) {
    return (cp >= '0' && cp <= '9') || (cp >= 'a' && cp <= 'z') || (cp >= 'A' && cp <= 'Z');
  }
  if (cp == 0xFFFD) return false;
  if (cp >= 0x80 && cp <= 0xBF) return cp == 0xAA || cp == 0xB2 || cp == 0xB3 || cp == 0xB5 ||
                                        cp == 0xB9 || cp == 0xBA || (cp >= 0xBC && cp <= 0xBE);
  if (cp == 0xD7 || cp == 0xF7) return false;
  if (cp >= 0x2000 && cp <= 0x2BFF) return cp >= 0x2070 && cp <= 0x209F;  // super/subscripts
  if (cp >= 0x2E00 && cp <= 0x2E7F) return false;                           // supplemental punct
  if (cp >= 0x3000 && cp <= 0x303F) return cp == 0x3005 || cp == 0x3006 || cp == 0x3007;
  if (cp >= 0xFE10 && cp <= 0xFE6F) return false;                           // vertical/small forms
  if (cp >= 0xFF00 && cp <= 0xFF65) {                                       // fullwidth ASCII
    return (cp >= 0xFF10 && cp <= 0xFF19) || (cp >= 0xFF21 && cp <= 0xFF3A) ||
           (cp >= 0xFF41 && cp <= 0xFF5A);
  }
  if (cp >= 0x1F000 && cp <= 0x1FAFF) return false;                         // emoji & pictographs
  if (cp >= 0xE000 && cp <= 0xF8FF) return false;                           // private use
  return true;
}

}  // namespace detail

/// Byte range of one token inside the source text.
struct TokenSpan {
  std::size_t begin;
  std::size_t end;
};

/// Contiguous letter/digit runs are single tokens; every other non-whitespace
/// code point is a token of its own.
inline std::vector<TokenSpan> token_spans(std::string_view text) {
  std::vector<TokenSpan> out;
  std::size_t pos = 0;
  while (pos < text.size()) {
    auto [cp, len] = detail::decode_utf8(text, pos);
    if (detail::is_space_cp(cp)) {
      pos += len;
      continue;
    }
    if (!detail::is_word_cp(cp)) {
      out.push_back({pos, pos + len});
      pos += len;
      continue;
    }
    const std::size_t begin = pos;
    pos += len;
    while (pos < text.size()) {
      auto next = detail::decode_utf8(text, pos);
      if (!detail::is_word_cp(next.cp)) break;
      pos += next.len;
    }
    out.push_back({begin, pos});
  }
  return out;
}

inline std::vector<std::string> tokenize_text(std::string_view text) {
  std::vector<std::string> out;
  for (const auto& span : token_spans(text)) out.emplace_back(text.substr(span.begin, span.end - span.begin));
  return out;
}

inline std::size_t count_tokens(std::string_view text) { return token_spans(text).size(); }

inline std::string_view trim(std::string_view s) noexcept {
  std::size_t b = 0;
  std::size_t e = s.size();
  while (b < e && static_cast<unsigned char>(s[b]) <= 0x20) ++b;
  while (e > b && static_cast<unsigned char>(s[e - 1]) <= 0x20) --e;
  return s.substr(b, e - b);
}

inline std::string ascii_lower(std::string_view s) {
  std::string out(s);
  for (auto& c : out) {
    if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
  }
  return out;
}

}  // namespace mrag
