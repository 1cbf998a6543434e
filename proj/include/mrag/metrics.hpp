#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "mrag/error.hpp"

namespace mrag {

struct NormalizeOptions {
  bool remove_articles = true;
};

inline bool is_ascii_punct(char c) noexcept {
  const auto u = static_cast<unsigned char>(c);
  return (u >= 33 && u <= 47) || (u >= 58 && u <= 64) || (u >= 91 && u <= 96) || (u >= 123 && u <= 126);
}

inline std::vector<std::string> split_whitespace(std::string_view s) {
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && static_cast<unsigned char>(s[i]) <= 0x20) ++i;
    const std::size_t b = i;
    while (i < s.size() && static_cast<unsigned char>(s[i]) > 0x20) ++i;
    if (i > b) out.emplace_back(s.substr(b, i - b));
  }
  return out;
}

/// Lower-case, drop ASCII punctuation, drop the articles a/an/the as whole
/// words, collapse whitespace.
inline std::string normalize_answer(std::string_view text, const NormalizeOptions& opt = {}) {
  std::string s;
  s.reserve(text.size());
  for (char c : text) {
    if (is_ascii_punct(c)) continue;
    s.push_back(c >= 'A' && c <= 'Z' ? static_cast<char>(c - 'A' + 'a') : c);
  }
  std::string out;
  for (const auto& tok : split_whitespace(s)) {
    if (opt.remove_articles && (tok == "a" || tok == "an" || tok == "the")) continue;
    if (!out.empty()) out.push_back(' ');
    out += tok;
  }
  return out;
}

inline int exact_match(std::string_view pred, std::string_view gold, const NormalizeOptions& opt = {}) {
  return normalize_answer(pred, opt) == normalize_answer(gold, opt) ? 1 : 0;
}

inline double token_f1(std::string_view pred, std::string_view gold, const NormalizeOptions& opt = {}) {
  const auto p = split_whitespace(normalize_answer(pred, opt));
  const auto g = split_whitespace(normalize_answer(gold, opt));
  if (p.empty() && g.empty()) return 1.0;
  if (p.empty() || g.empty()) return 0.0;
  std::map<std::string, std::size_t> counts;
  for (const auto& t : g) ++counts[t];
  std::size_t common = 0;
  for (const auto& t : p) {
    auto it = counts.find(t);
    if (it != counts.end() && it->second > 0) {
      --it->second;
      ++common;
    }
  }
  if (common == 0) return 0.0;
  const double precision = static_cast<double>(common) / static_cast<double>(p.size());
  const double recall = static_cast<double>(common) / static_cast<double>(g.size());
  return 2.0 * precision * recall / (precision + recall);
}

/// Index 0-3 of the first standalone option letter (A-D, either case) in the
/// text, or -1.
inline int first_option_letter(std::string_view text) noexcept {
  auto is_alnum = [](char c) {
    return (c >= '0' && c <= '9') || (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') ||
           static_cast<unsigned char>(c) >= 0x80;
  };
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    int idx = -1;
    if (c >= 'A' && c <= 'D') idx = c - 'A';
    if (c >= 'a' && c <= 'd') idx = c - 'a';
    if (idx < 0) continue;
    const bool left = i == 0 || !is_alnum(text[i - 1]);
    const bool right = i + 1 == text.size() || !is_alnum(text[i + 1]);
    if (left && right) return idx;
  }
  return -1;
}

inline int mc_accuracy(std::string_view pred, const std::vector<std::string>& options, std::size_t gold_index,
                       const NormalizeOptions& opt = {}) {
  require(gold_index < options.size(), Errc::invalid_input, "gold index out of range");
  const int letter = first_option_letter(pred);
  if (letter >= 0) return static_cast<std::size_t>(letter) == gold_index ? 1 : 0;
  const std::string norm = normalize_answer(pred, opt);
  for (std::size_t i = 0; i < options.size(); ++i) {
    if (normalize_answer(options[i], opt) == norm) return i == gold_index ? 1 : 0;
  }
  return 0;
}

/// 2x2 contingency of two systems scored on the same queries.
struct PairedOutcomes {
  std::uint64_t a = 0;  // both correct
  std::uint64_t b = 0;  // only A correct
  std::uint64_t c = 0;  // only B correct
  std::uint64_t d = 0;  // both wrong

  std::uint64_t total() const noexcept { return a + b + c + d; }

  static PairedOutcomes from(const std::vector<bool>& sys_a, const std::vector<bool>& sys_b) {
    require(sys_a.size() == sys_b.size(), Errc::invalid_input, "paired outcome lists differ in length");
    PairedOutcomes o;
    for (std::size_t i = 0; i < sys_a.size(); ++i) {
      if (sys_a[i] && sys_b[i]) ++o.a;
      else if (sys_a[i]) ++o.b;
      else if (sys_b[i]) ++o.c;
      else ++o.d;
    }
    return o;
  }
};

struct McNemarResult {
  double statistic = 0.0;
  double p_value = 1.0;
  int df = 1;
};

/// Survival function of chi-square with one degree of freedom.
inline double chi2_sf_df1(double x) noexcept {
  if (x <= 0.0) return 1.0;
  return std::erfc(std::sqrt(x / 2.0));
}

inline McNemarResult mcnemar(const PairedOutcomes& o, bool continuity = false) {
  const std::uint64_t discordant = o.b + o.c;
  if (discordant == 0) return {0.0, 1.0, 1};
  const double diff = std::fabs(static_cast<double>(o.b) - static_cast<double>(o.c));
  // The corrected difference is floored at zero so b = c still gives 0.
  const double num = continuity ? std::max(0.0, diff - 1.0) : diff;
  const double stat = num * num / static_cast<double>(discordant);
  return {stat, chi2_sf_df1(stat), 1};
}

}  // namespace mrag
