#pragma once

#include <compare>
#include <map>
#include <set>
#include <string>
#include <string_view>

#include "ehmm/errors.hpp"

namespace ehmm {

constexpr int kNumContextClasses = 6;

// A phone annotation symbol.
//
// Canonical string grammar:  base [ "+c" K ] [ "'" ]
// with K in 1..6, e.g.  p  p+c3  p+c3'  — the trailing apostrophe marks a
// token that was wrongly detected at some iteration ("primed"), the +cK
// suffix encodes the vowel-context class of contextual annotation.
struct label {
  std::string base;
  int context = 0;  // 0 = none, otherwise 1..kNumContextClasses
  bool primed = false;

  std::string str() const {
    std::string out = base;
    if (context > 0) {
      out += "+c";
      out += static_cast<char>('0' + context);
    }
    if (primed) out += '\'';
    return out;
  }

  label with_context(int cls) const { return {base, cls, primed}; }
  label as_primed() const { return {base, context, true}; }

  friend bool operator==(const label&, const label&) = default;
  // Ordering follows the canonical string so that every iteration over a
  // sorted label container is reproducible.
  friend std::strong_ordering operator<=>(const label& a, const label& b) {
    return a.str() <=> b.str();
  }
};

inline label parse_label(std::string_view text) {
  if (text.empty()) throw data_error("empty label string");
  label out;
  if (text.back() == '\'') {
    out.primed = true;
    text.remove_suffix(1);
  }
  if (auto pos = text.rfind("+c"); pos != std::string_view::npos) {
    if (pos + 3 != text.size() || text[pos + 2] < '1' ||
        text[pos + 2] > '0' + kNumContextClasses)
      throw data_error("bad context suffix in label '" + std::string(text) + "'");
    out.context = text[pos + 2] - '0';
    text.remove_suffix(3);
  }
  if (text.empty() || text.find('+') != std::string_view::npos ||
      text.find('\'') != std::string_view::npos)
    throw data_error("bad label base '" + std::string(text) + "'");
  out.base = std::string(text);
  return out;
}

// Contextual-annotation configuration: which consonants take a context class,
// which inventory symbols count as vowels, and the vowel -> class table.
//
// The default table is a six-way feature partition of the French vowels in
// SAMPA notation (S stands for the esh):
//   1 high front unrounded, 2 mid front unrounded, 3 open,
//   4 back rounded, 5 front rounded, 6 nasal.
// Class 6 doubles as the fallback for consonants with no vowel successor.
struct context_config {
  std::set<std::string> context_bearing = {"p", "t", "k", "f", "s", "S"};
  std::set<std::string> vowels;
  std::map<std::string, int> vowel_class;
  int fallback_class = 6;

  context_config() {
    static const std::map<std::string, int> default_classes = {
        {"i", 1},  {"e", 2},  {"E", 2},  {"a", 3},  {"A", 3},
        {"o", 4},  {"O", 4},  {"u", 4},  {"y", 5},  {"2", 5},
        {"9", 5},  {"@", 5},  {"e~", 6}, {"a~", 6}, {"o~", 6}, {"9~", 6}};
    vowel_class = default_classes;
    for (const auto& [v, cls] : default_classes) vowels.insert(v);
  }

  bool is_vowel(const std::string& base) const { return vowels.count(base) > 0; }
  bool is_context_bearing(const std::string& base) const {
    return context_bearing.count(base) > 0;
  }
};

}  // namespace ehmm
