#pragma once

// Corpus ingestion: tokenization with proper-noun removal, length-bucketed
// frequency lists, the reference dictionary and its 4-gram attestation index.

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "dysscreen/error.hpp"

namespace dysscreen {

struct Token {
  std::string text;
  std::uint64_t count = 0;

  friend bool operator==(const Token&, const Token&) = default;
};

struct Document {
  std::string name;
  std::string text;
};

enum class LengthBucket { Short, Long };

constexpr std::size_t min_length(LengthBucket b) noexcept { return b == LengthBucket::Short ? 4 : 7; }
constexpr std::size_t max_length(LengthBucket b) noexcept { return b == LengthBucket::Short ? 6 : 9; }

constexpr bool bucket_admits(LengthBucket b, std::size_t len) noexcept {
  return len >= min_length(b) && len <= max_length(b);
}

constexpr std::optional<LengthBucket> bucket_for_length(std::size_t len) noexcept {
  if (bucket_admits(LengthBucket::Short, len)) return LengthBucket::Short;
  if (bucket_admits(LengthBucket::Long, len)) return LengthBucket::Long;
  return std::nullopt;
}

inline std::string_view to_string(LengthBucket b) noexcept { return b == LengthBucket::Short ? "short" : "long"; }

inline LengthBucket parse_bucket(std::string_view s) {
  if (s == "short") return LengthBucket::Short;
  if (s == "long") return LengthBucket::Long;
  throw ContractViolation("unknown length bucket '" + std::string(s) + "'");
}

inline bool is_lower_alpha(std::string_view s) noexcept {
  return !s.empty() && std::all_of(s.begin(), s.end(), [](char c) { return c >= 'a' && c <= 'z'; });
}

namespace detail {

// Decodes one UTF-8 sequence starting at pos; returns the code point and advances pos.
// Rejects overlong forms, surrogates and out-of-range values.
inline std::optional<char32_t> next_code_point(std::string_view s, std::size_t& pos) {
  const auto byte = [&](std::size_t i) { return static_cast<unsigned char>(s[i]); };
  const unsigned char lead = byte(pos);
  if (lead < 0x80) {
    ++pos;
    return lead;
  }
  std::size_t extra;
  char32_t cp;
  if ((lead & 0xE0) == 0xC0) {
    extra = 1;
    cp = lead & 0x1F;
  } else if ((lead & 0xF0) == 0xE0) {
    extra = 2;
    cp = lead & 0x0F;
  } else if ((lead & 0xF8) == 0xF0) {
    extra = 3;
    cp = lead & 0x07;
  } else {
    return std::nullopt;
  }
  if (pos + extra >= s.size()) return std::nullopt;
  for (std::size_t i = 1; i <= extra; ++i) {
    const unsigned char c = byte(pos + i);
    if ((c & 0xC0) != 0x80) return std::nullopt;
    cp = (cp << 6) | (c & 0x3F);
  }
  static constexpr char32_t min_for_len[] = {0, 0x80, 0x800, 0x10000};
  if (cp < min_for_len[extra] || cp > 0x10FFFF || (cp >= 0xD800 && cp <= 0xDFFF)) return std::nullopt;
  pos += extra + 1;
  return cp;
}

// Non-ASCII code points that behave as letters for token boundaries.
// Punctuation and symbol blocks split tokens like ASCII punctuation does.
constexpr bool is_non_ascii_letter(char32_t cp) noexcept {
  if (cp < 0xC0) return false;                   // C1 controls, Latin-1 punctuation/symbols
  if (cp == 0xD7 || cp == 0xF7) return false;    // multiplication and division signs
  if (cp >= 0x2000 && cp <= 0x2BFF) return false;  // general punctuation, symbols, arrows
  if (cp >= 0x3000 && cp <= 0x303F) return false;  // CJK punctuation
  if (cp >= 0xFE30 && cp <= 0xFE4F) return false;
  if (cp >= 0xFF00 && cp <= 0xFF0F) return false;
  return true;
}

constexpr bool is_quote(char32_t cp) noexcept {
  switch (cp) {
    case U'"': case U'\'': case U'`':
    case 0x2018: case 0x2019: case 0x201C: case 0x201D: case 0xAB: case 0xBB:
      return true;
    default:
      return false;
  }
}

constexpr bool is_space(char32_t cp) noexcept {
  return cp == U' ' || cp == U'\t' || cp == U'\n' || cp == U'\r' || cp == U'\f' || cp == U'\v' || cp == 0xA0;
}

constexpr bool is_ascii_alpha(char32_t cp) noexcept { return (cp >= U'a' && cp <= U'z') || (cp >= U'A' && cp <= U'Z'); }

// Counts accepted tokens of one document into counts.
inline void tokenize_into(const Document& doc, std::map<std::string, std::uint64_t>& counts) {
  const std::string_view text = doc.text;
  bool sentence_start = true;
  std::string current;
  bool non_ascii = false;
  bool capitalized = false;

  const auto flush = [&] {
    if (current.empty() && !non_ascii) return;
    if (!non_ascii && !(capitalized && !sentence_start)) {
      for (auto& c : current) c = static_cast<char>(c | 0x20);
      ++counts[current];
    }
    current.clear();
    non_ascii = false;
    capitalized = false;
    sentence_start = false;
  };

  std::size_t pos = 0;
  bool in_token = false;
  while (pos < text.size()) {
    const std::size_t at = pos;
    const auto cp = next_code_point(text, pos);
    if (!cp) throw DecodeError(doc.name, "invalid UTF-8 at byte " + std::to_string(at));
    if (is_ascii_alpha(*cp) || is_non_ascii_letter(*cp)) {
      if (!in_token) {
        in_token = true;
        capitalized = is_ascii_alpha(*cp) ? (*cp <= U'Z') : false;
      }
      if (is_ascii_alpha(*cp))
        current.push_back(static_cast<char>(*cp));
      else
        non_ascii = true;
      continue;
    }
    if (in_token) {
      flush();
      in_token = false;
    }
    if (*cp == U'.' || *cp == U'!' || *cp == U'?')
      sentence_start = true;
    else if (!is_space(*cp) && !is_quote(*cp))
      sentence_start = false;
  }
  if (in_token) flush();
}

}  // namespace detail

/// Counts lowercase alphabetic tokens across documents.
///
/// Tokens are maximal letter runs. An occurrence whose first letter is
/// uppercase is dropped as a proper noun unless it opens a sentence (document
/// start, or the previous non-space, non-quote character is `.`, `!` or `?`).
/// Tokens containing non-ASCII letters are dropped. Result is sorted by text.
inline std::vector<Token> tokenize_corpus(std::span<const Document> documents) {
  std::map<std::string, std::uint64_t> counts;
  for (const auto& doc : documents) detail::tokenize_into(doc, counts);
  std::vector<Token> out;
  out.reserve(counts.size());
  for (auto& [text, count] : counts) out.push_back({text, count});
  return out;
}

inline std::vector<Token> tokenize_text(std::string_view text, std::string name = "<text>") {
  const Document doc{std::move(name), std::string(text)};
  return tokenize_corpus(std::span<const Document>(&doc, 1));
}

// Descending count, then lexicographic.
inline bool frequency_order(const Token& a, const Token& b) noexcept {
  if (a.count != b.count) return a.count > b.count;
  return a.text < b.text;
}

using Dictionary = std::set<std::string, std::less<>>;

/// Immutable reference data for list assembly and pseudo-word filtering.
class WordBank {
public:
  WordBank(Dictionary dictionary, std::vector<Token> short_list, std::vector<Token> long_list,
           std::vector<Token> easy_words)
      : dictionary_(std::move(dictionary)),
        short_list_(std::move(short_list)),
        long_list_(std::move(long_list)),
        easy_words_(std::move(easy_words)),
        fourgram_bits_(kFourgramSpace, false) {
    for (const auto& w : dictionary_) {
      if (!is_lower_alpha(w)) throw ContractViolation("dictionary word '" + w + "' is not lowercase alphabetic");
      for (std::size_t i = 0; i + 4 <= w.size(); ++i) {
        if (!fourgram_bits_[encode(std::string_view(w).substr(i, 4))]) {
          fourgram_bits_[encode(std::string_view(w).substr(i, 4))] = true;
          ++fourgram_count_;
        }
      }
    }
    check_list(short_list_, LengthBucket::Short, "short_list");
    check_list(long_list_, LengthBucket::Long, "long_list");
    for (const auto& t : easy_words_) {
      const bool in_short = std::any_of(short_list_.begin(), short_list_.end(),
                                        [&](const Token& s) { return s.text == t.text; });
      if (!in_short) throw ContractViolation("easy word '" + t.text + "' is not in short_list");
    }
  }

  // Dictionary-only bank (no buckets); used when only filtering is needed.
  explicit WordBank(Dictionary dictionary) : WordBank(std::move(dictionary), {}, {}, {}) {}

  const Dictionary& dictionary() const noexcept { return dictionary_; }
  bool contains(std::string_view word) const { return dictionary_.find(word) != dictionary_.end(); }

  const std::vector<Token>& short_list() const noexcept { return short_list_; }
  const std::vector<Token>& long_list() const noexcept { return long_list_; }
  const std::vector<Token>& bucket(LengthBucket b) const noexcept {
    return b == LengthBucket::Short ? short_list_ : long_list_;
  }
  const std::vector<Token>& easy_words() const noexcept { return easy_words_; }

  std::size_t fourgram_count() const noexcept { return fourgram_count_; }

  // Unchecked lookup; fragment must be 4 lowercase letters.
  bool has_fourgram(std::string_view fragment) const { return fourgram_bits_[encode(fragment)]; }

  std::vector<std::string> fourgrams() const {
    std::vector<std::string> out;
    out.reserve(fourgram_count_);
    for (std::size_t code = 0; code < kFourgramSpace; ++code) {
      if (!fourgram_bits_[code]) continue;
      std::string s(4, 'a');
      std::size_t c = code;
      for (int i = 3; i >= 0; --i) {
        s[static_cast<std::size_t>(i)] = static_cast<char>('a' + c % 26);
        c /= 26;
      }
      out.push_back(std::move(s));
    }
    return out;
  }

private:
  static constexpr std::size_t kFourgramSpace = 26 * 26 * 26 * 26;

  static std::size_t encode(std::string_view f) noexcept {
    std::size_t code = 0;
    for (char c : f) code = code * 26 + static_cast<std::size_t>(c - 'a');
    return code;
  }

  void check_list(const std::vector<Token>& list, LengthBucket b, const char* name) const {
    for (std::size_t i = 0; i < list.size(); ++i) {
      const auto& t = list[i];
      if (!bucket_admits(b, t.text.size()))
        throw ContractViolation(std::string(name) + " entry '" + t.text + "' has the wrong length");
      if (!contains(t.text)) throw ContractViolation(std::string(name) + " entry '" + t.text + "' is not in the dictionary");
      if (i > 0 && !frequency_order(list[i - 1], t))
        throw ContractViolation(std::string(name) + " is not in descending-count order at '" + t.text + "'");
    }
  }

  Dictionary dictionary_;
  std::vector<Token> short_list_;
  std::vector<Token> long_list_;
  std::vector<Token> easy_words_;
  std::vector<bool> fourgram_bits_;
  std::size_t fourgram_count_ = 0;
};

inline constexpr std::size_t kDefaultBucketCap = 2000;
inline constexpr std::size_t kDefaultEasyCount = 50;

/// Buckets tokens by length, keeps the `cap` most frequent per bucket and takes
/// the top `easy_count` short words as easy words. Every token enters the dictionary.
inline WordBank build_word_bank(std::span<const Token> tokens, std::size_t cap = kDefaultBucketCap,
                                std::size_t easy_count = kDefaultEasyCount) {
  if (tokens.empty()) throw ContractViolation("build_word_bank: no tokens");
  if (cap == 0) throw ContractViolation("build_word_bank: cap must be positive");
  if (easy_count == 0) throw ContractViolation("build_word_bank: easy_count must be positive");

  std::map<std::string, std::uint64_t, std::less<>> merged;
  for (const auto& t : tokens) {
    if (!is_lower_alpha(t.text)) throw ContractViolation("token '" + t.text + "' is not lowercase alphabetic");
    if (t.count == 0) throw ContractViolation("token '" + t.text + "' has zero count");
    merged[t.text] += t.count;
  }

  Dictionary dictionary;
  std::vector<Token> short_list, long_list;
  for (const auto& [text, count] : merged) {
    dictionary.insert(text);
    if (auto b = bucket_for_length(text.size())) (*b == LengthBucket::Short ? short_list : long_list).push_back({text, count});
  }
  if (short_list.empty()) throw Error("empty Short bucket");
  if (long_list.empty()) throw Error("empty Long bucket");
  for (auto* list : {&short_list, &long_list}) {
    std::sort(list->begin(), list->end(), frequency_order);
    if (list->size() > cap) list->resize(cap);
  }
  std::vector<Token> easy(short_list.begin(),
                          short_list.begin() + static_cast<std::ptrdiff_t>(std::min(easy_count, short_list.size())));
  return WordBank(std::move(dictionary), std::move(short_list), std::move(long_list), std::move(easy));
}

/// True iff the 4-letter fragment occurs contiguously in some dictionary word.
inline bool fourgram_attested(const WordBank& bank, std::string_view fragment) {
  if (fragment.size() != 4 || !is_lower_alpha(fragment))
    throw ContractViolation("fourgram_attested: fragment must be exactly 4 lowercase letters, got '" +
                            std::string(fragment) + "'");
  return bank.has_fourgram(fragment);
}

}  // namespace dysscreen
