#pragma once

// Pseudo-word generation and age-graded assessment list assembly.

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "dysscreen/corpus.hpp"
#include "dysscreen/error.hpp"
#include "dysscreen/rng.hpp"

namespace dysscreen {

/// Character n-gram model over dictionary words.
///
/// Contexts are the previous `order` characters, left-padded with the begin
/// marker; the end marker terminates a word. Any sequence model exposing the
/// same sampling interface can replace it.
class CharModel {
public:
  static constexpr char kBegin = '^';
  static constexpr char kEnd = '$';

  struct Transition {
    char next;
    double probability;
    double cumulative;
  };
  using Table = std::unordered_map<std::string, std::vector<Transition>>;

  CharModel(std::size_t order, std::uint64_t seed, Table table)
      : order_(order), seed_(seed), table_(std::move(table)) {}

  std::size_t order() const noexcept { return order_; }
  std::uint64_t seed() const noexcept { return seed_; }
  std::size_t context_count() const noexcept { return table_.size(); }
  const Table& table() const noexcept { return table_; }

  const std::vector<Transition>* distribution(std::string_view context) const {
    auto it = table_.find(std::string(context));
    return it == table_.end() ? nullptr : &it->second;
  }

  double probability(std::string_view context, char next) const {
    const auto* dist = distribution(context);
    if (!dist) return 0.0;
    for (const auto& t : *dist)
      if (t.next == next) return t.probability;
    return 0.0;
  }

  // Draws one word; nullopt once it grows past max_len.
  std::optional<std::string> sample(Rng& rng, std::size_t max_len) const {
    std::string context(order_, kBegin);
    std::string word;
    for (;;) {
      const auto* dist = distribution(context);
      if (!dist) return std::nullopt;
      const double u = uniform01(rng);
      char next = dist->back().next;
      for (const auto& t : *dist) {
        if (u < t.cumulative) {
          next = t.next;
          break;
        }
      }
      if (next == kEnd) return word;
      word.push_back(next);
      if (word.size() > max_len) return std::nullopt;
      context.erase(0, 1);
      context.push_back(next);
    }
  }

private:
  std::size_t order_;
  std::uint64_t seed_;
  Table table_;
};

inline constexpr std::size_t kDefaultModelOrder = 4;

/// Maximum-likelihood transition estimates from the bank's dictionary.
inline CharModel train_char_model(const WordBank& bank, std::size_t order = kDefaultModelOrder,
                                  std::uint64_t seed = 0) {
  if (order < 1) throw ContractViolation("train_char_model: order must be at least 1");
  if (bank.dictionary().empty()) throw ContractViolation("train_char_model: empty dictionary");

  // std::map keeps per-context successors sorted so sampling is independent of hash order.
  std::unordered_map<std::string, std::map<char, std::uint64_t>> counts;
  for (const auto& word : bank.dictionary()) {
    const std::string padded = std::string(order, CharModel::kBegin) + word + CharModel::kEnd;
    for (std::size_t i = 0; i + order < padded.size(); ++i) ++counts[padded.substr(i, order)][padded[i + order]];
  }

  CharModel::Table table;
  table.reserve(counts.size());
  for (auto& [context, successors] : counts) {
    std::uint64_t total = 0;
    for (const auto& [c, n] : successors) total += n;
    std::vector<CharModel::Transition> dist;
    dist.reserve(successors.size());
    double cumulative = 0.0;
    for (const auto& [c, n] : successors) {
      const double p = static_cast<double>(n) / static_cast<double>(total);
      cumulative += p;
      dist.push_back({c, p, cumulative});
    }
    dist.back().cumulative = 1.0;
    table.emplace(context, std::move(dist));
  }
  return CharModel(order, seed, std::move(table));
}

/// Letters and letter combinations known to be hard for dyslexic readers.
struct DifficultySet {
  std::set<char> letters;
  std::set<std::string> combinations;

  void validate() const {
    if (letters.empty() && combinations.empty()) throw ContractViolation("difficulty set is empty");
    for (char c : letters)
      if (c < 'a' || c > 'z') throw ContractViolation(std::string("difficulty letter '") + c + "' is not lowercase");
    for (const auto& s : combinations)
      if (s.size() < 2 || s.size() > 3 || !is_lower_alpha(s))
        throw ContractViolation("difficulty combination '" + s + "' must be 2-3 lowercase letters");
  }
};

inline DifficultySet default_difficulty() {
  return {{'b', 'd', 'p', 'q'}, {"ie", "ei", "ou", "gh", "th"}};
}

inline bool contains_difficulty(std::string_view word, const DifficultySet& difficulty) {
  for (char c : word)
    if (difficulty.letters.count(c)) return true;
  for (const auto& combo : difficulty.combinations)
    if (word.find(combo) != std::string_view::npos) return true;
  return false;
}

/// All of: not a dictionary word, every 4-gram attested, contains a difficulty
/// letter or combination, length fits the bucket.
inline bool is_admissible_pseudoword(std::string_view candidate, const WordBank& bank,
                                     const DifficultySet& difficulty, LengthBucket bucket) {
  if (!is_lower_alpha(candidate))
    throw ContractViolation("candidate '" + std::string(candidate) + "' is not lowercase alphabetic");
  if (!bucket_admits(bucket, candidate.size()) || candidate.size() < 4) return false;
  if (bank.contains(candidate)) return false;
  for (std::size_t i = 0; i + 4 <= candidate.size(); ++i)
    if (!bank.has_fourgram(candidate.substr(i, 4))) return false;
  return contains_difficulty(candidate, difficulty);
}

/// Samples `n` distinct admissible pseudo-words using an explicit seed.
/// `max_attempts == 0` selects 1000 * n.
inline std::vector<std::string> generate_pseudowords(const CharModel& model, const WordBank& bank,
                                                     const DifficultySet& difficulty, LengthBucket bucket,
                                                     std::size_t n, std::size_t max_attempts,
                                                     std::uint64_t seed) {
  if (n == 0) throw ContractViolation("generate_pseudowords: n must be positive");
  if (max_attempts == 0) max_attempts = 1000 * n;
  Rng rng(seed);
  std::vector<std::string> out;
  std::unordered_set<std::string> seen;
  for (std::size_t attempt = 0; attempt < max_attempts && out.size() < n; ++attempt) {
    auto word = model.sample(rng, max_length(bucket));
    if (!word || word->empty() || !is_admissible_pseudoword(*word, bank, difficulty, bucket)) continue;
    if (seen.insert(*word).second) out.push_back(std::move(*word));
  }
  if (out.size() < n)
    throw ExhaustionError("found only " + std::to_string(out.size()) + " of " + std::to_string(n) + " " +
                              std::string(to_string(bucket)) + " pseudo-words in " + std::to_string(max_attempts) +
                              " attempts",
                          out.size());
  return out;
}

/// Seeded by the model's own seed.
inline std::vector<std::string> generate_pseudowords(const CharModel& model, const WordBank& bank,
                                                     const DifficultySet& difficulty, LengthBucket bucket,
                                                     std::size_t n, std::size_t max_attempts = 0) {
  return generate_pseudowords(model, bank, difficulty, bucket, n, max_attempts,
                              derive_seed(model.seed(), static_cast<std::uint64_t>(bucket)));
}

enum class WordKind { Real, Pseudo, EasyReal };

inline std::string_view to_string(WordKind k) noexcept {
  switch (k) {
    case WordKind::Real: return "real";
    case WordKind::Pseudo: return "pseudo";
    case WordKind::EasyReal: return "easy_real";
  }
  return "real";
}

inline WordKind parse_word_kind(std::string_view s) {
  if (s == "real") return WordKind::Real;
  if (s == "pseudo") return WordKind::Pseudo;
  if (s == "easy_real") return WordKind::EasyReal;
  throw ContractViolation("unknown word kind '" + std::string(s) + "'");
}

// EasyReal counts as real everywhere a real/pseudo split is made.
constexpr bool is_real(WordKind k) noexcept { return k != WordKind::Pseudo; }

struct WordItem {
  std::string text;
  WordKind kind = WordKind::Real;
  LengthBucket bucket = LengthBucket::Short;

  friend bool operator==(const WordItem&, const WordItem&) = default;
};

enum class AgeBand { Band1, Band2, Band3 };

inline std::string_view to_string(AgeBand b) noexcept {
  switch (b) {
    case AgeBand::Band1: return "band1";
    case AgeBand::Band2: return "band2";
    case AgeBand::Band3: return "band3";
  }
  return "band1";
}

inline AgeBand parse_age_band(std::string_view s) {
  if (s == "band1") return AgeBand::Band1;
  if (s == "band2") return AgeBand::Band2;
  if (s == "band3") return AgeBand::Band3;
  throw ContractViolation("unknown age band '" + std::string(s) + "'");
}

inline constexpr int kMinimumAge = 6;

inline AgeBand band_for_age(int age_years) {
  if (age_years < kMinimumAge)
    throw UnsupportedAgeError("unsupported age " + std::to_string(age_years) + ": lists start at age 6");
  if (age_years <= 8) return AgeBand::Band1;
  if (age_years <= 13) return AgeBand::Band2;
  return AgeBand::Band3;
}

// Counts after the two easy words; real/pseudo split is 50/50 within each length block.
struct BandRecipe {
  std::size_t short_real, short_pseudo, long_real, long_pseudo;
};

constexpr BandRecipe recipe_for(AgeBand band) noexcept {
  switch (band) {
    case AgeBand::Band1: return {10, 10, 5, 5};
    case AgeBand::Band2: return {5, 5, 10, 10};
    case AgeBand::Band3: return {0, 0, 15, 15};
  }
  return {0, 0, 0, 0};
}

inline constexpr std::size_t kEasyWordCount = 2;
inline constexpr std::size_t kListLength = 32;

struct WordList {
  std::vector<WordItem> items;
  AgeBand age_band = AgeBand::Band1;
  std::uint64_t seed = 0;

  friend bool operator==(const WordList&, const WordList&) = default;
};

namespace detail {

// Uniform sample of k entries without replacement, skipping excluded texts.
inline std::vector<std::string> sample_tokens(const std::vector<Token>& pool, std::size_t k,
                                              const std::unordered_set<std::string>& excluded, Rng& rng,
                                              std::string_view what) {
  std::vector<const Token*> candidates;
  for (const auto& t : pool)
    if (!excluded.count(t.text)) candidates.push_back(&t);
  if (candidates.size() < k)
    throw ExhaustionError("need " + std::to_string(k) + " " + std::string(what) + " but the bank has only " +
                              std::to_string(candidates.size()),
                          candidates.size());
  std::vector<std::string> out;
  out.reserve(k);
  for (std::size_t i = 0; i < k; ++i) {
    const std::size_t j = i + uniform_index(rng, candidates.size() - i);
    std::swap(candidates[i], candidates[j]);
    out.push_back(candidates[i]->text);
  }
  return out;
}

}  // namespace detail

/// Builds the 32-item list for a reader's age: two easy words, then a shuffled
/// short block and a shuffled long block following the band recipe.
inline WordList assemble_word_list(const WordBank& bank, const CharModel& model, const DifficultySet& difficulty,
                                   int age_years, std::uint64_t seed) {
  const AgeBand band = band_for_age(age_years);
  const BandRecipe recipe = recipe_for(band);
  Rng rng(derive_seed(seed, 0));

  WordList list;
  list.age_band = band;
  list.seed = seed;
  list.items.reserve(kListLength);

  std::unordered_set<std::string> used;
  for (auto& w : detail::sample_tokens(bank.easy_words(), kEasyWordCount, used, rng, "easy words")) {
    used.insert(w);
    list.items.push_back({std::move(w), WordKind::EasyReal, LengthBucket::Short});
  }

  const auto add_block = [&](LengthBucket bucket, std::size_t n_real, std::size_t n_pseudo) {
    if (n_real + n_pseudo == 0) return;
    std::vector<WordItem> block;
    const auto what = std::string(to_string(bucket)) + " real words";
    for (auto& w : detail::sample_tokens(bank.bucket(bucket), n_real, used, rng, what)) {
      used.insert(w);
      block.push_back({std::move(w), WordKind::Real, bucket});
    }
    const auto stream = 1 + static_cast<std::uint64_t>(bucket);
    for (auto& w : generate_pseudowords(model, bank, difficulty, bucket, n_pseudo, 0, derive_seed(seed, stream)))
      block.push_back({std::move(w), WordKind::Pseudo, bucket});
    shuffle(block, rng);
    for (auto& item : block) list.items.push_back(std::move(item));
  };
  add_block(LengthBucket::Short, recipe.short_real, recipe.short_pseudo);
  add_block(LengthBucket::Long, recipe.long_real, recipe.long_pseudo);
  return list;
}

}  // namespace dysscreen
