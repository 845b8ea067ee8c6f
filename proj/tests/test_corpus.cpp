#include <catch2/catch_amalgamated.hpp>

#include <map>
#include <random>
#include <string>
#include <vector>

#include "dysscreen/corpus.hpp"
#include "dysscreen/io.hpp"
#include "fixtures.hpp"
#include "oracles.hpp"

using namespace dysscreen;
using fixture::sample_bank;

namespace {

std::map<std::string, std::uint64_t> as_map(const std::vector<Token>& tokens) {
  std::map<std::string, std::uint64_t> m;
  for (const auto& t : tokens) m[t.text] = t.count;
  return m;
}

}  // namespace

TEST_CASE("tokenizer drops mid-sentence capitalized words", "[corpus]") {
  const auto m = as_map(tokenize_text("The cat saw Paris. The cat slept."));
  const std::map<std::string, std::uint64_t> expected{{"the", 2}, {"cat", 2}, {"saw", 1}, {"slept", 1}};
  CHECK(m == expected);
}

TEST_CASE("tokenizer on empty input", "[corpus]") { CHECK(tokenize_text("").empty()); }

TEST_CASE("tokenizer drops a shouted word mid-sentence", "[corpus]") {
  const auto m = as_map(tokenize_text("dog dog DOG."));
  CHECK(m == std::map<std::string, std::uint64_t>{{"dog", 2}});
}

TEST_CASE("sentence starts skip whitespace and quotes", "[corpus]") {
  const auto m = as_map(tokenize_text("He waited. \"Wait,\" she said; Then left! 'Now' \xE2\x80\x9CGo\xE2\x80\x9D"));
  CHECK(m.count("he") == 1);
  CHECK(m.count("wait") == 1);
  CHECK(m.count("then") == 0);
  CHECK(m.count("now") == 1);
  CHECK(m.count("go") == 0);  // after 'Now' and a closing quote, not a sentence start
}

TEST_CASE("hyphens, apostrophes and digits split tokens", "[corpus]") {
  const auto m = as_map(tokenize_text("well-known don't abc123def"));
  const std::map<std::string, std::uint64_t> expected{{"well", 1}, {"known", 1}, {"don", 1}, {"t", 1}, {"abc", 1}, {"def", 1}};
  CHECK(m == expected);
}

TEST_CASE("tokens with non-ASCII letters are dropped", "[corpus]") {
  const auto m = as_map(tokenize_text("caf\xC3\xA9 au lait na\xC3\xAFve tea"));
  CHECK(m == std::map<std::string, std::uint64_t>{{"au", 1}, {"lait", 1}, {"tea", 1}});
}

TEST_CASE("undecodable bytes reject the document by name", "[corpus]") {
  const std::vector<Document> docs{{"good.txt", "fine words"}, {"bad.txt", "broken \xFF bytes"}};
  try {
    tokenize_corpus(docs);
    FAIL("expected DecodeError");
  } catch (const DecodeError& e) {
    CHECK(e.document() == "bad.txt");
    CHECK(std::string(e.what()).find("bad.txt") != std::string::npos);
  }
  CHECK_THROWS_AS(tokenize_text("truncated \xE2\x80"), DecodeError);
  CHECK_THROWS_AS(tokenize_text("overlong \xC0\xAF"), DecodeError);
}

TEST_CASE("tokenizing concatenated documents equals merging per-document counts", "[corpus][property]") {
  const std::vector<std::string> pool{"the", "Cat", "house", "Paris", "ran", "quickly", "away", "Dog", "river", "it's"};
  const std::vector<std::string> ends{".", "!", "?"};
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<Document> docs;
    for (int d = 0; d < 3; ++d) {
      std::string text;
      const int words = 1 + static_cast<int>(rng() % 12);
      for (int w = 0; w < words; ++w) {
        text += pool[rng() % pool.size()];
        text += rng() % 4 == 0 ? ends[rng() % ends.size()] + " " : std::string(" ");
      }
      text += ends[rng() % ends.size()];
      docs.push_back({"d" + std::to_string(d), text});
    }
    std::map<std::string, std::uint64_t> merged;
    std::string concatenated;
    for (const auto& d : docs) {
      for (const auto& t : tokenize_text(d.text)) merged[t.text] += t.count;
      concatenated += d.text + "\n";
    }
    CHECK(as_map(tokenize_text(concatenated)) == merged);
    CHECK(as_map(tokenize_corpus(docs)) == merged);
    std::vector<Document> reversed(docs.rbegin(), docs.rend());
    CHECK(tokenize_corpus(reversed) == tokenize_corpus(docs));
  }
}

TEST_CASE("word bank buckets by length and frequency", "[corpus]") {
  const std::vector<Token> tokens{{"the", 10}, {"because", 5}, {"cat", 9}, {"house", 7}, {"elephant", 3}};
  const auto bank = build_word_bank(tokens, 2000);
  CHECK(bank.short_list() == std::vector<Token>{{"house", 7}});
  CHECK(bank.long_list() == std::vector<Token>{{"because", 5}, {"elephant", 3}});
  CHECK(bank.contains("the"));
  CHECK(bank.contains("cat"));
  CHECK(bank.dictionary().size() == 5);
  CHECK(bank.easy_words() == std::vector<Token>{{"house", 7}});

  const auto capped = build_word_bank(tokens, 1);
  CHECK(capped.short_list() == std::vector<Token>{{"house", 7}});
  CHECK(capped.long_list() == std::vector<Token>{{"because", 5}});
}

TEST_CASE("word bank ties break lexicographically", "[corpus]") {
  const std::vector<Token> tokens{{"zebra", 4}, {"apple", 4}, {"mango", 9}, {"pelican", 1}};
  const auto bank = build_word_bank(tokens, 10, 2);
  CHECK(bank.short_list() == std::vector<Token>{{"mango", 9}, {"apple", 4}, {"zebra", 4}});
  CHECK(bank.easy_words() == std::vector<Token>{{"mango", 9}, {"apple", 4}});
}

TEST_CASE("word bank errors name the empty bucket", "[corpus]") {
  const std::vector<Token> no_long{{"house", 3}, {"cat", 2}};
  CHECK_THROWS_WITH(build_word_bank(no_long), "empty Long bucket");
  const std::vector<Token> no_short{{"elephant", 3}};
  CHECK_THROWS_WITH(build_word_bank(no_short), "empty Short bucket");
  CHECK_THROWS_AS(build_word_bank(std::vector<Token>{}), ContractViolation);
  CHECK_THROWS_AS(build_word_bank(no_long, 0), ContractViolation);
}

TEST_CASE("fourgram attestation", "[corpus]") {
  const WordBank bank(Dictionary{"blatant"});
  CHECK(fourgram_attested(bank, "blat"));
  CHECK(fourgram_attested(bank, "atan"));
  CHECK(fourgram_attested(bank, "tant"));
  CHECK_FALSE(fourgram_attested(bank, "zxqv"));
  CHECK(bank.fourgram_count() == 4);
  CHECK_THROWS_AS(fourgram_attested(bank, "bla"), ContractViolation);
  CHECK_THROWS_AS(fourgram_attested(bank, "blata"), ContractViolation);
  CHECK_THROWS_AS(fourgram_attested(bank, "BLAT"), ContractViolation);
}

TEST_CASE("sample corpus bank invariants", "[corpus][property]") {
  const auto& bank = sample_bank();
  REQUIRE(!bank.short_list().empty());
  REQUIRE(!bank.long_list().empty());
  for (auto b : {LengthBucket::Short, LengthBucket::Long}) {
    const auto& list = bank.bucket(b);
    CHECK(list.size() <= kDefaultBucketCap);
    for (std::size_t i = 0; i < list.size(); ++i) {
      CHECK(bucket_admits(b, list[i].text.size()));
      CHECK(bank.contains(list[i].text));
      if (i > 0) CHECK(frequency_order(list[i - 1], list[i]));
    }
  }
  for (const auto& e : bank.easy_words()) {
    const auto& s = bank.short_list();
    CHECK(std::find(s.begin(), s.end(), e) != s.end());
  }
  // Every 4-gram of every dictionary word is attested, and nothing else is.
  std::set<std::string> expected;
  for (const auto& w : bank.dictionary())
    for (std::size_t i = 0; i + 4 <= w.size(); ++i) {
      expected.insert(w.substr(i, 4));
      CHECK(fourgram_attested(bank, w.substr(i, 4)));
    }
  const auto listed = bank.fourgrams();
  CHECK(std::set<std::string>(listed.begin(), listed.end()) == expected);
}

TEST_CASE("word bank JSON omits fourgrams and rebuilds them on load", "[corpus][io]") {
  const auto& bank = sample_bank();
  const json j = to_json(bank);
  CHECK_FALSE(j.contains("fourgrams"));
  const WordBank loaded = parse_word_bank(json::parse(j.dump()));
  CHECK(loaded.dictionary() == bank.dictionary());
  CHECK(loaded.short_list() == bank.short_list());
  CHECK(loaded.long_list() == bank.long_list());
  CHECK(loaded.easy_words() == bank.easy_words());
  CHECK(loaded.fourgram_count() == bank.fourgram_count());

  json broken = j;
  broken["short_list"].push_back({{"word", "notinthedictionary"}, {"count", 1}});
  CHECK_THROWS_AS(parse_word_bank(broken), ValidationError);
}
