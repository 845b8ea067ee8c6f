#pragma once

// Shared test inputs built once per process.

#include <string>

#include "dysscreen/io.hpp"
#include "dysscreen/sessions.hpp"
#include "dysscreen/wordgen.hpp"

namespace fixture {

inline const dysscreen::WordBank& sample_bank() {
  static const dysscreen::WordBank bank =
      dysscreen::build_word_bank(dysscreen::tokenize_corpus(dysscreen::load_corpus_dir(DYSSCREEN_SAMPLE_CORPUS)));
  return bank;
}

inline const dysscreen::CharModel& sample_model() {
  static const dysscreen::CharModel model = dysscreen::train_char_model(sample_bank(), dysscreen::kDefaultModelOrder, 2024);
  return model;
}

// A session over `list` where every record carries the same tags.
inline dysscreen::ReadingSession uniform_session(const dysscreen::WordList& list, int age, bool correct, bool backtrack,
                                                 double reaction_ms, std::string id = "s1") {
  dysscreen::ReadingSession s;
  s.session_id = std::move(id);
  s.age_years = age;
  s.wordlist_seed = list.seed;
  for (const auto& item : list.items) s.records.push_back({item, correct, backtrack, reaction_ms, false});
  return s;
}

}  // namespace fixture
