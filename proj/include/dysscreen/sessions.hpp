#pragma once

// Reading sessions, handwriting rating sheets, their featurization and the
// file formats shared with the assessment front end.

#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <tuple>
#include <vector>

#include "json.hpp"

#include "dysscreen/error.hpp"
#include "dysscreen/wordgen.hpp"

namespace dysscreen {

using json = nlohmann::json;

inline constexpr double kReactionCeilingMs = 60000.0;
inline constexpr std::string_view kSessionSchema = "dys-session/1";
inline constexpr std::string_view kHandwritingSchema = "dys-hand/1";

struct WordRecord {
  WordItem word;
  bool correct = false;
  bool backtrack = false;
  double reaction_ms = 0.0;
  // Set when the recorded time exceeded the ceiling and was clamped to it.
  bool reaction_clamped = false;

  friend bool operator==(const WordRecord&, const WordRecord&) = default;
};

struct ReadingSession {
  std::string session_id;
  int age_years = 0;
  std::uint64_t wordlist_seed = 0;
  std::vector<WordRecord> records;
  std::optional<bool> label;

  friend bool operator==(const ReadingSession&, const ReadingSession&) = default;
};

inline constexpr std::size_t kDyslexiaFeatureCount = 10;
inline constexpr std::size_t kHandwritingFeatureCount = 8;

inline const std::array<std::string, kDyslexiaFeatureCount>& dyslexia_feature_names() {
  static const std::array<std::string, kDyslexiaFeatureCount> names{
      "age_years",      "avg_error",          "avg_backtrack",        "avg_reaction_ms",
      "avg_error_real", "avg_backtrack_real", "avg_reaction_ms_real", "avg_error_pseudo",
      "avg_backtrack_pseudo", "avg_reaction_ms_pseudo"};
  return names;
}

inline const std::array<std::string, kHandwritingFeatureCount>& handwriting_feature_names() {
  static const std::array<std::string, kHandwritingFeatureCount> names{
      "slant",        "pressure",         "amplitude",       "letter_spacing",
      "word_spacing", "slant_regularity", "size_regularity", "horizontal_regularity"};
  return names;
}

// Column indices into DyslexiaFeatures::values.
namespace dyslexia_index {
inline constexpr std::size_t age = 0, error = 1, backtrack = 2, reaction = 3;
inline constexpr std::size_t error_real = 4, backtrack_real = 5, reaction_real = 6;
inline constexpr std::size_t error_pseudo = 7, backtrack_pseudo = 8, reaction_pseudo = 9;
}  // namespace dyslexia_index

struct DyslexiaFeatures {
  std::array<double, kDyslexiaFeatureCount> values{};
};

struct HandwritingSample {
  std::string sample_id;
  std::array<double, kHandwritingFeatureCount> ratings{};
  std::optional<bool> label;

  friend bool operator==(const HandwritingSample&, const HandwritingSample&) = default;
};

/// Averages per-word tags over all words and separately over real
/// (EasyReal included) and pseudo words.
inline DyslexiaFeatures extract_dyslexia_features(const ReadingSession& session) {
  struct Acc {
    double error = 0, backtrack = 0, reaction = 0;
    std::size_t n = 0;
    void add(const WordRecord& r) {
      error += r.correct ? 0.0 : 1.0;
      backtrack += r.backtrack ? 1.0 : 0.0;
      reaction += r.reaction_ms;
      ++n;
    }
  } all, real, pseudo;
  for (const auto& r : session.records) {
    all.add(r);
    (is_real(r.word.kind) ? real : pseudo).add(r);
  }
  if (real.n == 0) throw ContractViolation("session '" + session.session_id + "' has no real-word records");
  if (pseudo.n == 0) throw ContractViolation("session '" + session.session_id + "' has no pseudo-word records");

  DyslexiaFeatures f;
  f.values[dyslexia_index::age] = session.age_years;
  std::size_t col = 1;
  for (const Acc* a : {&all, &real, &pseudo}) {
    const auto n = static_cast<double>(a->n);
    f.values[col++] = a->error / n;
    f.values[col++] = a->backtrack / n;
    f.values[col++] = a->reaction / n;
  }
  return f;
}

// ---------------------------------------------------------------------------
// Word list documents

inline json to_json(const WordItem& item) {
  return {{"text", item.text}, {"kind", to_string(item.kind)}, {"bucket", to_string(item.bucket)}};
}

inline json to_json(const WordList& list) {
  json items = json::array();
  for (const auto& item : list.items) items.push_back(to_json(item));
  return {{"age_band", to_string(list.age_band)}, {"seed", list.seed}, {"items", std::move(items)}};
}

inline WordItem parse_word_item(const json& j) {
  return {j.at("text").get<std::string>(), parse_word_kind(j.at("kind").get<std::string>()),
          parse_bucket(j.at("bucket").get<std::string>())};
}

inline WordList parse_wordlist(const json& j) {
  try {
    WordList list;
    list.age_band = parse_age_band(j.at("age_band").get<std::string>());
    list.seed = j.at("seed").get<std::uint64_t>();
    for (const auto& item : j.at("items")) list.items.push_back(parse_word_item(item));
    return list;
  } catch (const json::exception& e) {
    throw ValidationError({std::string("malformed word list: ") + e.what()});
  }
}

// ---------------------------------------------------------------------------
// Session documents

inline json to_json(const WordRecord& r) {
  json j = to_json(r.word);
  j["correct"] = r.correct;
  j["backtrack"] = r.backtrack;
  j["reaction_ms"] = r.reaction_ms;
  if (r.reaction_clamped) j["reaction_clamped"] = true;
  return j;
}

inline json to_json(const ReadingSession& s) {
  json records = json::array();
  for (const auto& r : s.records) records.push_back(to_json(r));
  json j{{"schema", kSessionSchema},
         {"session_id", s.session_id},
         {"age_years", s.age_years},
         {"wordlist_seed", s.wordlist_seed},
         {"records", std::move(records)}};
  if (s.label) j["label"] = *s.label;
  return j;
}

namespace detail {

template <typename T>
std::optional<T> field(const json& j, const char* key, std::vector<std::string>& errors, const std::string& where) {
  if (!j.is_object() || !j.contains(key)) {
    errors.push_back(where + ": missing field '" + key + "'");
    return std::nullopt;
  }
  const json& v = j.at(key);
  bool ok;
  if constexpr (std::is_same_v<T, bool>)
    ok = v.is_boolean();
  else if constexpr (std::is_same_v<T, std::string>)
    ok = v.is_string();
  else if constexpr (std::is_same_v<T, double>)
    ok = v.is_number();
  else if constexpr (std::is_unsigned_v<T>)
    ok = v.is_number_unsigned() || (v.is_number_integer() && v.get<std::int64_t>() >= 0);
  else
    ok = v.is_number_integer();
  if (!ok) {
    errors.push_back(where + ": field '" + key + "' has the wrong type");
    return std::nullopt;
  }
  return v.get<T>();
}

inline std::optional<bool> optional_label(const json& j, std::vector<std::string>& errors) {
  if (!j.contains("label") || j.at("label").is_null()) return std::nullopt;
  if (!j.at("label").is_boolean()) {
    errors.push_back("field 'label' must be a boolean");
    return std::nullopt;
  }
  return j.at("label").get<bool>();
}

inline void check_schema(const json& j, std::string_view expected, std::vector<std::string>& errors) {
  if (!j.is_object()) {
    errors.push_back("document is not a JSON object");
    return;
  }
  if (!j.contains("schema") || !j.at("schema").is_string() || j.at("schema").get<std::string>() != expected)
    errors.push_back("schema must be \"" + std::string(expected) + "\"");
}

}  // namespace detail

/// Structural validation of a session document: schema tag, field types,
/// 32 records, non-negative reaction times (times past the ceiling are
/// clamped and flagged). Collects every problem before throwing.
inline ReadingSession parse_session(const json& raw) {
  std::vector<std::string> errors;
  detail::check_schema(raw, kSessionSchema, errors);
  if (!raw.is_object()) throw ValidationError(errors);

  ReadingSession s;
  if (auto id = detail::field<std::string>(raw, "session_id", errors, "session")) {
    s.session_id = *id;
    if (s.session_id.empty()) errors.push_back("session: session_id is empty");
  }
  if (auto age = detail::field<int>(raw, "age_years", errors, "session")) {
    s.age_years = *age;
    if (s.age_years < kMinimumAge) errors.push_back("session: age_years " + std::to_string(*age) + " is below 6");
  }
  if (auto seed = detail::field<std::uint64_t>(raw, "wordlist_seed", errors, "session")) s.wordlist_seed = *seed;
  s.label = detail::optional_label(raw, errors);

  if (!raw.contains("records") || !raw.at("records").is_array()) {
    errors.push_back("session: missing records array");
  } else {
    const auto& records = raw.at("records");
    if (records.size() != kListLength)
      errors.push_back("expected 32 records, found " + std::to_string(records.size()));
    for (std::size_t i = 0; i < records.size(); ++i) {
      const auto& r = records[i];
      const std::string where = "record " + std::to_string(i);
      WordRecord rec;
      const auto text = detail::field<std::string>(r, "text", errors, where);
      const auto kind = detail::field<std::string>(r, "kind", errors, where);
      const auto bucket = detail::field<std::string>(r, "bucket", errors, where);
      const auto correct = detail::field<bool>(r, "correct", errors, where);
      const auto backtrack = detail::field<bool>(r, "backtrack", errors, where);
      const auto reaction = detail::field<double>(r, "reaction_ms", errors, where);
      if (!(text && kind && bucket && correct && backtrack && reaction)) continue;
      try {
        rec.word = {*text, parse_word_kind(*kind), parse_bucket(*bucket)};
      } catch (const ContractViolation& e) {
        errors.push_back(where + ": " + e.what());
        continue;
      }
      if (!is_lower_alpha(rec.word.text)) errors.push_back(where + ": text '" + *text + "' is not lowercase alphabetic");
      rec.correct = *correct;
      rec.backtrack = *backtrack;
      rec.reaction_ms = *reaction;
      if (!std::isfinite(rec.reaction_ms) || rec.reaction_ms < 0.0) {
        errors.push_back(where + ": reaction_ms " + r.at("reaction_ms").dump() + " out of range [0, 60000]");
        continue;
      }
      if (rec.reaction_ms > kReactionCeilingMs) {
        rec.reaction_ms = kReactionCeilingMs;
        rec.reaction_clamped = true;
      }
      if (r.contains("reaction_clamped") && r.at("reaction_clamped").is_boolean() && r.at("reaction_clamped").get<bool>())
        rec.reaction_clamped = true;
      s.records.push_back(std::move(rec));
    }
  }
  if (!errors.empty()) throw ValidationError(std::move(errors));
  return s;
}

/// Full validation against the word list the session was recorded with.
inline ReadingSession validate_session(const json& raw, const WordList& wordlist) {
  ReadingSession s = parse_session(raw);
  std::vector<std::string> errors;
  if (s.wordlist_seed != wordlist.seed)
    errors.push_back("wordlist_seed " + std::to_string(s.wordlist_seed) + " does not match list seed " +
                     std::to_string(wordlist.seed));
  if (band_for_age(s.age_years) != wordlist.age_band)
    errors.push_back("age " + std::to_string(s.age_years) + " does not belong to " +
                     std::string(to_string(wordlist.age_band)));

  using Key = std::tuple<std::string, WordKind, LengthBucket>;
  std::map<Key, int> balance;
  for (const auto& item : wordlist.items) ++balance[{item.text, item.kind, item.bucket}];
  for (const auto& r : s.records) --balance[{r.word.text, r.word.kind, r.word.bucket}];
  for (const auto& [key, n] : balance) {
    const auto& [text, kind, bucket] = key;
    const std::string desc = "'" + text + "' (" + std::string(to_string(kind)) + ", " + std::string(to_string(bucket)) + ")";
    if (n > 0) errors.push_back("missing word " + desc);
    if (n < 0) errors.push_back("unexpected word " + desc);
  }
  if (!errors.empty()) throw ValidationError(std::move(errors));
  return s;
}

// ---------------------------------------------------------------------------
// Handwriting documents

inline json to_json(const HandwritingSample& h) {
  json ratings = json::object();
  for (std::size_t i = 0; i < kHandwritingFeatureCount; ++i) ratings[handwriting_feature_names()[i]] = h.ratings[i];
  json j{{"schema", kHandwritingSchema}, {"sample_id", h.sample_id}, {"ratings", std::move(ratings)}};
  if (h.label) j["label"] = *h.label;
  return j;
}

inline HandwritingSample parse_handwriting(const json& raw) {
  std::vector<std::string> errors;
  detail::check_schema(raw, kHandwritingSchema, errors);
  if (!raw.is_object()) throw ValidationError(errors);
  HandwritingSample h;
  if (auto id = detail::field<std::string>(raw, "sample_id", errors, "sample")) {
    h.sample_id = *id;
    if (h.sample_id.empty()) errors.push_back("sample: sample_id is empty");
  }
  h.label = detail::optional_label(raw, errors);
  if (!raw.contains("ratings") || !raw.at("ratings").is_object()) {
    errors.push_back("sample: missing ratings object");
  } else {
    const auto& ratings = raw.at("ratings");
    for (std::size_t i = 0; i < kHandwritingFeatureCount; ++i) {
      const auto& name = handwriting_feature_names()[i];
      if (auto v = detail::field<double>(ratings, name.c_str(), errors, "ratings")) {
        if (!(*v >= 0.0 && *v <= 1.0))
          errors.push_back("rating '" + name + "' = " + ratings.at(name).dump() + " out of range [0, 1]");
        h.ratings[i] = *v;
      }
    }
    for (const auto& [key, value] : ratings.items()) {
      (void)value;
      bool known = false;
      for (const auto& name : handwriting_feature_names()) known = known || name == key;
      if (!known) errors.push_back("unknown rating '" + key + "'");
    }
  }
  if (!errors.empty()) throw ValidationError(std::move(errors));
  return h;
}

// ---------------------------------------------------------------------------
// Tabular datasets

/// Named, versioned feature order. Models refuse data with a different schema.
struct FeatureSchema {
  std::string name;
  int version = 1;
  std::vector<std::string> features;

  friend bool operator==(const FeatureSchema&, const FeatureSchema&) = default;
};

inline FeatureSchema dyslexia_schema() {
  const auto& n = dyslexia_feature_names();
  return {"dyslexia-features", 1, {n.begin(), n.end()}};
}

inline FeatureSchema dysgraphia_schema() {
  const auto& n = handwriting_feature_names();
  return {"dysgraphia-features", 1, {n.begin(), n.end()}};
}

struct LabeledRow {
  std::vector<double> x;
  bool label = false;

  friend bool operator==(const LabeledRow&, const LabeledRow&) = default;
};

struct Dataset {
  FeatureSchema schema;
  std::vector<LabeledRow> rows;

  const std::vector<std::string>& feature_names() const noexcept { return schema.features; }
  std::size_t arity() const noexcept { return schema.features.size(); }
  std::size_t size() const noexcept { return rows.size(); }

  std::size_t count(bool label) const noexcept {
    std::size_t n = 0;
    for (const auto& r : rows) n += r.label == label ? 1 : 0;
    return n;
  }

  std::vector<bool> labels() const {
    std::vector<bool> out;
    out.reserve(rows.size());
    for (const auto& r : rows) out.push_back(r.label);
    return out;
  }

  Dataset subset(std::span<const std::size_t> indices) const {
    Dataset out{schema, {}};
    out.rows.reserve(indices.size());
    for (auto i : indices) out.rows.push_back(rows.at(i));
    return out;
  }

  void validate() const {
    for (std::size_t i = 0; i < rows.size(); ++i) {
      if (rows[i].x.size() != arity())
        throw SchemaError("row " + std::to_string(i) + " has " + std::to_string(rows[i].x.size()) +
                          " values, schema expects " + std::to_string(arity()));
      for (double v : rows[i].x)
        if (!std::isfinite(v)) throw SchemaError("row " + std::to_string(i) + " contains a non-finite value");
    }
  }

  friend bool operator==(const Dataset&, const Dataset&) = default;
};

inline Dataset to_dataset(std::span<const ReadingSession> sessions) {
  Dataset data{dyslexia_schema(), {}};
  for (const auto& s : sessions) {
    if (!s.label) throw ValidationError({"session '" + s.session_id + "' has no label"});
    const auto f = extract_dyslexia_features(s);
    data.rows.push_back({{f.values.begin(), f.values.end()}, *s.label});
  }
  return data;
}

inline Dataset to_dataset(std::span<const HandwritingSample> samples) {
  Dataset data{dysgraphia_schema(), {}};
  for (const auto& h : samples) {
    if (!h.label) throw ValidationError({"sample '" + h.sample_id + "' has no label"});
    data.rows.push_back({{h.ratings.begin(), h.ratings.end()}, *h.label});
  }
  return data;
}

namespace detail {

inline std::string format_number(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream in(line);
  while (std::getline(in, cell, ',')) {
    while (!cell.empty() && (cell.back() == '\r' || cell.back() == ' ')) cell.pop_back();
    while (!cell.empty() && cell.front() == ' ') cell.erase(0, 1);
    out.push_back(cell);
  }
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

}  // namespace detail

/// CSV with a header row; label column last, written as 1/0.
inline void write_csv(const Dataset& data, std::ostream& out) {
  for (const auto& name : data.feature_names()) out << name << ',';
  out << "label\n";
  for (const auto& row : data.rows) {
    for (double v : row.x) out << detail::format_number(v) << ',';
    out << (row.label ? '1' : '0') << '\n';
  }
}

/// Reads the CSV export. A header matching a known feature list adopts that
/// schema; any other header becomes a "custom" schema.
inline Dataset read_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw SchemaError("CSV is empty");
  auto header = detail::split_csv_line(line);
  if (header.size() < 2 || header.back() != "label") throw SchemaError("CSV header must end with a 'label' column");
  header.pop_back();

  Dataset data;
  if (header == dyslexia_schema().features)
    data.schema = dyslexia_schema();
  else if (header == dysgraphia_schema().features)
    data.schema = dysgraphia_schema();
  else
    data.schema = {"custom", 1, header};

  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    const auto cells = detail::split_csv_line(line);
    if (cells.size() != header.size() + 1)
      throw SchemaError("CSV line " + std::to_string(line_no) + ": expected " + std::to_string(header.size() + 1) +
                        " cells, found " + std::to_string(cells.size()));
    LabeledRow row;
    for (std::size_t i = 0; i < header.size(); ++i) {
      try {
        std::size_t used = 0;
        row.x.push_back(std::stod(cells[i], &used));
        if (used != cells[i].size()) throw std::invalid_argument(cells[i]);
      } catch (const std::exception&) {
        throw SchemaError("CSV line " + std::to_string(line_no) + ": '" + cells[i] + "' is not a number");
      }
    }
    if (cells.back() == "1")
      row.label = true;
    else if (cells.back() == "0")
      row.label = false;
    else
      throw SchemaError("CSV line " + std::to_string(line_no) + ": label must be 1 or 0");
    data.rows.push_back(std::move(row));
  }
  data.validate();
  return data;
}

}  // namespace dysscreen
