#pragma once

/**
 * Syntactic text features and the per-(prompt, response) feature table.
 *
 * The tokenization contract is fully self-contained so golden values stay
 * reproducible:
 *  - a token is a maximal non-whitespace run of the raw text;
 *  - a word is a token with leading/trailing punctuation stripped, kept only
 *    if non-empty; words are lowercased for uniqueness, stopword, and
 *    lexicon checks;
 *  - the punctuation set is . , ; : ! ? " ' ( ) [ ] { } < > - * # ` plus the
 *    em dash; the punctuation count covers every occurrence anywhere in the
 *    raw text (the em dash counts as one);
 *  - a list item is a line whose first non-blank characters are "-", "*", a
 *    bullet dot, or digits followed by "." or ")";
 *  - a word counts as adjective/adverb when it ends in "ly" (length > 2) or
 *    appears in the embedded adjective lexicon; each occurrence counts once.
 *
 * Word lengths are measured in bytes of the UTF-8 encoding. Externally
 * computed feature columns (e.g. tagger-based POS counts or semantic
 * classifier scores) enter through the same FeatureTable via CSV ingest and
 * simply replace the built-in columns for downstream consumers.
 */

#include <cmath>
#include <cstddef>
#include <fstream>
#include <map>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

#include "prefsim/corpus.hpp"
#include "prefsim/jsonl.hpp"

namespace prefsim {

inline const std::vector<std::string>& stopword_list() {
  static const std::vector<std::string> words = {
      // clang-format off
      "a", "about", "above", "after", "again", "against", "all", "am", "an", "and",
      "any", "are", "as", "at", "be", "because", "been", "before", "being", "below",
      "between", "both", "but", "by", "can", "could", "did", "do", "does", "doing",
      "down", "during", "each", "few", "for", "from", "further", "had", "has", "have",
      "having", "he", "her", "here", "hers", "herself", "him", "himself", "his", "how",
      "i", "if", "in", "into", "is", "it", "its", "itself", "just", "me",
      "more", "most", "my", "myself", "no", "nor", "not", "now", "of", "off",
      "on", "once", "only", "or", "other", "our", "ours", "ourselves", "out", "over",
      "own", "same", "shall", "she", "should", "so", "some", "such", "than", "that",
      "the", "their", "theirs", "them", "themselves", "then", "there", "these", "they", "this",
      "those", "through", "to", "too", "under", "until", "up", "very", "was", "we",
      "were", "what", "when", "where", "which", "while", "who", "whom", "why", "will",
      "with", "would", "you", "your", "yours", "yourself", "yourselves",
      // clang-format on
  };
  return words;
}

inline const std::vector<std::string>& adjective_lexicon() {
  static const std::vector<std::string> words = {
      // clang-format off
      "able", "abstract", "accurate", "active", "actual", "additional", "adequate", "advanced",
      "afraid", "aggressive", "alert", "alive", "amazing", "ambitious", "ancient", "angry",
      "annual", "anonymous", "anxious", "apparent", "appropriate", "artificial", "attractive", "automatic",
      "available", "average", "aware", "awful", "awkward", "bad", "bare", "basic",
      "beautiful", "big", "bitter", "blank", "blind", "blue", "bold", "boring",
      "brave", "brief", "bright", "brilliant", "broad", "broken", "brown", "busy",
      "calm", "capable", "careful", "careless", "casual", "cautious", "central", "certain",
      "cheap", "chief", "chronic", "civil", "classic", "clean", "clear", "clever",
      "close", "cloudy", "coarse", "cold", "colorful", "comfortable", "common", "compact",
      "competent", "competitive", "complete", "complex", "complicated", "concrete", "confident", "conscious",
      "consistent", "constant", "contemporary", "continuous", "convenient", "conventional", "cool", "correct",
      "costly", "cozy", "crazy", "creative", "critical", "crucial", "crude", "cruel",
      "curious", "current", "cute", "daily", "damp", "dangerous", "dark", "dead",
      "deaf", "dear", "decent", "deep", "delicate", "delicious", "dense", "desperate",
      "different", "difficult", "digital", "direct", "dirty", "distant", "distinct", "diverse",
      "divine", "domestic", "double", "dramatic", "dry", "dull", "dumb", "durable",
      "dynamic", "eager", "early", "easy", "economic", "effective", "efficient", "elderly",
      "electric", "elegant", "emotional", "empty", "endless", "enormous", "entire", "equal",
      "essential", "eternal", "ethical", "even", "exact", "excellent", "exceptional", "excessive",
      "excited", "exciting", "exotic", "expensive", "explicit", "external", "extra", "extraordinary",
      "extreme", "fair", "faithful", "false", "familiar", "famous", "fancy", "fast",
      "fat", "favorite", "female", "fierce", "final", "fine", "firm", "fit",
      "flat", "flexible", "fluid", "foolish", "foreign", "formal", "free", "frequent",
      "fresh", "friendly", "frozen", "full", "fun", "funny", "future", "general",
      "generous", "gentle", "genuine", "giant", "glad", "global", "golden", "good",
      "gorgeous", "gradual", "grand", "grateful", "gray", "great", "green", "grim",
      "gross", "guilty", "handsome", "happy", "hard", "harmful", "healthy", "heavy",
      "helpful", "helpless", "hidden", "high", "historic", "hollow", "honest", "horrible",
      "hot", "huge", "human", "humble", "hungry", "icy", "ideal", "identical",
      "ill", "illegal", "immediate", "important", "impossible", "impressive", "incredible", "independent",
      "indirect", "individual", "industrial", "inevitable", "infinite", "informal", "initial", "innovative",
      "intellectual", "intelligent", "intense", "interesting", "internal", "invisible", "joint", "junior",
      "kind", "large", "late", "lazy", "legal", "legitimate", "level", "light",
      "likely", "limited", "liquid", "little", "living", "local", "logical", "lonely",
      "long", "loose", "loud", "lovely", "low", "loyal", "lucky", "mad",
      "magic", "magnificent", "main", "major", "male", "manual", "massive", "mature",
      "maximum", "mean", "mechanical", "medical", "medium", "mental", "middle", "military",
      "minimal", "minor", "mobile", "moderate", "modern", "moral", "mysterious", "narrow",
      "national", "native", "natural", "near", "nearby", "neat", "necessary", "negative",
      "nervous", "neutral", "new", "nice", "noisy", "normal", "obvious", "odd",
      "official", "old", "open", "opposite", "optimistic", "ordinary", "organic", "original",
      "outstanding", "overall", "painful", "parallel", "particular", "past", "patient", "peaceful",
      "perfect", "permanent", "personal", "physical", "pleasant", "political", "poor", "popular",
      "positive", "possible", "powerful", "practical", "precise", "pretty", "previous", "primary",
      "private", "productive", "professional", "proud", "public", "pure", "quick", "quiet",
      "random", "rapid", "rare", "raw", "ready", "real", "realistic", "reasonable",
      "recent", "red", "regular", "relative", "relevant", "reliable", "religious", "remarkable",
      "remote", "responsible", "rich", "ridiculous", "rigid", "rough", "round", "sad",
      "safe", "scientific", "secret", "secure", "senior", "sensible", "sensitive", "separate",
      "serious", "severe", "sharp", "short", "shy", "sick", "significant", "silent",
      "silly", "silver", "similar", "simple", "single", "skilled", "slight", "slow",
      "small", "smart", "smooth", "social", "soft", "solar", "solid", "sorry",
      "sound", "special", "specific", "spectacular", "stable", "standard", "steady", "still",
      "straight", "strange", "strict", "strong", "stupid", "successful", "sudden", "sufficient",
      "suitable", "sunny", "super", "superior", "sure", "sweet", "systematic", "tall",
      "technical", "temporary", "terrible", "thick", "thin", "tight", "tiny", "tired",
      "top", "total", "tough", "toxic", "traditional", "tremendous", "true", "typical",
      "ugly", "ultimate", "unable", "uncertain", "uncomfortable", "unexpected", "unfair", "uniform",
      "unique", "universal", "unknown", "unlikely", "unusual", "upper", "upset", "urban",
      "urgent", "useful", "useless", "usual", "valid", "valuable", "vast", "vertical",
      "violent", "visible", "visual", "vital", "vulnerable", "warm", "weak", "wealthy",
      "weird", "wet", "white", "whole", "wide", "wild", "willing", "wise",
      "wonderful", "wrong", "yellow", "young",
      // clang-format on
  };
  return words;
}

inline const std::vector<std::string>& syntactic_feature_names() {
  static const std::vector<std::string> names = {
      "token_count",       "unique_word_count", "avg_word_length",
      "stopword_count",    "punctuation_count", "list_item_count",
      "adjective_adverb_count"};
  return names;
}

namespace text_detail {

inline bool is_blank(char c) { return c == ' ' || c == '\t'; }

inline bool is_space(char c) {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' ||
         c == '\v';
}

inline bool is_ascii_punct(char c) {
  static const std::string set = ".,;:!?\"'()[]{}<>-*#`";
  return set.find(c) != std::string::npos;
}

constexpr const char* kEmDash = "\xe2\x80\x94";
constexpr const char* kBullet = "\xe2\x80\xa2";

inline bool starts_with_at(const std::string& s, std::size_t pos,
                           const char* seq) {
  return s.compare(pos, 3, seq, 3) == 0;
}

inline std::string lower_ascii(std::string s) {
  for (char& c : s)
    if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
  return s;
}

// Strips punctuation-set characters (including em dashes) from both ends.
inline std::string strip_token(const std::string& tok) {
  std::size_t begin = 0, end = tok.size();
  for (;;) {
    if (begin < end && is_ascii_punct(tok[begin])) {
      ++begin;
    } else if (begin + 3 <= end && starts_with_at(tok, begin, kEmDash)) {
      begin += 3;
    } else {
      break;
    }
  }
  for (;;) {
    if (end > begin && is_ascii_punct(tok[end - 1])) {
      --end;
    } else if (end >= begin + 3 && starts_with_at(tok, end - 3, kEmDash)) {
      end -= 3;
    } else {
      break;
    }
  }
  return tok.substr(begin, end - begin);
}

inline const std::unordered_set<std::string>& stopword_set() {
  static const std::unordered_set<std::string> set(stopword_list().begin(),
                                                   stopword_list().end());
  return set;
}

inline const std::unordered_set<std::string>& adjective_set() {
  static const std::unordered_set<std::string> set(adjective_lexicon().begin(),
                                                   adjective_lexicon().end());
  return set;
}

inline bool is_list_item_line(const std::string& line) {
  std::size_t i = 0;
  while (i < line.size() && is_blank(line[i])) ++i;
  if (i >= line.size()) return false;
  if (line[i] == '-' || line[i] == '*') return true;
  if (i + 3 <= line.size() && starts_with_at(line, i, kBullet)) return true;
  std::size_t digits = 0;
  while (i + digits < line.size() && line[i + digits] >= '0' &&
         line[i + digits] <= '9')
    ++digits;
  if (digits == 0) return false;
  std::size_t after = i + digits;
  return after < line.size() && (line[after] == '.' || line[after] == ')');
}

}  // namespace text_detail

// token count, unique word count, average word length, stopword count,
// punctuation count, list-item count, adjective+adverb count
inline std::vector<double> extract_syntactic_features(const std::string& text) {
  using namespace text_detail;

  std::size_t token_count = 0;
  std::size_t stopword_count = 0;
  std::size_t adj_adv_count = 0;
  std::size_t word_count = 0;
  std::size_t word_bytes = 0;
  std::unordered_set<std::string> unique_words;

  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && is_space(text[i])) ++i;
    if (i >= text.size()) break;
    std::size_t start = i;
    while (i < text.size() && !is_space(text[i])) ++i;
    ++token_count;
    std::string word = strip_token(text.substr(start, i - start));
    if (word.empty()) continue;
    ++word_count;
    word_bytes += word.size();
    std::string folded = lower_ascii(word);
    unique_words.insert(folded);
    if (stopword_set().count(folded)) ++stopword_count;
    bool ly = folded.size() > 2 &&
              folded.compare(folded.size() - 2, 2, "ly") == 0;
    if (ly || adjective_set().count(folded)) ++adj_adv_count;
  }

  std::size_t punct_count = 0;
  for (std::size_t p = 0; p < text.size();) {
    if (p + 3 <= text.size() && starts_with_at(text, p, kEmDash)) {
      ++punct_count;
      p += 3;
    } else {
      if (is_ascii_punct(text[p])) ++punct_count;
      ++p;
    }
  }

  std::size_t list_items = 0;
  std::size_t line_start = 0;
  for (std::size_t p = 0; p <= text.size(); ++p) {
    if (p == text.size() || text[p] == '\n') {
      if (is_list_item_line(text.substr(line_start, p - line_start)))
        ++list_items;
      line_start = p + 1;
    }
  }

  double avg_len = word_count == 0
                       ? 0.0
                       : static_cast<double>(word_bytes) /
                             static_cast<double>(word_count);
  return {static_cast<double>(token_count),
          static_cast<double>(unique_words.size()),
          avg_len,
          static_cast<double>(stopword_count),
          static_cast<double>(punct_count),
          static_cast<double>(list_items),
          static_cast<double>(adj_adv_count)};
}

struct FeatureTable {
  std::string kind;  // "syntactic" or a label for ingested columns
  std::vector<std::string> names;
  // ordered by (prompt_id, model_id) for deterministic output
  std::map<std::pair<std::string, std::string>, std::vector<double>> rows;

  void insert(const std::string& prompt_id, const std::string& model_id,
              std::vector<double> values) {
    require(values.size() == names.size(), "feature table: row (\"",
            prompt_id, "\", \"", model_id, "\") has ", values.size(),
            " values, expected ", names.size());
    for (double v : values)
      require(std::isfinite(v), "feature table: non-finite value for (\"",
              prompt_id, "\", \"", model_id, "\")");
    auto [it, inserted] = rows.emplace(std::make_pair(prompt_id, model_id),
                                       std::move(values));
    (void)it;
    require(inserted, "feature table: duplicate row (\"", prompt_id, "\", \"",
            model_id, "\")");
  }

  const std::vector<double>& at(const std::string& prompt_id,
                                const std::string& model_id) const {
    auto it = rows.find(std::make_pair(prompt_id, model_id));
    require(it != rows.end(), "feature table: no row for (\"", prompt_id,
            "\", \"", model_id, "\")");
    return it->second;
  }

  bool contains(const std::string& prompt_id,
                const std::string& model_id) const {
    return rows.count(std::make_pair(prompt_id, model_id)) != 0;
  }
};

inline FeatureTable compute_syntactic_features(const ScoredCorpus& corpus) {
  FeatureTable table;
  table.kind = "syntactic";
  table.names = syntactic_feature_names();
  for (std::size_t i = 0; i < corpus.n_prompts(); ++i)
    for (std::size_t l = 0; l < corpus.l_count(); ++l)
      table.insert(corpus.prompts[i].prompt_id, corpus.response_models[l],
                   extract_syntactic_features(corpus.responses[i][l]));
  return table;
}

// features.csv: "prompt_id,model_id,<name>,..." then one row per response.
inline void save_features_csv(const std::string& path,
                              const FeatureTable& table) {
  std::ofstream out(path, std::ios::binary);
  require(out.good(), "cannot open ", path, " for writing");
  out << "prompt_id,model_id";
  for (const auto& n : table.names) {
    require(n.find(',') == std::string::npos && n.find('\n') == std::string::npos,
            "feature name \"", n, "\" cannot be written to CSV");
    out << "," << n;
  }
  out << "\n";
  for (const auto& [key, values] : table.rows) {
    require(key.first.find(',') == std::string::npos &&
                key.second.find(',') == std::string::npos,
            "ids with commas cannot be written to CSV: \"", key.first,
            "\", \"", key.second, "\"");
    out << key.first << "," << key.second;
    for (double v : values) out << "," << format_double(v);
    out << "\n";
  }
  require(out.good(), "write failed: ", path);
}

inline FeatureTable load_features_csv(const std::string& path,
                                      const std::string& kind = "ingested") {
  std::ifstream in(path);
  require(in.good(), "cannot open ", path);
  FeatureTable table;
  table.kind = kind;

  auto split = [](const std::string& line) {
    std::vector<std::string> fields;
    std::size_t start = 0;
    for (;;) {
      std::size_t comma = line.find(',', start);
      if (comma == std::string::npos) {
        fields.push_back(line.substr(start));
        break;
      }
      fields.push_back(line.substr(start, comma - start));
      start = comma + 1;
    }
    return fields;
  };

  std::string line;
  require(static_cast<bool>(std::getline(in, line)), path, ": empty file");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  auto header = split(line);
  require(header.size() >= 3 && header[0] == "prompt_id" &&
              header[1] == "model_id",
          path, ": header must start with \"prompt_id,model_id\" and name at "
          "least one feature");
  table.names.assign(header.begin() + 2, header.end());

  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto fields = split(line);
    require(fields.size() == header.size(), path, ":", lineno, ": expected ",
            header.size(), " fields, got ", fields.size());
    std::vector<double> values;
    values.reserve(fields.size() - 2);
    for (std::size_t f = 2; f < fields.size(); ++f)
      values.push_back(parse_double(
          fields[f], cat(path, ":", lineno, " column ", table.names[f - 2])));
    table.insert(fields[0], fields[1], std::move(values));
  }
  require(!table.rows.empty(), path, ": no feature rows");
  return table;
}

}  // namespace prefsim
