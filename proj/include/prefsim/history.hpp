#pragma once

/**
 * Interaction histories: per-user (prompt, winner, loser) triplets and the
 * test cases built from them. Triplets reference responses by generator
 * model id, matching the on-disk format; rewards are the generating
 * persona's ensemble scores at build time.
 */

#include <cmath>
#include <cstddef>
#include <string>
#include <unordered_set>
#include <vector>

#include "prefsim/corpus.hpp"
#include "prefsim/jsonl.hpp"
#include "prefsim/persona.hpp"

namespace prefsim {

struct InteractionTriplet {
  std::string prompt_id;
  std::string winner_model;
  std::string loser_model;
  double winner_reward = 0.0;
  double loser_reward = 0.0;
};

struct UserHistory {
  std::string persona_id;
  std::vector<InteractionTriplet> triplets;
};

struct TestCase {
  Persona persona;
  std::string test_prompt_id;
  UserHistory history;
  std::string history_kind;  // "relevant" | "random"

  const std::string& id() const { return persona.persona_id; }
};

namespace history_detail {

inline void validate_history(const UserHistory& h, const ScoredCorpus& corpus,
                             const std::string& where) {
  std::unordered_set<std::string> seen;
  for (const auto& t : h.triplets) {
    require(corpus.has_prompt(t.prompt_id), where, ": unknown prompt_id \"",
            t.prompt_id, "\"");
    corpus.response_model_index(t.winner_model);
    corpus.response_model_index(t.loser_model);
    require(seen.insert(t.prompt_id).second, where,
            ": prompt \"", t.prompt_id, "\" appears twice in history of \"",
            h.persona_id, "\"");
    require(std::isfinite(t.winner_reward) && std::isfinite(t.loser_reward),
            where, ": non-finite reward in history of \"", h.persona_id,
            "\"");
    require(t.winner_reward >= t.loser_reward, where,
            ": winner reward below loser reward for (\"", h.persona_id,
            "\", \"", t.prompt_id, "\")");
    if (corpus.l_count() >= 2)
      require(t.winner_model != t.loser_model, where,
              ": winner and loser are the same response for (\"",
              h.persona_id, "\", \"", t.prompt_id, "\")");
  }
}

inline json triplet_to_json(const InteractionTriplet& t) {
  json j;
  j["prompt_id"] = t.prompt_id;
  j["winner_model"] = t.winner_model;
  j["loser_model"] = t.loser_model;
  j["winner_reward"] = t.winner_reward;
  j["loser_reward"] = t.loser_reward;
  return j;
}

inline InteractionTriplet triplet_from_json(const json& j,
                                            const std::string& where) {
  InteractionTriplet t;
  t.prompt_id = jsonl::get_string(j, "prompt_id", where);
  t.winner_model = jsonl::get_string(j, "winner_model", where);
  t.loser_model = jsonl::get_string(j, "loser_model", where);
  t.winner_reward = jsonl::get_number(j, "winner_reward", where);
  t.loser_reward = jsonl::get_number(j, "loser_reward", where);
  return t;
}

}  // namespace history_detail

inline void save_histories(const std::string& path,
                           const std::vector<UserHistory>& histories) {
  jsonl::Writer out(path);
  for (const auto& h : histories) {
    json j;
    j["persona_id"] = h.persona_id;
    json triplets = json::array();
    for (const auto& t : h.triplets)
      triplets.push_back(history_detail::triplet_to_json(t));
    j["triplets"] = std::move(triplets);
    out.write(j);
  }
}

inline std::vector<UserHistory> load_histories(const std::string& path,
                                               const ScoredCorpus& corpus) {
  std::vector<UserHistory> out;
  std::unordered_set<std::string> ids;
  jsonl::for_each(path, [&](std::size_t lineno, const json& j) {
    std::string where = cat(path, ":", lineno);
    UserHistory h;
    h.persona_id = jsonl::get_string(j, "persona_id", where);
    require(ids.insert(h.persona_id).second, where,
            ": duplicate persona_id \"", h.persona_id, "\"");
    for (const auto& tj : jsonl::get_array(j, "triplets", where)) {
      require(tj.is_object(), where, ": triplets must be objects");
      h.triplets.push_back(history_detail::triplet_from_json(tj, where));
    }
    history_detail::validate_history(h, corpus, where);
    out.push_back(std::move(h));
  });
  require(!out.empty(), path, ": no histories");
  return out;
}

inline void save_test_cases(const std::string& path,
                            const std::vector<TestCase>& cases) {
  jsonl::Writer out(path);
  for (const auto& tc : cases) {
    json j;
    j["persona_id"] = tc.persona.persona_id;
    j["test_prompt_id"] = tc.test_prompt_id;
    j["history_kind"] = tc.history_kind;
    json triplets = json::array();
    for (const auto& t : tc.history.triplets)
      triplets.push_back(history_detail::triplet_to_json(t));
    j["triplets"] = std::move(triplets);
    out.write(j);
  }
}

// Personas are rebound from the population file, which holds the weights.
inline std::vector<TestCase> load_test_cases(const std::string& path,
                                             const ScoredCorpus& corpus,
                                             const Population& pop) {
  std::vector<TestCase> out;
  std::unordered_set<std::string> ids;
  jsonl::for_each(path, [&](std::size_t lineno, const json& j) {
    std::string where = cat(path, ":", lineno);
    TestCase tc;
    std::string persona_id = jsonl::get_string(j, "persona_id", where);
    require(ids.insert(persona_id).second, where, ": duplicate persona_id \"",
            persona_id, "\"");
    tc.persona = pop.by_id(persona_id);
    tc.test_prompt_id = jsonl::get_string(j, "test_prompt_id", where);
    require(corpus.has_prompt(tc.test_prompt_id), where,
            ": unknown test_prompt_id \"", tc.test_prompt_id, "\"");
    tc.history_kind = jsonl::get_string(j, "history_kind", where);
    require(tc.history_kind == "relevant" || tc.history_kind == "random",
            where, ": history_kind must be \"relevant\" or \"random\"");
    tc.history.persona_id = persona_id;
    for (const auto& tj : jsonl::get_array(j, "triplets", where)) {
      require(tj.is_object(), where, ": triplets must be objects");
      tc.history.triplets.push_back(
          history_detail::triplet_from_json(tj, where));
    }
    history_detail::validate_history(tc.history, corpus, where);
    for (const auto& t : tc.history.triplets)
      require(t.prompt_id != tc.test_prompt_id, where,
              ": test prompt \"", tc.test_prompt_id,
              "\" may not appear in its own history");
    out.push_back(std::move(tc));
  });
  require(!out.empty(), path, ": no test cases");
  return out;
}

}  // namespace prefsim
