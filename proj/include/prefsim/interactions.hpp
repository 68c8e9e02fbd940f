#pragma once

/**
 * Builders for interaction data: per-user preference histories over the
 * train split and test cases over the test split.
 *
 * Every user draws from an independent sub-stream
 * (derive_seed(seed, domain, user_index)), so histories do not change when
 * users are added or the population is processed in a different order.
 *
 * Test prompts are assigned once per (population, split, seed): a random
 * bijection when the counts match, otherwise uniform with replacement.
 * Relevant histories take the k nearest test-split prompts by embedding
 * cosine (similarity descending, ties by prompt_id ascending); random
 * histories take k distinct uniform draws from the rest of the test split.
 * The shared assignment stream means the two kinds agree on which prompt
 * each user is tested on for a given seed.
 */

#include <cstddef>
#include <string>
#include <vector>

#include "prefsim/corpus.hpp"
#include "prefsim/history.hpp"
#include "prefsim/persona.hpp"
#include "prefsim/retrieval.hpp"
#include "prefsim/rng.hpp"

namespace prefsim {

inline InteractionTriplet make_triplet(const Persona& persona,
                                       const ScoredCorpus& corpus,
                                       const std::string& prompt_id) {
  std::size_t pi = corpus.prompt_index(prompt_id);
  std::size_t w = pick_winner(persona, corpus, pi);
  std::size_t l = pick_loser(persona, corpus, pi);
  InteractionTriplet t;
  t.prompt_id = prompt_id;
  t.winner_model = corpus.response_models[w];
  t.loser_model = corpus.response_models[l];
  t.winner_reward = ensemble_reward(persona, corpus, pi, w);
  t.loser_reward = ensemble_reward(persona, corpus, pi, l);
  return t;
}

// m train prompts per user, sampled without replacement in draw order.
inline std::vector<UserHistory> build_historical_db(
    const Population& pop, const ScoredCorpus& corpus,
    const std::vector<std::string>& train_ids, std::size_t m,
    std::uint64_t seed) {
  require(m >= 1, "build_historical_db: m must be at least 1");
  require(m <= train_ids.size(), "build_historical_db: m = ", m,
          " exceeds train split size ", train_ids.size());
  for (const auto& id : train_ids)
    require(corpus.has_prompt(id), "build_historical_db: train id \"", id,
            "\" not in corpus");

  std::vector<UserHistory> out;
  out.reserve(pop.personas.size());
  for (std::size_t i = 0; i < pop.personas.size(); ++i) {
    const Persona& persona = pop.personas[i];
    Rng rng(derive_seed(seed, seed_domain::history, i));
    UserHistory h;
    h.persona_id = persona.persona_id;
    for (std::size_t idx : rng.sample_indices(train_ids.size(), m))
      h.triplets.push_back(make_triplet(persona, corpus, train_ids[idx]));
    out.push_back(std::move(h));
  }
  return out;
}

// One test prompt per user: a random bijection when counts match, else
// uniform with replacement. Returned in population order.
inline std::vector<std::string> assign_test_prompts(
    const Population& pop, const std::vector<std::string>& test_ids,
    std::uint64_t seed) {
  require(!test_ids.empty(), "assign_test_prompts: empty test split");
  std::size_t n = pop.personas.size();
  std::vector<std::string> out(n);
  if (n == test_ids.size()) {
    Rng rng(derive_seed(seed, seed_domain::assignment, 0));
    std::vector<std::size_t> perm = rng.permutation(n);
    for (std::size_t i = 0; i < n; ++i) out[i] = test_ids[perm[i]];
  } else {
    for (std::size_t i = 0; i < n; ++i) {
      Rng rng(derive_seed(seed, seed_domain::assignment, i));
      out[i] = test_ids[rng.bounded(test_ids.size())];
    }
  }
  return out;
}

// History = the k nearest other test-split prompts by embedding cosine, in
// similarity order. Returns fewer than k triplets when the split is small.
inline std::vector<TestCase> build_test_cases_relevant(
    const Population& pop, const ScoredCorpus& corpus,
    const EmbeddingTable& prompt_embeddings,
    const std::vector<std::string>& test_ids, std::size_t k,
    std::uint64_t seed) {
  // k = 0 is the zero-shot setting: everyone gets an empty history.
  require(!test_ids.empty(), "build_test_cases_relevant: empty test split");
  require(k == 0 || test_ids.size() >= 2,
          "build_test_cases_relevant: need at least 2 test prompts");
  for (const auto& id : test_ids)
    require(prompt_embeddings.contains(id),
            "build_test_cases_relevant: no embedding for test prompt \"", id,
            "\"");

  std::vector<std::string> assigned = assign_test_prompts(pop, test_ids, seed);
  std::vector<TestCase> out;
  out.reserve(pop.personas.size());
  for (std::size_t i = 0; i < pop.personas.size(); ++i) {
    TestCase tc;
    tc.persona = pop.personas[i];
    tc.test_prompt_id = assigned[i];
    tc.history_kind = "relevant";
    tc.history.persona_id = tc.persona.persona_id;
    if (k > 0) {
      NeighborList nn =
          knn_prompts(tc.test_prompt_id, test_ids, prompt_embeddings, k);
      for (const auto& nb : nn.neighbors)
        tc.history.triplets.push_back(make_triplet(tc.persona, corpus, nb.id));
    }
    out.push_back(std::move(tc));
  }
  return out;
}

// History = k distinct uniform draws from the test split minus the test
// prompt, in draw order.
inline std::vector<TestCase> build_test_cases_random(
    const Population& pop, const ScoredCorpus& corpus,
    const std::vector<std::string>& test_ids, std::size_t k,
    std::uint64_t seed) {
  // k = 0 is the zero-shot setting: everyone gets an empty history.
  require(test_ids.size() >= k + 1, "build_test_cases_random: k = ", k,
          " needs at least ", k + 1, " test prompts, have ", test_ids.size());

  std::vector<std::string> assigned = assign_test_prompts(pop, test_ids, seed);
  std::vector<TestCase> out;
  out.reserve(pop.personas.size());
  for (std::size_t i = 0; i < pop.personas.size(); ++i) {
    TestCase tc;
    tc.persona = pop.personas[i];
    tc.test_prompt_id = assigned[i];
    tc.history_kind = "random";
    tc.history.persona_id = tc.persona.persona_id;

    std::vector<std::string> others;
    others.reserve(test_ids.size() - 1);
    for (const auto& id : test_ids)
      if (id != tc.test_prompt_id) others.push_back(id);

    Rng rng(derive_seed(seed, seed_domain::test_cases, i));
    for (std::size_t idx : rng.sample_indices(others.size(), k))
      tc.history.triplets.push_back(make_triplet(tc.persona, corpus, others[idx]));
    out.push_back(std::move(tc));
  }
  return out;
}

}  // namespace prefsim
