#include <gtest/gtest.h>

#include <algorithm>
#include <cstddef>
#include <set>
#include <string>
#include <vector>

#include "prefsim/interactions.hpp"
#include "../support/fixtures.hpp"
#include "../support/oracles.hpp"

using prefsim::Error;
using prefsim::Population;
using prefsim::ScoredCorpus;
using prefsim::TestCase;
using prefsim::UserHistory;

namespace {

std::vector<std::string> prompt_ids(const ScoredCorpus& c) {
  std::vector<std::string> ids;
  for (const auto& p : c.prompts) ids.push_back(p.prompt_id);
  return ids;
}

// Per-response ensemble rewards for one prompt under one persona.
std::vector<double> rewards_for(const prefsim::Persona& persona,
                                const ScoredCorpus& c,
                                const std::string& prompt_id) {
  std::size_t pi = c.prompt_index(prompt_id);
  std::vector<double> r(c.l_count());
  for (std::size_t l = 0; l < c.l_count(); ++l)
    r[l] = prefsim::ensemble_reward(persona, c, pi, l);
  return r;
}

}  // namespace

TEST(MakeTriplet, AgreesWithExhaustiveRanking) {
  ScoredCorpus c = fixtures::synth_corpus(6, 5, 3, 42);
  Population pop = prefsim::sample_population(3, 4, 0.5, 7, c.reward_models);
  for (const auto& persona : pop.personas) {
    for (const auto& p : c.prompts) {
      auto t = prefsim::make_triplet(persona, c, p.prompt_id);
      auto rank = oracle::exhaustive_rank(rewards_for(persona, c, p.prompt_id));
      EXPECT_EQ(t.winner_model, c.response_models[rank.front()]);
      EXPECT_EQ(t.loser_model, c.response_models[rank.back()]);
      EXPECT_GE(t.winner_reward, t.loser_reward);
    }
  }
}

TEST(HistoricalDb, SinglePromptSplitGivesThatPromptToEveryone) {
  ScoredCorpus c = fixtures::synth_corpus(3, 4, 2, 1);
  Population pop = prefsim::sample_population(2, 5, 1.0, 3, c.reward_models);
  auto db = prefsim::build_historical_db(pop, c, {"p0001"}, 1, 99);
  ASSERT_EQ(db.size(), 5u);
  for (std::size_t i = 0; i < db.size(); ++i) {
    EXPECT_EQ(db[i].persona_id, pop.personas[i].persona_id);
    ASSERT_EQ(db[i].triplets.size(), 1u);
    EXPECT_EQ(db[i].triplets[0].prompt_id, "p0001");
    auto expect = prefsim::make_triplet(pop.personas[i], c, "p0001");
    EXPECT_EQ(db[i].triplets[0].winner_model, expect.winner_model);
    EXPECT_EQ(db[i].triplets[0].loser_model, expect.loser_model);
  }
}

TEST(HistoricalDb, TripletsRescoreCleanAndPromptsAreDistinct) {
  ScoredCorpus c = fixtures::synth_corpus(12, 6, 4, 5);
  Population pop = prefsim::sample_population(4, 8, 0.2, 11, c.reward_models);
  auto db = prefsim::build_historical_db(pop, c, prompt_ids(c), 7, 123);
  for (std::size_t i = 0; i < db.size(); ++i) {
    ASSERT_EQ(db[i].triplets.size(), 7u);
    std::set<std::string> seen;
    for (const auto& t : db[i].triplets) {
      EXPECT_TRUE(seen.insert(t.prompt_id).second);
      auto expect = prefsim::make_triplet(pop.personas[i], c, t.prompt_id);
      EXPECT_EQ(t.winner_model, expect.winner_model);
      EXPECT_EQ(t.loser_model, expect.loser_model);
      EXPECT_DOUBLE_EQ(t.winner_reward, expect.winner_reward);
      EXPECT_DOUBLE_EQ(t.loser_reward, expect.loser_reward);
    }
  }
}

TEST(HistoricalDb, DeterministicAndIndependentOfPopulationSize) {
  ScoredCorpus c = fixtures::synth_corpus(10, 3, 2, 8);
  Population small = prefsim::sample_population(2, 3, 0.5, 21, c.reward_models);
  Population large = prefsim::sample_population(2, 9, 0.5, 21, c.reward_models);

  auto a = prefsim::build_historical_db(small, c, prompt_ids(c), 4, 77);
  auto b = prefsim::build_historical_db(small, c, prompt_ids(c), 4, 77);
  auto wide = prefsim::build_historical_db(large, c, prompt_ids(c), 4, 77);

  for (std::size_t i = 0; i < a.size(); ++i) {
    ASSERT_EQ(a[i].triplets.size(), b[i].triplets.size());
    for (std::size_t j = 0; j < a[i].triplets.size(); ++j) {
      EXPECT_EQ(a[i].triplets[j].prompt_id, b[i].triplets[j].prompt_id);
      // User i's prompt draw depends only on (seed, i), not on who else
      // exists; personas match because the population seed matches.
      EXPECT_EQ(a[i].triplets[j].prompt_id, wide[i].triplets[j].prompt_id);
      EXPECT_EQ(a[i].triplets[j].winner_model, wide[i].triplets[j].winner_model);
    }
  }
}

TEST(HistoricalDb, RejectsOversizedM) {
  ScoredCorpus c = fixtures::synth_corpus(3, 2, 2, 1);
  Population pop = prefsim::sample_population(2, 2, 1.0, 1, c.reward_models);
  EXPECT_THROW(prefsim::build_historical_db(pop, c, prompt_ids(c), 4, 1),
               Error);
  EXPECT_THROW(prefsim::build_historical_db(pop, c, prompt_ids(c), 0, 1),
               Error);
}

TEST(AssignTestPrompts, EqualCountsGiveAPermutation) {
  ScoredCorpus c = fixtures::synth_corpus(50, 2, 2, 3);
  Population pop = prefsim::sample_population(2, 50, 1.0, 9, c.reward_models);
  auto assigned = prefsim::assign_test_prompts(pop, prompt_ids(c), 13);
  ASSERT_EQ(assigned.size(), 50u);
  std::set<std::string> used(assigned.begin(), assigned.end());
  EXPECT_EQ(used.size(), 50u);  // every prompt exactly once
}

TEST(AssignTestPrompts, SingleUserSinglePrompt) {
  ScoredCorpus c = fixtures::synth_corpus(1, 2, 2, 3);
  Population pop = prefsim::sample_population(2, 1, 1.0, 9, c.reward_models);
  auto assigned = prefsim::assign_test_prompts(pop, {"p0000"}, 4);
  ASSERT_EQ(assigned.size(), 1u);
  EXPECT_EQ(assigned[0], "p0000");
}

TEST(AssignTestPrompts, MoreUsersThanPromptsStillAssignsEveryone) {
  ScoredCorpus c = fixtures::synth_corpus(2, 2, 2, 3);
  Population pop = prefsim::sample_population(2, 3, 1.0, 9, c.reward_models);
  auto assigned = prefsim::assign_test_prompts(pop, prompt_ids(c), 4);
  ASSERT_EQ(assigned.size(), 3u);
  for (const auto& id : assigned) EXPECT_TRUE(c.has_prompt(id));
  EXPECT_THROW(prefsim::assign_test_prompts(pop, {}, 4), Error);
}

TEST(RelevantCases, NeighborsEqualExhaustiveCosineRanking) {
  ScoredCorpus c = fixtures::synth_corpus(10, 3, 2, 17);
  Population pop = prefsim::sample_population(2, 4, 0.5, 5, c.reward_models);
  auto table = fixtures::synth_prompt_embeddings(c, 8, 33);
  auto ids = prompt_ids(c);

  auto cases = prefsim::build_test_cases_relevant(pop, c, table, ids, 4, 71);
  ASSERT_EQ(cases.size(), 4u);
  for (const auto& tc : cases) {
    EXPECT_EQ(tc.history_kind, "relevant");
    std::vector<std::pair<std::string, std::vector<double>>> db;
    for (const auto& id : ids)
      if (id != tc.test_prompt_id) db.emplace_back(id, table.at(id));
    auto expected = oracle::exhaustive_knn(table.at(tc.test_prompt_id), db, 4);
    ASSERT_EQ(tc.history.triplets.size(), expected.size());
    for (std::size_t i = 0; i < expected.size(); ++i)
      EXPECT_EQ(tc.history.triplets[i].prompt_id, expected[i].id);
  }
}

TEST(RelevantCases, HistorySimilarityDominatesExcludedPrompts) {
  ScoredCorpus c = fixtures::synth_corpus(12, 3, 2, 29);
  Population pop = prefsim::sample_population(2, 6, 0.5, 2, c.reward_models);
  auto table = fixtures::synth_prompt_embeddings(c, 5, 90);
  auto ids = prompt_ids(c);

  auto cases = prefsim::build_test_cases_relevant(pop, c, table, ids, 3, 6);
  for (const auto& tc : cases) {
    const auto& q = table.at(tc.test_prompt_id);
    std::set<std::string> in_history;
    double min_kept = 2.0;
    for (const auto& t : tc.history.triplets) {
      EXPECT_NE(t.prompt_id, tc.test_prompt_id);
      in_history.insert(t.prompt_id);
      min_kept = std::min(min_kept, oracle::cosine(q, table.at(t.prompt_id)));
    }
    for (const auto& id : ids) {
      if (id == tc.test_prompt_id || in_history.count(id)) continue;
      EXPECT_LE(oracle::cosine(q, table.at(id)), min_kept + 1e-15);
    }
  }
}

TEST(RelevantCases, MissingEmbeddingRejected) {
  ScoredCorpus c = fixtures::synth_corpus(4, 2, 2, 1);
  Population pop = prefsim::sample_population(2, 2, 1.0, 1, c.reward_models);
  prefsim::EmbeddingTable sparse;
  sparse.insert("p0000", {1.0, 0.0});
  EXPECT_THROW(
      prefsim::build_test_cases_relevant(pop, c, sparse, prompt_ids(c), 2, 1),
      Error);
}

TEST(RelevantCases, ZeroShotsGiveEmptyHistories) {
  ScoredCorpus c = fixtures::synth_corpus(4, 2, 2, 15);
  Population pop = prefsim::sample_population(2, 3, 0.5, 16, c.reward_models);
  auto table = fixtures::synth_prompt_embeddings(c, 3, 17);
  auto ids = prompt_ids(c);
  for (const auto& tc :
       prefsim::build_test_cases_relevant(pop, c, table, ids, 0, 18))
    EXPECT_TRUE(tc.history.triplets.empty());
  for (const auto& tc : prefsim::build_test_cases_random(pop, c, ids, 0, 18))
    EXPECT_TRUE(tc.history.triplets.empty());
}

TEST(RandomCases, FullRemainderWhenKIsSplitMinusOne) {
  ScoredCorpus c = fixtures::synth_corpus(6, 3, 2, 44);
  Population pop = prefsim::sample_population(2, 6, 0.5, 12, c.reward_models);
  auto ids = prompt_ids(c);
  auto cases = prefsim::build_test_cases_random(pop, c, ids, 5, 20);
  for (const auto& tc : cases) {
    EXPECT_EQ(tc.history_kind, "random");
    std::set<std::string> got;
    for (const auto& t : tc.history.triplets) got.insert(t.prompt_id);
    EXPECT_EQ(got.size(), 5u);
    EXPECT_FALSE(got.count(tc.test_prompt_id));
  }
}

TEST(RandomCases, SameSeedGivesIdenticalHistories) {
  ScoredCorpus c = fixtures::synth_corpus(9, 3, 2, 3);
  Population pop = prefsim::sample_population(2, 5, 0.5, 8, c.reward_models);
  auto ids = prompt_ids(c);
  auto a = prefsim::build_test_cases_random(pop, c, ids, 3, 14);
  auto b = prefsim::build_test_cases_random(pop, c, ids, 3, 14);
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].test_prompt_id, b[i].test_prompt_id);
    for (std::size_t j = 0; j < a[i].history.triplets.size(); ++j)
      EXPECT_EQ(a[i].history.triplets[j].prompt_id,
                b[i].history.triplets[j].prompt_id);
  }
}

TEST(RandomCases, RelevantAndRandomShareTestPromptAssignment) {
  ScoredCorpus c = fixtures::synth_corpus(8, 3, 2, 3);
  Population pop = prefsim::sample_population(2, 5, 0.5, 8, c.reward_models);
  auto table = fixtures::synth_prompt_embeddings(c, 4, 10);
  auto ids = prompt_ids(c);
  auto rel = prefsim::build_test_cases_relevant(pop, c, table, ids, 2, 14);
  auto rnd = prefsim::build_test_cases_random(pop, c, ids, 2, 14);
  for (std::size_t i = 0; i < rel.size(); ++i)
    EXPECT_EQ(rel[i].test_prompt_id, rnd[i].test_prompt_id);
}

// Conditioned on a user's eligible list, a k=1 draw should be uniform.
// Positions within the (sorted) eligible list are exchangeable across
// users, so the pooled position counts are Binomial(n, 1/7).
TEST(RandomCases, SingleDrawIsUniformOverEligiblePrompts) {
  ScoredCorpus c = fixtures::synth_corpus(8, 2, 2, 6);
  Population pop =
      prefsim::sample_population(2, 10000, 1.0, 31, c.reward_models);
  auto ids = prompt_ids(c);
  auto cases = prefsim::build_test_cases_random(pop, c, ids, 1, 202);

  std::vector<std::size_t> position_counts(7, 0);
  for (const auto& tc : cases) {
    std::vector<std::string> others;
    for (const auto& id : ids)
      if (id != tc.test_prompt_id) others.push_back(id);
    auto it = std::find(others.begin(), others.end(),
                        tc.history.triplets[0].prompt_id);
    ASSERT_NE(it, others.end());
    ++position_counts[static_cast<std::size_t>(it - others.begin())];
  }
  // n=10000, p=1/7: mean ~1428.6, sigma ~35; +-3 sigma ~ +-105.
  for (std::size_t pos = 0; pos < 7; ++pos) {
    EXPECT_GE(position_counts[pos], 1323u) << "position " << pos;
    EXPECT_LE(position_counts[pos], 1535u) << "position " << pos;
  }
}

TEST(HistoryIo, HistoriesRoundTrip) {
  fixtures::TempDir dir;
  ScoredCorpus c = fixtures::synth_corpus(10, 4, 3, 15);
  Population pop = prefsim::sample_population(3, 4, 0.3, 2, c.reward_models);
  auto db = prefsim::build_historical_db(pop, c, prompt_ids(c), 5, 40);

  std::string path = dir.str("histories.jsonl");
  prefsim::save_histories(path, db);
  auto back = prefsim::load_histories(path, c);
  ASSERT_EQ(back.size(), db.size());
  for (std::size_t i = 0; i < db.size(); ++i) {
    EXPECT_EQ(back[i].persona_id, db[i].persona_id);
    ASSERT_EQ(back[i].triplets.size(), db[i].triplets.size());
    for (std::size_t j = 0; j < db[i].triplets.size(); ++j) {
      EXPECT_EQ(back[i].triplets[j].prompt_id, db[i].triplets[j].prompt_id);
      EXPECT_EQ(back[i].triplets[j].winner_model,
                db[i].triplets[j].winner_model);
      EXPECT_EQ(back[i].triplets[j].loser_model,
                db[i].triplets[j].loser_model);
      EXPECT_DOUBLE_EQ(back[i].triplets[j].winner_reward,
                       db[i].triplets[j].winner_reward);
      EXPECT_DOUBLE_EQ(back[i].triplets[j].loser_reward,
                       db[i].triplets[j].loser_reward);
    }
  }
}

TEST(HistoryIo, TestCasesRoundTrip) {
  fixtures::TempDir dir;
  ScoredCorpus c = fixtures::synth_corpus(7, 3, 2, 19);
  Population pop = prefsim::sample_population(2, 4, 0.4, 3, c.reward_models);
  auto cases =
      prefsim::build_test_cases_random(pop, c, prompt_ids(c), 3, 60);

  std::string path = dir.str("testcases.jsonl");
  prefsim::save_test_cases(path, cases);
  auto back = prefsim::load_test_cases(path, c, pop);
  ASSERT_EQ(back.size(), cases.size());
  for (std::size_t i = 0; i < cases.size(); ++i) {
    EXPECT_EQ(back[i].persona.persona_id, cases[i].persona.persona_id);
    EXPECT_EQ(back[i].persona.weights, cases[i].persona.weights);
    EXPECT_EQ(back[i].test_prompt_id, cases[i].test_prompt_id);
    EXPECT_EQ(back[i].history_kind, cases[i].history_kind);
    ASSERT_EQ(back[i].history.triplets.size(),
              cases[i].history.triplets.size());
  }
}

TEST(HistoryIo, RejectsWinnerRewardBelowLoser) {
  fixtures::TempDir dir;
  ScoredCorpus c = fixtures::synth_corpus(2, 2, 2, 1);
  std::string path = dir.str("histories.jsonl");
  fixtures::write_lines(
      path,
      {R"({"persona_id":"u000000","triplets":[{"prompt_id":"p0000",)"
       R"("winner_model":"model_0000","loser_model":"model_0001",)"
       R"("winner_reward":-1.0,"loser_reward":2.0}]})"});
  EXPECT_THROW(prefsim::load_histories(path, c), Error);
}

TEST(HistoryIo, RejectsDuplicateHistoryPrompt) {
  fixtures::TempDir dir;
  ScoredCorpus c = fixtures::synth_corpus(2, 2, 2, 1);
  std::string path = dir.str("histories.jsonl");
  std::string trip =
      R"({"prompt_id":"p0000","winner_model":"model_0000",)"
      R"("loser_model":"model_0001","winner_reward":1.0,"loser_reward":0.0})";
  fixtures::write_lines(path, {R"({"persona_id":"u000000","triplets":[)" +
                                   trip + "," + trip + "]}"});
  EXPECT_THROW(prefsim::load_histories(path, c), Error);
}

TEST(HistoryIo, RejectsTestPromptInsideOwnHistory) {
  fixtures::TempDir dir;
  ScoredCorpus c = fixtures::synth_corpus(3, 2, 2, 1);
  Population pop = prefsim::sample_population(2, 1, 1.0, 5, c.reward_models);
  std::string path = dir.str("testcases.jsonl");
  fixtures::write_lines(
      path,
      {R"({"persona_id":")" + pop.personas[0].persona_id +
       R"(","test_prompt_id":"p0000","history_kind":"random","triplets":[)"
       R"({"prompt_id":"p0000","winner_model":"model_0000",)"
       R"("loser_model":"model_0001","winner_reward":1.0,"loser_reward":0.0}]})"});
  EXPECT_THROW(prefsim::load_test_cases(path, c, pop), Error);
}
