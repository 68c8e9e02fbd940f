#include <gtest/gtest.h>

#include <cmath>
#include <sstream>
#include <string>
#include <vector>

#include "prefsim/bench.hpp"
#include "prefsim/interactions.hpp"
#include "../support/fixtures.hpp"
#include "../support/oracles.hpp"

using prefsim::EvalReport;
using prefsim::Error;
using prefsim::json;
using prefsim::Persona;
using prefsim::PolicyKind;
using prefsim::PolicyOutcome;
using prefsim::PolicySpec;
using prefsim::Population;
using prefsim::ScoredCorpus;
using prefsim::TestCase;

namespace {

// One selection outcome per persona, each on its own prompt (wrapping).
std::vector<PolicyOutcome> run_selection(const Population& pop,
                                         const ScoredCorpus& c,
                                         PolicyKind kind,
                                         const std::string& reference,
                                         std::uint64_t seed) {
  PolicySpec spec;
  spec.kind = kind;
  std::vector<PolicyOutcome> outs;
  for (std::size_t i = 0; i < pop.size(); ++i) {
    TestCase tc;
    tc.persona = pop.personas[i];
    tc.test_prompt_id = c.prompts[i % c.n_prompts()].prompt_id;
    tc.history_kind = "random";
    prefsim::SelectionContext ctx;
    ctx.reference_model_id = reference;
    ctx.seed = seed;
    ctx.case_index = i;
    outs.push_back(prefsim::run_selection_policy(tc, c, spec, ctx));
  }
  return outs;
}

std::vector<PolicyOutcome> pick_fixed_index(const Population& pop,
                                            const ScoredCorpus& c,
                                            std::size_t index) {
  std::vector<PolicyOutcome> outs;
  for (std::size_t i = 0; i < pop.size(); ++i) {
    PolicyOutcome o;
    o.test_case_id = pop.personas[i].persona_id;
    o.test_prompt_id = c.prompts[i % c.n_prompts()].prompt_id;
    o.mode = "selection";
    o.policy_kind = "random_select";
    o.chosen_index = index;
    outs.push_back(o);
  }
  return outs;
}

}  // namespace

TEST(Evaluate, OracleWinRateIsOneUpToTies) {
  ScoredCorpus c = fixtures::synth_corpus(10, 6, 4, 3);
  Population pop = prefsim::sample_population(4, 40, 0.4, 11, c.reward_models);
  const std::string ref = "model_0002";
  auto outs = run_selection(pop, c, PolicyKind::oracle_select, ref, 0);
  EvalReport rep = prefsim::evaluate(outs, pop, c, ref);

  double expected_win_sum = 0.0;
  for (std::size_t i = 0; i < pop.size(); ++i) {
    std::size_t pi = i % c.n_prompts();
    std::size_t best = prefsim::pick_winner(pop.personas[i], c, pi);
    expected_win_sum += best == 2 ? 0.5 : 1.0;
  }
  EXPECT_DOUBLE_EQ(rep.win_rate,
                   expected_win_sum / static_cast<double>(pop.size()));
  EXPECT_GE(rep.win_rate, 0.5);
  EXPECT_EQ(rep.n_cases, pop.size());
  EXPECT_EQ(rep.mode, "selection");
}

TEST(Evaluate, AlwaysPickingReferenceGivesExactlyHalf) {
  ScoredCorpus c = fixtures::synth_corpus(7, 5, 3, 19);
  Population pop = prefsim::sample_population(3, 30, 1.0, 23, c.reward_models);
  auto outs = pick_fixed_index(pop, c, 1);
  EvalReport rep = prefsim::evaluate(outs, pop, c, "model_0001");
  EXPECT_EQ(rep.win_rate, 0.5);
  for (const auto& cs : rep.cases) EXPECT_EQ(cs.win, 0.5);
}

TEST(Evaluate, RandomSelectTracksExactExpectation) {
  ScoredCorpus c = fixtures::synth_corpus(50, 8, 5, 29);
  Population pop =
      prefsim::sample_population(5, 1000, 0.3, 31, c.reward_models);
  const std::string ref = "model_0000";
  auto outs = run_selection(pop, c, PolicyKind::random_select, ref, 77);
  EvalReport rep = prefsim::evaluate(outs, pop, c, ref);

  double expected = 0.0;
  for (std::size_t i = 0; i < pop.size(); ++i) {
    std::size_t pi = i % c.n_prompts();
    std::vector<double> rewards;
    for (std::size_t l = 0; l < c.l_count(); ++l)
      rewards.push_back(prefsim::ensemble_reward(pop.personas[i], c, pi, l));
    expected += oracle::random_pick_expected_win(rewards, rewards[0]);
  }
  expected /= static_cast<double>(pop.size());
  EXPECT_NEAR(rep.win_rate, expected, 0.03);
}

TEST(Evaluate, MeanRewardMatchesHandComputation) {
  ScoredCorpus c = fixtures::synth_corpus(4, 3, 2, 41);
  Population pop = prefsim::sample_population(2, 4, 0.8, 43, c.reward_models);
  auto outs = pick_fixed_index(pop, c, 2);
  EvalReport rep = prefsim::evaluate(outs, pop, c, "model_0000");
  double sum = 0.0;
  for (std::size_t i = 0; i < 4; ++i) {
    const auto& w = pop.personas[i].weights;
    double r = w[0] * c.score(i, 2, 0) + w[1] * c.score(i, 2, 1);
    EXPECT_DOUBLE_EQ(rep.cases[i].reward, r);
    sum += r;
  }
  EXPECT_DOUBLE_EQ(rep.mean_reward, sum / 4.0);
}

TEST(Evaluate, GenerativeOutcomesUseScorerVectors) {
  ScoredCorpus c = fixtures::synth_corpus(3, 4, 3, 53);
  Population pop = prefsim::sample_population(3, 3, 0.5, 59, c.reward_models);
  std::vector<PolicyOutcome> outs;
  for (std::size_t i = 0; i < 3; ++i) {
    PolicyOutcome o;
    o.test_case_id = pop.personas[i].persona_id;
    o.test_prompt_id = c.prompts[i].prompt_id;
    o.mode = "generative";
    o.policy_kind = "self_icl";
    o.generated_text = "text";
    o.scores = std::vector<double>{0.1 * (i + 1), -0.5, 2.0};
    outs.push_back(o);
  }
  EvalReport rep = prefsim::evaluate(outs, pop, c, "model_0001");
  for (std::size_t i = 0; i < 3; ++i) {
    const auto& w = pop.personas[i].weights;
    double r = w[0] * 0.1 * (i + 1) - w[1] * 0.5 + w[2] * 2.0;
    EXPECT_DOUBLE_EQ(rep.cases[i].reward, r);
  }
  EXPECT_EQ(rep.mode, "generative");
}

TEST(Evaluate, RejectsBadInputs) {
  ScoredCorpus c = fixtures::synth_corpus(3, 3, 2, 61);
  Population pop = prefsim::sample_population(2, 3, 0.5, 67, c.reward_models);
  auto outs = pick_fixed_index(pop, c, 0);

  EXPECT_THROW(prefsim::evaluate(outs, pop, c, "unknown_model"), Error);
  EXPECT_THROW(prefsim::evaluate({}, pop, c, "model_0000"), Error);

  auto failed = outs;
  failed[1].failed = true;
  EXPECT_THROW(prefsim::evaluate(failed, pop, c, "model_0000"), Error);

  auto dup = outs;
  dup[2].test_case_id = dup[0].test_case_id;
  EXPECT_THROW(prefsim::evaluate(dup, pop, c, "model_0000"), Error);

  auto bare = outs;
  bare[0].mode = "generative";
  bare[0].policy_kind = bare[1].policy_kind;
  EXPECT_THROW(prefsim::evaluate(bare, pop, c, "model_0000"), Error);
}

TEST(Report, RoundTripIsExactAndClosedUnderReEvaluation) {
  fixtures::TempDir dir;
  ScoredCorpus c = fixtures::synth_corpus(6, 4, 3, 71);
  Population pop = prefsim::sample_population(3, 12, 0.7, 73, c.reward_models);
  auto outs = run_selection(pop, c, PolicyKind::oracle_select, "model_0000", 0);
  json prov;
  prov["seed"] = 7;
  prov["alpha"] = 0.7;
  EvalReport rep = prefsim::evaluate(outs, pop, c, "model_0000",
                                     json{{"kind", "oracle_select"}}, prov);

  std::string path = dir.str("report.json");
  prefsim::save_report(path, rep);
  EvalReport back = prefsim::load_report(path);
  EXPECT_EQ(back.n_cases, rep.n_cases);
  EXPECT_EQ(back.mean_reward, rep.mean_reward);
  EXPECT_EQ(back.win_rate, rep.win_rate);
  ASSERT_EQ(back.cases.size(), rep.cases.size());
  for (std::size_t i = 0; i < rep.cases.size(); ++i) {
    EXPECT_EQ(back.cases[i].test_case_id, rep.cases[i].test_case_id);
    EXPECT_EQ(back.cases[i].reward, rep.cases[i].reward);
    EXPECT_EQ(back.cases[i].win, rep.cases[i].win);
  }
  EXPECT_EQ(back.provenance.value("seed", 0), 7);

  // Re-evaluating the same outcomes reproduces the stored aggregates.
  EvalReport again = prefsim::evaluate(outs, pop, c, "model_0000",
                                       json{{"kind", "oracle_select"}}, prov);
  EXPECT_EQ(prefsim::report_to_json(again).dump(2),
            prefsim::report_to_json(rep).dump(2));
}

TEST(Report, JsonCarriesRequiredKeys) {
  ScoredCorpus c = fixtures::synth_corpus(2, 3, 2, 79);
  Population pop = prefsim::sample_population(2, 2, 0.5, 83, c.reward_models);
  auto outs = pick_fixed_index(pop, c, 0);
  json j = prefsim::report_to_json(prefsim::evaluate(outs, pop, c,
                                                     "model_0000"));
  for (const char* key :
       {"policy", "n_cases", "mean_reward", "win_rate", "cases", "provenance"})
    EXPECT_TRUE(j.contains(key)) << key;
  ASSERT_EQ(j["cases"].size(), 2u);
  for (const char* key : {"test_case_id", "reward", "win"})
    EXPECT_TRUE(j["cases"][0].contains(key)) << key;
  EXPECT_EQ(j["policy"]["kind"], "random_select");
}

TEST(Compare, SelfComparisonHasZeroDeltas) {
  ScoredCorpus c = fixtures::synth_corpus(5, 4, 2, 89);
  Population pop = prefsim::sample_population(2, 10, 0.6, 97, c.reward_models);
  auto outs = run_selection(pop, c, PolicyKind::oracle_select, "model_0000", 0);
  EvalReport rep = prefsim::evaluate(outs, pop, c, "model_0000");
  prefsim::Comparison cmp = prefsim::compare({rep, rep});
  ASSERT_EQ(cmp.pairs.size(), 1u);
  EXPECT_EQ(cmp.pairs[0].mean_delta_reward, 0.0);
  EXPECT_EQ(cmp.pairs[0].mean_delta_win, 0.0);
  EXPECT_EQ(cmp.pairs[0].wins, 0u);
  EXPECT_EQ(cmp.pairs[0].losses, 0u);
  EXPECT_EQ(cmp.pairs[0].ties, 10u);
  EXPECT_EQ(cmp.pairs[0].sign_test_p, 1.0);
}

TEST(Compare, OracleStrictlyDominatesRandomInMeanReward) {
  ScoredCorpus c = fixtures::synth_corpus(20, 6, 3, 101);
  Population pop =
      prefsim::sample_population(3, 60, 0.4, 103, c.reward_models);
  const std::string ref = "model_0000";
  EvalReport oracle_rep = prefsim::evaluate(
      run_selection(pop, c, PolicyKind::oracle_select, ref, 0), pop, c, ref);
  EvalReport random_rep = prefsim::evaluate(
      run_selection(pop, c, PolicyKind::random_select, ref, 5), pop, c, ref);
  prefsim::Comparison cmp = prefsim::compare({oracle_rep, random_rep});
  EXPECT_GT(cmp.pairs[0].mean_delta_reward, 0.0);
  EXPECT_EQ(cmp.pairs[0].losses, 0u);  // argmax can never lose a case
  EXPECT_GE(oracle_rep.win_rate, random_rep.win_rate);
}

TEST(Compare, ThreePolicyTableMatchesHandAggregation) {
  ScoredCorpus c = fixtures::synth_corpus(6, 5, 2, 107);
  Population pop = prefsim::sample_population(2, 6, 0.9, 109, c.reward_models);
  const std::string ref = "model_0002";
  std::vector<EvalReport> reps = {
      prefsim::evaluate(
          run_selection(pop, c, PolicyKind::oracle_select, ref, 0), pop, c,
          ref, json{{"kind", "oracle_select"}}),
      prefsim::evaluate(
          run_selection(pop, c, PolicyKind::random_select, ref, 3), pop, c,
          ref, json{{"kind", "random_select"}}),
      prefsim::evaluate(pick_fixed_index(pop, c, 2), pop, c, ref,
                        json{{"kind", "zero_shot"}})};
  prefsim::Comparison cmp = prefsim::compare(reps);
  ASSERT_EQ(cmp.rows.size(), 3u);
  ASSERT_EQ(cmp.pairs.size(), 3u);
  for (std::size_t r = 0; r < 3; ++r) {
    EXPECT_EQ(cmp.rows[r].mean_reward, reps[r].mean_reward);
    EXPECT_EQ(cmp.rows[r].win_rate, reps[r].win_rate);
    EXPECT_EQ(cmp.rows[r].n_cases, 6u);
  }
  EXPECT_EQ(cmp.rows[0].label, "oracle_select");
  EXPECT_EQ(cmp.rows[2].label, "zero_shot");

  // Pair (oracle, fixed-reference): oracle ties only where the reference is
  // already the argmax; hand-count the per-case deltas.
  const prefsim::PairedDelta& d = cmp.pairs[1];
  std::size_t wins = 0, ties = 0;
  double delta_sum = 0.0;
  for (std::size_t i = 0; i < 6; ++i) {
    double best = reps[0].cases[i].reward;
    double fixed = reps[2].cases[i].reward;
    delta_sum += best - fixed;
    if (best > fixed)
      ++wins;
    else
      ++ties;
  }
  EXPECT_EQ(d.wins, wins);
  EXPECT_EQ(d.ties, ties);
  EXPECT_EQ(d.losses, 0u);
  EXPECT_DOUBLE_EQ(d.mean_delta_reward, delta_sum / 6.0);
}

TEST(Compare, MismatchedCaseSetsRejected) {
  ScoredCorpus c = fixtures::synth_corpus(4, 3, 2, 113);
  Population pop = prefsim::sample_population(2, 8, 0.5, 127, c.reward_models);
  const std::string ref = "model_0000";
  auto outs = run_selection(pop, c, PolicyKind::oracle_select, ref, 0);
  EvalReport full = prefsim::evaluate(outs, pop, c, ref);

  auto fewer = outs;
  fewer.pop_back();
  EvalReport smaller = prefsim::evaluate(fewer, pop, c, ref);
  EXPECT_THROW(prefsim::compare({full, smaller}), Error);

  // Same count, different id set.
  EvalReport aliased = full;
  aliased.cases[0].test_case_id = "u999999";
  EXPECT_THROW(prefsim::compare({full, aliased}), Error);
  EXPECT_THROW(prefsim::compare({full}), Error);
}

TEST(Compare, SignTestMatchesClosedForm) {
  using prefsim::bench_detail::sign_test_p;
  EXPECT_EQ(sign_test_p(0, 0), 1.0);
  EXPECT_NEAR(sign_test_p(3, 0), 0.25, 1e-12);          // 2 * (1/8)
  EXPECT_NEAR(sign_test_p(5, 1), 7.0 / 32.0, 1e-12);    // 2 * 7/64
  EXPECT_EQ(sign_test_p(2, 2), 1.0);                    // clipped
  EXPECT_NEAR(sign_test_p(9, 1), 11.0 / 512.0, 1e-12);  // 2 * 11/1024
}

TEST(Compare, CsvAndSvgOutputs) {
  ScoredCorpus c = fixtures::synth_corpus(3, 4, 2, 131);
  Population pop = prefsim::sample_population(2, 5, 0.5, 137, c.reward_models);
  const std::string ref = "model_0001";
  EvalReport a = prefsim::evaluate(
      run_selection(pop, c, PolicyKind::oracle_select, ref, 0), pop, c, ref,
      json{{"kind", "oracle_select"}});
  EvalReport b = prefsim::evaluate(
      run_selection(pop, c, PolicyKind::random_select, ref, 1), pop, c, ref,
      json{{"kind", "random_select"}});
  prefsim::Comparison cmp = prefsim::compare({a, b});

  std::string csv = prefsim::comparison_to_csv(cmp);
  std::istringstream lines(csv);
  std::string line;
  std::getline(lines, line);
  EXPECT_EQ(line, "policy,n_cases,mean_reward,win_rate");
  std::getline(lines, line);
  EXPECT_EQ(line.rfind("oracle_select,5,", 0), 0u);
  std::getline(lines, line);
  EXPECT_EQ(line.rfind("random_select,5,", 0), 0u);
  EXPECT_FALSE(std::getline(lines, line));

  // Labels with policy parameters carry commas and must be quoted.
  EXPECT_EQ(prefsim::csv_field("self_icl[k=1,win_only]"),
            "\"self_icl[k=1,win_only]\"");
  EXPECT_EQ(prefsim::csv_field("plain"), "plain");
  EXPECT_EQ(prefsim::csv_field("a\"b"), "\"a\"\"b\"");

  std::string svg = prefsim::comparison_to_svg(cmp);
  EXPECT_EQ(svg.rfind("<svg", 0), 0u);
  std::size_t rects = 0;
  for (std::size_t at = svg.find("<rect"); at != std::string::npos;
       at = svg.find("<rect", at + 1))
    ++rects;
  EXPECT_EQ(rects, 4u);  // two bars per policy

  json j = prefsim::comparison_to_json(cmp);
  EXPECT_EQ(j["policies"].size(), 2u);
  EXPECT_EQ(j["pairs"].size(), 1u);
  EXPECT_EQ(j["n_cases"], 5);
}
