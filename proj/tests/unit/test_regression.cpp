#include "prefsim/regression.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "../support/fixtures.hpp"
#include "../support/oracles.hpp"

using prefsim::fit_logistic_l2;

TEST(Logistic, SeparableFeatureGetsPositiveCoefficient) {
  // winners always have strictly larger feature 0; feature 1 is noise
  std::vector<std::vector<double>> rows;
  std::vector<int> labels;
  prefsim::Rng rng(71);
  for (int i = 0; i < 50; ++i) {
    double noise = rng.normal();
    rows.push_back({2.0 + rng.uniform(), noise});
    labels.push_back(1);
    rows.push_back({rng.uniform(), noise});
    labels.push_back(0);
  }
  auto fit = fit_logistic_l2(rows, labels);
  EXPECT_TRUE(fit.converged);
  EXPECT_GT(fit.coef[0], 0.5);
}

TEST(Logistic, SymmetricLabelsGiveZeroCoefficients) {
  // winner and loser rows identical -> nothing to learn
  std::vector<std::vector<double>> rows;
  std::vector<int> labels;
  prefsim::Rng rng(72);
  for (int i = 0; i < 40; ++i) {
    std::vector<double> v = {rng.normal(), rng.normal(), rng.normal()};
    rows.push_back(v);
    labels.push_back(1);
    rows.push_back(v);
    labels.push_back(0);
  }
  auto fit = fit_logistic_l2(rows, labels);
  EXPECT_TRUE(fit.converged);
  for (double c : fit.coef) EXPECT_NEAR(c, 0.0, 1e-6);
  EXPECT_NEAR(fit.intercept, 0.0, 1e-6);
}

TEST(Logistic, MatchesGradientDescentOracle) {
  // 200-sample synthetic set with a planted direction
  std::vector<std::vector<double>> rows;
  std::vector<int> labels;
  prefsim::Rng rng(73);
  for (int i = 0; i < 200; ++i) {
    std::vector<double> v = {rng.normal(), rng.normal(), rng.normal(),
                             rng.normal()};
    double z = 1.2 * v[0] - 0.7 * v[2] + 0.3 * rng.normal();
    rows.push_back(v);
    labels.push_back(z > 0.0 ? 1 : 0);
  }
  auto fit = fit_logistic_l2(rows, labels);
  ASSERT_TRUE(fit.converged);
  auto ref = oracle::gd_logistic(rows, labels, 1.0);
  ASSERT_TRUE(ref.converged);
  for (std::size_t j = 0; j < 4; ++j)
    EXPECT_NEAR(fit.coef[j], ref.coef[j], 1e-4) << "coef " << j;
  EXPECT_NEAR(fit.intercept, ref.intercept, 1e-4);
}

TEST(Logistic, LossNonIncreasing) {
  std::vector<std::vector<double>> rows;
  std::vector<int> labels;
  prefsim::Rng rng(74);
  for (int i = 0; i < 60; ++i) {
    rows.push_back({rng.normal(), rng.normal()});
    labels.push_back(rng.uniform() < 0.5 ? 0 : 1);
  }
  auto fit = fit_logistic_l2(rows, labels);
  ASSERT_GE(fit.losses.size(), 2u);
  for (std::size_t i = 1; i < fit.losses.size(); ++i)
    EXPECT_LE(fit.losses[i], fit.losses[i - 1] + 1e-12);
}

TEST(Logistic, ZeroVarianceFeatureDropped) {
  std::vector<std::vector<double>> rows;
  std::vector<int> labels;
  prefsim::Rng rng(75);
  for (int i = 0; i < 30; ++i) {
    double x = rng.normal();
    rows.push_back({x, 5.0});  // constant second feature
    labels.push_back(x > 0 ? 1 : 0);
  }
  auto fit = fit_logistic_l2(rows, labels);
  ASSERT_EQ(fit.dropped.size(), 1u);
  EXPECT_EQ(fit.dropped[0], 1u);
  EXPECT_EQ(fit.coef[1], 0.0);
  EXPECT_NE(fit.coef[0], 0.0);
}

TEST(Logistic, Deterministic) {
  std::vector<std::vector<double>> rows;
  std::vector<int> labels;
  prefsim::Rng rng(76);
  for (int i = 0; i < 50; ++i) {
    rows.push_back({rng.normal(), rng.normal()});
    labels.push_back(i % 2);
  }
  auto a = fit_logistic_l2(rows, labels);
  auto b = fit_logistic_l2(rows, labels);
  EXPECT_EQ(a.coef, b.coef);
  EXPECT_EQ(a.intercept, b.intercept);
  EXPECT_EQ(a.iterations, b.iterations);
}

TEST(Logistic, InputValidation) {
  EXPECT_THROW(fit_logistic_l2({{1.0}}, {1}), prefsim::Error);
  EXPECT_THROW(fit_logistic_l2({{1.0}, {2.0}}, {1}), prefsim::Error);
  EXPECT_THROW(fit_logistic_l2({{1.0}, {2.0, 3.0}}, {1, 0}), prefsim::Error);
  EXPECT_THROW(fit_logistic_l2({{1.0}, {2.0}}, {1, 2}), prefsim::Error);
}

TEST(UserRegression, EndToEndOnCorpusFeatures) {
  // build a 2-response corpus whose winners always carry more tokens:
  // response text length correlates with score under every persona
  prefsim::ScoredCorpus c;
  c.reward_models = {"r1", "r2"};
  c.response_models = {"m0", "m1"};
  prefsim::Rng rng(77);
  for (int i = 0; i < 40; ++i) {
    prefsim::PromptRecord p;
    p.prompt_id = fixtures::padded_id("p", static_cast<std::size_t>(i));
    p.text = "prompt";
    p.source = "synthetic";
    c.prompts.push_back(p);
    bool long_wins = true;
    std::string long_text = "alpha beta gamma delta epsilon zeta eta theta";
    std::string short_text = "alpha beta";
    // m0 gets the long text; give it the higher score in both columns
    c.responses.push_back({long_text, short_text});
    double hi = 1.0 + rng.uniform(), lo = -1.0 - rng.uniform();
    c.scores.push_back({hi, hi, lo, lo});
    (void)long_wins;
  }
  c.rebuild_index();

  auto features = prefsim::compute_syntactic_features(c);
  prefsim::Persona persona;
  persona.persona_id = "u000000";
  persona.weights = {0.6, 0.4};

  std::vector<std::string> ids;
  for (const auto& p : c.prompts) ids.push_back(p.prompt_id);
  auto pairs = prefsim::winner_losers_for(persona, c, ids);
  ASSERT_EQ(pairs.size(), 40u);
  for (const auto& wl : pairs) {
    EXPECT_EQ(wl.winner_model, "m0");
    EXPECT_EQ(wl.loser_model, "m1");
  }

  auto res = prefsim::fit_user_regression(persona, pairs, features);
  EXPECT_EQ(res.persona_id, "u000000");
  ASSERT_EQ(res.coefficients.size(), 7u);
  EXPECT_GT(res.coefficients[0], 0.0);  // token count separates the labels
  // constant columns across both responses get dropped
  for (const auto& name : res.dropped_features)
    EXPECT_NE(name, "token_count");
}

TEST(UserRegression, MissingFeatureRowFails) {
  prefsim::FeatureTable t;
  t.kind = "syntactic";
  t.names = {"a"};
  t.insert("p0", "m0", {1.0});
  prefsim::Persona persona;
  persona.persona_id = "u";
  std::vector<prefsim::WinnerLoser> pairs = {{"p0", "m0", "m1"}};
  EXPECT_THROW(prefsim::fit_user_regression(persona, pairs, t),
               prefsim::Error);
}
