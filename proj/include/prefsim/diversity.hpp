#pragma once

/**
 * Population-level preference analyses: who wins each prompt across a
 * population, how concentrated those votes are, and how predictable the
 * winner distribution is for prompts matching a keyword group.
 *
 * All functions here are pure over immutable inputs; rerunning any of them
 * on the same (population, corpus) yields identical results.
 */

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "prefsim/corpus.hpp"
#include "prefsim/persona.hpp"

namespace prefsim {

struct WinnerTable {
  std::vector<std::string> persona_ids;
  std::vector<std::string> prompt_ids;
  // entries[user][prompt] = winning response index in [0, L)
  std::vector<std::vector<std::size_t>> entries;
  std::size_t l_count = 0;

  // provenance
  std::uint64_t population_seed = 0;
  double alpha = 0.0;
  std::uint64_t corpus_fingerprint = 0;
  bool normalized = false;

  std::size_t n_users() const { return persona_ids.size(); }
  std::size_t n_prompts() const { return prompt_ids.size(); }
};

inline WinnerTable compute_winners(const Population& pop,
                                   const ScoredCorpus& corpus,
                                   const std::vector<std::string>& prompt_ids) {
  require(!pop.personas.empty(), "compute_winners: empty population");
  require(!prompt_ids.empty(), "compute_winners: no prompts given");

  WinnerTable table;
  table.prompt_ids = prompt_ids;
  table.l_count = corpus.l_count();
  table.population_seed = pop.seed;
  table.alpha = pop.alpha;
  table.corpus_fingerprint = corpus.fingerprint();
  table.normalized = corpus.normalized;

  std::vector<std::size_t> prompt_index;
  prompt_index.reserve(prompt_ids.size());
  for (const auto& id : prompt_ids)
    prompt_index.push_back(corpus.prompt_index(id));

  table.entries.reserve(pop.size());
  for (const auto& persona : pop.personas) {
    table.persona_ids.push_back(persona.persona_id);
    std::vector<std::size_t> row;
    row.reserve(prompt_index.size());
    for (std::size_t pi : prompt_index)
      row.push_back(pick_winner(persona, corpus, pi));
    table.entries.push_back(std::move(row));
  }
  return table;
}

namespace diversity_detail {

// votes[r] = number of users whose winner for prompt column `p` is r
inline std::vector<std::size_t> vote_counts(const WinnerTable& t,
                                            std::size_t p) {
  std::vector<std::size_t> votes(t.l_count, 0);
  for (const auto& row : t.entries) ++votes[row[p]];
  return votes;
}

}  // namespace diversity_detail

// For each threshold, the fraction of prompts whose top response's vote
// share is <= that threshold (weak inequality). Higher means more diverse.
inline std::vector<double> vote_share_summary(
    const WinnerTable& table,
    const std::vector<double>& thresholds = {0.5, 0.75, 0.95}) {
  require(table.n_users() > 0 && table.n_prompts() > 0,
          "vote_share_summary: empty winner table");
  std::vector<double> out(thresholds.size(), 0.0);
  double users = static_cast<double>(table.n_users());
  for (std::size_t p = 0; p < table.n_prompts(); ++p) {
    auto votes = diversity_detail::vote_counts(table, p);
    double top = static_cast<double>(
                     *std::max_element(votes.begin(), votes.end())) /
                 users;
    for (std::size_t t = 0; t < thresholds.size(); ++t)
      if (top <= thresholds[t]) out[t] += 1.0;
  }
  for (double& v : out) v /= static_cast<double>(table.n_prompts());
  return out;
}

// counts[k-1] = number of prompts where exactly k distinct responses got a
// vote; sums to n_prompts.
inline std::vector<std::size_t> distinct_winner_histogram(
    const WinnerTable& table) {
  require(table.n_users() > 0 && table.n_prompts() > 0,
          "distinct_winner_histogram: empty winner table");
  std::vector<std::size_t> hist(table.l_count, 0);
  for (std::size_t p = 0; p < table.n_prompts(); ++p) {
    auto votes = diversity_detail::vote_counts(table, p);
    std::size_t distinct = 0;
    for (auto v : votes)
      if (v > 0) ++distinct;
    ++hist[distinct - 1];
  }
  return hist;
}

struct ModelWinRates {
  std::vector<std::string> model_ids;
  std::vector<double> rates;  // sums to 1
};

inline ModelWinRates model_win_rates(const WinnerTable& table,
                                     const ScoredCorpus& corpus) {
  require(table.n_users() > 0 && table.n_prompts() > 0,
          "model_win_rates: empty winner table");
  require(corpus.l_count() == table.l_count,
          "model_win_rates: corpus has L=", corpus.l_count(),
          ", table has L=", table.l_count);
  ModelWinRates out;
  out.model_ids = corpus.response_models;
  out.rates.assign(table.l_count, 0.0);
  for (const auto& row : table.entries)
    for (std::size_t winner : row) out.rates[winner] += 1.0;
  double cells =
      static_cast<double>(table.n_users()) * static_cast<double>(table.n_prompts());
  for (double& r : out.rates) r /= cells;
  return out;
}

// Shannon entropy (bits) of one prompt's winner vote distribution.
inline double prompt_vote_entropy(const WinnerTable& table, std::size_t p) {
  auto votes = diversity_detail::vote_counts(table, p);
  double users = static_cast<double>(table.n_users());
  double h = 0.0;
  for (auto v : votes) {
    if (v == 0) continue;
    double pr = static_cast<double>(v) / users;
    h -= pr * std::log2(pr);
  }
  return h;
}

struct GroupSpec {
  enum class Match { substring, initial_token };
  std::string label;
  Match match = Match::substring;
  std::string pattern;
};

struct GroupEntropy {
  std::string label;
  std::size_t n_prompts = 0;      // matched prompt count
  double mean_entropy_bits = 0.0; // meaningless when n_prompts == 0
};

namespace diversity_detail {

inline std::string lower(const std::string& s) {
  std::string out = s;
  std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) {
    return static_cast<char>(std::tolower(c));
  });
  return out;
}

inline bool matches(const GroupSpec& spec, const std::string& prompt_text) {
  std::string text = lower(prompt_text);
  std::string pat = lower(spec.pattern);
  if (spec.match == GroupSpec::Match::substring)
    return text.find(pat) != std::string::npos;
  // first whitespace-delimited token
  std::size_t start = text.find_first_not_of(" \t\r\n");
  if (start == std::string::npos) return false;
  std::size_t end = text.find_first_of(" \t\r\n", start);
  std::string token = text.substr(start, end == std::string::npos
                                             ? std::string::npos
                                             : end - start);
  return token == pat;
}

}  // namespace diversity_detail

// Mean winner-distribution entropy over the prompts matching each group.
// Groups with no matching prompt come back with n_prompts = 0.
inline std::vector<GroupEntropy> keyword_entropy(
    const WinnerTable& table, const ScoredCorpus& corpus,
    const std::vector<GroupSpec>& groups) {
  require(table.n_users() > 0 && table.n_prompts() > 0,
          "keyword_entropy: empty winner table");
  std::vector<GroupEntropy> out;
  for (const auto& g : groups) {
    GroupEntropy ge;
    ge.label = g.label;
    double acc = 0.0;
    for (std::size_t p = 0; p < table.n_prompts(); ++p) {
      const auto& text =
          corpus.prompts[corpus.prompt_index(table.prompt_ids[p])].text;
      if (!diversity_detail::matches(g, text)) continue;
      acc += prompt_vote_entropy(table, p);
      ++ge.n_prompts;
    }
    if (ge.n_prompts > 0) ge.mean_entropy_bits = acc / static_cast<double>(ge.n_prompts);
    out.push_back(std::move(ge));
  }
  return out;
}

}  // namespace prefsim
