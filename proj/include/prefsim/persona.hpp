#pragma once

/**
 * Synthetic users ("personas") as points on the B-simplex: a persona's
 * preference over a (prompt, response) pair is the weighted sum of the B
 * base reward-model scores, with weights drawn once from a symmetric
 * Dirichlet(alpha). Small alpha concentrates users at single base models;
 * large alpha makes the population near-uniform.
 *
 * Persona i's draw is seeded from derive_seed(seed, population, i), so a
 * population is reproducible from (B, n, alpha, seed) and independent of
 * how the sampling loop is scheduled.
 *
 * Ties in ranking and argmax/argmin go to the lowest response index; the
 * loser is the last element of the ranking, i.e. the highest index among
 * minimum-score ties.
 */

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <string>
#include <unordered_map>
#include <vector>

#include "prefsim/corpus.hpp"
#include "prefsim/rng.hpp"

namespace prefsim {

struct Persona {
  std::string persona_id;
  std::vector<double> weights;  // length B, non-negative, sums to 1
  double alpha = 0.0;
  std::uint64_t seed = 0;  // the sub-seed this persona was drawn from
};

struct Population {
  std::vector<Persona> personas;
  double alpha = 0.0;
  std::uint64_t seed = 0;
  std::size_t b_count = 0;
  std::vector<std::string> reward_models;  // column labels, may be generic

  std::size_t size() const { return personas.size(); }

  const Persona& by_id(const std::string& persona_id) const {
    if (id_index_.size() != personas.size()) {
      id_index_.clear();
      for (std::size_t i = 0; i < personas.size(); ++i)
        id_index_.emplace(personas[i].persona_id, i);
    }
    auto it = id_index_.find(persona_id);
    require(it != id_index_.end(), "population: unknown persona_id \"",
            persona_id, "\"");
    return personas[it->second];
  }

 private:
  mutable std::unordered_map<std::string, std::size_t> id_index_;
};

inline std::string persona_id_for(std::size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "u%06zu", i);
  return buf;
}

inline Population sample_population(std::size_t b_count, std::size_t n,
                                    double alpha, std::uint64_t seed,
                                    std::vector<std::string> reward_models = {}) {
  require(b_count >= 1, "sample_population: B must be >= 1");
  require(n >= 1, "sample_population: n must be >= 1");
  require(alpha > 0.0, "sample_population: alpha must be > 0, got ", alpha);
  if (reward_models.empty()) {
    for (std::size_t b = 0; b < b_count; ++b)
      reward_models.push_back(cat("rm_", b));
  }
  require(reward_models.size() == b_count,
          "sample_population: got ", reward_models.size(),
          " reward model labels for B=", b_count);

  Population pop;
  pop.alpha = alpha;
  pop.seed = seed;
  pop.b_count = b_count;
  pop.reward_models = std::move(reward_models);
  pop.personas.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    std::uint64_t sub = derive_seed(seed, seed_domain::population, i);
    Rng rng(sub);
    Persona p;
    p.persona_id = persona_id_for(i);
    p.weights = rng.dirichlet(b_count, alpha);
    p.alpha = alpha;
    p.seed = sub;
    pop.personas.push_back(std::move(p));
  }
  return pop;
}

inline double ensemble_reward(const Persona& persona,
                              const ScoredCorpus& corpus,
                              std::size_t prompt_i, std::size_t response_i) {
  const std::size_t b_count = corpus.b_count();
  require(persona.weights.size() == b_count, "ensemble_reward: persona has ",
          persona.weights.size(), " weights, corpus has B=", b_count);
  require(prompt_i < corpus.n_prompts(), "ensemble_reward: prompt index ",
          prompt_i, " out of range");
  require(response_i < corpus.l_count(), "ensemble_reward: response index ",
          response_i, " out of range");
  const double* row = corpus.scores[prompt_i].data() + response_i * b_count;
  double acc = 0.0;
  for (std::size_t b = 0; b < b_count; ++b) acc += persona.weights[b] * row[b];
  return acc;
}

inline double ensemble_reward(const Persona& persona,
                              const ScoredCorpus& corpus,
                              const std::string& prompt_id,
                              std::size_t response_i) {
  return ensemble_reward(persona, corpus, corpus.prompt_index(prompt_id),
                         response_i);
}

// Persona's ensemble score of an externally scored response (a B-vector
// from a reward scorer rather than the stored matrix).
inline double ensemble_reward(const Persona& persona,
                              const std::vector<double>& base_scores) {
  require(persona.weights.size() == base_scores.size(),
          "ensemble_reward: persona has ", persona.weights.size(),
          " weights, score vector has ", base_scores.size());
  return std::inner_product(persona.weights.begin(), persona.weights.end(),
                            base_scores.begin(), 0.0);
}

// Response indices sorted by ensemble score, descending; ties keep ascending
// index order.
inline std::vector<std::size_t> rank_responses(const Persona& persona,
                                               const ScoredCorpus& corpus,
                                               std::size_t prompt_i) {
  const std::size_t l_count = corpus.l_count();
  std::vector<double> reward(l_count);
  for (std::size_t l = 0; l < l_count; ++l)
    reward[l] = ensemble_reward(persona, corpus, prompt_i, l);
  std::vector<std::size_t> order(l_count);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) {
                     return reward[a] > reward[b];
                   });
  return order;
}

inline std::vector<std::size_t> rank_responses(const Persona& persona,
                                               const ScoredCorpus& corpus,
                                               const std::string& prompt_id) {
  return rank_responses(persona, corpus, corpus.prompt_index(prompt_id));
}

inline std::size_t pick_winner(const Persona& persona,
                               const ScoredCorpus& corpus,
                               std::size_t prompt_i) {
  const std::size_t l_count = corpus.l_count();
  require(l_count >= 1, "pick_winner: corpus has no responses");
  std::size_t best = 0;
  double best_r = ensemble_reward(persona, corpus, prompt_i, 0);
  for (std::size_t l = 1; l < l_count; ++l) {
    double r = ensemble_reward(persona, corpus, prompt_i, l);
    if (r > best_r) {
      best_r = r;
      best = l;
    }
  }
  return best;
}

// Last element of rank_responses: the highest index among minimum-score ties.
inline std::size_t pick_loser(const Persona& persona,
                              const ScoredCorpus& corpus,
                              std::size_t prompt_i) {
  const std::size_t l_count = corpus.l_count();
  require(l_count >= 1, "pick_loser: corpus has no responses");
  std::size_t worst = 0;
  double worst_r = ensemble_reward(persona, corpus, prompt_i, 0);
  for (std::size_t l = 1; l < l_count; ++l) {
    double r = ensemble_reward(persona, corpus, prompt_i, l);
    if (r <= worst_r) {
      worst_r = r;
      worst = l;
    }
  }
  return worst;
}

inline std::size_t pick_winner(const Persona& persona,
                               const ScoredCorpus& corpus,
                               const std::string& prompt_id) {
  return pick_winner(persona, corpus, corpus.prompt_index(prompt_id));
}

inline std::size_t pick_loser(const Persona& persona,
                              const ScoredCorpus& corpus,
                              const std::string& prompt_id) {
  return pick_loser(persona, corpus, corpus.prompt_index(prompt_id));
}

// population.jsonl: header {"B", "alpha", "seed", "reward_models"}, then one
// {"persona_id", "weights"} object per persona.
inline void save_population(const std::string& path, const Population& pop) {
  jsonl::Writer out(path);
  json header;
  header["B"] = pop.b_count;
  header["alpha"] = pop.alpha;
  header["seed"] = pop.seed;
  header["reward_models"] = pop.reward_models;
  out.write(header);
  for (const auto& p : pop.personas) {
    json j;
    j["persona_id"] = p.persona_id;
    j["weights"] = p.weights;
    out.write(j);
  }
}

inline Population load_population(const std::string& path) {
  Population pop;
  bool header_seen = false;
  std::unordered_map<std::string, bool> ids;
  jsonl::for_each(path, [&](std::size_t lineno, const json& j) {
    std::string where = cat(path, ":", lineno);
    if (!header_seen) {
      pop.b_count = static_cast<std::size_t>(jsonl::get_int(j, "B", where));
      pop.alpha = jsonl::get_number(j, "alpha", where);
      pop.seed = jsonl::member(j, "seed", where).get<std::uint64_t>();
      for (const auto& m : jsonl::get_array(j, "reward_models", where))
        pop.reward_models.push_back(m.get<std::string>());
      require(pop.reward_models.size() == pop.b_count, where,
              ": reward_models length != B");
      header_seen = true;
      return;
    }
    Persona p;
    p.persona_id = jsonl::get_string(j, "persona_id", where);
    require(ids.emplace(p.persona_id, true).second, where,
            ": duplicate persona_id \"", p.persona_id, "\"");
    const json& w = jsonl::get_array(j, "weights", where);
    require(w.size() == pop.b_count, where, ": expected ", pop.b_count,
            " weights, got ", w.size());
    double sum = 0.0;
    for (const auto& v : w) {
      require(v.is_number(), where, ": weights must be numbers");
      double x = v.get<double>();
      require(x >= 0.0, where, ": negative weight");
      p.weights.push_back(x);
      sum += x;
    }
    require(std::abs(sum - 1.0) <= 1e-9, where, ": weights sum to ", sum,
            ", expected 1");
    p.alpha = pop.alpha;
    pop.personas.push_back(std::move(p));
  });
  require(header_seen, path, ": missing population header line");
  require(!pop.personas.empty(), path, ": no personas");
  return pop;
}

}  // namespace prefsim
