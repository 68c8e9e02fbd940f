#pragma once

/**
 * Survey-style representativeness: simulated personas answer multiple-choice
 * questions by ensemble-score argmax over pre-scored options, and the
 * resulting vote distribution is compared against human answer
 * distributions with a normalized 1-D Wasserstein distance.
 *
 * Options are ordinal; option j sits at position j/(K-1) on [0,1], so the
 * distance and the representativeness score 1-W both live in [0,1].
 *
 * How a reward-ensemble persona "answers" a survey item is not pinned down
 * by the model itself; here each persona deterministically picks the
 * argmax-scoring option (lowest index on ties), matching how winners are
 * picked among responses. Option scores are ingested, never computed.
 *
 * Questions may flag non-substantive options ("Refused", "Don't know") via
 * "excluded_options"; those are cut from the ordinal scale at load time and
 * human probabilities are renormalized over the kept options.
 */

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <map>
#include <set>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "prefsim/jsonl.hpp"
#include "prefsim/persona.hpp"

namespace prefsim {

struct OpinionQuestion {
  std::string question_id;
  std::string text;
  std::vector<std::string> options;     // kept options, ordinal order
  std::size_t raw_option_count = 0;     // before exclusion
  std::vector<std::size_t> excluded;    // raw indices dropped at ingest

  std::size_t k_count() const { return options.size(); }
};

// kept-option score rows for one question: K x B, row-major per option
struct OptionScores {
  std::unordered_map<std::string, std::vector<std::vector<double>>> rows;

  const std::vector<std::vector<double>>& at(
      const std::string& question_id) const {
    auto it = rows.find(question_id);
    require(it != rows.end(), "option scores: no rows for question \"",
            question_id, "\"");
    return it->second;
  }
};

struct AnswerDistribution {
  std::string question_id;
  std::vector<double> probabilities;  // non-negative, sums to 1

  std::size_t k_count() const { return probabilities.size(); }
};

inline AnswerDistribution make_distribution(const std::string& question_id,
                                            std::vector<double> probabilities) {
  require(probabilities.size() >= 2, "distribution for \"", question_id,
          "\": need K >= 2, got ", probabilities.size());
  double sum = 0.0;
  for (double p : probabilities) {
    require(std::isfinite(p) && p >= 0.0, "distribution for \"", question_id,
            "\": probabilities must be non-negative");
    sum += p;
  }
  require(std::abs(sum - 1.0) <= 1e-9, "distribution for \"", question_id,
          "\": probabilities sum to ", sum);
  AnswerDistribution d;
  d.question_id = question_id;
  d.probabilities = std::move(probabilities);
  return d;
}

inline AnswerDistribution simulate_answers(
    const Population& pop, const OpinionQuestion& question,
    const std::vector<std::vector<double>>& option_scores) {
  require(!pop.personas.empty(), "simulate_answers: empty population");
  const std::size_t k_count = question.k_count();
  require(option_scores.size() == k_count, "simulate_answers: question \"",
          question.question_id, "\" has ", k_count, " options but ",
          option_scores.size(), " score rows");

  std::vector<double> votes(k_count, 0.0);
  for (const auto& persona : pop.personas) {
    std::size_t best = 0;
    double best_r = ensemble_reward(persona, option_scores[0]);
    for (std::size_t k = 1; k < k_count; ++k) {
      double r = ensemble_reward(persona, option_scores[k]);
      if (r > best_r) {
        best_r = r;
        best = k;
      }
    }
    votes[best] += 1.0;
  }
  for (double& v : votes) v /= static_cast<double>(pop.size());
  return make_distribution(question.question_id, std::move(votes));
}

// W1 on the K equally spaced points j/(K-1):
//   W1 = sum_{j<K-1} |CDF_p(j) - CDF_q(j)| / (K-1)
inline double wasserstein_1d(const AnswerDistribution& p,
                             const AnswerDistribution& q) {
  require(p.k_count() == q.k_count(), "wasserstein_1d: K mismatch (",
          p.k_count(), " vs ", q.k_count(), ")");
  const std::size_t k_count = p.k_count();
  double cdf_p = 0.0, cdf_q = 0.0, acc = 0.0;
  for (std::size_t j = 0; j + 1 < k_count; ++j) {
    cdf_p += p.probabilities[j];
    cdf_q += q.probabilities[j];
    acc += std::abs(cdf_p - cdf_q);
  }
  return acc / static_cast<double>(k_count - 1);
}

inline double representativeness(const AnswerDistribution& p,
                                 const AnswerDistribution& q) {
  return 1.0 - wasserstein_1d(p, q);
}

// ----------------------------------------------------------------- ingest

inline std::vector<OpinionQuestion> load_questions(const std::string& path) {
  std::vector<OpinionQuestion> questions;
  std::unordered_set<std::string> seen;
  jsonl::for_each(path, [&](std::size_t lineno, const json& j) {
    std::string where = cat(path, ":", lineno);
    OpinionQuestion q;
    q.question_id = jsonl::get_string(j, "question_id", where);
    require(seen.insert(q.question_id).second, where,
            ": duplicate question_id \"", q.question_id, "\"");
    q.text = jsonl::get_string(j, "text", where);
    const json& opts = jsonl::get_array(j, "options", where);
    q.raw_option_count = opts.size();

    std::set<std::size_t> excluded;
    if (j.contains("excluded_options")) {
      for (const auto& e : jsonl::get_array(j, "excluded_options", where)) {
        require(e.is_number_unsigned(), where,
                ": excluded_options must be non-negative indices");
        std::size_t idx = e.get<std::size_t>();
        require(idx < q.raw_option_count, where, ": excluded option ", idx,
                " out of range");
        excluded.insert(idx);
      }
    }
    q.excluded.assign(excluded.begin(), excluded.end());

    for (std::size_t k = 0; k < q.raw_option_count; ++k) {
      require(opts[k].is_string(), where, ": options must be strings");
      if (!excluded.count(k)) q.options.push_back(opts[k].get<std::string>());
    }
    require(q.k_count() >= 2, where, ": question \"", q.question_id,
            "\" needs at least 2 substantive options");
    questions.push_back(std::move(q));
  });
  require(!questions.empty(), path, ": no questions");
  return questions;
}

// option_scores.jsonl rows use raw option indices; excluded options may be
// present and are ignored, every kept option must be covered.
inline OptionScores load_option_scores(
    const std::string& path, const std::vector<OpinionQuestion>& questions,
    std::size_t b_count) {
  std::unordered_map<std::string, const OpinionQuestion*> by_id;
  for (const auto& q : questions) by_id.emplace(q.question_id, &q);

  // raw index -> kept index per question
  std::unordered_map<std::string, std::vector<std::ptrdiff_t>> kept_index;
  for (const auto& q : questions) {
    std::vector<std::ptrdiff_t> map(q.raw_option_count, -1);
    std::set<std::size_t> excluded(q.excluded.begin(), q.excluded.end());
    std::ptrdiff_t next = 0;
    for (std::size_t k = 0; k < q.raw_option_count; ++k)
      if (!excluded.count(k)) map[k] = next++;
    kept_index.emplace(q.question_id, std::move(map));
  }

  OptionScores scores;
  for (const auto& q : questions)
    scores.rows[q.question_id].assign(q.k_count(), {});

  jsonl::for_each(path, [&](std::size_t lineno, const json& j) {
    std::string where = cat(path, ":", lineno);
    std::string qid = jsonl::get_string(j, "question_id", where);
    auto qit = by_id.find(qid);
    require(qit != by_id.end(), where, ": unknown question_id \"", qid, "\"");
    std::size_t raw = static_cast<std::size_t>(
        jsonl::get_int(j, "option_index", where));
    require(raw < qit->second->raw_option_count, where, ": option_index ",
            raw, " out of range for \"", qid, "\"");
    std::ptrdiff_t kept = kept_index.at(qid)[raw];
    if (kept < 0) return;  // flagged non-substantive; skip
    const json& arr = jsonl::get_array(j, "scores", where);
    require(arr.size() == b_count, where, ": expected ", b_count,
            " scores, got ", arr.size());
    std::vector<double> row;
    for (const auto& v : arr) {
      require(v.is_number(), where, ": scores must be finite numbers");
      double x = v.get<double>();
      require(std::isfinite(x), where, ": scores must be finite numbers");
      row.push_back(x);
    }
    auto& slot = scores.rows[qid][static_cast<std::size_t>(kept)];
    require(slot.empty(), where, ": duplicate scores for (\"", qid, "\", ",
            raw, ")");
    slot = std::move(row);
  });

  for (const auto& q : questions)
    for (std::size_t k = 0; k < q.k_count(); ++k)
      require(!scores.rows[q.question_id][k].empty(), path,
              ": missing scores for question \"", q.question_id,
              "\" option ", k, " (kept index)");
  return scores;
}

struct HumanDistributions {
  // group -> question_id -> distribution over kept options
  std::map<std::string, std::map<std::string, AnswerDistribution>> by_group;
};

inline HumanDistributions load_human_dists(
    const std::string& path, const std::vector<OpinionQuestion>& questions) {
  std::unordered_map<std::string, const OpinionQuestion*> by_id;
  for (const auto& q : questions) by_id.emplace(q.question_id, &q);

  HumanDistributions out;
  jsonl::for_each(path, [&](std::size_t lineno, const json& j) {
    std::string where = cat(path, ":", lineno);
    std::string qid = jsonl::get_string(j, "question_id", where);
    std::string group = jsonl::get_string(j, "group", where);
    auto qit = by_id.find(qid);
    require(qit != by_id.end(), where, ": unknown question_id \"", qid, "\"");
    const OpinionQuestion& q = *qit->second;
    const json& arr = jsonl::get_array(j, "probabilities", where);
    require(arr.size() == q.raw_option_count, where, ": expected ",
            q.raw_option_count, " probabilities, got ", arr.size());
    std::set<std::size_t> excluded(q.excluded.begin(), q.excluded.end());
    std::vector<double> kept;
    double total = 0.0;
    for (std::size_t k = 0; k < q.raw_option_count; ++k) {
      require(arr[k].is_number(), where, ": probabilities must be numbers");
      double p = arr[k].get<double>();
      require(std::isfinite(p) && p >= 0.0, where,
              ": probabilities must be non-negative");
      if (excluded.count(k)) continue;
      kept.push_back(p);
      total += p;
    }
    require(total > 0.0, where, ": no probability mass on kept options");
    for (double& p : kept) p /= total;
    auto [it, inserted] =
        out.by_group[group].emplace(qid, make_distribution(qid, std::move(kept)));
    (void)it;
    require(inserted, where, ": duplicate distribution for (\"", group,
            "\", \"", qid, "\")");
  });
  require(!out.by_group.empty(), path, ": no distributions");
  return out;
}

struct GroupScore {
  std::string group;
  double mean_score = 0.0;
  std::size_t n_questions = 0;
};

// Unweighted mean representativeness per human group, over the questions
// that group covers.
inline std::vector<GroupScore> representativeness_by_group(
    const Population& pop, const std::vector<OpinionQuestion>& questions,
    const OptionScores& scores, const HumanDistributions& humans) {
  std::map<std::string, AnswerDistribution> simulated;
  for (const auto& q : questions)
    simulated.emplace(q.question_id,
                      simulate_answers(pop, q, scores.at(q.question_id)));

  std::vector<GroupScore> out;
  for (const auto& [group, dists] : humans.by_group) {
    GroupScore gs;
    gs.group = group;
    double acc = 0.0;
    for (const auto& [qid, human] : dists) {
      auto sit = simulated.find(qid);
      require(sit != simulated.end(),
              "representativeness: human distribution references unknown "
              "question \"", qid, "\"");
      acc += representativeness(sit->second, human);
      ++gs.n_questions;
    }
    require(gs.n_questions > 0, "representativeness: group \"", group,
            "\" has no questions");
    gs.mean_score = acc / static_cast<double>(gs.n_questions);
    out.push_back(std::move(gs));
  }
  return out;
}

inline void save_representativeness_csv(const std::string& path,
                                        const std::vector<GroupScore>& table) {
  std::ofstream out(path, std::ios::binary);
  require(out.good(), "cannot open ", path, " for writing");
  out << "group,mean_score,n_questions\n";
  for (const auto& g : table) {
    require(g.group.find(',') == std::string::npos, "group name \"", g.group,
            "\" cannot be written to CSV");
    out << g.group << "," << format_double(g.mean_score) << ","
        << g.n_questions << "\n";
  }
  require(out.good(), "write failed: ", path);
}

}  // namespace prefsim
