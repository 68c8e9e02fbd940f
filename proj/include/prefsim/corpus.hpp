#pragma once

/**
 * Prompt/response/score corpus: loading, validation, z-score normalization,
 * and dataset splits.
 *
 * A corpus is a set of prompts, L candidate responses per prompt (one per
 * generator model), and an L x B matrix of base reward-model scores per
 * prompt. Row order inside each matrix follows `response_models` (generator
 * labels in order of first appearance in responses.jsonl); column order
 * follows `reward_models` (fixed by the rewards file header).
 *
 * Corpora are immutable after load. Normalization returns a new corpus
 * flagged `normalized`; each score column is z-scored with statistics
 * computed over a chosen split (sample standard deviation, n-1 denominator).
 * Z-scoring is monotone per column, so every base model's own ranking of
 * responses is unchanged.
 */

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <set>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "prefsim/jsonl.hpp"

namespace prefsim {

struct PromptRecord {
  std::string prompt_id;
  std::string text;
  std::string source;
};

struct NormalizationStats {
  std::vector<double> mean;    // per reward-model column
  std::vector<double> stddev;  // sample std, n-1 denominator
  std::string computed_over;   // split identifier
};

struct ScoredCorpus {
  std::vector<std::string> reward_models;    // B column labels
  std::vector<std::string> response_models;  // L row labels
  std::vector<PromptRecord> prompts;
  std::vector<std::vector<std::string>> responses;  // [prompt][l] text
  std::vector<std::vector<double>> scores;          // [prompt] row-major L x B
  bool normalized = false;

  std::size_t n_prompts() const { return prompts.size(); }
  std::size_t l_count() const { return response_models.size(); }
  std::size_t b_count() const { return reward_models.size(); }

  bool has_prompt(const std::string& prompt_id) const {
    return index_.count(prompt_id) != 0;
  }

  std::size_t prompt_index(const std::string& prompt_id) const {
    auto it = index_.find(prompt_id);
    require(it != index_.end(), "corpus: unknown prompt_id \"", prompt_id,
            "\"");
    return it->second;
  }

  double score(std::size_t prompt_i, std::size_t response_i,
               std::size_t model_b) const {
    return scores[prompt_i][response_i * b_count() + model_b];
  }

  std::size_t response_model_index(const std::string& model_id) const {
    auto it = std::find(response_models.begin(), response_models.end(),
                        model_id);
    require(it != response_models.end(), "corpus: unknown response model \"",
            model_id, "\"");
    return static_cast<std::size_t>(it - response_models.begin());
  }

  void rebuild_index() {
    index_.clear();
    for (std::size_t i = 0; i < prompts.size(); ++i)
      index_.emplace(prompts[i].prompt_id, i);
  }

  // FNV-1a over ids, labels, and score bit patterns; recorded in report
  // provenance so results can be tied to the exact data they came from.
  std::uint64_t fingerprint() const {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    auto feed = [&h](const void* data, std::size_t n) {
      const unsigned char* p = static_cast<const unsigned char*>(data);
      for (std::size_t i = 0; i < n; ++i) {
        h ^= p[i];
        h *= 0x100000001b3ULL;
      }
    };
    auto feed_str = [&feed](const std::string& s) {
      feed(s.data(), s.size());
      feed("\0", 1);
    };
    for (const auto& m : reward_models) feed_str(m);
    for (const auto& m : response_models) feed_str(m);
    for (const auto& p : prompts) feed_str(p.prompt_id);
    for (const auto& row : scores) feed(row.data(), row.size() * sizeof(double));
    feed(&normalized, sizeof(normalized));
    return h;
  }

 private:
  std::unordered_map<std::string, std::size_t> index_;
};

struct SplitSpec {
  std::vector<std::string> train_ids;  // sorted, unique
  std::vector<std::string> test_ids;   // sorted, unique
};

namespace corpus_detail {

inline std::vector<std::string> sorted_unique(std::vector<std::string> ids,
                                              const std::string& what) {
  std::sort(ids.begin(), ids.end());
  auto dup = std::adjacent_find(ids.begin(), ids.end());
  require(dup == ids.end(), what, ": duplicate id \"",
          dup == ids.end() ? "" : *dup, "\"");
  return ids;
}

}  // namespace corpus_detail

inline ScoredCorpus load_corpus(const std::string& prompts_path,
                                const std::string& responses_path,
                                const std::string& rewards_path) {
  ScoredCorpus corpus;

  // prompts.jsonl
  std::unordered_set<std::string> seen_prompts;
  jsonl::for_each(prompts_path, [&](std::size_t lineno, const json& j) {
    std::string where = cat(prompts_path, ":", lineno);
    PromptRecord rec;
    rec.prompt_id = jsonl::get_string(j, "prompt_id", where);
    rec.text = jsonl::get_string(j, "prompt", where);
    rec.source = jsonl::get_string(j, "source", where);
    require(!rec.text.empty(), where, ": prompt text is empty for \"",
            rec.prompt_id, "\"");
    require(seen_prompts.insert(rec.prompt_id).second, where,
            ": duplicate prompt_id \"", rec.prompt_id, "\"");
    corpus.prompts.push_back(std::move(rec));
  });
  require(!corpus.prompts.empty(), prompts_path, ": no prompts");
  corpus.rebuild_index();

  // responses.jsonl; generator label order = first appearance.
  std::unordered_map<std::string, std::size_t> model_index;
  // texts[prompt_i][model_l], grown as models appear
  std::vector<std::vector<std::string>> texts(corpus.n_prompts());
  std::vector<std::vector<bool>> text_seen(corpus.n_prompts());
  jsonl::for_each(responses_path, [&](std::size_t lineno, const json& j) {
    std::string where = cat(responses_path, ":", lineno);
    std::string prompt_id = jsonl::get_string(j, "prompt_id", where);
    std::string model_id = jsonl::get_string(j, "model_id", where);
    std::string text = jsonl::get_string(j, "text", where);
    require(corpus.has_prompt(prompt_id), where, ": unknown prompt_id \"",
            prompt_id, "\"");
    auto [it, inserted] =
        model_index.emplace(model_id, corpus.response_models.size());
    if (inserted) corpus.response_models.push_back(model_id);
    std::size_t l = it->second;
    std::size_t pi = corpus.prompt_index(prompt_id);
    if (texts[pi].size() <= l) {
      texts[pi].resize(l + 1);
      text_seen[pi].resize(l + 1, false);
    }
    require(!text_seen[pi][l], where, ": duplicate response for (\"",
            prompt_id, "\", \"", model_id, "\")");
    text_seen[pi][l] = true;
    texts[pi][l] = std::move(text);
  });
  const std::size_t l_count = corpus.response_models.size();
  require(l_count >= 1, responses_path, ": no responses");
  for (std::size_t pi = 0; pi < corpus.n_prompts(); ++pi) {
    for (std::size_t l = 0; l < l_count; ++l) {
      bool present = l < text_seen[pi].size() && text_seen[pi][l];
      require(present, responses_path, ": prompt \"",
              corpus.prompts[pi].prompt_id, "\" is missing a response from \"",
              corpus.response_models[l], "\" (every prompt needs all ",
              l_count, " models)");
    }
    texts[pi].resize(l_count);
  }
  corpus.responses = std::move(texts);

  // rewards.jsonl: header line fixes column order, then one row per
  // (prompt, model).
  bool header_seen = false;
  std::vector<std::vector<bool>> row_seen(
      corpus.n_prompts(), std::vector<bool>(l_count, false));
  corpus.scores.assign(corpus.n_prompts(), {});
  jsonl::for_each(rewards_path, [&](std::size_t lineno, const json& j) {
    std::string where = cat(rewards_path, ":", lineno);
    if (!header_seen) {
      const json& models = jsonl::get_array(j, "reward_models", where);
      for (const auto& m : models) {
        require(m.is_string(), where, ": reward_models must be strings");
        corpus.reward_models.push_back(m.get<std::string>());
      }
      require(!corpus.reward_models.empty(), where, ": empty reward_models");
      std::set<std::string> uniq(corpus.reward_models.begin(),
                                 corpus.reward_models.end());
      require(uniq.size() == corpus.reward_models.size(), where,
              ": duplicate reward model label");
      for (auto& row : corpus.scores)
        row.assign(l_count * corpus.reward_models.size(), 0.0);
      header_seen = true;
      return;
    }
    const std::size_t b_count = corpus.reward_models.size();
    std::string prompt_id = jsonl::get_string(j, "prompt_id", where);
    std::string model_id = jsonl::get_string(j, "model_id", where);
    const json& scores = jsonl::get_array(j, "scores", where);
    require(corpus.has_prompt(prompt_id), where, ": unknown prompt_id \"",
            prompt_id, "\"");
    auto mit = model_index.find(model_id);
    require(mit != model_index.end(), where, ": unknown model_id \"",
            model_id, "\"");
    require(scores.size() == b_count, where, ": expected ", b_count,
            " scores, got ", scores.size());
    std::size_t pi = corpus.prompt_index(prompt_id);
    std::size_t l = mit->second;
    require(!row_seen[pi][l], where, ": duplicate scores for (\"", prompt_id,
            "\", \"", model_id, "\")");
    row_seen[pi][l] = true;
    for (std::size_t b = 0; b < b_count; ++b) {
      // NaN/Inf cannot survive strict JSON; producers emit null instead.
      require(scores[b].is_number(), where,
              ": score is not a finite number for prompt \"", prompt_id,
              "\", column \"", corpus.reward_models[b], "\"");
      double v = scores[b].get<double>();
      require(std::isfinite(v), where,
              ": score is not a finite number for prompt \"", prompt_id,
              "\", column \"", corpus.reward_models[b], "\"");
      corpus.scores[pi][l * b_count + b] = v;
    }
  });
  require(header_seen, rewards_path, ": missing reward_models header line");
  for (std::size_t pi = 0; pi < corpus.n_prompts(); ++pi)
    for (std::size_t l = 0; l < l_count; ++l)
      require(row_seen[pi][l], rewards_path, ": missing scores for (\"",
              corpus.prompts[pi].prompt_id, "\", \"",
              corpus.response_models[l], "\")");

  return corpus;
}

// Sample mean / sample std of every score column over the cells
// (prompt in split, response). Errors on all-equal (zero variance) columns.
inline NormalizationStats compute_normalization(
    const ScoredCorpus& corpus, const std::vector<std::string>& split_ids,
    const std::string& split_label) {
  require(!split_ids.empty(), "compute_normalization: empty split");
  const std::size_t b_count = corpus.b_count();
  const std::size_t l_count = corpus.l_count();

  std::vector<double> sum(b_count, 0.0);
  std::vector<double> lo(b_count, 0.0), hi(b_count, 0.0);
  std::size_t n_cells = 0;
  for (const auto& id : split_ids) {
    std::size_t pi = corpus.prompt_index(id);
    for (std::size_t l = 0; l < l_count; ++l) {
      for (std::size_t b = 0; b < b_count; ++b) {
        double v = corpus.score(pi, l, b);
        if (n_cells == 0) {
          lo[b] = hi[b] = v;
        } else {
          lo[b] = std::min(lo[b], v);
          hi[b] = std::max(hi[b], v);
        }
        sum[b] += v;
      }
      ++n_cells;
    }
  }
  require(n_cells >= 2, "compute_normalization: need at least 2 cells, got ",
          n_cells);

  NormalizationStats stats;
  stats.computed_over = split_label;
  stats.mean.resize(b_count);
  stats.stddev.resize(b_count);
  for (std::size_t b = 0; b < b_count; ++b)
    stats.mean[b] = sum[b] / static_cast<double>(n_cells);

  std::vector<double> ss(b_count, 0.0);
  for (const auto& id : split_ids) {
    std::size_t pi = corpus.prompt_index(id);
    for (std::size_t l = 0; l < l_count; ++l)
      for (std::size_t b = 0; b < b_count; ++b) {
        double d = corpus.score(pi, l, b) - stats.mean[b];
        ss[b] += d * d;
      }
  }
  for (std::size_t b = 0; b < b_count; ++b) {
    require(lo[b] != hi[b], "compute_normalization: column \"",
            corpus.reward_models[b], "\" has zero variance over split \"",
            split_label, "\"");
    stats.stddev[b] = std::sqrt(ss[b] / static_cast<double>(n_cells - 1));
    require(stats.stddev[b] > 0.0, "compute_normalization: column \"",
            corpus.reward_models[b], "\" has zero variance over split \"",
            split_label, "\"");
  }
  return stats;
}

inline ScoredCorpus normalize_rewards(const ScoredCorpus& corpus,
                                      const NormalizationStats& stats) {
  require(stats.mean.size() == corpus.b_count() &&
              stats.stddev.size() == corpus.b_count(),
          "normalize_rewards: stats have ", stats.mean.size(),
          " columns, corpus has ", corpus.b_count());
  ScoredCorpus out = corpus;
  const std::size_t b_count = corpus.b_count();
  for (auto& row : out.scores)
    for (std::size_t i = 0; i < row.size(); ++i) {
      std::size_t b = i % b_count;
      row[i] = (row[i] - stats.mean[b]) / stats.stddev[b];
    }
  out.normalized = true;
  out.rebuild_index();
  return out;
}

inline SplitSpec load_splits(const std::string& path) {
  std::ifstream in(path);
  require(in.good(), "cannot open ", path);
  json j = json::parse(in, nullptr, /*allow_exceptions=*/false);
  require(!j.is_discarded() && j.is_object(), path, ": invalid JSON object");
  auto read_side = [&](const char* key) {
    const json& arr = jsonl::get_array(j, key, path);
    std::vector<std::string> ids;
    for (const auto& v : arr) {
      require(v.is_string(), path, ": ", key, " entries must be strings");
      ids.push_back(v.get<std::string>());
    }
    return corpus_detail::sorted_unique(std::move(ids), cat(path, " ", key));
  };
  SplitSpec spec;
  spec.train_ids = read_side("train");
  spec.test_ids = read_side("test");
  std::vector<std::string> overlap;
  std::set_intersection(spec.train_ids.begin(), spec.train_ids.end(),
                        spec.test_ids.begin(), spec.test_ids.end(),
                        std::back_inserter(overlap));
  require(overlap.empty(), path, ": train and test overlap (e.g. \"",
          overlap.empty() ? "" : overlap.front(), "\")");
  return spec;
}

inline void validate_split(const SplitSpec& spec, const ScoredCorpus& corpus) {
  for (const auto& id : spec.train_ids)
    require(corpus.has_prompt(id), "split: train id \"", id,
            "\" not in corpus");
  for (const auto& id : spec.test_ids)
    require(corpus.has_prompt(id), "split: test id \"", id,
            "\" not in corpus");
}

}  // namespace prefsim
