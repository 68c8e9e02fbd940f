#pragma once

// Deterministic toy data and scratch-directory plumbing shared by the tests.

#include <unistd.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "prefsim/corpus.hpp"
#include "prefsim/embedding.hpp"
#include "prefsim/jsonl.hpp"
#include "prefsim/rng.hpp"

namespace fixtures {

namespace fs = std::filesystem;

class TempDir {
 public:
  TempDir() {
    static int counter = 0;
    path_ = fs::temp_directory_path() /
            ("prefsim_test_" + std::to_string(::getpid()) + "_" +
             std::to_string(counter++));
    fs::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const fs::path& path() const { return path_; }
  std::string str(const std::string& name) const {
    return (path_ / name).string();
  }

 private:
  fs::path path_;
};

inline std::string padded_id(const std::string& prefix, std::size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%s%04zu", prefix.c_str(), i);
  return buf;
}

// A fully in-memory corpus with iid standard-normal scores.
inline prefsim::ScoredCorpus synth_corpus(std::size_t n_prompts,
                                          std::size_t l_count,
                                          std::size_t b_count,
                                          std::uint64_t seed) {
  prefsim::ScoredCorpus c;
  for (std::size_t b = 0; b < b_count; ++b)
    c.reward_models.push_back(padded_id("rm_", b));
  for (std::size_t l = 0; l < l_count; ++l)
    c.response_models.push_back(padded_id("model_", l));

  prefsim::Rng rng(seed);
  for (std::size_t i = 0; i < n_prompts; ++i) {
    prefsim::PromptRecord p;
    p.prompt_id = padded_id("p", i);
    p.text = "prompt text " + std::to_string(i);
    p.source = "synthetic";
    c.prompts.push_back(p);

    std::vector<std::string> texts;
    std::vector<double> row(l_count * b_count);
    for (std::size_t l = 0; l < l_count; ++l) {
      texts.push_back("response " + std::to_string(l) + " to prompt " +
                      std::to_string(i));
      for (std::size_t b = 0; b < b_count; ++b)
        row[l * b_count + b] = rng.normal();
    }
    c.responses.push_back(std::move(texts));
    c.scores.push_back(std::move(row));
  }
  c.rebuild_index();
  return c;
}

// Serializes a corpus back into the three ingestion files.
inline void write_corpus_files(const prefsim::ScoredCorpus& c,
                               const fs::path& dir) {
  fs::create_directories(dir);
  {
    prefsim::jsonl::Writer w((dir / "prompts.jsonl").string());
    for (const auto& p : c.prompts)
      w.write({{"prompt_id", p.prompt_id},
               {"prompt", p.text},
               {"source", p.source}});
  }
  {
    prefsim::jsonl::Writer w((dir / "responses.jsonl").string());
    for (std::size_t i = 0; i < c.n_prompts(); ++i)
      for (std::size_t l = 0; l < c.l_count(); ++l)
        w.write({{"prompt_id", c.prompts[i].prompt_id},
                 {"model_id", c.response_models[l]},
                 {"text", c.responses[i][l]}});
  }
  {
    prefsim::jsonl::Writer w((dir / "rewards.jsonl").string());
    w.write({{"reward_models", c.reward_models}});
    for (std::size_t i = 0; i < c.n_prompts(); ++i)
      for (std::size_t l = 0; l < c.l_count(); ++l) {
        auto first = c.scores[i].begin() +
                     static_cast<std::ptrdiff_t>(l * c.b_count());
        std::vector<double> row(first,
                                first + static_cast<std::ptrdiff_t>(
                                            c.b_count()));
        w.write({{"prompt_id", c.prompts[i].prompt_id},
                 {"model_id", c.response_models[l]},
                 {"scores", row}});
      }
  }
}

inline void write_lines(const fs::path& file,
                        const std::vector<std::string>& lines) {
  std::ofstream out(file);
  for (const auto& l : lines) out << l << "\n";
}

// Deterministic unit-norm-ish embeddings for every response of a corpus.
inline prefsim::EmbeddingTable synth_response_embeddings(
    const prefsim::ScoredCorpus& c, std::size_t dim, std::uint64_t seed) {
  prefsim::EmbeddingTable t;
  prefsim::Rng rng(seed);
  for (std::size_t i = 0; i < c.n_prompts(); ++i)
    for (std::size_t l = 0; l < c.l_count(); ++l) {
      std::vector<double> v(dim);
      for (double& x : v) x = rng.normal();
      t.insert(prefsim::response_embedding_id(c.prompts[i].prompt_id,
                                              c.response_models[l]),
               v);
    }
  return t;
}

inline prefsim::EmbeddingTable synth_prompt_embeddings(
    const prefsim::ScoredCorpus& c, std::size_t dim, std::uint64_t seed) {
  prefsim::EmbeddingTable t;
  prefsim::Rng rng(seed);
  for (std::size_t i = 0; i < c.n_prompts(); ++i) {
    std::vector<double> v(dim);
    for (double& x : v) x = rng.normal();
    t.insert(c.prompts[i].prompt_id, v);
  }
  return t;
}

}  // namespace fixtures
