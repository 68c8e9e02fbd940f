#pragma once

/**
 * Personalization policies over test cases.
 *
 * Generative policies render an in-context prompt from preference triplets
 * and call a generation endpoint (or its deterministic stub). Selection
 * policies pick one of the L stored responses directly, which keeps
 * evaluation fully offline. The meta-learning policy embeds the test user,
 * finds similar historical users, pools their triplets and keeps the ones
 * whose prompts are most similar to the test prompt.
 *
 * The win_and_lose and win_only context templates are fixed verbatim (the
 * shipped files under assets/templates reproduce them with numbered
 * placeholders); lose_only and lose_mislabeled have no published template
 * and are rendered by symmetry: lose_only swaps the liked block and wording
 * for the disliked side, lose_mislabeled reuses the win_only rendering with
 * losing responses in the liked slot.
 */

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "prefsim/corpus.hpp"
#include "prefsim/history.hpp"
#include "prefsim/jsonl.hpp"
#include "prefsim/persona.hpp"
#include "prefsim/retrieval.hpp"
#include "prefsim/rng.hpp"

namespace prefsim {

// ------------------------------------------------------------------ variants

enum class IclVariant { win_and_lose, win_only, lose_only, lose_mislabeled };

inline const char* to_string(IclVariant v) {
  switch (v) {
    case IclVariant::win_and_lose: return "win_and_lose";
    case IclVariant::win_only: return "win_only";
    case IclVariant::lose_only: return "lose_only";
    case IclVariant::lose_mislabeled: return "lose_mislabeled";
  }
  fail("unreachable icl variant");
}

inline IclVariant parse_icl_variant(const std::string& s) {
  if (s == "win_and_lose") return IclVariant::win_and_lose;
  if (s == "win_only") return IclVariant::win_only;
  if (s == "lose_only") return IclVariant::lose_only;
  if (s == "lose_mislabeled") return IclVariant::lose_mislabeled;
  fail("unknown icl variant \"", s, "\"");
}

namespace templates {

// Trailing spaces inside these literals are deliberate; rendered contexts
// are compared byte-for-byte against golden files.
inline constexpr const char* win_and_lose_header =
    "Below are some examples of past conversations with liked and disliked "
    "responses\nper prompt. \n\n";
inline constexpr const char* win_only_header =
    "Below are some examples of past conversations with liked responses per "
    "prompt. \n\n";
inline constexpr const char* lose_only_header =
    "Below are some examples of past conversations with disliked responses "
    "per prompt. \n\n";

inline constexpr const char* win_and_lose_footer =
    "Use the contexts above to generate a good response for the user prompt "
    "below. \nYour response should be similar to the winning responses and "
    "dissimilar from\nthe losing responses. \n\n";
inline constexpr const char* win_only_footer =
    "Use the contexts above to generate a good response for the user prompt "
    "below. \nYour response should be similar to the winning responses.\n\n";
inline constexpr const char* lose_only_footer =
    "Use the contexts above to generate a good response for the user prompt "
    "below. \nYour response should be dissimilar from the losing "
    "responses.\n\n";

}  // namespace templates

// ------------------------------------------------------------------ examples

struct IclExample {
  std::string prompt;
  std::string liked;     // filled for win_and_lose/win_only/lose_mislabeled
  std::string disliked;  // filled for win_and_lose/lose_only
  bool label_flip = false;
};

inline IclExample make_icl_example(const InteractionTriplet& t,
                                   const ScoredCorpus& corpus,
                                   IclVariant variant) {
  std::size_t pi = corpus.prompt_index(t.prompt_id);
  const std::string& win =
      corpus.responses[pi][corpus.response_model_index(t.winner_model)];
  const std::string& lose =
      corpus.responses[pi][corpus.response_model_index(t.loser_model)];
  IclExample ex;
  ex.prompt = corpus.prompts[pi].text;
  switch (variant) {
    case IclVariant::win_and_lose:
      ex.liked = win;
      ex.disliked = lose;
      break;
    case IclVariant::win_only:
      ex.liked = win;
      break;
    case IclVariant::lose_only:
      ex.disliked = lose;
      break;
    case IclVariant::lose_mislabeled:
      ex.liked = lose;  // losing response shown under the liked label
      ex.label_flip = true;
      break;
  }
  return ex;
}

inline std::string render_context(const std::vector<IclExample>& examples,
                                  const std::string& test_prompt,
                                  IclVariant variant) {
  std::string out;
  if (!examples.empty()) {
    switch (variant) {
      case IclVariant::win_and_lose:
        out += templates::win_and_lose_header;
        break;
      case IclVariant::win_only:
      case IclVariant::lose_mislabeled:
        out += templates::win_only_header;
        break;
      case IclVariant::lose_only:
        out += templates::lose_only_header;
        break;
    }
    for (const auto& ex : examples) {
      out += "User: " + ex.prompt + "\n";
      if (variant == IclVariant::lose_only) {
        out += "Disliked Response: " + ex.disliked + "\n";
      } else {
        out += "Liked Response: " + ex.liked + "\n";
        if (variant == IclVariant::win_and_lose)
          out += "Disliked Response: " + ex.disliked + "\n";
      }
      out += "\n";
    }
    switch (variant) {
      case IclVariant::win_and_lose:
        out += templates::win_and_lose_footer;
        break;
      case IclVariant::win_only:
      case IclVariant::lose_mislabeled:
        out += templates::win_only_footer;
        break;
      case IclVariant::lose_only:
        out += templates::lose_only_footer;
        break;
    }
  }
  out += "User: " + test_prompt + "\nResponse: \n";
  return out;
}

// First k history triplets, rendered around the test prompt. k = 0 gives
// the bare zero-shot form.
inline std::string assemble_context(const TestCase& tc,
                                    const ScoredCorpus& corpus,
                                    IclVariant variant, std::size_t k) {
  require(tc.history.triplets.size() >= k, "assemble_context: history of \"",
          tc.id(), "\" has ", tc.history.triplets.size(),
          " triplets, need k = ", k);
  std::vector<IclExample> examples;
  examples.reserve(k);
  for (std::size_t i = 0; i < k; ++i)
    examples.push_back(
        make_icl_example(tc.history.triplets[i], corpus, variant));
  const std::string& test_prompt =
      corpus.prompts[corpus.prompt_index(tc.test_prompt_id)].text;
  return render_context(examples, test_prompt, variant);
}

// ------------------------------------------------------------------- clients

class GenerationClient {
 public:
  virtual ~GenerationClient() = default;
  virtual std::string generate(const std::string& prompt) = 0;
  virtual std::string name() const = 0;
};

struct ScoreResult {
  std::vector<double> scores;
  std::vector<std::string> reward_models;
  bool stub = false;
};

class ScorerClient {
 public:
  virtual ~ScorerClient() = default;
  virtual ScoreResult score(const std::string& prompt,
                            const std::string& response) = 0;
  virtual std::string name() const = 0;
};

// Echoes the first liked response found in the rendered context, else the
// test prompt itself. Purely textual, so it works for any variant.
class StubGenerationClient : public GenerationClient {
 public:
  std::string generate(const std::string& prompt) override {
    const std::string liked_marker = "Liked Response: ";
    std::size_t at = prompt.find(liked_marker);
    if (at != std::string::npos) {
      std::size_t start = at + liked_marker.size();
      std::size_t end = prompt.size();
      for (const char* stop :
           {"\nDisliked Response: ", "\n\nUser: ", "\n\nUse the contexts"}) {
        std::size_t p = prompt.find(stop, start);
        if (p != std::string::npos) end = std::min(end, p);
      }
      return prompt.substr(start, end - start);
    }
    // Zero-shot form: the test prompt sits between the last "User: " and
    // the trailing "\nResponse: \n".
    std::size_t user = prompt.rfind("User: ");
    std::size_t tail = prompt.rfind("\nResponse: ");
    require(user != std::string::npos && tail != std::string::npos &&
                user + 6 <= tail,
            "stub generator: unrecognized prompt shape");
    return prompt.substr(user + 6, tail - (user + 6));
  }
  std::string name() const override { return "stub"; }
};

// Returns the stored score row of the corpus response most similar to the
// text. Similarity is cosine over a hashed bag-of-words, so a text equal to
// a stored response always maps to that response's row. Ties and empty
// texts resolve to the lowest (prompt, response) index.
class StubScorerClient : public ScorerClient {
 public:
  explicit StubScorerClient(const ScoredCorpus& corpus, std::size_t dim = 64)
      : corpus_(corpus), dim_(dim) {
    for (std::size_t i = 0; i < corpus.n_prompts(); ++i)
      for (std::size_t l = 0; l < corpus.l_count(); ++l)
        vectors_.push_back(bow_vector(corpus.responses[i][l]));
  }

  ScoreResult score(const std::string& /*prompt*/,
                    const std::string& response) override {
    // Exact text equality wins outright; hashing can collide two distinct
    // stored texts onto the same vector.
    std::size_t best = vectors_.size();
    for (std::size_t i = 0; i < corpus_.n_prompts() && best == vectors_.size();
         ++i)
      for (std::size_t l = 0; l < corpus_.l_count(); ++l)
        if (corpus_.responses[i][l] == response) {
          best = i * corpus_.l_count() + l;
          break;
        }
    if (best == vectors_.size()) {
      std::vector<double> v = bow_vector(response);
      double best_sim = -2.0;
      best = 0;
      for (std::size_t r = 0; r < vectors_.size(); ++r) {
        double sim = cosine_or_zero(v, vectors_[r]);
        if (sim > best_sim) {
          best_sim = sim;
          best = r;
        }
      }
    }
    std::size_t pi = best / corpus_.l_count();
    std::size_t l = best % corpus_.l_count();
    ScoreResult res;
    res.reward_models = corpus_.reward_models;
    res.stub = true;
    res.scores.reserve(corpus_.b_count());
    for (std::size_t b = 0; b < corpus_.b_count(); ++b)
      res.scores.push_back(corpus_.score(pi, l, b));
    return res;
  }

  std::string name() const override { return "stub"; }

 private:
  std::vector<double> bow_vector(const std::string& text) const {
    std::vector<double> v(dim_, 0.0);
    std::uint64_t h = 1469598103934665603ull;
    bool in_word = false;
    auto flush = [&]() {
      if (in_word) v[h % dim_] += 1.0;
      h = 1469598103934665603ull;
      in_word = false;
    };
    for (unsigned char c : text) {
      if (std::isspace(c)) {
        flush();
      } else {
        h = (h ^ static_cast<std::uint64_t>(std::tolower(c))) *
            1099511628211ull;
        in_word = true;
      }
    }
    flush();
    return v;
  }

  static double cosine_or_zero(const std::vector<double>& a,
                               const std::vector<double>& b) {
    double dot = 0.0, na = 0.0, nb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
      dot += a[i] * b[i];
      na += a[i] * a[i];
      nb += b[i] * b[i];
    }
    if (na == 0.0 || nb == 0.0) return -1.0;
    return dot / (std::sqrt(na) * std::sqrt(nb));
  }

  const ScoredCorpus& corpus_;
  std::size_t dim_;
  std::vector<std::vector<double>> vectors_;
};

// -------------------------------------------------------------- policy specs

enum class PolicyKind {
  zero_shot,
  self_icl,
  relevant_icl,
  meta_learn,
  oracle_select,
  random_select,
  nearest_winner_select,
};

inline const char* to_string(PolicyKind k) {
  switch (k) {
    case PolicyKind::zero_shot: return "zero_shot";
    case PolicyKind::self_icl: return "self_icl";
    case PolicyKind::relevant_icl: return "relevant_icl";
    case PolicyKind::meta_learn: return "meta_learn";
    case PolicyKind::oracle_select: return "oracle_select";
    case PolicyKind::random_select: return "random_select";
    case PolicyKind::nearest_winner_select: return "nearest_winner_select";
  }
  fail("unreachable policy kind");
}

inline PolicyKind parse_policy_kind(const std::string& s) {
  for (PolicyKind k :
       {PolicyKind::zero_shot, PolicyKind::self_icl, PolicyKind::relevant_icl,
        PolicyKind::meta_learn, PolicyKind::oracle_select,
        PolicyKind::random_select, PolicyKind::nearest_winner_select})
    if (s == to_string(k)) return k;
  fail("unknown policy kind \"", s, "\"");
}

struct PolicySpec {
  PolicyKind kind = PolicyKind::zero_shot;
  std::size_t k_shots = 5;  // ignored by zero_shot and selection kinds
  IclVariant icl_variant = IclVariant::win_only;
  EmbedMethod embed_method = EmbedMethod::winning_minus_losing;
  std::size_t top_users = 20;
  std::size_t top_examples = 3;
};

inline bool is_selection_kind(PolicyKind k) {
  return k == PolicyKind::oracle_select || k == PolicyKind::random_select ||
         k == PolicyKind::nearest_winner_select;
}

inline void validate_policy_spec(const PolicySpec& spec) {
  if (spec.kind == PolicyKind::self_icl ||
      spec.kind == PolicyKind::relevant_icl ||
      spec.kind == PolicyKind::meta_learn)
    require(spec.k_shots == 1 || spec.k_shots == 3 || spec.k_shots == 5,
            "policy spec: k_shots must be 1, 3 or 5, got ", spec.k_shots);
  if (spec.kind == PolicyKind::meta_learn) {
    require(spec.top_users >= 1, "policy spec: top_users must be >= 1");
    require(spec.top_examples >= 1, "policy spec: top_examples must be >= 1");
  }
}

inline json policy_spec_to_json(const PolicySpec& spec) {
  json j;
  j["kind"] = to_string(spec.kind);
  j["k_shots"] = spec.k_shots;
  j["icl_variant"] = to_string(spec.icl_variant);
  j["embed_method"] = to_string(spec.embed_method);
  j["top_users"] = spec.top_users;
  j["top_examples"] = spec.top_examples;
  return j;
}

inline PolicySpec policy_spec_from_json(const json& j,
                                        const std::string& where) {
  PolicySpec spec;
  spec.kind = parse_policy_kind(jsonl::get_string(j, "kind", where));
  if (j.contains("k_shots"))
    spec.k_shots =
        static_cast<std::size_t>(jsonl::get_int(j, "k_shots", where));
  if (j.contains("icl_variant"))
    spec.icl_variant =
        parse_icl_variant(jsonl::get_string(j, "icl_variant", where));
  if (j.contains("embed_method"))
    spec.embed_method =
        parse_embed_method(jsonl::get_string(j, "embed_method", where));
  if (j.contains("top_users"))
    spec.top_users =
        static_cast<std::size_t>(jsonl::get_int(j, "top_users", where));
  if (j.contains("top_examples"))
    spec.top_examples =
        static_cast<std::size_t>(jsonl::get_int(j, "top_examples", where));
  validate_policy_spec(spec);
  return spec;
}

// ------------------------------------------------------------------ outcomes

struct PolicyOutcome {
  std::string test_case_id;
  std::string test_prompt_id;
  std::string mode;  // "generative" | "selection"
  std::string policy_kind;
  std::optional<std::size_t> chosen_index;     // selection mode
  std::optional<std::string> generated_text;   // generative mode
  std::string rendered_prompt;
  std::optional<std::vector<double>> scores;   // scorer vector (generative)
  bool failed = false;
  bool fallback_self_icl = false;
  bool stub_scorer = false;
  std::string generator_name;
  std::string scorer_name;
};

inline void save_outcomes(const std::string& path,
                          const std::vector<PolicyOutcome>& outcomes) {
  jsonl::Writer out(path);
  for (const auto& o : outcomes) {
    json j;
    j["test_case_id"] = o.test_case_id;
    j["test_prompt_id"] = o.test_prompt_id;
    j["mode"] = o.mode;
    j["policy_kind"] = o.policy_kind;
    j["chosen_index"] =
        o.chosen_index ? json(*o.chosen_index) : json(nullptr);
    j["generated_text"] =
        o.generated_text ? json(*o.generated_text) : json(nullptr);
    j["rendered_prompt"] = o.rendered_prompt;
    j["scores"] = o.scores ? json(*o.scores) : json(nullptr);
    j["failed"] = o.failed;
    j["fallback_self_icl"] = o.fallback_self_icl;
    j["stub_scorer"] = o.stub_scorer;
    j["generator"] = o.generator_name;
    j["scorer"] = o.scorer_name;
    out.write(j);
  }
}

inline std::vector<PolicyOutcome> load_outcomes(const std::string& path) {
  std::vector<PolicyOutcome> out;
  jsonl::for_each(path, [&](std::size_t lineno, const json& j) {
    std::string where = cat(path, ":", lineno);
    PolicyOutcome o;
    o.test_case_id = jsonl::get_string(j, "test_case_id", where);
    o.test_prompt_id = jsonl::get_string(j, "test_prompt_id", where);
    o.mode = jsonl::get_string(j, "mode", where);
    require(o.mode == "generative" || o.mode == "selection", where,
            ": mode must be \"generative\" or \"selection\"");
    o.policy_kind = jsonl::get_string(j, "policy_kind", where);
    const json& idx = jsonl::member(j, "chosen_index", where);
    if (!idx.is_null()) {
      require(idx.is_number_unsigned(), where,
              ": chosen_index must be a non-negative integer");
      o.chosen_index = idx.get<std::size_t>();
    }
    const json& text = jsonl::member(j, "generated_text", where);
    if (!text.is_null()) {
      require(text.is_string(), where, ": generated_text must be a string");
      o.generated_text = text.get<std::string>();
    }
    o.rendered_prompt = jsonl::get_string(j, "rendered_prompt", where);
    const json& sc = jsonl::member(j, "scores", where);
    if (!sc.is_null()) {
      require(sc.is_array(), where, ": scores must be an array");
      std::vector<double> v;
      for (const auto& x : sc) {
        require(x.is_number(), where, ": scores must be numbers");
        v.push_back(x.get<double>());
      }
      o.scores = std::move(v);
    }
    o.failed = jsonl::member(j, "failed", where).get<bool>();
    o.fallback_self_icl =
        jsonl::member(j, "fallback_self_icl", where).get<bool>();
    o.stub_scorer = jsonl::member(j, "stub_scorer", where).get<bool>();
    o.generator_name = jsonl::get_string(j, "generator", where);
    o.scorer_name = jsonl::get_string(j, "scorer", where);
    if (!o.failed) {
      require((o.mode == "selection") == o.chosen_index.has_value(), where,
              ": selection outcomes carry chosen_index, generative ones do "
              "not");
      require((o.mode == "generative") == o.generated_text.has_value(), where,
              ": generative outcomes carry generated_text, selection ones do "
              "not");
    }
    out.push_back(std::move(o));
  });
  require(!out.empty(), path, ": no outcomes");
  return out;
}

// ------------------------------------------------------------ policy runners

// zero_shot / self_icl / relevant_icl: context from the user's own history.
inline PolicyOutcome run_generative_policy(const TestCase& tc,
                                           const ScoredCorpus& corpus,
                                           const PolicySpec& spec,
                                           GenerationClient& client) {
  require(spec.kind == PolicyKind::zero_shot ||
              spec.kind == PolicyKind::self_icl ||
              spec.kind == PolicyKind::relevant_icl,
          "run_generative_policy: unsupported kind ", to_string(spec.kind));
  validate_policy_spec(spec);
  std::size_t k = spec.kind == PolicyKind::zero_shot ? 0 : spec.k_shots;
  PolicyOutcome o;
  o.test_case_id = tc.id();
  o.test_prompt_id = tc.test_prompt_id;
  o.mode = "generative";
  o.policy_kind = to_string(spec.kind);
  o.rendered_prompt = assemble_context(tc, corpus, spec.icl_variant, k);
  o.generator_name = client.name();
  try {
    o.generated_text = client.generate(o.rendered_prompt);
  } catch (const Error&) {
    o.failed = true;
  }
  return o;
}

// Meta-learning: embed the test user, take the triplets of the top_users
// most similar historical users, keep the top_examples whose prompts are
// closest to the test prompt, and render them win_only. An empty candidate
// pool falls back to the user's own history (self_icl), flagged.
inline PolicyOutcome run_meta_learn(const TestCase& tc,
                                    const std::vector<UserHistory>& db,
                                    const ScoredCorpus& corpus,
                                    const EmbeddingTable& response_embeddings,
                                    const EmbeddingTable& prompt_embeddings,
                                    const PolicySpec& spec,
                                    GenerationClient& client) {
  require(spec.kind == PolicyKind::meta_learn,
          "run_meta_learn: spec kind must be meta_learn");
  validate_policy_spec(spec);

  PolicyOutcome o;
  o.test_case_id = tc.id();
  o.test_prompt_id = tc.test_prompt_id;
  o.mode = "generative";
  o.policy_kind = to_string(spec.kind);
  o.generator_name = client.name();

  // Pool triplets from the most similar historical users, most similar
  // user first, preserving each user's history order.
  std::vector<const InteractionTriplet*> pool;
  if (!db.empty()) {
    UserEmbedding query =
        embed_user(tc.history, response_embeddings, spec.embed_method);
    std::vector<UserEmbedding> db_embs;
    db_embs.reserve(db.size());
    std::unordered_map<std::string, const UserHistory*> by_id;
    for (const auto& h : db) {
      db_embs.push_back(embed_user(h, response_embeddings, spec.embed_method));
      by_id[h.persona_id] = &h;
    }
    NeighborList nn = knn_users(query, db_embs, spec.top_users);
    for (const auto& nb : nn.neighbors)
      for (const auto& t : by_id.at(nb.id)->triplets) pool.push_back(&t);
  }

  // Rank pooled prompts by similarity to the test prompt; each prompt keeps
  // its first pooled triplet (i.e. the most similar user's pair).
  std::vector<IclExample> examples;
  if (!pool.empty()) {
    std::vector<std::string> candidate_ids;
    std::unordered_map<std::string, const InteractionTriplet*> first_for;
    for (const InteractionTriplet* t : pool) {
      candidate_ids.push_back(t->prompt_id);
      first_for.emplace(t->prompt_id, t);
    }
    NeighborList ranked = knn_prompts(tc.test_prompt_id, candidate_ids,
                                      prompt_embeddings, spec.top_examples);
    for (const auto& nb : ranked.neighbors)
      examples.push_back(make_icl_example(*first_for.at(nb.id), corpus,
                                          IclVariant::win_only));
  }

  if (examples.empty()) {
    // Nothing usable from other users: self-ICL on the own history.
    o.fallback_self_icl = true;
    std::size_t k = std::min(spec.k_shots, tc.history.triplets.size());
    for (std::size_t i = 0; i < k; ++i)
      examples.push_back(make_icl_example(tc.history.triplets[i], corpus,
                                          IclVariant::win_only));
  }

  const std::string& test_prompt =
      corpus.prompts[corpus.prompt_index(tc.test_prompt_id)].text;
  o.rendered_prompt =
      render_context(examples, test_prompt, IclVariant::win_only);
  try {
    o.generated_text = client.generate(o.rendered_prompt);
  } catch (const Error&) {
    o.failed = true;
  }
  return o;
}

struct SelectionContext {
  const EmbeddingTable* response_embeddings = nullptr;  // nearest_winner only
  std::string reference_model_id;                       // zero_shot only
  std::uint64_t seed = 0;                               // random_select only
  std::size_t case_index = 0;
};

// Offline policies that pick one of the L stored responses.
inline PolicyOutcome run_selection_policy(const TestCase& tc,
                                          const ScoredCorpus& corpus,
                                          const PolicySpec& spec,
                                          const SelectionContext& ctx) {
  require(is_selection_kind(spec.kind) || spec.kind == PolicyKind::zero_shot,
          "run_selection_policy: unsupported kind ", to_string(spec.kind));
  PolicyOutcome o;
  o.test_case_id = tc.id();
  o.test_prompt_id = tc.test_prompt_id;
  o.mode = "selection";
  o.policy_kind = to_string(spec.kind);

  std::size_t pi = corpus.prompt_index(tc.test_prompt_id);
  switch (spec.kind) {
    case PolicyKind::oracle_select:
      o.chosen_index = pick_winner(tc.persona, corpus, pi);
      break;
    case PolicyKind::random_select: {
      Rng rng(derive_seed(ctx.seed, seed_domain::selection, ctx.case_index));
      o.chosen_index =
          static_cast<std::size_t>(rng.bounded(corpus.l_count()));
      break;
    }
    case PolicyKind::zero_shot:
      o.chosen_index = corpus.response_model_index(ctx.reference_model_id);
      break;
    case PolicyKind::nearest_winner_select: {
      require(ctx.response_embeddings != nullptr,
              "nearest_winner_select: response embeddings required");
      UserEmbedding liked = embed_user(tc.history, *ctx.response_embeddings,
                                       EmbedMethod::winning_only);
      std::size_t best = 0;
      double best_sim = -2.0;
      for (std::size_t l = 0; l < corpus.l_count(); ++l) {
        const auto& cand = ctx.response_embeddings->at(response_embedding_id(
            tc.test_prompt_id, corpus.response_models[l]));
        double sim = cosine_similarity(liked.vec, cand);
        if (sim > best_sim) {
          best_sim = sim;
          best = l;
        }
      }
      o.chosen_index = best;
      break;
    }
    default:
      fail("run_selection_policy: unreachable");
  }
  return o;
}

// Fills in the scorer vector for a generated response. The prompt sent to
// the scorer is the raw test prompt, not the assembled context.
inline void attach_scores(PolicyOutcome& o, const ScoredCorpus& corpus,
                          ScorerClient& scorer) {
  require(o.mode == "generative", "attach_scores: outcome is not generative");
  if (o.failed) return;
  require(o.generated_text.has_value(),
          "attach_scores: outcome has no generated text");
  const std::string& prompt =
      corpus.prompts[corpus.prompt_index(o.test_prompt_id)].text;
  o.scorer_name = scorer.name();
  try {
    ScoreResult res = scorer.score(prompt, *o.generated_text);
    require(res.scores.size() == corpus.b_count(), "scorer returned ",
            res.scores.size(), " scores, corpus has ", corpus.b_count(),
            " reward models");
    o.scores = std::move(res.scores);
    o.stub_scorer = res.stub;
  } catch (const Error&) {
    o.failed = true;
  }
}

}  // namespace prefsim
