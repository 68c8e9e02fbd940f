#pragma once

/**
 * User embeddings and exact nearest-neighbour lookups.
 *
 * A user is embedded as the mean of response-embedding vectors taken from
 * their history:
 *   winning_minus_losing  mean over triplets of emb(winner) - emb(loser)
 *   winning_only          mean of emb(winner)
 *   losing_only           mean of emb(loser)
 *
 * winning_minus_losing can collapse to the zero vector (e.g. a user whose
 * winners and losers embed identically); that case falls back to
 * winning_only and the result is flagged, since cosine similarity is
 * undefined at zero. All neighbour searches are exhaustive: similarity
 * descending, ties broken by id ascending.
 */

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <fstream>
#include <string>
#include <unordered_set>
#include <vector>

#include "prefsim/embedding.hpp"
#include "prefsim/history.hpp"
#include "prefsim/jsonl.hpp"

namespace prefsim {

enum class EmbedMethod { winning_minus_losing, winning_only, losing_only };

inline const char* to_string(EmbedMethod m) {
  switch (m) {
    case EmbedMethod::winning_minus_losing: return "winning_minus_losing";
    case EmbedMethod::winning_only: return "winning_only";
    case EmbedMethod::losing_only: return "losing_only";
  }
  fail("unreachable embed method");
}

inline EmbedMethod parse_embed_method(const std::string& s) {
  if (s == "winning_minus_losing") return EmbedMethod::winning_minus_losing;
  if (s == "winning_only") return EmbedMethod::winning_only;
  if (s == "losing_only") return EmbedMethod::losing_only;
  fail("unknown embed method \"", s,
        "\" (expected winning_minus_losing, winning_only or losing_only)");
}

inline double cosine_similarity(const std::vector<double>& u,
                                const std::vector<double>& v) {
  require(u.size() == v.size(), "cosine: dimension mismatch (", u.size(),
          " vs ", v.size(), ")");
  require(!u.empty(), "cosine: empty vectors");
  double dot = 0.0, nu = 0.0, nv = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    dot += u[i] * v[i];
    nu += u[i] * u[i];
    nv += v[i] * v[i];
  }
  require(nu > 0.0 && nv > 0.0, "cosine: undefined for a zero vector");
  return dot / (std::sqrt(nu) * std::sqrt(nv));
}

struct UserEmbedding {
  std::string persona_id;
  EmbedMethod method = EmbedMethod::winning_minus_losing;
  std::vector<double> vec;
  // True when winning_minus_losing collapsed to zero and winning_only was
  // used instead; `method` reports what the vector actually is.
  bool fallback = false;
};

namespace retrieval_detail {

inline bool is_zero(const std::vector<double>& v) {
  for (double x : v)
    if (x != 0.0) return false;
  return true;
}

inline std::vector<double> mean_vector(const UserHistory& h,
                                       const EmbeddingTable& table,
                                       EmbedMethod method) {
  std::vector<double> acc(table.dim(), 0.0);
  for (const auto& t : h.triplets) {
    const auto& win = table.at(response_embedding_id(t.prompt_id, t.winner_model));
    const auto& lose = table.at(response_embedding_id(t.prompt_id, t.loser_model));
    for (std::size_t d = 0; d < acc.size(); ++d) {
      switch (method) {
        case EmbedMethod::winning_minus_losing: acc[d] += win[d] - lose[d]; break;
        case EmbedMethod::winning_only: acc[d] += win[d]; break;
        case EmbedMethod::losing_only: acc[d] += lose[d]; break;
      }
    }
  }
  for (double& x : acc) x /= static_cast<double>(h.triplets.size());
  return acc;
}

}  // namespace retrieval_detail

inline UserEmbedding embed_user(const UserHistory& history,
                                const EmbeddingTable& table,
                                EmbedMethod method) {
  require(!history.triplets.empty(), "embed_user: empty history for \"",
          history.persona_id, "\"");
  require(table.dim() > 0, "embed_user: embedding table is empty");
  UserEmbedding e;
  e.persona_id = history.persona_id;
  e.method = method;
  e.vec = retrieval_detail::mean_vector(history, table, method);
  if (retrieval_detail::is_zero(e.vec) &&
      method == EmbedMethod::winning_minus_losing) {
    e.method = EmbedMethod::winning_only;
    e.fallback = true;
    e.vec = retrieval_detail::mean_vector(history, table, e.method);
  }
  require(!retrieval_detail::is_zero(e.vec),
          "embed_user: embedding for \"", history.persona_id,
          "\" is the zero vector");
  return e;
}

struct Neighbor {
  std::string id;
  double similarity = 0.0;
};

struct NeighborList {
  std::string query_id;
  std::vector<Neighbor> neighbors;  // similarity descending, id ascending
  // True when fewer than k candidates existed and everything was returned.
  bool clipped = false;
};

namespace retrieval_detail {

inline void sort_neighbors(std::vector<Neighbor>& v) {
  std::sort(v.begin(), v.end(), [](const Neighbor& a, const Neighbor& b) {
    if (a.similarity != b.similarity) return a.similarity > b.similarity;
    return a.id < b.id;
  });
}

}  // namespace retrieval_detail

inline NeighborList knn_users(const UserEmbedding& query,
                              const std::vector<UserEmbedding>& db,
                              std::size_t k) {
  require(k >= 1, "knn_users: k must be at least 1");
  require(!db.empty(), "knn_users: empty database");
  NeighborList out;
  out.query_id = query.persona_id;
  out.neighbors.reserve(db.size());
  for (const auto& e : db)
    out.neighbors.push_back({e.persona_id, cosine_similarity(query.vec, e.vec)});
  retrieval_detail::sort_neighbors(out.neighbors);
  if (k >= out.neighbors.size()) {
    out.clipped = k > out.neighbors.size();
  } else {
    out.neighbors.resize(k);
  }
  return out;
}

inline NeighborList knn_prompts(const std::string& prompt_id,
                                const std::vector<std::string>& candidates,
                                const EmbeddingTable& table, std::size_t k) {
  require(k >= 1, "knn_prompts: k must be at least 1");
  const auto& q = table.at(prompt_id);
  NeighborList out;
  out.query_id = prompt_id;
  std::unordered_set<std::string> seen;
  for (const auto& c : candidates) {
    if (c == prompt_id) continue;
    if (!seen.insert(c).second) continue;
    out.neighbors.push_back({c, cosine_similarity(q, table.at(c))});
  }
  // Self-exclusion may leave nothing; that is an empty (clipped) result.
  retrieval_detail::sort_neighbors(out.neighbors);
  if (k >= out.neighbors.size()) {
    out.clipped = k > out.neighbors.size();
  } else {
    out.neighbors.resize(k);
  }
  return out;
}

inline void save_user_embeddings(const std::string& path,
                                 const std::vector<UserEmbedding>& embs) {
  require(!embs.empty(), "save_user_embeddings: nothing to save");
  std::ofstream out(path, std::ios::binary);
  require(out.good(), "cannot open ", path, " for writing");
  std::size_t dim = embs.front().vec.size();
  out << "persona_id,method";
  for (std::size_t d = 0; d < dim; ++d) out << ",v" << d;
  out << "\n";
  for (const auto& e : embs) {
    require(e.vec.size() == dim, "save_user_embeddings: \"", e.persona_id,
            "\" has dimension ", e.vec.size(), ", expected ", dim);
    require(e.persona_id.find(',') == std::string::npos,
            "save_user_embeddings: comma in persona_id");
    out << e.persona_id << ',' << to_string(e.method);
    for (double x : e.vec) out << ',' << format_double(x);
    out << "\n";
  }
  require(out.good(), "write failed for ", path);
}

inline std::vector<UserEmbedding> load_user_embeddings(
    const std::string& path) {
  std::ifstream in(path);
  require(in.good(), "cannot open ", path);
  std::string line;
  require(static_cast<bool>(std::getline(in, line)), path, ": empty file");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  require(line.rfind("persona_id,method", 0) == 0, path,
          ": header must start with \"persona_id,method\"");

  std::vector<UserEmbedding> out;
  std::unordered_set<std::string> ids;
  std::size_t dim = 0, lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::string where = cat(path, ":", lineno);
    std::vector<std::string> fields;
    std::size_t start = 0;
    while (start <= line.size()) {
      std::size_t comma = line.find(',', start);
      std::size_t end = comma == std::string::npos ? line.size() : comma;
      fields.push_back(line.substr(start, end - start));
      if (comma == std::string::npos) break;
      start = comma + 1;
    }
    require(fields.size() >= 3, where, ": expected at least 3 fields");
    UserEmbedding e;
    e.persona_id = fields[0];
    require(ids.insert(e.persona_id).second, where,
            ": duplicate persona_id \"", e.persona_id, "\"");
    e.method = parse_embed_method(fields[1]);
    for (std::size_t i = 2; i < fields.size(); ++i)
      e.vec.push_back(parse_double(fields[i], where));
    if (dim == 0) dim = e.vec.size();
    require(e.vec.size() == dim, where, ": dimension ", e.vec.size(),
            ", expected ", dim);
    out.push_back(std::move(e));
  }
  require(!out.empty(), path, ": no embeddings");
  return out;
}

}  // namespace prefsim
