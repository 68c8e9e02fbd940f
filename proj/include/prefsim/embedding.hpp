#pragma once

/// Fixed-dimension embedding vectors keyed by id, loaded from CSV
/// ("id,v0,...,v{dim-1}"). Prompts are keyed by prompt_id; responses by
/// response_embedding_id(prompt_id, model_id). Missing ids are allowed at
/// load time; lookups fail per-id so prompts and responses can be embedded
/// in separate passes.

#include <cmath>
#include <cstddef>
#include <fstream>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include "prefsim/jsonl.hpp"

namespace prefsim {

inline std::string response_embedding_id(const std::string& prompt_id,
                                         const std::string& model_id) {
  return prompt_id + "#" + model_id;
}

class EmbeddingTable {
 public:
  EmbeddingTable() = default;
  explicit EmbeddingTable(std::size_t dim) : dim_(dim) {}

  std::size_t dim() const { return dim_; }
  std::size_t size() const { return entries_.size(); }

  void insert(const std::string& id, std::vector<double> v) {
    if (dim_ == 0) dim_ = v.size();
    require(v.size() == dim_, "embeddings: id \"", id, "\" has dimension ",
            v.size(), ", expected ", dim_);
    for (double x : v)
      require(std::isfinite(x), "embeddings: non-finite component in \"", id,
              "\"");
    require(entries_.emplace(id, std::move(v)).second,
            "embeddings: duplicate id \"", id, "\"");
  }

  bool contains(const std::string& id) const { return entries_.count(id); }

  const std::vector<double>& at(const std::string& id) const {
    auto it = entries_.find(id);
    require(it != entries_.end(), "embeddings: no vector for id \"", id,
            "\"");
    return it->second;
  }

  const std::unordered_map<std::string, std::vector<double>>& entries() const {
    return entries_;
  }

 private:
  std::size_t dim_ = 0;
  std::unordered_map<std::string, std::vector<double>> entries_;
};

inline EmbeddingTable load_embeddings(const std::string& path) {
  std::ifstream in(path);
  require(in.good(), "cannot open ", path);
  std::string line;
  require(static_cast<bool>(std::getline(in, line)), path, ": empty file");
  require(line.rfind("id,", 0) == 0, path,
          ": header must start with \"id,\"");

  EmbeddingTable table;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::string where = cat(path, ":", lineno);
    std::vector<double> v;
    std::string id;
    std::size_t start = 0;
    bool first = true;
    while (start <= line.size()) {
      std::size_t comma = line.find(',', start);
      std::size_t end = comma == std::string::npos ? line.size() : comma;
      std::string field = line.substr(start, end - start);
      if (first) {
        id = field;
        require(!id.empty(), where, ": empty id");
        first = false;
      } else {
        v.push_back(parse_double(field, where));
      }
      if (comma == std::string::npos) break;
      start = comma + 1;
    }
    if (table.dim() != 0)
      require(v.size() == table.dim(), where, ": id \"", id, "\" has ",
              v.size(), " components, expected ", table.dim());
    require(!v.empty(), where, ": no vector components");
    table.insert(id, std::move(v));
  }
  return table;
}

}  // namespace prefsim
