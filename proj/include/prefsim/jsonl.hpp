#pragma once

#include <charconv>
#include <cstdio>
#include <fstream>
#include <functional>
#include <string>
#include <system_error>

#include "json.hpp"
#include "prefsim/error.hpp"

namespace prefsim {

using json = nlohmann::json;

namespace jsonl {

// Applies fn(line_number, object) to every non-blank line of a JSONL file.
inline void for_each(const std::string& path,
                     const std::function<void(std::size_t, const json&)>& fn) {
  std::ifstream in(path);
  require(in.good(), "cannot open ", path);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    json j = json::parse(line, nullptr, /*allow_exceptions=*/false);
    require(!j.is_discarded(), path, ":", lineno, ": invalid JSON");
    require(j.is_object(), path, ":", lineno, ": expected a JSON object");
    fn(lineno, j);
  }
}

class Writer {
 public:
  explicit Writer(const std::string& path) : out_(path) {
    require(out_.good(), "cannot open ", path, " for writing");
  }
  void write(const json& j) { out_ << j.dump() << '\n'; }

 private:
  std::ofstream out_;
};

inline const json& member(const json& j, const char* key,
                          const std::string& where) {
  auto it = j.find(key);
  require(it != j.end(), where, ": missing field \"", key, "\"");
  return *it;
}

inline std::string get_string(const json& j, const char* key,
                              const std::string& where) {
  const json& v = member(j, key, where);
  require(v.is_string(), where, ": field \"", key, "\" must be a string");
  return v.get<std::string>();
}

inline double get_number(const json& j, const char* key,
                         const std::string& where) {
  const json& v = member(j, key, where);
  require(v.is_number(), where, ": field \"", key, "\" must be a number");
  return v.get<double>();
}

inline std::int64_t get_int(const json& j, const char* key,
                            const std::string& where) {
  const json& v = member(j, key, where);
  require(v.is_number_integer(), where, ": field \"", key,
          "\" must be an integer");
  return v.get<std::int64_t>();
}

inline const json& get_array(const json& j, const char* key,
                             const std::string& where) {
  const json& v = member(j, key, where);
  require(v.is_array(), where, ": field \"", key, "\" must be an array");
  return v;
}

}  // namespace jsonl

// Shortest decimal form that round-trips the double; used for CSV output so
// that emitted text is a pure function of the value.
inline std::string format_double(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  require(res.ec == std::errc{}, "format_double: conversion failed");
  return std::string(buf, res.ptr);
}

inline double parse_double(const std::string& s, const std::string& where) {
  // std::from_chars<double> is locale-free and accepts the full float syntax.
  double v = 0.0;
  auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  require(res.ec == std::errc{} && res.ptr == s.data() + s.size(), where,
          ": \"", s, "\" is not a number");
  return v;
}

}  // namespace prefsim
