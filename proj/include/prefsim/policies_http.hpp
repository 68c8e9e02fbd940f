#pragma once

/**
 * Networked generation/scoring clients. Kept out of policies.hpp so the
 * (large) bundled HTTP header is only compiled where endpoints are used.
 *
 * Wire formats:
 *   POST /generate {"prompt", "max_tokens", "temperature"} -> {"text"}
 *   POST /score    {"prompt", "response"} -> {"scores", "reward_models"}
 *
 * Transport failures (unreachable endpoint, non-2xx status) are retried up
 * to 3 times with 0.5s/1s/2s backoff, then reported as an Error, which the
 * policy runners record as a failed outcome. A 2xx body that does not parse
 * is a protocol error and is not retried.
 */

#include <chrono>
#include <functional>
#include <string>
#include <thread>
#include <utility>

#include "httplib.h"
#include "prefsim/policies.hpp"

namespace prefsim {

// Injectable so tests can record the backoff schedule instead of waiting.
using Sleeper = std::function<void(double seconds)>;

inline void real_sleep(double seconds) {
  std::this_thread::sleep_for(std::chrono::duration<double>(seconds));
}

namespace client_detail {

inline constexpr double backoff_schedule[3] = {0.5, 1.0, 2.0};

inline json post_with_retry(const std::string& base_url,
                            const std::string& path, const json& payload,
                            const Sleeper& sleep, const std::string& what) {
  std::string body = payload.dump();
  std::string last_error;
  for (int attempt = 0;; ++attempt) {
    httplib::Client cli(base_url);
    auto res = cli.Post(path, body, "application/json");
    if (res && res->status >= 200 && res->status < 300) {
      json parsed = json::parse(res->body, nullptr, false);
      require(!parsed.is_discarded(), what, ": endpoint returned a body that "
              "is not valid JSON");
      return parsed;
    }
    last_error = res ? cat("status ", res->status)
                     : cat("transport error (", httplib::to_string(res.error()),
                           ")");
    if (attempt >= 3) break;
    sleep(backoff_schedule[attempt]);
  }
  fail(what, ": ", base_url, path, " failed after 4 attempts: ", last_error);
}

}  // namespace client_detail

class HttpGenerationClient : public GenerationClient {
 public:
  explicit HttpGenerationClient(std::string base_url, int max_tokens = 512,
                                double temperature = 0.0,
                                Sleeper sleep = real_sleep)
      : base_url_(std::move(base_url)),
        max_tokens_(max_tokens),
        temperature_(temperature),
        sleep_(std::move(sleep)) {}

  std::string generate(const std::string& prompt) override {
    json payload;
    payload["prompt"] = prompt;
    payload["max_tokens"] = max_tokens_;
    payload["temperature"] = temperature_;
    json res = client_detail::post_with_retry(base_url_, "/generate", payload,
                                              sleep_, "generate");
    require(res.is_object() && res.contains("text") && res["text"].is_string(),
            "generate: response must be an object with a string \"text\"");
    return res["text"].get<std::string>();
  }

  std::string name() const override { return "http:" + base_url_; }

 private:
  std::string base_url_;
  int max_tokens_;
  double temperature_;
  Sleeper sleep_;
};

class HttpScorerClient : public ScorerClient {
 public:
  explicit HttpScorerClient(std::string base_url, Sleeper sleep = real_sleep)
      : base_url_(std::move(base_url)), sleep_(std::move(sleep)) {}

  ScoreResult score(const std::string& prompt,
                    const std::string& response) override {
    json payload;
    payload["prompt"] = prompt;
    payload["response"] = response;
    json res = client_detail::post_with_retry(base_url_, "/score", payload,
                                              sleep_, "score");
    require(res.is_object() && res.contains("scores") &&
                res["scores"].is_array(),
            "score: response must be an object with a \"scores\" array");
    ScoreResult out;
    for (const auto& x : res["scores"]) {
      require(x.is_number(), "score: \"scores\" entries must be numbers");
      out.scores.push_back(x.get<double>());
    }
    if (res.contains("reward_models")) {
      require(res["reward_models"].is_array(),
              "score: \"reward_models\" must be an array");
      for (const auto& m : res["reward_models"]) {
        require(m.is_string(), "score: \"reward_models\" must be strings");
        out.reward_models.push_back(m.get<std::string>());
      }
    }
    return out;
  }

  std::string name() const override { return "http:" + base_url_; }

 private:
  std::string base_url_;
  Sleeper sleep_;
};

}  // namespace prefsim
