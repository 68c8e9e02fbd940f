#pragma once

// Turning policy outcomes into numbers: per-case ensemble rewards, win rate
// against a fixed reference model, and side-by-side policy comparisons.
//
// A case's reward is the persona's ensemble score of what the policy
// produced — the stored score row for selection policies, the scorer vector
// for generative ones. The win column compares that reward with the
// persona's score of the reference model's stored response: 1 above,
// 0.5 equal, 0 below. Ties at 0.5 keep "always pick the reference" at
// exactly one half.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <fstream>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "prefsim/corpus.hpp"
#include "prefsim/error.hpp"
#include "prefsim/jsonl.hpp"
#include "prefsim/persona.hpp"
#include "prefsim/policies.hpp"

namespace prefsim {

struct CaseResult {
  std::string test_case_id;
  double reward = 0.0;
  double win = 0.0;  // 0, 0.5 or 1
};

struct EvalReport {
  json policy;  // spec the outcomes were produced with
  std::string mode;
  std::size_t n_cases = 0;
  double mean_reward = 0.0;
  double win_rate = 0.0;
  std::vector<CaseResult> cases;
  json provenance;
};

inline EvalReport evaluate(const std::vector<PolicyOutcome>& outcomes,
                           const Population& pop, const ScoredCorpus& corpus,
                           const std::string& reference_model_id,
                           json policy = json::object(),
                           json provenance = json::object()) {
  require(!outcomes.empty(), "evaluate: no outcomes");
  std::size_t ref = corpus.response_model_index(reference_model_id);

  EvalReport rep;
  rep.mode = outcomes.front().mode;
  if (policy.empty()) policy["kind"] = outcomes.front().policy_kind;
  rep.policy = std::move(policy);
  rep.provenance = std::move(provenance);

  std::set<std::string> seen;
  double reward_sum = 0.0, win_sum = 0.0;
  for (const auto& o : outcomes) {
    require(!o.failed, "evaluate: outcome for case \"", o.test_case_id,
            "\" is marked failed");
    require(o.mode == rep.mode, "evaluate: mixed outcome modes (\"", rep.mode,
            "\" vs \"", o.mode, "\")");
    require(o.policy_kind == outcomes.front().policy_kind,
            "evaluate: mixed policy kinds");
    require(seen.insert(o.test_case_id).second,
            "evaluate: duplicate test case \"", o.test_case_id, "\"");

    const Persona& persona = pop.by_id(o.test_case_id);
    std::size_t pi = corpus.prompt_index(o.test_prompt_id);
    double reward;
    if (o.mode == "selection") {
      require(o.chosen_index.has_value(), "evaluate: case \"", o.test_case_id,
              "\" has no chosen index");
      reward = ensemble_reward(persona, corpus, pi, *o.chosen_index);
    } else {
      require(o.scores.has_value(), "evaluate: generative case \"",
              o.test_case_id, "\" has no scorer vector");
      reward = ensemble_reward(persona, *o.scores);
    }
    double ref_reward = ensemble_reward(persona, corpus, pi, ref);
    double win = reward > ref_reward ? 1.0 : reward < ref_reward ? 0.0 : 0.5;

    rep.cases.push_back({o.test_case_id, reward, win});
    reward_sum += reward;
    win_sum += win;
  }
  rep.n_cases = rep.cases.size();
  rep.mean_reward = reward_sum / static_cast<double>(rep.n_cases);
  rep.win_rate = win_sum / static_cast<double>(rep.n_cases);
  return rep;
}

// ------------------------------------------------------------------ report io

inline json report_to_json(const EvalReport& rep) {
  json j;
  j["policy"] = rep.policy;
  j["mode"] = rep.mode;
  j["n_cases"] = rep.n_cases;
  j["mean_reward"] = rep.mean_reward;
  j["win_rate"] = rep.win_rate;
  j["cases"] = json::array();
  for (const auto& c : rep.cases)
    j["cases"].push_back({{"test_case_id", c.test_case_id},
                          {"reward", c.reward},
                          {"win", c.win}});
  j["provenance"] = rep.provenance;
  return j;
}

inline EvalReport report_from_json(const json& j, const std::string& where) {
  EvalReport rep;
  rep.policy = j.at("policy");
  rep.mode = jsonl::get_string(j, "mode", where);
  rep.mean_reward = jsonl::get_number(j, "mean_reward", where);
  rep.win_rate = jsonl::get_number(j, "win_rate", where);
  require(rep.win_rate >= 0.0 && rep.win_rate <= 1.0, where,
          ": win_rate out of [0,1]");
  const json& cases = jsonl::get_array(j, "cases", where);
  for (const json& c : cases) {
    CaseResult r;
    r.test_case_id = jsonl::get_string(c, "test_case_id", where);
    r.reward = jsonl::get_number(c, "reward", where);
    r.win = jsonl::get_number(c, "win", where);
    require(r.win == 0.0 || r.win == 0.5 || r.win == 1.0, where,
            ": win must be 0, 0.5 or 1");
    rep.cases.push_back(std::move(r));
  }
  std::size_t n = static_cast<std::size_t>(jsonl::get_int(j, "n_cases", where));
  require(n == rep.cases.size() && n > 0, where,
          ": n_cases does not match the case list");
  rep.n_cases = n;
  rep.provenance = j.value("provenance", json::object());
  return rep;
}

inline void save_report(const std::string& path, const EvalReport& rep) {
  std::ofstream out(path, std::ios::binary);
  require(out.good(), "cannot open ", path, " for writing");
  out << report_to_json(rep).dump(2) << "\n";
  require(out.good(), "write to ", path, " failed");
}

inline EvalReport load_report(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  require(in.good(), "cannot open ", path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    fail(path, ": not valid JSON: ", e.what());
  }
  return report_from_json(j, path);
}

// ----------------------------------------------------------------- comparison

inline std::string policy_label(const json& policy) {
  std::string kind = policy.value("kind", std::string("unknown"));
  if (kind == "self_icl" || kind == "relevant_icl")
    return cat(kind, "[k=", policy.value("k_shots", 0),
               ",", policy.value("icl_variant", std::string("win_only")), "]");
  if (kind == "meta_learn")
    return cat(kind, "[top_users=", policy.value("top_users", 0),
               ",top_examples=", policy.value("top_examples", 0), "]");
  return kind;
}

struct PolicyRow {
  std::string label;
  std::size_t n_cases = 0;
  double mean_reward = 0.0;
  double win_rate = 0.0;
};

// Sign test over the per-case reward deltas of one policy pair; ties dropped.
struct PairedDelta {
  std::string a, b;
  double mean_delta_reward = 0.0;
  double mean_delta_win = 0.0;
  std::size_t wins = 0, losses = 0, ties = 0;
  double sign_test_p = 1.0;
};

struct Comparison {
  std::vector<PolicyRow> rows;
  std::vector<PairedDelta> pairs;
  std::size_t n_cases = 0;
};

namespace bench_detail {

// Two-sided exact binomial sign test, p = min(1, 2 P(X <= min(w, l))).
inline double sign_test_p(std::size_t wins, std::size_t losses) {
  std::size_t n = wins + losses;
  if (n == 0) return 1.0;
  std::size_t k = std::min(wins, losses);
  double log_half_n = static_cast<double>(n) * std::log(0.5);
  double p = 0.0;
  for (std::size_t i = 0; i <= k; ++i)
    p += std::exp(std::lgamma(static_cast<double>(n) + 1.0) -
                  std::lgamma(static_cast<double>(i) + 1.0) -
                  std::lgamma(static_cast<double>(n - i) + 1.0) + log_half_n);
  return std::min(1.0, 2.0 * p);
}

}  // namespace bench_detail

inline Comparison compare(const std::vector<EvalReport>& reports) {
  require(reports.size() >= 2, "compare: need at least 2 reports, got ",
          reports.size());

  // Align cases by id; every report must cover exactly the same set.
  std::vector<std::map<std::string, const CaseResult*>> by_id(reports.size());
  for (std::size_t r = 0; r < reports.size(); ++r)
    for (const auto& c : reports[r].cases) {
      require(by_id[r].emplace(c.test_case_id, &c).second,
              "compare: report ", r, " repeats case \"", c.test_case_id,
              "\"");
    }
  for (std::size_t r = 1; r < reports.size(); ++r) {
    require(by_id[r].size() == by_id[0].size(),
            "compare: reports cover different numbers of cases");
    for (const auto& [id, _] : by_id[0])
      require(by_id[r].count(id) == 1, "compare: case \"", id,
              "\" is missing from report ", r);
  }

  Comparison cmp;
  cmp.n_cases = by_id[0].size();
  for (const auto& rep : reports)
    cmp.rows.push_back({policy_label(rep.policy), rep.n_cases,
                        rep.mean_reward, rep.win_rate});

  for (std::size_t a = 0; a < reports.size(); ++a)
    for (std::size_t b = a + 1; b < reports.size(); ++b) {
      PairedDelta d;
      d.a = cmp.rows[a].label;
      d.b = cmp.rows[b].label;
      double dr = 0.0, dw = 0.0;
      for (const auto& [id, ca] : by_id[a]) {
        const CaseResult* cb = by_id[b].at(id);
        double delta = ca->reward - cb->reward;
        dr += delta;
        dw += ca->win - cb->win;
        if (delta > 0.0)
          ++d.wins;
        else if (delta < 0.0)
          ++d.losses;
        else
          ++d.ties;
      }
      d.mean_delta_reward = dr / static_cast<double>(cmp.n_cases);
      d.mean_delta_win = dw / static_cast<double>(cmp.n_cases);
      d.sign_test_p = bench_detail::sign_test_p(d.wins, d.losses);
      cmp.pairs.push_back(std::move(d));
    }
  return cmp;
}

inline json comparison_to_json(const Comparison& cmp) {
  json j;
  j["n_cases"] = cmp.n_cases;
  j["policies"] = json::array();
  for (const auto& r : cmp.rows)
    j["policies"].push_back({{"policy", r.label},
                             {"n_cases", r.n_cases},
                             {"mean_reward", r.mean_reward},
                             {"win_rate", r.win_rate}});
  j["pairs"] = json::array();
  for (const auto& p : cmp.pairs)
    j["pairs"].push_back({{"a", p.a},
                          {"b", p.b},
                          {"mean_delta_reward", p.mean_delta_reward},
                          {"mean_delta_win", p.mean_delta_win},
                          {"wins", p.wins},
                          {"losses", p.losses},
                          {"ties", p.ties},
                          {"sign_test_p", p.sign_test_p}});
  return j;
}

// Labels may contain commas (policy parameters), so quote when needed.
inline std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string quoted = "\"";
  for (char c : s) {
    if (c == '"') quoted += '"';
    quoted += c;
  }
  quoted += '"';
  return quoted;
}

inline std::string comparison_to_csv(const Comparison& cmp) {
  std::string out = "policy,n_cases,mean_reward,win_rate\n";
  for (const auto& r : cmp.rows) {
    out += csv_field(r.label);
    out += ',';
    out += std::to_string(r.n_cases);
    out += ',';
    out += format_double(r.mean_reward);
    out += ',';
    out += format_double(r.win_rate);
    out += '\n';
  }
  return out;
}

// Minimal standalone bar chart, one group per policy: win rate on a fixed
// [0,1] axis, mean reward scaled to the observed range.
inline std::string comparison_to_svg(const Comparison& cmp) {
  const double bar_w = 40.0, gap = 30.0, h = 200.0, base = 240.0;
  double lo = cmp.rows[0].mean_reward, hi = lo;
  for (const auto& r : cmp.rows) {
    lo = std::min(lo, r.mean_reward);
    hi = std::max(hi, r.mean_reward);
  }
  double span = hi - lo;
  auto reward_frac = [&](double v) {
    return span > 0.0 ? 0.1 + 0.9 * (v - lo) / span : 0.5;
  };

  double width = gap + cmp.rows.size() * (2.0 * bar_w + gap) + gap;
  std::string svg =
      cat("<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"",
          format_double(width), "\" height=\"300\">\n");
  double x = gap;
  for (const auto& r : cmp.rows) {
    double rh = h * reward_frac(r.mean_reward);
    double wh = h * r.win_rate;
    svg += cat("<rect x=\"", format_double(x), "\" y=\"",
               format_double(base - rh), "\" width=\"", format_double(bar_w),
               "\" height=\"", format_double(rh),
               "\" fill=\"#4477aa\"><title>mean_reward ",
               format_double(r.mean_reward), "</title></rect>\n");
    svg += cat("<rect x=\"", format_double(x + bar_w + 4.0), "\" y=\"",
               format_double(base - wh), "\" width=\"", format_double(bar_w),
               "\" height=\"", format_double(wh),
               "\" fill=\"#ee6677\"><title>win_rate ",
               format_double(r.win_rate), "</title></rect>\n");
    svg += cat("<text x=\"", format_double(x), "\" y=\"",
               format_double(base + 16.0), "\" font-size=\"10\">", r.label,
               "</text>\n");
    x += 2.0 * bar_w + gap;
  }
  svg += "</svg>\n";
  return svg;
}

}  // namespace prefsim
