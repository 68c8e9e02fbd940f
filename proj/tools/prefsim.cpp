// prefsim command-line driver.
//
// Subcommands cover the whole pipeline: ingest, sample-users,
// analyze-diversity, analyze-entropy, regress, represent, build-history,
// build-testcases, run-policy, evaluate, compare. Every subcommand accepts
// --seed, --config <json> and --out <dir>; flags given on the command line
// win over config-file values. Outputs land in --out together with a
// provenance.json sidecar so a run can be reproduced from its artifacts.
//
// Exit codes: 0 success, 1 data/validation error, 2 usage error. Errors are
// also emitted as one-line JSON on stderr for machine consumption.

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "prefsim/bench.hpp"
#include "prefsim/corpus.hpp"
#include "prefsim/diversity.hpp"
#include "prefsim/embedding.hpp"
#include "prefsim/history.hpp"
#include "prefsim/interactions.hpp"
#include "prefsim/opinion.hpp"
#include "prefsim/persona.hpp"
#include "prefsim/policies.hpp"
#include "prefsim/policies_http.hpp"
#include "prefsim/regression.hpp"
#include "prefsim/retrieval.hpp"
#include "prefsim/text_features.hpp"

namespace fs = std::filesystem;
using prefsim::json;

namespace {

// A missing-but-required value detected after config merging. CLI11 catches
// malformed invocations itself; this covers the rest of exit-code-2 land.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

void emit_error(const char* type, const std::string& message) {
  json j;
  j["error"] = {{"type", type}, {"message", message}};
  std::cerr << j.dump() << "\n";
}

json load_config_file(const std::string& path) {
  if (path.empty()) return json::object();
  std::ifstream in(path, std::ios::binary);
  prefsim::require(in.good(), "config: cannot open ", path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    prefsim::fail("config: ", path, ": ", e.what());
  }
  prefsim::require(j.is_object(), "config: ", path,
                   ": top level must be an object");
  return j;
}

// Command-line flags win; config supplies anything not given explicitly.
template <class T>
void cfg_merge(const json& cfg, const char* key, const CLI::Option* opt,
               T& value) {
  if (opt->count() > 0 || !cfg.contains(key)) return;
  try {
    value = cfg.at(key).get<T>();
  } catch (const json::exception& e) {
    prefsim::fail("config: key \"", key, "\": ", e.what());
  }
}

void need(const std::string& value, const char* what) {
  if (value.empty())
    throw UsageError(std::string(what) +
                     " is required (pass the flag or set it in --config)");
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(v));
  return buf;
}

void write_json_file(const fs::path& path, const json& j) {
  std::ofstream out(path, std::ios::binary);
  prefsim::require(out.good(), "cannot open ", path.string(), " for writing");
  out << j.dump(2) << "\n";
  prefsim::require(out.good(), "write to ", path.string(), " failed");
}

void write_text_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  prefsim::require(out.good(), "cannot open ", path.string(), " for writing");
  out << text;
  prefsim::require(out.good(), "write to ", path.string(), " failed");
}

// ------------------------------------------------------------ shared options

struct Common {
  std::uint64_t seed = 0;
  std::string config_path;
  std::string out_dir = ".";
  json cfg = json::object();
  CLI::Option* seed_opt = nullptr;
  CLI::Option* out_opt = nullptr;

  void add(CLI::App* cmd) {
    seed_opt = cmd->add_option("--seed", seed, "random seed (default 0)");
    cmd->add_option("--config", config_path,
                    "JSON file supplying defaults for any flag");
    out_opt = cmd->add_option("--out", out_dir,
                              "output directory (default: current)");
  }

  // Loads the config and resolves the output directory.
  void finish() {
    cfg = load_config_file(config_path);
    cfg_merge(cfg, "seed", seed_opt, seed);
    cfg_merge(cfg, "out", out_opt, out_dir);
    fs::create_directories(out_dir);
  }

  fs::path out(const std::string& name) const {
    return fs::path(out_dir) / name;
  }
};

struct CorpusOptions {
  std::string prompts, responses, rewards, splits;
  bool raw = false;
  CLI::Option *p_opt = nullptr, *r_opt = nullptr, *w_opt = nullptr,
              *s_opt = nullptr, *raw_opt = nullptr;

  void add(CLI::App* cmd) {
    p_opt = cmd->add_option("--prompts", prompts, "prompts.jsonl");
    r_opt = cmd->add_option("--responses", responses, "responses.jsonl");
    w_opt = cmd->add_option("--rewards", rewards, "rewards.jsonl");
    s_opt = cmd->add_option("--splits", splits, "splits.json (optional)");
    raw_opt = cmd->add_flag("--raw", raw,
                            "skip per-column z-score normalization");
  }

  void merge(const json& cfg) {
    cfg_merge(cfg, "prompts", p_opt, prompts);
    cfg_merge(cfg, "responses", r_opt, responses);
    cfg_merge(cfg, "rewards", w_opt, rewards);
    cfg_merge(cfg, "splits", s_opt, splits);
    cfg_merge(cfg, "raw", raw_opt, raw);
  }
};

struct LoadedCorpus {
  prefsim::ScoredCorpus corpus;  // normalized unless --raw
  prefsim::SplitSpec split;
  bool has_split = false;
  prefsim::NormalizationStats stats;  // valid unless --raw

  // Prompt pool for analyses and test-case building.
  std::vector<std::string> test_pool() const {
    if (has_split) return split.test_ids;
    std::vector<std::string> all;
    for (const auto& p : corpus.prompts) all.push_back(p.prompt_id);
    return all;
  }
  std::vector<std::string> train_pool() const {
    if (has_split) return split.train_ids;
    std::vector<std::string> all;
    for (const auto& p : corpus.prompts) all.push_back(p.prompt_id);
    return all;
  }
};

// Loads, validates, and (by default) z-scores the reward columns over the
// train split (whole corpus when no splits are given).
LoadedCorpus load_corpus_options(const CorpusOptions& co) {
  need(co.prompts, "--prompts");
  need(co.responses, "--responses");
  need(co.rewards, "--rewards");
  LoadedCorpus lc;
  lc.corpus = prefsim::load_corpus(co.prompts, co.responses, co.rewards);
  if (!co.splits.empty()) {
    lc.split = prefsim::load_splits(co.splits);
    prefsim::validate_split(lc.split, lc.corpus);
    lc.has_split = true;
  }
  if (!co.raw) {
    lc.stats = prefsim::compute_normalization(
        lc.corpus, lc.train_pool(), lc.has_split ? "train" : "all");
    lc.corpus = prefsim::normalize_rewards(lc.corpus, lc.stats);
  }
  return lc;
}

json corpus_provenance(const CorpusOptions& co, const LoadedCorpus& lc) {
  json j;
  j["prompts"] = co.prompts;
  j["responses"] = co.responses;
  j["rewards"] = co.rewards;
  if (!co.splits.empty()) j["splits"] = co.splits;
  j["normalization"] = co.raw ? "raw" : "zscore";
  j["corpus_fingerprint"] = hex64(lc.corpus.fingerprint());
  return j;
}

json population_provenance(const prefsim::Population& pop) {
  json j;
  j["alpha"] = pop.alpha;
  j["population_seed"] = pop.seed;
  j["n_users"] = pop.size();
  j["B"] = pop.b_count;
  return j;
}

json base_provenance(const std::string& subcommand, const Common& common) {
  json j;
  j["tool"] = "prefsim";
  j["subcommand"] = subcommand;
  j["seed"] = common.seed;
  return j;
}

// The zero-shot reference model: explicit flag first, otherwise the corpus's
// GPT-4o-labeled generator.
std::string pick_reference(const prefsim::ScoredCorpus& corpus,
                           const std::string& flag) {
  if (!flag.empty()) {
    corpus.response_model_index(flag);  // must exist
    return flag;
  }
  std::string found;
  for (const auto& m : corpus.response_models) {
    std::string low = prefsim::diversity_detail::lower(m);
    if (low.find("gpt-4o") != std::string::npos ||
        low.find("gpt4o") != std::string::npos) {
      prefsim::require(found.empty(),
                       "reference model: several GPT-4o-labeled generators (",
                       found, ", ", m, "); pass --reference");
      found = m;
    }
  }
  prefsim::require(!found.empty(),
                   "reference model: no GPT-4o-labeled generator in the "
                   "corpus; pass --reference");
  return found;
}

// --------------------------------------------------------------- subcommands

void cmd_ingest(const Common& common, const CorpusOptions& co) {
  LoadedCorpus lc = load_corpus_options(co);
  json prov = base_provenance("ingest", common);
  prov["inputs"] = corpus_provenance(co, lc);

  json summary;
  summary["n_prompts"] = lc.corpus.n_prompts();
  summary["l_count"] = lc.corpus.l_count();
  summary["b_count"] = lc.corpus.b_count();
  summary["reward_models"] = lc.corpus.reward_models;
  summary["response_models"] = lc.corpus.response_models;
  summary["normalization"] = co.raw ? "raw" : "zscore";
  if (!co.raw) {
    summary["normalization_stats"] = {{"mean", lc.stats.mean},
                                      {"std", lc.stats.stddev},
                                      {"computed_over", lc.stats.computed_over}};
  }
  if (lc.has_split) {
    summary["train_prompts"] = lc.split.train_ids.size();
    summary["test_prompts"] = lc.split.test_ids.size();
  }
  summary["provenance"] = prov;
  write_json_file(common.out("corpus_summary.json"), summary);
  write_json_file(common.out("provenance.json"), prov);
  std::cout << "ingest: " << lc.corpus.n_prompts() << " prompts, L="
            << lc.corpus.l_count() << ", B=" << lc.corpus.b_count() << "\n";
}

void cmd_sample_users(const Common& common, std::size_t b_count,
                      std::size_t n, double alpha,
                      const std::vector<std::string>& labels) {
  prefsim::Population pop =
      prefsim::sample_population(b_count, n, alpha, common.seed, labels);
  prefsim::save_population(common.out("population.jsonl").string(), pop);

  json prov = base_provenance("sample-users", common);
  prov["inputs"] = population_provenance(pop);
  write_json_file(common.out("provenance.json"), prov);
  std::cout << "sample-users: wrote " << pop.size() << " personas to "
            << common.out("population.jsonl").string() << "\n";
}

void cmd_analyze_diversity(const Common& common, const CorpusOptions& co,
                           const std::string& population_path,
                           const std::vector<double>& thresholds) {
  need(population_path, "--population");
  LoadedCorpus lc = load_corpus_options(co);
  prefsim::Population pop = prefsim::load_population(population_path);
  prefsim::WinnerTable table =
      prefsim::compute_winners(pop, lc.corpus, lc.test_pool());

  std::vector<double> fractions =
      prefsim::vote_share_summary(table, thresholds);
  std::vector<std::size_t> histogram =
      prefsim::distinct_winner_histogram(table);
  prefsim::ModelWinRates rates = prefsim::model_win_rates(table, lc.corpus);

  json prov = base_provenance("analyze-diversity", common);
  prov["inputs"] = corpus_provenance(co, lc);
  prov["inputs"]["population"] = population_path;
  prov["population"] = population_provenance(pop);

  json report;
  report["metric"] = "diversity";
  report["parameters"] = {{"thresholds", thresholds},
                          {"n_prompts", table.n_prompts()},
                          {"n_users", table.n_users()}};
  json shares = json::object();
  for (std::size_t t = 0; t < thresholds.size(); ++t)
    shares[prefsim::format_double(thresholds[t])] = fractions[t];
  report["values"]["vote_share_leq"] = shares;
  report["values"]["distinct_winner_histogram"] = histogram;
  json model_rates = json::object();
  for (std::size_t l = 0; l < rates.model_ids.size(); ++l)
    model_rates[rates.model_ids[l]] = rates.rates[l];
  report["values"]["model_win_rates"] = model_rates;
  report["provenance"] = prov;
  write_json_file(common.out("diversity.json"), report);

  std::string csv = "metric,key,value\n";
  for (std::size_t t = 0; t < thresholds.size(); ++t)
    csv += prefsim::cat("vote_share_leq,", prefsim::format_double(thresholds[t]),
                        ",", prefsim::format_double(fractions[t]), "\n");
  for (std::size_t k = 0; k < histogram.size(); ++k)
    csv += prefsim::cat("distinct_winners,", k + 1, ",", histogram[k], "\n");
  for (std::size_t l = 0; l < rates.model_ids.size(); ++l)
    csv += prefsim::cat("model_win_rate,", rates.model_ids[l], ",",
                        prefsim::format_double(rates.rates[l]), "\n");
  write_text_file(common.out("diversity.csv"), csv);
  write_json_file(common.out("provenance.json"), prov);
  std::cout << "analyze-diversity: " << table.n_prompts() << " prompts x "
            << table.n_users() << " users\n";
}

void cmd_analyze_entropy(const Common& common, const CorpusOptions& co,
                         const std::string& population_path,
                         const std::vector<std::string>& substrings,
                         const std::vector<std::string>& initials) {
  need(population_path, "--population");
  LoadedCorpus lc = load_corpus_options(co);
  prefsim::Population pop = prefsim::load_population(population_path);
  prefsim::WinnerTable table =
      prefsim::compute_winners(pop, lc.corpus, lc.test_pool());

  std::vector<prefsim::GroupSpec> groups;
  for (const auto& s : substrings)
    groups.push_back({s, prefsim::GroupSpec::Match::substring, s});
  for (const auto& s : initials)
    groups.push_back({s, prefsim::GroupSpec::Match::initial_token, s});
  auto entropies = prefsim::keyword_entropy(table, lc.corpus, groups);

  json prov = base_provenance("analyze-entropy", common);
  prov["inputs"] = corpus_provenance(co, lc);
  prov["inputs"]["population"] = population_path;
  prov["population"] = population_provenance(pop);

  json report;
  report["metric"] = "keyword_entropy_bits";
  report["parameters"] = {{"substring", substrings}, {"initial", initials}};
  report["values"] = json::array();
  std::string csv = "group,n_prompts,mean_entropy_bits\n";
  for (const auto& g : entropies) {
    json row;
    row["group"] = g.label;
    row["n_prompts"] = g.n_prompts;
    if (g.n_prompts > 0) row["mean_entropy_bits"] = g.mean_entropy_bits;
    report["values"].push_back(row);
    csv += prefsim::cat(g.label, ",", g.n_prompts, ",",
                        g.n_prompts > 0
                            ? prefsim::format_double(g.mean_entropy_bits)
                            : std::string(""),
                        "\n");
  }
  report["provenance"] = prov;
  write_json_file(common.out("entropy.json"), report);
  write_text_file(common.out("entropy.csv"), csv);
  write_json_file(common.out("provenance.json"), prov);
  std::cout << "analyze-entropy: " << entropies.size() << " groups\n";
}

void cmd_regress(const Common& common, const CorpusOptions& co,
                 const std::string& population_path,
                 const std::string& features_path) {
  need(population_path, "--population");
  LoadedCorpus lc = load_corpus_options(co);
  prefsim::Population pop = prefsim::load_population(population_path);

  prefsim::FeatureTable features;
  if (!features_path.empty()) {
    features = prefsim::load_features_csv(features_path);
  } else {
    features = prefsim::compute_syntactic_features(lc.corpus);
    prefsim::save_features_csv(common.out("features.csv").string(), features);
  }

  std::vector<std::string> pool = lc.test_pool();
  std::string csv = "persona_id,converged,iterations,intercept";
  for (const auto& name : features.names) csv += "," + name;
  csv += "\n";

  std::vector<double> coef_sum(features.names.size(), 0.0);
  std::vector<std::size_t> positive(features.names.size(), 0);
  std::size_t converged = 0;
  for (const auto& persona : pop.personas) {
    auto pairs = prefsim::winner_losers_for(persona, lc.corpus, pool);
    auto fit = prefsim::fit_user_regression(persona, pairs, features);
    if (fit.converged) ++converged;
    csv += prefsim::cat(persona.persona_id, ",", fit.converged ? 1 : 0, ",",
                        fit.iterations, ",",
                        prefsim::format_double(fit.intercept));
    for (std::size_t f = 0; f < fit.coefficients.size(); ++f) {
      csv += "," + prefsim::format_double(fit.coefficients[f]);
      coef_sum[f] += fit.coefficients[f];
      if (fit.coefficients[f] > 0.0) ++positive[f];
    }
    csv += "\n";
  }
  write_text_file(common.out("regressions.csv"), csv);

  json prov = base_provenance("regress", common);
  prov["inputs"] = corpus_provenance(co, lc);
  prov["inputs"]["population"] = population_path;
  if (!features_path.empty()) prov["inputs"]["features"] = features_path;
  prov["population"] = population_provenance(pop);

  json report;
  report["metric"] = "per_user_logistic_regression";
  report["parameters"] = {{"n_users", pop.size()},
                          {"n_prompts", pool.size()},
                          {"feature_kind", features.kind}};
  report["values"]["feature_names"] = features.names;
  json mean_coef = json::array(), pos_frac = json::array();
  for (std::size_t f = 0; f < features.names.size(); ++f) {
    mean_coef.push_back(coef_sum[f] / static_cast<double>(pop.size()));
    pos_frac.push_back(static_cast<double>(positive[f]) /
                       static_cast<double>(pop.size()));
  }
  report["values"]["mean_coefficient"] = mean_coef;
  report["values"]["positive_fraction"] = pos_frac;
  report["values"]["converged_fraction"] =
      static_cast<double>(converged) / static_cast<double>(pop.size());
  report["provenance"] = prov;
  write_json_file(common.out("regress.json"), report);
  write_json_file(common.out("provenance.json"), prov);
  std::cout << "regress: " << pop.size() << " users, " << pool.size()
            << " prompts\n";
}

void cmd_represent(const Common& common, const std::string& population_path,
                   const std::string& questions_path,
                   const std::string& scores_path,
                   const std::string& human_path) {
  need(population_path, "--population");
  need(questions_path, "--questions");
  need(scores_path, "--option-scores");
  need(human_path, "--human");
  prefsim::Population pop = prefsim::load_population(population_path);
  auto questions = prefsim::load_questions(questions_path);
  auto scores =
      prefsim::load_option_scores(scores_path, questions, pop.b_count);
  auto humans = prefsim::load_human_dists(human_path, questions);
  auto table = prefsim::representativeness_by_group(pop, questions, scores,
                                                    humans);
  prefsim::save_representativeness_csv(
      common.out("representativeness.csv").string(), table);

  json prov = base_provenance("represent", common);
  prov["inputs"] = {{"population", population_path},
                    {"questions", questions_path},
                    {"option_scores", scores_path},
                    {"human", human_path}};
  prov["population"] = population_provenance(pop);

  json report;
  report["metric"] = "representativeness";
  report["parameters"] = {{"n_questions", questions.size()}};
  report["values"] = json::array();
  for (const auto& g : table)
    report["values"].push_back({{"group", g.group},
                                {"mean_score", g.mean_score},
                                {"n_questions", g.n_questions}});
  report["provenance"] = prov;
  write_json_file(common.out("represent.json"), report);
  write_json_file(common.out("provenance.json"), prov);
  std::cout << "represent: " << table.size() << " groups over "
            << questions.size() << " questions\n";
}

void cmd_build_history(const Common& common, const CorpusOptions& co,
                       const std::string& population_path, std::size_t m) {
  need(population_path, "--population");
  LoadedCorpus lc = load_corpus_options(co);
  prefsim::Population pop = prefsim::load_population(population_path);
  auto db = prefsim::build_historical_db(pop, lc.corpus, lc.train_pool(), m,
                                         common.seed);
  prefsim::save_histories(common.out("histories.jsonl").string(), db);

  json prov = base_provenance("build-history", common);
  prov["inputs"] = corpus_provenance(co, lc);
  prov["inputs"]["population"] = population_path;
  prov["population"] = population_provenance(pop);
  prov["parameters"] = {{"m", m},
                        {"train_pool", lc.has_split ? "train" : "all"}};
  write_json_file(common.out("provenance.json"), prov);
  std::cout << "build-history: " << db.size() << " users x " << m
            << " triplets\n";
}

void cmd_build_testcases(const Common& common, const CorpusOptions& co,
                         const std::string& population_path,
                         const std::string& kind, std::size_t k,
                         const std::string& prompt_embeddings_path) {
  need(population_path, "--population");
  LoadedCorpus lc = load_corpus_options(co);
  prefsim::Population pop = prefsim::load_population(population_path);
  std::vector<std::string> pool = lc.test_pool();

  std::vector<prefsim::TestCase> cases;
  if (kind == "relevant") {
    need(prompt_embeddings_path, "--prompt-embeddings");
    prefsim::EmbeddingTable table =
        prefsim::load_embeddings(prompt_embeddings_path);
    cases = prefsim::build_test_cases_relevant(pop, lc.corpus, table, pool, k,
                                               common.seed);
  } else if (kind == "random") {
    cases =
        prefsim::build_test_cases_random(pop, lc.corpus, pool, k, common.seed);
  } else {
    throw UsageError("--kind must be relevant or random, got \"" + kind +
                     "\"");
  }
  prefsim::save_test_cases(common.out("testcases.jsonl").string(), cases);

  json prov = base_provenance("build-testcases", common);
  prov["inputs"] = corpus_provenance(co, lc);
  prov["inputs"]["population"] = population_path;
  if (!prompt_embeddings_path.empty())
    prov["inputs"]["prompt_embeddings"] = prompt_embeddings_path;
  prov["population"] = population_provenance(pop);
  prov["parameters"] = {{"kind", kind},
                        {"k", k},
                        {"test_pool", lc.has_split ? "test" : "all"}};
  write_json_file(common.out("provenance.json"), prov);
  std::cout << "build-testcases: " << cases.size() << " cases (" << kind
            << ", k=" << k << ")\n";
}

struct PolicyOptions {
  std::string kind;
  std::size_t k_shots = 5;
  std::string variant = "win_only";
  std::string embed_method = "winning_minus_losing";
  std::size_t top_users = 20;
  std::size_t top_examples = 3;
  CLI::Option *kind_opt = nullptr, *k_opt = nullptr, *v_opt = nullptr,
              *e_opt = nullptr, *tu_opt = nullptr, *te_opt = nullptr;

  void add(CLI::App* cmd) {
    kind_opt = cmd->add_option(
        "--kind", kind,
        "zero_shot | self_icl | relevant_icl | meta_learn | oracle_select | "
        "random_select | nearest_winner_select");
    k_opt = cmd->add_option("--k-shots", k_shots, "ICL examples (1, 3 or 5)");
    v_opt = cmd->add_option(
        "--variant", variant,
        "win_and_lose | win_only | lose_only | lose_mislabeled");
    e_opt = cmd->add_option(
        "--embed-method", embed_method,
        "winning_minus_losing | winning_only | losing_only");
    tu_opt = cmd->add_option("--top-users", top_users,
                             "similar historical users to pool");
    te_opt = cmd->add_option("--top-examples", top_examples,
                             "pooled examples to keep");
  }

  void merge(const json& cfg) {
    cfg_merge(cfg, "kind", kind_opt, kind);
    cfg_merge(cfg, "k_shots", k_opt, k_shots);
    cfg_merge(cfg, "icl_variant", v_opt, variant);
    cfg_merge(cfg, "embed_method", e_opt, embed_method);
    cfg_merge(cfg, "top_users", tu_opt, top_users);
    cfg_merge(cfg, "top_examples", te_opt, top_examples);
  }

  prefsim::PolicySpec spec() const {
    need(kind, "--kind");
    json j;
    j["kind"] = kind;
    j["k_shots"] = k_shots;
    j["icl_variant"] = variant;
    j["embed_method"] = embed_method;
    j["top_users"] = top_users;
    j["top_examples"] = top_examples;
    return prefsim::policy_spec_from_json(j, "--kind/--k-shots/--variant");
  }
};

void cmd_run_policy(const Common& common, const CorpusOptions& co,
                    const std::string& population_path,
                    const std::string& testcases_path,
                    const PolicyOptions& po, const std::string& mode_flag,
                    const std::string& histories_path,
                    const std::string& response_embeddings_path,
                    const std::string& prompt_embeddings_path,
                    const std::string& reference_flag) {
  need(population_path, "--population");
  need(testcases_path, "--testcases");
  LoadedCorpus lc = load_corpus_options(co);
  prefsim::Population pop = prefsim::load_population(population_path);
  auto cases = prefsim::load_test_cases(testcases_path, lc.corpus, pop);
  prefsim::PolicySpec spec = po.spec();

  bool selection_mode;
  if (mode_flag == "auto") {
    selection_mode = prefsim::is_selection_kind(spec.kind) ||
                     spec.kind == prefsim::PolicyKind::zero_shot;
  } else if (mode_flag == "selection") {
    prefsim::require(prefsim::is_selection_kind(spec.kind) ||
                         spec.kind == prefsim::PolicyKind::zero_shot,
                     "--mode selection does not apply to ",
                     prefsim::to_string(spec.kind));
    selection_mode = true;
  } else if (mode_flag == "generative") {
    prefsim::require(!prefsim::is_selection_kind(spec.kind),
                     "--mode generative does not apply to ",
                     prefsim::to_string(spec.kind));
    selection_mode = false;
  } else {
    throw UsageError("--mode must be auto, selection or generative");
  }

  std::vector<prefsim::PolicyOutcome> outcomes;
  std::string generator_name = "none", scorer_name = "none";
  std::string reference;

  if (selection_mode) {
    prefsim::EmbeddingTable response_embeddings;
    prefsim::SelectionContext ctx;
    ctx.seed = common.seed;
    if (spec.kind == prefsim::PolicyKind::nearest_winner_select) {
      need(response_embeddings_path, "--response-embeddings");
      response_embeddings =
          prefsim::load_embeddings(response_embeddings_path);
      ctx.response_embeddings = &response_embeddings;
    }
    if (spec.kind == prefsim::PolicyKind::zero_shot) {
      reference = pick_reference(lc.corpus, reference_flag);
      ctx.reference_model_id = reference;
    }
    for (std::size_t i = 0; i < cases.size(); ++i) {
      ctx.case_index = i;
      outcomes.push_back(
          prefsim::run_selection_policy(cases[i], lc.corpus, spec, ctx));
    }
  } else {
    // Clients: HTTP endpoints when configured, deterministic stubs otherwise.
    prefsim::StubGenerationClient stub_gen;
    prefsim::StubScorerClient stub_scorer(lc.corpus);
    std::unique_ptr<prefsim::HttpGenerationClient> http_gen;
    std::unique_ptr<prefsim::HttpScorerClient> http_scorer;
    prefsim::GenerationClient* gen = &stub_gen;
    prefsim::ScorerClient* scorer = &stub_scorer;
    if (const char* url = std::getenv("PREFSIM_GEN_URL")) {
      http_gen = std::make_unique<prefsim::HttpGenerationClient>(url);
      gen = http_gen.get();
    }
    if (const char* url = std::getenv("PREFSIM_SCORE_URL")) {
      http_scorer = std::make_unique<prefsim::HttpScorerClient>(url);
      scorer = http_scorer.get();
    }
    generator_name = gen->name();
    scorer_name = scorer->name();

    std::vector<prefsim::UserHistory> db;
    prefsim::EmbeddingTable response_embeddings, prompt_embeddings;
    if (spec.kind == prefsim::PolicyKind::meta_learn) {
      need(histories_path, "--histories");
      need(response_embeddings_path, "--response-embeddings");
      need(prompt_embeddings_path, "--prompt-embeddings");
      db = prefsim::load_histories(histories_path, lc.corpus);
      response_embeddings = prefsim::load_embeddings(response_embeddings_path);
      prompt_embeddings = prefsim::load_embeddings(prompt_embeddings_path);
    }
    for (const auto& tc : cases) {
      prefsim::PolicyOutcome o =
          spec.kind == prefsim::PolicyKind::meta_learn
              ? prefsim::run_meta_learn(tc, db, lc.corpus,
                                        response_embeddings,
                                        prompt_embeddings, spec, *gen)
              : prefsim::run_generative_policy(tc, lc.corpus, spec, *gen);
      if (!o.failed) prefsim::attach_scores(o, lc.corpus, *scorer);
      outcomes.push_back(std::move(o));
    }
  }
  prefsim::save_outcomes(common.out("outcomes.jsonl").string(), outcomes);

  json policy = prefsim::policy_spec_to_json(spec);
  write_json_file(common.out("policy.json"), policy);

  json prov = base_provenance("run-policy", common);
  prov["inputs"] = corpus_provenance(co, lc);
  prov["inputs"]["population"] = population_path;
  prov["inputs"]["testcases"] = testcases_path;
  if (!histories_path.empty()) prov["inputs"]["histories"] = histories_path;
  prov["population"] = population_provenance(pop);
  prov["policy"] = policy;
  prov["mode"] = selection_mode ? "selection" : "generative";
  prov["generator"] = generator_name;
  prov["scorer"] = scorer_name;
  if (!reference.empty()) prov["reference_model"] = reference;
  write_json_file(common.out("provenance.json"), prov);

  std::size_t failed = 0;
  for (const auto& o : outcomes)
    if (o.failed) ++failed;
  std::cout << "run-policy: " << outcomes.size() << " outcomes ("
            << prefsim::to_string(spec.kind) << ", "
            << (selection_mode ? "selection" : "generative") << ", " << failed
            << " failed)\n";
}

void cmd_evaluate(const Common& common, const CorpusOptions& co,
                  const std::string& population_path,
                  const std::string& outcomes_path,
                  const std::string& policy_path,
                  const std::string& reference_flag) {
  need(population_path, "--population");
  need(outcomes_path, "--outcomes");
  LoadedCorpus lc = load_corpus_options(co);
  prefsim::Population pop = prefsim::load_population(population_path);
  auto outcomes = prefsim::load_outcomes(outcomes_path);
  std::string reference = pick_reference(lc.corpus, reference_flag);

  json policy = json::object();
  if (!policy_path.empty()) {
    std::ifstream in(policy_path, std::ios::binary);
    prefsim::require(in.good(), "cannot open ", policy_path);
    try {
      in >> policy;
    } catch (const json::exception& e) {
      prefsim::fail(policy_path, ": not valid JSON: ", e.what());
    }
  }

  json prov = base_provenance("evaluate", common);
  prov["inputs"] = corpus_provenance(co, lc);
  prov["inputs"]["population"] = population_path;
  prov["inputs"]["outcomes"] = outcomes_path;
  prov["population"] = population_provenance(pop);
  prov["reference_model"] = reference;

  prefsim::EvalReport rep =
      prefsim::evaluate(outcomes, pop, lc.corpus, reference, policy, prov);
  prefsim::save_report(common.out("report.json").string(), rep);
  write_json_file(common.out("provenance.json"), prov);
  std::cout << "evaluate: n=" << rep.n_cases << " mean_reward="
            << prefsim::format_double(rep.mean_reward)
            << " win_rate=" << prefsim::format_double(rep.win_rate) << "\n";
}

void cmd_compare(const Common& common, const std::vector<std::string>& paths,
                 bool svg) {
  if (paths.size() < 2)
    throw UsageError("--reports needs at least two report files");
  std::vector<prefsim::EvalReport> reports;
  for (const auto& p : paths) reports.push_back(prefsim::load_report(p));
  prefsim::Comparison cmp = prefsim::compare(reports);

  json prov = base_provenance("compare", common);
  prov["inputs"] = {{"reports", paths}};

  json j = prefsim::comparison_to_json(cmp);
  j["provenance"] = prov;
  write_json_file(common.out("comparison.json"), j);
  write_text_file(common.out("comparison.csv"),
                  prefsim::comparison_to_csv(cmp));
  if (svg)
    write_text_file(common.out("comparison.svg"),
                    prefsim::comparison_to_svg(cmp));
  write_json_file(common.out("provenance.json"), prov);
  std::cout << "compare: " << cmp.rows.size() << " policies over "
            << cmp.n_cases << " cases\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"personalization simulation testbed"};
  app.name("prefsim");
  app.require_subcommand(1);

  // ingest
  auto ingest = app.add_subcommand("ingest", "validate + normalize a corpus");
  auto ingest_common = std::make_shared<Common>();
  auto ingest_corpus = std::make_shared<CorpusOptions>();
  ingest_common->add(ingest);
  ingest_corpus->add(ingest);
  ingest->callback([ingest_common, ingest_corpus] {
    ingest_common->finish();
    ingest_corpus->merge(ingest_common->cfg);
    cmd_ingest(*ingest_common, *ingest_corpus);
  });

  // sample-users
  auto sample = app.add_subcommand("sample-users",
                                   "draw a Dirichlet-weighted population");
  auto sample_common = std::make_shared<Common>();
  auto sample_b = std::make_shared<std::size_t>(10);
  auto sample_n = std::make_shared<std::size_t>(1000);
  auto sample_alpha = std::make_shared<double>(0.05);
  auto sample_labels = std::make_shared<std::vector<std::string>>();
  sample_common->add(sample);
  auto b_opt = sample->add_option("--B", *sample_b, "base reward models");
  auto n_opt = sample->add_option("--n", *sample_n, "population size");
  auto a_opt = sample->add_option("--alpha", *sample_alpha,
                                  "Dirichlet concentration");
  auto l_opt = sample->add_option("--reward-models", *sample_labels,
                                  "column labels (comma separated)")
                   ->delimiter(',');
  sample->callback([=] {
    sample_common->finish();
    cfg_merge(sample_common->cfg, "B", b_opt, *sample_b);
    cfg_merge(sample_common->cfg, "n", n_opt, *sample_n);
    cfg_merge(sample_common->cfg, "alpha", a_opt, *sample_alpha);
    cfg_merge(sample_common->cfg, "reward_models", l_opt, *sample_labels);
    cmd_sample_users(*sample_common, *sample_b, *sample_n, *sample_alpha,
                     *sample_labels);
  });

  // analyze-diversity
  auto diversity = app.add_subcommand("analyze-diversity",
                                      "vote shares, distinct winners, "
                                      "per-model win rates");
  auto div_common = std::make_shared<Common>();
  auto div_corpus = std::make_shared<CorpusOptions>();
  auto div_pop = std::make_shared<std::string>();
  auto div_thresholds =
      std::make_shared<std::vector<double>>(std::vector<double>{0.5, 0.75,
                                                                0.95});
  div_common->add(diversity);
  div_corpus->add(diversity);
  auto div_pop_opt =
      diversity->add_option("--population", *div_pop, "population.jsonl");
  auto div_thr_opt = diversity
                         ->add_option("--thresholds", *div_thresholds,
                                      "vote-share thresholds")
                         ->delimiter(',');
  diversity->callback([=] {
    div_common->finish();
    div_corpus->merge(div_common->cfg);
    cfg_merge(div_common->cfg, "population", div_pop_opt, *div_pop);
    cfg_merge(div_common->cfg, "thresholds", div_thr_opt, *div_thresholds);
    cmd_analyze_diversity(*div_common, *div_corpus, *div_pop,
                          *div_thresholds);
  });

  // analyze-entropy
  auto entropy = app.add_subcommand("analyze-entropy",
                                    "winner-vote entropy by keyword group");
  auto ent_common = std::make_shared<Common>();
  auto ent_corpus = std::make_shared<CorpusOptions>();
  auto ent_pop = std::make_shared<std::string>();
  auto ent_sub = std::make_shared<std::vector<std::string>>(
      std::vector<std::string>{"imagine", "opinion", "poem"});
  auto ent_init = std::make_shared<std::vector<std::string>>(
      std::vector<std::string>{"who", "when", "where"});
  ent_common->add(entropy);
  ent_corpus->add(entropy);
  auto ent_pop_opt =
      entropy->add_option("--population", *ent_pop, "population.jsonl");
  auto ent_sub_opt = entropy
                         ->add_option("--substring", *ent_sub,
                                      "substring-matched groups")
                         ->delimiter(',');
  auto ent_init_opt = entropy
                          ->add_option("--initial", *ent_init,
                                       "prompt-initial-token groups")
                          ->delimiter(',');
  entropy->callback([=] {
    ent_common->finish();
    ent_corpus->merge(ent_common->cfg);
    cfg_merge(ent_common->cfg, "population", ent_pop_opt, *ent_pop);
    cfg_merge(ent_common->cfg, "substring", ent_sub_opt, *ent_sub);
    cfg_merge(ent_common->cfg, "initial", ent_init_opt, *ent_init);
    cmd_analyze_entropy(*ent_common, *ent_corpus, *ent_pop, *ent_sub,
                        *ent_init);
  });

  // regress
  auto regress = app.add_subcommand("regress",
                                    "per-user logistic regressions on "
                                    "response features");
  auto reg_common = std::make_shared<Common>();
  auto reg_corpus = std::make_shared<CorpusOptions>();
  auto reg_pop = std::make_shared<std::string>();
  auto reg_features = std::make_shared<std::string>();
  reg_common->add(regress);
  reg_corpus->add(regress);
  auto reg_pop_opt =
      regress->add_option("--population", *reg_pop, "population.jsonl");
  auto reg_feat_opt = regress->add_option(
      "--features", *reg_features,
      "features.csv (default: compute syntactic features)");
  regress->callback([=] {
    reg_common->finish();
    reg_corpus->merge(reg_common->cfg);
    cfg_merge(reg_common->cfg, "population", reg_pop_opt, *reg_pop);
    cfg_merge(reg_common->cfg, "features", reg_feat_opt, *reg_features);
    cmd_regress(*reg_common, *reg_corpus, *reg_pop, *reg_features);
  });

  // represent
  auto represent = app.add_subcommand("represent",
                                      "survey representativeness vs human "
                                      "distributions");
  auto rep_common = std::make_shared<Common>();
  auto rep_pop = std::make_shared<std::string>();
  auto rep_questions = std::make_shared<std::string>();
  auto rep_scores = std::make_shared<std::string>();
  auto rep_human = std::make_shared<std::string>();
  rep_common->add(represent);
  auto rep_pop_opt =
      represent->add_option("--population", *rep_pop, "population.jsonl");
  auto rep_q_opt =
      represent->add_option("--questions", *rep_questions, "questions.jsonl");
  auto rep_s_opt = represent->add_option("--option-scores", *rep_scores,
                                         "option_scores.jsonl");
  auto rep_h_opt =
      represent->add_option("--human", *rep_human, "human_dist.jsonl");
  represent->callback([=] {
    rep_common->finish();
    cfg_merge(rep_common->cfg, "population", rep_pop_opt, *rep_pop);
    cfg_merge(rep_common->cfg, "questions", rep_q_opt, *rep_questions);
    cfg_merge(rep_common->cfg, "option_scores", rep_s_opt, *rep_scores);
    cfg_merge(rep_common->cfg, "human", rep_h_opt, *rep_human);
    cmd_represent(*rep_common, *rep_pop, *rep_questions, *rep_scores,
                  *rep_human);
  });

  // build-history
  auto history = app.add_subcommand("build-history",
                                    "historical user database of "
                                    "winner/loser triplets");
  auto his_common = std::make_shared<Common>();
  auto his_corpus = std::make_shared<CorpusOptions>();
  auto his_pop = std::make_shared<std::string>();
  auto his_m = std::make_shared<std::size_t>(50);
  his_common->add(history);
  his_corpus->add(history);
  auto his_pop_opt =
      history->add_option("--population", *his_pop, "population.jsonl");
  auto his_m_opt =
      history->add_option("--m", *his_m, "triplets per user (default 50)");
  history->callback([=] {
    his_common->finish();
    his_corpus->merge(his_common->cfg);
    cfg_merge(his_common->cfg, "population", his_pop_opt, *his_pop);
    cfg_merge(his_common->cfg, "m", his_m_opt, *his_m);
    cmd_build_history(*his_common, *his_corpus, *his_pop, *his_m);
  });

  // build-testcases
  auto testcases = app.add_subcommand("build-testcases",
                                      "test users with relevant or random "
                                      "histories");
  auto tc_common = std::make_shared<Common>();
  auto tc_corpus = std::make_shared<CorpusOptions>();
  auto tc_pop = std::make_shared<std::string>();
  auto tc_kind = std::make_shared<std::string>("random");
  auto tc_k = std::make_shared<std::size_t>(5);
  auto tc_pe = std::make_shared<std::string>();
  tc_common->add(testcases);
  tc_corpus->add(testcases);
  auto tc_pop_opt =
      testcases->add_option("--population", *tc_pop, "population.jsonl");
  auto tc_kind_opt =
      testcases->add_option("--kind", *tc_kind, "relevant | random");
  auto tc_k_opt =
      testcases->add_option("--k", *tc_k, "history length (default 5)");
  auto tc_pe_opt = testcases->add_option("--prompt-embeddings", *tc_pe,
                                         "embeddings.csv (relevant kind)");
  testcases->callback([=] {
    tc_common->finish();
    tc_corpus->merge(tc_common->cfg);
    cfg_merge(tc_common->cfg, "population", tc_pop_opt, *tc_pop);
    cfg_merge(tc_common->cfg, "kind", tc_kind_opt, *tc_kind);
    cfg_merge(tc_common->cfg, "k", tc_k_opt, *tc_k);
    cfg_merge(tc_common->cfg, "prompt_embeddings", tc_pe_opt, *tc_pe);
    cmd_build_testcases(*tc_common, *tc_corpus, *tc_pop, *tc_kind, *tc_k,
                        *tc_pe);
  });

  // run-policy
  auto runp = app.add_subcommand("run-policy",
                                 "produce outcomes for one policy over the "
                                 "test cases");
  auto run_common = std::make_shared<Common>();
  auto run_corpus = std::make_shared<CorpusOptions>();
  auto run_policy_opts = std::make_shared<PolicyOptions>();
  auto run_pop = std::make_shared<std::string>();
  auto run_tc = std::make_shared<std::string>();
  auto run_mode = std::make_shared<std::string>("auto");
  auto run_his = std::make_shared<std::string>();
  auto run_re = std::make_shared<std::string>();
  auto run_pe = std::make_shared<std::string>();
  auto run_ref = std::make_shared<std::string>();
  run_common->add(runp);
  run_corpus->add(runp);
  run_policy_opts->add(runp);
  auto run_pop_opt =
      runp->add_option("--population", *run_pop, "population.jsonl");
  auto run_tc_opt =
      runp->add_option("--testcases", *run_tc, "testcases.jsonl");
  auto run_mode_opt =
      runp->add_option("--mode", *run_mode, "auto | selection | generative");
  auto run_his_opt = runp->add_option("--histories", *run_his,
                                      "histories.jsonl (meta_learn)");
  auto run_re_opt = runp->add_option(
      "--response-embeddings", *run_re,
      "embeddings.csv (meta_learn, nearest_winner_select)");
  auto run_pe_opt = runp->add_option("--prompt-embeddings", *run_pe,
                                     "embeddings.csv (meta_learn)");
  auto run_ref_opt = runp->add_option(
      "--reference", *run_ref,
      "reference model id (default: the GPT-4o-labeled generator)");
  runp->callback([=] {
    run_common->finish();
    run_corpus->merge(run_common->cfg);
    run_policy_opts->merge(run_common->cfg);
    cfg_merge(run_common->cfg, "population", run_pop_opt, *run_pop);
    cfg_merge(run_common->cfg, "testcases", run_tc_opt, *run_tc);
    cfg_merge(run_common->cfg, "mode", run_mode_opt, *run_mode);
    cfg_merge(run_common->cfg, "histories", run_his_opt, *run_his);
    cfg_merge(run_common->cfg, "response_embeddings", run_re_opt, *run_re);
    cfg_merge(run_common->cfg, "prompt_embeddings", run_pe_opt, *run_pe);
    cfg_merge(run_common->cfg, "reference", run_ref_opt, *run_ref);
    cmd_run_policy(*run_common, *run_corpus, *run_pop, *run_tc,
                   *run_policy_opts, *run_mode, *run_his, *run_re, *run_pe,
                   *run_ref);
  });

  // evaluate
  auto evaluate = app.add_subcommand("evaluate",
                                     "score outcomes into a report.json");
  auto ev_common = std::make_shared<Common>();
  auto ev_corpus = std::make_shared<CorpusOptions>();
  auto ev_pop = std::make_shared<std::string>();
  auto ev_outcomes = std::make_shared<std::string>();
  auto ev_policy = std::make_shared<std::string>();
  auto ev_ref = std::make_shared<std::string>();
  ev_common->add(evaluate);
  ev_corpus->add(evaluate);
  auto ev_pop_opt =
      evaluate->add_option("--population", *ev_pop, "population.jsonl");
  auto ev_out_opt =
      evaluate->add_option("--outcomes", *ev_outcomes, "outcomes.jsonl");
  auto ev_pol_opt = evaluate->add_option(
      "--policy", *ev_policy, "policy.json from run-policy (optional)");
  auto ev_ref_opt = evaluate->add_option(
      "--reference", *ev_ref,
      "reference model id (default: the GPT-4o-labeled generator)");
  evaluate->callback([=] {
    ev_common->finish();
    ev_corpus->merge(ev_common->cfg);
    cfg_merge(ev_common->cfg, "population", ev_pop_opt, *ev_pop);
    cfg_merge(ev_common->cfg, "outcomes", ev_out_opt, *ev_outcomes);
    cfg_merge(ev_common->cfg, "policy", ev_pol_opt, *ev_policy);
    cfg_merge(ev_common->cfg, "reference", ev_ref_opt, *ev_ref);
    cmd_evaluate(*ev_common, *ev_corpus, *ev_pop, *ev_outcomes, *ev_policy,
                 *ev_ref);
  });

  // compare
  auto compare = app.add_subcommand("compare",
                                    "side-by-side policy comparison");
  auto cmp_common = std::make_shared<Common>();
  auto cmp_reports = std::make_shared<std::vector<std::string>>();
  auto cmp_svg = std::make_shared<bool>(false);
  cmp_common->add(compare);
  auto cmp_rep_opt = compare->add_option("--reports", *cmp_reports,
                                         "two or more report.json files");
  auto cmp_svg_opt =
      compare->add_flag("--svg", *cmp_svg, "also emit comparison.svg");
  compare->callback([=] {
    cmp_common->finish();
    cfg_merge(cmp_common->cfg, "reports", cmp_rep_opt, *cmp_reports);
    cfg_merge(cmp_common->cfg, "svg", cmp_svg_opt, *cmp_svg);
    cmd_compare(*cmp_common, *cmp_reports, *cmp_svg);
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << app.help() << "\n";
    emit_error("usage", e.what());
    return 2;
  } catch (const UsageError& e) {
    emit_error("usage", e.what());
    return 2;
  } catch (const prefsim::Error& e) {
    emit_error("data", e.what());
    return 1;
  } catch (const std::exception& e) {
    emit_error("data", e.what());
    return 1;
  }
  return 0;
}
