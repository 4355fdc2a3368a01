#pragma once

// Run configuration: one JSON document, overridden by command-line flags.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>

#include <nlohmann/json.hpp>

#include "ruleguide/correction.hpp"
#include "ruleguide/corpus.hpp"
#include "ruleguide/error.hpp"
#include "ruleguide/llm.hpp"
#include "ruleguide/prompt.hpp"
#include "ruleguide/scoring.hpp"

namespace ruleguide {

struct RunConfig {
  std::string treebank;
  CorpusFormat treebank_format = CorpusFormat::OneTreePerLine;
  std::string input;  // sentences, one per line
  std::string base;   // base predictions for `correct`
  std::string pred;
  std::string gold;
  std::string output;
  std::string trace;
  std::string record;
  std::string format = "table";  // table | json
  bool per_sentence = false;
  std::size_t shots = 5;
  double mkp_k = 0.2;
  std::size_t parallelism = 1;
  std::uint64_t seed = 0;

  CorrectionConfig correction;
  ScoringParams scoring = ScoringParams::evalb_default();
  BackendSpec backend;
};

namespace detail {

template <typename T>
void read_opt(const nlohmann::json& j, const char* key, T& field) {
  if (j.contains(key) && !j.at(key).is_null()) field = j.at(key).get<T>();
}

inline CorpusFormat parse_format(const std::string& s) {
  if (s == "line" || s == "one_tree_per_line") return CorpusFormat::OneTreePerLine;
  if (s == "blocks" || s == "multi_line_blocks") return CorpusFormat::MultiLineBlocks;
  throw Error(Errc::Config, "unknown treebank_format '" + s + "'");
}

inline std::string format_name(CorpusFormat f) {
  return f == CorpusFormat::OneTreePerLine ? "line" : "blocks";
}

}  // namespace detail

inline void apply_scoring_json(ScoringParams& p, const nlohmann::json& j) {
  if (j.contains("delete_labels")) p.delete_labels = j.at("delete_labels").get<std::set<std::string>>();
  if (j.contains("equivalent_labels")) {
    p.equivalent_labels = j.at("equivalent_labels").get<std::map<std::string, std::string>>();
  }
  detail::read_opt(j, "strip_functional_tags", p.strip_functional_tags);
  if (j.contains("unmatch_policy")) {
    auto s = j.at("unmatch_policy").get<std::string>();
    if (s == "penalize") p.unmatch_policy = UnmatchPolicy::Penalize;
    else if (s == "skip") p.unmatch_policy = UnmatchPolicy::Skip;
    else throw Error(Errc::Config, "unknown unmatch_policy '" + s + "'");
  }
}

inline nlohmann::json scoring_to_json(const ScoringParams& p) {
  return {{"delete_labels", p.delete_labels},
          {"equivalent_labels", p.equivalent_labels},
          {"strip_functional_tags", p.strip_functional_tags},
          {"unmatch_policy", p.unmatch_policy == UnmatchPolicy::Penalize ? "penalize" : "skip"}};
}

inline void apply_config_json(RunConfig& cfg, const nlohmann::json& j) {
  try {
    detail::read_opt(j, "treebank", cfg.treebank);
    if (j.contains("treebank_format")) {
      cfg.treebank_format = detail::parse_format(j.at("treebank_format").get<std::string>());
    }
    detail::read_opt(j, "input", cfg.input);
    detail::read_opt(j, "base", cfg.base);
    detail::read_opt(j, "pred", cfg.pred);
    detail::read_opt(j, "gold", cfg.gold);
    detail::read_opt(j, "output", cfg.output);
    detail::read_opt(j, "trace", cfg.trace);
    detail::read_opt(j, "record", cfg.record);
    detail::read_opt(j, "format", cfg.format);
    detail::read_opt(j, "per_sentence", cfg.per_sentence);
    detail::read_opt(j, "shots", cfg.shots);
    detail::read_opt(j, "mkp_k", cfg.mkp_k);
    detail::read_opt(j, "parallelism", cfg.parallelism);
    detail::read_opt(j, "seed", cfg.seed);

    if (j.contains("correction")) {
      const auto& c = j.at("correction");
      auto& cc = cfg.correction;
      detail::read_opt(c, "top_k_rules", cc.top_k_rules);
      detail::read_opt(c, "examples_per_rule", cc.examples_per_rule);
      detail::read_opt(c, "max_unmatch_rounds", cc.max_unmatch_rounds);
      detail::read_opt(c, "height_floor", cc.height_floor);
      detail::read_opt(c, "max_llm_calls", cc.max_llm_calls);
      if (c.contains("ranking")) {
        auto s = c.at("ranking").get<std::string>();
        if (s == "lcs_label") cc.ranking = RankingStrategy::LcsLabel;
        else if (s == "pos_sequence") cc.ranking = RankingStrategy::PosSequence;
        else throw Error(Errc::Config, "unknown ranking '" + s + "'");
      }
      if (c.contains("accept_policy")) {
        auto s = c.at("accept_policy").get<std::string>();
        if (s == "keep_if_valid") cc.accept = AcceptPolicy::KeepIfValid;
        else if (s == "always_take_new") cc.accept = AcceptPolicy::AlwaysTakeNew;
        else throw Error(Errc::Config, "unknown accept_policy '" + s + "'");
      }
    }
    if (j.contains("scoring")) apply_scoring_json(cfg.scoring, j.at("scoring"));
    if (j.contains("backend")) {
      const auto& b = j.at("backend");
      auto& bs = cfg.backend;
      if (b.contains("kind")) {
        auto s = b.at("kind").get<std::string>();
        if (s == "scripted") bs.kind = BackendSpec::Kind::Scripted;
        else if (s == "http_openai_compatible" || s == "http") bs.kind = BackendSpec::Kind::HttpOpenAiCompatible;
        else throw Error(Errc::Config, "unknown backend kind '" + s + "'");
      }
      detail::read_opt(b, "endpoint", bs.endpoint);
      detail::read_opt(b, "model", bs.model);
      detail::read_opt(b, "temperature", bs.temperature);
      detail::read_opt(b, "max_tokens", bs.max_tokens);
      detail::read_opt(b, "timeout_s", bs.timeout_s);
      detail::read_opt(b, "max_attempts", bs.retry.max_attempts);
      detail::read_opt(b, "backoff_ms", bs.retry.backoff_ms);
      detail::read_opt(b, "api_key_env", bs.api_key_env);
      detail::read_opt(b, "replay", bs.replay_path);
      if (b.contains("api_key")) {
        throw Error(Errc::Config, "credentials are read from the environment (backend.api_key_env), "
                                  "not from config files");
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::Config, std::string("bad config value: ") + e.what());
  }
}

inline RunConfig load_config_file(const std::string& path, RunConfig base = {}) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::Config, "cannot open config file '" + path + "'");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::Config, "config file '" + path + "' is not valid JSON: " + e.what());
  }
  apply_config_json(base, j);
  return base;
}

inline nlohmann::json config_to_json(const RunConfig& cfg) {
  const auto& cc = cfg.correction;
  const auto& bs = cfg.backend;
  return {
      {"treebank", cfg.treebank},
      {"treebank_format", detail::format_name(cfg.treebank_format)},
      {"input", cfg.input},
      {"base", cfg.base},
      {"pred", cfg.pred},
      {"gold", cfg.gold},
      {"shots", cfg.shots},
      {"mkp_k", cfg.mkp_k},
      {"seed", cfg.seed},
      {"correction",
       {{"top_k_rules", cc.top_k_rules},
        {"examples_per_rule", cc.examples_per_rule},
        {"max_unmatch_rounds", cc.max_unmatch_rounds},
        {"ranking", cc.ranking == RankingStrategy::LcsLabel ? "lcs_label" : "pos_sequence"},
        {"height_floor", cc.height_floor},
        {"accept_policy", cc.accept == AcceptPolicy::KeepIfValid ? "keep_if_valid" : "always_take_new"},
        {"max_llm_calls", cc.max_llm_calls}}},
      {"scoring", scoring_to_json(cfg.scoring)},
      {"backend",
       {{"kind", bs.kind == BackendSpec::Kind::Scripted ? "scripted" : "http_openai_compatible"},
        {"endpoint", bs.endpoint},
        {"model", bs.model},
        {"temperature", bs.temperature},
        {"max_tokens", bs.max_tokens},
        {"replay", bs.replay_path}}},
  };
}

// Identifies the settings that determine a run's outputs. Output paths,
// parallelism and presentation flags are left out.
inline std::string config_hash(const RunConfig& cfg) {
  return stable_hash(config_to_json(cfg).dump());
}

}  // namespace ruleguide
