#include <cstdint>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "ruleguide/app.hpp"

namespace {

// Flag values; unset flags leave the config file's value in place.
struct Flags {
  std::string config;
  std::optional<std::string> treebank, treebank_format, input, base, pred, gold, out, trace, record,
      replay, backend, endpoint, model, params, format, ranking, accept_policy;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> parallelism, shots, top_k, examples_per_rule, max_unmatch_rounds,
      max_llm_calls;
  std::optional<double> temperature, k;
  bool per_sentence = false;
};

void add_common(CLI::App* sub, Flags& f) {
  sub->add_option("--config", f.config, "JSON run configuration");
  sub->add_option("--seed", f.seed, "Random seed (shot and example sampling)");
  sub->add_option("--out", f.out, "Output file (trees or JSON report)");
  sub->add_option("--format", f.format, "Report on stdout: table or json")
      ->check(CLI::IsMember({"table", "json"}));
}

void add_backend(CLI::App* sub, Flags& f) {
  sub->add_option("--backend", f.backend, "scripted or http")->check(CLI::IsMember({"scripted", "http"}));
  sub->add_option("--replay", f.replay, "Replay file for the scripted backend");
  sub->add_option("--record", f.record, "Append every prompt/reply to this replay file");
  sub->add_option("--endpoint", f.endpoint, "OpenAI-compatible base URL");
  sub->add_option("--model", f.model, "Model name");
  sub->add_option("--temperature", f.temperature, "Sampling temperature");
  sub->add_option("--parallelism", f.parallelism, "Sentences processed concurrently");
}

ruleguide::RunConfig resolve(const Flags& f) {
  using namespace ruleguide;
  RunConfig cfg;
  if (!f.config.empty()) cfg = load_config_file(f.config);
  if (f.params) {
    std::ifstream in(*f.params);
    if (!in) throw Error(Errc::Config, "cannot open params file '" + *f.params + "'");
    try {
      apply_scoring_json(cfg.scoring, nlohmann::json::parse(in));
    } catch (const nlohmann::json::exception& e) {
      throw Error(Errc::Config, std::string("bad params file: ") + e.what());
    }
  }
  nlohmann::json o = nlohmann::json::object();
  auto set = [&](const char* key, const auto& v) {
    if (v) o[key] = *v;
  };
  set("treebank", f.treebank);
  set("treebank_format", f.treebank_format);
  set("input", f.input);
  set("base", f.base);
  set("pred", f.pred);
  set("gold", f.gold);
  set("output", f.out);
  set("trace", f.trace);
  set("record", f.record);
  set("format", f.format);
  set("seed", f.seed);
  set("parallelism", f.parallelism);
  set("shots", f.shots);
  set("mkp_k", f.k);
  if (f.per_sentence) o["per_sentence"] = true;
  nlohmann::json c = nlohmann::json::object();
  if (f.top_k) c["top_k_rules"] = *f.top_k;
  if (f.examples_per_rule) c["examples_per_rule"] = *f.examples_per_rule;
  if (f.max_unmatch_rounds) c["max_unmatch_rounds"] = *f.max_unmatch_rounds;
  if (f.max_llm_calls) c["max_llm_calls"] = *f.max_llm_calls;
  if (f.ranking) c["ranking"] = *f.ranking;
  if (f.accept_policy) c["accept_policy"] = *f.accept_policy;
  if (!c.empty()) o["correction"] = c;
  nlohmann::json b = nlohmann::json::object();
  if (f.backend) b["kind"] = *f.backend;
  if (f.replay) {
    b["replay"] = *f.replay;
    if (!f.backend) b["kind"] = "scripted";
  }
  if (f.endpoint) b["endpoint"] = *f.endpoint;
  if (f.model) b["model"] = *f.model;
  if (f.temperature) b["temperature"] = *f.temperature;
  if (!b.empty()) o["backend"] = b;
  apply_config_json(cfg, o);
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  using namespace ruleguide;
  CLI::App app{"Rule-guided self-correction for LLM constituency parsing"};
  app.require_subcommand(1);
  Flags f;

  auto* parse = app.add_subcommand("parse", "Few-shot parse sentences with a model backend");
  add_common(parse, f);
  add_backend(parse, f);
  parse->add_option("--sentences,--input", f.input, "Sentences, one per line");
  parse->add_option("--treebank", f.treebank, "Treebank to draw shots from");
  parse->add_option("--treebank-format", f.treebank_format, "line or blocks");
  parse->add_option("--shots", f.shots, "Number of in-context examples");

  auto* correct = app.add_subcommand("correct", "Unmatch and rule-guided structure correction");
  add_common(correct, f);
  add_backend(correct, f);
  correct->add_option("--sentences,--input", f.input, "Sentences, one per line");
  correct->add_option("--base", f.base, "Base predictions, one tree per line (else parse first)");
  correct->add_option("--treebank", f.treebank, "Reference treebank");
  correct->add_option("--treebank-format", f.treebank_format, "line or blocks");
  correct->add_option("--trace", f.trace, "JSONL trace of every model call");
  correct->add_option("--shots", f.shots, "Shots for the base parse when --base is absent");
  correct->add_option("--top-k", f.top_k, "Rules placed in each structure prompt");
  correct->add_option("--examples-per-rule", f.examples_per_rule, "Treebank examples per rule");
  correct->add_option("--max-unmatch-rounds", f.max_unmatch_rounds, "Unmatch re-prompts");
  correct->add_option("--max-llm-calls", f.max_llm_calls, "Model calls per sentence");
  correct->add_option("--ranking", f.ranking, "lcs_label or pos_sequence")
      ->check(CLI::IsMember({"lcs_label", "pos_sequence"}));
  correct->add_option("--accept-policy", f.accept_policy, "keep_if_valid or always_take_new")
      ->check(CLI::IsMember({"keep_if_valid", "always_take_new"}));

  auto* score = app.add_subcommand("score", "Labeled bracketing precision/recall/F1");
  add_common(score, f);
  score->add_option("--pred", f.pred, "Predicted trees, one per line");
  score->add_option("--gold", f.gold, "Gold trees, one per line");
  score->add_option("--params", f.params, "JSON scoring parameters");
  score->add_flag("--per-sentence", f.per_sentence, "Include per-sentence scores");

  auto* rules = app.add_subcommand("analyze-rules", "Known/unknown rule statistics");
  add_common(rules, f);
  rules->add_option("--pred", f.pred, "Predicted trees, one per line");
  rules->add_option("--gold", f.gold, "Gold trees, one per line");
  rules->add_option("--treebank", f.treebank, "Reference treebank");
  rules->add_option("--treebank-format", f.treebank_format, "line or blocks");

  auto* errors = app.add_subcommand("analyze-errors", "Span/label/flatness/deepness distribution");
  add_common(errors, f);
  errors->add_option("--pred", f.pred, "Predicted trees, one per line");
  errors->add_option("--gold", f.gold, "Gold trees, one per line");
  errors->add_flag("--records", f.per_sentence, "Include per-node records");

  auto* mkpc = app.add_subcommand("mkp", "Min-K% probability of token log-probabilities");
  add_common(mkpc, f);
  mkpc->add_option("--input", f.input, "JSONL of token log-probabilities");
  mkpc->add_option("--k", f.k, "Fraction of lowest-probability tokens (default 0.2)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitConfig;
  }

  RunConfig cfg;
  try {
    cfg = resolve(f);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return exit_code_for(e);
  }

  if (*parse) return run_command(cmd_parse, cfg);
  if (*correct) return run_command(cmd_correct, cfg);
  if (*score) return run_command(cmd_score, cfg);
  if (*rules) return run_command(cmd_analyze_rules, cfg);
  if (*errors) return run_command(cmd_analyze_errors, cfg);
  if (*mkpc) return run_command(cmd_mkp, cfg);
  return kExitConfig;
}
