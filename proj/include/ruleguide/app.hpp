#pragma once

// Subcommands behind the `ruleguide` executable. Each takes a validated
// RunConfig and returns a process exit status:
//   0 ok, 1 data error, 2 configuration error, 3 backend failure.

#include <atomic>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <memory>
#include <mutex>
#include <random>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "ruleguide/config.hpp"
#include "ruleguide/correction.hpp"
#include "ruleguide/corpus.hpp"
#include "ruleguide/http.hpp"
#include "ruleguide/llm.hpp"
#include "ruleguide/rules.hpp"
#include "ruleguide/scoring.hpp"
#include "ruleguide/taxonomy.hpp"

namespace ruleguide {

enum ExitCode : int { kExitOk = 0, kExitData = 1, kExitConfig = 2, kExitBackend = 3 };

inline int exit_code_for(const Error& e) {
  if (e.code() == Errc::Config) return kExitConfig;
  if (e.is_backend()) return kExitBackend;
  return kExitData;
}

struct Streams {
  std::ostream& out = std::cout;
  std::ostream& err = std::cerr;
};

namespace app {

inline void require_file(const std::string& path, const char* what) {
  if (path.empty()) throw Error(Errc::Config, std::string("missing required path: ") + what);
  if (!std::filesystem::is_regular_file(path)) {
    throw Error(Errc::Config, std::string(what) + " '" + path + "' does not exist");
  }
}

// Runs fn(i) for i in [0, n) on up to `threads` workers. The first exception
// thrown is rethrown after all workers finish.
template <typename Fn>
void parallel_for(std::size_t n, std::size_t threads, Fn fn) {
  threads = std::max<std::size_t>(1, std::min(threads, n));
  if (threads == 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr first_error;
  std::mutex mu;
  std::vector<std::thread> pool;
  for (std::size_t t = 0; t < threads; ++t) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(mu);
          if (!first_error) first_error = std::current_exception();
        }
      }
    });
  }
  for (auto& th : pool) th.join();
  if (first_error) std::rethrow_exception(first_error);
}

// Deterministic partial Fisher-Yates over mt19937_64 raw draws, so the
// chosen shots do not depend on the standard library's distributions.
inline std::vector<std::size_t> sample_indices(std::size_t n, std::size_t k, std::uint64_t seed) {
  std::vector<std::size_t> idx(n);
  for (std::size_t i = 0; i < n; ++i) idx[i] = i;
  std::mt19937_64 rng(seed);
  k = std::min(k, n);
  for (std::size_t i = 0; i < k; ++i) {
    std::size_t j = i + static_cast<std::size_t>(rng() % (n - i));
    std::swap(idx[i], idx[j]);
  }
  idx.resize(k);
  return idx;
}

inline std::vector<Shot> sample_shots(const Corpus& treebank, std::size_t k, std::uint64_t seed) {
  std::vector<Shot> shots;
  for (std::size_t i : sample_indices(treebank.size(), k, seed)) {
    shots.push_back({join(treebank.entries[i].sentence), serialize(treebank.entries[i].tree)});
  }
  return shots;
}

// Owns the configured backend plus the optional recording wrapper.
struct BackendStack {
  std::unique_ptr<Backend> base;
  std::unique_ptr<RecordingBackend> recorder;

  Backend& get() { return recorder ? static_cast<Backend&>(*recorder) : *base; }
};

inline BackendStack open_backend(const RunConfig& cfg) {
  BackendStack s;
  if (cfg.backend.kind == BackendSpec::Kind::Scripted) {
    require_file(cfg.backend.replay_path, "replay file");
  }
  s.base = make_backend(cfg.backend);
  if (!cfg.record.empty()) s.recorder = std::make_unique<RecordingBackend>(*s.base, cfg.record);
  return s;
}

inline void write_lines(const std::string& path, const std::vector<std::string>& lines,
                        std::ostream& fallback) {
  if (path.empty()) {
    for (const auto& l : lines) fallback << l << '\n';
    return;
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(Errc::Io, "cannot write '" + path + "'");
  for (const auto& l : lines) out << l << '\n';
}

inline void write_json(const std::string& path, const nlohmann::json& j) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(Errc::Io, "cannot write '" + path + "'");
  out << j.dump(2) << '\n';
}

// JSON goes to --out when given; stdout gets the table, or the JSON itself
// with --format json.
inline void emit_report(const RunConfig& cfg, const nlohmann::json& j, const std::string& table,
                        Streams io) {
  if (!cfg.output.empty()) write_json(cfg.output, j);
  if (cfg.format == "json") io.out << j.dump(2) << '\n';
  else io.out << table;
}

inline std::string pct(double v) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(2) << 100.0 * v;
  return os.str();
}

inline nlohmann::json score_json(const ScoreReport& r) {
  return {{"sentences", r.sentences},       {"unmatch_count", r.unmatch_count},
          {"matched", r.matched},           {"gold_brackets", r.gold_brackets},
          {"pred_brackets", r.pred_brackets}, {"recall", r.recall},
          {"precision", r.precision},       {"f1", r.f1}};
}

inline std::string score_table(const ScoreReport& r) {
  std::ostringstream os;
  os << "Number of sentence       = " << std::setw(8) << r.sentences << '\n'
     << "Number of Error sentence = " << std::setw(8) << r.unmatch_count << '\n'
     << "Bracketing Recall        = " << std::setw(8) << pct(r.recall) << '\n'
     << "Bracketing Precision     = " << std::setw(8) << pct(r.precision) << '\n'
     << "Bracketing FMeasure      = " << std::setw(8) << pct(r.f1) << '\n'
     << "Matched / gold / pred    = " << r.matched << " / " << r.gold_brackets << " / "
     << r.pred_brackets << '\n';
  return os.str();
}

inline Corpus load_gold(const RunConfig& cfg) {
  require_file(cfg.gold, "gold file");
  Corpus gold = load_corpus(cfg.gold);
  if (!gold.errors.empty()) {
    throw Error(Errc::UnbalancedBrackets, "gold file '" + cfg.gold + "' line " +
                                              std::to_string(gold.errors.front().line) + ": " +
                                              gold.errors.front().message);
  }
  return gold;
}

inline std::vector<std::optional<Tree>> load_pred_trees(const std::string& path, std::size_t expected) {
  require_file(path, "prediction file");
  auto lines = load_predictions(path);
  if (lines.size() != expected) {
    throw Error(Errc::LengthMismatch, "prediction file has " + std::to_string(lines.size()) +
                                          " lines, gold has " + std::to_string(expected));
  }
  std::vector<std::optional<Tree>> out;
  out.reserve(lines.size());
  for (auto& l : lines) out.push_back(std::move(l.tree));
  return out;
}

inline ScoreReport score_corpus(const std::vector<std::optional<Tree>>& pred, const Corpus& gold,
                                const ScoringParams& params, std::vector<ScoreReport>* per_sentence = nullptr) {
  std::vector<ScoreReport> reports;
  reports.reserve(pred.size());
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const Tree& g = gold.entries[i].tree;
    reports.push_back(pred[i] ? score_pair(*pred[i], g, params) : score_unmatched(g, params));
  }
  if (per_sentence) *per_sentence = reports;
  return aggregate(reports);
}

inline nlohmann::json trace_json(const TraceRecord& r) {
  return {{"sentence", r.sentence_index}, {"stage", r.stage},   {"call", r.call},
          {"target", r.target},           {"prompt_hash", r.prompt_hash},
          {"prompt", r.prompt},           {"reply", r.reply},   {"decision", r.decision},
          {"detail", r.detail},           {"elapsed_ms", r.elapsed_ms}};
}

}  // namespace app

// ------------------------------------------------------------------ parse

inline int cmd_parse(const RunConfig& cfg, Streams io = {}) {
  app::require_file(cfg.input, "sentences file");
  app::require_file(cfg.treebank, "treebank");
  if (cfg.shots == 0) throw Error(Errc::Config, "shots must be >= 1");
  Corpus treebank = load_corpus(cfg.treebank, cfg.treebank_format);
  auto sentences = load_sentences(cfg.input);
  auto shots = app::sample_shots(treebank, cfg.shots, cfg.seed);
  auto backend = app::open_backend(cfg);

  std::vector<std::string> lines(sentences.size());
  std::vector<std::string> errors(sentences.size());
  std::vector<char> backend_failed(sentences.size(), 0);
  app::parallel_for(sentences.size(), cfg.parallelism, [&](std::size_t i) {
    try {
      std::string reply = few_shot_parse(join(sentences[i]), shots, backend.get());
      lines[i] = serialize(parse_reply(reply));
    } catch (const Error& e) {
      errors[i] = e.what();
      backend_failed[i] = e.is_backend();
    }
  });
  app::write_lines(cfg.output, lines, io.out);
  std::size_t failed = 0, backend_failures = 0;
  for (std::size_t i = 0; i < sentences.size(); ++i) {
    if (errors[i].empty()) continue;
    ++failed;
    backend_failures += backend_failed[i];
    io.err << "sentence " << i + 1 << ": " << errors[i] << '\n';
  }
  io.err << "parsed " << sentences.size() - failed << "/" << sentences.size() << " sentences\n";
  if (!sentences.empty() && backend_failures == sentences.size()) return kExitBackend;
  return kExitOk;
}

// ------------------------------------------------------------------ correct

inline int cmd_correct(const RunConfig& cfg, Streams io = {}) {
  app::require_file(cfg.input, "sentences file");
  app::require_file(cfg.treebank, "treebank");
  cfg.correction.validate();
  Corpus treebank = load_corpus(cfg.treebank, cfg.treebank_format);
  RuleIndex index = build_index(treebank);
  auto sentences = load_sentences(cfg.input);
  auto backend = app::open_backend(cfg);
  const std::size_t n = sentences.size();

  // Base trees come from --base, or from a few-shot parse when absent.
  std::vector<std::optional<Tree>> base(n);
  std::vector<std::string> base_errors(n);
  std::vector<char> base_backend_failed(n, 0);
  if (!cfg.base.empty()) {
    app::require_file(cfg.base, "base predictions");
    auto lines = load_predictions(cfg.base);
    if (lines.size() != n) {
      throw Error(Errc::LengthMismatch, "base file has " + std::to_string(lines.size()) +
                                            " lines for " + std::to_string(n) + " sentences");
    }
    for (std::size_t i = 0; i < n; ++i) {
      try {
        base[i] = parse_bracketed(repair_brackets(lines[i].raw));
      } catch (const Error& e) {
        base_errors[i] = e.what();
      }
    }
  } else {
    auto shots = app::sample_shots(treebank, cfg.shots, cfg.seed);
    app::parallel_for(n, cfg.parallelism, [&](std::size_t i) {
      try {
        base[i] = parse_reply(few_shot_parse(join(sentences[i]), shots, backend.get()));
      } catch (const Error& e) {
        base_errors[i] = e.what();
        base_backend_failed[i] = e.is_backend();
      }
    });
  }

  CorrectionConfig ccfg = cfg.correction;
  ccfg.seed = cfg.seed;
  std::vector<std::optional<CorrectionResult>> results(n);
  app::parallel_for(n, cfg.parallelism, [&](std::size_t i) {
    if (!base[i]) return;
    results[i] = correct_tree(sentences[i], *base[i], index, treebank, backend.get(), ccfg, i);
  });

  std::vector<std::string> lines(n);
  std::vector<std::string> trace_lines;
  std::size_t calls = 0, accepted = 0, failures = 0, unparsed = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (!results[i]) {
      ++unparsed;
      failures += base_backend_failed[i];
      TraceRecord r;
      r.sentence_index = i;
      r.stage = "base";
      r.decision = "base_unparseable";
      r.detail = base_errors[i];
      trace_lines.push_back(app::trace_json(r).dump());
      io.err << "sentence " << i + 1 << ": no usable base tree: " << base_errors[i] << '\n';
      continue;
    }
    const auto& res = *results[i];
    lines[i] = serialize(res.final_tree);
    calls += res.llm_calls;
    if (res.failure) {
      ++failures;
      io.err << "sentence " << i + 1 << ": " << *res.failure << '\n';
    }
    for (const auto& r : res.trace) {
      accepted += r.decision == "accepted";
      trace_lines.push_back(app::trace_json(r).dump());
    }
  }
  app::write_lines(cfg.output, lines, io.out);
  if (!cfg.trace.empty()) app::write_lines(cfg.trace, trace_lines, io.out);

  io.err << "corrected " << n << " sentences: " << calls << " model calls, " << accepted
         << " accepted replies, " << unparsed << " without base tree, " << failures
         << " backend failures, config " << config_hash(cfg) << '\n';
  // Every sentence hit a backend failure, in the base parse or in correction.
  std::size_t backend_hit = 0;
  for (std::size_t i = 0; i < n; ++i) {
    backend_hit += results[i] ? results[i]->failure.has_value() : base_backend_failed[i] != 0;
  }
  if (n > 0 && backend_hit == n) return kExitBackend;
  return kExitOk;
}

// ------------------------------------------------------------------ score

inline int cmd_score(const RunConfig& cfg, Streams io = {}) {
  Corpus gold = app::load_gold(cfg);
  auto pred = app::load_pred_trees(cfg.pred, gold.size());
  std::vector<ScoreReport> per;
  ScoreReport total = app::score_corpus(pred, gold, cfg.scoring, &per);
  nlohmann::json j = app::score_json(total);
  j["config_hash"] = config_hash(cfg);
  j["scoring"] = scoring_to_json(cfg.scoring);
  if (cfg.per_sentence) {
    j["per_sentence"] = nlohmann::json::array();
    for (const auto& r : per) j["per_sentence"].push_back(app::score_json(r));
  }
  app::emit_report(cfg, j, app::score_table(total), io);
  return kExitOk;
}

// ------------------------------------------------------------------ analyze-rules

inline int cmd_analyze_rules(const RunConfig& cfg, Streams io = {}) {
  app::require_file(cfg.treebank, "treebank");
  Corpus gold = app::load_gold(cfg);
  auto pred = app::load_pred_trees(cfg.pred, gold.size());
  RuleIndex index = build_index(load_corpus(cfg.treebank, cfg.treebank_format));
  RuleStats st = known_rule_stats(pred, gold, index);

  nlohmann::json j = {{"total_parsed", st.total_parsed},
                      {"total_known", st.total_known},
                      {"known_correct", st.known_correct},
                      {"unknown_correct", st.unknown_correct},
                      {"known_accuracy", st.known_accuracy},
                      {"unknown_accuracy", st.unknown_accuracy},
                      {"skipped_entries", st.skipped_entries},
                      {"treebank_rules", index.distinct()},
                      {"config_hash", config_hash(cfg)}};
  std::ostringstream t;
  t << "# Total parsed  # Total known  Accuracy known (%)  Accuracy unknown (%)\n"
    << std::setw(14) << st.total_parsed << std::setw(15) << st.total_known << std::setw(20)
    << app::pct(st.known_accuracy) << std::setw(22) << app::pct(st.unknown_accuracy) << '\n'
    << "skipped sentences (missing or unmatched leaves): " << st.skipped_entries.size() << '\n';
  app::emit_report(cfg, j, t.str(), io);
  return kExitOk;
}

// ------------------------------------------------------------------ analyze-errors

inline int cmd_analyze_errors(const RunConfig& cfg, Streams io = {}) {
  Corpus gold = app::load_gold(cfg);
  auto pred = app::load_pred_trees(cfg.pred, gold.size());
  std::vector<ErrorRecord> all;
  std::vector<std::size_t> skipped;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    if (!pred[i] || pred[i]->words() != gold.entries[i].tree.words()) {
      skipped.push_back(i);
      continue;
    }
    auto recs = error_report(*pred[i], gold.entries[i].tree, i);
    all.insert(all.end(), recs.begin(), recs.end());
  }
  ErrorDistribution d = distribution(all);
  nlohmann::json j = {{"span", d.span},       {"label", d.label},     {"flatness", d.flatness},
                      {"deepness", d.deepness}, {"total", d.total},   {"correct", d.correct},
                      {"classified", d.classified()}, {"skipped_entries", skipped},
                      {"config_hash", config_hash(cfg)}};
  if (cfg.per_sentence) {
    j["records"] = nlohmann::json::array();
    for (const auto& r : all) {
      nlohmann::json rec = {{"entry", r.entry_index},
                            {"path", r.node_path},
                            {"error", error_type_name(r.error)},
                            {"pred_rule", r.pred_rule.text()}};
      if (r.gold_counterpart) {
        const auto& g = *r.gold_counterpart;
        rec["gold"] = {{"span", {g.span.start, g.span.end}},
                       {"rule", Rule{g.parent, g.children}.text()}};
      }
      j["records"].push_back(std::move(rec));
    }
  }
  std::ostringstream t;
  t << "Span  Label  Flatness  Deepness  Total  (Correct)\n"
    << std::setw(4) << d.span << std::setw(7) << d.label << std::setw(10) << d.flatness
    << std::setw(10) << d.deepness << std::setw(7) << d.total << "  (" << d.correct << ")\n"
    << "skipped sentences (missing or unmatched leaves): " << skipped.size() << '\n';
  app::emit_report(cfg, j, t.str(), io);
  return kExitOk;
}

// ------------------------------------------------------------------ mkp

// Input: JSONL, each line either {"tokens": [...], "logprobs": [...]} or an
// OpenAI-style response carrying choices[0].logprobs.content[].
inline TokenLogProbs parse_logprob_line(const nlohmann::json& j) {
  TokenLogProbs lp;
  if (j.contains("logprobs") && j.at("logprobs").is_array()) {
    lp.logprobs = j.at("logprobs").get<std::vector<double>>();
    if (j.contains("tokens")) lp.tokens = j.at("tokens").get<std::vector<std::string>>();
    return lp;
  }
  const auto& content = j.at("choices").at(0).at("logprobs").at("content");
  for (const auto& t : content) {
    lp.tokens.push_back(t.at("token").get<std::string>());
    lp.logprobs.push_back(t.at("logprob").get<double>());
  }
  return lp;
}

inline int cmd_mkp(const RunConfig& cfg, Streams io = {}) {
  app::require_file(cfg.input, "log-probability file");
  if (!(cfg.mkp_k > 0.0 && cfg.mkp_k <= 1.0)) throw Error(Errc::Config, "k must lie in (0, 1]");
  std::ifstream in(cfg.input);
  std::vector<double> values;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      values.push_back(mkp(parse_logprob_line(nlohmann::json::parse(line)), cfg.mkp_k));
    } catch (const nlohmann::json::exception& e) {
      throw Error(Errc::MalformedToken, cfg.input + ":" + std::to_string(lineno) + ": " + e.what());
    } catch (const Error& e) {
      throw Error(e.code(), cfg.input + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  if (values.empty()) throw Error(Errc::EmptySequence, "no log-probability records");
  double mean = 0.0;
  for (double v : values) mean += v;
  mean /= static_cast<double>(values.size());
  nlohmann::json j = {{"k", cfg.mkp_k}, {"count", values.size()}, {"mean", mean},
                      {"per_sentence", values}, {"config_hash", config_hash(cfg)}};
  std::ostringstream t;
  t << std::fixed << std::setprecision(4) << "MKP (k=" << cfg.mkp_k << ") over " << values.size()
    << " sentences: mean " << mean << '\n';
  app::emit_report(cfg, j, t.str(), io);
  return kExitOk;
}

// Runs a subcommand, mapping errors to exit codes.
template <typename Cmd>
int run_command(Cmd cmd, const RunConfig& cfg, Streams io = {}) {
  try {
    return cmd(cfg, io);
  } catch (const Error& e) {
    io.err << "error: " << e.what() << '\n';
    return exit_code_for(e);
  } catch (const std::exception& e) {
    io.err << "error: " << e.what() << '\n';
    return kExitData;
  }
}

}  // namespace ruleguide
