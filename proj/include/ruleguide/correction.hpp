#pragma once

// Self-correction of model-produced parse trees.
//
// Stage 1 re-prompts with a targeted hint until the tree's words match the
// sentence. Stage 2 walks the tree top-down: every phrasal subtree whose
// rule never occurs in the reference treebank is a suspect. For a suspect
// NP -> DT VBN QP, each treebank rule with the same parent is compared to it
// through three views:
//
//   label     traversed children vs predicted children, as they are
//   flatness  traversed children each replaced by its own children
//             vs predicted children
//   deepness  traversed children vs predicted children each replaced by
//             its own children
//
// Views are scored by the longest common subsequence of the two label
// sequences; ties go to the more frequent rule. Treebank examples of the top
// rules are put in the prompt and the model re-parses the whole sentence.

#include <algorithm>
#include <chrono>
#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "ruleguide/corpus.hpp"
#include "ruleguide/error.hpp"
#include "ruleguide/llm.hpp"
#include "ruleguide/prompt.hpp"
#include "ruleguide/rules.hpp"
#include "ruleguide/scoring.hpp"
#include "ruleguide/tree.hpp"

namespace ruleguide {

enum class RankingStrategy { LcsLabel, PosSequence };
enum class AcceptPolicy { AlwaysTakeNew, KeepIfValid };

struct CorrectionConfig {
  std::size_t top_k_rules = 5;
  std::size_t examples_per_rule = 1;
  std::size_t max_unmatch_rounds = 3;
  RankingStrategy ranking = RankingStrategy::LcsLabel;
  std::size_t height_floor = 2;
  AcceptPolicy accept = AcceptPolicy::KeepIfValid;
  std::size_t max_llm_calls = 32;  // per sentence, both stages
  std::uint64_t seed = 0;

  void validate() const {
    if (top_k_rules < 1) throw Error(Errc::Config, "top_k_rules must be >= 1");
    if (examples_per_rule < 1) throw Error(Errc::Config, "examples_per_rule must be >= 1");
  }
};

enum class View { Label, Flatness, Deepness, PosSequence };

inline std::string_view view_name(View v) {
  switch (v) {
    case View::Label: return "label";
    case View::Flatness: return "flatness";
    case View::Deepness: return "deepness";
    case View::PosSequence: return "pos_sequence";
  }
  return "?";
}

struct Candidate {
  Rule rule;
  View transform = View::Label;
  std::vector<std::string> comparable_sequence;  // treebank side
  std::vector<std::string> predicted_sequence;   // predicted side
  std::size_t lcs = 0;
  std::size_t frequency = 0;
  // Point into the RuleIndex the candidate was generated from.
  std::vector<const RuleOccurrence*> example_occurrences;
};

inline std::size_t lcs_len(const std::vector<std::string>& a, const std::vector<std::string>& b) {
  std::vector<std::size_t> prev(b.size() + 1, 0), cur(b.size() + 1, 0);
  for (std::size_t i = 1; i <= a.size(); ++i) {
    for (std::size_t j = 1; j <= b.size(); ++j) {
      cur[j] = a[i - 1] == b[j - 1] ? prev[j - 1] + 1 : std::max(prev[j], cur[j - 1]);
    }
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

// ---------------------------------------------------------------- unmatch

inline PromptSpec make_unmatch_hint(const UnmatchKind& kind, const std::vector<std::string>& sentence,
                                    const std::string& prior_tree_text) {
  PromptSpec p;
  p.sentence = join(sentence);
  p.prior_answer = prior_tree_text;
  switch (kind.kind) {
    case UnmatchKind::Kind::None:
      throw Error(Errc::Precondition, "no unmatch to correct");
    case UnmatchKind::Kind::Length:
      p.hint = "The previous answer has " + std::to_string(kind.got_length) +
               " words, but the sentence has " + std::to_string(kind.expected_length) +
               " words. Every word of the sentence must appear exactly once in the parse tree, in "
               "the original order, and no other word may be added.";
      break;
    case UnmatchKind::Kind::Word:
      p.hint = "In the previous answer, word " + std::to_string(kind.position + 1) + " is \"" +
               kind.got_word + "\" but the sentence has \"" + kind.expected_word +
               "\" there. Do not change any word of the sentence; copy every word exactly as "
               "given.";
      break;
  }
  return p;
}

// ---------------------------------------------------------------- identify

inline std::vector<SubtreeRef> identify_error_subtrees(const Tree& tree, const RuleIndex& index,
                                                       const CorrectionConfig& cfg = {}) {
  std::vector<SubtreeRef> out;
  for (auto& ref : subtrees_by_height(tree)) {
    if (ref.height < cfg.height_floor) continue;
    if (!is_known(index, rule_of(*ref.node))) out.push_back(std::move(ref));
  }
  return out;
}

// ---------------------------------------------------------------- views

// Replaces every non-empty expansion by its labels; leaf children stay.
inline std::vector<std::string> expand_one_level(
    const std::vector<std::string>& labels, const std::vector<std::vector<std::string>>& expansions) {
  std::vector<std::string> out;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (i < expansions.size() && !expansions[i].empty()) {
      out.insert(out.end(), expansions[i].begin(), expansions[i].end());
    } else {
      out.push_back(labels[i]);
    }
  }
  return out;
}

namespace detail {

inline bool any_nonempty(const std::vector<std::vector<std::string>>& xs) {
  return std::any_of(xs.begin(), xs.end(), [](const auto& x) { return !x.empty(); });
}

inline std::vector<const RuleOccurrence*> all_occurrences(const RuleEntry& e) {
  std::vector<const RuleOccurrence*> out;
  out.reserve(e.occurrences.size());
  for (const auto& o : e.occurrences) out.push_back(&o);
  return out;
}

}  // namespace detail

inline std::vector<Candidate> generate_candidates(const Rule& pred_rule, const Tree& pred_node,
                                                  const RuleIndex& index) {
  auto entries = index.with_parent(pred_rule.parent);
  if (entries.empty()) {
    throw Error(Errc::NoCandidates, "no treebank rule has parent '" + pred_rule.parent + "'");
  }
  const auto& pred_children = pred_rule.children;
  std::vector<std::vector<std::string>> pred_expansions;
  for (const auto& c : pred_node.children()) pred_expansions.push_back(c.child_labels());
  const bool pred_expandable = detail::any_nonempty(pred_expansions);
  const auto pred_expanded = expand_one_level(pred_children, pred_expansions);

  std::vector<Candidate> out;
  for (const RuleEntry* e : entries) {
    const auto& children = e->rule.children;

    Candidate label{e->rule, View::Label, children, pred_children,
                    lcs_len(children, pred_children), e->frequency(), detail::all_occurrences(*e)};
    out.push_back(std::move(label));

    // Occurrences of one rule can expand differently; each distinct
    // expansion is its own flatness candidate.
    std::map<std::vector<std::string>, std::vector<const RuleOccurrence*>> expansions;
    for (const auto& occ : e->occurrences) {
      if (!detail::any_nonempty(occ.child_expansions)) continue;
      expansions[expand_one_level(children, occ.child_expansions)].push_back(&occ);
    }
    for (auto& [seq, occs] : expansions) {
      std::size_t l = lcs_len(seq, pred_children);
      out.push_back({e->rule, View::Flatness, seq, pred_children, l, e->frequency(), std::move(occs)});
    }

    if (pred_expandable) {
      out.push_back({e->rule, View::Deepness, children, pred_expanded,
                     lcs_len(children, pred_expanded), e->frequency(), detail::all_occurrences(*e)});
    }
  }
  return out;
}

// ---------------------------------------------------------------- ranking

namespace detail {

inline bool candidate_before(const Candidate& a, const Candidate& b) {
  if (a.lcs != b.lcs) return a.lcs > b.lcs;
  if (a.frequency != b.frequency) return a.frequency > b.frequency;
  auto ta = a.rule.text(), tb = b.rule.text();
  if (ta != tb) return ta < tb;
  if (a.transform != b.transform) return a.transform < b.transform;
  return a.comparable_sequence < b.comparable_sequence;
}

}  // namespace detail

// Orders by (lcs desc, frequency desc, rule text asc) and keeps the best
// view of each of the first top_k_rules distinct rules.
inline std::vector<Candidate> rank_candidates(std::vector<Candidate> candidates,
                                              const CorrectionConfig& cfg) {
  std::sort(candidates.begin(), candidates.end(), detail::candidate_before);
  std::vector<Candidate> out;
  std::set<std::string> seen;
  for (auto& c : candidates) {
    if (out.size() >= cfg.top_k_rules) break;
    if (!seen.insert(c.rule.text()).second) continue;
    out.push_back(std::move(c));
  }
  return out;
}

// Alternative ranking: LCS between the POS yield of the predicted subtree and
// that of each treebank occurrence with the same parent label. A rule scores
// with its best occurrence.
inline std::vector<Candidate> pos_rank(const Tree& pred_node, const RuleIndex& index,
                                       const CorrectionConfig& cfg) {
  auto entries = index.with_parent(pred_node.label());
  if (entries.empty()) {
    throw Error(Errc::NoCandidates, "no treebank rule has parent '" + pred_node.label() + "'");
  }
  const auto pred_pos = pred_node.pos_tags();
  std::vector<Candidate> out;
  for (const RuleEntry* e : entries) {
    Candidate c{e->rule, View::PosSequence, {}, pred_pos, 0, e->frequency(), {}};
    bool first = true;
    for (const auto& occ : e->occurrences) {
      std::size_t l = lcs_len(occ.pos_yield, pred_pos);
      if (first || l > c.lcs) {
        c.lcs = l;
        c.comparable_sequence = occ.pos_yield;
        c.example_occurrences.clear();
        first = false;
      }
      if (l == c.lcs) c.example_occurrences.push_back(&occ);
    }
    out.push_back(std::move(c));
  }
  return rank_candidates(std::move(out), cfg);
}

// ---------------------------------------------------------------- prompting

// examples_per_rule occurrences in (entry, path) order, starting at an offset
// derived from the seed and wrapping; never repeats an occurrence.
inline std::vector<const RuleOccurrence*> sample_occurrences(std::vector<const RuleOccurrence*> occs,
                                                             std::size_t count, std::uint64_t seed) {
  std::sort(occs.begin(), occs.end(), [](const RuleOccurrence* a, const RuleOccurrence* b) {
    if (a->corpus_entry != b->corpus_entry) return a->corpus_entry < b->corpus_entry;
    return a->node_path < b->node_path;
  });
  std::vector<const RuleOccurrence*> out;
  if (occs.empty()) return out;
  std::size_t n = occs.size();
  std::size_t start = static_cast<std::size_t>(seed % n);
  for (std::size_t i = 0; i < std::min(count, n); ++i) out.push_back(occs[(start + i) % n]);
  return out;
}

inline PromptSpec build_structure_prompt(const std::vector<std::string>& sentence,
                                         const std::string& prior_answer, const Tree& pred_node,
                                         const std::vector<Candidate>& candidates,
                                         const Corpus& treebank, const CorrectionConfig& cfg) {
  if (candidates.empty()) throw Error(Errc::Precondition, "no ranked candidates to show");
  PromptSpec p;
  p.sentence = join(sentence);
  p.prior_answer = prior_answer;
  std::vector<std::string> rule_texts;
  for (const auto& c : candidates) {
    rule_texts.push_back(c.rule.text());
    for (const RuleOccurrence* occ : sample_occurrences(c.example_occurrences, cfg.examples_per_rule, cfg.seed)) {
      if (occ->corpus_entry >= treebank.size()) {
        throw Error(Errc::Precondition, "rule occurrence refers outside the treebank");
      }
      const auto& entry = treebank.entries[occ->corpus_entry];
      p.examples.push_back({join(entry.sentence), serialize(entry.tree), c.rule.text(),
                            serialize(entry.tree.at(occ->node_path))});
    }
  }
  p.hint = "In the previous answer, the subtree " + serialize(pred_node) + " uses the rule " +
           rule_of(pred_node).text() +
           ", which never occurs in the treebank, so it is likely wrong. The examples show "
           "treebank structures similar to it (" + join(rule_texts, "; ") +
           "). Correct this part of the tree if needed, keep every word of the sentence unchanged, "
           "and output the full parse tree of the sentence.";
  return p;
}

// ---------------------------------------------------------------- loop

struct TraceRecord {
  std::size_t sentence_index = 0;
  std::string stage;  // "unmatch" or "structure"
  std::size_t call = 0;
  std::string target;
  std::string prompt_hash;
  std::string prompt;
  std::string reply;
  // accepted, rejected_parse, rejected_unmatch, skipped_no_candidates,
  // backend_error, call_budget_exhausted
  std::string decision;
  std::string detail;
  double elapsed_ms = 0.0;
};

struct CorrectionResult {
  Tree final_tree;
  std::vector<TraceRecord> trace;
  std::size_t llm_calls = 0;
  std::optional<std::string> failure;  // backend error that stopped the run
};

// Runs both correction stages on one sentence. Backend errors end the run
// with the best tree so far and the failure recorded; they are not thrown.
inline CorrectionResult correct_tree(const std::vector<std::string>& sentence, const Tree& base,
                                     const RuleIndex& index, const Corpus& treebank, Backend& backend,
                                     const CorrectionConfig& cfg, std::size_t sentence_index = 0) {
  cfg.validate();
  CorrectionResult res{base, {}, 0, std::nullopt};
  Tree& current = res.final_tree;

  auto record = [&](std::string stage, std::string target) {
    TraceRecord r;
    r.sentence_index = sentence_index;
    r.stage = std::move(stage);
    r.call = res.llm_calls;
    r.target = std::move(target);
    return r;
  };

  // Returns false when the backend failed.
  auto exchange = [&](TraceRecord& r, const PromptSpec& spec, std::string& reply) {
    r.prompt = render(spec);
    r.prompt_hash = stable_hash(r.prompt);
    ++res.llm_calls;
    auto t0 = std::chrono::steady_clock::now();
    try {
      r.reply = reply = backend.complete(r.prompt);
      r.elapsed_ms =
          std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
      return true;
    } catch (const Error& e) {
      r.decision = "backend_error";
      r.detail = e.what();
      res.failure = e.what();
      res.trace.push_back(r);
      return false;
    }
  };

  // Stage 1: leaf alignment.
  for (std::size_t round = 0; round < cfg.max_unmatch_rounds; ++round) {
    UnmatchKind u = detect_unmatch(sentence, current);
    if (u.is_none()) break;
    if (res.llm_calls >= cfg.max_llm_calls) {
      auto r = record("unmatch", "");
      r.decision = "call_budget_exhausted";
      res.trace.push_back(std::move(r));
      return res;
    }
    auto r = record("unmatch", u.kind == UnmatchKind::Kind::Length ? "length" : "word");
    std::string reply;
    if (!exchange(r, make_unmatch_hint(u, sentence, serialize(current)), reply)) return res;
    try {
      current = parse_reply(reply);
      r.decision = "accepted";
      auto after = detect_unmatch(sentence, current);
      if (!after.is_none()) r.detail = "still unmatched";
    } catch (const Error& e) {
      r.decision = "rejected_parse";
      r.detail = e.what();
    }
    res.trace.push_back(std::move(r));
  }

  // Stage 2: top-down structure correction, recomputed after every reply.
  std::set<std::pair<Span, std::string>> attempted;
  for (;;) {
    auto suspects = identify_error_subtrees(current, index, cfg);
    auto next = std::find_if(suspects.begin(), suspects.end(), [&](const SubtreeRef& s) {
      return !attempted.count({s.node->span(), s.node->label()});
    });
    if (next == suspects.end()) break;
    if (res.llm_calls >= cfg.max_llm_calls) {
      auto r = record("structure", "");
      r.decision = "call_budget_exhausted";
      res.trace.push_back(std::move(r));
      break;
    }
    const Tree& node = *next->node;
    attempted.insert({node.span(), node.label()});
    Rule pred_rule = rule_of(node);
    std::string target = std::to_string(node.span().start) + ":" + std::to_string(node.span().end) +
                         " " + pred_rule.text();

    std::vector<Candidate> ranked;
    try {
      ranked = cfg.ranking == RankingStrategy::PosSequence
                   ? pos_rank(node, index, cfg)
                   : rank_candidates(generate_candidates(pred_rule, node, index), cfg);
    } catch (const Error& e) {
      if (e.code() != Errc::NoCandidates) throw;
      auto r = record("structure", target);
      r.decision = "skipped_no_candidates";
      r.detail = e.what();
      res.trace.push_back(std::move(r));
      continue;
    }

    auto spec = build_structure_prompt(sentence, serialize(current), node, ranked, treebank, cfg);
    auto r = record("structure", target);
    std::string reply;
    if (!exchange(r, spec, reply)) return res;
    try {
      Tree proposed = parse_reply(reply);
      bool aligned_before = detect_unmatch(sentence, current).is_none();
      bool aligned_after = detect_unmatch(sentence, proposed).is_none();
      if (cfg.accept == AcceptPolicy::KeepIfValid && aligned_before && !aligned_after) {
        r.decision = "rejected_unmatch";
      } else {
        r.decision = "accepted";
        current = std::move(proposed);
      }
    } catch (const Error& e) {
      r.decision = "rejected_parse";
      r.detail = e.what();
    }
    res.trace.push_back(std::move(r));
  }
  return res;
}

}  // namespace ruleguide
