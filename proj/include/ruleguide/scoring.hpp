#pragma once

// EVALB-style labeled bracketing scores and leaf alignment checks.

#include <cstddef>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "ruleguide/tree.hpp"

namespace ruleguide {

struct UnmatchKind {
  enum class Kind { None, Length, Word };

  Kind kind = Kind::None;
  std::size_t expected_length = 0;
  std::size_t got_length = 0;
  std::size_t position = 0;
  std::string expected_word;
  std::string got_word;

  static UnmatchKind none() { return {}; }
  static UnmatchKind length(std::size_t expected, std::size_t got) {
    UnmatchKind u;
    u.kind = Kind::Length;
    u.expected_length = expected;
    u.got_length = got;
    return u;
  }
  static UnmatchKind word(std::size_t pos, std::string expected, std::string got) {
    UnmatchKind u;
    u.kind = Kind::Word;
    u.expected_length = u.got_length = 0;
    u.position = pos;
    u.expected_word = std::move(expected);
    u.got_word = std::move(got);
    return u;
  }

  bool is_none() const { return kind == Kind::None; }
  friend bool operator==(const UnmatchKind&, const UnmatchKind&) = default;
};

inline UnmatchKind detect_unmatch(const std::vector<std::string>& sentence,
                                  const std::vector<std::string>& leaves) {
  if (sentence.size() != leaves.size()) return UnmatchKind::length(sentence.size(), leaves.size());
  for (std::size_t i = 0; i < sentence.size(); ++i) {
    if (sentence[i] != leaves[i]) return UnmatchKind::word(i, sentence[i], leaves[i]);
  }
  return UnmatchKind::none();
}

inline UnmatchKind detect_unmatch(const std::vector<std::string>& sentence, const Tree& tree) {
  return detect_unmatch(sentence, tree.words());
}

enum class UnmatchPolicy { Penalize, Skip };

struct ScoringParams {
  // Nodes with these labels are not brackets; leaves with these labels are
  // also removed from the word positions used for spans.
  std::set<std::string> delete_labels;
  // label -> canonical label, applied after optional functional-tag stripping.
  std::map<std::string, std::string> equivalent_labels;
  bool strip_functional_tags = false;
  UnmatchPolicy unmatch_policy = UnmatchPolicy::Penalize;

  // Mirrors the COLLINS.prm parameter file shipped with EVALB.
  static ScoringParams evalb_default() {
    ScoringParams p;
    p.delete_labels = {"TOP", "-NONE-", ",", ":", "``", "''", "."};
    p.equivalent_labels = {{"ADVP", "PRT"}};
    return p;
  }

  // Every phrasal node counts, labels compared verbatim.
  static ScoringParams plain() { return {}; }

  std::string canonical(const std::string& label) const {
    std::string l = strip_functional_tags ? strip_functional_tag(label) : label;
    auto it = equivalent_labels.find(l);
    return it == equivalent_labels.end() ? l : it->second;
  }
};

struct Bracket {
  std::string label;
  Span span;

  friend auto operator<=>(const Bracket&, const Bracket&) = default;
};

// Brackets of the phrasal nodes after deletion, in pre-order.
inline std::vector<Bracket> brackets(const Tree& tree, const ScoringParams& params) {
  // Position of each kept word after deletions.
  std::vector<std::size_t> kept_before;  // kept words strictly before word i
  std::size_t kept = 0;
  std::vector<std::string> tags = tree.pos_tags();
  kept_before.reserve(tags.size() + 1);
  for (const auto& tag : tags) {
    kept_before.push_back(kept);
    if (!params.delete_labels.count(tag)) ++kept;
  }
  kept_before.push_back(kept);

  std::vector<Bracket> out;
  for_each_node(tree, [&](const Tree& t, const NodePath&) {
    if (t.is_leaf() || params.delete_labels.count(t.label())) return;
    Span s{kept_before[t.span().start], kept_before[t.span().end]};
    if (s.width() == 0) return;
    out.push_back({params.canonical(t.label()), s});
  });
  return out;
}

struct ScoreReport {
  std::size_t matched = 0;
  std::size_t gold_brackets = 0;
  std::size_t pred_brackets = 0;
  double recall = 0.0;
  double precision = 0.0;
  double f1 = 0.0;
  std::size_t unmatch_count = 0;
  std::size_t sentences = 0;

  void finalize() {
    recall = gold_brackets ? static_cast<double>(matched) / static_cast<double>(gold_brackets) : 0.0;
    precision =
        pred_brackets ? static_cast<double>(matched) / static_cast<double>(pred_brackets) : 0.0;
    f1 = (precision + recall) > 0.0 ? 2.0 * precision * recall / (precision + recall) : 0.0;
  }
};

// Size of the multiset intersection of two bracket lists.
inline std::size_t matched_brackets(std::vector<Bracket> a, std::vector<Bracket> b) {
  std::map<Bracket, std::size_t> counts;
  for (auto& x : a) ++counts[x];
  std::size_t m = 0;
  for (auto& x : b) {
    auto it = counts.find(x);
    if (it != counts.end() && it->second > 0) {
      --it->second;
      ++m;
    }
  }
  return m;
}

// Score for a sentence whose prediction is missing or misaligned.
inline ScoreReport score_unmatched(const Tree& gold, const ScoringParams& params) {
  ScoreReport r;
  r.sentences = 1;
  r.unmatch_count = 1;
  if (params.unmatch_policy == UnmatchPolicy::Penalize) {
    r.gold_brackets = brackets(gold, params).size();
  }
  r.finalize();
  return r;
}

inline ScoreReport score_pair(const Tree& pred, const Tree& gold,
                              const ScoringParams& params = ScoringParams::evalb_default()) {
  if (!detect_unmatch(gold.words(), pred).is_none()) return score_unmatched(gold, params);
  auto pb = brackets(pred, params);
  auto gb = brackets(gold, params);
  ScoreReport r;
  r.sentences = 1;
  r.pred_brackets = pb.size();
  r.gold_brackets = gb.size();
  r.matched = matched_brackets(std::move(pb), std::move(gb));
  r.finalize();
  return r;
}

// Micro-average: counts are summed before P/R/F are computed.
inline ScoreReport aggregate(const std::vector<ScoreReport>& reports) {
  ScoreReport total;
  for (const auto& r : reports) {
    total.matched += r.matched;
    total.gold_brackets += r.gold_brackets;
    total.pred_brackets += r.pred_brackets;
    total.unmatch_count += r.unmatch_count;
    total.sentences += r.sentences;
  }
  total.finalize();
  return total;
}

}  // namespace ruleguide
