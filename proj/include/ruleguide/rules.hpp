#pragma once

// One-level grammar rules (parent -> child labels), the treebank rule index
// and the known/unknown rule statistics.

#include <cstddef>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "ruleguide/corpus.hpp"
#include "ruleguide/error.hpp"
#include "ruleguide/tree.hpp"

namespace ruleguide {

struct Rule {
  std::string parent;
  std::vector<std::string> children;

  // "NP -> DT VBN ADJP"
  std::string text() const { return parent + " -> " + join(children); }

  friend bool operator==(const Rule&, const Rule&) = default;
};

// Rule of a phrasal node. Leaf nodes (tag + word) have no rule.
inline Rule rule_of(const Tree& node) {
  if (node.is_leaf()) throw Error(Errc::Precondition, "a leaf node has no rule");
  return {node.label(), node.child_labels()};
}

struct RuleOccurrence {
  Rule rule;
  std::size_t corpus_entry = 0;
  NodePath node_path;
  Span span;
  // Child label sequence of each child; empty for leaf children.
  std::vector<std::vector<std::string>> child_expansions;
  std::vector<std::string> pos_yield;
};

inline std::vector<RuleOccurrence> extract_rules(const Tree& tree, std::size_t corpus_entry = 0) {
  std::vector<RuleOccurrence> out;
  for_each_node(tree, [&](const Tree& t, const NodePath& path) {
    if (t.is_leaf()) return;
    RuleOccurrence occ;
    occ.rule = rule_of(t);
    occ.corpus_entry = corpus_entry;
    occ.node_path = path;
    occ.span = t.span();
    occ.child_expansions.reserve(t.children().size());
    for (const auto& c : t.children()) occ.child_expansions.push_back(c.child_labels());
    occ.pos_yield = t.pos_tags();
    out.push_back(std::move(occ));
  });
  return out;
}

struct RuleEntry {
  Rule rule;
  std::vector<RuleOccurrence> occurrences;

  std::size_t frequency() const { return occurrences.size(); }
};

class RuleIndex {
 public:
  void add(RuleOccurrence occ) {
    std::string key = occ.rule.text();
    auto [it, inserted] = table_.try_emplace(key);
    if (inserted) {
      it->second.rule = occ.rule;
      by_parent_[occ.rule.parent].insert(key);
    }
    it->second.occurrences.push_back(std::move(occ));
    ++total_;
  }

  std::size_t frequency(const Rule& rule) const {
    auto it = table_.find(rule.text());
    return it == table_.end() ? 0 : it->second.frequency();
  }

  const RuleEntry* find(const Rule& rule) const {
    auto it = table_.find(rule.text());
    return it == table_.end() ? nullptr : &it->second;
  }

  // Entries sharing a parent label, in rule-text order.
  std::vector<const RuleEntry*> with_parent(const std::string& parent) const {
    std::vector<const RuleEntry*> out;
    auto it = by_parent_.find(parent);
    if (it == by_parent_.end()) return out;
    for (const auto& k : it->second) out.push_back(&table_.at(k));
    return out;
  }

  // Keyed by rule text, so iteration is lexicographic.
  const std::map<std::string, RuleEntry>& table() const { return table_; }
  std::size_t distinct() const { return table_.size(); }
  std::size_t total_occurrences() const { return total_; }

 private:
  std::map<std::string, RuleEntry> table_;
  std::map<std::string, std::set<std::string>> by_parent_;
  std::size_t total_ = 0;
};

inline RuleIndex build_index(const Corpus& corpus) {
  if (corpus.empty()) throw Error(Errc::NoTrees, "cannot index an empty corpus");
  RuleIndex index;
  for (std::size_t i = 0; i < corpus.entries.size(); ++i) {
    for (auto& occ : extract_rules(corpus.entries[i].tree, i)) index.add(std::move(occ));
  }
  return index;
}

inline bool is_known(const RuleIndex& index, const Rule& rule) { return index.frequency(rule) > 0; }

struct RuleStats {
  std::size_t total_parsed = 0;
  std::size_t total_known = 0;
  std::size_t known_correct = 0;
  std::size_t unknown_correct = 0;
  double known_accuracy = 0.0;
  double unknown_accuracy = 0.0;
  // Entries left out because the prediction is missing or its leaves
  // disagree with the gold sentence.
  std::vector<std::size_t> skipped_entries;
};

namespace detail {

// Span, parent label and the (label, span) of every child.
inline std::string node_signature(const Tree& t) {
  std::string s = std::to_string(t.span().start) + ":" + std::to_string(t.span().end) + " " +
                  t.label() + " ->";
  for (const auto& c : t.children()) {
    s += " " + c.label() + "@" + std::to_string(c.span().start) + ":" +
         std::to_string(c.span().end);
  }
  return s;
}

inline std::set<std::string> phrasal_signatures(const Tree& tree) {
  std::set<std::string> out;
  for_each_node(tree, [&](const Tree& t, const NodePath&) {
    if (!t.is_leaf()) out.insert(node_signature(t));
  });
  return out;
}

inline double ratio(std::size_t num, std::size_t den) {
  return den == 0 ? 0.0 : static_cast<double>(num) / static_cast<double>(den);
}

}  // namespace detail

// A predicted rule occurrence is correct when the gold tree of the same
// sentence has a node with the same span, parent label and child
// (label, span) sequence.
inline RuleStats known_rule_stats(const std::vector<std::optional<Tree>>& pred, const Corpus& gold,
                                  const RuleIndex& index) {
  if (pred.size() != gold.size()) {
    throw Error(Errc::LengthMismatch, "prediction has " + std::to_string(pred.size()) +
                                          " entries, gold has " + std::to_string(gold.size()));
  }
  RuleStats st;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const auto& g = gold.entries[i].tree;
    if (!pred[i] || pred[i]->words() != g.words()) {
      st.skipped_entries.push_back(i);
      continue;
    }
    auto gold_sigs = detail::phrasal_signatures(g);
    for_each_node(*pred[i], [&](const Tree& t, const NodePath&) {
      if (t.is_leaf()) return;
      bool known = is_known(index, rule_of(t));
      bool correct = gold_sigs.count(detail::node_signature(t)) > 0;
      ++st.total_parsed;
      if (known) {
        ++st.total_known;
        if (correct) ++st.known_correct;
      } else if (correct) {
        ++st.unknown_correct;
      }
    });
  }
  st.known_accuracy = detail::ratio(st.known_correct, st.total_known);
  st.unknown_accuracy = detail::ratio(st.unknown_correct, st.total_parsed - st.total_known);
  return st;
}

inline RuleStats known_rule_stats(const Corpus& pred, const Corpus& gold, const RuleIndex& index) {
  std::vector<std::optional<Tree>> trees;
  trees.reserve(pred.size());
  for (const auto& e : pred.entries) trees.emplace_back(e.tree);
  return known_rule_stats(trees, gold, index);
}

}  // namespace ruleguide
