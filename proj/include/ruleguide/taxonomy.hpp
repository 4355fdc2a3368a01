#pragma once

// Four-way parse error taxonomy over two-level subtrees (a parent and its
// children). A predicted phrasal node is
//   Span      when no gold phrasal node covers the same words,
//   Flatness  when it has more children than the gold node on that span,
//   Deepness  when it has fewer,
//   Label     when the counts agree but a parent or child label differs,
//   Correct   otherwise.
// When several gold nodes share the span (a unary chain) an exact match is
// the counterpart; failing that, the one with the most children, and the
// topmost among those.

#include <array>
#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "ruleguide/error.hpp"
#include "ruleguide/rules.hpp"
#include "ruleguide/tree.hpp"

namespace ruleguide {

enum class ErrorType { Span, Label, Flatness, Deepness, Correct };

inline constexpr std::array<ErrorType, 5> kAllErrorTypes = {
    ErrorType::Span, ErrorType::Label, ErrorType::Flatness, ErrorType::Deepness, ErrorType::Correct};

inline std::string_view error_type_name(ErrorType t) {
  switch (t) {
    case ErrorType::Span: return "Span";
    case ErrorType::Label: return "Label";
    case ErrorType::Flatness: return "Flatness";
    case ErrorType::Deepness: return "Deepness";
    case ErrorType::Correct: return "Correct";
  }
  return "?";
}

struct GoldCounterpart {
  Span span;
  std::string parent;
  std::vector<std::string> children;
};

struct ErrorRecord {
  std::size_t entry_index = 0;
  NodePath node_path;
  ErrorType error = ErrorType::Correct;
  Rule pred_rule;
  std::optional<GoldCounterpart> gold_counterpart;  // absent iff error == Span
};

// Gold phrasal nodes keyed by span. Several gold nodes share a span only in
// unary chains; the counterpart of a predicted node is the one with identical
// label and child labels if there is one, else the widest-branching one,
// else the topmost.
class GoldSpans {
 public:
  explicit GoldSpans(const Tree& gold) : gold_(&gold) {
    for_each_node(gold, [&](const Tree& t, const NodePath&) {
      if (!t.is_leaf()) by_span_[t.span()].push_back(&t);  // pre-order: topmost first
    });
  }

  const Tree* at(Span s) const {
    auto it = by_span_.find(s);
    if (it == by_span_.end()) return nullptr;
    const Tree* best = nullptr;
    for (const Tree* t : it->second) {
      if (!best || t->children().size() > best->children().size()) best = t;
    }
    return best;
  }

  const Tree* counterpart(const Tree& pred_node) const {
    auto it = by_span_.find(pred_node.span());
    if (it == by_span_.end()) return nullptr;
    for (const Tree* t : it->second) {
      if (t->label() == pred_node.label() && t->child_labels() == pred_node.child_labels()) return t;
    }
    return at(pred_node.span());
  }

  const Tree& tree() const { return *gold_; }

 private:
  const Tree* gold_;
  std::map<Span, std::vector<const Tree*>> by_span_;
};

namespace detail {

inline ErrorType classify_against(const Tree& pred_node, const Tree* g) {
  if (g == nullptr) return ErrorType::Span;
  std::size_t np = pred_node.children().size();
  std::size_t ng = g->children().size();
  if (np > ng) return ErrorType::Flatness;
  if (np < ng) return ErrorType::Deepness;
  if (pred_node.label() != g->label() || pred_node.child_labels() != g->child_labels()) {
    return ErrorType::Label;
  }
  return ErrorType::Correct;
}

inline void require_same_words(const std::vector<std::string>& pred,
                               const std::vector<std::string>& gold) {
  if (pred != gold) {
    throw Error(Errc::LeafMismatch,
                "predicted and gold leaves differ; run unmatch correction first");
  }
}

}  // namespace detail

// `pred_node` must carry spans relative to its sentence, i.e. be a node of a
// full predicted tree.
inline ErrorType classify_subtree(const Tree& pred_node, const GoldSpans& gold) {
  if (pred_node.is_leaf()) throw Error(Errc::Precondition, "cannot classify a leaf node");
  Span s = pred_node.span();
  auto gold_words = gold.tree().words();
  if (s.end > gold_words.size()) throw Error(Errc::LeafMismatch, "predicted span exceeds sentence");
  detail::require_same_words(
      pred_node.words(),
      std::vector<std::string>(gold_words.begin() + static_cast<std::ptrdiff_t>(s.start),
                               gold_words.begin() + static_cast<std::ptrdiff_t>(s.end)));
  return detail::classify_against(pred_node, gold.counterpart(pred_node));
}

inline ErrorType classify_subtree(const Tree& pred_node, const Tree& gold) {
  return classify_subtree(pred_node, GoldSpans(gold));
}

inline std::vector<ErrorRecord> error_report(const Tree& pred, const Tree& gold,
                                             std::size_t entry_index = 0) {
  detail::require_same_words(pred.words(), gold.words());
  GoldSpans spans(gold);
  std::vector<ErrorRecord> out;
  for_each_node(pred, [&](const Tree& t, const NodePath& path) {
    if (t.is_leaf()) return;
    ErrorRecord rec;
    rec.entry_index = entry_index;
    rec.node_path = path;
    rec.pred_rule = rule_of(t);
    const Tree* g = spans.counterpart(t);
    rec.error = detail::classify_against(t, g);
    if (g) rec.gold_counterpart = GoldCounterpart{g->span(), g->label(), g->child_labels()};
    out.push_back(std::move(rec));
  });
  return out;
}

struct ErrorDistribution {
  std::size_t span = 0;
  std::size_t label = 0;
  std::size_t flatness = 0;
  std::size_t deepness = 0;
  std::size_t total = 0;    // errors only
  std::size_t correct = 0;  // reported beside the total, never inside it

  std::size_t count(ErrorType t) const {
    switch (t) {
      case ErrorType::Span: return span;
      case ErrorType::Label: return label;
      case ErrorType::Flatness: return flatness;
      case ErrorType::Deepness: return deepness;
      case ErrorType::Correct: return correct;
    }
    return 0;
  }

  std::size_t classified() const { return total + correct; }
};

inline ErrorDistribution distribution(const std::vector<ErrorRecord>& records) {
  ErrorDistribution d;
  for (const auto& r : records) {
    switch (r.error) {
      case ErrorType::Span: ++d.span; break;
      case ErrorType::Label: ++d.label; break;
      case ErrorType::Flatness: ++d.flatness; break;
      case ErrorType::Deepness: ++d.deepness; break;
      case ErrorType::Correct: ++d.correct; break;
    }
  }
  d.total = d.span + d.label + d.flatness + d.deepness;
  return d;
}

}  // namespace ruleguide
