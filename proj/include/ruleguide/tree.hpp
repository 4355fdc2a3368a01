#pragma once

// Bracketed constituency trees: parsing, serialization, bracket repair and
// traversal. A leaf node carries a part-of-speech label and one word, so
// "(NN cat)" is a single node. Heights count the word as level 0, which makes
// a leaf node height 1 and the lowest phrasal node height 2.

#include <algorithm>
#include <compare>
#include <cstddef>
#include <functional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "ruleguide/error.hpp"

namespace ruleguide {

// Half-open word interval [start, end).
struct Span {
  std::size_t start = 0;
  std::size_t end = 0;

  std::size_t width() const { return end - start; }
  friend auto operator<=>(const Span&, const Span&) = default;
};

// Child-index path from the root; the root is the empty path.
using NodePath = std::vector<std::size_t>;

class Tree {
 public:
  static Tree leaf(std::string label, std::string word) {
    Tree t;
    t.label_ = std::move(label);
    t.word_ = std::move(word);
    t.span_ = {0, 1};
    return t;
  }

  static Tree node(std::string label, std::vector<Tree> children) {
    if (children.empty()) {
      throw Error(Errc::EmptyConstituent, "constituent '" + label + "' has no children");
    }
    Tree t;
    t.label_ = std::move(label);
    t.children_ = std::move(children);
    t.assign_spans(0);
    return t;
  }

  const std::string& label() const { return label_; }
  const std::string& word() const { return word_; }
  const std::vector<Tree>& children() const { return children_; }
  Span span() const { return span_; }
  bool is_leaf() const { return children_.empty(); }

  std::size_t height() const {
    std::size_t h = 0;
    for (const auto& c : children_) h = std::max(h, c.height());
    return h + 1;
  }

  std::vector<std::string> child_labels() const {
    std::vector<std::string> out;
    out.reserve(children_.size());
    for (const auto& c : children_) out.push_back(c.label_);
    return out;
  }

  std::vector<std::string> words() const {
    std::vector<std::string> out;
    collect_leaves(out, /*tags=*/false);
    return out;
  }

  // Preterminal (POS) label sequence over the yield.
  std::vector<std::string> pos_tags() const {
    std::vector<std::string> out;
    collect_leaves(out, /*tags=*/true);
    return out;
  }

  const Tree& at(const NodePath& path) const {
    const Tree* cur = this;
    for (std::size_t i : path) {
      if (i >= cur->children_.size()) {
        throw Error(Errc::Precondition, "node path out of range");
      }
      cur = &cur->children_[i];
    }
    return *cur;
  }

  Tree relabeled(std::string label) const {
    Tree t = *this;
    t.label_ = std::move(label);
    return t;
  }

  friend bool operator==(const Tree&, const Tree&) = default;

 private:
  void assign_spans(std::size_t start) {
    if (children_.empty()) {
      span_ = {start, start + 1};
      return;
    }
    std::size_t pos = start;
    for (auto& c : children_) {
      c.assign_spans(pos);
      pos = c.span_.end;
    }
    span_ = {start, pos};
  }

  void collect_leaves(std::vector<std::string>& out, bool tags) const {
    if (children_.empty()) {
      out.push_back(tags ? label_ : word_);
      return;
    }
    for (const auto& c : children_) c.collect_leaves(out, tags);
  }

  std::string label_;
  std::string word_;
  std::vector<Tree> children_;
  Span span_;
};

// Pre-order walk over every node.
inline void for_each_node(const Tree& tree,
                          const std::function<void(const Tree&, const NodePath&)>& fn) {
  NodePath path;
  std::function<void(const Tree&)> rec = [&](const Tree& t) {
    fn(t, path);
    for (std::size_t i = 0; i < t.children().size(); ++i) {
      path.push_back(i);
      rec(t.children()[i]);
      path.pop_back();
    }
  };
  rec(tree);
}

namespace detail {

enum class TokKind { Open, Close, Atom };

struct Tok {
  TokKind kind;
  std::string text;
};

inline bool is_space(char c) {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
}

inline std::vector<Tok> tokenize(std::string_view text) {
  std::vector<Tok> toks;
  std::size_t i = 0;
  while (i < text.size()) {
    char c = text[i];
    if (is_space(c)) {
      ++i;
    } else if (c == '(') {
      toks.push_back({TokKind::Open, {}});
      ++i;
    } else if (c == ')') {
      toks.push_back({TokKind::Close, {}});
      ++i;
    } else {
      std::size_t j = i;
      while (j < text.size() && !is_space(text[j]) && text[j] != '(' && text[j] != ')') ++j;
      toks.push_back({TokKind::Atom, std::string(text.substr(i, j - i))});
      i = j;
    }
  }
  return toks;
}

class BracketParser {
 public:
  explicit BracketParser(std::vector<Tok> toks) : toks_(std::move(toks)) {}

  Tree parse_root() {
    if (toks_.empty()) throw Error(Errc::MalformedToken, "empty input");
    if (toks_[0].kind != TokKind::Open) {
      throw Error(Errc::MalformedToken, "tree must start with '(' but found " + describe(0));
    }
    Tree root = parse_node(/*is_root=*/true);
    if (pos_ != toks_.size()) {
      throw Error(Errc::MalformedToken, "trailing content after tree: " + describe(pos_));
    }
    return root;
  }

 private:
  std::string describe(std::size_t i) const {
    if (i >= toks_.size()) return "end of input";
    switch (toks_[i].kind) {
      case TokKind::Open: return "'('";
      case TokKind::Close: return "')'";
      case TokKind::Atom: return "'" + toks_[i].text + "'";
    }
    return "?";
  }

  const Tok& peek() const {
    if (pos_ >= toks_.size()) throw Error(Errc::UnbalancedBrackets, "unexpected end of input");
    return toks_[pos_];
  }

  Tree parse_node(bool is_root) {
    ++pos_;  // '('
    std::string label;
    if (peek().kind == TokKind::Atom) {
      label = toks_[pos_++].text;
    } else if (peek().kind == TokKind::Close) {
      throw Error(Errc::EmptyConstituent, "'()' has neither label nor content");
    }
    if (peek().kind == TokKind::Close) {
      throw Error(Errc::EmptyConstituent, "constituent '" + label + "' has no children");
    }
    if (peek().kind == TokKind::Atom) {
      std::string word = toks_[pos_++].text;
      if (peek().kind != TokKind::Close) {
        throw Error(Errc::MalformedToken,
                    "leaf '" + label + "' must hold exactly one word, found " + describe(pos_));
      }
      ++pos_;
      if (label.empty()) throw Error(Errc::MalformedToken, "leaf '" + word + "' has no label");
      return Tree::leaf(std::move(label), std::move(word));
    }
    std::vector<Tree> children;
    while (peek().kind != TokKind::Close) {
      if (peek().kind == TokKind::Atom) {
        throw Error(Errc::MalformedToken,
                    "word " + describe(pos_) + " mixed with constituents under '" + label + "'");
      }
      children.push_back(parse_node(false));
    }
    ++pos_;
    if (label.empty()) {
      // PTB files wrap each tree in an unlabeled bracket: "( (S ...) )".
      if (is_root && children.size() == 1) return std::move(children.front());
      throw Error(Errc::MalformedToken, "constituent without label");
    }
    return Tree::node(std::move(label), std::move(children));
  }

  std::vector<Tok> toks_;
  std::size_t pos_ = 0;
};

inline std::string escape_word(const std::string& w) {
  if (w == "(") return "-LRB-";
  if (w == ")") return "-RRB-";
  std::string out;
  for (char c : w) {
    if (c == '(') out += "-LRB-";
    else if (c == ')') out += "-RRB-";
    else out += c;
  }
  return out;
}

inline void serialize_into(const Tree& t, std::string& out) {
  out += '(';
  out += t.label();
  if (t.is_leaf()) {
    out += ' ';
    out += escape_word(t.word());
  } else {
    for (const auto& c : t.children()) {
      out += ' ';
      serialize_into(c, out);
    }
  }
  out += ')';
}

}  // namespace detail

inline Tree parse_bracketed(std::string_view text) {
  long depth_balance = 0;
  for (char c : text) {
    if (c == '(') ++depth_balance;
    else if (c == ')') --depth_balance;
  }
  if (depth_balance != 0) {
    throw Error(Errc::UnbalancedBrackets, "bracket counts differ by " + std::to_string(depth_balance));
  }
  return detail::BracketParser(detail::tokenize(text)).parse_root();
}

inline std::string serialize(const Tree& tree) {
  std::string out;
  detail::serialize_into(tree, out);
  return out;
}

// Strips closers that would drive the depth negative, then appends the
// missing closers. Input that is already balanced is returned unchanged.
inline std::string repair_brackets(std::string_view text) {
  if (text.find('(') == std::string_view::npos) {
    throw Error(Errc::Unrepairable, "no bracketed tree present");
  }
  std::string out;
  out.reserve(text.size() + 8);
  long depth = 0;
  for (char c : text) {
    if (c == ')') {
      if (depth == 0) continue;
      --depth;
    } else if (c == '(') {
      ++depth;
    }
    out += c;
  }
  while (out.size() > 0 && detail::is_space(out.back()) && depth > 0) out.pop_back();
  out.append(static_cast<std::size_t>(depth), ')');
  try {
    parse_bracketed(out);
  } catch (const Error& e) {
    throw Error(Errc::Unrepairable, e.what());
  }
  return out;
}

// One entry of subtrees_by_height(); `node` points into the tree it came from.
struct SubtreeRef {
  NodePath path;
  const Tree* node = nullptr;
  std::size_t height = 0;
};

// Every phrasal subtree of height >= 2, tallest first, ties left to right.
inline std::vector<SubtreeRef> subtrees_by_height(const Tree& tree) {
  std::vector<SubtreeRef> out;
  for_each_node(tree, [&](const Tree& t, const NodePath& path) {
    if (t.is_leaf()) return;
    std::size_t h = t.height();
    if (h >= 2) out.push_back({path, &t, h});
  });
  std::stable_sort(out.begin(), out.end(), [](const SubtreeRef& a, const SubtreeRef& b) {
    if (a.height != b.height) return a.height > b.height;
    return a.node->span().start < b.node->span().start;
  });
  return out;
}

// Strips PTB functional suffixes: "NP-SBJ-1" -> "NP", "PP=2" -> "PP".
// Labels that begin with '-' (-NONE-, -LRB-) are kept whole.
inline std::string strip_functional_tag(std::string_view label) {
  if (label.empty() || label.front() == '-') return std::string(label);
  std::size_t cut = label.find_first_of("-=");
  return std::string(label.substr(0, cut));
}

inline Tree map_labels(const Tree& tree, const std::function<std::string(const std::string&)>& fn) {
  if (tree.is_leaf()) return Tree::leaf(fn(tree.label()), tree.word());
  std::vector<Tree> kids;
  kids.reserve(tree.children().size());
  for (const auto& c : tree.children()) kids.push_back(map_labels(c, fn));
  return Tree::node(fn(tree.label()), std::move(kids));
}

inline Tree strip_functional_tags(const Tree& tree) {
  return map_labels(tree, [](const std::string& l) { return strip_functional_tag(l); });
}

inline std::string join(const std::vector<std::string>& parts, std::string_view sep = " ") {
  std::string out;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (i) out += sep;
    out += parts[i];
  }
  return out;
}

// Whitespace tokenization; every space-separated token is one word.
inline std::vector<std::string> split_words(std::string_view text) {
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && detail::is_space(text[i])) ++i;
    std::size_t j = i;
    while (j < text.size() && !detail::is_space(text[j])) ++j;
    if (j > i) out.emplace_back(text.substr(i, j - i));
    i = j;
  }
  return out;
}

}  // namespace ruleguide
