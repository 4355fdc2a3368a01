#pragma once

// Shared test helpers: fixture paths, random trees, and oracles written
// independently of the library code they check.

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <functional>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "ruleguide/tree.hpp"

namespace testing_support {

inline std::string fixture(const std::string& rel) { return std::string(RULEGUIDE_FIXTURES) + "/" + rel; }

inline std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

inline std::vector<std::string> read_lines(const std::string& path) {
  std::ifstream in(path);
  std::vector<std::string> out;
  for (std::string l; std::getline(in, l);) {
    if (!l.empty()) out.push_back(l);
  }
  return out;
}

// ------------------------------------------------------------ random trees

inline const std::vector<std::string>& phrase_labels() {
  static const std::vector<std::string> v{"S", "NP", "VP", "PP", "ADJP", "ADVP", "PRT", "SBAR", "QP"};
  return v;
}

inline const std::vector<std::string>& pos_labels() {
  static const std::vector<std::string> v{"DT", "NN", "VBD", "IN", "JJ", "RB", ",", ".", "-NONE-", "``"};
  return v;
}

class TreeGen {
 public:
  explicit TreeGen(std::uint64_t seed) : rng_(seed) {}

  std::size_t uniform(std::size_t lo, std::size_t hi) {  // inclusive
    return lo + static_cast<std::size_t>(rng_() % (hi - lo + 1));
  }

  std::vector<std::string> words(std::size_t n) {
    std::vector<std::string> w;
    for (std::size_t i = 0; i < n; ++i) w.push_back("w" + std::to_string(uniform(0, 30)));
    return w;
  }

  // A random phrasal tree whose yield is exactly `words`.
  ruleguide::Tree tree_over(const std::vector<std::string>& words) {
    std::vector<std::string> tags;
    for (std::size_t i = 0; i < words.size(); ++i) tags.push_back(pick(pos_labels()));
    return build(words, tags, 0, words.size(), 0);
  }

  ruleguide::Tree random_tree(std::size_t max_words = 12) { return tree_over(words(uniform(1, max_words))); }

  const std::string& pick(const std::vector<std::string>& v) { return v[uniform(0, v.size() - 1)]; }

  std::mt19937_64& rng() { return rng_; }

 private:
  // Cuts [a, b) into 2..4 pieces (one piece for a single word); single words
  // become leaves, or now and then a unary phrase over the leaf.
  ruleguide::Tree build(const std::vector<std::string>& w, const std::vector<std::string>& tags, std::size_t a,
                        std::size_t b, int depth) {
    std::size_t n = b - a;
    std::size_t pieces = n == 1 ? 1 : uniform(2, std::min<std::size_t>(4, n));
    std::vector<std::size_t> cuts{a, b};
    while (cuts.size() < pieces + 1) {
      std::size_t c = uniform(a + 1, b - 1);
      if (std::find(cuts.begin(), cuts.end(), c) == cuts.end()) cuts.push_back(c);
    }
    std::sort(cuts.begin(), cuts.end());
    std::vector<ruleguide::Tree> kids;
    for (std::size_t k = 0; k + 1 < cuts.size(); ++k) {
      std::size_t s = cuts[k], e = cuts[k + 1];
      if (e - s > 1) kids.push_back(build(w, tags, s, e, depth + 1));
      else if (depth < 6 && uniform(0, 4) == 0 && n > 1) kids.push_back(build(w, tags, s, e, depth + 1));
      else kids.push_back(ruleguide::Tree::leaf(tags[s], w[s]));
    }
    return ruleguide::Tree::node(pick(phrase_labels()), std::move(kids));
  }

  std::mt19937_64 rng_;
};

// ------------------------------------------------------------ oracles

// Longest common subsequence by exhaustive recursion with memoization on
// (i, j); a deliberately different formulation from the library's DP.
inline std::size_t lcs_oracle(const std::vector<std::string>& a, const std::vector<std::string>& b) {
  std::map<std::pair<std::size_t, std::size_t>, std::size_t> memo;
  std::function<std::size_t(std::size_t, std::size_t)> go = [&](std::size_t i, std::size_t j) -> std::size_t {
    if (i == a.size() || j == b.size()) return 0;
    auto key = std::make_pair(i, j);
    if (auto it = memo.find(key); it != memo.end()) return it->second;
    std::size_t best = a[i] == b[j] ? 1 + go(i + 1, j + 1) : std::max(go(i + 1, j), go(i, j + 1));
    return memo[key] = best;
  };
  return go(0, 0);
}

// Bracket counting straight from the serialized text: a second reading of the
// EVALB rules that never touches Tree spans.
struct OracleCounts {
  std::size_t matched = 0, gold = 0, pred = 0;
};

inline std::vector<std::string> oracle_brackets(const std::string& text, const std::vector<std::string>& deleted,
                                                const std::map<std::string, std::string>& equiv) {
  std::vector<std::string> toks;
  std::string cur;
  for (char c : text) {
    if (c == '(' || c == ')' || c == ' ') {
      if (!cur.empty()) toks.push_back(cur), cur.clear();
      if (c != ' ') toks.emplace_back(1, c);
    } else {
      cur += c;
    }
  }
  auto is_deleted = [&](const std::string& l) { return std::find(deleted.begin(), deleted.end(), l) != deleted.end(); };
  std::vector<std::string> out;
  struct Open {
    std::string label;
    std::size_t start;
  };
  std::vector<Open> stack;
  std::size_t kept = 0;
  for (std::size_t i = 0; i < toks.size(); ++i) {
    if (toks[i] == "(") {
      std::string label = toks[++i];
      if (toks[i + 1] != "(" && toks[i + 1] != ")") {  // preterminal: (TAG word)
        if (!is_deleted(label)) ++kept;
        i += 2;
        continue;
      }
      stack.push_back({label, kept});
    } else if (toks[i] == ")") {
      Open o = stack.back();
      stack.pop_back();
      if (is_deleted(o.label) || kept == o.start) continue;
      auto it = equiv.find(o.label);
      out.push_back((it == equiv.end() ? o.label : it->second) + "@" + std::to_string(o.start) + ":" +
                    std::to_string(kept));
    }
  }
  return out;
}

inline OracleCounts oracle_score(const std::string& pred, const std::string& gold) {
  const std::vector<std::string> deleted{"TOP", "-NONE-", ",", ":", "``", "''", "."};
  const std::map<std::string, std::string> equiv{{"ADVP", "PRT"}};
  auto p = oracle_brackets(pred, deleted, equiv);
  auto g = oracle_brackets(gold, deleted, equiv);
  OracleCounts c{0, g.size(), p.size()};
  for (const auto& b : p) {
    auto it = std::find(g.begin(), g.end(), b);
    if (it != g.end()) {
      ++c.matched;
      g.erase(it);
    }
  }
  return c;
}

}  // namespace testing_support
