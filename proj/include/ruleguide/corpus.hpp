#pragma once

#include <cstddef>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "ruleguide/error.hpp"
#include "ruleguide/tree.hpp"

namespace ruleguide {

enum class CorpusFormat { OneTreePerLine, MultiLineBlocks };

struct CorpusEntry {
  std::vector<std::string> sentence;
  Tree tree;
};

struct LoadError {
  std::size_t line = 0;  // 1-based line where the entry starts
  std::string message;
};

struct Corpus {
  std::vector<CorpusEntry> entries;
  std::string source;
  std::vector<LoadError> errors;

  std::size_t size() const { return entries.size(); }
  bool empty() const { return entries.empty(); }
};

// One raw tree record; `line` is where it starts in the source file.
struct RawRecord {
  std::size_t line = 0;
  std::string text;
};

namespace detail {

inline bool blank(const std::string& s) {
  for (char c : s) {
    if (!is_space(c)) return false;
  }
  return true;
}

inline std::vector<RawRecord> split_records(std::istream& in, CorpusFormat format) {
  std::vector<RawRecord> out;
  std::string line;
  std::size_t lineno = 0;
  if (format == CorpusFormat::OneTreePerLine) {
    while (std::getline(in, line)) {
      ++lineno;
      if (!blank(line)) out.push_back({lineno, line});
    }
    return out;
  }
  // Blocks end at a blank line or when the bracket depth returns to zero.
  RawRecord cur;
  long depth = 0;
  auto flush = [&] {
    if (!blank(cur.text)) out.push_back(cur);
    cur = {};
    depth = 0;
  };
  while (std::getline(in, line)) {
    ++lineno;
    if (blank(line)) {
      flush();
      continue;
    }
    if (blank(cur.text)) cur.line = lineno;
    if (!cur.text.empty()) cur.text += ' ';
    cur.text += line;
    for (char c : line) {
      if (c == '(') ++depth;
      else if (c == ')') --depth;
    }
    if (depth <= 0) flush();
  }
  flush();
  return out;
}

}  // namespace detail

inline Corpus parse_corpus(std::istream& in, CorpusFormat format, std::string source = {}) {
  Corpus corpus;
  corpus.source = std::move(source);
  for (auto& rec : detail::split_records(in, format)) {
    try {
      Tree t = parse_bracketed(rec.text);
      auto words = t.words();
      corpus.entries.push_back({std::move(words), std::move(t)});
    } catch (const Error& e) {
      corpus.errors.push_back({rec.line, e.what()});
    }
  }
  if (corpus.entries.empty()) {
    throw Error(Errc::NoTrees, "no parseable trees in '" + corpus.source + "'");
  }
  return corpus;
}

inline Corpus load_corpus(const std::string& path,
                          CorpusFormat format = CorpusFormat::OneTreePerLine) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::Io, "cannot open '" + path + "'");
  return parse_corpus(in, format, path);
}

// A line of model output kept in position, whether or not it parsed.
struct PredictionLine {
  std::optional<Tree> tree;
  std::string raw;
  std::string error;
};

// Reads one prediction per line without dropping failures, so entry i stays
// aligned with sentence i. Blank lines are kept as failed predictions.
inline std::vector<PredictionLine> load_predictions(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::Io, "cannot open '" + path + "'");
  std::vector<PredictionLine> out;
  std::string line;
  while (std::getline(in, line)) {
    PredictionLine p;
    p.raw = line;
    try {
      p.tree = parse_bracketed(line);
    } catch (const Error& e) {
      p.error = e.what();
    }
    out.push_back(std::move(p));
  }
  return out;
}

inline std::vector<std::vector<std::string>> load_sentences(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::Io, "cannot open '" + path + "'");
  std::vector<std::vector<std::string>> out;
  std::string line;
  while (std::getline(in, line)) {
    if (detail::blank(line)) continue;
    out.push_back(split_words(line));
  }
  return out;
}

}  // namespace ruleguide
