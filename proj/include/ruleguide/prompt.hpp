#pragma once

#include <cstdint>
#include <cstdio>
#include <string>
#include <string_view>
#include <vector>

namespace ruleguide {

inline constexpr std::string_view kParsingInstruction =
    "You will be given one sentence for constituency parsing. Every word that is separated by a "
    "space should be considered an independent word and have its own constituency label. Please "
    "parse the sentence with given words.";

struct ExampleBlock {
  std::string sentence;
  std::string tree;
  // Rule and subtree the example was chosen for; empty for plain shots.
  std::string rule;
  std::string focus;
};

struct PromptSpec {
  std::string instruction{kParsingInstruction};
  std::vector<ExampleBlock> examples;
  std::string prior_answer;
  std::string hint;
  std::string sentence;
};

// Text sent to the model. Layout:
//   instruction / "Here are some examples:" / one "<sentence> <tree>" line per
//   example / previous answer and hint when present / "Input: ..." / "Output:"
inline std::string render(const PromptSpec& p) {
  std::string out = p.instruction;
  out += '\n';
  if (!p.examples.empty()) {
    out += "Here are some examples:\n";
    for (const auto& ex : p.examples) {
      out += ex.sentence;
      out += ' ';
      out += ex.tree;
      out += '\n';
      if (!ex.focus.empty()) {
        out += "Relevant structure: " + ex.rule + " in " + ex.focus + '\n';
      }
    }
  }
  if (!p.prior_answer.empty()) out += "Previous answer: " + p.prior_answer + '\n';
  if (!p.hint.empty()) out += "Hint: " + p.hint + '\n';
  out += "Input: " + p.sentence + '\n';
  out += "Output:";
  return out;
}

// 64-bit FNV-1a, printed as 16 hex digits. Used as the replay key.
inline std::string stable_hash(std::string_view text) {
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char c : text) {
    h ^= c;
    h *= 1099511628211ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace ruleguide
