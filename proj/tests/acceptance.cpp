// Acceptance suite: prints one PASS/FAIL line per criterion and exits
// non-zero if any fails.

#include <chrono>
#include <cmath>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "ruleguide/correction.hpp"
#include "ruleguide/taxonomy.hpp"
#include "support.hpp"

using namespace ruleguide;
using testing_support::fixture;
using Clock = std::chrono::steady_clock;

namespace {

int failures = 0;

void report(const char* id, const char* name, bool ok, const std::string& detail) {
  std::cout << (ok ? "PASS" : "FAIL") << "  " << id << "  " << name << "  " << detail << '\n';
  if (!ok) ++failures;
}

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(double v, int prec = 3) {
  std::ostringstream os;
  os.precision(prec);
  os << std::fixed << v;
  return os.str();
}

nlohmann::json load_json(const std::string& path) {
  std::ifstream in(path);
  return nlohmann::json::parse(in);
}

Corpus corpus_of(const std::string& text) {
  std::istringstream in(text);
  return parse_corpus(in, CorpusFormat::OneTreePerLine);
}

// ------------------------------------------------------------------ criteria

void scorer_oracle() {
  auto t0 = Clock::now();
  testing_support::TreeGen gen(2024);
  std::size_t mismatches = 0, identical_bad = 0;
  for (int i = 0; i < 500; ++i) {
    auto words = gen.words(gen.uniform(1, 25));
    Tree p = gen.tree_over(words), g = gen.tree_over(words);
    auto r = score_pair(p, g);
    auto o = testing_support::oracle_score(serialize(p), serialize(g));
    if (r.matched != o.matched || r.gold_brackets != o.gold || r.pred_brackets != o.pred) ++mismatches;
    auto same = score_pair(g, g);
    if (same.gold_brackets > 0 && same.f1 != 1.0) ++identical_bad;
  }
  double s = seconds_since(t0);
  report("C1", "scorer-oracle", mismatches == 0 && identical_bad == 0 && s < 10.0,
         "500 pairs, mismatches=" + std::to_string(mismatches) + ", identical!=1.0: " +
             std::to_string(identical_bad) + ", " + fmt(s) + " s (limit 10)");
}

void taxonomy() {
  auto expected = load_json(fixture("taxonomy/expected.json"));
  Corpus pred = load_corpus(fixture("taxonomy/pred.mrg"));
  Corpus gold = load_corpus(fixture("taxonomy/gold.mrg"));
  std::string got;
  bool cases_ok = true;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    auto path = expected["highlighted_paths"][i].get<NodePath>();
    auto t = classify_subtree(pred.entries[i].tree.at(path), gold.entries[i].tree);
    got += std::string(i ? "/" : "") + std::string(error_type_name(t));
    cases_ok &= error_type_name(t) == expected["highlighted"][i].get<std::string>();
  }
  testing_support::TreeGen gen(77);
  std::size_t bad = 0;
  for (int i = 0; i < 500; ++i) {
    auto words = gen.words(gen.uniform(1, 15));
    Tree p = gen.tree_over(words), g = gen.tree_over(words);
    std::size_t internal = 0;
    for_each_node(p, [&](const Tree& t, const NodePath&) { internal += !t.is_leaf(); });
    auto recs = error_report(p, g);
    auto d = distribution(recs);
    std::size_t sum = 0;
    for (auto t : kAllErrorTypes) sum += d.count(t);
    if (recs.size() != internal || sum != internal) ++bad;
  }
  report("C2", "taxonomy-cases-and-totality", cases_ok && bad == 0,
         "highlighted cases " + got + ", random pairs not total: " + std::to_string(bad) + "/500");
}

void lcs_oracle() {
  testing_support::TreeGen gen(31337);
  const std::vector<std::string> alphabet{"NP", "VP", "PP", "DT", "NN", "JJ"};
  std::size_t bad = 0;
  for (int i = 0; i < 1000; ++i) {
    std::vector<std::string> a, b;
    for (std::size_t k = gen.uniform(0, 20); k > 0; --k) a.push_back(gen.pick(alphabet));
    for (std::size_t k = gen.uniform(0, 20); k > 0; --k) b.push_back(gen.pick(alphabet));
    bad += lcs_len(a, b) != testing_support::lcs_oracle(a, b);
  }
  report("C3", "lcs-oracle", bad == 0, "1000 pairs (len <= 20), mismatches=" + std::to_string(bad));
}

void rule_accounting() {
  auto m = load_json(fixture("toy/manifest.json"));
  Corpus tb = load_corpus(fixture("toy/treebank.mrg"));
  RuleIndex idx = build_index(tb);
  std::size_t sum = 0;
  for (const auto& [text, e] : idx.table()) sum += e.frequency();
  auto st = known_rule_stats(load_corpus(fixture("toy/perturbed.mrg")), tb, idx);
  const auto& w = m["perturbed_stats"];
  bool ok = sum == m["rule_occurrences"].get<std::size_t>() && idx.distinct() == m["distinct_rules"].get<std::size_t>() &&
            st.total_parsed == w["total_parsed"].get<std::size_t>() &&
            st.total_known == w["total_known"].get<std::size_t>() &&
            st.known_correct == w["known_correct"].get<std::size_t>() &&
            st.unknown_correct == w["unknown_correct"].get<std::size_t>() &&
            st.skipped_entries == w["skipped_entries"].get<std::vector<std::size_t>>();
  report("C4", "rule-accounting", ok,
         "occurrences " + std::to_string(sum) + "/" + m["rule_occurrences"].dump() + ", distinct " +
             std::to_string(idx.distinct()) + ", perturbed parsed/known/known-correct/unknown-correct " +
             std::to_string(st.total_parsed) + "/" + std::to_string(st.total_known) + "/" +
             std::to_string(st.known_correct) + "/" + std::to_string(st.unknown_correct));
}

std::vector<std::string> view_sequence(const std::string& treebank, const std::string& pred_text,
                                       const std::string& rule, View v, bool predicted_side) {
  RuleIndex idx = build_index(corpus_of(treebank));
  Tree pred = parse_bracketed(pred_text);
  for (const auto& c : generate_candidates(rule_of(pred), pred, idx)) {
    if (c.rule.text() == rule && c.transform == v) return predicted_side ? c.predicted_sequence : c.comparable_sequence;
  }
  return {};
}

void transform_fidelity() {
  auto flat = view_sequence("(NP (NP (JJ senior) (NN vice) (NN president)) (PP at_Crop))\n",
                            "(NP (JJ senior) (NN vice) (NN president) (PP at_Crop))", "NP -> NP PP", View::Flatness,
                            false);
  auto deep = view_sequence("(S (CC But) (NP (NNS students)) (VP (VBP laugh)))\n",
                            "(S (CC But) (S (NP (NNS students)) (VP (VBP laugh))))", "S -> CC NP VP", View::Deepness,
                            true);
  bool ok = flat == std::vector<std::string>{"JJ", "NN", "NN", "PP"} &&
            deep == std::vector<std::string>{"CC", "NP", "VP"};
  report("C5", "transform-fidelity", ok, "flatness [" + join(flat) + "], deepness [" + join(deep) + "]");
}

void ranking_contract() {
  testing_support::TreeGen gen(5150);
  std::size_t violations = 0;
  for (int round = 0; round < 1000; ++round) {
    std::vector<Candidate> cs;
    for (std::size_t n = gen.uniform(1, 25); n > 0; --n) {
      Candidate c;
      c.rule = Rule{"NP", {"R" + std::to_string(gen.uniform(0, 12))}};
      c.transform = static_cast<View>(gen.uniform(0, 2));
      c.lcs = gen.uniform(0, 5);
      c.frequency = gen.uniform(1, 5);
      cs.push_back(c);
    }
    CorrectionConfig cfg;
    cfg.top_k_rules = gen.uniform(1, 8);
    auto ranked = rank_candidates(cs, cfg);
    for (std::size_t i = 1; i < ranked.size(); ++i) {
      const auto &a = ranked[i - 1], &b = ranked[i];
      if (!(a.lcs > b.lcs || (a.lcs == b.lcs && a.frequency >= b.frequency))) ++violations;
    }
  }
  Corpus tb = corpus_of("(NP (DT a) (JJ b))\n(NP (DT a) (NN b))\n(NP (DT c) (NN d))\n");
  RuleIndex idx = build_index(tb);
  Tree pred = parse_bracketed("(NP (DT x) (VB y))");
  auto ranked = rank_candidates(generate_candidates(rule_of(pred), pred, idx), {});
  bool tie_ok = ranked.size() == 2 && ranked[0].lcs == ranked[1].lcs && ranked[0].rule.text() == "NP -> DT NN";
  report("C6", "ranking-contract", violations == 0 && tie_ok,
         "order violations " + std::to_string(violations) + "/1000 sets, tie-break winner " +
             (ranked.empty() ? std::string("none") : ranked[0].rule.text()));
}

struct EndToEnd {
  double base_f1 = 0, corrected_f1 = 0;
  std::string digest;
  std::size_t unmatched = 0;
};

EndToEnd run_fixture() {
  Corpus tb = load_corpus(fixture("toy/treebank.mrg"));
  RuleIndex idx = build_index(tb);
  auto sentences = load_sentences(fixture("correction/sentences.txt"));
  Corpus gold = load_corpus(fixture("correction/gold.mrg"));
  auto replay = ScriptedBackend::from_file(fixture("correction/replay.jsonl"));
  std::vector<ScoreReport> before, after;
  EndToEnd out;
  auto base_lines = load_predictions(fixture("correction/base.txt"));
  for (std::size_t i = 0; i < sentences.size(); ++i) {
    Tree base = parse_bracketed(repair_brackets(base_lines[i].raw));
    before.push_back(score_pair(base, gold.entries[i].tree));
    auto res = correct_tree(sentences[i], base, idx, tb, replay, CorrectionConfig{}, i);
    after.push_back(score_pair(res.final_tree, gold.entries[i].tree));
    out.unmatched += !detect_unmatch(sentences[i], res.final_tree).is_none();
    out.digest += serialize(res.final_tree) + '\n';
    for (const auto& r : res.trace) out.digest += r.prompt_hash + r.decision + '\n';
    if (res.failure) out.digest += "failure " + *res.failure + '\n';
  }
  out.base_f1 = aggregate(before).f1;
  out.corrected_f1 = aggregate(after).f1;
  return out;
}

EndToEnd first_run;

void end_to_end() {
  auto m = load_json(fixture("correction/manifest.json"));
  auto t0 = Clock::now();
  first_run = run_fixture();
  EndToEnd second = run_fixture();
  double s = seconds_since(t0);
  double want_base = m["base"]["f1"].get<double>(), want_corr = m["corrected"]["f1"].get<double>();
  bool ok = std::abs(first_run.base_f1 - want_base) < 1e-9 && std::abs(first_run.corrected_f1 - want_corr) < 1e-9 &&
            first_run.corrected_f1 > first_run.base_f1 && first_run.digest == second.digest && s < 5.0;
  report("C7", "end-to-end-improvement", ok,
         "F1 " + fmt(100 * first_run.base_f1, 2) + " -> " + fmt(100 * first_run.corrected_f1, 2) + " (recorded " +
             fmt(100 * want_base, 2) + " -> " + fmt(100 * want_corr, 2) + "), runs identical: " +
             (first_run.digest == second.digest ? "yes" : "no") + ", 2 runs in " + fmt(s) + " s (limit 5)");
}

void leaf_preservation() {
  testing_support::TreeGen gen(404);
  std::size_t failed = 0, changed_leaves = 0;
  for (int i = 0; i < 1000; ++i) {
    Tree t = gen.random_tree(14);
    std::string s = serialize(t);
    switch (i % 4) {
      case 0: {  // truncated: trailing closers missing
        std::size_t closers = 0;
        while (closers < s.size() && s[s.size() - 1 - closers] == ')') ++closers;
        s.resize(s.size() - gen.uniform(1, closers));
        break;
      }
      case 1:  // extra closers at the end
        s.append(gen.uniform(1, 4), ')');
        break;
      case 2:  // stray closers before the tree, trailing ones dropped
        s = std::string(gen.uniform(1, 3), ')') + " " + s.substr(0, s.size() - 1);
        break;
      default:  // truncated and padded with whitespace
        s = s.substr(0, s.size() - 1) + "  \n";
        break;
    }
    try {
      Tree back = parse_bracketed(repair_brackets(s));
      changed_leaves += back.words() != t.words();
    } catch (const Error&) {
      ++failed;
    }
  }
  report("C8", "leaf-preservation", failed == 0 && changed_leaves == 0 && first_run.unmatched == 0,
         "fixture trees with unmatch " + std::to_string(first_run.unmatched) + ", 1000 malformed strings: " +
             std::to_string(failed) + " failed to repair, " + std::to_string(changed_leaves) + " changed leaves");
}

void mkp_criterion() {
  bool hand = mkp(TokenLogProbs{{}, {-1, -3, -5, -7, -9}}, 0.2) == 9.0 &&
              mkp(TokenLogProbs{{}, {-2, -2, -2, -2}}, 0.2) == 2.0 &&
              mkp(TokenLogProbs{{}, {-2, -2, -2, -2}}, 1.0) == 2.0 &&
              mkp(TokenLogProbs{{}, {-0.5, -4.0, -1.0}}, 0.1) == 4.0;
  testing_support::TreeGen gen(8);
  std::size_t violations = 0;
  for (int i = 0; i < 1000; ++i) {
    TokenLogProbs lp;
    for (std::size_t n = gen.uniform(1, 40); n > 0; --n) {
      lp.logprobs.push_back(-static_cast<double>(gen.rng()() % 100000) / 1000.0);
    }
    double k1 = static_cast<double>(gen.uniform(1, 100)) / 100.0;
    double k2 = static_cast<double>(gen.uniform(1, 100)) / 100.0;
    if (k1 > k2) std::swap(k1, k2);
    if (mkp(lp, k1) < mkp(lp, k2) - 1e-12) ++violations;
  }
  report("C9", "mkp", hand && violations == 0,
         std::string("hand cases ") + (hand ? "exact" : "WRONG") + ", monotonicity violations " +
             std::to_string(violations) + "/1000");
}

void reproduction_mode() {
  std::ifstream readme(std::string(RULEGUIDE_SOURCE_DIR) + "/README.md");
  std::stringstream ss;
  ss << readme.rdbuf();
  std::string text = ss.str();
  bool documented = text.find("## Reproduction mode") != std::string::npos &&
                    text.find("ruleguide parse") != std::string::npos &&
                    text.find("ruleguide correct") != std::string::npos;
  report("C10", "reproduction-mode-documented", documented,
         "README section present: " + std::string(documented ? "yes" : "no") +
             " (live run needs user-supplied treebank and endpoint; not run here)");
}

}  // namespace

int main() {
  try {
    scorer_oracle();
    taxonomy();
    lcs_oracle();
    rule_accounting();
    transform_fidelity();
    ranking_contract();
    end_to_end();
    leaf_preservation();
    mkp_criterion();
    reproduction_mode();
  } catch (const std::exception& e) {
    std::cout << "FAIL  acceptance aborted: " << e.what() << '\n';
    return 1;
  }
  std::cout << (failures ? "FAILED " : "ALL PASSED ") << "(" << failures << " failing)\n";
  return failures ? 1 : 0;
}
