#include <gtest/gtest.h>

#include <fstream>

#include <nlohmann/json.hpp>

#include "ruleguide/corpus.hpp"
#include "ruleguide/taxonomy.hpp"
#include "support.hpp"

using namespace ruleguide;
using testing_support::fixture;

namespace {

struct TaxonomyCases {
  Corpus pred, gold;
  nlohmann::json expected;
};

TaxonomyCases load_cases() {
  std::ifstream in(fixture("taxonomy/expected.json"));
  return {load_corpus(fixture("taxonomy/pred.mrg")), load_corpus(fixture("taxonomy/gold.mrg")),
          nlohmann::json::parse(in)};
}

ErrorType classify(const std::string& pred, const std::string& gold, const NodePath& path = {}) {
  Tree p = parse_bracketed(pred);
  return classify_subtree(p.at(path), parse_bracketed(gold));
}

}  // namespace

TEST(Taxonomy, HighlightedSubtrees) {
  auto f = load_cases();
  for (std::size_t i = 0; i < f.pred.size(); ++i) {
    NodePath path = f.expected["highlighted_paths"][i].get<NodePath>();
    ErrorType t = classify_subtree(f.pred.entries[i].tree.at(path), f.gold.entries[i].tree);
    EXPECT_EQ(error_type_name(t), f.expected["highlighted"][i].get<std::string>()) << "sentence " << i;
  }
}

TEST(Taxonomy, EveryNodeOfCaseFixture) {
  auto f = load_cases();
  std::vector<ErrorRecord> all;
  for (std::size_t i = 0; i < f.pred.size(); ++i) {
    auto recs = error_report(f.pred.entries[i].tree, f.gold.entries[i].tree, i);
    auto want = f.expected["records"][i].get<std::vector<std::string>>();
    ASSERT_EQ(recs.size(), want.size()) << "sentence " << i;
    for (std::size_t k = 0; k < recs.size(); ++k) {
      EXPECT_EQ(error_type_name(recs[k].error), want[k]) << "sentence " << i << " node " << k;
      EXPECT_EQ(recs[k].entry_index, i);
      EXPECT_EQ(recs[k].gold_counterpart.has_value(), recs[k].error != ErrorType::Span);
    }
    all.insert(all.end(), recs.begin(), recs.end());
  }
  auto d = distribution(all);
  const auto& w = f.expected["distribution"];
  EXPECT_EQ(d.span, w["span"].get<std::size_t>());
  EXPECT_EQ(d.label, w["label"].get<std::size_t>());
  EXPECT_EQ(d.flatness, w["flatness"].get<std::size_t>());
  EXPECT_EQ(d.deepness, w["deepness"].get<std::size_t>());
  EXPECT_EQ(d.total, w["total"].get<std::size_t>());
  EXPECT_EQ(d.correct, w["correct"].get<std::size_t>());
  EXPECT_EQ(d.classified(), all.size());
}

TEST(Taxonomy, SpanTakesPriorityOverChildCount) {
  // Extra bracket over "a b": no gold node with that span, whatever its shape.
  EXPECT_EQ(classify("(S (X (A a) (B b)) (C c))", "(S (A a) (B b) (C c))", {0}), ErrorType::Span);
}

TEST(Taxonomy, LabelCoversParentAndChildLabels) {
  EXPECT_EQ(classify("(NP (DT a) (NN b))", "(QP (DT a) (NN b))"), ErrorType::Label);
  EXPECT_EQ(classify("(NP (DT a) (NN b))", "(NP (DT a) (JJ b))"), ErrorType::Label);
  EXPECT_EQ(classify("(NP (DT a) (NN b))", "(NP (DT a) (NN b))"), ErrorType::Correct);
}

TEST(Taxonomy, FlatnessAndDeepnessAreMirrorImages) {
  const std::string flat = "(NP (JJ a) (NN b) (PP (IN c) (NN d)))";
  const std::string nested = "(NP (NP (JJ a) (NN b)) (PP (IN c) (NN d)))";
  EXPECT_EQ(classify(flat, nested), ErrorType::Flatness);
  EXPECT_EQ(classify(nested, flat), ErrorType::Deepness);
}

TEST(Taxonomy, GoldUnaryChainPrefersWidestThenTopmost) {
  // Gold has S and VP over the same span; the VP has more children.
  const std::string gold = "(S (VP (VB a) (NN b)))";
  EXPECT_EQ(classify("(VP (VB a) (NN b))", gold), ErrorType::Correct);
  EXPECT_EQ(classify("(S (VB a) (NN b))", gold), ErrorType::Label);
  // Equal child counts: the topmost gold node is the counterpart.
  const std::string chain = "(S (VP (NN a)))";
  auto recs = error_report(parse_bracketed("(X (Y (NN a)))"), parse_bracketed(chain));
  ASSERT_EQ(recs.size(), 2u);
  EXPECT_EQ(recs[0].gold_counterpart->parent, "S");
  // An exact match anywhere in the chain wins, so the identical tree is all Correct.
  for (const auto& r : error_report(parse_bracketed(chain), parse_bracketed(chain))) {
    EXPECT_EQ(r.error, ErrorType::Correct);
  }
}

TEST(Taxonomy, LeafMismatchIsAnError) {
  try {
    error_report(parse_bracketed("(S (NN a) (NN b))"), parse_bracketed("(S (NN a) (NN c))"));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::LeafMismatch);
  }
  EXPECT_THROW(classify("(S (NN a) (NN b))", "(S (NN a) (NN c))"), Error);
}

TEST(Taxonomy, TotalOverRandomPairs) {
  testing_support::TreeGen gen(11);
  for (int i = 0; i < 500; ++i) {
    auto words = gen.words(gen.uniform(1, 12));
    Tree p = gen.tree_over(words), g = gen.tree_over(words);
    auto recs = error_report(p, g);
    std::size_t phrasal = 0;
    for_each_node(p, [&](const Tree& t, const NodePath&) { phrasal += !t.is_leaf(); });
    ASSERT_EQ(recs.size(), phrasal);
    auto d = distribution(recs);
    std::size_t sum = 0;
    for (auto t : kAllErrorTypes) sum += d.count(t);
    ASSERT_EQ(sum, recs.size());
    // Identity: nothing but Correct.
    for (const auto& r : error_report(g, g)) ASSERT_EQ(r.error, ErrorType::Correct);
  }
}
