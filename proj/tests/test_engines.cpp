#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "support.hpp"

using namespace semc;
using namespace semc::testing;

namespace {

std::vector<std::string> strings(const std::vector<Completion>& cs) {
  std::vector<std::string> out;
  for (const auto& c : cs) out.push_back(c.completion);
  return out;
}

const LogCorpus& bonds_log() {
  static const LogCorpus c = load_log(data_path("domains/bonds/log.tsv"));
  return c;
}

AtomRecord keyword(std::string key, std::uint64_t count, std::vector<std::pair<std::string, std::uint64_t>> ctx) {
  AtomRecord r;
  r.display = r.key = key;
  r.atom = Atom{"KEYWORDS", Op::Contains, StringValue{key}, false};
  r.dtype = atom_type(r.atom);
  r.count = count;
  r.context = std::move(ctx);
  return r;
}

}  // namespace

// ------------------------------------------------------------------ mpc

TEST(Mpc, IndexesTheRunningLog) {
  const auto& g = grammar_of("bonds");
  MpcBuildStats st;
  auto idx = MpcIndex::build(running_log(), g, &st);
  EXPECT_EQ(idx.size(), 2u);
  EXPECT_EQ(st.dropped, 0u);
  EXPECT_EQ(strings(idx.complete("ib", 10)), std::vector<std::string>{"ibm bonds maturing in 2020"});
  EXPECT_TRUE(idx.complete("bullet bonds mat", 10).empty());
  auto c = idx.complete("bullet", 10);
  ASSERT_EQ(c.size(), 1u);
  EXPECT_EQ(c[0].grade, Grade::High);
  EXPECT_EQ(c[0].source, "mpc");
  EXPECT_EQ(serialize(c[0].interpretation), "AND(FLD_YLD>2(PERCENT), MATURITY_TYPE=BULLET)");
  EXPECT_TRUE(MpcIndex::build(LogCorpus{}, g).complete("i", 5).empty());
  EXPECT_TRUE(idx.complete("", 5).empty());
}

TEST(Mpc, MergesDuplicatesAndDropsUnparsable) {
  const auto& g = grammar_of("bonds");
  auto log = parse_log(
      "ibm bonds\t2019-01-01\t1\n"
      "IBM  bonds\t2019-01-02\t1\n"
      "xyzzy plugh\t2019-01-03\t9\n"
      "apple bonds\t2019-01-03\t1\n");
  MpcBuildStats st;
  auto idx = MpcIndex::build(log, g, &st);
  EXPECT_EQ(idx.size(), 2u);
  EXPECT_EQ(st.dropped, 1u);
  auto c = idx.complete("", 5);
  c = idx.complete("i", 5);
  ASSERT_EQ(c.size(), 1u);
  EXPECT_EQ(c[0].score, 2.0);
  EXPECT_EQ(c[0].completion, "ibm bonds");  // first-seen surface
}

TEST(Mpc, TypeAtCursor) {
  const auto& g = grammar_of("bonds");
  auto log = parse_log("chinese non-tech bonds maturing in three years\t2019-01-01\t1\n");
  auto idx = MpcIndex::build(log, g);
  auto c = idx.complete("chinese non-te", 5);
  ASSERT_EQ(c.size(), 1u);
  EXPECT_EQ(c[0].dtype, "SECTOR");
  c = idx.complete("chin", 5);
  ASSERT_EQ(c.size(), 1u);
  EXPECT_NE(c[0].dtype, "SECTOR");
}

TEST(Mpc, MatchesBruteForce) {
  const auto& g = grammar_of("bonds");
  const auto& log = bonds_log();
  auto idx = MpcIndex::build(log, g);
  std::mt19937_64 rng(5);
  for (int i = 0; i < 200; ++i) {
    const auto& q = log.queries[rng() % log.queries.size()];
    std::string p = q.text.substr(0, 1 + rng() % q.text.size());
    std::string key = prefix_key(p);
    std::vector<const MpcEntry*> expect;
    for (const auto& e : idx.entries())
      if (e.key.starts_with(key)) expect.push_back(&e);
    std::stable_sort(expect.begin(), expect.end(), [](auto a, auto b) {
      return a->frequency != b->frequency ? a->frequency > b->frequency : a->key < b->key;
    });
    if (expect.size() > 7) expect.resize(7);
    auto got = idx.complete(p, 7);
    ASSERT_EQ(got.size(), expect.size()) << p;
    for (std::size_t j = 0; j < got.size(); ++j) EXPECT_EQ(got[j].completion, expect[j]->text) << p;
  }
}

TEST(Mpc, SnapshotRoundTrip) {
  const auto& g = grammar_of("bonds");
  auto idx = MpcIndex::build(bonds_log(), g);
  auto back = MpcIndex::from_bytes(idx.snapshot().bytes());
  ASSERT_EQ(back.size(), idx.size());
  for (const char* p : {"i", "bullet b", "bonds with y", "a"}) {
    auto a = idx.complete(p, 10), b = back.complete(p, 10);
    ASSERT_EQ(strings(a), strings(b)) << p;
    for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(a[i].dtype, b[i].dtype);
  }
  EXPECT_THROW(MpcIndex::from_bytes("NOTMAGIC"), Error);
}

// --------------------------------------------------------------- atomic

TEST(Atomic, WeightedCountsAndContexts) {
  const auto& g = grammar_of("bonds");
  auto log = parse_log("ibm bonds maturing in 2020\t2019-03-01\t3\n");
  auto m = AtomModel::build(log, g);
  const auto* r = m.find("maturing in 2020");
  ASSERT_TRUE(r);
  EXPECT_EQ(r->count, 3u);
  ASSERT_EQ(r->context.size(), 2u);
  EXPECT_EQ(r->context[0], (std::pair<std::string, std::uint64_t>{"ibm", 3}));
  EXPECT_EQ(r->context[1], (std::pair<std::string, std::uint64_t>{"bonds", 3}));
  ASSERT_TRUE(m.find("ibm bonds"));
  EXPECT_TRUE(m.find("ibm bonds")->context.empty());
}

TEST(Atomic, ScoreIsSumOfLogContexts) {
  const auto& g = grammar_of("bonds");
  auto m = AtomModel::build(running_log(), g);
  auto rec = [&](std::string_view s) {
    for (std::size_t i = 0; i < m.size(); ++i)
      if (m.at(i).key == s) return i;
    throw Error("missing record");
  };
  auto head = text::tokenize("bullet bonds");
  // "bonds" was seen once left of the atom, "bullet" never
  EXPECT_NEAR(score_atom(m, rec("maturing in 2020"), head), std::log(2.0), 1e-12);
  EXPECT_NEAR(score_atom(m, rec("maturing in 2020"), head), 0.6931, 1e-4);
  EXPECT_EQ(score_atom(m, rec("maturing in 2020"), std::span<const Token>{}), 0.0);
  auto twice = text::tokenize("bonds bonds");
  EXPECT_NEAR(score_atom(m, rec("maturing in 2020"), twice), 2 * std::log(2.0), 1e-12);
  EXPECT_EQ(context_weight(0), 0.0);
  EXPECT_EQ(context_weight(83), std::log1p(83.0));
  EXPECT_EQ(context_weight(100000), std::log1p(100000.0));
}

TEST(Atomic, RewardsFittingContext) {
  const auto& g = grammar_of("news");
  auto m = AtomModel::from_records({keyword("china tariffs", 235, {{"trump", 83}, {"us", 40}}),
                                    keyword("climate change", 160, {{"un", 30}}),
                                    keyword("crude oil prices", 140, {{"opec", 20}}),
                                    keyword("china trade talks", 120, {{"us", 12}})});
  auto head = text::tokenize("trump");
  EXPECT_NEAR(score_atom(m, 0, head), std::log(84.0), 1e-12);
  EXPECT_NEAR(score_atom(m, 0, head), 4.4308, 1e-4);
  auto out = complete_atomic(m, g, "trump c", 10);
  ASSERT_FALSE(out.empty());
  EXPECT_EQ(out[0].completion, "trump china tariffs");
  EXPECT_EQ(out[0].source, "atomic");
  for (const auto& c : out) EXPECT_TRUE(c.completion.starts_with("trump c")) << c.completion;
}

TEST(Atomic, PhraseModelFromHeadlines) {
  std::vector<Phrase> phrases{{"China tariffs", 235}, {"trade talks", 120}, {"china tariffs", 5}};
  std::vector<std::string> docs{"Trump threatens new China tariffs", "Trump raises China tariffs again",
                                "U.S. and China resume trade talks"};
  auto m = AtomModel::from_phrases(phrases, docs, "KEYWORDS");
  ASSERT_EQ(m.size(), 2u);
  const auto* r = m.find("china tariffs");
  ASSERT_TRUE(r);
  EXPECT_EQ(r->count, 240u);
  EXPECT_EQ(serialize(r->atom), "KEYWORDS CONTAINS \"china tariffs\"");
  auto ctx = [&](const AtomRecord& a, const std::string& w) -> std::uint64_t {
    for (const auto& [k, c] : a.context)
      if (k == w) return c;
    return 0;
  };
  EXPECT_EQ(ctx(*r, "trump"), 2u);
  EXPECT_EQ(ctx(*r, "threatens"), 1u);
  EXPECT_EQ(ctx(*r, "again"), 0u);  // only words to the left count
  EXPECT_EQ(ctx(*m.find("trade talks"), "china"), 1u);
}

TEST(Atomic, BacktracksAmbiguousFinalAtom) {
  const auto& g = grammar_of("bonds");
  auto m = AtomModel::build(bonds_log(), g);
  auto plan = plan_atomic(m, g, "ibm b", {});
  ASSERT_FALSE(plan.empty());
  EXPECT_EQ(plan[0].key, "ibm b");
  EXPECT_TRUE(plan[0].dec.initial().empty());
  auto out = complete_atomic(m, g, "ibm b", 10);
  ASSERT_FALSE(out.empty());
  for (const auto& c : out) EXPECT_TRUE(reparses(g, c)) << c.completion;
}

TEST(Atomic, BacktrackRatio) {
  const auto& g = grammar_of("bonds");
  // "bonds" is the only atom starting with "bonds", while many start with "b"
  std::string rows;
  for (const char* s : {"bullet bonds", "b rated bonds", "bb rated bonds", "bbb rated bonds", "bonds"})
    rows += std::string(s) + "\t2019-01-01\t1\n";
  auto m = AtomModel::build(parse_log(rows), g);
  ScoringParams strict;
  strict.backtrack_ratio = 1e9;
  auto keep = plan_atomic(m, g, "ibm bonds x", strict);
  ASSERT_EQ(keep.size(), 1u);
  EXPECT_EQ(keep[0].dec.initial(), "ibm bonds");
  EXPECT_TRUE(plan_atomic(m, g, "", {}).empty());
}

TEST(Atomic, SkipsRepeatedTypeUnlessOr) {
  const auto& g = grammar_of("bonds");
  auto m = AtomModel::build(bonds_log(), g);
  auto out = complete_atomic(m, g, "ibm bonds a", 10);
  for (const auto& c : out) {
    auto atoms = atoms_of(c.interpretation);
    std::set<std::string> fields;
    for (const auto& a : atoms) fields.insert(a.field);
    EXPECT_EQ(fields.count("ISSUING_COMPANY"), 1u) << c.completion;
  }
}

TEST(Atomic, SnapshotRoundTrip) {
  const auto& g = grammar_of("bonds");
  auto m = AtomModel::build(bonds_log(), g);
  auto back = AtomModel::from_bytes(m.snapshot().bytes());
  EXPECT_EQ(back.dump(), m.dump());
  for (const char* p : {"ibm b", "bullet bonds mat", "bonds with y"})
    EXPECT_EQ(strings(complete_atomic(m, g, p, 10)), strings(complete_atomic(back, g, p, 10))) << p;
}

// ------------------------------------------------------------- template

TEST(Template, CompletesAndVerifies) {
  const auto& qa = grammar_of("bonds");
  const auto& tg = grammar_of("bonds", "templates.g");
  TemplateEngine eng(tg, qa);
  auto out = eng.complete("ibm bonds mat", 5);
  ASSERT_FALSE(out.empty());
  for (const auto& c : out) {
    EXPECT_EQ(c.source, "template");
    EXPECT_EQ(c.grade, Grade::Medium);
    auto b = grammar::best_parse(qa, without_substitution(c.completion, "..."));
    ASSERT_TRUE(b) << c.completion;
    EXPECT_EQ(canonical_key(b->formula()), canonical_key(c.interpretation));
  }
  for (std::size_t i = 1; i < out.size(); ++i) EXPECT_LT(out[i].score, out[i - 1].score);
  EXPECT_TRUE(eng.complete("ibm", 0).empty());
  EXPECT_EQ(without_substitution("a ... b", "..."), "a  b");
  EXPECT_EQ(without_substitution("a b", ""), "a b");
}
