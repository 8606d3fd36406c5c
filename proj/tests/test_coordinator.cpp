#include <gtest/gtest.h>

#include <random>
#include <thread>

#include "support.hpp"

using namespace semc;
using namespace semc::testing;

namespace {

Completion item(std::string s, std::string formula, std::string dtype, Grade g, double score,
                std::string source = "mpc") {
  Completion c;
  c.completion = std::move(s);
  c.interpretation = parse_formula(formula);
  c.dtype = std::move(dtype);
  c.grade = g;
  c.score = score;
  c.source = std::move(source);
  return c;
}

Engine fixed(std::string name, std::vector<Completion> out) {
  return {name, [out](std::string_view, std::size_t) { return out; }};
}

CoordinatorConfig config(std::vector<std::string> algos, std::size_t d = 10) {
  CoordinatorConfig c;
  c.algorithms = std::move(algos);
  c.d = d;
  return c;
}

std::vector<std::string> strings(const std::vector<Completion>& cs) {
  std::vector<std::string> out;
  for (const auto& c : cs) out.push_back(c.completion);
  return out;
}

const char* kIbm = "ISSUING_COMPANY=COMPANY_IBM";
const char* kApple = "ISSUING_COMPANY=COMPANY_APPLE";
const char* kBullet = "MATURITY_TYPE=BULLET";

}  // namespace

TEST(Coordinator, DropsSemanticDuplicates) {
  // same formula from two engines: the higher grade survives
  Coordinator c({fixed("mpc", {item("ibm bonds", kIbm, "ISSUING_COMPANY", Grade::High, 5)}),
                 fixed("template", {item("big blue bonds", kIbm, "ISSUING_COMPANY", Grade::Medium, 0, "template"),
                                    item("bullet bonds", kBullet, "MATURITY_TYPE", Grade::Medium, -1, "template")})},
                config({"mpc", "template"}));
  EXPECT_EQ(strings(c.complete("")), (std::vector<std::string>{"ibm bonds", "bullet bonds"}));
}

TEST(Coordinator, DropsStringDuplicates) {
  auto out = dedup({{item("IBM bonds", kIbm, "X", Grade::Medium, 1)},
                    {item("ibm  bonds", "AND(ISSUING_COMPANY=COMPANY_IBM, MATURITY_TYPE=BULLET)", "X", Grade::Low, 1)}});
  ASSERT_EQ(out.size(), 1u);
  EXPECT_EQ(out[0].grade, Grade::Medium);
}

TEST(Coordinator, SingleEnginePassesThrough) {
  std::vector<Completion> list{item("b1", kIbm, "A", Grade::High, 3), item("b2", kApple, "A", Grade::High, 2),
                               item("b3", kBullet, "A", Grade::High, 1)};
  Coordinator c({fixed("mpc", list)}, config({"mpc"}));
  EXPECT_EQ(strings(c.complete("b")), (std::vector<std::string>{"b1", "b2", "b3"}));
}

TEST(Coordinator, InterleavesTypes) {
  Coordinator c({fixed("mpc", {item("a1", kIbm, "A", Grade::High, 3), item("a2", kApple, "A", Grade::High, 1)}),
                 fixed("atomic", {item("b1", kBullet, "B", Grade::High, 2, "atomic")})},
                config({"mpc", "atomic"}, 3));
  EXPECT_EQ(strings(c.complete("")), (std::vector<std::string>{"a1", "b1", "a2"}));
  EXPECT_EQ(strings(c.complete("", 2)), (std::vector<std::string>{"a1", "b1"}));
  EXPECT_TRUE(c.complete("", 0).empty());
}

TEST(Coordinator, GradeFloor) {
  auto cfg = config({"mpc"});
  cfg.grade_floor = Grade::Medium;
  Coordinator c({fixed("mpc", {item("x1", kIbm, "A", Grade::Low, 9), item("x2", kApple, "A", Grade::Medium, 1)})},
                cfg);
  EXPECT_EQ(strings(c.complete("x")), std::vector<std::string>{"x2"});
  // nothing at or above the floor: the low ones are kept
  Coordinator only_low({fixed("mpc", {item("x1", kIbm, "A", Grade::Low, 9)})}, cfg);
  EXPECT_EQ(strings(only_low.complete("x")), std::vector<std::string>{"x1"});
}

TEST(Coordinator, BudgetOverrunIsReported) {
  auto cfg = config({"mpc", "slow"});
  cfg.budget_ms = 20;
  Engine slow{"slow", [](std::string_view, std::size_t) {
                std::this_thread::sleep_for(std::chrono::milliseconds(300));
                return std::vector<Completion>{item("late", kApple, "A", Grade::High, 100)};
              }};
  Coordinator c({fixed("mpc", {item("fast", kIbm, "A", Grade::High, 1)}), slow}, cfg);
  auto t0 = std::chrono::steady_clock::now();
  auto r = c.run("");
  auto ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
  EXPECT_LT(ms, 200);
  EXPECT_EQ(strings(r.completions), std::vector<std::string>{"fast"});
  EXPECT_EQ(r.overran, std::vector<std::string>{"slow"});
}

TEST(Coordinator, ThrowingEngineIsIsolated) {
  Engine bad{"atomic", [](std::string_view, std::size_t) -> std::vector<Completion> { throw std::runtime_error("x"); }};
  Coordinator c({fixed("mpc", {item("ok", kIbm, "A", Grade::High, 1)}), bad}, config({"mpc", "atomic"}));
  auto r = c.run("");
  EXPECT_EQ(strings(r.completions), std::vector<std::string>{"ok"});
  EXPECT_EQ(r.overran, std::vector<std::string>{"atomic"});
}

TEST(Coordinator, FallbackOnlyWhenOthersEmpty) {
  auto cfg = config({"mpc", "template"});
  cfg.fallback_only = {"template"};
  int calls = 0;
  Engine tmpl{"template", [&](std::string_view, std::size_t) {
                ++calls;
                return std::vector<Completion>{item("ibm bullet bonds", kBullet, "B", Grade::Medium, 0, "template")};
              }};
  Coordinator c({fixed("mpc", {item("ibm bonds", kIbm, "A", Grade::High, 1)}), tmpl}, cfg);
  EXPECT_EQ(strings(c.complete("ibm")), std::vector<std::string>{"ibm bonds"});
  EXPECT_EQ(calls, 0);
  EXPECT_EQ(strings(c.complete("ibm bu")), std::vector<std::string>{"ibm bullet bonds"});
  EXPECT_EQ(calls, 1);
}

TEST(Coordinator, EmptyEnginesGiveEmpty) {
  Coordinator c({fixed("mpc", {}), fixed("atomic", {})}, config({"mpc", "atomic"}));
  auto r = c.run("anything");
  EXPECT_TRUE(r.completions.empty());
  EXPECT_TRUE(r.overran.empty());
}

TEST(Coordinator, FiltersUnsoundOutputs) {
  Coordinator c({fixed("mpc", {item("apple bonds", kApple, "A", Grade::High, 9),  // not an extension
                               item("ibm", "", "A", Grade::High, 8),              // empty interpretation
                               item("ibm bonds", kIbm, "A", Grade::High, 1)})},
                config({"mpc"}));
  EXPECT_EQ(strings(c.complete("ib")), std::vector<std::string>{"ibm bonds"});
  EXPECT_TRUE(sound("ibm b", item("ibm bonds", kIbm, "A", Grade::Low, 0)));
  EXPECT_FALSE(sound("ibm b", item("ibm", kIbm, "A", Grade::Low, 0)));
}

TEST(Coordinator, ConfigValidation) {
  EXPECT_THROW(config({}).validate(), ConfigError);
  EXPECT_THROW(config({"mpc"}, 0).validate(), ConfigError);
  auto cfg = config({"mpc"});
  cfg.budget_ms = 0;
  EXPECT_THROW(cfg.validate(), ConfigError);
  EXPECT_THROW(Coordinator({fixed("mpc", {})}, config({"nope"})), ConfigError);
}

TEST(Coordinator, OutputInvariants) {
  // random engine outputs: at most d, unique formulas and strings, grades non-increasing
  std::mt19937_64 rng(17);
  const std::vector<std::string> formulas{kIbm, kApple, kBullet, "FLD_YLD>2(PERCENT)", "MATURITY_TYPE=CALLABLE",
                                          "AND(ISSUING_COMPANY=COMPANY_IBM, MATURITY_TYPE=BULLET)"};
  const std::vector<std::string> words{"ibm", "ibm bonds", "ibm bullet", "i b m", "ibm apple", "ibm b"};
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<Engine> engines;
    for (const char* name : {"mpc", "atomic", "template"}) {
      std::vector<Completion> out;
      for (int i = 0, n = int(rng() % 8); i < n; ++i)
        out.push_back(item(words[rng() % words.size()], formulas[rng() % formulas.size()],
                           std::string(1, char('A' + rng() % 3)), Grade(rng() % 3), double(rng() % 5), name));
      engines.push_back(fixed(name, out));
    }
    std::size_t d = 1 + rng() % 6;
    Coordinator c(engines, config({"mpc", "atomic", "template"}, d));
    auto out = c.complete("ibm");
    ASSERT_LE(out.size(), d);
    std::set<std::string> fs, ss;
    for (std::size_t i = 0; i < out.size(); ++i) {
      EXPECT_TRUE(fs.insert(canonical_key(out[i].interpretation)).second);
      EXPECT_TRUE(ss.insert(text::normalize(out[i].completion)).second);
      EXPECT_TRUE(sound("ibm", out[i]));
      if (i) EXPECT_LE(out[i].grade, out[i - 1].grade);
    }
  }
}

TEST(System, CompletesTheRunningExample) {
  auto sys = open_with("bonds", running_log());
  auto out = sys->complete("bullet bonds mat");
  auto it = std::find_if(out.begin(), out.end(), [](const Completion& c) { return c.source == "atomic"; });
  ASSERT_NE(it, out.end());
  EXPECT_EQ(it->completion, "bullet bonds maturing in 2020");
  EXPECT_EQ(canonical_key(it->interpretation),
            canonical_key(parse_formula("AND(MATURITY_DATE=ExactDate(-1,-1,2020), MATURITY_TYPE=BULLET)")));
  EXPECT_EQ(std::count_if(out.begin(), out.end(), [](const Completion& c) { return c.source == "atomic"; }), 1);
  for (const auto& c : out) EXPECT_TRUE(sound("bullet bonds mat", c)) << c.completion;
}

TEST(System, BundleOpensEachDomain) {
  for (const char* domain : {"bonds", "equities", "news"}) {
    auto sys = System::open(bundle_path(domain));
    auto out = sys->complete("a");
    EXPECT_FALSE(out.empty()) << domain;
    for (const auto& c : out) EXPECT_TRUE(sound("a", c)) << domain << ": " << c.completion;
  }
}
