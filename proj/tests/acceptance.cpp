// End-to-end acceptance checks; one PASS/FAIL line each, nonzero exit if any fail.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "support.hpp"

#include "semc/eval.hpp"

using namespace semc;
using namespace semc::testing;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

struct Outcome {
  bool pass = false;
  std::string detail;
};

int failures = 0;

void check(const char* name, const std::function<Outcome()>& body) {
  auto t0 = Clock::now();
  Outcome o;
  try {
    o = body();
  } catch (const std::exception& e) {
    o = {false, std::string("exception: ") + e.what()};
  }
  if (!o.pass) ++failures;
  std::printf("%s  %-26s %s [%.2fs]\n", o.pass ? "PASS" : "FAIL", name, o.detail.c_str(), seconds_since(t0));
  std::fflush(stdout);
}

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

LogCorpus synth(const std::string& domain, std::size_t n, std::uint64_t seed) {
  SynthOptions o;
  o.n = n;
  o.seed = seed;
  return synthesize(grammar_of(domain), o);
}

// Random character prefixes (length >= min_len) of logged queries.
std::vector<std::string> random_prefixes(const LogCorpus& log, std::size_t n, std::size_t min_len, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<std::string> out;
  while (out.size() < n) {
    const auto& q = log.queries[rng() % log.queries.size()].text;
    if (q.size() < min_len) continue;
    std::size_t len = min_len + rng() % (q.size() - min_len + 1);
    out.push_back(q.substr(0, len));
  }
  return out;
}

bool reparses_to(const grammar::Grammar& g, const Completion& c, std::string_view sub = "...") {
  auto d = grammar::best_parse(g, without_substitution(c.completion, sub));
  return d && canonical_key(d->formula()) == canonical_key(c.interpretation);
}

Outcome fixture_fidelity() {
  auto t0 = Clock::now();
  auto m = AtomModel::build(running_log(), grammar_of("bonds"));
  double took = seconds_since(t0);
  struct Want {
    const char* display;
    const char* semantics;
    std::uint64_t count;
    std::vector<std::pair<std::string, std::uint64_t>> context;
  };
  std::vector<Want> want = {
      {"ibm bonds", "ISSUING_COMPANY=COMPANY_IBM", 1, {}},
      {"maturing in 2020", "MATURITY_DATE=ExactDate(-1,-1,2020)", 1, {{"ibm", 1}, {"bonds", 1}}},
      {"bullet bonds", "MATURITY_TYPE=BULLET", 1, {}},
      {"with yield > 2 pct", "FLD_YLD>2(PERCENT)", 1, {{"bullet", 1}, {"bonds", 1}}},
  };
  if (m.size() != want.size()) return {false, fmt("%zu atoms, want 4", m.size())};
  for (std::size_t i = 0; i < want.size(); ++i) {
    const auto& r = m.at(i);
    if (r.display != want[i].display || serialize(r.atom) != want[i].semantics || r.count != want[i].count ||
        r.context != want[i].context)
      return {false, "mismatch at \"" + r.display + "\""};
  }
  return {took < 1.0, fmt("4 atoms exact, built in %.3f s", took)};
}

Outcome running_example() {
  auto t0 = Clock::now();
  const auto& g = grammar_of("bonds");
  auto m = AtomModel::build(running_log(), g);
  auto out = complete_atomic(m, g, "bullet bonds mat", 10);
  double took = seconds_since(t0);
  auto want = canonical_key(parse_formula("AND(MATURITY_TYPE=BULLET, MATURITY_DATE=ExactDate(-1,-1,2020))"));
  if (out.size() != 1) return {false, fmt("%zu completions, want exactly 1", out.size())};
  if (out[0].completion != "bullet bonds maturing in 2020") return {false, "got \"" + out[0].completion + "\""};
  if (canonical_key(out[0].interpretation) != want) return {false, "semantics " + canonical_key(out[0].interpretation)};
  return {took < 1.0, "\"" + out[0].completion + "\" = " + want};
}

// Raw outputs of every engine over random prefixes of a 1000-query log.
struct EngineRun {
  std::vector<std::pair<std::string, Completion>> pairs;
};

const EngineRun& bonds_run() {
  static EngineRun run = [] {
    EngineRun r;
    auto log = synth("bonds", 1000, 11);
    auto sys = open_with("bonds", log);
    auto prefixes = random_prefixes(log, 4000, 1, 12);
    for (const auto& p : prefixes) {
      for (auto& c : sys->mpc().complete(p, 10)) r.pairs.emplace_back(p, std::move(c));
      for (auto& c : complete_atomic(sys->atoms(), sys->grammar(), p, 10, sys->atomic_params()))
        r.pairs.emplace_back(p, std::move(c));
      for (auto& c : sys->templates()->complete(p, 10)) r.pairs.emplace_back(p, std::move(c));
      if (r.pairs.size() >= 20000) break;
    }
    return r;
  }();
  return run;
}

Outcome soundness() {
  const auto& run = bonds_run();
  std::size_t syntactic = 0, semantic = 0;
  for (const auto& [p, c] : run.pairs) {
    syntactic += is_syntactic_extension(p, c.completion);
    auto canon = canonicalize(c.interpretation);
    semantic += !atoms_of(canon).empty() && canonicalize(parse_formula(serialize(canon))) == canon;
  }
  std::size_t n = run.pairs.size();
  return {n >= 10000 && syntactic == n && semantic == n,
          fmt("%zu pairs: %zu syntactic, %zu semantic", n, syntactic, semantic)};
}

Outcome propositionality() {
  std::size_t n = 0, ok = 0;
  const auto& g = grammar_of("bonds");
  for (const auto& [p, c] : bonds_run().pairs) {
    if (c.source == "mpc") continue;
    ++n;
    ok += reparses_to(g, c);
  }
  auto log = synth("equities", 300, 21);
  auto sys = open_with("equities", log);
  for (const auto& p : random_prefixes(log, 1500, 1, 22)) {
    std::vector<Completion> out = complete_atomic(sys->atoms(), sys->grammar(), p, 10, sys->atomic_params());
    for (auto& c : sys->templates()->complete(p, 10)) out.push_back(std::move(c));
    for (const auto& c : out) {
      ++n;
      ok += reparses_to(sys->grammar(), c);
    }
  }
  return {n > 0 && ok == n, fmt("%zu/%zu atomic+template outputs re-parse", ok, n)};
}

Outcome completeness() {
  auto log = synth("bonds", 500, 31);
  auto sys = open_with("bonds", log);
  std::size_t prefixes = 0, answered = 0;
  std::string first_miss;
  for (const auto& q : log.queries)
    for (std::size_t j = 3; j <= q.text.size(); ++j) {
      auto p = q.text.substr(0, j);
      ++prefixes;
      if (!sys->complete(p).empty())
        ++answered;
      else if (first_miss.empty())
        first_miss = p;
    }
  return {answered == prefixes,
          fmt("%zu/%zu prefixes answered", answered, prefixes) + (first_miss.empty() ? "" : ", e.g. \"" + first_miss + "\"")};
}

Outcome diversity() {
  auto log = load_log(data_path("domains/bonds/log.tsv"));
  auto sys = open_with("bonds", log);
  const auto& m = sys->atoms();
  std::set<std::string> prefixes;
  for (const auto& r : m.records()) {
    auto first = r.key.substr(0, r.key.find(' '));
    for (std::size_t j = 1; j <= first.size(); ++j) prefixes.insert(first.substr(0, j));
  }
  std::size_t tested = 0, ok = 0;
  std::string first_miss;
  for (const auto& p : prefixes) {
    std::set<std::string> types;
    if (auto node = m.trie().find(p))
      for (auto id : m.trie().candidates(*node)) types.insert(m.at(id).dtype);
    if (types.size() < 3) continue;
    ++tested;
    auto out = sys->complete(p);
    std::set<std::string> top;
    for (std::size_t i = 0; i < out.size() && i < 3; ++i) top.insert(out[i].dtype);
    if (top.size() == 3)
      ++ok;
    else if (first_miss.empty())
      first_miss = p;
  }
  return {tested > 0 && ok == tested,
          fmt("%zu/%zu one-token prefixes diverse in top 3", ok, tested) +
              (first_miss.empty() ? "" : ", e.g. \"" + first_miss + "\"")};
}

// Scores every atom of the model by a linear scan, without the trie or the
// vocabulary index, and rebuilds the top-d list from the same plans.
std::vector<Completion> oracle_atomic(const AtomModel& m, const grammar::Grammar& g, std::string_view p, std::size_t d,
                                      const ScoringParams& params) {
  std::vector<Completion> out;
  for (const auto& q : plan_atomic(m, g, p, params)) {
    if (!q.usable) continue;
    std::optional<std::string> last_type;
    if (q.connector != "or") last_type = rightmost_atom_type(q.dec.derivation);
    auto head = q.dec.initial_tokens();
    std::vector<ScoredAtom> all;
    for (std::uint32_t i = 0; i < m.size(); ++i) {
      const auto& r = m.at(i);
      if (r.key.compare(0, q.key.size(), q.key) != 0) continue;
      if (last_type && r.dtype == *last_type) continue;
      double s = 0;
      for (const auto& t : head)
        for (const auto& [w, c] : r.context)
          if (w == t.text) s += std::log1p(double(c));
      all.push_back({i, s});
    }
    auto rank = [&](const ScoredAtom& a, const ScoredAtom& b) {
      if (a.score != b.score) return a.score > b.score;
      if (m.at(a.record).count != m.at(b.record).count) return m.at(a.record).count > m.at(b.record).count;
      return m.at(a.record).key < m.at(b.record).key;
    };
    std::map<std::string, std::vector<ScoredAtom>> buckets;
    for (const auto& a : all) buckets[m.at(a.record).dtype].push_back(a);
    std::vector<std::vector<ScoredAtom>> order;
    for (auto& [t, b] : buckets) {
      std::sort(b.begin(), b.end(), rank);
      order.push_back(b);
    }
    // buckets are ordered by their best member before re-parse filtering
    std::sort(order.begin(), order.end(), [&](const auto& x, const auto& y) { return rank(x.front(), y.front()); });
    for (auto& b : order) std::erase_if(b, [&](const ScoredAtom& a) { return !reparses(g, assemble(m, q, a)); });
    std::vector<Completion> part;
    for (std::size_t round = 0; part.size() < d; ++round) {
      bool any = false;
      for (const auto& b : order)
        if (round < b.size() && part.size() < d) {
          part.push_back(assemble(m, q, b[round]));
          any = true;
        }
      if (!any) break;
    }
    for (auto& c : part)
      if (out.size() < d && std::none_of(out.begin(), out.end(), [&](auto& o) { return o.completion == c.completion; }))
        out.push_back(std::move(c));
    if (out.size() >= d) break;
  }
  return out;
}

Outcome oracle_equivalence() {
  auto log = synth("bonds", 1000, 41);
  const auto& g = grammar_of("bonds");
  auto m = AtomModel::build(log, g);
  ScoringParams params;
  std::size_t equal = 0, nonempty = 0;
  auto prefixes = random_prefixes(log, 200, 1, 42);
  std::string first_miss;
  for (const auto& p : prefixes) {
    auto got = complete_atomic(m, g, p, 10, params);
    auto want = oracle_atomic(m, g, p, 10, params);
    bool same = got.size() == want.size();
    for (std::size_t i = 0; same && i < got.size(); ++i)
      same = got[i].completion == want[i].completion && std::abs(got[i].score - want[i].score) < 1e-9 &&
             canonical_key(got[i].interpretation) == canonical_key(want[i].interpretation);
    equal += same;
    nonempty += !got.empty();
    if (!same && first_miss.empty()) first_miss = p;
  }
  return {equal == prefixes.size(), fmt("%zu/%zu lists identical (%zu non-empty)", equal, prefixes.size(), nonempty) +
                                        (first_miss.empty() ? "" : ", e.g. \"" + first_miss + "\"")};
}

Outcome mrr_lattice() {
  auto all = synth("bonds", 1200, 51);
  auto [train, test] = eval::split_by_date(all, CalendarDate{2019, 1, 1});
  auto sys = open_with("bonds", train);
  std::vector<std::string> queries;
  for (std::size_t i = 0; i < test.queries.size() && queries.size() < 150; ++i)
    queries.push_back(test.queries[i].text);
  eval::ParseCache cache(&sys->grammar());
  eval::EvalConfig cfg;
  auto r = eval::evaluate(
      [&](std::string_view p, std::size_t k) {
        std::vector<std::string> out;
        for (auto& c : sys->complete(p, k)) out.push_back(c.completion);
        return out;
      },
      queries, cfg, &cache);
  using P = eval::Predicate;
  bool ok = r[P::STR] <= r[P::BOW] && r[P::BOW] <= r[P::PBOW] && r[P::STR] <= r[P::PSTR] && r[P::PSEM] >= r[P::PSTR];
  return {ok, fmt("%zu train / %zu test; STR %.3f BOW %.3f PBOW %.3f SEM %.3f | PSTR %.3f PSEM %.3f", train.queries.size(),
                  queries.size(), r[P::STR], r[P::BOW], r[P::PBOW], r[P::SEM], r[P::PSTR], r[P::PSEM])};
}

Outcome time_shift_check() {
  const auto& g = grammar_of("bonds");
  static const char* months[] = {"january", "february", "march",     "april",   "may",      "june",
                                 "july",    "august",   "september", "october", "november", "december"};
  std::mt19937_64 rng(61);
  auto random_date = [&] {
    return civil_from_days(days_from_civil({1995, 1, 1}) + std::int64_t(rng() % (365 * 40)));
  };
  std::size_t ok = 0, clamped = 0;
  const std::size_t n = 1000;
  for (std::size_t i = 0; i < n; ++i) {
    CalendarDate tq = random_date(), now = random_date(), d = random_date();
    LoggedQuery q{"bonds maturing in " + std::string(months[d.month - 1]) + " " + std::to_string(d.day) + ", " +
                      std::to_string(d.year),
                  tq, 1};
    auto r = time_shift(g, q, now);
    auto parsed = grammar::best_parse(g, r.query.text);
    if (r.shifted != 1 || !parsed) continue;
    const ExactDate* e = nullptr;
    for (const auto& a : parsed->atoms)
      if ((e = std::get_if<ExactDate>(&a.atom.value))) break;
    if (!e) continue;
    CalendarDate s{e->year, e->month, e->day};
    auto months_of = [](const CalendarDate& c) { return c.year * 12 + c.month; };
    bool month_ok = months_of(s) - months_of(now) == months_of(d) - months_of(tq);
    bool day_ok = s.day - now.day == d.day - tq.day;
    if (!day_ok && r.clamped) {
      int last = grammar::days_in_month(s.month, s.year);
      day_ok = s.day == 1 || s.day == last;
      ++clamped;
    }
    ok += month_ok && day_ok;
  }
  LoggedQuery example{"bonds maturing between april 1, 2018 and may 30, 2020", {2018, 1, 1}, 1};
  auto shifted = time_shift(g, example, {2020, 1, 1}).query.text;
  bool example_ok = shifted == "bonds maturing between april 1, 2020 and may 30, 2022";
  return {ok == n && example_ok, fmt("%zu/%zu triples preserve the delta (%zu clamped); ", ok, n, clamped) + "\"" +
                                   shifted + "\""};
}

Outcome latency() {
  // 10^4 logged queries, each naming ten or more mostly distinct atoms
  std::mt19937_64 rng(71);
  static const char* fields[] = {"yield", "coupon", "amount outstanding", "price"};
  static const char* ops[] = {">", "<", ">=", "<="};
  static const char* units[] = {"pct", "pct", "usd", "eur"};
  static const char* months[] = {"january", "february", "march", "april", "may", "june",
                                 "july", "august", "september", "october", "november", "december"};
  LogCorpus log;
  for (std::size_t i = 0; i < 10000; ++i) {
    std::string q = "bonds";
    for (int a = 0; a < 7; ++a) {
      q += a ? " and " : " ";
      auto f = rng() % 4;
      q += std::string("with ") + fields[f] + " " + ops[rng() % 4] + " " + std::to_string(rng() % 100000) + "." +
           std::to_string(rng() % 10) + " " + units[f < 2 ? f : 2 + rng() % 2];
    }
    for (int a = 0; a < 5; ++a)
      q += std::string(" and maturing ") + (rng() % 2 ? "in " : "before ") + months[rng() % 12] + " " +
           std::to_string(1 + rng() % 28) + ", " + std::to_string(1990 + rng() % 80);
    log.queries.push_back({q, {2019, 1, 1}, 1 + rng() % 50});
  }
  auto t0 = Clock::now();
  auto sys = open_with("bonds", log);
  double build = seconds_since(t0);
  std::size_t atoms = sys->atoms().size();
  if (atoms < 100000) return {false, fmt("model has only %zu atoms", atoms)};
  std::vector<double> ms;
  std::map<std::string, std::size_t> overran;
  for (const auto& p : random_prefixes(log, 1000, 3, 72)) {
    auto s = Clock::now();
    auto r = sys->run(p);
    ms.push_back(std::chrono::duration<double, std::milli>(Clock::now() - s).count());
    for (const auto& e : r.overran) ++overran[e];
  }
  std::string cut;
  for (const auto& [e, n] : overran) cut += fmt(", %s over budget %zu times", e.c_str(), n);
  auto l = eval::summarize_latency(ms);
  return {l.p99 < 100 && l.mean < 20,
          fmt("%zu atoms, %zu queries (built in %.1f s); mean %.2f P90 %.2f P95 %.2f P99 %.2f ms", atoms,
              log.queries.size(), build, l.mean, l.p90, l.p95, l.p99) + cut};
}

Outcome completable_cases() {
  auto sys = System::open(bundle_path("equities"));
  const auto* t = sys->templates();
  auto has = [](const std::vector<Completion>& out, const std::string& s) {
    return std::any_of(out.begin(), out.end(), [&](const Completion& c) { return c.completion == s; });
  };
  auto i = grammar::completable_step("numeric", "2");
  bool case_i = i.kind == grammar::StepCase::IsPrefixOfParsable &&
                has(t->complete("market cap > 2", 10), "market cap > 2... usd");
  auto ii = grammar::completable_step("numeric", "2M u");
  bool case_ii = ii.kind == grammar::StepCase::PrefixParsed && ii.parsed == "2M" && ii.rest == "u" &&
                 has(t->complete("market cap > 2M u", 10), "market cap > 2M usd");
  auto iii = grammar::completable_step("numeric", "ibm's market c");
  bool case_iii = iii.kind == grammar::StepCase::Failure && t->complete("market cap > ibm's market c", 10).empty() &&
                  !sys->completability("market cap > ibm's market c").completable;
  return {case_i && case_ii && case_iii,
          fmt("case i %s, case ii %s, case iii %s", case_i ? "ok" : "no", case_ii ? "ok" : "no", case_iii ? "ok" : "no")};
}

}  // namespace

int main() {
  check("fixture-fidelity", fixture_fidelity);
  check("running-example", running_example);
  check("soundness", soundness);
  check("propositionality", propositionality);
  check("completeness", completeness);
  check("diversity", diversity);
  check("oracle-equivalence", oracle_equivalence);
  check("mrr-lattice", mrr_lattice);
  check("time-shift", time_shift_check);
  check("latency", latency);
  check("completable-cases", completable_cases);
  std::printf("%d failed\n", failures);
  return failures == 0 ? 0 : 1;
}
