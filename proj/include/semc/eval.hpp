#pragma once

// Predictiveness (reciprocal rank under several match predicates) and latency
// percentiles over every prefix of every test query.

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "json.hpp"

#include "semc/errors.hpp"
#include "semc/grammar/engine.hpp"
#include "semc/query_log.hpp"

namespace semc::eval {

enum class Predicate { STR, PSTR, BOW, PBOW, SEM, PSEM };
inline constexpr std::array<Predicate, 6> kAllPredicates{Predicate::STR, Predicate::PSTR, Predicate::BOW,
                                                         Predicate::PBOW, Predicate::SEM, Predicate::PSEM};

inline const char* predicate_name(Predicate p) {
  switch (p) {
    case Predicate::STR: return "STR";
    case Predicate::PSTR: return "PSTR";
    case Predicate::BOW: return "BOW";
    case Predicate::PBOW: return "PBOW";
    case Predicate::SEM: return "SEM";
    case Predicate::PSEM: return "PSEM";
  }
  return "?";
}

inline Predicate parse_predicate(std::string_view s) {
  for (auto p : kAllPredicates)
    if (text::to_lower(s) == text::to_lower(predicate_name(p))) return p;
  throw ConfigError("unknown predicate '" + std::string(s) + "'");
}

/// Parses of strings seen during evaluation, so that each is parsed once.
class ParseCache {
 public:
  explicit ParseCache(const grammar::Grammar* g) : g_(g) {}

  /// Canonical formula of s, or nothing when s does not parse.
  const std::optional<Formula>& formula(std::string_view s) {
    std::string key = text::normalize(s);
    std::lock_guard lk(mu_);
    auto it = cache_.find(key);
    if (it != cache_.end()) return it->second;
    std::optional<Formula> f;
    if (g_)
      if (auto d = grammar::best_parse(*g_, key)) f = canonicalize(d->formula());
    return cache_.emplace(key, std::move(f)).first->second;
  }

 private:
  const grammar::Grammar* g_;
  std::mutex mu_;
  std::unordered_map<std::string, std::optional<Formula>> cache_;
};

namespace detail {

inline std::multiset<std::string> words(std::string_view s) {
  std::multiset<std::string> out;
  for (auto& t : text::tokenize(s)) out.insert(t.text);
  return out;
}

inline bool multiset_includes(const std::multiset<std::string>& big, const std::multiset<std::string>& small) {
  return std::includes(big.begin(), big.end(), small.begin(), small.end());
}

inline std::vector<std::string> atom_keys(const Formula& f) {
  std::vector<std::string> out;
  for (const auto& a : atoms_of(f)) out.push_back(serialize(a));
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

}  // namespace detail

/// match(q, q') for the intended query q and a completion q'.
inline bool match(std::string_view q, std::string_view qc, Predicate pred, ParseCache* parses = nullptr) {
  switch (pred) {
    case Predicate::STR: return text::normalize(q) == text::normalize(qc);
    case Predicate::PSTR: {
      auto a = text::normalize(q), b = text::normalize(qc);
      return text::starts_with(a, b);
    }
    case Predicate::BOW: return detail::words(q) == detail::words(qc);
    case Predicate::PBOW: return detail::multiset_includes(detail::words(q), detail::words(qc));
    case Predicate::SEM:
    case Predicate::PSEM: {
      if (!parses) return false;
      const auto& fq = parses->formula(q);
      const auto& fc = parses->formula(qc);
      if (!fq || !fc) return false;
      if (pred == Predicate::SEM) return serialize(*fq) == serialize(*fc);
      auto aq = detail::atom_keys(*fq), ac = detail::atom_keys(*fc);
      return !ac.empty() && std::includes(aq.begin(), aq.end(), ac.begin(), ac.end());
    }
  }
  return false;
}

/// 1 / (1-based rank of the first match), or 0.
inline double reciprocal_rank(std::string_view q, const std::vector<std::string>& completions, Predicate pred,
                              ParseCache* parses = nullptr) {
  for (std::size_t i = 0; i < completions.size(); ++i)
    if (match(q, completions[i], pred, parses)) return 1.0 / double(i + 1);
  return 0;
}

/// Nearest-rank percentile (p in (0, 100]) of an unsorted sample.
inline double percentile(std::vector<double> xs, double p) {
  if (xs.empty()) return 0;
  std::sort(xs.begin(), xs.end());
  auto rank = static_cast<std::size_t>(std::ceil(p / 100.0 * double(xs.size())));
  rank = std::clamp<std::size_t>(rank, 1, xs.size());
  return xs[rank - 1];
}

struct LatencySummary {
  std::size_t samples = 0;
  double mean = 0, p90 = 0, p95 = 0, p99 = 0, max = 0;
};

inline LatencySummary summarize_latency(const std::vector<double>& ms) {
  LatencySummary s;
  s.samples = ms.size();
  if (ms.empty()) return s;
  double sum = 0;
  for (double x : ms) sum += x;
  s.mean = sum / double(ms.size());
  s.p90 = percentile(ms, 90);
  s.p95 = percentile(ms, 95);
  s.p99 = percentile(ms, 99);
  s.max = *std::max_element(ms.begin(), ms.end());
  return s;
}

enum class Averaging { Prefix, Query };

struct EvalConfig {
  std::size_t min_prefix = 3;
  std::size_t k = 10;
  std::vector<Predicate> predicates{kAllPredicates.begin(), kAllPredicates.end()};
  Averaging averaging = Averaging::Prefix;
};

struct LengthRow {
  std::size_t prefixes = 0;
  std::map<Predicate, double> mrr;
};

struct EvalReport {
  std::size_t queries = 0, prefixes = 0;
  std::map<Predicate, double> mrr;
  std::map<std::size_t, LengthRow> by_length;  // prefix length in characters
  LatencySummary latency;
  Averaging averaging = Averaging::Prefix;

  /// MRR under a predicate (0 if it was not evaluated).
  double operator[](Predicate p) const {
    auto it = mrr.find(p);
    return it == mrr.end() ? 0 : it->second;
  }
};

using System = std::function<std::vector<std::string>(std::string_view prefix, std::size_t k)>;

/// Every character prefix of length >= min_prefix of every test query goes
/// through `system`; only the call itself is timed.
inline EvalReport evaluate(const System& system, const std::vector<std::string>& test, const EvalConfig& cfg,
                           ParseCache* parses) {
  if (test.empty()) throw Error("evaluate: empty test set");
  if (cfg.min_prefix == 0) throw ConfigError("evaluate: min_prefix must be at least 1");
  EvalReport r;
  r.averaging = cfg.averaging;
  r.queries = test.size();
  std::vector<double> latency;
  std::map<Predicate, double> sum, query_sum;
  std::map<std::size_t, std::map<Predicate, double>> len_sum;
  std::size_t queries_with_prefixes = 0;
  for (const auto& q : test) {
    std::map<Predicate, double> per_query;
    std::size_t n = 0;
    for (std::size_t j = cfg.min_prefix; j <= q.size(); ++j) {
      std::string_view p(q.data(), j);
      auto t0 = std::chrono::steady_clock::now();
      auto out = system(p, cfg.k);
      auto t1 = std::chrono::steady_clock::now();
      latency.push_back(std::chrono::duration<double, std::milli>(t1 - t0).count());
      if (out.size() > cfg.k) out.resize(cfg.k);
      ++n;
      ++r.prefixes;
      ++r.by_length[j].prefixes;
      for (auto pred : cfg.predicates) {
        double rr = reciprocal_rank(q, out, pred, parses);
        sum[pred] += rr;
        per_query[pred] += rr;
        len_sum[j][pred] += rr;
      }
    }
    if (n == 0) continue;
    ++queries_with_prefixes;
    for (auto pred : cfg.predicates) query_sum[pred] += per_query[pred] / double(n);
  }
  for (auto pred : cfg.predicates) {
    if (cfg.averaging == Averaging::Prefix)
      r.mrr[pred] = r.prefixes ? sum[pred] / double(r.prefixes) : 0;
    else
      r.mrr[pred] = queries_with_prefixes ? query_sum[pred] / double(queries_with_prefixes) : 0;
  }
  for (auto& [len, row] : r.by_length)
    for (auto pred : cfg.predicates) row.mrr[pred] = len_sum[len][pred] / double(row.prefixes);
  r.latency = summarize_latency(latency);
  return r;
}

/// Later queries not seen earlier: train = before `cutoff`, test = on or
/// after it and absent (after normalization) from train.
inline std::pair<LogCorpus, LogCorpus> split_by_date(const LogCorpus& all, const CalendarDate& cutoff) {
  LogCorpus train, test;
  train.domain = test.domain = all.domain;
  std::set<std::string> seen;
  for (const auto& q : all.queries)
    if (q.t_q < cutoff) {
      train.queries.push_back(q);
      seen.insert(text::normalize(q.text));
    }
  for (const auto& q : all.queries)
    if (!(q.t_q < cutoff) && !seen.count(text::normalize(q.text))) test.queries.push_back(q);
  return {std::move(train), std::move(test)};
}

inline nlohmann::json latency_json(const LatencySummary& l) {
  return {{"samples", l.samples}, {"mean_ms", l.mean}, {"p90_ms", l.p90},
          {"p95_ms", l.p95},      {"p99_ms", l.p99},   {"max_ms", l.max}};
}

inline nlohmann::json to_json(const EvalReport& r) {
  nlohmann::json j;
  j["version"] = 1;
  j["queries"] = r.queries;
  j["prefixes"] = r.prefixes;
  j["averaging"] = r.averaging == Averaging::Prefix ? "prefix" : "query";
  for (auto& [p, v] : r.mrr) j["mrr"][predicate_name(p)] = v;
  for (auto& [len, row] : r.by_length) {
    nlohmann::json jr{{"length", len}, {"prefixes", row.prefixes}};
    for (auto& [p, v] : row.mrr) jr["mrr"][predicate_name(p)] = v;
    j["by_length"].push_back(jr);
  }
  j["latency"] = latency_json(r.latency);
  return j;
}

}  // namespace semc::eval
