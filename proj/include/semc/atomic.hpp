#pragma once

// Atom-level completion. Offline, every atom occurrence in a log is counted
// together with the words to its left (its context). Online, the prefix is
// split into a parsed head and an unrecognized tail; the tail is looked up in
// the atom trie and the hits are ranked by how well their contexts fit the head.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "semc/grammar/engine.hpp"
#include "semc/lexicon.hpp"
#include "semc/query_log.hpp"
#include "semc/util/binary_io.hpp"
#include "semc/util/prefix_trie.hpp"

namespace semc {

struct AtomRecord {
  std::string display;  // surface of the first occurrence
  std::string key;      // normalized, single-space joined
  Atom atom;
  std::uint64_t count = 0;
  std::vector<std::pair<std::string, std::uint64_t>> context;  // in first-seen order
  DiversificationType dtype;
};

struct AtomBuildStats {
  std::size_t queries = 0, parsed = 0, skipped = 0, occurrences = 0;
};

class AtomModel {
 public:
  static constexpr std::string_view kMagic = "SEMCATOM";
  static constexpr std::uint32_t kVersion = 1;

  /// Accumulates records one occurrence at a time; `finish` freezes them.
  class Builder {
   public:
    void add(std::span<const Token> tokens, const AtomSpan& span, std::uint64_t weight) {
      std::vector<Token> surface(tokens.begin() + static_cast<std::ptrdiff_t>(span.begin),
                                 tokens.begin() + static_cast<std::ptrdiff_t>(span.end));
      if (surface.empty()) return;
      std::string key = text::join_key(surface);
      auto [it, fresh] = index_.emplace(key, records_.size());
      if (fresh) {
        surface.front().lead.clear();
        AtomRecord r;
        r.display = text::render_surface(surface);
        r.key = key;
        r.atom = span.atom;
        r.dtype = atom_type(span.atom);
        records_.push_back(std::move(r));
        ctx_index_.emplace_back();
      }
      auto& rec = records_[it->second];
      auto& ci = ctx_index_[it->second];
      rec.count += weight;
      for (std::size_t i = 0; i < span.begin; ++i) {
        const std::string& w = tokens[i].text;
        auto [cit, cfresh] = ci.emplace(w, rec.context.size());
        if (cfresh) rec.context.emplace_back(w, 0);
        rec.context[cit->second].second += weight;
      }
    }

    AtomModel finish() && { return AtomModel(std::move(records_)); }

   private:
    std::vector<AtomRecord> records_;
    std::unordered_map<std::string, std::size_t> index_;
    std::vector<std::unordered_map<std::string, std::size_t>> ctx_index_;
  };

  AtomModel() : AtomModel(std::vector<AtomRecord>{}) {}

  /// One scan over the log; each query's frequency weights all its increments.
  static AtomModel build(const LogCorpus& corpus, const grammar::Grammar& g, AtomBuildStats* stats = nullptr) {
    Builder b;
    AtomBuildStats st;
    for (const auto& q : corpus.queries) {
      ++st.queries;
      auto tokens = text::tokenize(q.text);
      auto parses = grammar::parse_tokens(g, tokens);
      if (parses.empty() || parses.front().derivation.atoms.empty()) {
        ++st.skipped;
        continue;
      }
      ++st.parsed;
      for (const auto& a : parses.front().derivation.atoms) {
        b.add(tokens, a, q.frequency);
        ++st.occurrences;
      }
    }
    if (stats) *stats = st;
    return std::move(b).finish();
  }

  /// Phrase-list variant: each phrase is a keyword atom on `field`, counted as
  /// listed; contexts come from the words preceding it in `documents`.
  static AtomModel from_phrases(const std::vector<Phrase>& phrases, const std::vector<std::string>& documents,
                                const std::string& field) {
    std::vector<AtomRecord> records;
    std::unordered_map<std::string, std::size_t> index;
    for (const auto& p : phrases) {
      auto tokens = text::tokenize(p.text);
      std::string key = text::join_key(tokens);
      if (key.empty()) continue;
      auto [it, fresh] = index.emplace(key, records.size());
      if (!fresh) {
        records[it->second].count += p.count;
        continue;
      }
      AtomRecord r;
      r.display = text::render_surface(tokens);
      r.key = key;
      r.atom = Atom{field, Op::Contains, StringValue{key}, false};
      r.dtype = atom_type(r.atom);
      r.count = p.count;
      records.push_back(std::move(r));
    }
    // first token -> records starting with it
    std::unordered_map<std::string, std::vector<std::size_t>> by_first;
    std::vector<std::vector<std::string>> words(records.size());
    for (std::size_t i = 0; i < records.size(); ++i) {
      for (auto& t : text::tokenize(records[i].key)) words[i].push_back(t.text);
      by_first[words[i].front()].push_back(i);
    }
    std::vector<std::unordered_map<std::string, std::size_t>> ctx(records.size());
    for (const auto& doc : documents) {
      auto toks = text::tokenize(doc);
      for (std::size_t s = 0; s < toks.size(); ++s) {
        auto it = by_first.find(toks[s].text);
        if (it == by_first.end()) continue;
        for (auto ri : it->second) {
          const auto& w = words[ri];
          if (s + w.size() > toks.size()) continue;
          bool match = true;
          for (std::size_t j = 0; j < w.size() && match; ++j) match = toks[s + j].text == w[j];
          if (!match) continue;
          auto& rec = records[ri];
          for (std::size_t i = 0; i < s; ++i) {
            auto [cit, fresh] = ctx[ri].emplace(toks[i].text, rec.context.size());
            if (fresh) rec.context.emplace_back(toks[i].text, 0);
            rec.context[cit->second].second += 1;
          }
        }
      }
    }
    return AtomModel(std::move(records));
  }

  static AtomModel from_records(std::vector<AtomRecord> records) { return AtomModel(std::move(records)); }

  std::size_t size() const { return records_.size(); }
  bool empty() const { return records_.empty(); }
  const std::vector<AtomRecord>& records() const { return records_; }
  const AtomRecord& at(std::size_t i) const { return records_[i]; }
  const util::PrefixTrie<std::uint32_t>& trie() const { return trie_; }

  const AtomRecord* find(std::string_view surface) const {
    auto it = index_.find(text::normalize_key(surface));
    return it == index_.end() ? nullptr : &records_[it->second];
  }

  std::optional<std::uint32_t> word_id(std::string_view w) const {
    auto it = vocab_.find(std::string(w));
    if (it == vocab_.end()) return std::nullopt;
    return it->second;
  }
  std::size_t vocabulary_size() const { return vocab_.size(); }

  /// C_A[w] for record i and vocabulary word id w.
  std::uint64_t context_count(std::size_t i, std::uint32_t w) const {
    const auto& v = ctx_[i];
    auto it = std::lower_bound(v.begin(), v.end(), w, [](const auto& p, std::uint32_t x) { return p.first < x; });
    return it != v.end() && it->first == w ? it->second : 0;
  }

  /// Number of atoms whose key extends `key` (including `key` itself).
  std::size_t matches(std::string_view key) const {
    auto n = trie_.find(key);
    return n ? trie_.candidates(*n).size() : 0;
  }

  /// The model in a readable, stable pseudo-JSON form.
  std::string dump() const {
    std::ostringstream out;
    out << "{";
    for (std::size_t i = 0; i < records_.size(); ++i) {
      const auto& r = records_[i];
      out << (i ? ",\n " : "") << "\"" << text::escape_json_like(r.display) << "\" := {\n";
      out << "   semantics := \"" << text::escape_json_like(serialize(r.atom)) << "\",\n";
      out << "   count := " << r.count << ",\n";
      out << "   context := {";
      for (std::size_t j = 0; j < r.context.size(); ++j)
        out << (j ? ", " : "") << "\"" << text::escape_json_like(r.context[j].first) << "\" := " << r.context[j].second;
      out << "}\n }";
    }
    out << "}\n";
    return out.str();
  }

  void save(const std::string& path) const { snapshot().save(path); }

  util::BinaryWriter snapshot() const {
    util::BinaryWriter w(kMagic, kVersion);
    w.u64(records_.size());
    for (const auto& r : records_) {
      w.str(r.display);
      w.str(serialize(r.atom));
      w.u64(r.count);
      w.u64(r.context.size());
      for (const auto& [word, c] : r.context) {
        w.str(word);
        w.u64(c);
      }
    }
    return w;
  }

  static AtomModel load(const std::string& path) { return from_bytes(util::BinaryReader::slurp(path), path); }

  static AtomModel from_bytes(std::string bytes, const std::string& where = "atom snapshot") {
    std::uint32_t version = 0;
    util::BinaryReader r(std::move(bytes), kMagic, &version, where);
    if (version != kVersion) throw Error(where + ": unsupported version " + std::to_string(version));
    std::vector<AtomRecord> records(r.u64());
    for (auto& rec : records) {
      rec.display = r.str();
      rec.key = text::normalize_key(rec.display);
      rec.atom = parse_atom(r.str());
      rec.dtype = atom_type(rec.atom);
      rec.count = r.u64();
      rec.context.resize(r.u64());
      for (auto& [word, c] : rec.context) {
        word = r.str();
        c = r.u64();
      }
    }
    if (!r.done()) throw Error(where + ": trailing bytes");
    return AtomModel(std::move(records));
  }

 private:
  explicit AtomModel(std::vector<AtomRecord> records) : records_(std::move(records)) {
    std::vector<std::string> keys;
    std::vector<std::uint32_t> ranked(records_.size());
    ctx_.resize(records_.size());
    for (std::uint32_t i = 0; i < records_.size(); ++i) {
      keys.push_back(records_[i].key);
      index_.emplace(records_[i].key, i);
      ranked[i] = i;
      for (const auto& [w, c] : records_[i].context) {
        auto [it, fresh] = vocab_.emplace(w, static_cast<std::uint32_t>(vocab_.size()));
        ctx_[i].emplace_back(it->second, c);
      }
      std::sort(ctx_[i].begin(), ctx_[i].end());
    }
    std::sort(ranked.begin(), ranked.end(), [&](auto a, auto b) {
      if (records_[a].count != records_[b].count) return records_[a].count > records_[b].count;
      return records_[a].key < records_[b].key;
    });
    trie_ = util::PrefixTrie<std::uint32_t>::build(keys, ranked);
  }

  std::vector<AtomRecord> records_;
  std::unordered_map<std::string, std::uint32_t> index_;
  std::unordered_map<std::string, std::uint32_t> vocab_;
  std::vector<std::vector<std::pair<std::uint32_t, std::uint64_t>>> ctx_;
  util::PrefixTrie<std::uint32_t> trie_;
};

// ---------------------------------------------------------------- online

struct ScoringParams {
  std::size_t n_max = 100000;        // candidates kept from the trie
  double backtrack_ratio = 10;       // R: required gain in trie matches per backtracked atom
  std::size_t ambiguity_threshold = 1;  // longer atoms extending the last one before it is reconsidered
  bool filter_repeated_type = true;
};

/// f(c) = ln(1 + c); h = identity.
inline double context_weight(std::uint64_t c) {
  static const auto table = [] {
    std::array<double, 4096> t{};
    for (std::size_t i = 0; i < t.size(); ++i) t[i] = std::log1p(static_cast<double>(i));
    return t;
  }();
  return c < table.size() ? table[c] : std::log1p(static_cast<double>(c));
}

/// The head's known words: distinct vocabulary ids, and for every word in
/// order the index of its id.
struct HeadWords {
  std::vector<std::uint32_t> ids;
  std::vector<std::uint32_t> order;
};

inline HeadWords head_words(const AtomModel& m, std::span<const Token> head) {
  HeadWords h;
  for (const auto& t : head) {
    auto w = m.word_id(t.text);
    if (!w) continue;
    auto it = std::find(h.ids.begin(), h.ids.end(), *w);
    if (it == h.ids.end()) it = h.ids.insert(it, *w);
    h.order.push_back(static_cast<std::uint32_t>(it - h.ids.begin()));
  }
  return h;
}

/// S(i_p, A): sum over the head's words of f(C_A[w]), in word order.
inline double score_atom(const AtomModel& m, std::size_t record, const HeadWords& head) {
  thread_local std::vector<double> weight;
  weight.resize(head.ids.size());
  for (std::size_t i = 0; i < head.ids.size(); ++i) weight[i] = context_weight(m.context_count(record, head.ids[i]));
  double s = 0;
  for (auto i : head.order) s += weight[i];
  return s;
}

inline double score_atom(const AtomModel& m, std::size_t record, std::span<const Token> head) {
  return score_atom(m, record, head_words(m, head));
}

/// How the head and the looked-up atom are joined.
struct AtomQuery {
  grammar::Decomposition dec;
  std::string key;        // looked up in the atom trie
  std::string connector;  // "", "and", "or" or ","
  bool usable = false;    // a non-empty key to look up
};

namespace detail {

inline bool is_connector(std::string_view w) { return w == "and" || w == "or" || w == ","; }

inline AtomQuery make_query(grammar::Decomposition dec) {
  AtomQuery q;
  auto rest = dec.remainder_tokens();
  std::size_t skip = 0;
  if (rest.size() >= 2 || (rest.size() == 1 && !dec.open)) {
    if (dec.m > 0 && is_connector(rest.front().text)) {
      q.connector = rest.front().text;
      skip = 1;
    }
  }
  auto tail = rest.subspan(skip);
  q.key = text::join_key(tail);
  if (!dec.open && !tail.empty()) q.key += ' ';
  q.usable = !tail.empty();
  q.dec = std::move(dec);
  return q;
}

}  // namespace detail

/// Decomposition plus the backtracking heuristics. Case A (nothing left over)
/// reconsiders the whole prefix when its last atom is the start of many longer
/// ones; case B gives atoms back while that multiplies the trie matches by R.
inline std::vector<AtomQuery> plan_atomic(const AtomModel& m, const grammar::Grammar& g, std::string_view p,
                                          const ScoringParams& params) {
  auto dec = grammar::decompose(g, p);
  std::vector<AtomQuery> out;
  if (dec.tokens.empty()) return out;
  const auto& atoms = dec.derivation.atoms;
  if (dec.remainder_empty()) {
    if (!dec.open || atoms.empty()) return out;
    const AtomSpan* last = &atoms.front();
    for (const auto& a : atoms)
      if (a.end >= last->end) last = &a;
    std::string last_key =
        text::join_key(std::span<const Token>(dec.tokens).subspan(last->begin, last->end - last->begin));
    std::size_t longer = m.matches(last_key) - (m.find(last_key) ? 1 : 0);
    if (longer <= params.ambiguity_threshold) return out;
    out.push_back(detail::make_query(grammar::backtrack(dec, atoms.size())));
    if (atoms.size() > 1) out.push_back(detail::make_query(grammar::backtrack(dec, 1)));
    return out;
  }
  auto best = detail::make_query(dec);
  std::size_t best_count = m.matches(best.key);
  for (std::size_t steps = 1; steps <= atoms.size(); ++steps) {
    auto cand = detail::make_query(grammar::backtrack(dec, steps));
    std::size_t c = m.matches(cand.key);
    bool better = best_count == 0 ? c > 0 : static_cast<double>(c) >= params.backtrack_ratio * double(best_count);
    if (!better) break;
    best = std::move(cand);
    best_count = c;
  }
  out.push_back(std::move(best));
  return out;
}

struct ScoredAtom {
  std::uint32_t record;
  double score;
};

/// Deterministic order inside a bucket: score, then count, then key.
inline bool better_atom(const AtomModel& m, const ScoredAtom& a, const ScoredAtom& b) {
  if (a.score != b.score) return a.score > b.score;
  const auto& ra = m.at(a.record);
  const auto& rb = m.at(b.record);
  if (ra.count != rb.count) return ra.count > rb.count;
  return ra.key < rb.key;
}

/// Renders head + connector + atom and its formula.
inline Completion assemble(const AtomModel& m, const AtomQuery& q, const ScoredAtom& s) {
  const auto& rec = m.at(s.record);
  Completion c;
  std::string head = q.dec.initial();
  c.completion = head;
  if (!q.connector.empty()) {
    c.completion += q.connector == "," ? "," : (head.empty() ? "" : " ") + q.connector;
  }
  if (!c.completion.empty()) c.completion += ' ';
  c.completion += rec.display;
  Derivation d = q.dec.derivation;
  AtomSpan span;
  span.atom = rec.atom;
  span.or_with_prev = q.connector == "or";
  d.atoms.push_back(span);
  c.interpretation = d.formula();
  c.dtype = rec.dtype;
  c.grade = q.dec.m == 0 || s.score > 0 ? Grade::High : Grade::Low;
  c.score = s.score;
  c.source = "atomic";
  return c;
}

/// True when the grammar reads `c.completion` exactly as `c.interpretation`.
inline bool reparses(const grammar::Grammar& g, const Completion& c) {
  auto b = grammar::best_parse(g, c.completion);
  return b && canonical_key(b->formula()) == canonical_key(c.interpretation);
}

/// Candidates for one planned split, after truncation and the type filter.
inline std::vector<ScoredAtom> atomic_candidates(const AtomModel& m, const AtomQuery& q, const ScoringParams& params) {
  std::vector<ScoredAtom> out;
  if (!q.usable) return out;
  auto node = m.trie().find(q.key);
  if (!node) return out;
  std::optional<DiversificationType> last_type;
  if (params.filter_repeated_type && q.connector != "or") last_type = rightmost_atom_type(q.dec.derivation);
  auto head = head_words(m, q.dec.initial_tokens());
  std::size_t taken = 0;
  for (auto id : m.trie().candidates(*node)) {
    if (taken++ >= params.n_max) break;
    if (last_type && m.at(id).dtype == *last_type) continue;
    out.push_back({id, score_atom(m, id, head)});
  }
  return out;
}

/// Buckets by type, each ranked, buckets ordered by their best member, then
/// dealt round-robin. Candidates that do not re-parse are skipped.
inline std::vector<Completion> weave_atoms(const AtomModel& m, const grammar::Grammar& g, const AtomQuery& q,
                                           std::vector<ScoredAtom> cands, std::size_t d) {
  std::map<DiversificationType, std::vector<ScoredAtom>> by_type;
  for (const auto& c : cands) by_type[m.at(c.record).dtype].push_back(c);
  auto better = [&](const auto& x, const auto& y) { return better_atom(m, x, y); };
  // only the head of each bucket is ordered up front; the rest on demand
  std::size_t ahead = std::max<std::size_t>(4 * d, 16);
  std::vector<std::vector<ScoredAtom>> buckets;
  std::vector<std::size_t> sorted;
  for (auto& [t, b] : by_type) {
    std::size_t k = std::min(ahead, b.size());
    std::partial_sort(b.begin(), b.begin() + static_cast<std::ptrdiff_t>(k), b.end(), better);
    sorted.push_back(k);
    buckets.push_back(std::move(b));
  }
  std::vector<std::size_t> rank(buckets.size());
  for (std::size_t i = 0; i < rank.size(); ++i) rank[i] = i;
  std::sort(rank.begin(), rank.end(),
            [&](std::size_t x, std::size_t y) { return better_atom(m, buckets[x].front(), buckets[y].front()); });
  std::vector<Completion> out;
  std::vector<std::size_t> next(buckets.size(), 0);
  bool progress = true;
  while (out.size() < d && progress) {
    progress = false;
    for (std::size_t b : rank) {
      if (out.size() >= d) break;
      auto& bucket = buckets[b];
      while (next[b] < bucket.size()) {
        if (next[b] == sorted[b]) {
          std::sort(bucket.begin() + static_cast<std::ptrdiff_t>(sorted[b]), bucket.end(), better);
          sorted[b] = bucket.size();
        }
        auto c = assemble(m, q, bucket[next[b]++]);
        if (!reparses(g, c)) continue;
        out.push_back(std::move(c));
        progress = true;
        break;
      }
    }
  }
  return out;
}

/// Top-d atomic completions of p.
inline std::vector<Completion> complete_atomic(const AtomModel& m, const grammar::Grammar& g, std::string_view p,
                                               std::size_t d, const ScoringParams& params = {}) {
  std::vector<Completion> out;
  if (d == 0 || m.empty()) return out;
  for (const auto& q : plan_atomic(m, g, p, params)) {
    auto part = weave_atoms(m, g, q, atomic_candidates(m, q, params), d);
    for (auto& c : part) {
      if (out.size() >= d) break;
      bool dup = std::any_of(out.begin(), out.end(), [&](const Completion& o) { return o.completion == c.completion; });
      if (!dup) out.push_back(std::move(c));
    }
    if (out.size() >= d) break;
  }
  return out;
}

}  // namespace semc
