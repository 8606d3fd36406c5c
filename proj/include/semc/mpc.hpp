#pragma once

// Most-popular completion: whole logged queries that extend the prefix.

#include <algorithm>
#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "semc/grammar/engine.hpp"
#include "semc/query_log.hpp"
#include "semc/util/binary_io.hpp"
#include "semc/util/prefix_trie.hpp"

namespace semc {

/// Token span of one atom, reduced to what typing needs.
struct TypedSpan {
  std::size_t begin = 0, end = 0;
  DiversificationType dtype;
  friend bool operator==(const TypedSpan&, const TypedSpan&) = default;
};

inline std::vector<TypedSpan> typed_spans(const Derivation& d) {
  std::vector<TypedSpan> out;
  for (const auto& a : d.atoms) out.push_back({a.begin, a.end, atom_type(a.atom)});
  return out;
}

/// The constraint being typed at token `typed - 1`: the atom covering it,
/// else the next atom, else the rightmost one.
inline DiversificationType type_at_cursor(const std::vector<TypedSpan>& spans, std::size_t typed) {
  if (spans.empty()) return {};
  std::size_t idx = typed == 0 ? 0 : typed - 1;
  for (const auto& s : spans)
    if (s.begin <= idx && idx < s.end) return s.dtype;
  const TypedSpan* next = nullptr;
  for (const auto& s : spans)
    if (s.begin >= idx && (!next || s.begin < next->begin)) next = &s;
  if (next) return next->dtype;
  const TypedSpan* last = &spans.front();
  for (const auto& s : spans)
    if (s.end >= last->end) last = &s;
  return last->dtype;
}

/// Trie key for a raw prefix: the normalized rendering plus the separator the
/// user has already typed after the last token.
inline std::string prefix_key(std::string_view raw) {
  auto tokens = text::tokenize(raw);
  std::string key = text::render(tokens);
  if (tokens.empty() || raw.empty()) return key;
  char c = raw.back();
  if (text::is_space(c))
    key += ' ';
  else if (c == '-')
    key += '-';
  return key;
}

struct MpcEntry {
  std::string text;  // first-seen surface
  std::string key;   // normalized
  std::uint64_t frequency = 0;
  Formula interpretation;
  std::vector<TypedSpan> spans;
};

struct MpcBuildStats {
  std::size_t queries = 0, indexed = 0, dropped = 0;
};

class MpcIndex {
 public:
  static constexpr std::string_view kMagic = "SEMCMPC";
  static constexpr std::uint32_t kVersion = 1;

  MpcIndex() : MpcIndex(std::vector<MpcEntry>{}) {}

  static MpcIndex build(const LogCorpus& corpus, const grammar::Grammar& g, MpcBuildStats* stats = nullptr) {
    MpcBuildStats st;
    std::map<std::string, std::size_t> by_key;
    std::vector<MpcEntry> entries;
    std::map<std::string, bool> parsed;  // key -> parsable, to skip reparsing duplicates
    for (const auto& q : corpus.queries) {
      ++st.queries;
      std::string key = text::normalize(q.text);
      if (auto it = by_key.find(key); it != by_key.end()) {
        entries[it->second].frequency += q.frequency;
        continue;
      }
      if (parsed.count(key)) {
        ++st.dropped;
        continue;
      }
      auto p = grammar::parse(g, q.text);
      if (p.empty() || p.front().derivation.atoms.empty()) {
        parsed[key] = false;
        ++st.dropped;
        continue;
      }
      MpcEntry e;
      e.text = q.text;
      e.key = key;
      e.frequency = q.frequency;
      e.interpretation = canonicalize(p.front().derivation.formula());
      e.spans = typed_spans(p.front().derivation);
      by_key[key] = entries.size();
      entries.push_back(std::move(e));
    }
    st.indexed = entries.size();
    if (stats) *stats = st;
    return MpcIndex(std::move(entries));
  }

  std::size_t size() const { return entries_.size(); }
  const std::vector<MpcEntry>& entries() const { return entries_; }

  /// Up to k logged queries extending p, most frequent first.
  std::vector<Completion> complete(std::string_view p, std::size_t k) const {
    std::vector<Completion> out;
    std::string key = prefix_key(p);
    if (key.empty()) return out;
    auto node = trie_.find(key);
    if (!node) return out;
    std::size_t typed = text::tokenize(p).size();
    for (auto id : trie_.candidates(*node)) {
      if (out.size() >= k) break;
      const auto& e = entries_[id];
      Completion c;
      c.completion = e.text;
      c.interpretation = e.interpretation;
      c.dtype = type_at_cursor(e.spans, typed);
      c.grade = Grade::High;
      c.score = static_cast<double>(e.frequency);
      c.source = "mpc";
      out.push_back(std::move(c));
    }
    return out;
  }

  void save(const std::string& path) const { snapshot().save(path); }

  util::BinaryWriter snapshot() const {
    util::BinaryWriter w(kMagic, kVersion);
    w.u64(entries_.size());
    for (const auto& e : entries_) {
      w.str(e.text);
      w.u64(e.frequency);
      w.str(serialize(e.interpretation));
      w.u64(e.spans.size());
      for (const auto& s : e.spans) {
        w.u64(s.begin);
        w.u64(s.end);
        w.str(s.dtype);
      }
    }
    return w;
  }

  static MpcIndex load(const std::string& path) { return from_bytes(util::BinaryReader::slurp(path), path); }

  static MpcIndex from_bytes(std::string bytes, const std::string& where = "mpc snapshot") {
    std::uint32_t version = 0;
    util::BinaryReader r(std::move(bytes), kMagic, &version, where);
    if (version != kVersion) throw Error(where + ": unsupported version " + std::to_string(version));
    std::vector<MpcEntry> entries(r.u64());
    for (auto& e : entries) {
      e.text = r.str();
      e.key = text::normalize(e.text);
      e.frequency = r.u64();
      e.interpretation = parse_formula(r.str());
      e.spans.resize(r.u64());
      for (auto& s : e.spans) {
        s.begin = r.u64();
        s.end = r.u64();
        s.dtype = r.str();
      }
    }
    if (!r.done()) throw Error(where + ": trailing bytes");
    return MpcIndex(std::move(entries));
  }

 private:
  explicit MpcIndex(std::vector<MpcEntry> entries) : entries_(std::move(entries)) {
    std::vector<std::string> keys;
    std::vector<std::uint32_t> ranked(entries_.size());
    for (std::uint32_t i = 0; i < entries_.size(); ++i) {
      keys.push_back(entries_[i].key);
      ranked[i] = i;
    }
    std::sort(ranked.begin(), ranked.end(), [&](auto a, auto b) {
      if (entries_[a].frequency != entries_[b].frequency) return entries_[a].frequency > entries_[b].frequency;
      return entries_[a].key < entries_[b].key;
    });
    trie_ = util::PrefixTrie<std::uint32_t>::build(keys, ranked);
  }

  std::vector<MpcEntry> entries_;
  util::PrefixTrie<std::uint32_t> trie_;
};

}  // namespace semc
