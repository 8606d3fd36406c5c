#pragma once

#include <algorithm>
#include <charconv>
#include <cstdint>
#include <fstream>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "semc/domain.hpp"
#include "semc/errors.hpp"
#include "semc/util/prefix_trie.hpp"
#include "semc/util/text.hpp"

namespace semc {

struct LexiconEntry {
  std::string display;  // surface as written in the source file
  std::vector<Token> tokens;
  std::string key;  // case-folded, single-space joined
  std::string target;
  std::vector<std::string> tags;  // sorted
  double weight = 0;

  bool has_tag(std::string_view t) const { return std::binary_search(tags.begin(), tags.end(), t); }
};

inline LexiconEntry make_entry(std::string_view surface, std::string target,
                               std::vector<std::string> tags = {}, double weight = 1) {
  LexiconEntry e;
  e.display = std::string(text::trim(surface));
  e.tokens = text::tokenize(e.display);
  e.key = text::join_key(e.tokens);
  e.target = std::move(target);
  std::sort(tags.begin(), tags.end());
  tags.erase(std::unique(tags.begin(), tags.end()), tags.end());
  e.tags = std::move(tags);
  e.weight = weight;
  return e;
}

struct Phrase {
  std::string text;
  std::uint64_t count = 0;
};

/// Line-delimited `phrase<TAB>count` records.
inline std::vector<Phrase> parse_phrase_list(std::string_view src, const std::string& where = "phrases") {
  std::vector<Phrase> out;
  std::size_t lineno = 0, pos = 0;
  while (pos <= src.size()) {
    auto nl = src.find('\n', pos);
    std::string_view line = src.substr(pos, nl == std::string_view::npos ? src.npos : nl - pos);
    pos = nl == std::string_view::npos ? src.size() + 1 : nl + 1;
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (text::trim(line).empty() || line.front() == '#') continue;
    auto cols = text::split(line, '\t');
    if (cols.size() != 2 || text::trim(cols[0]).empty())
      throw ParseError(where, lineno, 1, "expected phrase<TAB>count");
    Phrase p{std::string(text::trim(cols[0])), 0};
    auto c = text::trim(cols[1]);
    auto res = std::from_chars(c.data(), c.data() + c.size(), p.count);
    if (res.ec != std::errc{} || res.ptr != c.data() + c.size() || p.count == 0)
      throw ParseError(where, lineno, cols[0].size() + 2, "count must be a positive integer");
    out.push_back(std::move(p));
  }
  return out;
}

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

/// Entries in a character trie keyed on the joined surface. Views share the
/// entry storage of the lexicon they were derived from.
class Lexicon {
 public:
  using Trie = util::PrefixTrie<std::uint32_t>;

  Lexicon() : entries_(std::make_shared<std::vector<LexiconEntry>>()) {}

  static Lexicon from_entries(std::string name, std::vector<LexiconEntry> entries) {
    auto store = std::make_shared<std::vector<LexiconEntry>>(std::move(entries));
    std::vector<std::uint32_t> all(store->size());
    for (std::uint32_t i = 0; i < all.size(); ++i) all[i] = i;
    return Lexicon(std::move(name), std::move(store), std::move(all));
  }

  static Lexicon parse(std::string name, std::string_view src, const std::string& where = "lexicon") {
    std::vector<LexiconEntry> entries;
    std::size_t lineno = 0;
    std::size_t pos = 0;
    while (pos <= src.size()) {
      auto nl = src.find('\n', pos);
      std::string_view line = src.substr(pos, nl == std::string_view::npos ? src.npos : nl - pos);
      pos = nl == std::string_view::npos ? src.size() + 1 : nl + 1;
      ++lineno;
      if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
      if (text::trim(line).empty() || line.front() == '#') continue;
      auto cols = text::split(line, '\t');
      if (cols.size() != 4) throw ParseError(where, lineno, 1, "expected 4 tab-separated columns");
      if (text::trim(cols[0]).empty()) throw ParseError(where, lineno, 1, "empty surface");
      if (text::trim(cols[1]).empty()) throw ParseError(where, lineno, cols[0].size() + 2, "empty target");
      double w = 0;
      auto wcol = text::trim(cols[3]);
      auto res = std::from_chars(wcol.data(), wcol.data() + wcol.size(), w);
      if (res.ec != std::errc{} || res.ptr != wcol.data() + wcol.size() || w < 0)
        throw ParseError(where, lineno, cols[0].size() + cols[1].size() + cols[2].size() + 4,
                         "weight must be a non-negative number");
      std::vector<std::string> tags;
      for (auto& t : text::split(cols[2], ','))
        if (!text::trim(t).empty()) tags.emplace_back(text::trim(t));
      entries.push_back(make_entry(cols[0], std::string(text::trim(cols[1])), std::move(tags), w));
    }
    return from_entries(std::move(name), std::move(entries));
  }

  static Lexicon load(std::string name, const std::string& path) {
    return parse(std::move(name), read_file(path), path);
  }

  /// A phrase list read as a lexicon: every phrase targets `field`.
  static Lexicon from_phrases(std::string name, const std::vector<Phrase>& phrases,
                              const std::string& field) {
    std::vector<LexiconEntry> entries;
    entries.reserve(phrases.size());
    for (const auto& p : phrases)
      entries.push_back(make_entry(p.text, field, {}, static_cast<double>(p.count)));
    return from_entries(std::move(name), std::move(entries));
  }

  const std::string& name() const { return name_; }
  std::size_t size() const { return members_.size(); }
  bool empty() const { return members_.empty(); }

  /// i-th member in rank order (weight desc, then key).
  const LexiconEntry& at(std::size_t i) const { return (*entries_)[members_[i]]; }
  const Trie& trie() const { return trie_; }

  std::vector<const LexiconEntry*> prefix_match(std::string_view s, std::size_t limit) const {
    std::string key = text::normalize_key(s);
    if (!key.empty() && text::is_space(s.back())) key += ' ';
    std::vector<const LexiconEntry*> out;
    auto node = trie_.find(key);
    if (!node) return out;
    for (auto id : trie_.candidates(*node)) {
      if (out.size() >= limit) break;
      out.push_back(&at(id));
    }
    return out;
  }

  Lexicon derive_view(std::string name, const std::function<bool(const LexiconEntry&)>& pred) const {
    std::vector<std::uint32_t> keep;
    for (auto idx : members_)
      if (pred((*entries_)[idx])) keep.push_back(idx);
    return Lexicon(std::move(name), entries_, std::move(keep));
  }

  Lexicon sub_lexicon_by_type(const Domain& domain, const std::string& type) const {
    if (!domain.has_type(type))
      throw ConfigError("lexicon " + name_ + ": type " + type + " is not declared in the domain");
    return derive_view(name_ + "#" + type, [&](const LexiconEntry& e) {
      const std::string* t = domain.type_of_value(e.target);
      return t && *t == type;
    });
  }

 private:
  Lexicon(std::string name, std::shared_ptr<const std::vector<LexiconEntry>> entries,
          std::vector<std::uint32_t> members)
      : name_(std::move(name)), entries_(std::move(entries)), members_(std::move(members)) {
    const auto& es = *entries_;
    std::stable_sort(members_.begin(), members_.end(), [&](auto a, auto b) {
      if (es[a].weight != es[b].weight) return es[a].weight > es[b].weight;
      return es[a].key < es[b].key;
    });
    std::vector<std::string> keys;
    keys.reserve(members_.size());
    std::vector<std::uint32_t> ranked(members_.size());
    for (std::uint32_t i = 0; i < members_.size(); ++i) {
      keys.push_back(es[members_[i]].key);
      ranked[i] = i;
    }
    trie_ = Trie::build(keys, ranked);
  }

  std::string name_;
  std::shared_ptr<const std::vector<LexiconEntry>> entries_;
  std::vector<std::uint32_t> members_;
  Trie trie_;
};

/// Loads each lexicon source once and hands out shared, immutable instances.
class LexiconStore {
 public:
  std::shared_ptr<const Lexicon> load(const std::string& name, const std::string& path) {
    return get(path, [&] { return Lexicon::load(name, path); });
  }

  std::shared_ptr<const Lexicon> get(const std::string& key, const std::function<Lexicon()>& make) {
    std::lock_guard lock(mu_);
    auto it = by_key_.find(key);
    if (it != by_key_.end()) return it->second;
    auto lex = std::make_shared<const Lexicon>(make());
    by_key_.emplace(key, lex);
    return lex;
  }

 private:
  std::mutex mu_;
  std::map<std::string, std::shared_ptr<const Lexicon>> by_key_;
};

}  // namespace semc
