#pragma once

#include <algorithm>
#include <optional>
#include <random>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <tuple>
#include <vector>

#include "semc/errors.hpp"
#include "semc/grammar/ast.hpp"
#include "semc/grammar/loader.hpp"
#include "semc/grammar/values.hpp"
#include "semc/grammar/walker.hpp"

namespace semc::grammar {

// ---------------------------------------------------------------- parsing

struct ParseResult {
  Derivation derivation;
  std::size_t consumed = 0;
};

namespace detail {

inline std::size_t covered(const std::vector<AtomSpan>& atoms) {
  std::size_t c = 0;
  for (const auto& a : atoms) c += a.end - a.begin;
  return c;
}

inline std::vector<ParseResult> rank(const std::vector<RawParse>& raw, std::span<const Token> tokens) {
  struct Keyed {
    std::size_t consumed, atoms, covered;
    std::string canon;
    std::vector<std::pair<std::size_t, std::size_t>> spans;
    const RawParse* src;
  };
  std::vector<Keyed> keyed;
  std::set<std::pair<std::string, std::vector<std::pair<std::size_t, std::size_t>>>> seen;
  for (const auto& r : raw) {
    Derivation d{std::vector<Token>(tokens.begin(), tokens.begin() + static_cast<std::ptrdiff_t>(r.consumed)),
                 r.atoms};
    Keyed k{r.consumed, r.atoms.size(), covered(r.atoms), canonical_key(d.formula()), {}, &r};
    for (const auto& a : r.atoms) k.spans.emplace_back(a.begin, a.end);
    if (!seen.emplace(k.canon, k.spans).second) continue;
    keyed.push_back(std::move(k));
  }
  std::stable_sort(keyed.begin(), keyed.end(), [](const Keyed& a, const Keyed& b) {
    if (a.consumed != b.consumed) return a.consumed > b.consumed;
    if (a.atoms != b.atoms) return a.atoms < b.atoms;
    if (a.canon != b.canon) return a.canon < b.canon;
    if (a.covered != b.covered) return a.covered > b.covered;
    return a.spans < b.spans;
  });
  std::vector<ParseResult> out;
  for (const auto& k : keyed) {
    ParseResult pr;
    pr.consumed = k.consumed;
    pr.derivation.tokens.assign(tokens.begin(), tokens.begin() + static_cast<std::ptrdiff_t>(k.consumed));
    pr.derivation.atoms = k.src->atoms;
    out.push_back(std::move(pr));
  }
  return out;
}

}  // namespace detail

/// All complete parses, best first: fewest atoms, then canonical text.
inline std::vector<ParseResult> parse_tokens(const Grammar& g, std::span<const Token> tokens,
                                             const WalkLimits& lim = {}) {
  if (tokens.empty()) return {};
  Walker w(g, tokens, false, Mode::Parse, lim);
  w.run();
  return detail::rank(w.parses(), tokens);
}

inline std::vector<ParseResult> parse(const Grammar& g, std::string_view query, const WalkLimits& lim = {}) {
  auto tokens = text::tokenize(query);
  return parse_tokens(g, tokens, lim);
}

inline std::optional<Derivation> best_parse(const Grammar& g, std::string_view query,
                                            const WalkLimits& lim = {}) {
  auto r = parse(g, query, lim);
  if (r.empty() || r.front().derivation.atoms.empty()) return std::nullopt;
  return std::move(r.front().derivation);
}

// ---------------------------------------------------------------- decomposition

/// p split into a fully parsed head i_p (tokens [0, m)) and the rest r_p.
struct Decomposition {
  std::vector<Token> tokens;
  bool open = false;  // the last token may be unfinished
  std::size_t m = 0;
  Derivation derivation;  // over tokens [0, m)

  Formula semantics() const { return derivation.formula(); }
  std::span<const Token> initial_tokens() const { return {tokens.data(), m}; }
  std::span<const Token> remainder_tokens() const { return {tokens.data() + m, tokens.size() - m}; }
  bool remainder_empty() const { return m == tokens.size(); }

  std::string initial() const { return text::render_surface(initial_tokens()); }
  std::string separator() const { return m > 0 && m < tokens.size() ? tokens[m].lead : ""; }
  std::string remainder() const {
    std::vector<Token> rest(tokens.begin() + static_cast<std::ptrdiff_t>(m), tokens.end());
    if (!rest.empty()) rest.front().lead.clear();
    return text::render_surface(rest);
  }
  /// Lookup key for the atom trie; a closed final token keeps its separator.
  std::string remainder_key() const {
    auto key = text::join_key(remainder_tokens());
    if (!open && !remainder_empty()) key += ' ';
    return key;
  }
  std::string joined() const { return initial() + separator() + remainder(); }
};

inline Decomposition decompose(const Grammar& g, std::string_view p, const WalkLimits& lim = {}) {
  Decomposition d;
  d.tokens = text::tokenize(p);
  d.open = text::ends_mid_token(p);
  if (d.tokens.empty()) return d;
  Walker w(g, d.tokens, false, Mode::Decompose, lim);
  w.run();
  auto ranked = detail::rank(w.parses(), d.tokens);
  if (!ranked.empty()) {
    d.m = ranked.front().consumed;
    d.derivation = std::move(ranked.front().derivation);
  }
  return d;
}

/// Hands the tokens of the rightmost `steps` atoms back to the remainder.
inline Decomposition backtrack(const Decomposition& d, std::size_t steps) {
  if (steps > d.derivation.atoms.size())
    throw Error("cannot backtrack " + std::to_string(steps) + " atoms out of " +
                std::to_string(d.derivation.atoms.size()));
  if (steps == 0) return d;
  auto atoms = d.derivation.atoms;
  std::stable_sort(atoms.begin(), atoms.end(), [](const AtomSpan& a, const AtomSpan& b) { return a.end < b.end; });
  std::size_t m = d.m;
  for (std::size_t i = atoms.size() - steps; i < atoms.size(); ++i) m = std::min(m, atoms[i].begin);
  Decomposition out;
  out.tokens = d.tokens;
  out.open = d.open;
  out.m = m;
  out.derivation.tokens.assign(d.tokens.begin(), d.tokens.begin() + static_cast<std::ptrdiff_t>(m));
  for (const auto& a : d.derivation.atoms)
    if (a.end <= m) out.derivation.atoms.push_back(a);
  if (!out.derivation.atoms.empty()) out.derivation.atoms.front().or_with_prev = false;
  return out;
}

// ---------------------------------------------------------------- enumeration

struct Enumerated {
  std::string completion;
  Formula formula;
  DiversificationType dtype;
  Derivation derivation;
};

/// Type of the constraint being typed at the last typed token: the atom
/// covering it, else the first atom after it, else the rightmost atom.
inline DiversificationType cursor_type(const Derivation& d, std::size_t typed_tokens) {
  if (d.atoms.empty()) return {};
  std::size_t idx = typed_tokens == 0 ? 0 : typed_tokens - 1;
  if (auto t = type_at(d, idx)) return *t;
  for (const auto& a : d.atoms)
    if (a.begin >= idx) return atom_type(a.atom);
  return *rightmost_atom_type(d);
}

inline std::vector<Enumerated> enumerate_completions(const Grammar& g, std::string_view p, std::size_t limit,
                                                     WalkLimits lim = {}) {
  auto tokens = text::tokenize(p);
  lim.max_results = limit;
  Walker w(g, tokens, text::ends_mid_token(p), Mode::Enumerate, lim);
  w.run();
  std::vector<Enumerated> out;
  std::set<std::pair<std::string, std::string>> seen;
  for (const auto& e : w.emitted()) {
    Enumerated r;
    r.derivation = Derivation{e.tokens, e.atoms};
    r.completion = text::render_surface(e.tokens);
    r.formula = r.derivation.formula();
    if (!seen.emplace(r.completion, canonical_key(r.formula)).second) continue;
    r.dtype = cursor_type(r.derivation, tokens.size());
    out.push_back(std::move(r));
  }
  return out;
}

// ---------------------------------------------------------------- completable

enum class StepCase { PrefixParsed, IsPrefixOfParsable, Failure };

struct StepResult {
  StepCase kind = StepCase::Failure;
  std::string parsed;  // PrefixParsed: the understood prefix, as typed
  std::string rest;    // PrefixParsed: what is left for the rest of the template
  std::string substitution;  // IsPrefixOfParsable
};

/// The three outcomes of handing `s` to a completable sub-parser.
inline StepResult completable_step(std::string_view parser, std::string_view s, std::string_view sub = "...") {
  auto canon = detail::canonical_parser(parser);
  if (!canon) throw ConfigError("unknown parser '" + std::string(parser) + "'");
  auto toks = text::tokenize(s);
  bool open = text::ends_mid_token(s);
  StepResult r;
  if (toks.empty()) {
    r.kind = StepCase::IsPrefixOfParsable;
    r.substitution = sub;
    return r;
  }
  auto parsed = [&](std::size_t len) {
    r.kind = StepCase::PrefixParsed;
    r.parsed = std::string(s.substr(toks[0].raw_begin, toks[len - 1].raw_end - toks[0].raw_begin));
    r.rest = std::string(text::trim(s.substr(toks[len - 1].raw_end)));
    return r;
  };
  auto prefix = [&] {
    r.kind = StepCase::IsPrefixOfParsable;
    r.substitution = sub;
    return r;
  };
  if (*canon == "numeric") {
    const Token& t = toks[0];
    if (toks.size() == 1 && open) return is_number_prefix(t.text) ? prefix() : r;
    if (parse_number(t.text)) return parsed(1);
    return r;
  }
  auto ms = match_dates(toks, 0, open, true);
  std::size_t best = 0;
  bool incomplete = false;
  for (const auto& m : ms) {
    if (!m.complete) {
      incomplete = true;
      continue;
    }
    bool unfinished = m.len == toks.size() && open;
    if (unfinished)
      incomplete = true;
    else
      best = std::max(best, m.len);
  }
  if (best > 0) return parsed(best);
  if (incomplete) return prefix();
  return r;
}

// ---------------------------------------------------------------- completability

struct Completability {
  bool completable = true;
  std::size_t fail_at = std::string_view::npos;  // first dead character
};

inline bool completable_prefix(const Grammar& g, std::string_view p, const WalkLimits& lim = {}) {
  auto tokens = text::tokenize(p);
  if (tokens.empty()) return true;
  Walker w(g, tokens, text::ends_mid_token(p), Mode::Analyze, lim);
  w.run();
  return w.succeeded();
}

inline Completability completability(const Grammar& g, std::string_view p, const WalkLimits& lim = {}) {
  if (completable_prefix(g, p, lim)) return {};
  // the empty prefix is completable, p is not: find the shortest dead prefix
  std::size_t lo = 0, hi = p.size();
  while (hi - lo > 1) {
    std::size_t mid = lo + (hi - lo) / 2;
    if (completable_prefix(g, p.substr(0, mid), lim))
      lo = mid;
    else
      hi = mid;
  }
  return {false, hi - 1};
}

// ---------------------------------------------------------------- sampling

/// One random sentence of the grammar, or nothing after `attempts` dead ends.
inline std::optional<Emitted> sample(const Grammar& g, std::mt19937_64& rng, int attempts = 50,
                                     WalkLimits lim = {}) {
  for (int i = 0; i < attempts; ++i) {
    Walker w(g, {}, false, Mode::Sample, lim, &rng);
    w.run();
    if (!w.emitted().empty() && !w.emitted().front().atoms.empty()) return w.emitted().front();
  }
  return std::nullopt;
}

}  // namespace semc::grammar
