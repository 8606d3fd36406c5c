#pragma once

// Full-query template completion: the template grammar is instantiated online
// up to the next mark; every output is checked against the QA grammar.

#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "semc/grammar/engine.hpp"

namespace semc {

struct TemplateParams {
  std::size_t cap = 100;  // raw candidates per call
  std::string substitution = "...";
};

/// The completion with every elided run removed, as the grammar would read it.
inline std::string without_substitution(std::string_view s, std::string_view sub) {
  std::string out(s);
  if (sub.empty()) return out;
  for (auto at = out.find(sub); at != std::string::npos; at = out.find(sub, at)) out.erase(at, sub.size());
  return out;
}

class TemplateEngine {
 public:
  /// `qa` is the full question-answering grammar used for verification; it
  /// may be the same object as `templates`.
  TemplateEngine(const grammar::Grammar& templates, const grammar::Grammar& qa, TemplateParams params = {})
      : templates_(&templates), qa_(&qa), params_(std::move(params)) {}

  std::vector<Completion> complete(std::string_view p, std::size_t d) const {
    std::vector<Completion> out;
    if (d == 0) return out;
    auto raw = grammar::enumerate_completions(*templates_, p, params_.cap);
    std::size_t index = 0;
    for (auto& e : raw) {
      if (out.size() >= d) break;
      if (e.derivation.atoms.empty() || repeats_atom(e.derivation)) continue;
      auto b = grammar::best_parse(*qa_, without_substitution(e.completion, params_.substitution));
      if (!b || canonical_key(b->formula()) != canonical_key(e.formula)) continue;
      Completion c;
      c.completion = std::move(e.completion);
      c.interpretation = std::move(e.formula);
      c.dtype = std::move(e.dtype);
      c.grade = Grade::Medium;
      c.score = -static_cast<double>(index++);
      c.source = "template";
      out.push_back(std::move(c));
    }
    return out;
  }

  const grammar::Grammar& templates() const { return *templates_; }

 private:
  static bool repeats_atom(const Derivation& d) {
    std::set<std::string> seen;
    for (const auto& a : d.atoms)
      if (!seen.insert(serialize(a.atom)).second) return true;
    return false;
  }

  const grammar::Grammar* templates_;
  const grammar::Grammar* qa_;
  TemplateParams params_;
};

}  // namespace semc
