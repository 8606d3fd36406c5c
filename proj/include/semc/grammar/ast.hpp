#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "semc/domain.hpp"
#include "semc/lexicon.hpp"
#include "semc/semantics.hpp"

namespace semc::grammar {

using NodeId = std::uint32_t;

/// What a lexicon hit contributes to the atom under construction.
enum class Role { None, Field, Value, Unit, Op, Atom, Count, TimeUnit, Keyword };

/// Zero-width semantic action, written `{field=X, op=<=, negate, or}`.
struct Action {
  std::optional<std::string> field;
  std::optional<Op> op;
  std::optional<std::string> unit;
  std::optional<std::string> value;  // enum value id
  bool negate = false;
  bool disjoin = false;  // next atom joins the previous one with OR
};

struct Node {
  enum class Kind {
    Lit,          // one or more literal tokens
    Seq,
    Alt,
    Opt,
    Ref,          // production reference
    Lex,          // lexicon lookup
    Star,         // kids[0] element, kids[1] separator (optional)
    Plus,
    CompatValue,  // restrict the next value lookup to the field's enum type
    CompatUnit,   // restrict the next unit lookup to the field's units
    Completable,  // sub-parser for infinite value spaces
    Mark,         // atom boundary
    Action,
    Empty,
  };
  Kind kind = Kind::Empty;
  std::vector<Token> lit;
  std::vector<NodeId> kids;
  std::string name;  // Ref: production; Lex: lexicon; Completable: parser id
  int target = -1;   // resolved production or lexicon index
  Role role = Role::None;
  std::string sub;  // Completable substitution string
  grammar::Action action;
  std::size_t line = 0, col = 0;
  std::string file;
};

struct Production {
  std::string name;
  NodeId body = 0;
  std::size_t line = 0, col = 0;
  std::string file;
};

/// A loaded, validated grammar. Immutable once built; share it freely.
struct Grammar {
  std::shared_ptr<const Domain> domain;
  std::vector<Node> nodes;
  std::vector<Production> productions;
  std::map<std::string, int> production_index;
  std::vector<std::shared_ptr<const Lexicon>> lexicons;
  std::map<std::string, int> lexicon_index;
  int root = -1;
  std::string source;
  std::vector<std::string> warnings;

  // lexicon index -> enum type -> view, for lookups behind compatible-value()
  std::map<int, std::map<std::string, std::shared_ptr<const Lexicon>>> typed_values;
  // lexicon index -> numeric field -> view, for lookups behind compatible-unit()
  std::map<int, std::map<std::string, std::shared_ptr<const Lexicon>>> field_units;
  // parsed targets of atom-role entries
  std::unordered_map<std::string, Atom> atom_targets;

  const Node& node(NodeId id) const { return nodes[id]; }
  const Lexicon& lexicon(int idx) const { return *lexicons[static_cast<std::size_t>(idx)]; }
  const Production& root_production() const { return productions[static_cast<std::size_t>(root)]; }
};

}  // namespace semc::grammar
