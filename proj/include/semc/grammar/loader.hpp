#pragma once

// Grammar definition files.
//
//   domain "domain.txt";
//   lexicon companies "lex/companies.tsv";
//   lexicon topics "phrases.tsv" phrases KEYWORDS;
//   view adjectives = values where tag adj and not tag rare;
//   include "qa.g";
//   root query;
//   issuer := @companies:value {field=ISSUING_COMPANY} "bonds"? mark;
//
// Expressions: "literal", (grouping), e?, a | b, @lexicon[:role], production
// references, mark, eps, star(e, sep), plus(e, sep), compatible-value(),
// compatible-unit(), completable(numeric, "..."), {field=F, op=<=, negate}.

#include <cctype>
#include <charconv>
#include <filesystem>
#include <functional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "semc/errors.hpp"
#include "semc/grammar/ast.hpp"
#include "semc/lexicon.hpp"

namespace semc::grammar {

namespace detail {

struct Lexeme {
  enum Kind { Ident, String, Sym, End } kind = End;
  std::string text;
  std::size_t line = 1, col = 1;
};

class Lexer {
 public:
  Lexer(std::string_view src, std::string file) : src_(src), file_(std::move(file)) {}

  Lexeme next() {
    skip();
    Lexeme lx;
    lx.line = line_;
    lx.col = col_;
    if (i_ >= src_.size()) return lx;
    char c = src_[i_];
    if (c == '"') {
      lx.kind = Lexeme::String;
      bump();
      while (i_ < src_.size() && src_[i_] != '"') {
        if (src_[i_] == '\n') throw ParseError(file_, lx.line, lx.col, "unterminated string");
        if (src_[i_] == '\\' && i_ + 1 < src_.size()) bump();
        lx.text.push_back(src_[i_]);
        bump();
      }
      if (i_ >= src_.size()) throw ParseError(file_, lx.line, lx.col, "unterminated string");
      bump();
      return lx;
    }
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
      lx.kind = Lexeme::Ident;
      while (i_ < src_.size()) {
        char d = src_[i_];
        bool word = std::isalnum(static_cast<unsigned char>(d)) || d == '_' || d == '.';
        bool hyphen = d == '-' && i_ + 1 < src_.size() &&
                      (std::isalnum(static_cast<unsigned char>(src_[i_ + 1])) || src_[i_ + 1] == '_');
        if (!word && !hyphen) break;
        lx.text.push_back(d);
        bump();
      }
      return lx;
    }
    if (std::isdigit(static_cast<unsigned char>(c)) || (c == '-' && i_ + 1 < src_.size() &&
                                                        std::isdigit(static_cast<unsigned char>(src_[i_ + 1])))) {
      lx.kind = Lexeme::Ident;
      lx.text.push_back(c);
      bump();
      while (i_ < src_.size() && std::isdigit(static_cast<unsigned char>(src_[i_]))) {
        lx.text.push_back(src_[i_]);
        bump();
      }
      return lx;
    }
    static constexpr std::string_view two[] = {":=", "<=", ">=", "!="};
    for (auto t : two) {
      if (src_.substr(i_, 2) == t) {
        lx.kind = Lexeme::Sym;
        lx.text = std::string(t);
        bump();
        bump();
        return lx;
      }
    }
    if (std::string_view(";|()?@:,{}=<>").find(c) != std::string_view::npos) {
      lx.kind = Lexeme::Sym;
      lx.text = std::string(1, c);
      bump();
      return lx;
    }
    throw ParseError(file_, line_, col_, std::string("unexpected character '") + c + "'");
  }

 private:
  void bump() {
    if (src_[i_] == '\n') {
      ++line_;
      col_ = 1;
    } else {
      ++col_;
    }
    ++i_;
  }
  void skip() {
    while (i_ < src_.size()) {
      if (std::isspace(static_cast<unsigned char>(src_[i_]))) {
        bump();
      } else if (src_[i_] == '#') {
        while (i_ < src_.size() && src_[i_] != '\n') bump();
      } else {
        break;
      }
    }
  }

  std::string_view src_;
  std::string file_;
  std::size_t i_ = 0, line_ = 1, col_ = 1;
};

inline std::optional<Role> parse_role(std::string_view s) {
  if (s == "field") return Role::Field;
  if (s == "value") return Role::Value;
  if (s == "unit") return Role::Unit;
  if (s == "op") return Role::Op;
  if (s == "atom") return Role::Atom;
  if (s == "count") return Role::Count;
  if (s == "time-unit") return Role::TimeUnit;
  if (s == "keyword") return Role::Keyword;
  if (s == "none") return Role::None;
  return std::nullopt;
}

inline std::optional<std::string> canonical_parser(std::string_view s) {
  if (s == "numeric" || s == "numeric-parser") return "numeric";
  if (s == "date" || s == "date-parser") return "date";
  return std::nullopt;
}

class Loader {
 public:
  explicit Loader(LexiconStore& store) : store_(store) {}

  Grammar load_file(const std::string& path) {
    load_into(path, /*top=*/true);
    return finish();
  }

  Grammar load_source(std::string_view src, const std::string& name, const std::string& base_dir) {
    parse_file(src, name, base_dir, /*top=*/true);
    return finish();
  }

 private:
  struct PendingProd {
    std::string name;
    NodeId body;
    std::size_t line, col;
    std::string file;
    bool top;
  };

  void load_into(const std::string& path, bool top) {
    auto abs = std::filesystem::weakly_canonical(path).string();
    if (!visiting_.insert(abs).second) return;  // include cycles are no-ops
    std::string src;
    try {
      src = read_file(path);
    } catch (const ConfigError&) {
      throw ConfigError("cannot open grammar file " + path);
    }
    parse_file(src, path, std::filesystem::path(path).parent_path().string(), top);
  }

  void parse_file(std::string_view src, const std::string& file, const std::string& dir, bool top) {
    Lexer lx(src, file);
    file_ = file;
    dir_ = dir;
    lexer_ = &lx;
    advance();
    while (cur_.kind != Lexeme::End) statement(top);
  }

  void advance() { cur_ = lexer_->next(); }

  [[noreturn]] void fail(const Lexeme& at, const std::string& msg) const {
    throw ParseError(file_, at.line, at.col, msg);
  }

  bool is_sym(std::string_view s) const { return cur_.kind == Lexeme::Sym && cur_.text == s; }
  bool is_word(std::string_view s) const { return cur_.kind == Lexeme::Ident && cur_.text == s; }

  void expect_sym(std::string_view s) {
    if (!is_sym(s)) fail(cur_, "expected '" + std::string(s) + "'");
    advance();
  }
  std::string expect_ident() {
    if (cur_.kind != Lexeme::Ident) fail(cur_, "expected identifier");
    std::string t = cur_.text;
    advance();
    return t;
  }
  std::string expect_string() {
    if (cur_.kind != Lexeme::String) fail(cur_, "expected string");
    std::string t = cur_.text;
    advance();
    return t;
  }

  std::string resolve_path(const std::string& rel) const {
    std::filesystem::path p(rel);
    if (p.is_absolute() || dir_.empty()) return p.string();
    return (std::filesystem::path(dir_) / p).string();
  }

  void statement(bool top) {
    Lexeme at = cur_;
    if (cur_.kind != Lexeme::Ident) fail(cur_, "expected a statement");
    std::string word = cur_.text;
    advance();
    if (word == "domain" && cur_.kind == Lexeme::String) {
      auto path = resolve_path(expect_string());
      expect_sym(";");
      if (!domain_) domain_ = std::make_shared<const Domain>(Domain::load(path));
      return;
    }
    if (word == "lexicon" && cur_.kind == Lexeme::Ident) {
      auto name = expect_ident();
      auto path = resolve_path(expect_string());
      std::shared_ptr<const Lexicon> lex;
      if (is_word("phrases")) {
        advance();
        auto field = expect_ident();
        lex = store_.get(path + "|phrases|" + field, [&] {
          return Lexicon::from_phrases(name, parse_phrase_list(read_file(path), path), field);
        });
      } else {
        lex = store_.load(name, path);
      }
      expect_sym(";");
      add_lexicon(at, name, std::move(lex));
      return;
    }
    if (word == "view" && cur_.kind == Lexeme::Ident) {
      auto name = expect_ident();
      expect_sym("=");
      Lexeme base_at = cur_;
      auto base = expect_ident();
      auto it = lex_index_.find(base);
      if (it == lex_index_.end()) fail(base_at, "unknown lexicon '" + base + "'");
      if (!is_word("where")) fail(cur_, "expected 'where'");
      advance();
      std::vector<std::function<bool(const LexiconEntry&)>> preds;
      while (true) {
        bool neg = false;
        if (is_word("not")) {
          neg = true;
          advance();
        }
        Lexeme kat = cur_;
        auto kind = expect_ident();
        auto arg = expect_ident();
        std::function<bool(const LexiconEntry&)> p;
        if (kind == "tag") {
          p = [arg](const LexiconEntry& e) { return e.has_tag(arg); };
        } else if (kind == "target") {
          p = [arg](const LexiconEntry& e) { return e.target == arg; };
        } else if (kind == "type") {
          auto dom = domain_;
          if (!dom) fail(kat, "type predicate needs a domain declaration first");
          if (!dom->has_type(arg)) fail(kat, "unknown type '" + arg + "'");
          p = [dom, arg](const LexiconEntry& e) {
            auto* t = dom->type_of_value(e.target);
            return t && *t == arg;
          };
        } else {
          fail(kat, "unknown predicate '" + kind + "'");
        }
        if (neg) p = [p](const LexiconEntry& e) { return !p(e); };
        preds.push_back(std::move(p));
        if (!is_word("and")) break;
        advance();
      }
      expect_sym(";");
      auto view = std::make_shared<const Lexicon>(
          lexicons_[static_cast<std::size_t>(it->second)]->derive_view(name, [&](const LexiconEntry& e) {
            for (auto& p : preds)
              if (!p(e)) return false;
            return true;
          }));
      if (view->empty()) warnings_.push_back(file_ + ":" + std::to_string(at.line) + ": view '" + name + "' is empty");
      add_lexicon(at, name, std::move(view));
      return;
    }
    if (word == "include" && cur_.kind == Lexeme::String) {
      auto path = resolve_path(expect_string());
      expect_sym(";");
      auto saved_file = file_;
      auto saved_dir = dir_;
      auto* saved_lexer = lexer_;
      auto saved_cur = cur_;
      load_into(path, false);
      file_ = saved_file;
      dir_ = saved_dir;
      lexer_ = saved_lexer;
      cur_ = saved_cur;
      return;
    }
    if (word == "root" && cur_.kind == Lexeme::Ident) {
      Lexeme rat = cur_;
      auto name = expect_ident();
      expect_sym(";");
      if (top) {
        root_ = name;
        root_at_ = rat;
        root_file_ = file_;
      }
      return;
    }
    if (!is_sym(":=")) fail(cur_, "expected ':=' after production name '" + word + "'");
    if (reserved().count(word)) fail(at, "'" + word + "' is reserved");
    advance();
    NodeId body = alt();
    expect_sym(";");
    for (auto& p : prods_) {
      if (p.name != word) continue;
      if (p.top == top) fail(at, "production '" + word + "' defined twice");
      if (top) {  // the including file overrides
        p = PendingProd{word, body, at.line, at.col, file_, top};
      }
      return;
    }
    prods_.push_back(PendingProd{word, body, at.line, at.col, file_, top});
  }

  static const std::set<std::string>& reserved() {
    static const std::set<std::string> r = {"mark",      "eps",  "star", "plus", "compatible-value",
                                            "compatible-unit", "completable", "kleene-star-with-separator",
                                            "kleene-plus-with-separator"};
    return r;
  }

  void add_lexicon(const Lexeme& at, const std::string& name, std::shared_ptr<const Lexicon> lex) {
    if (lex_index_.count(name)) fail(at, "lexicon '" + name + "' declared twice");
    lex_index_[name] = static_cast<int>(lexicons_.size());
    lexicons_.push_back(std::move(lex));
  }

  NodeId add(Node n, const Lexeme& at) {
    n.line = at.line;
    n.col = at.col;
    n.file = file_;
    nodes_.push_back(std::move(n));
    return static_cast<NodeId>(nodes_.size() - 1);
  }

  bool at_seq_end() const {
    return cur_.kind == Lexeme::End || is_sym("|") || is_sym(")") || is_sym(";") || is_sym(",");
  }

  NodeId alt() {
    Lexeme at = cur_;
    std::vector<NodeId> kids{seq()};
    while (is_sym("|")) {
      advance();
      kids.push_back(seq());
    }
    if (kids.size() == 1) return kids[0];
    Node n;
    n.kind = Node::Kind::Alt;
    n.kids = std::move(kids);
    return add(std::move(n), at);
  }

  NodeId seq() {
    Lexeme at = cur_;
    std::vector<NodeId> kids;
    while (!at_seq_end()) kids.push_back(postfix());
    if (kids.size() == 1) return kids[0];
    Node n;
    n.kind = kids.empty() ? Node::Kind::Empty : Node::Kind::Seq;
    n.kids = std::move(kids);
    return add(std::move(n), at);
  }

  NodeId postfix() {
    Lexeme at = cur_;
    NodeId p = primary();
    while (is_sym("?")) {
      advance();
      Node n;
      n.kind = Node::Kind::Opt;
      n.kids = {p};
      p = add(std::move(n), at);
    }
    return p;
  }

  NodeId primary() {
    Lexeme at = cur_;
    if (cur_.kind == Lexeme::String) {
      Node n;
      n.kind = Node::Kind::Lit;
      n.lit = text::tokenize(cur_.text);
      if (n.lit.empty()) fail(at, "empty literal");
      advance();
      return add(std::move(n), at);
    }
    if (is_sym("(")) {
      advance();
      NodeId inner = alt();
      expect_sym(")");
      return inner;
    }
    if (is_sym("@")) {
      advance();
      Node n;
      n.kind = Node::Kind::Lex;
      n.name = expect_ident();
      if (is_sym(":")) {
        advance();
        Lexeme rat = cur_;
        auto r = parse_role(expect_ident());
        if (!r) fail(rat, "unknown role");
        n.role = *r;
      }
      return add(std::move(n), at);
    }
    if (is_sym("{")) {
      advance();
      Node n;
      n.kind = Node::Kind::Action;
      while (!is_sym("}")) {
        Lexeme kat = cur_;
        auto key = expect_ident();
        if (key == "negate") {
          n.action.negate = true;
        } else if (key == "or") {
          n.action.disjoin = true;
        } else {
          expect_sym("=");
          Lexeme vat = cur_;
          std::string val = cur_.text;
          if (cur_.kind == Lexeme::End) fail(vat, "expected a value");
          advance();
          if (key == "field") {
            n.action.field = val;
          } else if (key == "op") {
            auto op = parse_op(val);
            if (!op) fail(vat, "unknown operator '" + val + "'");
            n.action.op = *op;
          } else if (key == "unit") {
            n.action.unit = val;
          } else if (key == "value") {
            n.action.value = val;
          } else {
            fail(kat, "unknown action '" + key + "'");
          }
        }
        if (is_sym(",")) advance();
        else if (!is_sym("}")) fail(cur_, "expected ',' or '}'");
      }
      advance();
      return add(std::move(n), at);
    }
    if (cur_.kind != Lexeme::Ident) fail(cur_, "expected an expression");
    std::string word = cur_.text;
    advance();
    if (word == "mark" || word == "eps") {
      Node n;
      n.kind = word == "mark" ? Node::Kind::Mark : Node::Kind::Empty;
      return add(std::move(n), at);
    }
    if (word == "star" || word == "plus" || word == "kleene-star-with-separator" ||
        word == "kleene-plus-with-separator") {
      Node n;
      n.kind = (word == "star" || word == "kleene-star-with-separator") ? Node::Kind::Star : Node::Kind::Plus;
      expect_sym("(");
      n.kids.push_back(alt());
      if (is_sym(",")) {
        advance();
        n.kids.push_back(alt());
      }
      expect_sym(")");
      return add(std::move(n), at);
    }
    if (word == "compatible-value" || word == "compatible-unit") {
      expect_sym("(");
      expect_sym(")");
      Node n;
      n.kind = word == "compatible-value" ? Node::Kind::CompatValue : Node::Kind::CompatUnit;
      return add(std::move(n), at);
    }
    if (word == "completable") {
      expect_sym("(");
      Node n;
      n.kind = Node::Kind::Completable;
      n.sub = "...";
      bool first = true;
      while (!is_sym(")")) {
        if (!first) expect_sym(",");
        first = false;
        Lexeme aat = cur_;
        if (cur_.kind == Lexeme::String) {
          n.sub = expect_string();
          continue;
        }
        auto key = expect_ident();
        if (is_sym("=")) {
          advance();
          if (key == "parser") {
            n.name = expect_ident();
          } else if (key == "sub") {
            n.sub = expect_string();
          } else {
            fail(aat, "unknown completable argument '" + key + "'");
          }
        } else {
          n.name = key;
        }
      }
      advance();
      auto canon = canonical_parser(n.name);
      if (!canon)
        throw ConfigError(file_ + ":" + std::to_string(at.line) + ":" + std::to_string(at.col) +
                          ": unknown parser '" + n.name + "'");
      n.name = *canon;
      return add(std::move(n), at);
    }
    Node n;
    n.kind = Node::Kind::Ref;
    n.name = word;
    return add(std::move(n), at);
  }

  // ------------------------------------------------------------ finishing

  [[noreturn]] void fail_node(const Node& n, const std::string& msg) const {
    throw ParseError(n.file, n.line, n.col, msg);
  }

  Grammar finish() {
    Grammar g;
    if (!domain_) throw ConfigError("grammar declares no domain");
    g.domain = domain_;
    g.lexicons = lexicons_;
    g.lexicon_index = lex_index_;
    for (auto& p : prods_) {
      g.production_index[p.name] = static_cast<int>(g.productions.size());
      g.productions.push_back(Production{p.name, p.body, p.line, p.col, p.file});
    }
    if (root_.empty()) throw ParseError(file_, 0, 0, "grammar declares no root");
    auto rit = g.production_index.find(root_);
    if (rit == g.production_index.end())
      throw ParseError(root_file_, root_at_.line, root_at_.col, "root '" + root_ + "' is not defined");
    g.root = rit->second;
    g.nodes = std::move(nodes_);
    g.source = root_file_;
    for (auto& n : g.nodes) {
      if (n.kind == Node::Kind::Ref) {
        auto it = g.production_index.find(n.name);
        if (it == g.production_index.end()) fail_node(n, "undefined production '" + n.name + "'");
        n.target = it->second;
      } else if (n.kind == Node::Kind::Lex) {
        auto it = g.lexicon_index.find(n.name);
        if (it == g.lexicon_index.end()) fail_node(n, "undefined lexicon '" + n.name + "'");
        n.target = it->second;
      }
    }
    for (auto& n : g.nodes) check_node(g, n);
    g.warnings = warnings_;
    return g;
  }

  void check_targets(Grammar& g, const Node& n) {
    const Domain& d = *g.domain;
    const Lexicon& lex = g.lexicon(n.target);
    for (std::size_t i = 0; i < lex.size(); ++i) {
      const auto& e = lex.at(i);
      auto bad = [&](const std::string& why) {
        fail_node(n, "lexicon '" + n.name + "' entry '" + e.display + "': " + why);
      };
      switch (n.role) {
        case Role::Field: {
          auto bar = e.target.find('|');
          auto f = e.target.substr(0, bar);
          if (!d.field(f)) bad("unknown field " + f);
          if (bar != std::string::npos && !parse_op(e.target.substr(bar + 1))) bad("bad operator");
          break;
        }
        case Role::Value:
          if (!d.type_of_value(e.target)) bad("unknown value " + e.target);
          break;
        case Role::Unit:
          if (!d.has_unit(e.target)) bad("unknown unit " + e.target);
          break;
        case Role::Op:
          if (!parse_op(e.target)) bad("bad operator");
          break;
        case Role::Atom: {
          if (g.atom_targets.count(e.target)) break;
          Atom a;
          try {
            a = parse_atom(e.target);
          } catch (const ParseError& err) {
            bad(err.what());
          }
          if (auto why = d.check(a); !why.empty()) bad(why);
          g.atom_targets.emplace(e.target, a);
          break;
        }
        case Role::Count: {
          int v = 0;
          auto res = std::from_chars(e.target.data(), e.target.data() + e.target.size(), v);
          if (res.ec != std::errc{}) bad("count target must be an integer");
          break;
        }
        case Role::TimeUnit:
          if (!parse_time_unit(e.target)) bad("bad time unit");
          break;
        case Role::Keyword: {
          auto* f = d.field(e.target);
          if (!f || f->value_kind != ValueKind::String) bad("keyword target must be a string field");
          break;
        }
        case Role::None: break;
      }
    }
  }

  void check_node(Grammar& g, const Node& n) {
    using K = Node::Kind;
    if (n.kind == K::Lex) check_targets(g, n);
    if (n.kind == K::Action) {
      const Domain& d = *g.domain;
      if (n.action.field && !d.field(*n.action.field)) fail_node(n, "unknown field " + *n.action.field);
      if (n.action.unit && !d.has_unit(*n.action.unit)) fail_node(n, "unknown unit " + *n.action.unit);
      if (n.action.value && !d.type_of_value(*n.action.value))
        fail_node(n, "unknown value " + *n.action.value);
    }
    if (n.kind != K::Seq) {
      for (auto kid : n.kids) {
        auto kk = g.nodes[kid].kind;
        if (kk == K::CompatValue || kk == K::CompatUnit)
          fail_node(g.nodes[kid], "compatibility constraint must sit inside a sequence");
      }
      return;
    }
    for (std::size_t i = 0; i < n.kids.size(); ++i) {
      const Node& k = g.nodes[n.kids[i]];
      if (k.kind == K::Mark && i + 1 != n.kids.size()) fail_node(k, "mark must end its sequence");
      if (k.kind != K::CompatValue && k.kind != K::CompatUnit) continue;
      bool field_before = false;
      for (std::size_t j = 0; j < i; ++j) {
        const Node& b = g.nodes[n.kids[j]];
        if (b.kind == K::Lex && b.role == Role::Field) field_before = true;
      }
      if (!field_before) fail_node(k, "compatibility constraint needs a preceding field lookup");
      Role want = k.kind == K::CompatValue ? Role::Value : Role::Unit;
      if (i + 1 >= n.kids.size() || g.nodes[n.kids[i + 1]].kind != K::Lex ||
          g.nodes[n.kids[i + 1]].role != want)
        fail_node(k, std::string("compatibility constraint must be followed by a ") +
                         (want == Role::Value ? "value" : "unit") + " lookup");
      const Node& next = g.nodes[n.kids[i + 1]];
      const Lexicon& lex = g.lexicon(next.target);
      if (want == Role::Value) {
        auto& views = g.typed_values[next.target];
        if (views.empty())
          for (const auto& [type, vals] : g.domain->types())
            views.emplace(type, std::make_shared<const Lexicon>(lex.sub_lexicon_by_type(*g.domain, type)));
      } else {
        auto& views = g.field_units[next.target];
        if (views.empty())
          for (const auto& [id, f] : g.domain->fields()) {
            if (f.value_kind != ValueKind::Numeric) continue;
            auto units = f.compatible_units;
            views.emplace(id, std::make_shared<const Lexicon>(lex.derive_view(
                                  lex.name() + "#" + id,
                                  [&](const LexiconEntry& e) { return units.count(e.target) > 0; })));
          }
      }
    }
  }

  LexiconStore& store_;
  std::shared_ptr<const Domain> domain_;
  std::vector<std::shared_ptr<const Lexicon>> lexicons_;
  std::map<std::string, int> lex_index_;
  std::vector<Node> nodes_;
  std::vector<PendingProd> prods_;
  std::vector<std::string> warnings_;
  std::set<std::string> visiting_;
  std::string root_, root_file_;
  Lexeme root_at_;
  std::string file_, dir_;
  Lexer* lexer_ = nullptr;
  Lexeme cur_;
};

}  // namespace detail

inline Grammar load_grammar(const std::string& path, LexiconStore& store) {
  return detail::Loader(store).load_file(path);
}

inline Grammar load_grammar(const std::string& path) {
  LexiconStore store;
  return load_grammar(path, store);
}

/// Parses grammar text; relative paths resolve against `base_dir`.
inline Grammar parse_grammar(std::string_view src, const std::string& base_dir, LexiconStore& store,
                             const std::string& name = "<grammar>") {
  return detail::Loader(store).load_source(src, name, base_dir);
}

}  // namespace semc::grammar
