#pragma once

#include <algorithm>
#include <cctype>
#include <charconv>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "semc/errors.hpp"
#include "semc/util/text.hpp"

namespace semc {

// ---------------------------------------------------------------- values

struct EnumValue {
  std::string id;
  friend bool operator==(const EnumValue&, const EnumValue&) = default;
};

/// `scale` keeps the written magnitude suffix (K, M, B): 2M stays 2M.
struct NumericValue {
  double magnitude = 0;
  std::string scale;
  std::string unit;
  friend bool operator==(const NumericValue&, const NumericValue&) = default;
};

struct ExactDate {
  int day = -1, month = -1, year = -1;
  bool fully_specified() const { return day != -1 && month != -1 && year != -1; }
  friend bool operator==(const ExactDate&, const ExactDate&) = default;
};

enum class TimeUnit { Day, Week, Month, Year };

struct RelativeTime {
  int n = 0;
  TimeUnit unit = TimeUnit::Day;
  std::string anchor = "NOW";
  friend bool operator==(const RelativeTime&, const RelativeTime&) = default;
};

struct StringValue {
  std::string text;
  friend bool operator==(const StringValue&, const StringValue&) = default;
};

struct BooleanValue {
  bool flag = false;
  friend bool operator==(const BooleanValue&, const BooleanValue&) = default;
};

using Value = std::variant<EnumValue, NumericValue, ExactDate, RelativeTime, StringValue, BooleanValue>;

enum class ValueKind { Enum, Numeric, Date, String, Boolean };

inline ValueKind kind_of(const Value& v) {
  switch (v.index()) {
    case 0: return ValueKind::Enum;
    case 1: return ValueKind::Numeric;
    case 2:
    case 3: return ValueKind::Date;
    case 4: return ValueKind::String;
    default: return ValueKind::Boolean;
  }
}

inline const char* time_unit_name(TimeUnit u) {
  switch (u) {
    case TimeUnit::Day: return "DAY";
    case TimeUnit::Week: return "WEEK";
    case TimeUnit::Month: return "MONTH";
    case TimeUnit::Year: return "YEAR";
  }
  return "DAY";
}

inline std::optional<TimeUnit> parse_time_unit(std::string_view s) {
  if (s == "DAY") return TimeUnit::Day;
  if (s == "WEEK") return TimeUnit::Week;
  if (s == "MONTH") return TimeUnit::Month;
  if (s == "YEAR") return TimeUnit::Year;
  return std::nullopt;
}

inline std::string format_magnitude(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

inline std::string quote(std::string_view s) { return "\"" + text::escape_json_like(s) + "\""; }

inline std::string serialize(const Value& v) {
  struct {
    std::string operator()(const EnumValue& e) const { return e.id; }
    std::string operator()(const NumericValue& n) const {
      std::string s = format_magnitude(n.magnitude) + n.scale;
      if (!n.unit.empty()) s += "(" + n.unit + ")";
      return s;
    }
    std::string operator()(const ExactDate& d) const {
      return "ExactDate(" + std::to_string(d.day) + "," + std::to_string(d.month) + "," +
             std::to_string(d.year) + ")";
    }
    std::string operator()(const RelativeTime& r) const {
      return "RELATIVE_TIME(" + std::to_string(r.n) + "," + time_unit_name(r.unit) + "," + r.anchor +
             ")";
    }
    std::string operator()(const StringValue& s) const { return quote(s.text); }
    std::string operator()(const BooleanValue& b) const { return b.flag ? "TRUE" : "FALSE"; }
  } vis;
  return std::visit(vis, v);
}

// ---------------------------------------------------------------- atoms

enum class Op { Eq, Lt, Gt, Le, Ge, Ne, Contains };

inline const char* op_symbol(Op op) {
  switch (op) {
    case Op::Eq: return "=";
    case Op::Lt: return "<";
    case Op::Gt: return ">";
    case Op::Le: return "<=";
    case Op::Ge: return ">=";
    case Op::Ne: return "!=";
    case Op::Contains: return "CONTAINS";
  }
  return "=";
}

inline std::optional<Op> parse_op(std::string_view s) {
  if (s == "=") return Op::Eq;
  if (s == "<") return Op::Lt;
  if (s == ">") return Op::Gt;
  if (s == "<=") return Op::Le;
  if (s == ">=") return Op::Ge;
  if (s == "!=") return Op::Ne;
  if (s == "CONTAINS") return Op::Contains;
  return std::nullopt;
}

struct Atom {
  std::string field;
  Op op = Op::Eq;
  Value value;
  bool negated = false;
  friend bool operator==(const Atom&, const Atom&) = default;
};

inline std::string serialize(const Atom& a) {
  std::string body = a.field;
  if (a.op == Op::Contains)
    body += " CONTAINS ";
  else
    body += op_symbol(a.op);
  body += serialize(a.value);
  return a.negated ? "NOT(" + body + ")" : body;
}

/// Total order used for canonical sorting: (field, op, value text, negated).
inline bool atom_less(const Atom& a, const Atom& b) {
  if (a.field != b.field) return a.field < b.field;
  std::string_view oa = op_symbol(a.op), ob = op_symbol(b.op);
  if (oa != ob) return oa < ob;
  auto va = serialize(a.value), vb = serialize(b.value);
  if (va != vb) return va < vb;
  return a.negated < b.negated;
}

using DiversificationType = std::string;

inline DiversificationType atom_type(const Atom& a) { return a.field; }

// ---------------------------------------------------------------- formulas

struct Formula {
  enum class Kind { Atom, And, Or, Not };
  Kind kind = Kind::And;  // an And with no children is the empty formula
  semc::Atom atom;
  std::vector<Formula> children;

  static Formula of(semc::Atom a) {
    Formula f;
    f.kind = Kind::Atom;
    f.atom = std::move(a);
    return f;
  }
  static Formula all(std::vector<Formula> cs) {
    Formula f;
    f.kind = Kind::And;
    f.children = std::move(cs);
    return f;
  }
  static Formula any(std::vector<Formula> cs) {
    Formula f;
    f.kind = Kind::Or;
    f.children = std::move(cs);
    return f;
  }
  static Formula negation(Formula inner) {
    Formula f;
    f.kind = Kind::Not;
    f.children.push_back(std::move(inner));
    return f;
  }

  bool empty() const { return kind == Kind::And && children.empty(); }
  friend bool operator==(const Formula&, const Formula&) = default;
};

inline std::string serialize(const Formula& f) {
  switch (f.kind) {
    case Formula::Kind::Atom: return serialize(f.atom);
    case Formula::Kind::Not: return "NOT(" + serialize(f.children.at(0)) + ")";
    case Formula::Kind::And:
    case Formula::Kind::Or: {
      if (f.empty()) return "";
      std::string s = f.kind == Formula::Kind::And ? "AND(" : "OR(";
      for (std::size_t i = 0; i < f.children.size(); ++i) {
        if (i) s += ", ";
        s += serialize(f.children[i]);
      }
      return s + ")";
    }
  }
  return "";
}

inline Formula canonicalize(const Formula& f) {
  using K = Formula::Kind;
  switch (f.kind) {
    case K::Atom: return f;
    case K::Not: {
      Formula inner = canonicalize(f.children.at(0));
      if (inner.kind == K::Atom) {
        inner.atom.negated = !inner.atom.negated;
        return inner;
      }
      if (inner.kind == K::Not) return inner.children.at(0);
      if (inner.empty()) return inner;
      return Formula::negation(std::move(inner));
    }
    case K::And:
    case K::Or: {
      std::vector<Formula> flat;
      for (const auto& c : f.children) {
        Formula cc = canonicalize(c);
        if (cc.empty()) continue;
        if (cc.kind == f.kind) {
          for (auto& g : cc.children) flat.push_back(std::move(g));
        } else {
          flat.push_back(std::move(cc));
        }
      }
      std::vector<std::pair<std::string, Formula>> keyed;
      keyed.reserve(flat.size());
      for (auto& c : flat) keyed.emplace_back(serialize(c), std::move(c));
      std::stable_sort(keyed.begin(), keyed.end(), [](const auto& a, const auto& b) {
        bool aa = a.second.kind == K::Atom, ba = b.second.kind == K::Atom;
        if (aa != ba) return aa;
        if (aa) return atom_less(a.second.atom, b.second.atom);
        return a.first < b.first;
      });
      std::vector<Formula> out;
      for (std::size_t i = 0; i < keyed.size(); ++i) {
        if (i > 0 && keyed[i].first == keyed[i - 1].first) continue;
        out.push_back(std::move(keyed[i].second));
      }
      if (out.empty()) return Formula{};
      if (out.size() == 1) return std::move(out.front());
      Formula g;
      g.kind = f.kind;
      g.children = std::move(out);
      return g;
    }
  }
  return f;
}

inline std::string canonical_key(const Formula& f) { return serialize(canonicalize(f)); }

/// Atom leaves of the canonical form (negation folded into the atoms).
inline std::vector<Atom> atoms_of(const Formula& f) {
  std::vector<Atom> out;
  auto rec = [&](auto&& self, const Formula& g, bool neg) -> void {
    if (g.kind == Formula::Kind::Atom) {
      Atom a = g.atom;
      if (neg) a.negated = !a.negated;
      out.push_back(std::move(a));
      return;
    }
    for (const auto& c : g.children) self(self, c, g.kind == Formula::Kind::Not ? !neg : neg);
  };
  rec(rec, canonicalize(f), false);
  return out;
}

// ---------------------------------------------------------------- text form

namespace detail {

class FormulaReader {
 public:
  explicit FormulaReader(std::string_view s) : s_(s) {}

  Formula formula() {
    skip();
    if (take_word("AND(")) return Formula::all(list());
    if (take_word("OR(")) return Formula::any(list());
    if (take_word("NOT(")) {
      Formula inner = formula();
      expect(')');
      return Formula::negation(std::move(inner));
    }
    return Formula::of(atom());
  }

  Atom atom() {
    skip();
    Atom a;
    std::size_t start = i_;
    while (i_ < s_.size() && (std::isalnum(static_cast<unsigned char>(s_[i_])) || s_[i_] == '_' ||
                              s_[i_] == '.'))
      ++i_;
    a.field = std::string(s_.substr(start, i_ - start));
    if (a.field.empty()) fail("expected field");
    skip();
    if (take_word("CONTAINS")) {
      a.op = Op::Contains;
    } else {
      static constexpr std::string_view ops[] = {"<=", ">=", "!=", "=", "<", ">"};
      bool found = false;
      for (auto op : ops) {
        if (s_.substr(i_, op.size()) == op) {
          a.op = *parse_op(op);
          i_ += op.size();
          found = true;
          break;
        }
      }
      if (!found) fail("expected operator");
    }
    skip();
    a.value = value();
    return a;
  }

  Value value() {
    skip();
    if (take_word("ExactDate(")) {
      ExactDate d;
      d.day = integer();
      expect(',');
      d.month = integer();
      expect(',');
      d.year = integer();
      expect(')');
      return d;
    }
    if (take_word("RELATIVE_TIME(")) {
      RelativeTime r;
      r.n = integer();
      expect(',');
      auto unit = ident();
      auto u = parse_time_unit(unit);
      if (!u) fail("bad time unit");
      r.unit = *u;
      expect(',');
      r.anchor = ident();
      expect(')');
      return r;
    }
    if (i_ < s_.size() && s_[i_] == '"') {
      ++i_;
      std::string out;
      while (i_ < s_.size() && s_[i_] != '"') {
        if (s_[i_] == '\\' && i_ + 1 < s_.size()) ++i_;
        out.push_back(s_[i_++]);
      }
      expect('"');
      return StringValue{out};
    }
    if (i_ < s_.size() && (std::isdigit(static_cast<unsigned char>(s_[i_])) || s_[i_] == '-')) {
      std::size_t start = i_;
      ++i_;
      while (i_ < s_.size() && (std::isdigit(static_cast<unsigned char>(s_[i_])) || s_[i_] == '.' ||
                                s_[i_] == 'e' || s_[i_] == '+'))
        ++i_;
      NumericValue n;
      auto num = s_.substr(start, i_ - start);
      auto res = std::from_chars(num.data(), num.data() + num.size(), n.magnitude);
      if (res.ec != std::errc{}) fail("bad number");
      while (i_ < s_.size() && std::isupper(static_cast<unsigned char>(s_[i_]))) n.scale.push_back(s_[i_++]);
      if (i_ < s_.size() && s_[i_] == '(') {
        ++i_;
        n.unit = ident();
        expect(')');
      }
      return n;
    }
    auto id = ident();
    if (id == "TRUE") return BooleanValue{true};
    if (id == "FALSE") return BooleanValue{false};
    return EnumValue{id};
  }

  void finish() {
    skip();
    if (i_ != s_.size()) fail("trailing input");
  }

 private:
  std::vector<Formula> list() {
    std::vector<Formula> out;
    out.push_back(formula());
    skip();
    while (i_ < s_.size() && s_[i_] == ',') {
      ++i_;
      out.push_back(formula());
      skip();
    }
    expect(')');
    return out;
  }
  std::string ident() {
    skip();
    std::size_t start = i_;
    while (i_ < s_.size() && (std::isalnum(static_cast<unsigned char>(s_[i_])) || s_[i_] == '_' ||
                              s_[i_] == '.' || s_[i_] == '+' || s_[i_] == '-'))
      ++i_;
    if (start == i_) fail("expected identifier");
    return std::string(s_.substr(start, i_ - start));
  }
  int integer() {
    skip();
    int v = 0;
    auto res = std::from_chars(s_.data() + i_, s_.data() + s_.size(), v);
    if (res.ec != std::errc{}) fail("expected integer");
    i_ = static_cast<std::size_t>(res.ptr - s_.data());
    return v;
  }
  bool take_word(std::string_view w) {
    if (s_.substr(i_, w.size()) == w) {
      i_ += w.size();
      return true;
    }
    return false;
  }
  void expect(char c) {
    skip();
    if (i_ >= s_.size() || s_[i_] != c) fail(std::string("expected '") + c + "'");
    ++i_;
  }
  void skip() {
    while (i_ < s_.size() && s_[i_] == ' ') ++i_;
  }
  [[noreturn]] void fail(const std::string& msg) {
    throw ParseError("formula", 1, i_ + 1, msg + " in '" + std::string(s_) + "'");
  }

  std::string_view s_;
  std::size_t i_ = 0;
};

}  // namespace detail

inline Formula parse_formula(std::string_view s) {
  if (text::trim(s).empty()) return Formula{};
  detail::FormulaReader r(s);
  Formula f = r.formula();
  r.finish();
  return f;
}

inline Atom parse_atom(std::string_view s) {
  Formula f = canonicalize(parse_formula(s));
  if (f.kind != Formula::Kind::Atom) throw ParseError("atom", 1, 1, "not a single atom: " + std::string(s));
  return f.atom;
}

// ---------------------------------------------------------------- derivations

struct AtomSpan {
  Atom atom;
  std::size_t begin = 0, end = 0;  // token range, half open
  bool or_with_prev = false;
  std::size_t value_begin = 0, value_end = 0;  // tokens that spelled the value
  std::string value_format;                    // surface format of a parsed date, if any
  friend bool operator==(const AtomSpan&, const AtomSpan&) = default;
};

struct Derivation {
  std::vector<Token> tokens;
  std::vector<AtomSpan> atoms;  // in order of occurrence

  /// Conjunction of the atoms; an "or" connective groups left-associatively.
  Formula formula() const {
    if (atoms.empty()) return Formula{};
    Formula cur = Formula::of(atoms.front().atom);
    for (std::size_t i = 1; i < atoms.size(); ++i) {
      Formula next = Formula::of(atoms[i].atom);
      if (atoms[i].or_with_prev)
        cur = Formula::any({std::move(cur), std::move(next)});
      else
        cur = Formula::all({std::move(cur), std::move(next)});
    }
    return cur;
  }
};

inline std::optional<DiversificationType> rightmost_atom_type(const Derivation& d) {
  const AtomSpan* best = nullptr;
  for (const auto& a : d.atoms)
    if (!best || a.end >= best->end) best = &a;
  if (!best) return std::nullopt;
  return atom_type(best->atom);
}

/// Type of the atom whose span covers token index `tok`, if any.
inline std::optional<DiversificationType> type_at(const Derivation& d, std::size_t tok) {
  for (const auto& a : d.atoms)
    if (a.begin <= tok && tok < a.end) return atom_type(a.atom);
  return std::nullopt;
}

// ---------------------------------------------------------------- completions

enum class Grade { Low = 0, Medium = 1, High = 2 };

inline const char* grade_name(Grade g) {
  switch (g) {
    case Grade::High: return "HIGH";
    case Grade::Medium: return "MEDIUM";
    case Grade::Low: return "LOW";
  }
  return "LOW";
}

inline std::optional<Grade> parse_grade(std::string_view s) {
  if (s == "HIGH") return Grade::High;
  if (s == "MEDIUM") return Grade::Medium;
  if (s == "LOW") return Grade::Low;
  return std::nullopt;
}

struct Completion {
  std::string completion;
  Formula interpretation;
  DiversificationType dtype;
  Grade grade = Grade::Low;
  double score = 0;
  std::string source;
};

/// Lower is preferred when everything else ties.
inline int source_priority(std::string_view source) {
  if (source == "mpc") return 0;
  if (source == "atomic") return 1;
  if (source == "template") return 2;
  return 3;
}

/// Every typed token is a prefix of its own token of `completion`, in order
/// and starting at the first one; the final typed token may be unfinished.
inline bool is_syntactic_extension(std::string_view prefix, std::string_view completion) {
  auto p = text::tokenize(prefix);
  auto c = text::tokenize(completion);
  if (p.size() > c.size()) return false;
  bool open = text::ends_mid_token(prefix);
  for (std::size_t i = 0; i < p.size(); ++i) {
    bool last = i + 1 == p.size();
    if (last && open) {
      if (!text::starts_with(c[i].text, p[i].text)) return false;
    } else if (c[i].text != p[i].text) {
      return false;
    }
  }
  return true;
}

}  // namespace semc
