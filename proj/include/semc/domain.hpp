#pragma once

#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "semc/errors.hpp"
#include "semc/semantics.hpp"

namespace semc {

struct FieldDescriptor {
  std::string id;
  ValueKind value_kind = ValueKind::Enum;
  std::string enum_type;               // enum fields
  std::set<std::string> enum_domain;   // enum fields
  std::set<std::string> compatible_units;  // numeric fields
};

inline std::optional<ValueKind> parse_value_kind(std::string_view s) {
  if (s == "enum") return ValueKind::Enum;
  if (s == "numeric") return ValueKind::Numeric;
  if (s == "date") return ValueKind::Date;
  if (s == "string") return ValueKind::String;
  if (s == "boolean") return ValueKind::Boolean;
  return std::nullopt;
}

/// Field, type and unit declarations for one domain.
///
///   type COUNTRY CHINA GERMANY
///   unit USD PERCENT
///   field COUNTRY_OF_RISK enum COUNTRY
///   field FLD_YLD numeric PERCENT
///   field MATURITY_DATE date
class Domain {
 public:
  static Domain parse(std::string_view src, const std::string& where = "domain") {
    Domain d;
    std::istringstream in{std::string(src)};
    std::string line;
    std::size_t lineno = 0;
    std::vector<std::pair<std::size_t, std::vector<std::string>>> field_lines;
    while (std::getline(in, line)) {
      ++lineno;
      auto hash = line.find('#');
      if (hash != std::string::npos) line.resize(hash);
      std::istringstream words(line);
      std::vector<std::string> w;
      for (std::string x; words >> x;) w.push_back(x);
      if (w.empty()) continue;
      if (w[0] == "type") {
        if (w.size() < 2) throw ParseError(where, lineno, 1, "type needs a name");
        auto& vals = d.types_[w[1]];
        for (std::size_t i = 2; i < w.size(); ++i) {
          auto [it, fresh] = d.value_type_.emplace(w[i], w[1]);
          if (!fresh && it->second != w[1])
            throw ParseError(where, lineno, 1, "value " + w[i] + " already belongs to " + it->second);
          vals.insert(w[i]);
        }
      } else if (w[0] == "unit") {
        for (std::size_t i = 1; i < w.size(); ++i) d.units_.insert(w[i]);
      } else if (w[0] == "field") {
        field_lines.emplace_back(lineno, std::move(w));
      } else {
        throw ParseError(where, lineno, 1, "unknown declaration '" + w[0] + "'");
      }
    }
    for (auto& [ln, w] : field_lines) {
      if (w.size() < 3) throw ParseError(where, ln, 1, "field needs an id and a kind");
      FieldDescriptor f;
      f.id = w[1];
      auto kind = parse_value_kind(w[2]);
      if (!kind) throw ParseError(where, ln, 1, "unknown value kind '" + w[2] + "'");
      f.value_kind = *kind;
      if (f.value_kind == ValueKind::Enum) {
        if (w.size() != 4) throw ParseError(where, ln, 1, "enum field needs exactly one type");
        auto it = d.types_.find(w[3]);
        if (it == d.types_.end() || it->second.empty())
          throw ParseError(where, ln, 1, "enum field " + f.id + " needs a non-empty type");
        f.enum_type = w[3];
        f.enum_domain = it->second;
      } else if (f.value_kind == ValueKind::Numeric) {
        for (std::size_t i = 3; i < w.size(); ++i) {
          if (!d.units_.count(w[i])) throw ParseError(where, ln, 1, "unknown unit " + w[i]);
          f.compatible_units.insert(w[i]);
        }
      } else if (w.size() > 3) {
        throw ParseError(where, ln, 1, "unexpected arguments for field " + f.id);
      }
      if (!d.fields_.emplace(f.id, f).second) throw ParseError(where, ln, 1, "duplicate field " + f.id);
    }
    return d;
  }

  static Domain load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open domain file " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return parse(ss.str(), path);
  }

  const FieldDescriptor* field(std::string_view id) const {
    auto it = fields_.find(std::string(id));
    return it == fields_.end() ? nullptr : &it->second;
  }
  bool has_type(std::string_view t) const { return types_.count(std::string(t)) > 0; }
  bool has_unit(std::string_view u) const { return units_.count(std::string(u)) > 0; }
  const std::string* type_of_value(std::string_view v) const {
    auto it = value_type_.find(std::string(v));
    return it == value_type_.end() ? nullptr : &it->second;
  }
  const std::map<std::string, std::set<std::string>>& types() const { return types_; }
  const std::map<std::string, FieldDescriptor>& fields() const { return fields_; }
  const std::set<std::string>& units() const { return units_; }

  /// Empty string when the atom is well-typed, otherwise the reason.
  std::string check(const Atom& a) const {
    const FieldDescriptor* f = field(a.field);
    if (!f) return "unknown field " + a.field;
    if (kind_of(a.value) != f->value_kind) return "value kind mismatch for " + a.field;
    bool ordered = a.op == Op::Lt || a.op == Op::Gt || a.op == Op::Le || a.op == Op::Ge;
    if (ordered && f->value_kind != ValueKind::Numeric && f->value_kind != ValueKind::Date)
      return "ordering operator on non-ordered field " + a.field;
    if (a.op == Op::Contains && f->value_kind != ValueKind::String)
      return "CONTAINS on non-string field " + a.field;
    if (auto* e = std::get_if<EnumValue>(&a.value); e && !f->enum_domain.count(e->id))
      return e->id + " is not a value of " + a.field;
    if (auto* n = std::get_if<NumericValue>(&a.value); n && !n->unit.empty() &&
                                                       !f->compatible_units.count(n->unit))
      return n->unit + " is not a unit of " + a.field;
    return {};
  }

 private:
  std::map<std::string, std::set<std::string>> types_;
  std::map<std::string, std::string> value_type_;
  std::set<std::string> units_;
  std::map<std::string, FieldDescriptor> fields_;
};

}  // namespace semc
