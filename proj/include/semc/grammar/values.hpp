#pragma once

// Sub-parsers behind completable(): numbers and calendar dates.

#include <array>
#include <cctype>
#include <charconv>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "semc/semantics.hpp"
#include "semc/util/text.hpp"

namespace semc::grammar {

// ---------------------------------------------------------------- numbers

struct ParsedNumber {
  double magnitude = 0;
  std::string scale;
};

namespace detail {

inline std::size_t digits(std::string_view s, std::size_t i) {
  while (i < s.size() && std::isdigit(static_cast<unsigned char>(s[i]))) ++i;
  return i;
}

inline const char* scale_of(std::string_view suffix) {
  if (suffix.empty()) return "";
  if (suffix == "k") return "K";
  if (suffix == "m" || suffix == "mm") return "M";
  if (suffix == "b" || suffix == "bn") return "B";
  return nullptr;
}

}  // namespace detail

/// `2`, `2.5`, `2m`, `500k`, `1bn` (input already case-folded).
inline std::optional<ParsedNumber> parse_number(std::string_view tok) {
  std::size_t i = detail::digits(tok, 0);
  if (i == 0) return std::nullopt;
  if (i < tok.size() && tok[i] == '.') {
    std::size_t j = detail::digits(tok, i + 1);
    if (j == i + 1) return std::nullopt;
    i = j;
  }
  const char* scale = detail::scale_of(tok.substr(i));
  if (!scale) return std::nullopt;
  ParsedNumber p;
  std::from_chars(tok.data(), tok.data() + i, p.magnitude);
  p.scale = scale;
  return p;
}

/// True when `tok` can still grow into something parse_number accepts.
inline bool is_number_prefix(std::string_view tok) {
  std::size_t i = detail::digits(tok, 0);
  if (i == 0) return false;
  if (i < tok.size() && tok[i] == '.') i = detail::digits(tok, i + 1);
  auto rest = tok.substr(i);
  for (std::string_view s : {"k", "m", "mm", "b", "bn"})
    if (text::starts_with(s, rest)) return true;
  return false;
}

// ---------------------------------------------------------------- dates

namespace detail {

inline constexpr std::array<std::string_view, 12> kMonths = {
    "january", "february", "march",     "april",   "may",      "june",
    "july",    "august",   "september", "october", "november", "december"};

inline int month_number(std::string_view s, bool* abbreviated = nullptr) {
  for (int m = 0; m < 12; ++m) {
    if (s == kMonths[m]) {
      if (abbreviated) *abbreviated = false;
      return m + 1;
    }
    if (s.size() >= 3 && s.size() < kMonths[m].size() && text::starts_with(kMonths[m], s) &&
        (s.size() == 3 || s == "sept")) {
      if (abbreviated) *abbreviated = true;
      return m + 1;
    }
  }
  return 0;
}

inline bool month_prefix(std::string_view s) {
  for (auto m : kMonths)
    if (text::starts_with(m, s)) return true;
  return false;
}

inline int small_int(std::string_view s, std::size_t max_len) {
  if (s.empty() || s.size() > max_len) return -1;
  int v = 0;
  auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc{} || res.ptr != s.data() + s.size()) return -1;
  return v;
}

inline bool all_digits(std::string_view s) {
  return !s.empty() && digits(s, 0) == s.size();
}

}  // namespace detail

inline bool is_leap(int y) { return (y % 4 == 0 && y % 100 != 0) || y % 400 == 0; }

inline int days_in_month(int m, int y) {
  static constexpr int d[] = {31, 28, 31, 30, 31, 30, 31, 31, 30, 31, 30, 31};
  if (m == 2 && is_leap(y)) return 29;
  return d[m - 1];
}

/// Format ids: Y (2020), MY (may 2020), MDcY (may 30, 2020), MDY, DMY,
/// S (5/30/2020), M (may). `;abbr` and `;cap` record the month spelling.
struct DateMatch {
  std::size_t len = 0;  // tokens consumed
  ExactDate date;
  std::string format;
  bool complete = true;  // false: the input ran out inside a date
};

namespace detail {

enum class DatePart { Month, Day, Comma, Year, Slash };

struct DateFormat {
  const char* id;
  std::vector<DatePart> parts;
};

inline const std::vector<DateFormat>& date_formats() {
  using P = DatePart;
  static const std::vector<DateFormat> f = {
      {"MDcY", {P::Month, P::Day, P::Comma, P::Year}},
      {"MDY", {P::Month, P::Day, P::Year}},
      {"DMY", {P::Day, P::Month, P::Year}},
      {"MY", {P::Month, P::Year}},
      {"S", {P::Slash}},
      {"Y", {P::Year}},
      {"M", {P::Month}},
  };
  return f;
}

inline bool part_full(DatePart p, std::string_view t) {
  switch (p) {
    case DatePart::Month: return month_number(t) != 0;
    case DatePart::Day: {
      int d = small_int(t, 2);
      return d >= 1 && d <= 31;
    }
    case DatePart::Comma: return t == ",";
    case DatePart::Year: {
      int y = t.size() == 4 ? small_int(t, 4) : -1;
      return y >= 1900 && y <= 2199;
    }
    case DatePart::Slash: {
      auto parts = text::split(t, '/');
      if (parts.size() != 3) return false;
      int m = small_int(parts[0], 2), d = small_int(parts[1], 2), y = parts[2].size() == 4 ? small_int(parts[2], 4) : -1;
      return m >= 1 && m <= 12 && y >= 1900 && y <= 2199 && d >= 1 && d <= days_in_month(m, y);
    }
  }
  return false;
}

inline bool part_prefix(DatePart p, std::string_view t) {
  switch (p) {
    case DatePart::Month: return month_prefix(t);
    case DatePart::Day: return all_digits(t) && t.size() <= 2;
    case DatePart::Comma: return t == ",";
    case DatePart::Year: return all_digits(t) && t.size() <= 4 && (t[0] == '1' || t[0] == '2');
    case DatePart::Slash: {
      auto parts = text::split(t, '/');
      if (parts.size() > 3) return false;
      for (std::size_t i = 0; i < parts.size(); ++i) {
        bool last = i + 1 == parts.size();
        if (parts[i].empty() && !last) return false;
        if (!parts[i].empty() && !all_digits(parts[i])) return false;
        if (parts[i].size() > (i == 2 ? 4u : 2u)) return false;
      }
      return !parts[0].empty();
    }
  }
  return false;
}

}  // namespace detail

/// Date readings of tokens[pos..). With `allow_prefix`, an input that ends
/// inside a date (last token possibly unfinished) yields an incomplete match.
inline std::vector<DateMatch> match_dates(std::span<const Token> tokens, std::size_t pos, bool partial_last,
                                          bool allow_prefix) {
  using detail::DatePart;
  std::vector<DateMatch> out;
  const std::size_t n = tokens.size();
  for (const auto& fmt : detail::date_formats()) {
    bool ok = true;
    std::size_t k = 0;
    for (; k < fmt.parts.size(); ++k) {
      std::size_t idx = pos + k;
      if (idx >= n) {
        if (allow_prefix && k > 0) out.push_back(DateMatch{n - pos, {}, fmt.id, false});
        ok = false;
        break;
      }
      const Token& t = tokens[idx];
      bool open = partial_last && idx + 1 == n;
      if (detail::part_full(fmt.parts[k], t.text)) continue;
      if (open && allow_prefix && detail::part_prefix(fmt.parts[k], t.text))
        out.push_back(DateMatch{n - pos, {}, fmt.id, false});
      ok = false;
      break;
    }
    if (!ok) continue;
    ExactDate d;
    bool abbr = false, cap = false;
    for (std::size_t i = 0; i < fmt.parts.size(); ++i) {
      const Token& t = tokens[pos + i];
      switch (fmt.parts[i]) {
        case DatePart::Month:
          d.month = detail::month_number(t.text, &abbr);
          cap = !t.surface.empty() && std::isupper(static_cast<unsigned char>(t.surface[0]));
          break;
        case DatePart::Day: d.day = detail::small_int(t.text, 2); break;
        case DatePart::Year: d.year = detail::small_int(t.text, 4); break;
        case DatePart::Slash: {
          auto p = text::split(t.text, '/');
          d.month = detail::small_int(p[0], 2);
          d.day = detail::small_int(p[1], 2);
          d.year = detail::small_int(p[2], 4);
          break;
        }
        case DatePart::Comma: break;
      }
    }
    if (d.day != -1 && d.month != -1 && d.year != -1 && d.day > days_in_month(d.month, d.year)) continue;
    if (d.day != -1 && d.month != -1 && d.year == -1 && d.day > days_in_month(d.month, 2000)) continue;
    std::string id = fmt.id;
    if (abbr) id += ";abbr";
    if (cap) id += ";cap";
    out.push_back(DateMatch{fmt.parts.size(), d, id, true});
  }
  return out;
}

/// Writes `d` in the surface format recorded by match_dates.
inline std::string format_date(const ExactDate& d, std::string_view format) {
  auto parts = text::split(format, ';');
  std::string_view id = parts[0];
  bool abbr = false, cap = false;
  for (std::size_t i = 1; i < parts.size(); ++i) {
    abbr = abbr || parts[i] == "abbr";
    cap = cap || parts[i] == "cap";
  }
  auto month = [&] {
    std::string m(detail::kMonths[static_cast<std::size_t>(d.month - 1)]);
    if (abbr) m = m.substr(0, 3);
    if (cap) m[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(m[0])));
    return m;
  };
  auto num = [](int v) { return std::to_string(v); };
  if (id == "MDcY") return month() + " " + num(d.day) + ", " + num(d.year);
  if (id == "MDY") return month() + " " + num(d.day) + " " + num(d.year);
  if (id == "DMY") return num(d.day) + " " + month() + " " + num(d.year);
  if (id == "MY") return month() + " " + num(d.year);
  if (id == "S") return num(d.month) + "/" + num(d.day) + "/" + num(d.year);
  if (id == "M") return month();
  return num(d.year);
}

}  // namespace semc::grammar
