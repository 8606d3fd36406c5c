#pragma once

// Query logs: `text<TAB>YYYY-MM-DD<TAB>frequency` per line.

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstdint>
#include <fstream>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "semc/errors.hpp"
#include "semc/grammar/engine.hpp"
#include "semc/lexicon.hpp"

namespace semc {

struct CalendarDate {
  int year = 1970, month = 1, day = 1;
  friend bool operator==(const CalendarDate&, const CalendarDate&) = default;
  friend auto operator<=>(const CalendarDate&, const CalendarDate&) = default;
};

inline bool valid(const CalendarDate& d) {
  return d.month >= 1 && d.month <= 12 && d.day >= 1 && d.day <= grammar::days_in_month(d.month, d.year);
}

inline std::optional<CalendarDate> parse_iso_date(std::string_view s) {
  if (s.size() != 10 || s[4] != '-' || s[7] != '-') return std::nullopt;
  auto num = [&](std::size_t at, std::size_t len) {
    int v = -1;
    auto r = std::from_chars(s.data() + at, s.data() + at + len, v);
    return r.ec == std::errc{} && r.ptr == s.data() + at + len ? v : -1;
  };
  CalendarDate d{num(0, 4), num(5, 2), num(8, 2)};
  if (d.year < 0 || !valid(d)) return std::nullopt;
  return d;
}

inline std::string format_iso(const CalendarDate& d) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%04d-%02d-%02d", d.year, d.month, d.day);
  return buf;
}

// days since 1970-01-01 (proleptic Gregorian)
inline std::int64_t days_from_civil(const CalendarDate& d) {
  std::int64_t y = d.year - (d.month <= 2);
  std::int64_t era = (y >= 0 ? y : y - 399) / 400;
  std::int64_t yoe = y - era * 400;
  std::int64_t doy = (153 * (d.month + (d.month > 2 ? -3 : 9)) + 2) / 5 + d.day - 1;
  std::int64_t doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
  return era * 146097 + doe - 719468;
}

inline CalendarDate civil_from_days(std::int64_t z) {
  z += 719468;
  std::int64_t era = (z >= 0 ? z : z - 146096) / 146097;
  std::int64_t doe = z - era * 146097;
  std::int64_t yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
  std::int64_t y = yoe + era * 400;
  std::int64_t doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
  std::int64_t mp = (5 * doy + 2) / 153;
  int d = static_cast<int>(doy - (153 * mp + 2) / 5 + 1);
  int m = static_cast<int>(mp < 10 ? mp + 3 : mp - 9);
  return CalendarDate{static_cast<int>(y + (m <= 2)), m, d};
}

struct LoggedQuery {
  std::string text;
  CalendarDate t_q;
  std::uint64_t frequency = 1;
  friend bool operator==(const LoggedQuery&, const LoggedQuery&) = default;
};

struct LogCorpus {
  std::vector<LoggedQuery> queries;
  std::string domain;
  friend bool operator==(const LogCorpus&, const LogCorpus&) = default;
};

inline LogCorpus parse_log(std::string_view src, const std::string& where = "log") {
  LogCorpus c;
  std::size_t pos = 0, lineno = 0;
  while (pos < src.size()) {
    auto nl = src.find('\n', pos);
    std::string_view line = src.substr(pos, nl == std::string_view::npos ? src.npos : nl - pos);
    pos = nl == std::string_view::npos ? src.size() : nl + 1;
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (text::trim(line).empty() || line.front() == '#') continue;
    auto cols = text::split(line, '\t');
    if (cols.size() != 3) throw ParseError(where, lineno, 1, "expected text<TAB>date<TAB>frequency");
    LoggedQuery q;
    q.text = std::string(text::trim(cols[0]));
    if (q.text.empty()) throw ParseError(where, lineno, 1, "empty query text");
    auto d = parse_iso_date(text::trim(cols[1]));
    if (!d) throw ParseError(where, lineno, cols[0].size() + 2, "bad date '" + cols[1] + "'");
    q.t_q = *d;
    auto f = text::trim(cols[2]);
    auto r = std::from_chars(f.data(), f.data() + f.size(), q.frequency);
    if (r.ec != std::errc{} || r.ptr != f.data() + f.size() || q.frequency == 0)
      throw ParseError(where, lineno, cols[0].size() + cols[1].size() + 3, "frequency must be a positive integer");
    c.queries.push_back(std::move(q));
  }
  return c;
}

inline LogCorpus load_log(const std::string& path) { return parse_log(read_file(path), path); }

inline std::string format_log(const LogCorpus& c) {
  std::string out;
  for (const auto& q : c.queries)
    out += q.text + "\t" + format_iso(q.t_q) + "\t" + std::to_string(q.frequency) + "\n";
  return out;
}

inline void save_log(const LogCorpus& c, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path);
  out << format_log(c);
}

// ---------------------------------------------------------------- time shift

/// Calendar delta between two dates, kept per component.
struct CalendarDelta {
  int months = 0;  // years folded in
  int days = 0;
};

inline CalendarDelta delta(const CalendarDate& from, const CalendarDate& to) {
  return {(to.year * 12 + to.month) - (from.year * 12 + from.month), to.day - from.day};
}

/// Adds a delta component-wise; a day that falls off the month is clamped
/// into it and `clamped` is set.
inline CalendarDate shift(const CalendarDate& d, const CalendarDelta& dl, bool* clamped = nullptr) {
  int idx = d.year * 12 + (d.month - 1) + dl.months;
  CalendarDate out{idx / 12, idx % 12 + 1, d.day + dl.days};
  int last = grammar::days_in_month(out.month, out.year);
  bool clamp = out.day < 1 || out.day > last;
  out.day = std::clamp(out.day, 1, last);
  if (clamped) *clamped = clamp;
  return out;
}

struct ShiftResult {
  LoggedQuery query;
  bool unparsed = false;  // returned unchanged
  bool clamped = false;
  std::size_t shifted = 0;  // dates rewritten
};

/// Moves every fully specified date in `q` by (t_now - t_q), rewriting the
/// text in the date's own surface format.
inline ShiftResult time_shift(const grammar::Grammar& g, const LoggedQuery& q, const CalendarDate& t_now) {
  ShiftResult r{q};
  auto tokens = text::tokenize(q.text);
  auto parses = grammar::parse_tokens(g, tokens);
  if (parses.empty()) {
    r.unparsed = true;
    return r;
  }
  auto dl = delta(q.t_q, t_now);
  struct Edit {
    std::size_t begin, end;
    std::string text;
  };
  std::vector<Edit> edits;
  for (const auto& a : parses.front().derivation.atoms) {
    auto* d = std::get_if<ExactDate>(&a.atom.value);
    if (!d || !d->fully_specified() || a.value_format.empty()) continue;
    bool clamped = false;
    auto moved = shift(CalendarDate{d->year, d->month, d->day}, dl, &clamped);
    r.clamped = r.clamped || clamped;
    ExactDate nd{moved.day, moved.month, moved.year};
    edits.push_back({tokens[a.value_begin].raw_begin, tokens[a.value_end - 1].raw_end,
                     grammar::format_date(nd, a.value_format)});
  }
  std::sort(edits.begin(), edits.end(), [](const Edit& a, const Edit& b) { return a.begin > b.begin; });
  for (const auto& e : edits) r.query.text.replace(e.begin, e.end - e.begin, e.text);
  r.shifted = edits.size();
  r.query.t_q = t_now;
  return r;
}

// ---------------------------------------------------------------- synthesis

struct SynthOptions {
  std::size_t n = 1000;
  std::uint64_t seed = 7;
  CalendarDate first_day{2018, 1, 1};
  int span_days = 730;
  double top_frequency = 1000;  // frequency of rank 1
};

/// n distinct parsable queries from random walks over the grammar, with
/// frequencies falling off as 1/rank.
inline LogCorpus synthesize(const grammar::Grammar& g, const SynthOptions& opt) {
  if (opt.n == 0) throw Error("synthesize: n must be positive");
  std::mt19937_64 rng(opt.seed);
  LogCorpus c;
  std::set<std::string> seen;
  std::size_t attempts = 0;
  const std::size_t max_attempts = opt.n * 200 + 1000;
  std::uniform_int_distribution<int> day(0, opt.span_days - 1);
  while (c.queries.size() < opt.n && attempts++ < max_attempts) {
    auto s = grammar::sample(g, rng);
    if (!s) continue;
    std::set<std::string> atoms;
    bool repeated = false;
    for (const auto& a : s->atoms) repeated = repeated || !atoms.insert(serialize(a.atom)).second;
    if (repeated) continue;
    std::string text = text::render_surface(s->tokens);
    std::string key = text::normalize(text);
    if (seen.count(key)) continue;
    auto parses = grammar::parse(g, text);
    if (parses.empty() || parses.front().derivation.atoms.empty()) continue;
    seen.insert(key);
    LoggedQuery q;
    q.text = std::move(text);
    q.t_q = civil_from_days(days_from_civil(opt.first_day) + day(rng));
    c.queries.push_back(std::move(q));
  }
  if (c.queries.size() < opt.n)
    throw Error("synthesize: grammar yielded only " + std::to_string(c.queries.size()) + " distinct queries");
  for (std::size_t r = 0; r < c.queries.size(); ++r)
    c.queries[r].frequency =
        std::max<std::uint64_t>(1, static_cast<std::uint64_t>(std::llround(opt.top_frequency / double(r + 1))));
  return c;
}

}  // namespace semc
