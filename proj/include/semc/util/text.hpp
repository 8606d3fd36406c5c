#pragma once

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace semc {

/// A normalized input token. `lead` is the separator that precedes it in the
/// normalized rendering: " ", "-" (intra-word hyphen) or "" (first token, comma).
struct Token {
  std::string text;     // case-folded
  std::string lead;
  std::string surface;  // as typed
  std::size_t raw_begin = 0;
  std::size_t raw_end = 0;

  friend bool operator==(const Token& a, const Token& b) {
    return a.text == b.text && a.lead == b.lead;
  }
};

namespace text {

inline bool is_space(char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; }
inline bool is_alnum(char c) { return std::isalnum(static_cast<unsigned char>(c)) != 0; }
inline char lower(char c) { return static_cast<char>(std::tolower(static_cast<unsigned char>(c))); }

inline std::string to_lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(), lower);
  return out;
}

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && is_space(s.front())) s.remove_prefix(1);
  while (!s.empty() && is_space(s.back())) s.remove_suffix(1);
  return s;
}

inline bool starts_with(std::string_view s, std::string_view prefix) {
  return s.size() >= prefix.size() && s.compare(0, prefix.size(), prefix) == 0;
}

inline std::vector<std::string> split(std::string_view s, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    auto at = s.find(sep, start);
    out.emplace_back(s.substr(start, at == std::string_view::npos ? s.npos : at - start));
    if (at == std::string_view::npos) break;
    start = at + 1;
  }
  return out;
}

/// Case-folds and splits on whitespace, commas, and hyphens joining two word
/// characters. Commas become tokens of their own.
inline std::vector<Token> tokenize(std::string_view raw) {
  std::vector<Token> out;
  std::string cur;
  std::size_t cur_begin = 0;
  std::string pending_lead = "";
  auto flush = [&](std::size_t end) {
    if (cur.empty()) return;
    out.push_back(Token{cur, out.empty() ? "" : pending_lead,
                        std::string(raw.substr(cur_begin, end - cur_begin)), cur_begin, end});
    cur.clear();
    pending_lead = " ";
  };
  for (std::size_t i = 0; i < raw.size(); ++i) {
    char c = raw[i];
    if (is_space(c)) {
      flush(i);
      pending_lead = " ";
      continue;
    }
    if (c == ',') {
      flush(i);
      out.push_back(Token{",", "", ",", i, i + 1});
      pending_lead = " ";
      continue;
    }
    if (c == '-' && !cur.empty() && is_alnum(cur.back()) &&
        (i + 1 == raw.size() || is_alnum(raw[i + 1]))) {
      flush(i);
      pending_lead = "-";
      continue;
    }
    if (cur.empty()) cur_begin = i;
    cur.push_back(lower(c));
  }
  flush(raw.size());
  if (!out.empty()) out.front().lead.clear();
  return out;
}

/// True when the last token may still be growing, i.e. the input does not end
/// in a separator.
inline bool ends_mid_token(std::string_view raw) {
  if (raw.empty()) return false;
  char c = raw.back();
  return !is_space(c) && c != ',' && c != '-';
}

/// Display rendering: tokens joined by their leads.
inline std::string render(std::span<const Token> tokens) {
  std::string out;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (i > 0) out += tokens[i].lead;
    out += tokens[i].text;
  }
  return out;
}

/// Lookup key: token texts joined by single spaces.
inline std::string join_key(std::span<const Token> tokens) {
  std::string out;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (i > 0) out += ' ';
    out += tokens[i].text;
  }
  return out;
}

inline std::string render_surface(std::span<const Token> tokens) {
  std::string out;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (i > 0) out += tokens[i].lead;
    out += tokens[i].surface;
  }
  return out;
}

inline std::string normalize(std::string_view raw) { return render(tokenize(raw)); }
inline std::string normalize_key(std::string_view raw) { return join_key(tokenize(raw)); }

inline std::string format_double(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

inline std::string escape_json_like(std::string_view s) {
  std::string out;
  for (char c : s) {
    if (c == '"' || c == '\\') out.push_back('\\');
    out.push_back(c);
  }
  return out;
}

}  // namespace text
}  // namespace semc
