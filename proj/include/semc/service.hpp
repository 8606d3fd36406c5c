#pragma once

// HTTP front end: /complete, /parse, /completability and /health over a
// loaded System. Responses are JSON and carry the handler time in a header.

#include <charconv>
#include <chrono>
#include <cstdlib>
#include <memory>
#include <optional>
#include <string>
#include <string_view>

#include "httplib.h"
#include "json.hpp"

#include "semc/system.hpp"

namespace semc::service {

inline constexpr int kApiVersion = 1;

inline nlohmann::json completion_json(const Completion& c) {
  return {{"completion", c.completion},        {"interpretation", canonical_key(c.interpretation)},
          {"dtype", c.dtype},                  {"grade", grade_name(c.grade)},
          {"source", c.source},                {"score", c.score}};
}

inline nlohmann::json complete_json(const System& sys, std::string_view prefix, std::optional<std::size_t> k) {
  auto r = sys.run(prefix, k);
  nlohmann::json j{{"version", kApiVersion}, {"prefix", prefix}, {"completions", nlohmann::json::array()}};
  for (const auto& c : r.completions) j["completions"].push_back(completion_json(c));
  j["overran"] = r.overran;
  return j;
}

inline nlohmann::json parse_json(const System& sys, std::string_view q) {
  nlohmann::json j{{"version", kApiVersion}, {"query", q}};
  auto d = sys.parse(q);
  j["parsed"] = d.has_value();
  if (!d) return j;
  j["interpretation"] = canonical_key(d->formula());
  j["atoms"] = nlohmann::json::array();
  for (const auto& a : d->atoms)
    j["atoms"].push_back({{"begin", a.begin}, {"end", a.end}, {"atom", serialize(a.atom)}, {"dtype", atom_type(a.atom)}});
  return j;
}

inline nlohmann::json completability_json(const System& sys, std::string_view prefix) {
  auto c = sys.completability(prefix);
  nlohmann::json j{{"version", kApiVersion}, {"prefix", prefix}, {"completable", c.completable}};
  j["fail_at"] = c.completable ? nlohmann::json(nullptr) : nlohmann::json(c.fail_at);
  return j;
}

struct Bind {
  std::string host = "127.0.0.1";
  int port = 8080;
};

/// "host:port", ":port" or "port".
inline Bind parse_bind(std::string_view s) {
  Bind b;
  if (s.empty()) return b;
  auto colon = s.rfind(':');
  std::string_view port = colon == std::string_view::npos ? s : s.substr(colon + 1);
  if (colon != std::string_view::npos && colon > 0) b.host = std::string(s.substr(0, colon));
  int v = 0;
  auto r = std::from_chars(port.data(), port.data() + port.size(), v);
  if (r.ec != std::errc{} || r.ptr != port.data() + port.size() || v < 0 || v > 65535)
    throw ConfigError("bad bind address '" + std::string(s) + "'");
  b.port = v;
  return b;
}

inline Bind bind_from_env() {
  const char* v = std::getenv("SEMC_BIND");
  return parse_bind(v ? v : "");
}

struct Options {
  std::string cors_origin = "*";
  std::size_t max_k = 50;
};

/// Routes over `sys`; the caller owns both and calls listen().
inline std::unique_ptr<httplib::Server> make_server(const System& sys, Options opt = {}) {
  auto srv = std::make_unique<httplib::Server>();
  auto timed = [opt](auto body) {
    return [opt, body](const httplib::Request& req, httplib::Response& res) {
      auto t0 = std::chrono::steady_clock::now();
      nlohmann::json j;
      try {
        j = body(req);
      } catch (const std::exception& e) {
        res.status = 400;
        j = {{"version", kApiVersion}, {"error", e.what()}};
      }
      res.set_content(j.dump(), "application/json");
      auto us = std::chrono::duration_cast<std::chrono::microseconds>(std::chrono::steady_clock::now() - t0).count();
      res.set_header("X-Handler-Time-Us", std::to_string(us));
      if (!opt.cors_origin.empty()) res.set_header("Access-Control-Allow-Origin", opt.cors_origin);
    };
  };
  auto required = [](const httplib::Request& req, const char* name) {
    if (!req.has_param(name)) throw Error(std::string("missing parameter '") + name + "'");
    return req.get_param_value(name);
  };
  srv->Get("/complete", timed([&sys, opt, required](const httplib::Request& req) {
             std::optional<std::size_t> k;
             if (req.has_param("k")) {
               auto s = req.get_param_value("k");
               std::size_t v = 0;
               auto r = std::from_chars(s.data(), s.data() + s.size(), v);
               if (r.ec != std::errc{} || r.ptr != s.data() + s.size() || v == 0 || v > opt.max_k)
                 throw Error("k must be an integer in [1, " + std::to_string(opt.max_k) + "]");
               k = v;
             }
             return complete_json(sys, required(req, "prefix"), k);
           }));
  srv->Get("/parse", timed([&sys, required](const httplib::Request& req) { return parse_json(sys, required(req, "q")); }));
  srv->Get("/completability", timed([&sys, required](const httplib::Request& req) {
             return completability_json(sys, required(req, "prefix"));
           }));
  srv->Get("/health", timed([](const httplib::Request&) { return nlohmann::json{{"status", "ok"}}; }));
  srv->Options(R"(/.*)", [opt](const httplib::Request&, httplib::Response& res) {
    if (!opt.cors_origin.empty()) res.set_header("Access-Control-Allow-Origin", opt.cors_origin);
    res.set_header("Access-Control-Allow-Methods", "GET, OPTIONS");
    res.set_header("Access-Control-Allow-Headers", "Content-Type");
    res.status = 204;
  });
  return srv;
}

}  // namespace semc::service
