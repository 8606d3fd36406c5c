// Operator tool: index building, log synthesis and time shifting,
// evaluation, benchmarking, one-shot completion and the HTTP service.

#include <csignal>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <random>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"

#include "semc/eval.hpp"
#include "semc/service.hpp"
#include "semc/system.hpp"

#ifndef SEMC_DATA_DIR
#define SEMC_DATA_DIR "data"
#endif

namespace {

using namespace semc;
using nlohmann::json;

std::string data_dir() {
  const char* env = std::getenv("SEMC_DATA");
  return env && *env ? env : SEMC_DATA_DIR;
}

/// --config wins; otherwise --domain NAME names data/domains/NAME/semc.json.
BundleConfig bundle(const std::string& config, const std::string& domain) {
  if (!config.empty()) return load_bundle_config(config);
  if (domain.empty()) throw ConfigError("need --domain or --config");
  auto path = std::filesystem::path(data_dir()) / "domains" / domain / "semc.json";
  if (!std::filesystem::exists(path)) throw ConfigError("no bundle for domain '" + domain + "' at " + path.string());
  return load_bundle_config(path.string());
}

/// An explicit --grammar, else the bundle's.
grammar::Grammar grammar_for(const std::string& grammar_path, const std::string& config, const std::string& domain) {
  if (!grammar_path.empty()) return grammar::load_grammar(grammar_path);
  auto c = bundle(config, domain);
  return grammar::load_grammar(c.path(c.grammar));
}

CalendarDate date_arg(const std::string& s, const char* what) {
  auto d = parse_iso_date(s);
  if (!d) throw ConfigError(std::string(what) + ": expected YYYY-MM-DD, got '" + s + "'");
  return *d;
}

void write_or_print(const std::string& out, const std::string& content) {
  if (out.empty() || out == "-") {
    std::cout << content;
    return;
  }
  std::ofstream f(out, std::ios::binary);
  if (!f) throw Error("cannot write " + out);
  f << content;
}

std::string fmt_ms(double v) {
  std::ostringstream s;
  s << std::fixed << std::setprecision(3) << v;
  return s.str();
}

void print_latency(const eval::LatencySummary& l) {
  std::cout << "samples " << l.samples << "\n"
            << "mean_ms " << fmt_ms(l.mean) << "\n"
            << "p90_ms  " << fmt_ms(l.p90) << "\n"
            << "p95_ms  " << fmt_ms(l.p95) << "\n"
            << "p99_ms  " << fmt_ms(l.p99) << "\n";
}

std::function<void()> stop_server;
void on_signal(int) {
  if (stop_server) stop_server();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"semantic auto-completion"};
  app.require_subcommand(1);
  bool as_json = false;
  std::string config, domain, grammar_path;
  auto domain_opts = [&](CLI::App* sub) {
    sub->add_option("--domain", domain, "domain bundle name under the data directory");
    sub->add_option("--config", config, "path to a semc.json bundle");
    sub->add_flag("--json", as_json, "machine-readable output");
  };

  // build-index
  auto* build_index = app.add_subcommand("build-index", "build the logged-query index snapshot");
  std::string log_path, out_path;
  build_index->add_option("--log", log_path, "query log")->required();
  build_index->add_option("--grammar", grammar_path, "question grammar");
  build_index->add_option("--out", out_path, "snapshot file")->required();
  domain_opts(build_index);

  // build-atom-model
  auto* build_atoms = app.add_subcommand("build-atom-model", "build the atom model snapshot");
  std::string phrases_path, documents_path, phrase_field = "KEYWORDS", dump_path;
  build_atoms->add_option("--log", log_path, "query log");
  build_atoms->add_option("--phrases", phrases_path, "phrase list (phrase<TAB>count) instead of a log");
  build_atoms->add_option("--documents", documents_path, "one document per line, for phrase contexts");
  build_atoms->add_option("--field", phrase_field, "field of phrase atoms");
  build_atoms->add_option("--grammar", grammar_path, "question grammar");
  build_atoms->add_option("--out", out_path, "snapshot file");
  build_atoms->add_option("--dump", dump_path, "readable dump ('-' for stdout)");
  domain_opts(build_atoms);

  // synth
  auto* synth = app.add_subcommand("synth", "generate a synthetic query log");
  SynthOptions so;
  std::string first_day = "2018-01-01";
  synth->add_option("--n", so.n, "number of queries")->check(CLI::PositiveNumber);
  synth->add_option("--seed", so.seed, "random seed");
  synth->add_option("--first-day", first_day, "earliest observation date");
  synth->add_option("--span-days", so.span_days, "observation window in days")->check(CLI::PositiveNumber);
  synth->add_option("--grammar", grammar_path, "grammar to sample");
  synth->add_option("--out", out_path, "log file (stdout if omitted)");
  domain_opts(synth);

  // timeshift
  auto* timeshift = app.add_subcommand("timeshift", "move explicit dates in a log to a new observation date");
  std::string now_arg, in_path;
  timeshift->add_option("--now", now_arg, "new observation date")->required();
  timeshift->add_option("--in", in_path, "input log")->required();
  timeshift->add_option("--out", out_path, "output log (stdout if omitted)");
  timeshift->add_option("--grammar", grammar_path, "question grammar");
  domain_opts(timeshift);

  // eval
  auto* evalc = app.add_subcommand("eval", "predictiveness and latency over test prefixes");
  std::string train_path, test_path, predicates = "STR,PSTR,BOW,PBOW,SEM,PSEM", averaging = "prefix";
  eval::EvalConfig ecfg;
  evalc->add_option("--train", train_path, "training log")->required();
  evalc->add_option("--test", test_path, "test log")->required();
  evalc->add_option("--grammar", grammar_path, "grammar for SEM/PSEM (default: the bundle's)");
  evalc->add_option("--predicates", predicates, "comma-separated predicates");
  evalc->add_option("--min-prefix", ecfg.min_prefix, "shortest prefix in characters")->check(CLI::PositiveNumber);
  evalc->add_option("--k", ecfg.k, "completions per prefix")->check(CLI::PositiveNumber);
  evalc->add_option("--averaging", averaging, "prefix or query")->check(CLI::IsMember({"prefix", "query"}));
  evalc->add_option("--out", out_path, "report file");
  domain_opts(evalc);

  // bench
  auto* bench = app.add_subcommand("bench", "completion latency over a prefix file");
  std::string prefixes_path;
  std::size_t repeat = 1;
  bench->add_option("--prefixes", prefixes_path, "one prefix per line")->required();
  bench->add_option("--repeat", repeat, "passes over the file")->check(CLI::PositiveNumber);
  domain_opts(bench);

  // serve
  auto* serve = app.add_subcommand("serve", "HTTP service (bind address from SEMC_BIND)");
  std::string bind_arg, cors = "*";
  serve->add_option("--bind", bind_arg, "host:port (overrides SEMC_BIND)");
  serve->add_option("--cors-origin", cors, "Access-Control-Allow-Origin value ('' disables)");
  domain_opts(serve);

  // complete
  auto* complete = app.add_subcommand("complete", "complete one prefix");
  std::string prefix;
  std::size_t k = 0;
  complete->add_option("--prefix", prefix, "typed prefix")->required();
  complete->add_option("--k", k, "number of completions (default: bundle d)");
  domain_opts(complete);

  CLI11_PARSE(app, argc, argv);

  try {
    if (*build_index) {
      auto g = grammar_for(grammar_path, config, domain);
      MpcBuildStats st;
      auto idx = MpcIndex::build(load_log(log_path), g, &st);
      idx.save(out_path);
      if (as_json)
        std::cout << json{{"queries", st.queries}, {"indexed", st.indexed}, {"dropped", st.dropped}}.dump() << "\n";
      else
        std::cout << "queries " << st.queries << "\nindexed " << st.indexed << "\ndropped " << st.dropped << "\n";
    } else if (*build_atoms) {
      AtomModel m;
      AtomBuildStats st;
      if (!phrases_path.empty()) {
        std::vector<std::string> docs;
        if (!documents_path.empty()) docs = read_lines(documents_path);
        m = AtomModel::from_phrases(parse_phrase_list(read_file(phrases_path), phrases_path), docs, phrase_field);
      } else {
        if (log_path.empty()) throw ConfigError("need --log or --phrases");
        auto g = grammar_for(grammar_path, config, domain);
        m = AtomModel::build(load_log(log_path), g, &st);
      }
      if (!out_path.empty()) m.save(out_path);
      if (!dump_path.empty()) write_or_print(dump_path, m.dump());
      if (dump_path != "-") {
        if (as_json)
          std::cout << json{{"atoms", m.size()}, {"queries", st.queries}, {"skipped", st.skipped}}.dump() << "\n";
        else
          std::cout << "atoms " << m.size() << "\nqueries " << st.queries << "\nskipped " << st.skipped << "\n";
      }
    } else if (*synth) {
      so.first_day = date_arg(first_day, "--first-day");
      auto g = grammar_for(grammar_path, config, domain);
      auto log = synthesize(g, so);
      write_or_print(out_path, format_log(log));
    } else if (*timeshift) {
      auto now = date_arg(now_arg, "--now");
      auto g = grammar_for(grammar_path, config, domain);
      auto log = load_log(in_path);
      std::size_t unparsed = 0, clamped = 0, dates = 0;
      for (auto& q : log.queries) {
        auto r = time_shift(g, q, now);
        unparsed += r.unparsed;
        clamped += r.clamped;
        dates += r.shifted;
        if (r.unparsed) std::cerr << "warning: not shifted (does not parse): " << q.text << "\n";
        q = r.query;
      }
      write_or_print(out_path, format_log(log));
      std::cerr << "dates " << dates << " clamped " << clamped << " unparsed " << unparsed << "\n";
    } else if (*evalc) {
      auto c = bundle(config, domain);
      auto train = load_log(train_path);
      auto test = load_log(test_path);
      auto sys = System::open(c, &train);
      std::optional<grammar::Grammar> own;
      if (!grammar_path.empty()) own = grammar::load_grammar(grammar_path);
      eval::ParseCache parses(own ? &*own : &sys->grammar());
      ecfg.predicates.clear();
      for (auto& p : text::split(predicates, ',')) ecfg.predicates.push_back(eval::parse_predicate(text::trim(p)));
      ecfg.averaging = averaging == "query" ? eval::Averaging::Query : eval::Averaging::Prefix;
      std::vector<std::string> queries;
      for (auto& q : test.queries) queries.push_back(q.text);
      auto report = eval::evaluate(
          [&](std::string_view p, std::size_t kk) {
            std::vector<std::string> out;
            for (auto& cpl : sys->complete(p, kk)) out.push_back(cpl.completion);
            return out;
          },
          queries, ecfg, &parses);
      auto j = eval::to_json(report);
      if (!out_path.empty()) write_or_print(out_path, j.dump(2) + "\n");
      if (as_json) {
        std::cout << j.dump(2) << "\n";
      } else {
        std::cout << "queries " << report.queries << "\nprefixes " << report.prefixes << "\n";
        for (auto& [p, v] : report.mrr) std::cout << "MRR " << eval::predicate_name(p) << " " << fmt_ms(v) << "\n";
        print_latency(report.latency);
      }
    } else if (*bench) {
      auto sys = System::open(bundle(config, domain));
      auto prefixes = read_lines(prefixes_path);
      if (prefixes.empty()) throw Error("no prefixes in " + prefixes_path);
      std::vector<double> ms;
      for (std::size_t r = 0; r < repeat; ++r)
        for (const auto& p : prefixes) {
          auto t0 = std::chrono::steady_clock::now();
          sys->complete(p);
          ms.push_back(std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count());
        }
      auto l = eval::summarize_latency(ms);
      if (as_json)
        std::cout << eval::latency_json(l).dump(2) << "\n";
      else
        print_latency(l);
    } else if (*serve) {
      auto sys = System::open(bundle(config, domain));
      auto b = bind_arg.empty() ? service::bind_from_env() : service::parse_bind(bind_arg);
      service::Options opt;
      opt.cors_origin = cors;
      auto srv = service::make_server(*sys, opt);
      stop_server = [&] { srv->stop(); };
      std::signal(SIGINT, on_signal);
      std::signal(SIGTERM, on_signal);
      std::cerr << "listening on " << b.host << ":" << b.port << "\n";
      if (!srv->listen(b.host, b.port)) throw Error("cannot listen on " + b.host + ":" + std::to_string(b.port));
    } else if (*complete) {
      auto sys = System::open(bundle(config, domain));
      auto r = sys->run(prefix, k ? std::optional<std::size_t>(k) : std::nullopt);
      if (as_json) {
        json j = json::array();
        for (auto& c : r.completions) j.push_back(service::completion_json(c));
        std::cout << j.dump(2) << "\n";
      } else {
        for (auto& c : r.completions)
          std::cout << c.completion << "\t" << canonical_key(c.interpretation) << "\t" << c.dtype << "\t"
                    << grade_name(c.grade) << "\t" << c.source << "\n";
        if (r.completions.empty()) std::cout << "(no completions)\n";
      }
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
