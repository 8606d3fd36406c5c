#pragma once

// A loaded domain: grammars, indexes and the coordinator over them, driven by
// a `semc.json` bundle file.

#include <cctype>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "semc/atomic.hpp"
#include "semc/coordinator.hpp"
#include "semc/grammar/engine.hpp"
#include "semc/mpc.hpp"
#include "semc/query_log.hpp"
#include "semc/template_engine.hpp"

namespace semc {

enum class AtomSource { Log, Phrases };

struct BundleConfig {
  std::string dir;  // relative paths below resolve against this
  std::string domain;
  std::string grammar = "qa.g";
  std::string templates;  // empty: no template engine
  std::string log;        // empty: empty log
  AtomSource atom_source = AtomSource::Log;
  std::string phrases, documents, phrase_field = "KEYWORDS";
  std::string mpc_snapshot, atom_snapshot;  // used instead of building when present
  CoordinatorConfig coordinator;
  ScoringParams atomic;
  TemplateParams templates_params;
  std::size_t mpc_k = 50;

  std::string path(const std::string& p) const {
    if (p.empty() || std::filesystem::path(p).is_absolute()) return p;
    return (std::filesystem::path(dir) / p).string();
  }
};

inline Grade grade_from_json(const nlohmann::json& j) {
  std::string s = j.get<std::string>();
  for (auto& ch : s) ch = static_cast<char>(std::toupper(static_cast<unsigned char>(ch)));
  auto g = parse_grade(s);
  if (!g) throw ConfigError("bad grade '" + j.get<std::string>() + "'");
  return *g;
}

inline BundleConfig parse_bundle_config(const std::string& src, const std::string& dir,
                                        const std::string& where = "semc.json") {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(src);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(where + ": " + e.what());
  }
  BundleConfig c;
  c.dir = dir;
  try {
    if (j.value("version", 1) != 1) throw ConfigError(where + ": unsupported version");
    c.domain = j.value("domain", "");
    c.grammar = j.value("grammar", c.grammar);
    c.templates = j.value("templates", "");
    c.log = j.value("log", "");
    auto src_kind = j.value("atom_source", std::string("log"));
    if (src_kind == "log")
      c.atom_source = AtomSource::Log;
    else if (src_kind == "phrases")
      c.atom_source = AtomSource::Phrases;
    else
      throw ConfigError(where + ": atom_source must be 'log' or 'phrases'");
    c.phrases = j.value("phrases", "");
    c.documents = j.value("documents", "");
    c.phrase_field = j.value("phrase_field", c.phrase_field);
    if (j.contains("snapshots")) {
      c.mpc_snapshot = j["snapshots"].value("mpc", "");
      c.atom_snapshot = j["snapshots"].value("atoms", "");
    }
    if (j.contains("coordinator")) {
      const auto& k = j["coordinator"];
      if (k.contains("algorithms")) c.coordinator.algorithms = k["algorithms"].get<std::vector<std::string>>();
      c.coordinator.d = k.value("d", c.coordinator.d);
      c.coordinator.budget_ms = k.value("budget_ms", c.coordinator.budget_ms);
      if (k.contains("grade_floor")) c.coordinator.grade_floor = grade_from_json(k["grade_floor"]);
      if (k.contains("fallback_only")) c.coordinator.fallback_only = k["fallback_only"].get<std::vector<std::string>>();
    }
    if (j.contains("atomic")) {
      const auto& a = j["atomic"];
      c.atomic.n_max = a.value("n_max", c.atomic.n_max);
      c.atomic.backtrack_ratio = a.value("backtrack_ratio", c.atomic.backtrack_ratio);
      c.atomic.ambiguity_threshold = a.value("ambiguity_threshold", c.atomic.ambiguity_threshold);
    }
    if (j.contains("template")) c.templates_params.cap = j["template"].value("cap", c.templates_params.cap);
    if (j.contains("mpc")) c.mpc_k = j["mpc"].value("k", c.mpc_k);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(where + ": " + e.what());
  }
  if (c.atomic.n_max == 0) throw ConfigError(where + ": atomic.n_max must be positive");
  if (c.atom_source == AtomSource::Phrases && c.phrases.empty())
    throw ConfigError(where + ": atom_source 'phrases' needs a 'phrases' file");
  c.coordinator.validate();
  return c;
}

inline BundleConfig load_bundle_config(const std::string& path) {
  return parse_bundle_config(read_file(path), std::filesystem::path(path).parent_path().string(), path);
}

/// Non-empty lines of a text file.
inline std::vector<std::string> read_lines(const std::string& path) {
  std::vector<std::string> out;
  for (auto& l : text::split(read_file(path), '\n')) {
    auto t = text::trim(l);
    if (!t.empty()) out.emplace_back(t);
  }
  return out;
}

class System {
 public:
  struct Parts {
    std::shared_ptr<const grammar::Grammar> qa, templates;
    MpcIndex mpc;
    AtomModel atoms;
    CoordinatorConfig coordinator;
    ScoringParams atomic;
    TemplateParams templates_params;
    std::size_t mpc_k = 50;
  };

  explicit System(Parts p) : parts_(std::move(p)) {
    if (!parts_.qa) throw ConfigError("system: no grammar");
    if (parts_.templates) templates_.emplace(*parts_.templates, *parts_.qa, parts_.templates_params);
    std::vector<Engine> engines;
    engines.push_back({"mpc", [this](std::string_view p, std::size_t d) {
                         return parts_.mpc.complete(p, std::max(d, parts_.mpc_k));
                       }});
    engines.push_back({"atomic", [this](std::string_view p, std::size_t d) {
                         return complete_atomic(parts_.atoms, *parts_.qa, p, d, parts_.atomic);
                       }});
    engines.push_back({"template", [this](std::string_view p, std::size_t d) {
                         return templates_ ? templates_->complete(p, d) : std::vector<Completion>{};
                       }});
    auto cfg = parts_.coordinator;
    if (!templates_) std::erase(cfg.algorithms, std::string("template"));
    if (cfg.algorithms.empty()) cfg.algorithms = {"mpc"};
    coordinator_ = std::make_unique<Coordinator>(std::move(engines), cfg);
  }

  /// Loads or builds everything a bundle names. With `train`, indexes are
  /// built from that log instead of the bundle's log and snapshots.
  static std::unique_ptr<System> open(const BundleConfig& c, const LogCorpus* train = nullptr) {
    LexiconStore store;
    Parts p;
    p.qa = std::make_shared<const grammar::Grammar>(grammar::load_grammar(c.path(c.grammar), store));
    if (!c.templates.empty())
      p.templates = c.templates == c.grammar
                        ? p.qa
                        : std::make_shared<const grammar::Grammar>(grammar::load_grammar(c.path(c.templates), store));
    LogCorpus log;
    if (train)
      log = *train;
    else if (!c.log.empty())
      log = load_log(c.path(c.log));
    log.domain = c.domain;
    bool have_mpc = !train && !c.mpc_snapshot.empty() && std::filesystem::exists(c.path(c.mpc_snapshot));
    p.mpc = have_mpc ? MpcIndex::load(c.path(c.mpc_snapshot)) : MpcIndex::build(log, *p.qa);
    bool have_atoms = !train && !c.atom_snapshot.empty() && std::filesystem::exists(c.path(c.atom_snapshot));
    if (have_atoms)
      p.atoms = AtomModel::load(c.path(c.atom_snapshot));
    else
      p.atoms = build_atoms(c, log, *p.qa);
    p.coordinator = c.coordinator;
    p.atomic = c.atomic;
    p.templates_params = c.templates_params;
    p.mpc_k = c.mpc_k;
    return std::make_unique<System>(std::move(p));
  }

  static std::unique_ptr<System> open(const std::string& bundle_path) {
    return open(load_bundle_config(bundle_path));
  }

  static AtomModel build_atoms(const BundleConfig& c, const LogCorpus& log, const grammar::Grammar& qa) {
    if (c.atom_source == AtomSource::Log) return AtomModel::build(log, qa);
    auto phrases = parse_phrase_list(read_file(c.path(c.phrases)), c.path(c.phrases));
    std::vector<std::string> docs;
    if (!c.documents.empty()) docs = read_lines(c.path(c.documents));
    return AtomModel::from_phrases(phrases, docs, c.phrase_field);
  }

  Coordinated run(std::string_view prefix, std::optional<std::size_t> d = std::nullopt) const {
    return coordinator_->run(prefix, d);
  }
  std::vector<Completion> complete(std::string_view prefix, std::optional<std::size_t> d = std::nullopt) const {
    return coordinator_->complete(prefix, d);
  }

  std::optional<Derivation> parse(std::string_view q) const { return grammar::best_parse(*parts_.qa, q); }
  grammar::Completability completability(std::string_view p) const {
    return grammar::completability(*parts_.qa, p);
  }

  const grammar::Grammar& grammar() const { return *parts_.qa; }
  const grammar::Grammar* template_grammar() const { return parts_.templates.get(); }
  const MpcIndex& mpc() const { return parts_.mpc; }
  const AtomModel& atoms() const { return parts_.atoms; }
  const ScoringParams& atomic_params() const { return parts_.atomic; }
  const TemplateEngine* templates() const { return templates_ ? &*templates_ : nullptr; }
  const CoordinatorConfig& config() const { return coordinator_->config(); }

 private:
  Parts parts_;
  std::optional<TemplateEngine> templates_;
  std::unique_ptr<Coordinator> coordinator_;  // last: its workers call into the members above
};

}  // namespace semc
