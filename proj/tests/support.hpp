#pragma once

#include <memory>
#include <string>

#include "semc/system.hpp"

namespace semc::testing {

inline std::string data_path(const std::string& rel) { return std::string(SEMC_DATA_DIR) + "/" + rel; }

inline std::string bundle_path(const std::string& domain) { return data_path("domains/" + domain + "/semc.json"); }

inline const grammar::Grammar& grammar_of(const std::string& domain, const std::string& file = "qa.g") {
  static std::map<std::string, std::unique_ptr<grammar::Grammar>> cache;
  auto key = domain + "/" + file;
  auto& g = cache[key];
  if (!g) g = std::make_unique<grammar::Grammar>(grammar::load_grammar(data_path("domains/" + key)));
  return *g;
}

// The two-query log the atomic engine is introduced with.
inline constexpr const char* kRunningLog =
    "ibm bonds maturing in 2020\t2019-03-01\t1\n"
    "bullet bonds with yield > 2 pct\t2019-03-02\t1\n";

inline LogCorpus running_log() { return parse_log(kRunningLog); }

inline std::unique_ptr<System> open_with(const std::string& domain, const LogCorpus& train) {
  return System::open(load_bundle_config(bundle_path(domain)), &train);
}

}  // namespace semc::testing
