#include <gtest/gtest.h>

#include <thread>

#include "semc/service.hpp"
#include "support.hpp"

using namespace semc;
using namespace semc::testing;
using nlohmann::json;

TEST(BundleConfig, ParsesAndValidates) {
  auto c = parse_bundle_config(R"({"domain": "x", "coordinator": {"d": 4, "grade_floor": "medium"}})", "/tmp/b");
  EXPECT_EQ(c.domain, "x");
  EXPECT_EQ(c.coordinator.d, 4u);
  EXPECT_EQ(c.coordinator.grade_floor, Grade::Medium);
  EXPECT_EQ(c.path("qa.g"), "/tmp/b/qa.g");
  EXPECT_EQ(c.path("/abs/qa.g"), "/abs/qa.g");
  EXPECT_THROW(parse_bundle_config("{", "."), ConfigError);
  EXPECT_THROW(parse_bundle_config(R"({"version": 2})", "."), ConfigError);
  EXPECT_THROW(parse_bundle_config(R"({"atom_source": "web"})", "."), ConfigError);
  EXPECT_THROW(parse_bundle_config(R"({"atom_source": "phrases"})", "."), ConfigError);
  EXPECT_THROW(parse_bundle_config(R"({"coordinator": {"d": 0}})", "."), ConfigError);
  EXPECT_THROW(parse_bundle_config(R"({"coordinator": {"grade_floor": "top"}})", "."), ConfigError);
  EXPECT_THROW(parse_bundle_config(R"({"atomic": {"n_max": 0}})", "."), ConfigError);
  EXPECT_THROW(parse_bundle_config(R"({"coordinator": {"d": "ten"}})", "."), ConfigError);
  EXPECT_THROW(load_bundle_config("/nonexistent/semc.json"), Error);
}

TEST(BundleConfig, PhraseAtomSource) {
  auto c = parse_bundle_config(
      R"({"domain": "news", "log": "log.tsv", "atom_source": "phrases",
          "phrases": "phrases.tsv", "documents": "headlines.txt",
          "coordinator": {"algorithms": ["atomic"]}})",
      data_path("domains/news"));
  auto sys = System::open(c);
  auto out = sys->complete("trump c");
  ASSERT_FALSE(out.empty());
  EXPECT_EQ(out[0].completion, "trump china tariffs");
}

TEST(Bind, Parses) {
  auto b = service::parse_bind("");
  EXPECT_EQ(b.host, "127.0.0.1");
  EXPECT_EQ(b.port, 8080);
  b = service::parse_bind("0.0.0.0:9000");
  EXPECT_EQ(b.host, "0.0.0.0");
  EXPECT_EQ(b.port, 9000);
  EXPECT_EQ(service::parse_bind(":81").port, 81);
  EXPECT_EQ(service::parse_bind(":81").host, "127.0.0.1");
  EXPECT_EQ(service::parse_bind("7000").port, 7000);
  EXPECT_THROW(service::parse_bind("host:http"), ConfigError);
  EXPECT_THROW(service::parse_bind("70000"), ConfigError);
}

class Service : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    sys_ = open_with("bonds", running_log()).release();
    srv_ = service::make_server(*sys_).release();
    port_ = srv_->bind_to_any_port("127.0.0.1");
    thread_ = new std::thread([] { srv_->listen_after_bind(); });
    srv_->wait_until_ready();
  }
  static void TearDownTestSuite() {
    srv_->stop();
    thread_->join();
    delete thread_;
    delete srv_;
    delete sys_;
  }

  static json get(const std::string& path, int want_status = 200) {
    httplib::Client cli("127.0.0.1", port_);
    auto res = cli.Get(path);
    EXPECT_TRUE(res);
    if (!res) return {};
    EXPECT_EQ(res->status, want_status) << path << ": " << res->body;
    EXPECT_EQ(res->get_header_value("Access-Control-Allow-Origin"), "*");
    EXPECT_EQ(res->get_header_value("Content-Type"), "application/json");
    return json::parse(res->body);
  }

  static inline System* sys_ = nullptr;
  static inline httplib::Server* srv_ = nullptr;
  static inline std::thread* thread_ = nullptr;
  static inline int port_ = 0;
};

TEST_F(Service, Health) { EXPECT_EQ(get("/health")["status"], "ok"); }

TEST_F(Service, Complete) {
  auto j = get("/complete?prefix=bullet%20bonds%20mat");
  EXPECT_EQ(j["version"], 1);
  EXPECT_EQ(j["prefix"], "bullet bonds mat");
  ASSERT_TRUE(j["completions"].is_array());
  bool found = false;
  for (const auto& c : j["completions"]) {
    for (const char* key : {"completion", "interpretation", "dtype", "grade", "source", "score"})
      EXPECT_TRUE(c.contains(key)) << key;
    if (c["completion"] == "bullet bonds maturing in 2020") {
      found = true;
      EXPECT_EQ(c["source"], "atomic");
      EXPECT_EQ(c["grade"], "HIGH");  // "bonds" was seen left of it
    }
  }
  EXPECT_TRUE(found) << j.dump();
  EXPECT_LE(get("/complete?prefix=b&k=2")["completions"].size(), 2u);
}

TEST_F(Service, BadRequests) {
  EXPECT_TRUE(get("/complete?prefix=b&k=0", 400).contains("error"));
  EXPECT_TRUE(get("/complete?prefix=b&k=abc", 400).contains("error"));
  EXPECT_TRUE(get("/complete?prefix=b&k=51", 400).contains("error"));
  EXPECT_TRUE(get("/complete", 400).contains("error"));
  EXPECT_TRUE(get("/parse", 400).contains("error"));
}

TEST_F(Service, Completability) {
  auto j = get("/completability?prefix=ibm%20bonds%20mat");
  EXPECT_EQ(j["completable"], true);
  EXPECT_TRUE(j["fail_at"].is_null());
  j = get("/completability?prefix=ibm%20xyzzy");
  EXPECT_EQ(j["completable"], false);
  EXPECT_EQ(j["fail_at"], 4);
}

TEST_F(Service, Parse) {
  auto j = get("/parse?q=ibm%20bonds%20maturing%20in%202020");
  EXPECT_EQ(j["parsed"], true);
  EXPECT_EQ(j["interpretation"], "AND(ISSUING_COMPANY=COMPANY_IBM, MATURITY_DATE=ExactDate(-1,-1,2020))");
  ASSERT_EQ(j["atoms"].size(), 2u);
  EXPECT_EQ(j["atoms"][0]["begin"], 0);
  EXPECT_EQ(j["atoms"][0]["end"], 2);
  EXPECT_EQ(j["atoms"][0]["dtype"], "ISSUING_COMPANY");
  EXPECT_EQ(get("/parse?q=xyzzy")["parsed"], false);
}

TEST_F(Service, Preflight) {
  httplib::Client cli("127.0.0.1", port_);
  auto res = cli.Options("/complete");
  ASSERT_TRUE(res);
  EXPECT_EQ(res->status, 204);
  EXPECT_EQ(res->get_header_value("Access-Control-Allow-Origin"), "*");
  EXPECT_NE(res->get_header_value("Access-Control-Allow-Methods").find("GET"), std::string::npos);
}

TEST(ServiceJson, MatchesSystem) {
  auto sys = open_with("equities", parse_log("market cap > 2 usd\t2019-01-01\t1\n"));
  auto j = service::completability_json(*sys, "market cap > 2");
  EXPECT_EQ(j["completable"], true);
  j = service::completability_json(*sys, "market cap > ibm's market c");
  EXPECT_EQ(j["completable"], false);
  EXPECT_EQ(j["fail_at"], 13);
  auto c = service::complete_json(*sys, "market cap > 2", 3);
  EXPECT_LE(c["completions"].size(), 3u);
  EXPECT_TRUE(c["overran"].is_array());
}
