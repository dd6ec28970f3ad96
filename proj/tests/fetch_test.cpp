#include <gtest/gtest.h>

#include <atomic>
#include <cstdlib>
#include <filesystem>
#include <regex>
#include <thread>

#include "rsoanom/fetch.hpp"
#include "rsoanom/synth.hpp"

namespace rsoanom::fetch {
namespace {

namespace fs = std::filesystem;

std::string fixture_text() {
  synth::ScenarioConfig sc;
  sc.seed = 4;
  sc.object_count = 3;
  sc.observations_per_object = 100;
  sc.baseline[index_of(Element::kMeanMotion)] = {14.9, 1e-5, 0.0, 0.3};
  sc.baseline[index_of(Element::kEccentricity)] = {0.001, 1e-5, 0.0, 0.0};
  sc.baseline[index_of(Element::kInclination)] = {71.0, 0.01, 0.0, 0.0};
  sc.baseline[index_of(Element::kRaan)] = {40.0, 0.01, 0.1, 0.0};
  sc.baseline[index_of(Element::kArgPerigee)] = {90.0, 0.1, 0.0, 0.0};
  sc.baseline[index_of(Element::kMeanAnomaly)] = {270.0, 0.1, 0.0, 0.0};
  return synth::corpus_tle_text(synth::generate(sc));
}

std::vector<std::string> split_records(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream in(text);
  std::string l1, l2;
  while (std::getline(in, l1) && std::getline(in, l2)) out.push_back(l1 + "\n" + l2 + "\n");
  return out;
}

// Minimal stand-in for the catalog: cookie login plus paged TLE queries.
class StubCatalog {
 public:
  explicit StubCatalog(std::vector<std::string> records) : records_(std::move(records)) {
    server_.Post("/ajaxauth/login", [this](const httplib::Request& req, httplib::Response& res) {
      ++hits;
      if (login_status != 200 || req.get_param_value("password") != "hunter2") {
        res.status = login_status == 200 ? 401 : login_status;
        return;
      }
      res.set_header("Set-Cookie", "chocolatechip=abc; path=/");
      res.set_content("\"\"", "application/json");
    });
    server_.Get(R"(/basicspacedata/query/.*)", [this](const httplib::Request& req, httplib::Response& res) {
      ++hits;
      if (req.get_header_value("Cookie").find("chocolatechip=abc") == std::string::npos) {
        res.status = 401;
        return;
      }
      if (query_status != 200) {
        res.status = query_status;
        return;
      }
      if (!payload_override.empty()) {
        res.set_content(payload_override, "text/plain");
        return;
      }
      std::smatch m;
      const std::string path = req.path;
      ASSERT_TRUE(std::regex_search(path, m, std::regex(R"(limit/(\d+),(\d+))")));
      const auto limit = std::stoul(m[1]);
      const auto offset = std::stoul(m[2]);
      std::string body;
      for (std::size_t i = offset; i < std::min(records_.size(), offset + limit); ++i) body += records_[i];
      res.set_content(body, "text/plain");
    });
    port = server_.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }

  ~StubCatalog() {
    server_.stop();
    thread_.join();
  }

  std::string url() const { return "http://127.0.0.1:" + std::to_string(port); }

  std::atomic<int> hits{0};
  int login_status = 200;
  int query_status = 200;
  std::string payload_override;
  int port = 0;

 private:
  std::vector<std::string> records_;
  httplib::Server server_;
  std::thread thread_;
};

struct FakeClock {
  double t = 1000.0;
  Clock clock() {
    return {[this] { return t; }, [this](double s) { t += std::max(0.0, s); }};
  }
};

class FetchTest : public ::testing::Test {
 protected:
  void SetUp() override {
    setenv("RSOANOM_TEST_SECRET", "hunter2", 1);
    cache_ = fs::temp_directory_path() /
             ("rsoanom_fetch_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(cache_);
  }
  void TearDown() override { fs::remove_all(cache_); }

  ClientConfig config(const StubCatalog& stub) const {
    ClientConfig c;
    c.base_url = stub.url();
    c.identity = "analyst@example.org";
    c.secret_env = "RSOANOM_TEST_SECRET";
    c.rate_limit_per_min = 1000;
    c.cache_dir = cache_;
    c.page_size = 100;
    c.retries = 2;
    c.backoff_seconds = 1.0;
    return c;
  }

  fs::path cache_;
  const PeriodWindow window_{"all", make_timestamp(2016, 1, 1), make_timestamp(2017, 1, 1)};
  const std::vector<int> ids_{90000, 90001, 90002};
};

TEST_F(FetchTest, MatchesFileLoaderAndCachesPages) {
  const auto text = fixture_text();
  const auto file = cache_.parent_path() / "rsoanom_fetch_fixture.tle";
  write_file_atomic(file, text);
  const auto expected = load_tle_file(file);

  StubCatalog stub(split_records(text));
  FakeClock fc;
  const auto got = fetch_window(config(stub), ids_, window_, fc.clock());
  EXPECT_EQ(got.series.size(), 3u);
  ASSERT_EQ(got.series.size(), expected.series.size());
  for (const auto& [id, s] : expected.series) {
    const auto& g = got.series.at(id);
    ASSERT_EQ(g.size(), s.size());
    for (std::size_t i = 0; i < s.size(); ++i) EXPECT_EQ(g.observations[i], s.observations[i]);
  }
  EXPECT_EQ(got.report.records_parsed, expected.report.records_parsed);
  // 300 records in pages of 100: three full pages, one empty, one login.
  EXPECT_EQ(stub.hits, 5);

  // Second run is served from the cache without credentials.
  unsetenv("RSOANOM_TEST_SECRET");
  const auto again = fetch_window(config(stub), ids_, window_, fc.clock());
  EXPECT_EQ(stub.hits, 5);
  EXPECT_EQ(again.series.size(), 3u);
  fs::remove(file);
}

TEST_F(FetchTest, UnauthorizedIsAuthError) {
  StubCatalog stub(split_records(fixture_text()));
  stub.login_status = 401;
  FakeClock fc;
  EXPECT_THROW(fetch_window(config(stub), ids_, window_, fc.clock()), AuthError);
  EXPECT_EQ(stub.hits, 1);
}

TEST_F(FetchTest, WrongPasswordIsAuthError) {
  StubCatalog stub(split_records(fixture_text()));
  setenv("RSOANOM_TEST_SECRET", "wrong", 1);
  FakeClock fc;
  EXPECT_THROW(fetch_window(config(stub), ids_, window_, fc.clock()), AuthError);
}

TEST_F(FetchTest, RateLimitDelaysThirdRequest) {
  auto records = split_records(fixture_text());
  StubCatalog stub(records);
  auto c = config(stub);
  c.rate_limit_per_min = 2;
  c.page_size = 120;  // 300 records: pages of 120, 120, 60
  FakeClock fc;
  CatalogClient client(c, fc.clock());
  client.fetch_window(ids_, window_);
  const auto times = client.request_times();
  ASSERT_EQ(times.size(), 4u);  // login + three pages
  EXPECT_GE(times[2] - times[0], 60.0);
  EXPECT_GE(times[3] - times[1], 60.0);
  for (std::size_t i = 2; i < times.size(); ++i) EXPECT_GE(times[i] - times[i - 2], 60.0);
}

TEST_F(FetchTest, ServerErrorsRetryThenHttpError) {
  StubCatalog stub(split_records(fixture_text()));
  stub.query_status = 503;
  FakeClock fc;
  const double start = fc.t;
  try {
    fetch_window(config(stub), ids_, window_, fc.clock());
    FAIL() << "expected HttpError";
  } catch (const HttpError& e) {
    EXPECT_EQ(e.status(), 503);
  }
  EXPECT_EQ(stub.hits, 1 + 3);        // login + initial attempt + two retries
  EXPECT_GE(fc.t - start, 1.0 + 2.0);  // exponential backoff on the fake clock
}

TEST_F(FetchTest, ClientErrorIsNotRetried) {
  StubCatalog stub(split_records(fixture_text()));
  stub.query_status = 404;
  FakeClock fc;
  EXPECT_THROW(fetch_window(config(stub), ids_, window_, fc.clock()), HttpError);
  EXPECT_EQ(stub.hits, 2);
}

TEST_F(FetchTest, MalformedPayloadIsPayloadErrorAndNotCached) {
  StubCatalog stub(split_records(fixture_text()));
  stub.payload_override = "<html>maintenance</html>";
  FakeClock fc;
  EXPECT_THROW(fetch_window(config(stub), ids_, window_, fc.clock()), PayloadError);
  stub.payload_override = "1 90000U garbage\n";
  EXPECT_THROW(fetch_window(config(stub), ids_, window_, fc.clock()), PayloadError);
  EXPECT_FALSE(fs::exists(cache_) && !fs::is_empty(cache_));
}

TEST_F(FetchTest, UnreachableServerIsHttpError) {
  ClientConfig c;
  c.base_url = "http://127.0.0.1:1";
  c.identity = "x";
  c.secret_env = "RSOANOM_TEST_SECRET";
  c.cache_dir = cache_;
  c.retries = 1;
  c.timeout_seconds = 2;
  FakeClock fc;
  try {
    fetch_window(c, ids_, window_, fc.clock());
    FAIL();
  } catch (const HttpError& e) {
    EXPECT_EQ(e.status(), 0);
  }
}

TEST(ClientConfigJson, SecretMustBeEnvironmentReference) {
  const nlohmann::json ok{{"base_url", "https://catalog.example"},
                          {"identity", "me"},
                          {"secret", "env:CATALOG_SECRET"},
                          {"rate_limit_per_min", 20},
                          {"cache_dir", "cache"}};
  const auto c = client_config_from_json(ok, "/tmp/run");
  EXPECT_EQ(c.secret_env, "CATALOG_SECRET");
  EXPECT_EQ(c.cache_dir, fs::path("/tmp/run/cache"));
  auto inline_secret = ok;
  inline_secret["secret"] = "hunter2";
  EXPECT_THROW(client_config_from_json(inline_secret), ConfigError);
  auto missing = ok;
  missing.erase("identity");
  EXPECT_THROW(client_config_from_json(missing), ConfigError);
}

TEST(ClientConfigJson, UnsetVariableIsConfigError) {
  ClientConfig c;
  c.secret_env = "RSOANOM_DEFINITELY_UNSET_VAR";
  unsetenv(c.secret_env.c_str());
  EXPECT_THROW(c.secret(), ConfigError);
}

TEST(RateLimiterTest, SlidingWindow) {
  FakeClock fc;
  auto clock = fc.clock();
  RateLimiter rl(3);
  EXPECT_EQ(rl.acquire(clock), 1000.0);
  fc.t += 10;
  EXPECT_EQ(rl.acquire(clock), 1010.0);
  EXPECT_EQ(rl.acquire(clock), 1010.0);
  EXPECT_EQ(rl.acquire(clock), 1060.0);
  EXPECT_EQ(rl.acquire(clock), 1070.0);
}

}  // namespace
}  // namespace rsoanom::fetch
