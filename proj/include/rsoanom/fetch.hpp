#pragma once

// Paged, rate-limited, cached client for a space-track-style REST catalog.
// Responses land in the cache directory, so re-runs need no network and no
// credentials.

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <deque>
#include <filesystem>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include <fmt/format.h>
#include <httplib.h>
#include <json.hpp>

#include "rsoanom/delimited.hpp"
#include "rsoanom/digest.hpp"
#include "rsoanom/ephemeris.hpp"
#include "rsoanom/error.hpp"
#include "rsoanom/time.hpp"

namespace rsoanom::fetch {

struct ClientConfig {
  std::string base_url;   // scheme://host[:port]
  std::string identity;
  std::string secret_env;  // name of the variable holding the password
  double rate_limit_per_min = 20.0;
  std::filesystem::path cache_dir = "tle_cache";
  std::size_t retries = 3;
  std::size_t page_size = 1000;
  double backoff_seconds = 2.0;  // doubled per retry
  double timeout_seconds = 60.0;

  void validate() const {
    if (base_url.empty()) throw ConfigError("client: base_url is required");
    if (identity.empty()) throw ConfigError("client: identity is required");
    if (secret_env.empty()) throw ConfigError("client: secret must reference an environment variable");
    if (!(rate_limit_per_min > 0.0)) throw ConfigError("client: rate_limit_per_min must be positive");
    if (page_size == 0) throw ConfigError("client: page_size must be positive");
    if (!(backoff_seconds >= 0.0) || !(timeout_seconds > 0.0)) throw ConfigError("client: bad timing settings");
  }

  std::string secret() const {
    const char* v = std::getenv(secret_env.c_str());
    if (v == nullptr || *v == '\0') {
      throw ConfigError(fmt::format("client: environment variable {} is not set", secret_env));
    }
    return v;
  }
};

// The secret is accepted only as "env:NAME"; a literal password is refused.
inline ClientConfig client_config_from_json(const nlohmann::json& j, const std::filesystem::path& base_dir = {}) {
  ClientConfig c;
  try {
    c.base_url = j.at("base_url").get<std::string>();
    c.identity = j.at("identity").get<std::string>();
    const auto secret = j.at("secret").get<std::string>();
    if (!secret.starts_with("env:") || secret.size() <= 4) {
      throw ConfigError("client: secret must be an environment variable reference such as \"env:CATALOG_SECRET\"");
    }
    c.secret_env = secret.substr(4);
    c.rate_limit_per_min = j.value("rate_limit_per_min", c.rate_limit_per_min);
    if (j.contains("cache_dir")) c.cache_dir = j.at("cache_dir").get<std::string>();
    if (c.cache_dir.is_relative() && !base_dir.empty()) c.cache_dir = base_dir / c.cache_dir;
    c.retries = j.value("retries", c.retries);
    c.page_size = j.value("page_size", c.page_size);
    c.backoff_seconds = j.value("backoff_seconds", c.backoff_seconds);
    c.timeout_seconds = j.value("timeout_seconds", c.timeout_seconds);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(fmt::format("client config: {}", e.what()));
  }
  c.validate();
  return c;
}

inline ClientConfig load_client_config(const std::filesystem::path& path) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(read_file(path));
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(fmt::format("{}: {}", path.string(), e.what()));
  } catch (const DataError& e) {
    throw ConfigError(e.what());
  }
  return client_config_from_json(j, path.parent_path());
}

// Seconds on an arbitrary monotonic axis. Tests swap in a fake.
struct Clock {
  std::function<double()> now;
  std::function<void(double)> sleep;

  static Clock steady() {
    return {[] {
              return std::chrono::duration<double>(std::chrono::steady_clock::now().time_since_epoch()).count();
            },
            [](double s) {
              if (s > 0) std::this_thread::sleep_for(std::chrono::duration<double>(s));
            }};
  }
};

// At most `per_minute` requests in any 60 s sliding window.
class RateLimiter {
 public:
  explicit RateLimiter(double per_minute) : limit_(static_cast<std::size_t>(std::max(1.0, std::floor(per_minute)))) {}

  // Blocks until a request may go out; returns its send time.
  double acquire(const Clock& clock) {
    double t = clock.now();
    while (!sent_.empty() && sent_.front() <= t - 60.0) sent_.pop_front();
    if (sent_.size() >= limit_) {
      clock.sleep(sent_.front() + 60.0 - t);
      t = std::max(clock.now(), sent_.front() + 60.0);
      while (!sent_.empty() && sent_.front() <= t - 60.0) sent_.pop_front();
    }
    sent_.push_back(t);
    return t;
  }

 private:
  std::size_t limit_;
  std::deque<double> sent_;
};

inline std::string query_path(std::span<const int> ids, const PeriodWindow& window, std::size_t limit,
                              std::size_t offset) {
  std::string id_list;
  for (int id : ids) id_list += (id_list.empty() ? "" : ",") + std::to_string(id);
  return fmt::format(
      "/basicspacedata/query/class/gp_history/NORAD_CAT_ID/{}/EPOCH/{}--{}/orderby/NORAD_CAT_ID%20asc,EPOCH%20asc/"
      "format/tle/limit/{},{}",
      id_list, to_iso8601(window.start), to_iso8601(window.end), limit, offset);
}

// A page must be bare TLE text; HTML or JSON error bodies and unparseable
// lines are rejected rather than cached.
inline std::size_t validate_page(const std::string& body) {
  const auto first = body.find_first_not_of(" \t\r\n");
  if (first != std::string::npos && (body[first] == '<' || body[first] == '{' || body[first] == '[')) {
    throw PayloadError("catalog returned a non-TLE payload");
  }
  const auto parsed = load_tle_text(body);
  if (!parsed.report.rejected.empty()) {
    const auto& r = parsed.report.rejected.front();
    throw PayloadError(fmt::format("malformed TLE payload at line {}: {}", r.line_number, r.reason));
  }
  return parsed.report.records_parsed;
}

class CatalogClient {
 public:
  explicit CatalogClient(ClientConfig config, Clock clock = Clock::steady())
      : config_(std::move(config)), clock_(std::move(clock)), limiter_(config_.rate_limit_per_min) {
    config_.validate();
  }

  // All pages for the ids and window, concatenated. Cached pages are served
  // without touching the network.
  std::string fetch_text(std::span<const int> ids, const PeriodWindow& window) {
    window.validate();
    if (ids.empty()) throw ConfigError("fetch needs at least one NORAD id");
    std::string all;
    for (std::size_t offset = 0;; offset += config_.page_size) {
      const auto path = query_path(ids, window, config_.page_size, offset);
      const auto page = cached_get(path);
      all += page;
      if (!all.empty() && all.back() != '\n') all += '\n';
      if (validate_page(page) < config_.page_size) break;
    }
    return all;
  }

  LoadResult fetch_window(std::span<const int> ids, const PeriodWindow& window) {
    auto result = load_tle_text(fetch_text(ids, window));
    if (result.series.empty()) {
      throw DataError(fmt::format("no valid records from {} for window '{}'", config_.base_url, window.name));
    }
    return result;
  }

  // Send times of every network request, login included.
  std::vector<double> request_times() const {
    std::lock_guard lock(mutex_);
    return request_times_;
  }

  std::filesystem::path cache_path(const std::string& path) const {
    return config_.cache_dir / (digest_hex(config_.base_url + path) + ".tle");
  }

 private:
  std::string cached_get(const std::string& path) {
    std::lock_guard lock(mutex_);
    const auto file = cache_path(path);
    if (std::filesystem::exists(file)) return read_file(file);
    if (!cookie_) login();
    auto body = request([&](httplib::Client& cli) {
                  return cli.Get(path, httplib::Headers{{"Cookie", *cookie_}});
                })->body;
    validate_page(body);
    write_file_atomic(file, body);
    return body;
  }

  void login() {
    const auto secret = config_.secret();
    const auto res = request([&](httplib::Client& cli) {
      return cli.Post("/ajaxauth/login", httplib::Params{{"identity", config_.identity}, {"password", secret}});
    });
    std::string cookie;
    for (std::size_t i = 0; i < res->get_header_value_count("Set-Cookie"); ++i) {
      const auto v = res->get_header_value("Set-Cookie", i);
      if (!cookie.empty()) cookie += "; ";
      cookie += v.substr(0, v.find(';'));
    }
    cookie_ = cookie;
  }

  httplib::Client& client() {
    if (!client_) {
      client_ = std::make_unique<httplib::Client>(config_.base_url);
      const auto secs = static_cast<time_t>(config_.timeout_seconds);
      client_->set_connection_timeout(secs, 0);
      client_->set_read_timeout(secs, 0);
    }
    return *client_;
  }

  // Rate-limited request with bounded retries on transport errors, 429 and
  // 5xx. 401/403 are credential failures; other statuses fail at once.
  template <class Send>
  httplib::Result request(Send&& send) {
    int last_status = 0;
    std::string last_reason;
    for (std::size_t attempt = 0; attempt <= config_.retries; ++attempt) {
      if (attempt > 0) clock_.sleep(config_.backoff_seconds * std::ldexp(1.0, static_cast<int>(attempt) - 1));
      request_times_.push_back(limiter_.acquire(clock_));
      auto res = send(client());
      if (!res) {
        last_status = 0;
        last_reason = httplib::to_string(res.error());
        continue;
      }
      const int status = res->status;
      if (status == 401 || status == 403) {
        throw AuthError(fmt::format("catalog rejected credentials for '{}' (HTTP {})", config_.identity, status));
      }
      if (status >= 200 && status < 300) return res;
      last_status = status;
      last_reason = fmt::format("HTTP {}", status);
      if (status != 429 && status < 500) break;
    }
    throw HttpError(last_status, fmt::format("catalog request failed: {}", last_reason));
  }

  ClientConfig config_;
  Clock clock_;
  RateLimiter limiter_;
  mutable std::mutex mutex_;
  std::unique_ptr<httplib::Client> client_;
  std::optional<std::string> cookie_;
  std::vector<double> request_times_;
};

inline LoadResult fetch_window(const ClientConfig& config, std::span<const int> ids, const PeriodWindow& window,
                               Clock clock = Clock::steady()) {
  CatalogClient client(config, std::move(clock));
  return client.fetch_window(ids, window);
}

}  // namespace rsoanom::fetch
