#include "adec/rewards/remote.hpp"

#include <cmath>
#include <cstdlib>
#include <regex>

#include <httplib.h>
#include <json.hpp>

#include "adec/errors.hpp"

namespace adec::rewards {

std::string resolve_endpoint(const std::string& flag_value, const std::string& config_value) {
  if (!flag_value.empty()) return flag_value;
  if (const char* env = std::getenv(kRemoteEndpointEnv); env && *env) return env;
  return config_value;
}

RemoteScorer::RemoteScorer(RemoteConfig cfg) : cfg_(std::move(cfg)) {
  static const std::regex re(R"(^(?:http://)?([^:/]+)(?::(\d+))?/?$)");
  std::smatch m;
  if (!std::regex_match(cfg_.endpoint, m, re)) {
    throw UsageError("reward endpoint must look like http://host:port, got '" + cfg_.endpoint + "'");
  }
  host_ = m[1];
  if (m[2].matched) port_ = std::stoi(m[2]);
  if (cfg_.max_in_flight < 1) throw UsageError("max_in_flight must be at least 1");
  if (cfg_.retries < 0) throw UsageError("retries must be nonnegative");
  if (!(cfg_.timeout_s > 0)) throw UsageError("timeout must be positive");
}

Score RemoteScorer::score(const std::string& prompt, const std::string& response) {
  {
    std::unique_lock<std::mutex> lock(mu_);
    cv_.wait(lock, [&] { return in_flight_ < cfg_.max_in_flight; });
    ++in_flight_;
  }
  struct Release {
    RemoteScorer* s;
    ~Release() {
      {
        std::lock_guard<std::mutex> lock(s->mu_);
        --s->in_flight_;
      }
      s->cv_.notify_one();
    }
  } release{this};

  const std::string body = nlohmann::json{{"prompt", prompt}, {"response", response}}.dump();
  std::string last_error;
  for (int attempt = 0; attempt <= cfg_.retries; ++attempt) {
    httplib::Client cli(host_, port_);
    const auto secs = static_cast<time_t>(cfg_.timeout_s);
    const auto usecs = static_cast<time_t>((cfg_.timeout_s - secs) * 1e6);
    cli.set_connection_timeout(secs, usecs);
    cli.set_read_timeout(secs, usecs);
    cli.set_write_timeout(secs, usecs);
    auto res = cli.Post("/score", body, "application/json");
    if (!res) {
      last_error = "request failed: " + httplib::to_string(res.error());
      continue;
    }
    if (res->status >= 500) {
      last_error = "server returned status " + std::to_string(res->status);
      continue;
    }
    if (res->status != 200) {
      throw RemoteError("reward service returned status " + std::to_string(res->status));
    }
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(res->body);
    } catch (const nlohmann::json::exception&) {
      static const std::regex non_finite(R"re("score"\s*:\s*-?(nan|NaN|inf|Inf|Infinity))re");
      if (std::regex_search(res->body, non_finite)) throw ProtocolError("reward service returned a non-finite score");
      throw RemoteError("unparseable reward response: " + res->body.substr(0, 200));
    }
    if (!j.is_object() || !j.contains("score")) throw RemoteError("reward response lacks a score field");
    const auto& s = j["score"];
    if (!s.is_number()) throw ProtocolError("reward score is not a finite number");
    const double v = s.get<double>();
    if (!std::isfinite(v)) throw ProtocolError("reward service returned a non-finite score");
    Score out;
    out.value = v;
    out.components["remote"] = v;
    return out;
  }
  throw RemoteError("reward service unavailable after " + std::to_string(cfg_.retries + 1) +
                    " attempts: " + last_error);
}

Score remote_score(const RemoteConfig& cfg, const std::string& prompt, const std::string& response) {
  RemoteScorer scorer(cfg);
  return scorer.score(prompt, response);
}

}  // namespace adec::rewards
