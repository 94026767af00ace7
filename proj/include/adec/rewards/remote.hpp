#pragma once

#include <condition_variable>
#include <mutex>
#include <string>

#include "adec/rewards/rewards.hpp"

namespace adec::rewards {

inline constexpr const char* kRemoteEndpointEnv = "ADEC_REWARD_ENDPOINT";

struct RemoteConfig {
  std::string endpoint;  // e.g. http://127.0.0.1:8080
  double timeout_s = 10.0;
  int retries = 2;
  int max_in_flight = 4;
};

/// Endpoint precedence: explicit flag, then the environment variable, then
/// the configured value.
std::string resolve_endpoint(const std::string& flag_value, const std::string& config_value);

/// Client for `POST /score` with body {"prompt", "response"} answering
/// {"score": real}. Transient failures (connection errors, 5xx) are retried.
/// Safe to call from several threads; at most max_in_flight requests run at once.
class RemoteScorer {
 public:
  explicit RemoteScorer(RemoteConfig cfg);
  Score score(const std::string& prompt, const std::string& response);
  const RemoteConfig& config() const { return cfg_; }

 private:
  RemoteConfig cfg_;
  std::string host_;
  int port_ = 80;
  std::mutex mu_;
  std::condition_variable cv_;
  int in_flight_ = 0;
};

Score remote_score(const RemoteConfig& cfg, const std::string& prompt, const std::string& response);

}  // namespace adec::rewards
