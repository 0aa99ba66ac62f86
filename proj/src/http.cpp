// Copyright 2026 The Triage Authors. All Rights Reserved.
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//     http://www.apache.org/licenses/LICENSE-2.0
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "triage/http.hpp"

#include <chrono>
#include <cmath>
#include <thread>

#include <httplib.h>

namespace triage {

namespace {

struct ParsedUrl {
  std::string origin;  // scheme://host[:port]
  std::string path;
};

ParsedUrl parse_url(const std::string& url) {
  const auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) throw TransportError("malformed URL '" + url + "'");
  const auto scheme = url.substr(0, scheme_end);
  if (scheme != "http" && scheme != "https") {
    throw TransportError("unsupported URL scheme '" + scheme + "'");
  }
  const auto path_start = url.find('/', scheme_end + 3);
  if (path_start == std::string::npos) return {url, "/"};
  return {url.substr(0, path_start), url.substr(path_start)};
}

class HttplibTransport final : public HttpTransport {
 public:
  HttpResponse post(const HttpRequest& request) override {
    const auto url = parse_url(request.url);
    httplib::Client client(url.origin);
    const auto timeout = std::chrono::duration<double>(request.timeout_seconds);
    const auto secs = std::chrono::duration_cast<std::chrono::seconds>(timeout);
    const auto usecs = std::chrono::duration_cast<std::chrono::microseconds>(timeout - secs);
    client.set_connection_timeout(secs.count(), usecs.count());
    client.set_read_timeout(secs.count(), usecs.count());
    client.set_write_timeout(secs.count(), usecs.count());
    httplib::Headers headers;
    for (const auto& [k, v] : request.headers) headers.emplace(k, v);
    auto result = client.Post(url.path, headers, request.body, "application/json");
    if (!result) {
      throw TransportError("POST " + request.url +
                           " failed: " + httplib::to_string(result.error()));
    }
    return {result->status, result->body};
  }
};

bool retryable(int status) {
  return status == 429 || status >= 500;
}

}  // namespace

std::shared_ptr<HttpTransport> make_http_transport() {
  return std::make_shared<HttplibTransport>();
}

PostOutcome post_with_retry(HttpTransport& transport, const HttpRequest& request,
                            const RetryPolicy& policy) {
  std::string last_error;
  for (int attempt = 0; attempt <= policy.max_retries; ++attempt) {
    if (attempt > 0) {
      const double delay =
          policy.initial_backoff_seconds * std::pow(policy.backoff_multiplier, attempt - 1);
      if (policy.sleep) {
        policy.sleep(delay);
      } else {
        std::this_thread::sleep_for(std::chrono::duration<double>(delay));
      }
    }
    try {
      auto response = transport.post(request);
      if (!retryable(response.status)) return {std::move(response), attempt + 1};
      last_error = "HTTP status " + std::to_string(response.status);
    } catch (const TransportError& e) {
      last_error = e.what();
    }
  }
  throw TransportError("request to " + request.url + " failed after " +
                       std::to_string(policy.max_retries + 1) + " attempts: " + last_error);
}

}  // namespace triage
