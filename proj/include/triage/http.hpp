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

#pragma once

#include <functional>
#include <memory>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace triage {

struct HttpRequest {
  std::string url;
  std::string body;
  std::vector<std::pair<std::string, std::string>> headers;
  double timeout_seconds = 30.0;
};

struct HttpResponse {
  int status = 0;
  std::string body;
};

/// Connection-level failure, or a request that kept failing after retries.
class TransportError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// POST-only transport. Implementations throw TransportError when no HTTP
/// response was obtained; any received response is returned as is.
class HttpTransport {
 public:
  virtual ~HttpTransport() = default;
  virtual HttpResponse post(const HttpRequest& request) = 0;
};

/// http:// and https:// (when built with OpenSSL).
std::shared_ptr<HttpTransport> make_http_transport();

/// Adapts a callable; used for tests and in-process mocks.
class CallbackTransport final : public HttpTransport {
 public:
  using Handler = std::function<HttpResponse(const HttpRequest&)>;
  explicit CallbackTransport(Handler handler) : handler_(std::move(handler)) {}
  HttpResponse post(const HttpRequest& request) override { return handler_(request); }

 private:
  Handler handler_;
};

struct RetryPolicy {
  int max_retries = 3;
  double initial_backoff_seconds = 0.5;
  double backoff_multiplier = 2.0;
  /// Replaces the real sleep; tests pass a recorder.
  std::function<void(double)> sleep;
};

struct PostOutcome {
  HttpResponse response;
  int attempts = 0;
};

/// Retries on TransportError, 429 and 5xx, sleeping initial * multiplier^k
/// between attempts. Other statuses are returned without retrying. Throws
/// TransportError after max_retries + 1 failed attempts.
PostOutcome post_with_retry(HttpTransport& transport, const HttpRequest& request,
                            const RetryPolicy& policy);

}  // namespace triage
