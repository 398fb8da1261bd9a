#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "epow/channel.hpp"
#include "epow/clock.hpp"
#include "epow/expected.hpp"
#include "epow/frontier.hpp"
#include "epow/urlkit.hpp"

namespace epow::fetchnet {

enum class Outcome {
  Success,
  Redirect,     // redirect budget exhausted; target recorded, no body
  ClientError,  // 4xx
  ServerError,  // 5xx
  Timeout,
  NetworkError,
  Oversize,
};

const char* to_string(Outcome o);

struct FetchResult {
  urlkit::CanonicalUrl url;
  double fetched_at = 0.0;
  Outcome outcome = Outcome::NetworkError;
  std::optional<int> status;
  std::string body;  // present iff outcome == Success, <= max_body_bytes
  std::string content_type;
  std::optional<urlkit::CanonicalUrl> redirect_target;
  std::string error_detail;
};

struct FetchPolicy {
  std::string user_agent =
      "EPOW/0.1 (+http://localhost/epow-crawler-info)";  // identification is mandatory
  double timeout_seconds = 10.0;
  size_t max_body_bytes = 2 * 1024 * 1024;
  int max_redirect_hops = 5;
};

/// Maps a URL to the TCP endpoint to contact. The default connects to the
/// URL's own host/port; tests route synthetic hosts to a loopback listener
/// (the Host header always carries the URL's authority either way).
using HostRouter =
    std::function<std::pair<std::string, int>(const urlkit::CanonicalUrl&)>;

HostRouter direct_router();

/// One governed page fetch: a single GET plus bounded redirect following,
/// every request carrying the policy's User-Agent. All failures come back
/// encoded in the outcome; fetch never throws on network trouble.
FetchResult fetch(const urlkit::CanonicalUrl& url, const FetchPolicy& policy,
                  Clock& clock, const HostRouter& router = direct_router());

/// Map an HTTP status code to its outcome class. Codes outside [100,599]
/// are an error; 1xx is treated as odd server behaviour (NetworkError).
Expected<Outcome, std::string> classify_status(int code);

struct FetchJob {
  frontier::CrawlRequest request;
  /// Runs on the worker after the result is delivered (host-slot release,
  /// clock-hold release). May be empty.
  std::function<void()> on_complete;
};

struct PoolResult {
  frontier::CrawlRequest request;
  FetchResult result;
};

using JobChannel = Channel<FetchJob>;
using ResultChannel = Channel<PoolResult>;

/// N independent downloader workers draining the job channel until it is
/// closed. A worker surviving one bad request keeps serving the next; every
/// job produces exactly one result.
class DownloaderPool {
 public:
  DownloaderPool(int n_workers, JobChannel& jobs, ResultChannel& results,
                 FetchPolicy policy, Clock& clock,
                 HostRouter router = direct_router());
  ~DownloaderPool();

  DownloaderPool(const DownloaderPool&) = delete;
  DownloaderPool& operator=(const DownloaderPool&) = delete;

  /// Waits for all workers to drain the closed job channel.
  void join();

 private:
  void worker_loop();

  JobChannel& jobs_;
  ResultChannel& results_;
  FetchPolicy policy_;
  Clock& clock_;
  HostRouter router_;
  std::vector<std::thread> workers_;
  bool joined_ = false;
};

}  // namespace epow::fetchnet
