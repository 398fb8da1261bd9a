#include "epow/fetchnet.hpp"

#include <chrono>

#include <httplib.h>

namespace epow::fetchnet {

const char* to_string(Outcome o) {
  switch (o) {
    case Outcome::Success: return "Success";
    case Outcome::Redirect: return "Redirect";
    case Outcome::ClientError: return "ClientError";
    case Outcome::ServerError: return "ServerError";
    case Outcome::Timeout: return "Timeout";
    case Outcome::NetworkError: return "NetworkError";
    case Outcome::Oversize: return "Oversize";
  }
  return "unknown";
}

HostRouter direct_router() {
  return [](const urlkit::CanonicalUrl& url) {
    return std::make_pair(url.host, static_cast<int>(url.effective_port()));
  };
}

Expected<Outcome, std::string> classify_status(int code) {
  if (code < 100 || code > 599)
    return std::string("status code out of range: ") + std::to_string(code);
  if (code < 200) return Outcome::NetworkError;
  if (code < 300) return Outcome::Success;
  if (code < 400) return Outcome::Redirect;
  if (code < 500) return Outcome::ClientError;
  return Outcome::ServerError;
}

namespace {

std::string request_target(const urlkit::CanonicalUrl& url) {
  std::string full = url.render();
  // strip "scheme://authority"
  return full.substr(url.scheme.size() + 3 + url.authority().size());
}

struct RawResponse {
  bool ok = false;
  httplib::Error err = httplib::Error::Success;
  int status = 0;
  std::string body;
  std::string content_type;
  std::string location;
  bool oversized = false;
  double elapsed = 0.0;
};

RawResponse single_get(const urlkit::CanonicalUrl& url,
                       const FetchPolicy& policy, const HostRouter& router) {
  auto [address, port] = router(url);
  httplib::Client cli(address, port);
  auto timeout = std::chrono::duration<double>(policy.timeout_seconds);
  cli.set_connection_timeout(timeout);
  cli.set_read_timeout(timeout);
  cli.set_write_timeout(timeout);

  httplib::Headers headers{
      {"Host", url.authority()},
      {"User-Agent", policy.user_agent},
      {"Accept", "text/html"},
  };

  RawResponse raw;
  auto started = std::chrono::steady_clock::now();
  auto res = cli.Get(
      request_target(url), headers,
      [&](const httplib::Response& response) {
        raw.status = response.status;
        raw.content_type = response.get_header_value("Content-Type");
        raw.location = response.get_header_value("Location");
        return true;
      },
      [&](const char* data, size_t len) {
        if (raw.body.size() + len > policy.max_body_bytes) {
          raw.oversized = true;
          return false;  // abort the read
        }
        raw.body.append(data, len);
        return true;
      });
  raw.elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() -
                                              started)
                    .count();
  if (res) {
    raw.ok = true;
    raw.status = res->status;
  } else {
    raw.err = res.error();
  }
  return raw;
}

}  // namespace

FetchResult fetch(const urlkit::CanonicalUrl& url, const FetchPolicy& policy,
                  Clock& clock, const HostRouter& router) {
  FetchResult out;
  out.url = url;
  out.fetched_at = clock.now();

  urlkit::CanonicalUrl current = url;
  for (int hop = 0; hop <= policy.max_redirect_hops; ++hop) {
    RawResponse raw = single_get(current, policy, router);

    if (raw.oversized) {
      out.outcome = Outcome::Oversize;
      out.status = raw.status > 0 ? std::optional<int>(raw.status) : std::nullopt;
      return out;
    }
    if (!raw.ok) {
      switch (raw.err) {
        case httplib::Error::ConnectionTimeout:
          out.outcome = Outcome::Timeout;
          break;
        case httplib::Error::Read:
        case httplib::Error::Write:
          // a read that ran the full budget is a timeout, not a flaky peer
          out.outcome = raw.elapsed >= policy.timeout_seconds * 0.9
                            ? Outcome::Timeout
                            : Outcome::NetworkError;
          break;
        default:
          out.outcome = Outcome::NetworkError;
          break;
      }
      out.error_detail = httplib::to_string(raw.err);
      return out;
    }

    auto klass = classify_status(raw.status);
    if (!klass.ok()) {
      out.outcome = Outcome::NetworkError;
      out.status = raw.status;
      out.error_detail = klass.error();
      return out;
    }
    out.status = raw.status;

    if (*klass == Outcome::Redirect) {
      if (!raw.location.empty()) {
        auto target = urlkit::resolve(current, raw.location);
        if (target.ok()) {
          out.redirect_target = *target;
          if (hop < policy.max_redirect_hops) {
            current = *target;
            continue;
          }
          out.outcome = Outcome::Redirect;  // hop budget exhausted
          return out;
        }
      }
      out.outcome = Outcome::Redirect;
      return out;
    }

    out.outcome = *klass;
    if (out.outcome == Outcome::Success) {
      out.body = std::move(raw.body);
      out.content_type = raw.content_type;
      out.url = current;  // the URL that actually served the page
    }
    return out;
  }
  out.outcome = Outcome::Redirect;
  return out;
}

DownloaderPool::DownloaderPool(int n_workers, JobChannel& jobs,
                               ResultChannel& results, FetchPolicy policy,
                               Clock& clock, HostRouter router)
    : jobs_(jobs),
      results_(results),
      policy_(std::move(policy)),
      clock_(clock),
      router_(std::move(router)) {
  if (n_workers < 1) throw std::invalid_argument("pool needs >= 1 worker");
  workers_.reserve(static_cast<size_t>(n_workers));
  for (int i = 0; i < n_workers; ++i)
    workers_.emplace_back([this] { worker_loop(); });
}

DownloaderPool::~DownloaderPool() {
  jobs_.close();
  join();
}

void DownloaderPool::join() {
  if (joined_) return;
  for (auto& w : workers_)
    if (w.joinable()) w.join();
  joined_ = true;
}

void DownloaderPool::worker_loop() {
  for (;;) {
    auto job = jobs_.pop();
    if (!job) return;  // channel closed and drained
    PoolResult pr;
    pr.request = job->request;
    try {
      pr.result = fetch(job->request.url, policy_, clock_, router_);
    } catch (const std::exception& e) {
      // one bad request must not kill the worker
      pr.result.url = job->request.url;
      pr.result.fetched_at = clock_.now();
      pr.result.outcome = Outcome::NetworkError;
      pr.result.error_detail = e.what();
    }
    results_.push(std::move(pr));
    if (job->on_complete) job->on_complete();
  }
}

}  // namespace epow::fetchnet
