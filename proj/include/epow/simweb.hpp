#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "epow/clock.hpp"
#include "epow/fetchnet.hpp"
#include "epow/urlkit.hpp"

namespace epow::simweb {

struct SitePage {
  uint32_t id = 0;
  std::string host;
  std::string target;  // canonical path (plus query for parameterized pages)
  std::vector<uint32_t> links;
  double lambda = 0.0;
  uint64_t version = 0;
  bool high_topic = false;
  std::vector<double> change_times;  // stamped by advance_changes
};

struct SiteParams {
  uint64_t seed = 1;
  uint32_t n_pages = 10;
  uint32_t n_hosts = 1;
  double out_degree_mean = 3.0;
  double lambda_min = 0.0;  // log-uniform per page when max > 0
  double lambda_max = 0.0;
  /// Optional topic planting: high-relevance pages carry most topic terms,
  /// low-relevance pages few, and links prefer the same class.
  std::vector<std::string> topic_terms;
  double high_fraction = 0.5;
  double assortative = 0.8;  // probability a link stays within its class
};

/// Deterministic synthetic site: same (seed, params) regenerates the exact
/// same pages, links, change rates and bodies. Every page is reachable from
/// page 0.
class SiteGraph {
 public:
  static SiteGraph generate(const SiteParams& params);

  /// The photo-gallery duplicate-content case: one host, exactly
  /// 4 x 3 x 2 x 2 = 48 query-parameter URLs, all serving identical bytes,
  /// all cross-linked.
  static SiteGraph gallery_fixture();

  /// Hand-built topology for tests; page ids must equal their index.
  static SiteGraph custom(std::vector<std::string> hosts,
                          std::vector<SitePage> pages);

  size_t page_count() const { return pages_.size(); }
  const SitePage& page(uint32_t id) const { return pages_.at(id); }
  const std::vector<std::string>& hosts() const { return hosts_; }
  urlkit::CanonicalUrl url_of(uint32_t id) const;
  std::optional<uint32_t> find(const std::string& host,
                               const std::string& target) const;

  /// Current body bytes for a page; pure function of the page fields.
  std::string body(uint32_t id) const;

  /// One step of the Poisson change process: each page independently changes
  /// with probability 1 - e^(-lambda*dt). Returns the changed page ids;
  /// changes are stamped at time `now`.
  std::vector<uint32_t> advance_changes(double dt, uint64_t rng_seed, double now);

 private:
  friend class ServeHandle;
  std::vector<SitePage> pages_;
  std::vector<std::string> hosts_;
  std::vector<std::string> topic_terms_;
  bool gallery_ = false;
  std::string gallery_body_;
};

struct FaultDirective {
  enum class Kind { Delay, RedirectChain, Oversize, Refuse, Status };
  Kind kind = Kind::Status;
  double delay_real_seconds = 0.0;  // Delay: real time, not simulated
  int chain_length = 0;             // RedirectChain
  size_t oversize_bytes = 0;        // Oversize
  int status = 500;                 // Status
};

struct LoggedRequest {
  double arrival = 0.0;  // injected-clock seconds
  std::string host;      // Host header, port stripped
  std::string target;    // path plus query
  std::vector<std::pair<std::string, std::string>> headers;

  std::string header(const std::string& name) const;
};

/// Count of per-host inter-arrival gaps shorter than min_interval. This is
/// the independent politeness witness crawl tests assert against.
size_t politeness_violations(const std::vector<LoggedRequest>& log,
                             double min_interval);

std::string request_log_csv(const std::vector<LoggedRequest>& log);

/// Loopback HTTP server for a SiteGraph. Virtual hosts share one listener
/// and are told apart by the Host header. Every request is captured in the
/// RequestLog with its arrival time read from the injected clock.
class ServeHandle {
 public:
  ServeHandle(SiteGraph site, Clock& clock);
  ~ServeHandle();

  ServeHandle(const ServeHandle&) = delete;
  ServeHandle& operator=(const ServeHandle&) = delete;

  int port() const;
  std::vector<LoggedRequest> request_log() const;
  size_t request_count() const;

  /// Highest number of requests observed simultaneously in flight for any
  /// single host; 1 in a properly governed crawl.
  size_t max_concurrent_per_host() const;

  void set_fault(const std::string& host, const std::string& target,
                 FaultDirective directive);

  /// Routes every URL to this listener; pair with fetchnet.
  fetchnet::HostRouter router() const;

  std::vector<uint32_t> advance_changes(double dt, uint64_t rng_seed);

  size_t page_count() const;
  urlkit::CanonicalUrl url_of(uint32_t id) const;
  double lambda_of(uint32_t id) const;
  std::string live_fingerprint(uint32_t id) const;
  /// Change times recorded for a page, for age measurement.
  std::vector<double> change_times(uint32_t id) const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace epow::simweb
