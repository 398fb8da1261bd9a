#pragma once

#include <cstdint>
#include <deque>
#include <functional>
#include <map>
#include <memory>
#include <set>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "epow/clock.hpp"
#include "epow/config.hpp"
#include "epow/fetchnet.hpp"
#include "epow/frontier.hpp"
#include "epow/governor.hpp"
#include "epow/revisit.hpp"
#include "epow/simweb.hpp"
#include "epow/store.hpp"
#include "epow/urlkit.hpp"

namespace epow::crawlctl {

struct CrawlReport {
  uint64_t pages_fetched = 0;
  uint64_t unique_fingerprints = 0;
  uint64_t duplicate_content = 0;  // successful bodies with an already-seen digest
  std::map<std::string, uint64_t> outcome_counts;
  uint32_t max_depth_reached = 0;
  double duration_seconds = 0.0;  // injected-clock time
  double wall_seconds = 0.0;
  std::string stop_reason;
  uint64_t politeness_violations = 0;
  double throughput_pps = 0.0;  // pages per wall-clock second
  uint64_t retries = 0;
  uint64_t quarantined_hosts = 0;
  uint64_t recrawled_pages = 0;  // fetches of URLs that already had a record
  uint64_t urls_discovered = 0;
  std::string final_checkpoint;

  std::string to_text() const;
  std::string to_csv() const;
};

/// Master-crawler step: store-ready record plus the expansion of the page's
/// unseen links. New requests inherit the parent's relevance as priority and
/// sit one hop deeper; links beyond max_depth are counted, not enqueued.
std::pair<store::PageRecord, std::vector<frontier::CrawlRequest>>
analyze_and_expand(const frontier::CrawlRequest& request,
                   const fetchnet::FetchResult& result,
                   const std::vector<std::string>& topic,
                   urlkit::SeenSet& seen, uint64_t& next_seq,
                   uint32_t max_depth, uint64_t* filtered_by_depth = nullptr);

/// The control loop wiring frontier, governor, downloader pool, parser and
/// store together. One engine instance runs one crawl.
class CrawlEngine {
 public:
  CrawlEngine(CrawlConfig config, Clock& clock,
              fetchnet::HostRouter router = nullptr);

  /// Runs to a stop condition, writing pages, checkpoints and the final
  /// report into the run directory. With resume=true the crawl continues
  /// from the latest valid checkpoint.
  CrawlReport run(bool resume = false);

  /// Test hook, called after each processed result; returning false
  /// abandons the run on the spot (no final checkpoint), like a crash.
  void set_page_hook(std::function<bool(uint64_t pages_fetched)> hook) {
    page_hook_ = std::move(hook);
  }

 private:
  struct Shared;
  CrawlConfig config_;
  Clock& clock_;
  fetchnet::HostRouter router_;
  std::function<bool(uint64_t)> page_hook_;
};

struct RevisitReport {
  revisit::Policy policy = revisit::Policy::Uniform;
  double budget = 0.0;
  double horizon = 0.0;
  double measured_freshness = 0.0;
  double measured_age = 0.0;
  double predicted_freshness = 0.0;
  double predicted_age = 0.0;
  uint64_t refetches = 0;
  uint64_t samples = 0;

  std::string to_text() const;
};

/// Re-fetches stored pages per the plan's frequencies over a simulated
/// horizon while the synthetic site keeps changing; measures true average
/// freshness and age on a fixed sampling grid against the live site.
/// Requires a baseline crawl in the repo (throws std::runtime_error
/// otherwise). The revisit phase is exempt from the one-fetch-per-URL rule.
RevisitReport run_revisit_loop(simweb::ServeHandle& web, store::PageRepo& repo,
                               Clock& clock, const revisit::RevisitPlan& plan,
                               const std::vector<uint32_t>& page_ids,
                               double horizon, double sample_interval,
                               uint64_t rng_seed,
                               const fetchnet::FetchPolicy& policy = {});

}  // namespace epow::crawlctl
