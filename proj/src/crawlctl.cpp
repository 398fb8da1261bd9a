#include "epow/crawlctl.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iostream>
#include <sstream>

#include "epow/digest.hpp"
#include "epow/parsekit.hpp"

namespace epow::crawlctl {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

std::string outcome_key(fetchnet::Outcome o) { return fetchnet::to_string(o); }

}  // namespace

std::string CrawlReport::to_text() const {
  std::ostringstream out;
  out << "pages fetched:        " << pages_fetched << "\n"
      << "unique fingerprints:  " << unique_fingerprints << "\n"
      << "duplicate content:    " << duplicate_content << "\n"
      << "urls discovered:      " << urls_discovered << "\n"
      << "max depth reached:    " << max_depth_reached << "\n"
      << "stop reason:          " << stop_reason << "\n"
      << "duration (clock):     " << duration_seconds << " s\n"
      << "duration (wall):      " << wall_seconds << " s\n"
      << "throughput:           " << throughput_pps << " pages/s\n"
      << "politeness violations: " << politeness_violations << "\n"
      << "retries:              " << retries << "\n"
      << "quarantined hosts:    " << quarantined_hosts << "\n"
      << "recrawled pages:      " << recrawled_pages << "\n";
  out << "outcomes:\n";
  for (const auto& [k, v] : outcome_counts)
    out << "  " << k << ": " << v << "\n";
  return out.str();
}

std::string CrawlReport::to_csv() const {
  std::ostringstream out;
  out << "key,value\n"
      << "pages_fetched," << pages_fetched << "\n"
      << "unique_fingerprints," << unique_fingerprints << "\n"
      << "duplicate_content," << duplicate_content << "\n"
      << "urls_discovered," << urls_discovered << "\n"
      << "max_depth_reached," << max_depth_reached << "\n"
      << "stop_reason," << stop_reason << "\n"
      << "duration_seconds," << duration_seconds << "\n"
      << "wall_seconds," << wall_seconds << "\n"
      << "throughput_pps," << throughput_pps << "\n"
      << "politeness_violations," << politeness_violations << "\n"
      << "retries," << retries << "\n"
      << "quarantined_hosts," << quarantined_hosts << "\n"
      << "recrawled_pages," << recrawled_pages << "\n";
  for (const auto& [k, v] : outcome_counts)
    out << "outcome_" << k << "," << v << "\n";
  return out.str();
}

std::pair<store::PageRecord, std::vector<frontier::CrawlRequest>>
analyze_and_expand(const frontier::CrawlRequest& request,
                   const fetchnet::FetchResult& result,
                   const std::vector<std::string>& topic,
                   urlkit::SeenSet& seen, uint64_t& next_seq,
                   uint32_t max_depth, uint64_t* filtered_by_depth) {
  store::PageRecord record;
  record.url = request.url;
  record.fetched_at = result.fetched_at;
  record.status = result.status.value_or(0);
  record.depth = request.depth;

  std::vector<frontier::CrawlRequest> expansion;
  if (result.outcome == fetchnet::Outcome::Success) {
    // resolve links against the URL that actually served the page
    auto analysis = parsekit::analyze(result.body, result.url, topic);
    record.fingerprint = analysis.fingerprint;
    record.relevance = analysis.relevance;
    for (const auto& link : analysis.links) {
      if (request.depth + 1 > max_depth) {
        if (filtered_by_depth) ++*filtered_by_depth;
        continue;
      }
      if (!seen.check_insert(link)) continue;
      frontier::CrawlRequest child;
      child.url = link;
      child.priority = analysis.relevance;  // parent relevance is the priority
      child.depth = request.depth + 1;
      child.seq = next_seq++;
      expansion.push_back(std::move(child));
    }
  } else {
    record.fingerprint = parsekit::fingerprint("");
  }
  return {std::move(record), std::move(expansion)};
}

struct CrawlEngine::Shared {
  // master-side state; only the master thread mutates it
  urlkit::SeenSet seen;
  frontier::CircularQueue cq;
  frontier::PriorityQueue pq;
  governor::HostLedger ledger;
  governor::RateGate gate;
  std::unique_ptr<store::PageRepo> repo;

  std::unordered_map<std::string, std::deque<frontier::CrawlRequest>> parked;
  std::unordered_map<std::string, double> parked_retry_at;
  std::unordered_map<std::string, uint32_t> retry_counts;
  std::unordered_map<std::string, uint32_t> consecutive_failures;
  std::unordered_set<std::string> quarantined;
  std::unordered_set<std::string> fingerprints;
  std::set<std::string> dispatched_pending;
  std::unordered_map<std::string, frontier::CrawlRequest> pending_requests;
  std::unordered_map<std::string, double> last_grant;

  uint64_t next_seq = 0;
  uint64_t filtered_by_depth = 0;
  uint64_t in_flight = 0;
  uint32_t checkpoint_version = 0;

  explicit Shared(const CrawlConfig& cfg) : cq(cfg.frontier_capacity) {}
};

CrawlEngine::CrawlEngine(CrawlConfig config, Clock& clock,
                         fetchnet::HostRouter router)
    : config_(std::move(config)), clock_(clock), router_(std::move(router)) {
  if (!router_) {
    // config host_map entries route named hosts; everything else is direct
    auto map = config_.host_map;
    auto direct = fetchnet::direct_router();
    router_ = [map, direct](const urlkit::CanonicalUrl& url) {
      auto it = map.find(url.host);
      if (it != map.end()) return it->second;
      return direct(url);
    };
  }
}

CrawlReport CrawlEngine::run(bool resume) {
  Shared st(config_);
  CrawlReport report;
  st.repo = std::make_unique<store::PageRepo>(config_.run_dir);

  const double start_clock = clock_.now();
  const auto start_wall = std::chrono::steady_clock::now();
  const std::string config_digest = sha256_hex(config_.raw_text);

  if (resume) {
    auto ckpt = store::load_latest_checkpoint(config_.run_dir);
    if (!ckpt.ok())
      throw std::runtime_error(std::string("resume failed: ") +
                               store::to_string(ckpt.error()));
    auto recovered = store::recover(ckpt.value());
    if (!recovered.ok())
      throw std::runtime_error(std::string("resume failed: ") +
                               store::to_string(recovered.error()));
    if (ckpt.value().config_digest_hex != config_digest)
      std::cerr << "warning: config differs from the checkpointed one\n";
    const auto& rec = recovered.value();
    st.seen.restore(rec.seen_urls);
    st.ledger.restore(rec.host_last_contact);
    st.checkpoint_version = ckpt.value().version;
    uint64_t max_seq = 0;
    for (const auto& r : rec.frontier.circular) {
      max_seq = std::max(max_seq, r.seq);
      if (!st.cq.try_enqueue(r)) st.pq.push(r);
    }
    for (const auto& r : rec.frontier.priority) {
      max_seq = std::max(max_seq, r.seq);
      st.pq.push(r);
    }
    st.next_seq = max_seq + 1;
  } else {
    for (const auto& seed : config_.seeds) {
      if (!st.seen.check_insert(seed)) continue;
      frontier::CrawlRequest r;
      r.url = seed;
      r.priority = 1.0;
      r.depth = 0;
      r.seq = st.next_seq++;
      st.pq.push(r);
    }
  }

  fetchnet::JobChannel jobs;
  fetchnet::ResultChannel results;
  fetchnet::DownloaderPool pool(config_.n_downloaders, jobs, results,
                                config_.fetch, clock_, router_);

  uint64_t pages_at_checkpoint = 0;
  double time_at_checkpoint = start_clock;
  bool crashed = false;
  std::string stop_reason;

  auto pending_total = [&]() -> uint64_t {
    uint64_t parked_count = 0;
    for (const auto& [host, dq] : st.parked) parked_count += dq.size();
    return st.cq.size() + st.pq.size() + parked_count + st.in_flight;
  };

  auto enqueue_discovered = [&](frontier::CrawlRequest r) {
    // the master is also the CQ drainer, so backpressure resolves inline
    while (!st.cq.try_enqueue(r)) {
      auto moved = st.cq.try_dequeue();
      if (!moved) break;
      st.pq.push(std::move(*moved));
    }
    ++report.urls_discovered;
  };

  auto quarantine_host = [&](const std::string& host) {
    if (!st.quarantined.insert(host).second) return;
    ++report.quarantined_hosts;
    st.parked.erase(host);
    st.parked_retry_at.erase(host);
  };

  auto write_checkpoint_now = [&]() {
    st.repo->sync_to_disk();
    store::CheckpointState ckpt;
    ckpt.version = ++st.checkpoint_version;
    ckpt.created_at = clock_.now();
    ckpt.crawl_seq = report.pages_fetched;
    ckpt.config_digest_hex = config_digest;

    auto snap = frontier::snapshot_frontier(st.cq, st.pq);
    for (const auto& [host, dq] : st.parked)
      for (const auto& r : dq) snap.priority.push_back(r);
    // dispatched-but-unconfirmed requests go back into the snapshot so a
    // resumed crawl re-fetches them; their URLs are the recrawl list
    for (const auto& [key, req] : st.pending_requests) {
      snap.priority.push_back(req);
      ckpt.recrawl_urls.push_back(key);
    }
    ckpt.frontier_text = snap.serialize();
    ckpt.seen_urls = st.seen.snapshot();
    ckpt.host_last_contact = st.ledger.snapshot();
    auto path = store::write_checkpoint(config_.run_dir, ckpt);
    pages_at_checkpoint = report.pages_fetched;
    time_at_checkpoint = clock_.now();
    return path;
  };

  auto process_result = [&](fetchnet::PoolResult&& pr) -> bool {
    ++report.pages_fetched;
    ++report.outcome_counts[outcome_key(pr.result.outcome)];
    report.max_depth_reached =
        std::max(report.max_depth_reached, pr.request.depth);
    const std::string key = pr.request.url.render();
    st.dispatched_pending.erase(key);
    st.pending_requests.erase(key);
    --st.in_flight;

    const std::string& host = pr.request.url.host;
    if (pr.result.outcome == fetchnet::Outcome::Success) {
      st.consecutive_failures[host] = 0;
      auto [record, expansion] =
          analyze_and_expand(pr.request, pr.result, config_.topic, st.seen,
                             st.next_seq, config_.stop.max_depth,
                             &st.filtered_by_depth);
      if (!st.repo->history(record.url).empty()) ++report.recrawled_pages;
      if (st.fingerprints.insert(record.fingerprint).second)
        ++report.unique_fingerprints;
      else
        ++report.duplicate_content;
      st.repo->put_page(record, pr.result.body);
      for (auto& child : expansion) enqueue_discovered(std::move(child));
    } else {
      auto record = analyze_and_expand(pr.request, pr.result, config_.topic,
                                       st.seen, st.next_seq,
                                       config_.stop.max_depth, nullptr)
                        .first;
      if (!st.repo->history(record.url).empty()) ++report.recrawled_pages;
      st.repo->put_page(record, "");
      uint32_t fails = ++st.consecutive_failures[host];
      if (fails >= config_.quarantine_failures) quarantine_host(host);

      // 5xx and timeouts get one retry at the back of the queue; 4xx never
      bool retryable = pr.result.outcome == fetchnet::Outcome::ServerError ||
                       pr.result.outcome == fetchnet::Outcome::Timeout;
      if (retryable && st.retry_counts[key] == 0 && !st.quarantined.count(host)) {
        st.retry_counts[key] = 1;
        ++report.retries;
        frontier::CrawlRequest again = pr.request;
        again.priority = 0.0;
        again.seq = st.next_seq++;
        st.pq.push(again);
      }
    }
    if (page_hook_ && !page_hook_(report.pages_fetched)) {
      crashed = true;
      return false;
    }
    return true;
  };

  auto dispatch = [&](frontier::CrawlRequest r) {
    const std::string key = r.url.render();
    double now = clock_.now();
    auto grant_it = st.last_grant.find(r.url.host);
    if (grant_it != st.last_grant.end() &&
        now - grant_it->second < config_.host_interval_seconds - 1e-9)
      ++report.politeness_violations;
    st.last_grant[r.url.host] = now;

    st.dispatched_pending.insert(key);
    st.pending_requests.emplace(key, r);
    ++st.in_flight;

    fetchnet::FetchJob job;
    job.request = std::move(r);
    auto hold = clock_.acquire_hold();
    std::string host = job.request.url.host;
    governor::HostLedger* ledger = &st.ledger;
    job.on_complete = [hold, host, ledger]() mutable {
      ledger->release(host);
      hold.reset();
    };
    jobs.push(std::move(job));
  };

  auto maybe_checkpoint = [&]() {
    if (report.pages_fetched - pages_at_checkpoint >= config_.checkpoint_pages ||
        (clock_.now() - time_at_checkpoint >= config_.checkpoint_seconds &&
         report.pages_fetched > pages_at_checkpoint)) {
      write_checkpoint_now();
    }
  };

  try {
  for (;;) {
    // 1) results first: they release host slots and feed the frontier
    bool progressed = false;
    while (auto pr = results.try_pop()) {
      progressed = true;
      if (!process_result(std::move(*pr))) break;
      maybe_checkpoint();
    }
    if (crashed) break;

    // 2) master drains the circular intake into the priority queue
    while (auto moved = st.cq.try_dequeue()) st.pq.push(std::move(*moved));

    // 3) stop conditions
    governor::Progress progress;
    progress.pages_fetched = report.pages_fetched;
    progress.elapsed_seconds = clock_.now() - start_clock;
    if (pending_total() == 0) {
      // links suppressed by the depth bound are the shallowest pending work
      if (st.filtered_by_depth > 0)
        progress.frontier_min_depth = config_.stop.max_depth + 1;
      else
        progress.frontier_min_depth = std::nullopt;
    } else {
      progress.frontier_min_depth = 0;
    }
    if (auto stop = governor::should_stop(progress, config_.stop)) {
      stop_reason = governor::to_string(*stop);
      break;
    }

    // 4) dispatch while budget, rate and politeness allow
    double next_event = kInf;
    for (;;) {
      if (report.pages_fetched + st.in_flight >= config_.stop.max_pages) break;
      double now = clock_.now();
      st.gate.set_rate(
          governor::current_rate(config_.rate_profile, now,
                                 config_.tz_offset_seconds),
          now);
      double gate_wait = st.gate.acquire(now);
      if (gate_wait > 0) {
        next_event = std::min(next_event, now + gate_wait);
        break;
      }

      // a consumed token needs a grantable request: parked hosts first
      std::optional<frontier::CrawlRequest> chosen;
      for (auto it = st.parked.begin(); !chosen && it != st.parked.end();) {
        auto retry_it = st.parked_retry_at.find(it->first);
        if (retry_it != st.parked_retry_at.end() && retry_it->second > now) {
          next_event = std::min(next_event, retry_it->second);
          ++it;
          continue;
        }
        auto decision =
            st.ledger.acquire(it->first, now, config_.host_interval_seconds);
        if (decision.granted) {
          chosen = std::move(it->second.front());
          it->second.pop_front();
          if (it->second.empty()) {
            st.parked_retry_at.erase(it->first);
            it = st.parked.erase(it);
          }
        } else {
          st.parked_retry_at[it->first] = decision.retry_at;
          next_event = std::min(next_event, decision.retry_at);
          ++it;
        }
      }
      while (!chosen) {
        auto r = st.pq.try_pop();
        if (!r) break;
        if (st.quarantined.count(r->url.host)) continue;  // host given up on
        auto decision =
            st.ledger.acquire(r->url.host, now, config_.host_interval_seconds);
        if (decision.granted) {
          chosen = std::move(r);
        } else {
          st.parked_retry_at[r->url.host] = decision.retry_at;
          next_event = std::min(next_event, decision.retry_at);
          st.parked[r->url.host].push_back(std::move(*r));
        }
      }
      if (!chosen) break;  // token unused; nothing grantable right now
      dispatch(std::move(*chosen));
      progressed = true;
    }

    // 5) checkpoint cadence: every K pages or T seconds, whichever first
    maybe_checkpoint();

    // 6) idle handling: wait for results or advance the clock to the next
    //    politeness/rate event
    if (!progressed) {
      if (st.in_flight > 0) {
        if (auto pr = results.pop_wait(std::chrono::milliseconds(2))) {
          if (!process_result(std::move(*pr))) break;
          maybe_checkpoint();
        }
      } else if (next_event < kInf) {
        clock_.sleep_until(next_event);
      }
      // otherwise the next iteration's stop check settles it
    }
    if (crashed) break;
  }
  } catch (const store::IoFailure&) {
    // abort cleanly: stop the pool and leave a best-effort checkpoint behind
    jobs.close();
    pool.join();
    try {
      write_checkpoint_now();
    } catch (...) {
    }
    throw;
  }

  // shutdown: stop handing out work, drain what is already in flight
  jobs.close();
  pool.join();
  if (!crashed) {
    while (auto pr = results.try_pop()) {
      if (!process_result(std::move(*pr))) break;
    }
  }

  report.duration_seconds = clock_.now() - start_clock;
  report.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() -
                                    start_wall)
          .count();
  report.throughput_pps =
      report.wall_seconds > 0
          ? static_cast<double>(report.pages_fetched) / report.wall_seconds
          : 0.0;
  report.stop_reason = crashed ? "Crashed" : stop_reason;

  if (!crashed) {
    report.final_checkpoint = write_checkpoint_now().string();
    std::ofstream report_file(config_.run_dir / "report.csv");
    report_file << report.to_csv();
  }
  return report;
}

std::string RevisitReport::to_text() const {
  std::ostringstream out;
  out << "policy:              " << revisit::to_string(policy) << "\n"
      << "budget:              " << budget << " visits/unit time\n"
      << "horizon:             " << horizon << "\n"
      << "refetches:           " << refetches << "\n"
      << "samples:             " << samples << "\n"
      << "measured freshness:  " << measured_freshness << "\n"
      << "predicted freshness: " << predicted_freshness << "\n"
      << "measured age:        " << measured_age << "\n"
      << "predicted age:       " << predicted_age << "\n";
  return out.str();
}

RevisitReport run_revisit_loop(simweb::ServeHandle& web, store::PageRepo& repo,
                               Clock& clock, const revisit::RevisitPlan& plan,
                               const std::vector<uint32_t>& page_ids,
                               double horizon, double sample_interval,
                               uint64_t rng_seed,
                               const fetchnet::FetchPolicy& policy) {
  if (repo.empty())
    throw std::runtime_error("no baseline crawl in store (run a crawl first)");
  if (page_ids.size() != plan.frequencies.size())
    throw std::invalid_argument("plan and page list sizes differ");

  RevisitReport report;
  report.policy = plan.policy;
  report.budget = plan.budget;
  report.horizon = horizon;
  report.predicted_freshness = plan.predicted_avg_freshness;
  report.predicted_age = plan.predicted_avg_age;

  const size_t n = page_ids.size();
  const double t0 = clock.now();
  auto router = web.router();

  std::vector<std::string> stored_fp(n);
  std::vector<double> last_fetch(n);
  for (size_t i = 0; i < n; ++i) {
    auto page = repo.get_page(web.url_of(page_ids[i]));
    if (!page)
      throw std::runtime_error("page missing from baseline: " +
                               web.url_of(page_ids[i]).render());
    stored_fp[i] = page->first.fingerprint;
    last_fetch[i] = page->first.fetched_at;
  }

  // event-driven walk: revisit fetches and truth samples, with the site's
  // change process advanced exactly over each gap
  std::vector<double> next_visit(n, kInf);
  for (size_t i = 0; i < n; ++i)
    if (plan.frequencies[i] > 0) next_visit[i] = t0 + 1.0 / plan.frequencies[i];
  // midpoint sampling: grid points between visit boundaries estimate the
  // time-average without endpoint bias
  double next_sample = t0 + sample_interval / 2.0;
  double last_advance = t0;
  uint64_t step = 0;

  double fresh_sum = 0.0, age_sum = 0.0;
  uint64_t sample_points = 0;

  const double end_time = t0 + horizon;
  for (;;) {
    double t = next_sample;
    size_t visit_page = n;
    for (size_t i = 0; i < n; ++i) {
      if (next_visit[i] < t) {
        t = next_visit[i];
        visit_page = i;
      }
    }
    if (t > end_time) break;

    clock.sleep_until(t);
    if (t > last_advance) {
      web.advance_changes(t - last_advance, rng_seed + step++);
      last_advance = t;
    }

    if (visit_page < n) {
      size_t i = visit_page;
      auto result = fetchnet::fetch(web.url_of(page_ids[i]), policy, clock, router);
      if (result.outcome == fetchnet::Outcome::Success) {
        store::PageRecord rec;
        rec.url = web.url_of(page_ids[i]);
        rec.fetched_at = t;
        rec.status = result.status.value_or(0);
        rec.fingerprint = parsekit::fingerprint(result.body);
        repo.put_page(rec, result.body);
        stored_fp[i] = rec.fingerprint;
        last_fetch[i] = t;
      }
      ++report.refetches;
      next_visit[i] += 1.0 / plan.frequencies[i];
    } else {
      for (size_t i = 0; i < n; ++i) {
        bool fresh = web.live_fingerprint(page_ids[i]) == stored_fp[i];
        fresh_sum += fresh ? 1.0 : 0.0;
        if (!fresh) {
          auto changes = web.change_times(page_ids[i]);
          auto it = std::upper_bound(changes.begin(), changes.end(),
                                     last_fetch[i]);
          double diverged = it != changes.end() ? *it : t;
          age_sum += std::max(0.0, t - diverged);
        }
        ++sample_points;
      }
      next_sample += sample_interval;
    }
  }

  report.samples = sample_points;
  report.measured_freshness =
      sample_points > 0 ? fresh_sum / static_cast<double>(sample_points) : 1.0;
  report.measured_age =
      sample_points > 0 ? age_sum / static_cast<double>(sample_points) : 0.0;
  return report;
}

}  // namespace epow::crawlctl
