#include "epow/simweb.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <mutex>
#include <sstream>
#include <stdexcept>
#include <thread>
#include <unordered_map>

#include <httplib.h>

#include "epow/digest.hpp"
#include "epow/rand.hpp"

namespace epow::simweb {

namespace {

std::string host_name(uint32_t i) { return "h" + std::to_string(i) + ".sim"; }

std::string strip_port(std::string host) {
  size_t colon = host.find(':');
  if (colon != std::string::npos) host.erase(colon);
  return host;
}

}  // namespace

SiteGraph SiteGraph::generate(const SiteParams& params) {
  if (params.n_pages < 1 || params.n_hosts < 1)
    throw std::invalid_argument("site needs at least one page and one host");
  if (params.lambda_max > 0 && params.lambda_min > params.lambda_max)
    throw std::invalid_argument("lambda_min must be <= lambda_max");

  SiteGraph site;
  Rng rng(params.seed);
  for (uint32_t h = 0; h < params.n_hosts; ++h)
    site.hosts_.push_back(host_name(h));

  bool planted = !params.topic_terms.empty();
  site.pages_.resize(params.n_pages);
  for (uint32_t i = 0; i < params.n_pages; ++i) {
    SitePage& p = site.pages_[i];
    p.id = i;
    p.host = site.hosts_[i % params.n_hosts];
    p.target = "/p" + std::to_string(i);
    if (params.lambda_max > 0) {
      double lo = std::max(params.lambda_min, 1e-3);
      p.lambda = rng.log_uniform(lo, params.lambda_max);
    }
    p.high_topic = planted && (i == 0 || rng.uniform01() < params.high_fraction);
  }

  // spanning links guarantee reachability from page 0, extra links follow
  // the mean out-degree; planted sites link within their own class with
  // probability `assortative`
  for (uint32_t i = 1; i < params.n_pages; ++i) {
    uint32_t parent = static_cast<uint32_t>(rng.below(i));
    if (planted && site.pages_[i].high_topic !=
                       site.pages_[parent].high_topic) {
      for (int tries = 0; tries < 16; ++tries) {
        uint32_t cand = static_cast<uint32_t>(rng.below(i));
        if (site.pages_[cand].high_topic == site.pages_[i].high_topic) {
          parent = cand;
          break;
        }
      }
    }
    site.pages_[parent].links.push_back(i);
  }
  double extra_mean = std::max(0.0, params.out_degree_mean - 1.0);
  for (uint32_t i = 0; i < params.n_pages; ++i) {
    uint32_t extra = static_cast<uint32_t>(extra_mean);
    if (rng.uniform01() < extra_mean - std::floor(extra_mean)) ++extra;
    for (uint32_t k = 0; k < extra; ++k) {
      uint32_t target = static_cast<uint32_t>(rng.below(params.n_pages));
      if (planted &&
          site.pages_[target].high_topic != site.pages_[i].high_topic &&
          rng.uniform01() < params.assortative) {
        for (int tries = 0; tries < 16; ++tries) {
          uint32_t cand = static_cast<uint32_t>(rng.below(params.n_pages));
          if (site.pages_[cand].high_topic == site.pages_[i].high_topic) {
            target = cand;
            break;
          }
        }
      }
      if (target == i) continue;
      site.pages_[i].links.push_back(target);
    }
    auto& links = site.pages_[i].links;
    std::vector<uint32_t> dedup;
    for (uint32_t t : links)
      if (std::find(dedup.begin(), dedup.end(), t) == dedup.end())
        dedup.push_back(t);
    links = std::move(dedup);
  }

  if (planted) {
    // bodies carry topic terms: high pages most of them, low pages few
    site.topic_terms_ = params.topic_terms;
  }
  return site;
}

SiteGraph SiteGraph::gallery_fixture() {
  static const char* kSorts[] = {"date", "name", "size", "rating"};
  static const char* kThumbs[] = {"small", "medium", "large"};
  static const char* kFormats[] = {"jpg", "png"};
  static const char* kUgc[] = {"0", "1"};

  SiteGraph site;
  site.gallery_ = true;
  site.hosts_.push_back("gallery.sim");

  // hrefs deliberately list parameters in non-canonical order; the crawler's
  // sorted-query canonicalization must still see exactly 48 distinct URLs
  std::ostringstream body;
  body << "<html><head><title>gallery</title></head><body>\n"
       << "<h1>photo gallery</h1>\n";
  uint32_t id = 0;
  for (const char* s : kSorts) {
    for (const char* t : kThumbs) {
      for (const char* f : kFormats) {
        for (const char* u : kUgc) {
          SitePage p;
          p.id = id;
          p.host = "gallery.sim";
          // canonical target: keys in sorted order
          p.target = std::string("/gallery?fmt=") + f + "&sort=" + s +
                     "&thumb=" + t + "&ugc=" + u;
          site.pages_.push_back(std::move(p));
          body << "<a href=\"/gallery?sort=" << s << "&thumb=" << t
               << "&fmt=" << f << "&ugc=" << u << "\">view</a>\n";
          ++id;
        }
      }
    }
  }
  body << "</body></html>\n";
  site.gallery_body_ = body.str();
  return site;
}

SiteGraph SiteGraph::custom(std::vector<std::string> hosts,
                            std::vector<SitePage> pages) {
  SiteGraph site;
  site.hosts_ = std::move(hosts);
  site.pages_ = std::move(pages);
  for (uint32_t i = 0; i < site.pages_.size(); ++i) {
    if (site.pages_[i].id != i)
      throw std::invalid_argument("custom site: page id must equal index");
    for (uint32_t t : site.pages_[i].links)
      if (t >= site.pages_.size())
        throw std::invalid_argument("custom site: dangling link target");
  }
  return site;
}

urlkit::CanonicalUrl SiteGraph::url_of(uint32_t id) const {
  const SitePage& p = pages_.at(id);
  auto url = urlkit::parse_url("http://" + p.host + p.target);
  if (!url) throw std::logic_error("simweb produced an unparsable URL");
  return *url;
}

std::optional<uint32_t> SiteGraph::find(const std::string& host,
                                        const std::string& target) const {
  for (const auto& p : pages_)
    if (p.host == host && p.target == target) return p.id;
  return std::nullopt;
}

std::string SiteGraph::body(uint32_t id) const {
  const SitePage& p = pages_.at(id);
  if (gallery_) return gallery_body_;

  std::ostringstream out;
  out << "<html><head><title>page " << p.id << "</title></head><body>\n"
      << "<h1>" << p.host << p.target << "</h1>\n"
      << "<p>revision " << p.version << "</p>\n";
  if (!topic_terms_.empty()) {
    size_t k = topic_terms_.size();
    size_t count = p.high_topic
                       ? static_cast<size_t>(std::lround(0.8 * double(k)))
                       : static_cast<size_t>(std::lround(0.2 * double(k)));
    out << "<p>";
    for (size_t i = 0; i < count; ++i) out << topic_terms_[i] << ' ';
    out << "</p>\n";
  }
  out << "<p>filler" << (p.id % 17) << " filler" << (p.id % 31) << "</p>\n";
  for (uint32_t t : p.links) {
    const SitePage& q = pages_.at(t);
    if (q.host == p.host)
      out << "<a href=\"" << q.target << "\">p" << q.id << "</a>\n";
    else
      out << "<a href=\"http://" << q.host << q.target << "\">p" << q.id
          << "</a>\n";
  }
  out << "</body></html>\n";
  return out.str();
}

std::vector<uint32_t> SiteGraph::advance_changes(double dt, uint64_t rng_seed,
                                                 double now) {
  if (!(dt > 0)) throw std::invalid_argument("dt must be > 0");
  Rng rng(rng_seed);
  std::vector<uint32_t> changed;
  for (auto& p : pages_) {
    if (p.lambda <= 0) {
      rng.uniform01();  // keep the draw sequence aligned across calls
      continue;
    }
    double p_change = -std::expm1(-p.lambda * dt);
    if (rng.uniform01() < p_change) {
      ++p.version;
      p.change_times.push_back(now);
      changed.push_back(p.id);
    }
  }
  return changed;
}

std::string LoggedRequest::header(const std::string& name) const {
  for (const auto& [k, v] : headers)
    if (k == name) return v;
  return {};
}

size_t politeness_violations(const std::vector<LoggedRequest>& log,
                             double min_interval) {
  std::map<std::string, std::vector<double>> per_host;
  for (const auto& r : log) per_host[r.host].push_back(r.arrival);
  size_t violations = 0;
  for (auto& [host, times] : per_host) {
    std::sort(times.begin(), times.end());
    for (size_t i = 1; i < times.size(); ++i)
      if (times[i] - times[i - 1] < min_interval - 1e-9) ++violations;
  }
  return violations;
}

std::string request_log_csv(const std::vector<LoggedRequest>& log) {
  std::ostringstream out;
  out << "arrival,host,target,user_agent\n";
  for (const auto& r : log) {
    char stamp[32];
    std::snprintf(stamp, sizeof stamp, "%.6f", r.arrival);
    out << stamp << ',' << r.host << ',' << r.target << ','
        << r.header("User-Agent") << '\n';
  }
  return out.str();
}

struct ServeHandle::Impl {
  SiteGraph site;
  Clock& clock;
  httplib::Server server;
  std::thread listener;
  int port = 0;

  mutable std::mutex mu;
  std::vector<LoggedRequest> log;
  std::map<std::pair<std::string, std::string>, FaultDirective> faults;
  std::unordered_map<std::string, uint32_t> index;  // host + target -> page
  std::unordered_map<std::string, size_t> active_per_host;
  size_t max_concurrent = 0;

  Impl(SiteGraph s, Clock& c) : site(std::move(s)), clock(c) {}

  static std::string key(const std::string& host, const std::string& target) {
    return host + "|" + target;
  }

  struct ActiveGuard {
    Impl* impl;
    std::string host;
    ~ActiveGuard() {
      std::lock_guard lock(impl->mu);
      --impl->active_per_host[host];
    }
  };

  void handle(const httplib::Request& req, httplib::Response& res) {
    std::string host = strip_port(req.get_header_value("Host"));
    std::string target = req.target;

    ActiveGuard guard{this, host};
    std::optional<FaultDirective> fault;
    uint32_t page_id = 0;
    bool found = false;
    {
      std::lock_guard lock(mu);
      size_t active = ++active_per_host[host];
      max_concurrent = std::max(max_concurrent, active);
      LoggedRequest entry;
      entry.arrival = clock.now();
      entry.host = host;
      entry.target = target;
      for (const auto& [k, v] : req.headers) entry.headers.emplace_back(k, v);
      log.push_back(std::move(entry));

      // redirect chains answer on synthesized /hop<k> suffixes too
      auto fit = faults.find({host, target});
      if (fit == faults.end()) {
        size_t hop = target.rfind("/hop");
        if (hop != std::string::npos) {
          auto bit = faults.find({host, target.substr(0, hop)});
          if (bit != faults.end() &&
              bit->second.kind == FaultDirective::Kind::RedirectChain)
            fit = bit;
        }
      }
      if (fit != faults.end()) fault = fit->second;

      auto it = index.find(key(host, target));
      if (it != index.end()) {
        page_id = it->second;
        found = true;
      }
    }

    if (fault) {
      apply_fault(*fault, target, res);
      return;
    }
    if (!found) {
      res.status = 404;
      res.set_content("not found", "text/plain");
      return;
    }
    std::string body;
    {
      std::lock_guard lock(mu);
      body = site.body(page_id);
    }
    res.status = 200;
    res.set_content(body, "text/html");
  }

  void apply_fault(const FaultDirective& f, const std::string& target,
                   httplib::Response& res) {
    switch (f.kind) {
      case FaultDirective::Kind::Delay: {
        std::this_thread::sleep_for(
            std::chrono::duration<double>(f.delay_real_seconds));
        res.status = 200;
        res.set_content("<html><body>slow page</body></html>", "text/html");
        return;
      }
      case FaultDirective::Kind::RedirectChain: {
        size_t hop_pos = target.rfind("/hop");
        int hop = 0;
        std::string base = target;
        if (hop_pos != std::string::npos) {
          hop = std::atoi(target.c_str() + hop_pos + 4);
          base = target.substr(0, hop_pos);
        }
        if (hop >= f.chain_length) {
          res.status = 200;
          res.set_content("<html><body>end of chain</body></html>",
                          "text/html");
        } else {
          res.status = 301;
          res.set_header("Location", base + "/hop" + std::to_string(hop + 1));
        }
        return;
      }
      case FaultDirective::Kind::Oversize: {
        res.status = 200;
        res.set_content(std::string(f.oversize_bytes, 'x'), "text/html");
        return;
      }
      case FaultDirective::Kind::Refuse: {
        // advertise a body, then abort mid-transfer
        res.status = 200;
        res.set_content_provider(
            1024, "text/html",
            [](size_t, size_t, httplib::DataSink&) { return false; });
        return;
      }
      case FaultDirective::Kind::Status: {
        res.status = f.status;
        res.set_content("error page", "text/plain");
        return;
      }
    }
  }
};

ServeHandle::ServeHandle(SiteGraph site, Clock& clock)
    : impl_(std::make_unique<Impl>(std::move(site), clock)) {
  for (uint32_t i = 0; i < impl_->site.page_count(); ++i) {
    const SitePage& p = impl_->site.page(i);
    impl_->index[Impl::key(p.host, p.target)] = i;
  }
  impl_->server.Get(".*", [this](const httplib::Request& req,
                                 httplib::Response& res) {
    impl_->handle(req, res);
  });
  impl_->port = impl_->server.bind_to_any_port("127.0.0.1");
  if (impl_->port <= 0) throw std::runtime_error("simweb: bind failed");
  impl_->listener = std::thread([this] { impl_->server.listen_after_bind(); });
  impl_->server.wait_until_ready();
}

ServeHandle::~ServeHandle() {
  impl_->server.stop();
  if (impl_->listener.joinable()) impl_->listener.join();
}

int ServeHandle::port() const { return impl_->port; }

std::vector<LoggedRequest> ServeHandle::request_log() const {
  std::lock_guard lock(impl_->mu);
  return impl_->log;
}

size_t ServeHandle::request_count() const {
  std::lock_guard lock(impl_->mu);
  return impl_->log.size();
}

size_t ServeHandle::max_concurrent_per_host() const {
  std::lock_guard lock(impl_->mu);
  return impl_->max_concurrent;
}

void ServeHandle::set_fault(const std::string& host, const std::string& target,
                            FaultDirective directive) {
  std::lock_guard lock(impl_->mu);
  impl_->faults[{host, target}] = directive;
}

fetchnet::HostRouter ServeHandle::router() const {
  int port = impl_->port;
  return [port](const urlkit::CanonicalUrl&) {
    return std::make_pair(std::string("127.0.0.1"), port);
  };
}

std::vector<uint32_t> ServeHandle::advance_changes(double dt,
                                                   uint64_t rng_seed) {
  std::lock_guard lock(impl_->mu);
  return impl_->site.advance_changes(dt, rng_seed, impl_->clock.now());
}

size_t ServeHandle::page_count() const { return impl_->site.page_count(); }

urlkit::CanonicalUrl ServeHandle::url_of(uint32_t id) const {
  return impl_->site.url_of(id);
}

double ServeHandle::lambda_of(uint32_t id) const {
  std::lock_guard lock(impl_->mu);
  return impl_->site.page(id).lambda;
}

std::string ServeHandle::live_fingerprint(uint32_t id) const {
  std::lock_guard lock(impl_->mu);
  return sha256_hex(impl_->site.body(id));
}

std::vector<double> ServeHandle::change_times(uint32_t id) const {
  std::lock_guard lock(impl_->mu);
  return impl_->site.page(id).change_times;
}

}  // namespace epow::simweb
