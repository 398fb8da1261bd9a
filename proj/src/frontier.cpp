#include "epow/frontier.hpp"

#include <algorithm>
#include <cinttypes>
#include <cstdio>
#include <sstream>
#include <stdexcept>

namespace epow::frontier {

namespace {

// Max-heap order: higher priority first, lower seq among equals.
bool heap_before(const CrawlRequest& a, const CrawlRequest& b) {
  // "a sorts below b" for std::push_heap comparators
  if (a.priority != b.priority) return a.priority < b.priority;
  return a.seq > b.seq;
}

}  // namespace

CircularQueue::CircularQueue(size_t capacity) : ring_(capacity) {
  if (capacity == 0) throw std::invalid_argument("capacity must be > 0");
}

bool CircularQueue::try_enqueue(CrawlRequest r) {
  std::lock_guard lock(mu_);
  if (count_ == ring_.size()) return false;
  ring_[(head_ + count_) % ring_.size()] = std::move(r);
  ++count_;
  return true;
}

std::optional<CrawlRequest> CircularQueue::try_dequeue() {
  std::lock_guard lock(mu_);
  if (count_ == 0) return std::nullopt;
  CrawlRequest r = std::move(ring_[head_]);
  head_ = (head_ + 1) % ring_.size();
  --count_;
  return r;
}

size_t CircularQueue::size() const {
  std::lock_guard lock(mu_);
  return count_;
}

std::vector<CrawlRequest> CircularQueue::snapshot() const {
  std::lock_guard lock(mu_);
  std::vector<CrawlRequest> out;
  out.reserve(count_);
  for (size_t i = 0; i < count_; ++i)
    out.push_back(ring_[(head_ + i) % ring_.size()]);
  return out;
}

void PriorityQueue::push(CrawlRequest r) {
  std::lock_guard lock(mu_);
  heap_.push_back(std::move(r));
  std::push_heap(heap_.begin(), heap_.end(), heap_before);
}

std::optional<CrawlRequest> PriorityQueue::try_pop() {
  std::lock_guard lock(mu_);
  if (heap_.empty()) return std::nullopt;
  std::pop_heap(heap_.begin(), heap_.end(), heap_before);
  CrawlRequest r = std::move(heap_.back());
  heap_.pop_back();
  return r;
}

size_t PriorityQueue::size() const {
  std::lock_guard lock(mu_);
  return heap_.size();
}

std::vector<CrawlRequest> PriorityQueue::snapshot() const {
  std::lock_guard lock(mu_);
  return heap_;
}

std::string FrontierSnapshot::serialize() const {
  std::ostringstream out;
  auto emit = [&](const CrawlRequest& r, const char* tag) {
    char prio[32];
    std::snprintf(prio, sizeof prio, "%.6f", r.priority);
    out << r.url.render() << ' ' << prio << ' ' << r.depth << ' ' << r.seq
        << ' ' << tag << '\n';
  };
  for (const auto& r : circular) emit(r, "CQ");
  for (const auto& r : priority) emit(r, "PQ");
  return out.str();
}

Expected<FrontierSnapshot, std::string> FrontierSnapshot::parse(
    const std::string& text) {
  FrontierSnapshot snap;
  std::istringstream in(text);
  std::string line;
  size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string url_text, tag;
    double priority;
    uint32_t depth;
    uint64_t seq;
    if (!(ls >> url_text >> priority >> depth >> seq >> tag))
      return "frontier snapshot line " + std::to_string(lineno) + ": bad field";
    auto url = urlkit::parse_url(url_text);
    if (!url)
      return "frontier snapshot line " + std::to_string(lineno) + ": bad URL";
    CrawlRequest r{*url, priority, depth, seq};
    if (tag == "CQ")
      snap.circular.push_back(std::move(r));
    else if (tag == "PQ")
      snap.priority.push_back(std::move(r));
    else
      return "frontier snapshot line " + std::to_string(lineno) + ": bad tag";
  }
  return snap;
}

FrontierSnapshot snapshot_frontier(const CircularQueue& cq,
                                   const PriorityQueue& pq) {
  FrontierSnapshot snap;
  snap.circular = cq.snapshot();
  snap.priority = pq.snapshot();
  return snap;
}

}  // namespace epow::frontier
