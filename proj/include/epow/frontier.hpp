#pragma once

#include <cstdint>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "epow/expected.hpp"
#include "epow/urlkit.hpp"

namespace epow::frontier {

/// A prioritized fetch order. seq is the global discovery sequence number
/// and breaks priority ties first-in-first-out.
struct CrawlRequest {
  urlkit::CanonicalUrl url;
  double priority = 0.0;  // in [0,1]
  uint32_t depth = 0;     // hops from a seed
  uint64_t seq = 0;

  bool operator==(const CrawlRequest&) const = default;
};

/// Bounded FIFO intake buffer. A full queue rejects rather than overwrites:
/// backpressure must be observable, silently dropping discovered URLs would
/// break request conservation.
class CircularQueue {
 public:
  explicit CircularQueue(size_t capacity);

  /// False means FrontierFull; the queue is unchanged and the caller backs off.
  bool try_enqueue(CrawlRequest r);
  std::optional<CrawlRequest> try_dequeue();

  size_t size() const;
  size_t capacity() const { return ring_.size(); }
  std::vector<CrawlRequest> snapshot() const;

 private:
  mutable std::mutex mu_;
  std::vector<CrawlRequest> ring_;
  size_t head_ = 0;
  size_t count_ = 0;
};

/// Unbounded dispatch queue ordered by (priority descending, seq ascending).
class PriorityQueue {
 public:
  void push(CrawlRequest r);
  std::optional<CrawlRequest> try_pop();

  size_t size() const;
  bool empty() const { return size() == 0; }
  std::vector<CrawlRequest> snapshot() const;

 private:
  mutable std::mutex mu_;
  std::vector<CrawlRequest> heap_;
};

struct FrontierSnapshot {
  std::vector<CrawlRequest> circular;
  std::vector<CrawlRequest> priority;

  size_t total() const { return circular.size() + priority.size(); }

  /// One line per pending request: URL, priority (6 decimal places), depth,
  /// seq, queue tag (CQ|PQ). This is the checkpoint wire format.
  std::string serialize() const;
  static Expected<FrontierSnapshot, std::string> parse(const std::string& text);
};

/// Consistent point-in-time listing of everything pending in both queues.
FrontierSnapshot snapshot_frontier(const CircularQueue& cq,
                                   const PriorityQueue& pq);

}  // namespace epow::frontier
