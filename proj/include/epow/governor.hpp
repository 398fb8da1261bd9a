#pragma once

#include <cstdint>
#include <limits>
#include <mutex>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "epow/expected.hpp"

namespace epow::governor {

inline constexpr double kUnlimitedRate = std::numeric_limits<double>::infinity();

struct HostState {
  double last_contact = -1.0;  // epoch-seconds; negative = never contacted
  uint32_t in_flight = 0;
};

struct SlotDecision {
  bool granted = false;
  double retry_at = 0.0;  // meaningful when not granted
};

/// Per-host politeness ledger. A slot is granted only when the host has no
/// request in flight and at least min_interval has passed since the last
/// grant; grant and bookkeeping update are one atomic step.
class HostLedger {
 public:
  SlotDecision acquire(const std::string& host, double now, double min_interval);
  void release(const std::string& host);

  std::optional<HostState> state(const std::string& host) const;

  /// (host, last_contact) pairs, sorted by host, for checkpointing.
  std::vector<std::pair<std::string, double>> snapshot() const;
  void restore(const std::vector<std::pair<std::string, double>>& entries);

 private:
  mutable std::mutex mu_;
  std::unordered_map<std::string, HostState> hosts_;
};

/// Time-of-day download-rate table: half-open local-hour buckets [start,end)
/// over a mandatory default. Crawl slow during peak hours, fast at night.
struct RateProfile {
  struct Bucket {
    int start_hour = 0;
    int end_hour = 0;  // exclusive
    double pages_per_second = 0;
  };

  std::vector<Bucket> buckets;
  double default_rate = 100.0;

  /// Error text when buckets overlap or rates are invalid.
  std::optional<std::string> validate() const;
};

/// Rate of the bucket containing the local hour of `now`.
double current_rate(const RateProfile& profile, double now,
                    double timezone_offset_seconds);

/// Token bucket with burst = rate, refilled continuously. acquire() either
/// consumes a token (returns 0) or tells the caller how long to wait.
class RateGate {
 public:
  explicit RateGate(double pages_per_second = kUnlimitedRate);

  void set_rate(double pages_per_second, double now);
  double rate() const;

  /// 0 = proceed (a token was consumed); >0 = seconds until one is available.
  double acquire(double now);

 private:
  mutable std::mutex mu_;
  double rate_;
  double tokens_;
  double last_refill_ = 0.0;
};

enum class StopReason {
  PageBudget,
  TimeBudget,
  DepthExhausted,
  FrontierExhausted,
};

const char* to_string(StopReason r);

inline constexpr uint64_t kUnlimited = std::numeric_limits<uint64_t>::max();

struct StopConditions {
  uint64_t max_pages = kUnlimited;
  double max_duration_seconds = std::numeric_limits<double>::infinity();
  uint32_t max_depth = std::numeric_limits<uint32_t>::max();
};

struct Progress {
  uint64_t pages_fetched = 0;
  double elapsed_seconds = 0;
  /// Depth of the shallowest pending request; nullopt when the frontier
  /// (including in-flight work) is empty.
  std::optional<uint32_t> frontier_min_depth;
};

/// First violated bound wins: pages, then duration, then depth exhaustion.
std::optional<StopReason> should_stop(const Progress& progress,
                                      const StopConditions& limits);

}  // namespace epow::governor
