#include "epow/governor.hpp"

#include <algorithm>
#include <cmath>

namespace epow::governor {

SlotDecision HostLedger::acquire(const std::string& host, double now,
                                 double min_interval) {
  std::lock_guard lock(mu_);
  HostState& st = hosts_[host];
  if (st.in_flight > 0) {
    // no ETA while a request is outstanding; retry once it completes
    return {false, now + min_interval};
  }
  if (st.last_contact >= 0 && now - st.last_contact < min_interval) {
    return {false, st.last_contact + min_interval};
  }
  st.last_contact = std::max(st.last_contact, now);
  ++st.in_flight;
  return {true, 0.0};
}

void HostLedger::release(const std::string& host) {
  std::lock_guard lock(mu_);
  auto it = hosts_.find(host);
  if (it != hosts_.end() && it->second.in_flight > 0) --it->second.in_flight;
}

std::optional<HostState> HostLedger::state(const std::string& host) const {
  std::lock_guard lock(mu_);
  auto it = hosts_.find(host);
  if (it == hosts_.end()) return std::nullopt;
  return it->second;
}

std::vector<std::pair<std::string, double>> HostLedger::snapshot() const {
  std::lock_guard lock(mu_);
  std::vector<std::pair<std::string, double>> out;
  out.reserve(hosts_.size());
  for (const auto& [host, st] : hosts_) out.emplace_back(host, st.last_contact);
  std::sort(out.begin(), out.end());
  return out;
}

void HostLedger::restore(
    const std::vector<std::pair<std::string, double>>& entries) {
  std::lock_guard lock(mu_);
  hosts_.clear();
  for (const auto& [host, last] : entries) hosts_[host] = {last, 0};
}

std::optional<std::string> RateProfile::validate() const {
  if (!(default_rate > 0)) return "default rate must be > 0";
  bool covered[24] = {};
  for (const auto& b : buckets) {
    if (b.start_hour < 0 || b.start_hour > 23 || b.end_hour < 1 ||
        b.end_hour > 24 || b.start_hour >= b.end_hour)
      return "rate bucket hours must satisfy 0 <= start < end <= 24";
    if (!(b.pages_per_second > 0)) return "rate must be > 0";
    for (int h = b.start_hour; h < b.end_hour; ++h) {
      if (covered[h]) return "rate buckets overlap at hour " + std::to_string(h);
      covered[h] = true;
    }
  }
  return std::nullopt;
}

double current_rate(const RateProfile& profile, double now,
                    double timezone_offset_seconds) {
  double local = now + timezone_offset_seconds;
  double day = std::fmod(local, 86400.0);
  if (day < 0) day += 86400.0;
  int hour = static_cast<int>(day / 3600.0);
  if (hour > 23) hour = 23;
  for (const auto& b : profile.buckets) {
    if (hour >= b.start_hour && hour < b.end_hour) return b.pages_per_second;
  }
  return profile.default_rate;
}

RateGate::RateGate(double pages_per_second)
    : rate_(pages_per_second), tokens_(pages_per_second) {
  if (std::isinf(rate_)) tokens_ = 0;
}

void RateGate::set_rate(double pages_per_second, double now) {
  std::lock_guard lock(mu_);
  if (pages_per_second == rate_) return;
  rate_ = pages_per_second;
  // burst equals the rate; start the new regime with a full bucket
  tokens_ = std::isinf(rate_) ? 0 : rate_;
  last_refill_ = now;
}

double RateGate::rate() const {
  std::lock_guard lock(mu_);
  return rate_;
}

double RateGate::acquire(double now) {
  std::lock_guard lock(mu_);
  if (std::isinf(rate_)) return 0.0;
  if (now > last_refill_) {
    tokens_ = std::min(rate_, tokens_ + (now - last_refill_) * rate_);
  }
  last_refill_ = std::max(last_refill_, now);
  // epsilon absorbs refill round-off so a waited-out caller always gets in
  if (tokens_ >= 1.0 - 1e-9) {
    tokens_ = std::max(0.0, tokens_ - 1.0);
    return 0.0;
  }
  return (1.0 - tokens_) / rate_;
}

const char* to_string(StopReason r) {
  switch (r) {
    case StopReason::PageBudget: return "PageBudget";
    case StopReason::TimeBudget: return "TimeBudget";
    case StopReason::DepthExhausted: return "DepthExhausted";
    case StopReason::FrontierExhausted: return "FrontierExhausted";
  }
  return "unknown";
}

std::optional<StopReason> should_stop(const Progress& progress,
                                      const StopConditions& limits) {
  if (progress.pages_fetched >= limits.max_pages) return StopReason::PageBudget;
  if (progress.elapsed_seconds >= limits.max_duration_seconds)
    return StopReason::TimeBudget;
  if (!progress.frontier_min_depth) return StopReason::FrontierExhausted;
  if (*progress.frontier_min_depth > limits.max_depth)
    return StopReason::DepthExhausted;
  return std::nullopt;
}

}  // namespace epow::governor
