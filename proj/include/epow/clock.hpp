#pragma once

#include <condition_variable>
#include <memory>
#include <mutex>

namespace epow {

/// Time source injected into everything that schedules or timestamps.
/// Production code uses SystemClock; tests use SimClock so that politeness
/// gaps and revisit horizons elapse in simulated seconds, not wall time.
class Clock {
 public:
  virtual ~Clock() = default;

  /// Current time in epoch-seconds (simulated or real).
  virtual double now() const = 0;

  /// Returns once now() >= t.
  virtual void sleep_until(double t) = 0;

  /// Opaque token that pins simulated time while alive. The real clock
  /// returns an empty token. Held by in-flight fetches so that a request
  /// always arrives at the server at the instant it was dispatched.
  virtual std::shared_ptr<void> acquire_hold() { return nullptr; }

  void sleep_for(double dt) { sleep_until(now() + dt); }
};

class SystemClock final : public Clock {
 public:
  double now() const override;
  void sleep_until(double t) override;
};

/// Discrete simulated clock. sleep_until() jumps time forward, but only
/// when no hold tokens are outstanding; otherwise it waits for them.
class SimClock final : public Clock {
 public:
  explicit SimClock(double start = 0.0) : now_(start) {}

  double now() const override;
  void sleep_until(double t) override;
  std::shared_ptr<void> acquire_hold() override;

  /// Unconditional jump, test setup only. Requires no outstanding holds.
  void set(double t);

 private:
  void release_hold();

  mutable std::mutex mu_;
  std::condition_variable cv_;
  double now_;
  int holds_ = 0;
};

}  // namespace epow
