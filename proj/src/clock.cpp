#include "epow/clock.hpp"

#include <chrono>
#include <thread>

namespace epow {

double SystemClock::now() const {
  auto d = std::chrono::system_clock::now().time_since_epoch();
  return std::chrono::duration<double>(d).count();
}

void SystemClock::sleep_until(double t) {
  for (;;) {
    double dt = t - now();
    if (dt <= 0) return;
    std::this_thread::sleep_for(std::chrono::duration<double>(dt));
  }
}

double SimClock::now() const {
  std::lock_guard lock(mu_);
  return now_;
}

void SimClock::sleep_until(double t) {
  std::unique_lock lock(mu_);
  while (now_ < t) {
    if (holds_ == 0) {
      now_ = t;
      cv_.notify_all();
      return;
    }
    cv_.wait(lock);
  }
}

std::shared_ptr<void> SimClock::acquire_hold() {
  {
    std::lock_guard lock(mu_);
    ++holds_;
  }
  return std::shared_ptr<void>(this, [](void* p) {
    static_cast<SimClock*>(p)->release_hold();
  });
}

void SimClock::release_hold() {
  std::lock_guard lock(mu_);
  --holds_;
  cv_.notify_all();
}

void SimClock::set(double t) {
  std::lock_guard lock(mu_);
  now_ = t;
  cv_.notify_all();
}

}  // namespace epow
