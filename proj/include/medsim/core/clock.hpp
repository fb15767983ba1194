#pragma once

#include <atomic>
#include <chrono>

#include "medsim/core/time.hpp"

namespace medsim {

class Clock {
 public:
  virtual ~Clock() = default;
  virtual TimePoint now() const = 0;
};

class SystemClock : public Clock {
 public:
  TimePoint now() const override {
    return std::chrono::time_point_cast<Milliseconds>(std::chrono::system_clock::now());
  }
};

// Test clock; only moves when told to.
class ManualClock : public Clock {
 public:
  explicit ManualClock(TimePoint start = parse_rfc3339("2025-01-06T09:00:00Z"))
      : ms_(start.time_since_epoch().count()) {}
  TimePoint now() const override { return TimePoint(Milliseconds(ms_.load())); }
  void set(TimePoint t) { ms_ = t.time_since_epoch().count(); }
  void advance(Milliseconds d) { ms_ += d.count(); }

 private:
  std::atomic<long long> ms_;
};

}  // namespace medsim
