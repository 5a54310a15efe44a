#pragma once

#include <cstdint>
#include <vector>

namespace dsnsched {

// All scheduling time is integer seconds since the week epoch.
using Seconds = std::int64_t;

constexpr Seconds kSecondsPerHour = 3600;
constexpr Seconds kSecondsPerDay = 86400;
constexpr Seconds kSecondsPerWeek = 7 * kSecondsPerDay;

// Half-open interval [start, end). Windows (a,b) and (b,c) do not overlap,
// so back-to-back tracks on one antenna are legal.
struct TimeWindow {
  Seconds start = 0;
  Seconds end = 0;

  Seconds duration() const { return end - start; }
  bool contains(Seconds t) const { return t >= start && t < end; }
  bool contains(const TimeWindow& w) const {
    return w.start >= start && w.end <= end;
  }
  bool overlaps(const TimeWindow& w) const {
    return start < w.end && w.start < end;
  }

  friend bool operator==(const TimeWindow&, const TimeWindow&) = default;
};

// Ordered set of disjoint, non-adjacent windows. The canonical container for
// antenna availability; adjacent windows are coalesced on construction so
// `contains` is correct across former boundaries.
class WindowSet {
 public:
  WindowSet() = default;

  // Normalizes: sorts, coalesces overlapping/adjacent windows.
  // Throws std::invalid_argument if any window has start >= end.
  explicit WindowSet(std::vector<TimeWindow> windows);

  static WindowSet single(Seconds start, Seconds end) {
    return WindowSet({TimeWindow{start, end}});
  }

  const std::vector<TimeWindow>& windows() const { return windows_; }
  bool empty() const { return windows_.empty(); }
  std::size_t size() const { return windows_.size(); }

  Seconds total_duration() const;

  // True iff the query lies fully inside one member window.
  bool contains(const TimeWindow& query) const;
  bool contains(Seconds t) const;

  // Union-insert with coalescing; keeps invariants.
  void add(const TimeWindow& w);

  friend bool operator==(const WindowSet&, const WindowSet&) = default;

 private:
  std::vector<TimeWindow> windows_;
};

// Instants in `base` and not in `holes`.
WindowSet subtract(const WindowSet& base, const WindowSet& holes);

// Instants present in both operands.
WindowSet intersect(const WindowSet& a, const WindowSet& b);

// Instants present in every input set. Throws std::invalid_argument on an
// empty list (there is no universe set to return).
WindowSet intersect_all(const std::vector<WindowSet>& sets);
WindowSet intersect_all(const std::vector<const WindowSet*>& sets);

}  // namespace dsnsched
