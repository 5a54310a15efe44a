#include "dsnsched/time_window.hpp"

#include <algorithm>
#include <stdexcept>

namespace dsnsched {

WindowSet::WindowSet(std::vector<TimeWindow> windows)
    : windows_(std::move(windows)) {
  for (const auto& w : windows_) {
    if (w.start >= w.end) {
      throw std::invalid_argument("TimeWindow requires start < end");
    }
  }
  std::sort(windows_.begin(), windows_.end(),
            [](const TimeWindow& a, const TimeWindow& b) {
              return a.start < b.start || (a.start == b.start && a.end < b.end);
            });
  std::size_t out = 0;
  for (std::size_t i = 0; i < windows_.size(); ++i) {
    if (out > 0 && windows_[i].start <= windows_[out - 1].end) {
      windows_[out - 1].end = std::max(windows_[out - 1].end, windows_[i].end);
    } else {
      windows_[out++] = windows_[i];
    }
  }
  windows_.resize(out);
}

Seconds WindowSet::total_duration() const {
  Seconds total = 0;
  for (const auto& w : windows_) total += w.duration();
  return total;
}

bool WindowSet::contains(const TimeWindow& query) const {
  // Last member starting at or before query.start.
  auto it = std::upper_bound(
      windows_.begin(), windows_.end(), query.start,
      [](Seconds t, const TimeWindow& w) { return t < w.start; });
  if (it == windows_.begin()) return false;
  return std::prev(it)->contains(query);
}

bool WindowSet::contains(Seconds t) const {
  return contains(TimeWindow{t, t + 1});
}

void WindowSet::add(const TimeWindow& w) {
  if (w.start >= w.end) {
    throw std::invalid_argument("TimeWindow requires start < end");
  }
  auto it = std::lower_bound(
      windows_.begin(), windows_.end(), w,
      [](const TimeWindow& a, const TimeWindow& b) { return a.start < b.start; });
  it = windows_.insert(it, w);
  // Coalesce with the neighbor on the left, then absorb overlaps to the right.
  if (it != windows_.begin() && std::prev(it)->end >= it->start) {
    std::prev(it)->end = std::max(std::prev(it)->end, it->end);
    it = windows_.erase(it);
    --it;
  }
  auto next = std::next(it);
  while (next != windows_.end() && next->start <= it->end) {
    it->end = std::max(it->end, next->end);
    next = windows_.erase(next);
  }
}

WindowSet subtract(const WindowSet& base, const WindowSet& holes) {
  std::vector<TimeWindow> out;
  out.reserve(base.size() + holes.size());
  const auto& hs = holes.windows();
  std::size_t h = 0;
  for (const auto& b : base.windows()) {
    Seconds cursor = b.start;
    while (h < hs.size() && hs[h].end <= cursor) ++h;
    for (std::size_t i = h; i < hs.size() && hs[i].start < b.end; ++i) {
      if (hs[i].start > cursor) out.push_back({cursor, hs[i].start});
      cursor = std::max(cursor, hs[i].end);
      if (cursor >= b.end) break;
    }
    if (cursor < b.end) out.push_back({cursor, b.end});
  }
  return WindowSet(std::move(out));
}

WindowSet intersect(const WindowSet& a, const WindowSet& b) {
  std::vector<TimeWindow> out;
  const auto& wa = a.windows();
  const auto& wb = b.windows();
  std::size_t i = 0, j = 0;
  while (i < wa.size() && j < wb.size()) {
    Seconds lo = std::max(wa[i].start, wb[j].start);
    Seconds hi = std::min(wa[i].end, wb[j].end);
    if (lo < hi) out.push_back({lo, hi});
    if (wa[i].end < wb[j].end) {
      ++i;
    } else {
      ++j;
    }
  }
  return WindowSet(std::move(out));
}

WindowSet intersect_all(const std::vector<const WindowSet*>& sets) {
  if (sets.empty()) {
    throw std::invalid_argument("intersect_all requires at least one set");
  }
  WindowSet result = *sets.front();
  for (std::size_t i = 1; i < sets.size() && !result.empty(); ++i) {
    result = intersect(result, *sets[i]);
  }
  return result;
}

WindowSet intersect_all(const std::vector<WindowSet>& sets) {
  std::vector<const WindowSet*> ptrs;
  ptrs.reserve(sets.size());
  for (const auto& s : sets) ptrs.push_back(&s);
  return intersect_all(ptrs);
}

}  // namespace dsnsched
