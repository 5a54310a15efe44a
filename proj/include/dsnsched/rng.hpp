#pragma once

#include <cstdint>
#include <random>
#include <sstream>
#include <string>

#include "dsnsched/errors.hpp"

namespace dsnsched {

// mt19937_64 with hand-rolled draw helpers. The engine is fully specified by
// the standard; std::uniform_*_distribution is not, so sequences here stay
// identical across standard libraries.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  // Uniform integer in [lo, hi], inclusive. Rejection sampling, unbiased.
  std::int64_t uniform_int(std::int64_t lo, std::int64_t hi) {
    auto range = static_cast<std::uint64_t>(hi - lo) + 1;
    if (range == 0) return static_cast<std::int64_t>(engine_());  // full span
    std::uint64_t limit = UINT64_MAX - UINT64_MAX % range;
    std::uint64_t value;
    do {
      value = engine_();
    } while (value >= limit);
    return lo + static_cast<std::int64_t>(value % range);
  }

  // Uniform double in [0, 1) with 53 bits.
  double uniform() {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Derive an independent seed for a sub-stream.
  std::uint64_t derive(std::uint64_t stream) {
    // splitmix64 over (state draw, stream tag)
    std::uint64_t z = engine_() + 0x9e3779b97f4a7c15ULL * (stream + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  static std::uint64_t mix(std::uint64_t seed, std::uint64_t stream) {
    std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  // Engine state as text; the standard fixes the format, so this round-trips
  // exactly via set_state.
  std::string state() const {
    std::ostringstream out;
    out << engine_;
    return out.str();
  }

  void set_state(const std::string& text) {
    std::istringstream in(text);
    in >> engine_;
    if (!in) throw ParseError("malformed RNG state");
  }

 private:
  std::mt19937_64 engine_;
};

}  // namespace dsnsched
