#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>
#include <string_view>

namespace stackopt {

using Engine = std::mt19937_64;

/// Deterministic source of labeled random streams.
///
/// A stream is identified by (seed, label, indices). The same triple always
/// yields the same engine state, independent of which thread asks for it or
/// in what order, so work split across OpenMP threads draws exactly what a
/// serial run would.
class RngPlan {
 public:
  explicit RngPlan(std::uint64_t seed) : seed_(seed) {}

  std::uint64_t seed() const noexcept { return seed_; }

  Engine stream(std::string_view label, std::initializer_list<std::uint64_t> idx = {}) const {
    return Engine(stream_seed(label, idx));
  }

  /// Child plan whose streams are disjoint from this plan's other labels.
  RngPlan child(std::string_view label, std::initializer_list<std::uint64_t> idx = {}) const {
    return RngPlan(stream_seed(label, idx));
  }

  std::uint64_t stream_seed(std::string_view label,
                            std::initializer_list<std::uint64_t> idx) const noexcept {
    std::uint64_t h = splitmix64(seed_ ^ 0x243f6a8885a308d3ULL);
    h = splitmix64(h ^ fnv1a(label));
    for (std::uint64_t i : idx) h = splitmix64(h ^ splitmix64(i + 0x9e3779b97f4a7c15ULL));
    return h;
  }

 private:
  static constexpr std::uint64_t splitmix64(std::uint64_t z) noexcept {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }
  static constexpr std::uint64_t fnv1a(std::string_view s) noexcept {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (char c : s) {
      h ^= static_cast<unsigned char>(c);
      h *= 0x100000001b3ULL;
    }
    return h;
  }

  std::uint64_t seed_;
};

}  // namespace stackopt
