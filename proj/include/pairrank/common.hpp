#pragma once

#include <cstdint>
#include <limits>
#include <random>
#include <sstream>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

namespace pairrank {

// ---------------------------------------------------------------------------
// Stable hashing. Cache keys and fingerprints are persisted, so they must not
// depend on std::hash (which varies across standard libraries).
// ---------------------------------------------------------------------------

inline std::uint64_t fnv1a64(std::string_view text) {
  std::uint64_t hash = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    hash ^= c;
    hash *= 0x100000001b3ULL;
  }
  return hash;
}

inline std::string hex64(std::uint64_t value) {
  static constexpr char kDigits[] = "0123456789abcdef";
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i) {
    out[static_cast<std::size_t>(i)] = kDigits[value & 0xf];
    value >>= 4;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Seeding. Derived seeds (per run, per instance, per pair) are produced by
// splitmix64 mixing so that changing any component decorrelates the stream.
// ---------------------------------------------------------------------------

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) {
  return splitmix64(splitmix64(a) ^ (b + 0x9e3779b97f4a7c15ULL));
}

inline std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b,
                              std::uint64_t c) {
  return mix_seed(mix_seed(a, b), c);
}

// ---------------------------------------------------------------------------
// Deterministic draws. std::shuffle and the std distributions are
// implementation-defined, so plans and synthetic noise use these primitives
// to stay byte-identical across platforms.
// ---------------------------------------------------------------------------

/// Unbiased integer in [0, n) via rejection sampling. n must be positive.
inline std::uint64_t draw_below(std::mt19937_64& rng, std::uint64_t n) {
  const std::uint64_t max = std::numeric_limits<std::uint64_t>::max();
  const std::uint64_t limit = max - max % n;
  std::uint64_t x = rng();
  while (x >= limit) x = rng();
  return x % n;
}

/// Uniform double in [0, 1) with 53 random bits.
inline double draw_unit(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

/// Fisher-Yates shuffle of the first `take` positions; the rest of the
/// vector is left partially permuted and should be ignored.
template <typename T>
void partial_shuffle(std::vector<T>& items, std::size_t take,
                     std::mt19937_64& rng) {
  const std::size_t n = items.size();
  if (take > n) take = n;
  for (std::size_t k = 0; k + 1 < n && k < take; ++k) {
    const std::size_t other = k + draw_below(rng, n - k);
    std::swap(items[k], items[other]);
  }
}

// ---------------------------------------------------------------------------
// Bounded parallel map over an index range. Results must be written into
// pre-sized slots so the merge order is deterministic regardless of thread
// interleaving. Exceptions from workers are rethrown on the caller.
// ---------------------------------------------------------------------------

template <typename Fn>
void parallel_for(std::size_t count, unsigned threads, Fn&& fn) {
  if (count == 0) return;
  if (threads <= 1 || count == 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  const unsigned workers =
      static_cast<unsigned>(std::min<std::size_t>(threads, count));
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> errors(workers);
  pool.reserve(workers);
  for (unsigned w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      try {
        for (std::size_t i = w; i < count; i += workers) fn(i);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  for (auto& err : errors) {
    if (err) std::rethrow_exception(err);
  }
}

}  // namespace pairrank
