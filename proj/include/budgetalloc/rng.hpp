#pragma once

#include <cmath>
#include <cstdint>
#include <string_view>
#include <vector>

namespace budgetalloc {

/// Deterministic splittable PRNG.
///
/// Every random quantity in the library is drawn from a stream derived from
/// a root seed, a purpose label, and an optional index, so that independent
/// components never share state and runs are reproducible regardless of
/// evaluation order or threading. Streams in use:
///
///   data:       "split", "shuffle" (index = epoch)
///   synthgen:   "ground_truth", "treatments", "outcomes", "features"
///               (index = row), "featured_map"
///   slearner:   "init" (index = layer counter), "budget", "fd", "nes",
///               "nes_cost" (index = global step), "ascent_v0"
///   metrics:    "random_scores"
///
/// The core generator is splitmix64; uniform doubles use the top 53 bits,
/// gaussians use the polar Box-Muller transform with a cached spare. All of
/// it is implemented here rather than with <random> distributions so that
/// sequences are identical across standard library implementations.
class RngStream {
 public:
  explicit RngStream(std::uint64_t seed) : state_(seed) {}

  static std::uint64_t mix(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  static std::uint64_t fnv1a(std::string_view s) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char ch : s) {
      h ^= ch;
      h *= 0x100000001b3ULL;
    }
    return h;
  }

  /// Derives an independent stream from (root, purpose, index).
  static RngStream derive(std::uint64_t root, std::string_view purpose,
                          std::uint64_t index = 0) {
    std::uint64_t s = mix(root ^ fnv1a(purpose));
    s = mix(s ^ (index * 0x9e3779b97f4a7c15ULL + 0x2545f4914f6cdd1dULL));
    return RngStream(s);
  }

  std::uint64_t next_u64() {
    state_ += 0x9e3779b97f4a7c15ULL;
    std::uint64_t z = state_;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  /// Uniform double in [0, 1) with 53 bits of precision.
  double uniform01() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

  /// Uniform integer in [0, n). Rejection sampling keeps it exactly uniform.
  std::uint64_t uniform_int(std::uint64_t n) {
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    std::uint64_t v = next_u64();
    while (v >= limit) v = next_u64();
    return v % n;
  }

  bool bernoulli(double p) { return uniform01() < p; }

  /// Standard normal via polar Box-Muller; generates pairs, caches the spare.
  double gaussian() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u, v, s;
    do {
      u = 2.0 * uniform01() - 1.0;
      v = 2.0 * uniform01() - 1.0;
      s = u * u + v * v;
    } while (s >= 1.0 || s == 0.0);
    const double scale = std::sqrt(-2.0 * std::log(s) / s);
    spare_ = v * scale;
    has_spare_ = true;
    return u * scale;
  }

  /// Fisher-Yates shuffle.
  template <typename T>
  void shuffle(std::vector<T>& items) {
    for (std::size_t i = items.size(); i > 1; --i) {
      const std::size_t j = static_cast<std::size_t>(uniform_int(i));
      std::swap(items[i - 1], items[j]);
    }
  }

  /// Sample k distinct indices from [0, n) (partial Fisher-Yates), in
  /// selection order.
  std::vector<std::size_t> sample_without_replacement(std::size_t n,
                                                      std::size_t k);

 private:
  std::uint64_t state_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

inline std::vector<std::size_t> RngStream::sample_without_replacement(
    std::size_t n, std::size_t k) {
  std::vector<std::size_t> pool(n);
  for (std::size_t i = 0; i < n; ++i) pool[i] = i;
  std::vector<std::size_t> out;
  out.reserve(k);
  for (std::size_t i = 0; i < k; ++i) {
    const std::size_t j = i + static_cast<std::size_t>(uniform_int(n - i));
    std::swap(pool[i], pool[j]);
    out.push_back(pool[i]);
  }
  return out;
}

}  // namespace budgetalloc
