#pragma once

#include <cstdint>
#include <string_view>

namespace glora {

// Counter-based generator: every draw is a pure function of
// (seed, stream, counter). Sequences can therefore be partitioned across
// utterances or tensors without sharing mutable state, and the output is
// identical on every platform (integer arithmetic only; the gaussian uses
// a sum of twelve uniforms instead of transcendental functions).
class Prng {
 public:
  explicit Prng(uint64_t seed, uint64_t stream = 0)
      : seed_(seed), stream_(stream) {}

  uint64_t next_u64() { return mix3(seed_, stream_, counter_++); }

  // uniform in [0, 1)
  double next_double() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) {
    return lo + (hi - lo) * next_double();
  }

  // uniform integer in [0, n); n must be > 0
  uint64_t below(uint64_t n) { return next_u64() % n; }

  int range(int lo, int hi) {  // inclusive bounds
    return lo + static_cast<int>(below(static_cast<uint64_t>(hi - lo + 1)));
  }

  // approximately standard normal (Irwin-Hall with 12 uniforms)
  double normal() {
    double s = 0.0;
    for (int i = 0; i < 12; ++i) s += next_double();
    return s - 6.0;
  }

  static uint64_t mix64(uint64_t x) {
    x ^= x >> 30;
    x *= 0xbf58476d1ce4e5b9ULL;
    x ^= x >> 27;
    x *= 0x94d049bb133111ebULL;
    x ^= x >> 31;
    return x;
  }

  static uint64_t mix3(uint64_t a, uint64_t b, uint64_t c) {
    uint64_t x = mix64(a + 0x9e3779b97f4a7c15ULL);
    x = mix64(x ^ (b + 0x6a09e667f3bcc909ULL));
    return mix64(x ^ (c + 0xc2b2ae3d27d4eb4fULL));
  }

 private:
  uint64_t seed_;
  uint64_t stream_;
  uint64_t counter_ = 0;
};

// FNV-1a, used for parameter-name streams and config fingerprints.
inline uint64_t fnv1a(const void* data, size_t n, uint64_t h = 0xcbf29ce484222325ULL) {
  const unsigned char* p = static_cast<const unsigned char*>(data);
  for (size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline uint64_t fnv1a(std::string_view s) { return fnv1a(s.data(), s.size()); }

}  // namespace glora
