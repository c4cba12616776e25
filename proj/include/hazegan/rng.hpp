#pragma once

#include <cstdint>
#include <string_view>
#include <vector>

namespace hazegan {

// Deterministic splitmix64 generator. Cheap to copy, trivial to serialize
// (the whole state is one u64), identical sequences on every platform.
class Rng {
 public:
  explicit Rng(uint64_t seed) : state_(seed) {}

  uint64_t next_u64() {
    uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  // Uniform double in [0, 1).
  double uniform() { return double(next_u64() >> 11) * (1.0 / 9007199254740992.0); }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Standard normal via Box-Muller.
  double normal();

  // Uniform integer in [0, n).
  int below(int n);

  template <class T>
  void shuffle(std::vector<T>& v) {
    for (int i = int(v.size()) - 1; i > 0; --i) {
      int j = below(i + 1);
      std::swap(v[i], v[size_t(j)]);
    }
  }

  uint64_t state() const { return state_; }

  // Stable stream derivation: hash (seed, tag, a, b) into a fresh seed so that
  // independent consumers (shuffles, alpha draws, scene synthesis) never share
  // a sequence and can be replayed from their coordinates alone.
  static Rng derive(uint64_t seed, std::string_view tag, uint64_t a = 0, uint64_t b = 0);

 private:
  uint64_t state_;
};

}  // namespace hazegan
