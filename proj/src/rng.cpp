#include "hazegan/rng.hpp"

#include <cmath>

namespace hazegan {

double Rng::normal() {
  // Box-Muller; draws two uniforms per sample and discards the pair's sine
  // branch so the state advance per call is fixed.
  double u1 = uniform();
  double u2 = uniform();
  if (u1 < 1e-300) u1 = 1e-300;
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
}

int Rng::below(int n) {
  if (n <= 1) return 0;
  // Rejection-free modulo is fine here: n is tiny relative to 2^64 so the
  // bias is far below anything observable.
  return int(next_u64() % uint64_t(n));
}

Rng Rng::derive(uint64_t seed, std::string_view tag, uint64_t a, uint64_t b) {
  uint64_t h = 0xcbf29ce484222325ULL;  // FNV-1a
  auto mix = [&h](uint64_t v) {
    for (int i = 0; i < 8; ++i) {
      h ^= (v >> (8 * i)) & 0xff;
      h *= 0x100000001b3ULL;
    }
  };
  mix(seed);
  for (char c : tag) {
    h ^= uint8_t(c);
    h *= 0x100000001b3ULL;
  }
  mix(a);
  mix(b);
  return Rng(h);
}

}  // namespace hazegan
