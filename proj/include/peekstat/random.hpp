#pragma once

#include <cstdint>
#include <random>

namespace peekstat {

// SplitMix64 finalizer. Bijective on 64-bit words.
constexpr std::uint64_t mix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// Seed of path `index` under `master`. Depends only on the pair, so a path is
// reproduced exactly no matter how paths are spread over workers.
constexpr std::uint64_t path_seed(std::uint64_t master, std::uint64_t index) {
  return mix64(mix64(master + 0x9e3779b97f4a7c15ULL) ^
               (index * 0xd1b54a32d192ed03ULL + 0x632be59bd9b4e019ULL));
}

// Engine plus the two draws the simulations need.
class PathRng {
 public:
  explicit PathRng(std::uint64_t seed) : engine_(seed) {}

  double normal() { return normal_(engine_); }

  // Uniform on the open interval (0, 1).
  double uniform() {
    double u;
    do {
      u = uniform_(engine_);
    } while (u <= 0.0);
    return u;
  }

  bool coin() { return (engine_() >> 63) != 0; }

  std::mt19937_64& engine() { return engine_; }

 private:
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_{0.0, 1.0};
  std::uniform_real_distribution<double> uniform_{0.0, 1.0};
};

}  // namespace peekstat
