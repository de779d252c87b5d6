#pragma once

#include <cstdint>
#include <vector>

namespace gbdtwm::rng {

// SplitMix64 finalizer. Used both as the generator step and for key derivation.
inline std::uint64_t hash64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

// Derives an independent stream key from a seed and a stream id, so that
// e.g. the feature subset of tree (m, k) replays identically later without
// tracking generator state.
inline std::uint64_t derive(std::uint64_t seed, std::uint64_t stream) {
  return hash64(seed + 0x9E3779B97F4A7C15ULL * (stream + 1));
}

inline std::uint64_t derive(std::uint64_t seed, std::uint64_t a, std::uint64_t b) {
  return derive(derive(seed, a), b);
}

// Small hand-rolled generator. std:: distributions are implementation
// defined, which would break cross-platform reproducibility of trained
// models, so every random draw in the library goes through this class.
class SplitMix64 {
 public:
  explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next() { return hash64(state_ += 0x9E3779B97F4A7C15ULL); }

  // Uniform in [0, 1) with 53 random bits.
  double next_double() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  // Uniform in [0, n). Multiply-shift map; bias is O(n / 2^64).
  std::size_t next_index(std::size_t n) {
    return static_cast<std::size_t>(
        (static_cast<unsigned __int128>(next()) * n) >> 64);
  }

 private:
  std::uint64_t state_;
};

// Fisher-Yates.
template <typename T>
void shuffle(std::vector<T>& v, SplitMix64& gen) {
  for (std::size_t i = v.size(); i > 1; --i) {
    std::size_t j = gen.next_index(i);
    std::swap(v[i - 1], v[j]);
  }
}

// k distinct values from [0, n), via partial Fisher-Yates. Draw order.
std::vector<int> sample_without_replacement(int n, int k, SplitMix64& gen);

}  // namespace gbdtwm::rng
