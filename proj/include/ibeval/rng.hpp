#pragma once

#include <cstdint>
#include <string_view>
#include <utility>
#include <vector>

namespace ibeval {

// SplitMix64. Fixed algorithm so that seeded corpus transformations are
// byte-reproducible across platforms and standard-library versions
// (std::shuffle and std::uniform_int_distribution are not).
class SplitMix64 {
 public:
  explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next() {
    std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ull);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
  }

  // Uniform draw in [0, bound), bound > 0. Multiply-shift; the bias is
  // below 2^-64 per draw, which is irrelevant next to determinism here.
  std::uint64_t below(std::uint64_t bound) {
    return static_cast<std::uint64_t>(
        (static_cast<unsigned __int128>(next()) * bound) >> 64);
  }

 private:
  std::uint64_t state_;
};

// Fisher-Yates with the fixed generator above.
template <typename T>
void seeded_shuffle(std::vector<T>& items, SplitMix64& rng) {
  for (std::size_t i = items.size(); i > 1; --i) {
    std::swap(items[i - 1], items[rng.below(i)]);
  }
}

// FNV-1a, 64-bit. Used for request fingerprints and seed derivation.
constexpr std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

// Derives an independent sub-seed for a named operation, so that e.g. the
// miscellany draw for (sample, N) never shares a stream with the step-1
// split under the same run seed.
inline std::uint64_t derive_seed(std::uint64_t base, std::string_view tag) {
  std::uint64_t h = fnv1a64(tag);
  SplitMix64 mix(base ^ h);
  return mix.next();
}

// Chooses k of n indices uniformly without replacement; result is sorted
// ascending (callers preserve original element order).
std::vector<std::size_t> sample_indices(std::size_t n, std::size_t k,
                                        std::uint64_t seed);

}  // namespace ibeval
