#include "ibeval/rng.hpp"

#include <algorithm>
#include <numeric>

namespace ibeval {

std::vector<std::size_t> sample_indices(std::size_t n, std::size_t k,
                                        std::uint64_t seed) {
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  SplitMix64 rng(seed);
  seeded_shuffle(order, rng);
  order.resize(std::min(k, n));
  std::sort(order.begin(), order.end());
  return order;
}

}  // namespace ibeval
