#include "nab/rng.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "nab/errors.hpp"

namespace nab {

std::uint64_t Rng::uniform_index(std::uint64_t n) {
  if (n == 0) throw ArgumentError("uniform_index: empty range");
  // Rejection sampling keeps the distribution exactly uniform.
  const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                              std::numeric_limits<std::uint64_t>::max() % n;
  std::uint64_t r;
  do {
    r = engine_();
  } while (r >= limit);
  return r % n;
}

double Rng::normal() {
  double u1 = uniform();
  while (u1 <= 0.0) u1 = uniform();
  const double u2 = uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

std::vector<std::uint64_t> select_by_hash(std::span<const std::uint64_t> keys, std::size_t count,
                                          std::uint64_t seed) {
  if (count > keys.size()) {
    throw ArgumentError("select_by_hash: requested " + std::to_string(count) + " of " +
                        std::to_string(keys.size()) + " keys");
  }
  std::vector<std::pair<std::uint64_t, std::uint64_t>> ranked;
  ranked.reserve(keys.size());
  for (auto k : keys) ranked.emplace_back(derive_seed(seed, k), k);
  std::partial_sort(ranked.begin(), ranked.begin() + static_cast<std::ptrdiff_t>(count), ranked.end());
  std::vector<std::uint64_t> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) out.push_back(ranked[i].second);
  std::sort(out.begin(), out.end());
  return out;
}

std::size_t round_count(double fraction, std::size_t n) {
  return static_cast<std::size_t>(std::llround(fraction * static_cast<double>(n)));
}

}  // namespace nab
