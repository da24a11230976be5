#include "mpvaa/numkit/rng.hpp"

#include <cmath>
#include <numbers>
#include <string>
#include <string_view>

#include "mpvaa/errors.hpp"

namespace mpvaa::nk {

std::uint64_t mix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  return mix64(mix64(seed) ^ mix64(stream + 0x632BE59BD9B4E019ULL));
}

std::uint64_t hash_string(std::string_view s) {
  // FNV-1a
  std::uint64_t h = 0xCBF29CE484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001B3ULL;
  }
  return h;
}

double SeededRng::uniform01() {
  return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
}

double SeededRng::uniform(double lo, double hi) {
  if (!(lo < hi)) {
    throw ContractError("uniform: lower bound " + std::to_string(lo) +
                        " must be below upper bound " + std::to_string(hi));
  }
  const double v = lo + (hi - lo) * uniform01();
  return v < hi ? v : std::nextafter(hi, lo);
}

std::uint64_t SeededRng::below(std::uint64_t n) {
  if (n == 0) throw ContractError("below(0)");
  const std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % n);
  std::uint64_t x;
  do {
    x = engine_();
  } while (x >= limit);
  return x % n;
}

double SeededRng::normal() {
  // Box-Muller, one value per call.
  double u1;
  do {
    u1 = uniform01();
  } while (u1 <= 0.0);
  const double u2 = uniform01();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

int SeededRng::poisson(double mean) {
  if (mean < 0.0) throw ContractError("poisson: negative mean");
  if (mean == 0.0) return 0;
  // Knuth; means used here are small.
  const double limit = std::exp(-mean);
  int k = 0;
  double p = uniform01();
  while (p > limit) {
    ++k;
    p *= uniform01();
  }
  return k;
}

double seeded_uniform(SeededRng& rng, double lo, double hi) { return rng.uniform(lo, hi); }

}  // namespace mpvaa::nk
