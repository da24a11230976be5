#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <string_view>
#include <utility>

namespace mpvaa::nk {

// SplitMix64 finalizer; used to derive independent stream seeds.
std::uint64_t mix64(std::uint64_t x);
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream);
std::uint64_t hash_string(std::string_view s);

// Deterministic generator. The engine output sequence is fixed by the C++
// standard and every distribution below is implemented here, so streams do
// not depend on the standard library vendor.
class SeededRng {
 public:
  explicit SeededRng(std::uint64_t seed) : seed_(seed), engine_(mix64(seed)) {}

  std::uint64_t seed() const { return seed_; }
  std::uint64_t next_u64() { return engine_(); }
  // [0, 1) with 53 random bits.
  double uniform01();
  // [lo, hi); ContractError when lo >= hi.
  double uniform(double lo, double hi);
  // Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n);
  double normal();
  bool bernoulli(double p) { return uniform01() < p; }
  int poisson(double mean);

  template <typename T>
  void shuffle(std::span<T> items) {
    for (std::size_t i = items.size(); i > 1; --i) {
      std::swap(items[i - 1], items[below(i)]);
    }
  }

  SeededRng derive(std::uint64_t stream) const { return SeededRng(derive_seed(seed_, stream)); }

 private:
  std::uint64_t seed_;
  std::mt19937_64 engine_;
};

double seeded_uniform(SeededRng& rng, double lo, double hi);

}  // namespace mpvaa::nk
