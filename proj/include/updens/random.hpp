#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <utility>
#include <vector>

namespace updens {

inline std::uint64_t splitmix64(std::uint64_t x)
{
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

//! Seed of stream `k` below `base`. Used for repetitions, candidates and
//! pipeline stages so that results do not depend on scheduling.
inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t k)
{
  return splitmix64(splitmix64(base) ^ splitmix64(k + 0x632be59bd9b4e019ULL));
}

//! Seeded generator with portable uniform and standard-normal draws
//! (Box-Muller on 53-bit uniforms; no dependence on <random> distributions).
class Rng
{
public:
  explicit Rng(std::uint64_t seed) : seed_(seed), engine_(splitmix64(seed)) {}

  std::uint64_t seed() const noexcept { return seed_; }

  //! Independent child stream; depends only on the construction seed.
  Rng split(std::uint64_t k) const { return Rng(derive_seed(seed_, k)); }

  //! Uniform on (0, 1).
  double uniform()
  {
    return (static_cast<double>(engine_() >> 11) + 0.5) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  double normal()
  {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    const double u1 = uniform();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double phi = 2.0 * std::numbers::pi * u2;
    spare_ = r * std::sin(phi);
    has_spare_ = true;
    return r * std::cos(phi);
  }

  std::uint64_t next_u64() { return engine_(); }

  //! Uniform index in [0, n).
  std::size_t index(std::size_t n)
  {
    return static_cast<std::size_t>(uniform() * static_cast<double>(n)) % n;
  }

private:
  std::uint64_t seed_;
  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

//! Fisher-Yates shuffle with the portable generator.
template <typename T>
void shuffle(std::vector<T>& v, Rng& rng)
{
  for (std::size_t i = v.size(); i > 1; --i) {
    std::swap(v[i - 1], v[rng.index(i)]);
  }
}

} // namespace updens
