#pragma once

#include <array>
#include <cstdint>
#include <initializer_list>

namespace factorlab {

/// Mixes a base seed with a path of stream keys (e.g. setting, replication)
/// into an independent 64-bit seed. Streams keyed this way do not depend on
/// the order in which they are consumed.
std::uint64_t derive_seed(std::uint64_t base, std::initializer_list<std::uint64_t> keys);

/// xoshiro256** seeded through SplitMix64, with a portable polar-method
/// normal sampler so sample paths are identical across standard libraries.
class Rng {
 public:
  explicit Rng(std::uint64_t seed);
  Rng(std::uint64_t base, std::initializer_list<std::uint64_t> keys)
      : Rng(derive_seed(base, keys)) {}

  std::uint64_t next_u64();
  double uniform();                  // [0, 1)
  double uniform(double lo, double hi);
  double normal();                   // N(0, 1)
  double normal(double mean, double sd) { return mean + sd * normal(); }
  bool coin() { return (next_u64() >> 63) != 0; }

 private:
  std::array<std::uint64_t, 4> state_{};
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace factorlab
