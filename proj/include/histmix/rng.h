#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <string_view>

namespace histmix {

// Seed for the named stream `name` under `root` (FNV-1a of the name mixed
// into the root with splitmix64). Every random consumer draws from its own
// stream so components can be exercised in isolation.
std::uint64_t derive_seed(std::uint64_t root, std::string_view name);

/// Portable pseudo-random source. All draws are built from raw 64-bit engine
/// output, so sequences do not depend on the standard library's distributions.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0) : engine_(seed) {}
  Rng(std::uint64_t root, std::string_view stream) : engine_(derive_seed(root, stream)) {}

  std::uint64_t next_u64() { return engine_(); }
  // Uniform in [0, 1) with 53 random bits.
  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  // Uniform integer in [0, n); n > 0.
  std::size_t index(std::size_t n);

  std::string state() const;
  void set_state(const std::string& state);

  friend bool operator==(const Rng& a, const Rng& b) { return a.engine_ == b.engine_; }

 private:
  std::mt19937_64 engine_;
};

}  // namespace histmix
