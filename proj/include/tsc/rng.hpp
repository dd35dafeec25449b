#pragma once

#include <cstddef>
#include <cstdint>
#include <utility>

#include "tsc/tensor.hpp"

namespace tsc {

/// SplitMix64 state. Identical seeds give identical streams on every platform.
struct RngState {
  std::uint64_t state = 0;
  friend bool operator==(RngState, RngState) = default;
};

/// Advances the state once and maps the top 53 bits of the output to [0, 1).
std::pair<double, RngState> rng_next_uniform(RngState s);

/// Convenience wrapper that owns a RngState.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0) : s_{seed} {}
  explicit Rng(RngState s) : s_(s) {}

  std::uint64_t next_u64();
  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  /// Integer in [0, n).
  std::size_t below(std::size_t n);

  /// Independent substream keyed by `stream`; does not advance this generator.
  Rng fork(std::uint64_t stream) const;

  RngState state() const { return s_; }

 private:
  RngState s_;
};

/// Glorot/Xavier uniform: i.i.d. U[-l, l] with l = sqrt(6 / (fan_in + fan_out)),
/// drawn in row-major element order.
Tensor glorot_uniform(std::size_t fan_in, std::size_t fan_out, const Shape& shape, Rng& rng);

}  // namespace tsc
