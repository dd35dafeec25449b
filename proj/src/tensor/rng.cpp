#include "tsc/rng.hpp"

#include <cmath>
#include <stdexcept>

namespace tsc {

namespace {

constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ULL;

std::uint64_t mix(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

}  // namespace

std::pair<double, RngState> rng_next_uniform(RngState s) {
  s.state += kGolden;
  const std::uint64_t out = mix(s.state);
  return {double(out >> 11) * 0x1.0p-53, s};
}

std::uint64_t Rng::next_u64() {
  s_.state += kGolden;
  return mix(s_.state);
}

double Rng::uniform() {
  auto [v, next] = rng_next_uniform(s_);
  s_ = next;
  return v;
}

std::size_t Rng::below(std::size_t n) {
  if (n == 0) throw std::invalid_argument("Rng::below requires n >= 1");
  const auto k = std::size_t(uniform() * double(n));
  return k < n ? k : n - 1;
}

Rng Rng::fork(std::uint64_t stream) const {
  return Rng(mix(s_.state ^ mix(stream + kGolden)));
}

Tensor glorot_uniform(std::size_t fan_in, std::size_t fan_out, const Shape& shape, Rng& rng) {
  if (fan_in == 0 || fan_out == 0) {
    throw std::invalid_argument("glorot_uniform: fan_in and fan_out must be >= 1");
  }
  const double limit = std::sqrt(6.0 / double(fan_in + fan_out));
  Tensor out(shape);
  for (auto& v : out.values()) v = rng.uniform(-limit, limit);
  return out;
}

}  // namespace tsc
