#include "pseg/random.hpp"

#include <cmath>
#include <numbers>

#include "pseg/errors.hpp"

namespace pseg {

namespace {

constexpr std::uint64_t kGolden = 0x9e3779b97f4a7c15ULL;

std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += kGolden);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace

std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) {
  std::uint64_t state = a ^ (b * kGolden);
  std::uint64_t x = splitmix64(state);
  return splitmix64(state) ^ x;
}

RandomStream::RandomStream(std::uint64_t seed) : seed_(seed), state_(seed) {
  // burn-in decorrelates nearby seeds
  state_ = mix_seed(seed, 0x5eedb0d1e5ULL);
}

RandomStream RandomStream::split(std::uint64_t key) const {
  return RandomStream(mix_seed(seed_, key));
}

std::uint64_t RandomStream::next_u64() { return splitmix64(state_); }

double RandomStream::uniform01() {
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double RandomStream::gaussian() {
  // u1 in (0, 1] so the log is finite
  double u1 = static_cast<double>((next_u64() >> 11) + 1) * 0x1.0p-53;
  double u2 = uniform01();
  return std::sqrt(-2.0 * std::log(u1)) *
         std::cos(2.0 * std::numbers::pi * u2);
}

double RandomStream::uniform_symmetric(double half_width) {
  return (2.0 * uniform01() - 1.0) * half_width;
}

std::size_t RandomStream::categorical(std::span<const double> weights) {
  require_contract(!weights.empty(), "categorical draw needs weights");
  double total = 0.0;
  for (double w : weights) {
    require_contract(w >= 0.0, "categorical weights must be nonnegative");
    total += w;
  }
  require_contract(total > 0.0, "categorical weights must not all be zero");
  double u = uniform01() * total;
  double acc = 0.0;
  for (std::size_t c = 0; c + 1 < weights.size(); ++c) {
    acc += weights[c];
    if (u < acc) return c;
  }
  return weights.size() - 1;
}

}  // namespace pseg
