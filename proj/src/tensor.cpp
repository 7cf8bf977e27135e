#include "segner/tensor.hpp"

#include <algorithm>

namespace segner {

namespace {

std::uint64_t splitmix64(std::uint64_t& state) {
  state += 0x9e3779b97f4a7c15ULL;
  std::uint64_t z = state;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

constexpr std::uint64_t rotl(std::uint64_t x, int k) {
  return (x << k) | (x >> (64 - k));
}

}  // namespace

Rng::Rng(std::uint64_t seed) : seed_(seed) {
  std::uint64_t sm = seed;
  for (auto& word : s_) word = splitmix64(sm);
}

std::uint64_t Rng::next_u64() {
  const std::uint64_t result = rotl(s_[1] * 5, 7) * 9;
  const std::uint64_t t = s_[1] << 17;
  s_[2] ^= s_[0];
  s_[3] ^= s_[1];
  s_[1] ^= s_[2];
  s_[0] ^= s_[3];
  s_[2] ^= t;
  s_[3] = rotl(s_[3], 45);
  return result;
}

double Rng::uniform01() {
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double Rng::uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

std::uint64_t Rng::uniform_int(std::uint64_t n) {
  if (n == 0) throw std::invalid_argument("Rng::uniform_int: n must be positive");
  // Values below `threshold` would bias the residue.
  const std::uint64_t threshold = (0 - n) % n;
  while (true) {
    const std::uint64_t r = next_u64();
    if (r >= threshold) return r % n;
  }
}

Vec64 dropout_mask(Index n, double rate, Rng& rng) {
  if (!(rate >= 0.0 && rate < 1.0)) {
    throw std::invalid_argument("dropout_mask: rate must be in [0, 1), got " +
                                std::to_string(rate));
  }
  const double keep = 1.0 / (1.0 - rate);
  Vec64 mask(n);
  for (Index i = 0; i < n; ++i) mask(i) = rng.uniform01() < rate ? 0.0 : keep;
  return mask;
}

GradCheckResult grad_check_detailed(const ScalarFn& f, const Vec64& analytic,
                                    const Vec64& params, double eps) {
  if (!(eps > 0.0)) throw std::invalid_argument("grad_check: eps must be positive");
  if (analytic.size() != params.size()) {
    throw DimensionError("grad_check: analytic gradient has " +
                         std::to_string(analytic.size()) + " entries, params have " +
                         std::to_string(params.size()));
  }
  GradCheckResult result;
  Vec64 probe = params;
  for (Index i = 0; i < params.size(); ++i) {
    probe(i) = params(i) + eps;
    const double up = f(probe);
    probe(i) = params(i) - eps;
    const double down = f(probe);
    probe(i) = params(i);
    if (!std::isfinite(up) || !std::isfinite(down)) {
      throw std::runtime_error("grad_check: non-finite objective at coordinate " +
                               std::to_string(i));
    }
    const double numeric = (up - down) / (2.0 * eps);
    const double denom = std::max({1.0, std::abs(analytic(i)), std::abs(numeric)});
    const double err = std::abs(analytic(i) - numeric) / denom;
    if (result.worst_coordinate < 0 || err > result.max_rel_err) {
      result.max_rel_err = err;
      result.worst_coordinate = i;
    }
  }
  return result;
}

double grad_check(const ScalarFn& f, const Vec64& analytic, const Vec64& params,
                  double eps) {
  return grad_check_detailed(f, analytic, params, eps).max_rel_err;
}

}  // namespace segner
