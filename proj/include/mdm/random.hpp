#ifndef MDM_RANDOM_HPP
#define MDM_RANDOM_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <span>
#include <vector>

#include "mdm/types.hpp"

namespace mdm {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Derives an independent stream key from a parent key and a list of
/// counters (iteration, phase, unit, ...).
inline std::uint64_t stream_key(std::uint64_t key) { return splitmix64(key); }

template <typename... Rest>
std::uint64_t stream_key(std::uint64_t key, std::uint64_t counter, Rest... rest) {
  return stream_key(splitmix64(key ^ splitmix64(counter + 0x632be59bd9b4e019ULL)), static_cast<std::uint64_t>(rest)...);
}

/// Small counter-seeded generator for per-unit streams. Cheap to construct,
/// so every (iteration, phase, unit) triple gets its own stream and results
/// do not depend on how units are spread over workers.
class StreamRng {
 public:
  using result_type = std::uint64_t;

  explicit StreamRng(std::uint64_t key) : state_(key) {}

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

  result_type operator()() {
    state_ += 0x9e3779b97f4a7c15ULL;
    std::uint64_t z = state_;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

 private:
  std::uint64_t state_;
};

template <typename Rng>
double uniform01(Rng& rng) {
  return std::uniform_real_distribution<double>(0.0, 1.0)(rng);
}

/// Gamma(shape, rate) variate.
template <typename Rng>
double sample_gamma(double shape, double rate, Rng& rng) {
  return std::gamma_distribution<double>(shape, 1.0 / rate)(rng);
}

template <typename Rng>
std::uint64_t sample_poisson(double mean, Rng& rng) {
  if (!(mean > 0.0)) return 0;
  return std::poisson_distribution<std::uint64_t>(mean)(rng);
}

/// Dirichlet draw by normalized gammas. Components may underflow to exactly
/// zero for very small concentrations; callers that need strict positivity
/// check for it.
template <typename Rng>
std::vector<double> sample_dirichlet(std::span<const double> alpha, Rng& rng) {
  std::vector<double> x(alpha.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < alpha.size(); ++i) {
    x[i] = std::gamma_distribution<double>(alpha[i], 1.0)(rng);
    sum += x[i];
  }
  if (!(sum > 0.0)) {
    // Every gamma underflowed; fall back to the largest concentration.
    std::size_t best = 0;
    for (std::size_t i = 1; i < alpha.size(); ++i)
      if (alpha[i] > alpha[best]) best = i;
    std::fill(x.begin(), x.end(), 0.0);
    x[best] = 1.0;
    return x;
  }
  for (double& xi : x) xi /= sum;
  return x;
}

/// Index drawn proportionally to nonnegative weights; returns weights.size()
/// when `none_weight` wins.
template <typename Rng>
std::size_t sample_discrete(std::span<const double> weights, Rng& rng, double none_weight = 0.0) {
  double total = none_weight;
  for (double w : weights) total += w;
  if (!(total > 0.0)) return weights.size();
  double r = uniform01(rng) * total;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    if (r < weights[i]) return i;
    r -= weights[i];
  }
  if (none_weight > 0.0) return weights.size();
  // Rounding fell off the end; return the last positive weight.
  for (std::size_t i = weights.size(); i-- > 0;)
    if (weights[i] > 0.0) return i;
  return weights.size();
}

inline double log_dirichlet_density(std::span<const double> x, std::span<const double> alpha) {
  double alpha_sum = 0.0, result = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    alpha_sum += alpha[i];
    result -= std::lgamma(alpha[i]);
    if (alpha[i] != 1.0) result += (alpha[i] - 1.0) * floored_log(x[i]);
  }
  return result + std::lgamma(alpha_sum);
}

inline double log_gamma_density(double x, double shape, double rate) {
  if (!(x > 0.0)) return -std::numeric_limits<double>::infinity();
  return shape * std::log(rate) - std::lgamma(shape) + (shape - 1.0) * std::log(x) - rate * x;
}

}  // namespace mdm

#endif  // MDM_RANDOM_HPP
