#ifndef MDM_KERNEL_HPP
#define MDM_KERNEL_HPP

#include <cmath>
#include <limits>
#include <numbers>
#include <span>
#include <stdexcept>

#include "mdm/types.hpp"

namespace mdm {

/// Lognormal time-decay density of the triggered response. The delay between
/// a parent and a child event is lognormal(log_mean, log_sdev).
struct DelayKernel {
  double log_mean = 0.0;
  double log_sdev = 1.0;

  bool operator==(const DelayKernel&) const = default;
};

inline void validate(const DelayKernel& kernel) {
  if (!std::isfinite(kernel.log_mean) || !(kernel.log_sdev > 0.0) || !std::isfinite(kernel.log_sdev))
    throw std::invalid_argument("delay kernel needs finite log_mean and positive log_sdev");
}

inline double delay_density(double dt, const DelayKernel& kernel) {
  if (!(dt > 0.0)) return 0.0;
  if (std::isinf(dt)) return 0.0;
  const double z = (std::log(dt) - kernel.log_mean) / kernel.log_sdev;
  return std::exp(-0.5 * z * z) / (dt * kernel.log_sdev * std::sqrt(2.0 * std::numbers::pi));
}

namespace detail {

// Lower and upper tail of the lognormal, each computed without cancellation.
inline double delay_cdf(double t, const DelayKernel& kernel) {
  if (!(t > 0.0)) return 0.0;
  if (std::isinf(t)) return 1.0;
  const double z = (std::log(t) - kernel.log_mean) / kernel.log_sdev;
  return 0.5 * std::erfc(-z / std::numbers::sqrt2);
}

inline double delay_survival(double t, const DelayKernel& kernel) {
  if (!(t > 0.0)) return 1.0;
  if (std::isinf(t)) return 0.0;
  const double z = (std::log(t) - kernel.log_mean) / kernel.log_sdev;
  return 0.5 * std::erfc(z / std::numbers::sqrt2);
}

}  // namespace detail

/// Probability mass of the delay distribution on [a, b].
inline double delay_mass(double a, double b, const DelayKernel& kernel) {
  if (std::isnan(a) || std::isnan(b)) throw std::invalid_argument("delay_mass: NaN bound");
  if (a > b) throw std::invalid_argument("delay_mass: lower bound exceeds upper bound");
  const double median = std::exp(kernel.log_mean);
  double mass = 0.0;
  if (a >= median)
    mass = detail::delay_survival(a, kernel) - detail::delay_survival(b, kernel);
  else
    mass = detail::delay_cdf(b, kernel) - detail::delay_cdf(a, kernel);
  return mass < 0.0 ? 0.0 : (mass > 1.0 ? 1.0 : mass);
}

/// Maximum-likelihood lognormal fit to observed parent-child delays.
inline DelayKernel fit_delay_kernel(std::span<const double> delays) {
  if (delays.size() < 2) throw DataError("fit_delay_kernel: need at least two delays");
  double sum = 0.0;
  for (double d : delays) {
    if (!(d > 0.0) || !std::isfinite(d)) throw DataError("fit_delay_kernel: delays must be positive and finite");
    sum += std::log(d);
  }
  const double mean = sum / static_cast<double>(delays.size());
  double ss = 0.0;
  for (double d : delays) ss += (std::log(d) - mean) * (std::log(d) - mean);
  const double sdev = std::sqrt(ss / static_cast<double>(delays.size()));
  if (!(sdev > 0.0)) throw NumericalError("fit_delay_kernel: delays have zero log-variance");
  return {mean, sdev};
}

}  // namespace mdm

#endif  // MDM_KERNEL_HPP
