#pragma once

#include <cmath>
#include <cstdint>

namespace sddlab {

// A Monte Carlo (or exact, with std_error == 0) estimate.
struct Estimate {
  double value = 0.0;
  double std_error = 0.0;
  std::uint64_t samples = 0;
};

// Proportion k/n with an Agresti-Coull adjusted standard error, which stays
// positive when k is 0 or n.
inline Estimate proportion(std::uint64_t successes, std::uint64_t trials) {
  Estimate e;
  e.samples = trials;
  if (trials == 0) return e;
  const double n = static_cast<double>(trials);
  e.value = static_cast<double>(successes) / n;
  const double adj = (static_cast<double>(successes) + 2.0) / (n + 4.0);
  e.std_error = std::sqrt(adj * (1.0 - adj) / (n + 4.0));
  return e;
}

inline double combined_se(double a, double b) { return std::hypot(a, b); }
inline double combined_se(double a, double b, double c) { return std::sqrt(a * a + b * b + c * c); }

inline double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

}  // namespace sddlab
