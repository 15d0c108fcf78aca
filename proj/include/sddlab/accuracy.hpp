#pragma once

#include <cstdint>

#include "sddlab/stats.hpp"
#include "sddlab/world.hpp"

namespace sddlab {

// Monte Carlo estimate of P(argmax_k w(k)^T (x phi) == true class) under the
// generation process of `config` (flips active), using config.seed.
//
// The kernel never materialises x: each selected block contributes the
// precomputed score vector phi_b * w^T mu_b(q), and the Gaussian noise, which
// enters only through w^T (sum_b phi_b z_b), is drawn as a K-dimensional
// vector with covariance sigma^2 (sum_b phi_b^2) w^T w. Samples are cut into
// fixed chunks with per-chunk substreams and merged by integer counts, so the
// serial and OpenMP variants return bit-identical results.
Estimate ood_accuracy_mc(const LinearModel& model, const FeatureBank& bank,
                         const GenerationConfig& config, std::uint64_t n);
Estimate ood_accuracy_mc(const LinearModel& model, const FeatureBank& bank,
                         const GenerationConfig& config, std::uint64_t n, const Task& task);

Estimate ood_accuracy_mc_serial(const LinearModel& model, const FeatureBank& bank,
                                const GenerationConfig& config, std::uint64_t n,
                                const Task& task);

// Brute-force reference: draws full samples with sample_dataset and calls
// LinearModel::predict. Slow; kept for cross-checking the kernels.
Estimate ood_accuracy_reference(const LinearModel& model, const FeatureBank& bank,
                                const GenerationConfig& config, std::uint64_t n,
                                const Task& task);

}  // namespace sddlab
