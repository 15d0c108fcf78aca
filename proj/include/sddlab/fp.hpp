#pragma once

#include <Eigen/Dense>

#include <cstdint>

#include "sddlab/stats.hpp"

namespace sddlab {

// F_p(x) = P(eta_1 > 0, ..., eta_{K-1} > 0) for eta ~ N(x * 1, M), where
// M_ii = p(K + 2 - pK)/K and M_ij = p(K + 1 - pK)/K. This is the normal limit
// of the per-class margins of a linear model over spurious features.
struct FpParams {
  double p = 0.0;
  int K = 2;
  double x = 0.0;

  void validate() const;
};

struct FpOptions {
  std::uint64_t samples = 1'000'000;
  std::uint64_t seed = 0;
};

Eigen::MatrixXd orthant_covariance(double p, int K);

// K = 2: Phi(x / sqrt(p(2 - p))). p = 0 uses the degenerate limit.
double fp_closed_form_k2(double p, double x);

// Orthant probability by Monte Carlo (Cholesky of M, per-chunk substreams).
// Valid for any K >= 2; p = 0 is answered exactly by the degenerate limit.
Estimate fp_mc(const FpParams& params, std::uint64_t samples, std::uint64_t seed);
Estimate fp_mc_serial(const FpParams& params, std::uint64_t samples, std::uint64_t seed);

// Closed form for K = 2, Monte Carlo otherwise.
Estimate fp(const FpParams& params, const FpOptions& options = {});

// (n_s (1 - p) + n_v) / sqrt(n_s); requires n_s > 0.
double single_model_argument(int n_v, int n_s, double p);

// F_p((n_s (1 - p) + n_v) / sqrt(n_s)); n_s = 0 gives 1 when n_v > 0 and 1/K otherwise.
Estimate single_model_accuracy(int n_v, int n_s, double p, int K, const FpOptions& options = {});

struct BoundInputs {
  int n_bar_v = 0;
  int n_bar_s = 0;
  int n_star_v = 0;
  int n_star_s = 0;
  int n_star_vo = 0;
  int n_star_so = 0;
  double p = 0.0;
  int K = 2;

  void validate() const;
  bool operator==(const BoundInputs&) const = default;
};

// Argument of the interpolated-model term:
// ((1-p)(n_bar_s + n*_s + 2 n*_so) + n_bar_v + n*_v + 2 n*_vo) / sqrt(n_bar_s + n*_s + 14 n*_so).
double interpolated_argument(const BoundInputs& in);

// Accuracy bound for the lambda = 1/2 interpolation: F_p(interpolated_argument).
Estimate lemma1_bound(const BoundInputs& in, const FpOptions& options = {});

// lemma1_bound - single_model_accuracy(n_bar_v, n_bar_s).
Estimate theorem1_upper_bound(const BoundInputs& in, const FpOptions& options = {});

}  // namespace sddlab
