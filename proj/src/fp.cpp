#include "sddlab/fp.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "sddlab/error.hpp"
#include "sddlab/rng.hpp"

namespace sddlab {

void FpParams::validate() const {
  if (!(p >= 0.0 && p <= 1.0)) throw ValidationError("F_p: p must lie in [0, 1]");
  if (K < 2) throw ValidationError("F_p: K must be >= 2");
  if (!std::isfinite(x)) throw ValidationError("F_p: x must be finite");
}

Eigen::MatrixXd orthant_covariance(double p, int K) {
  const double diag = p * (K + 2 - p * K) / K;
  const double off = p * (K + 1 - p * K) / K;
  Eigen::MatrixXd m = Eigen::MatrixXd::Constant(K - 1, K - 1, off);
  m.diagonal().setConstant(diag);
  return m;
}

namespace {

// p = 0: eta is the point mass at x * 1.
double degenerate_limit(double x, int K) {
  if (x > 0.0) return 1.0;
  if (x < 0.0) return 0.0;
  return std::pow(0.5, K - 1);
}

Eigen::MatrixXd cholesky_factor(const FpParams& params) {
  const Eigen::MatrixXd m = orthant_covariance(params.p, params.K);
  Eigen::LLT<Eigen::MatrixXd> llt(m);
  if (llt.info() != Eigen::Success) {
    std::ostringstream msg;
    msg << "F_p covariance is not positive definite (p = " << params.p << ", K = " << params.K << ")";
    throw RuntimeFailure(msg.str());
  }
  return llt.matrixL();
}

std::uint64_t orthant_chunk(const Eigen::MatrixXd& L, double x, std::uint64_t seed,
                            std::size_t chunk, std::size_t count) {
  Rng rng = substream(seed, chunk);
  std::normal_distribution<double> gauss(0.0, 1.0);
  const int dim = static_cast<int>(L.rows());
  Eigen::VectorXd z(dim);
  std::uint64_t inside = 0;
  for (std::size_t i = 0; i < count; ++i) {
    for (int r = 0; r < dim; ++r) z(r) = gauss(rng);
    bool positive = true;
    // Row r of L z; L is lower triangular.
    for (int r = 0; r < dim && positive; ++r) {
      double eta = x;
      for (int c = 0; c <= r; ++c) eta += L(r, c) * z(c);
      positive = eta > 0.0;
    }
    inside += positive;
  }
  return inside;
}

}  // namespace

double fp_closed_form_k2(double p, double x) {
  FpParams{p, 2, x}.validate();
  if (p == 0.0) return degenerate_limit(x, 2);
  return normal_cdf(x / std::sqrt(p * (2.0 - p)));
}

Estimate fp_mc(const FpParams& params, std::uint64_t samples, std::uint64_t seed) {
  params.validate();
  if (params.p == 0.0) return Estimate{degenerate_limit(params.x, params.K), 0.0, samples};
  if (samples == 0) throw ValidationError("F_p Monte Carlo needs at least one sample");
  const Eigen::MatrixXd L = cholesky_factor(params);
  std::uint64_t inside = 0;
  const std::size_t chunks = chunk_count(samples);
#pragma omp parallel for schedule(dynamic) reduction(+ : inside)
  for (std::ptrdiff_t c = 0; c < static_cast<std::ptrdiff_t>(chunks); ++c) {
    const std::size_t begin = static_cast<std::size_t>(c) * kChunkSize;
    inside += orthant_chunk(L, params.x, seed, static_cast<std::size_t>(c),
                            std::min<std::size_t>(kChunkSize, samples - begin));
  }
  return proportion(inside, samples);
}

Estimate fp_mc_serial(const FpParams& params, std::uint64_t samples, std::uint64_t seed) {
  params.validate();
  if (params.p == 0.0) return Estimate{degenerate_limit(params.x, params.K), 0.0, samples};
  if (samples == 0) throw ValidationError("F_p Monte Carlo needs at least one sample");
  const Eigen::MatrixXd L = cholesky_factor(params);
  std::uint64_t inside = 0;
  for (std::size_t c = 0; c < chunk_count(samples); ++c) {
    const std::size_t begin = c * kChunkSize;
    inside += orthant_chunk(L, params.x, seed, c, std::min<std::size_t>(kChunkSize, samples - begin));
  }
  return proportion(inside, samples);
}

Estimate fp(const FpParams& params, const FpOptions& options) {
  params.validate();
  if (params.K == 2) return Estimate{fp_closed_form_k2(params.p, params.x), 0.0, 0};
  return fp_mc(params, options.samples, options.seed);
}

double single_model_argument(int n_v, int n_s, double p) {
  if (n_s <= 0) throw ValidationError("single-model argument needs n_s > 0");
  return (n_s * (1.0 - p) + n_v) / std::sqrt(static_cast<double>(n_s));
}

Estimate single_model_accuracy(int n_v, int n_s, double p, int K, const FpOptions& options) {
  if (n_v < 0 || n_s < 0) throw ValidationError("feature counts must be nonnegative");
  FpParams{p, K, 0.0}.validate();
  if (n_s == 0) return Estimate{n_v > 0 ? 1.0 : 1.0 / K, 0.0, 0};
  return fp(FpParams{p, K, single_model_argument(n_v, n_s, p)}, options);
}

void BoundInputs::validate() const {
  std::ostringstream why;
  if (n_bar_v < 0 || n_bar_s < 0 || n_star_v < 0 || n_star_s < 0 || n_star_vo < 0 || n_star_so < 0)
    why << "feature counts must be nonnegative; ";
  if (n_star_vo > std::min(n_bar_v, n_star_v))
    why << "n_star_vo exceeds min(n_bar_v, n_star_v); ";
  if (n_star_so > std::min(n_bar_s, n_star_s))
    why << "n_star_so exceeds min(n_bar_s, n_star_s); ";
  if (!(p >= 0.0 && p <= 1.0)) why << "p must lie in [0, 1]; ";
  if (K < 2) why << "K must be >= 2; ";
  const std::string msg = why.str();
  if (!msg.empty()) throw ValidationError("invalid bound inputs: " + msg.substr(0, msg.size() - 2));
}

double interpolated_argument(const BoundInputs& in) {
  in.validate();
  const double denom = in.n_bar_s + in.n_star_s + 14.0 * in.n_star_so;
  if (denom <= 0.0) {
    throw ValidationError(
        "degenerate configuration: n_bar_s = n_star_s = n_star_so = 0 gives a zero denominator");
  }
  const double num = (1.0 - in.p) * (in.n_bar_s + in.n_star_s + 2.0 * in.n_star_so) + in.n_bar_v +
                     in.n_star_v + 2.0 * in.n_star_vo;
  return num / std::sqrt(denom);
}

Estimate lemma1_bound(const BoundInputs& in, const FpOptions& options) {
  return fp(FpParams{in.p, in.K, interpolated_argument(in)}, options);
}

Estimate theorem1_upper_bound(const BoundInputs& in, const FpOptions& options) {
  const Estimate tilde = lemma1_bound(in, options);
  const Estimate bar = single_model_accuracy(in.n_bar_v, in.n_bar_s, in.p, in.K, options);
  return Estimate{tilde.value - bar.value, combined_se(tilde.std_error, bar.std_error),
                  std::max(tilde.samples, bar.samples)};
}

}  // namespace sddlab
