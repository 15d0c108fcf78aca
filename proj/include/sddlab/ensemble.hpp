#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "sddlab/fp.hpp"
#include "sddlab/stats.hpp"
#include "sddlab/world.hpp"

namespace sddlab {

struct InterpolationSpec {
  LinearModel f_bar;   // aligned original
  LinearModel f_star;  // near-optimal fine-tuning target
  double lambda = 0.5;
};

// f~ = lambda f_bar + (1 - lambda) f*, parameterwise. lambda = 1 and 0 return
// exact copies of f_bar and f*.
LinearModel interpolate(const InterpolationSpec& spec);

// 1 / (lambda (1 - lambda)) on the open interval (0, 1).
double c_of_lambda(double lambda);

struct SweepPoint {
  double lambda = 0.0;
  Estimate accuracy;
};

struct SweepResult {
  std::vector<SweepPoint> points;
  double best_lambda = 0.0;  // first lambda attaining the highest estimate
};

// Every lambda uses the same seed (common random numbers), so the curve
// compares models on identical draws.
SweepResult lambda_sweep(const LinearModel& f_bar, const LinearModel& f_star,
                         const FeatureBank& bank, const GenerationConfig& config,
                         const std::vector<double>& lambdas, std::uint64_t n);
SweepResult lambda_sweep(const LinearModel& f_bar, const LinearModel& f_star,
                         const FeatureBank& bank, const GenerationConfig& config,
                         const std::vector<double>& lambdas, std::uint64_t n, const Task& task);

// A world just large enough for the counts in `in`, with f_bar learning
// invariant [0, n_bar_v) and spurious [0, n_bar_s), and f* sharing the first
// n*_vo / n*_so of those plus fresh features for the rest.
struct PairWorld {
  GenerationConfig config;
  FeatureBank bank;
  Task task;
  FeatureSets bar;
  FeatureSets star;
  LinearModel f_bar;
  LinearModel f_star;
};

PairWorld make_pair_world(const BoundInputs& in, double sigma, std::uint64_t seed);
// Same, with the task's invariant/spurious designation given by `task`
// (must have the right number of each role).
PairWorld make_pair_world(const BoundInputs& in, double sigma, std::uint64_t seed, Task task);

struct TheoremOptions {
  std::uint64_t samples = 100'000;
  double sigma = 0.001;
  double lambda = 0.5;
  std::uint64_t seed = 0;
  FpOptions fp;
};

struct GridPointResult {
  BoundInputs inputs;
  Estimate bound;       // theorem-1 right-hand side
  Estimate lemma1;      // F_p bound on the interpolated model alone
  Estimate acc_tilde;   // MC accuracy of the interpolated model
  Estimate acc_bar;     // MC accuracy of the original model
  double diff = 0.0;    // acc_tilde - acc_bar
  double se_diff = 0.0;
  bool bound_violated = false;     // diff - bound > 3 combined SE
  bool lemma1_violated = false;    // acc_tilde - lemma1 > 3 combined SE
  bool significant_drop = false;   // diff < -3 se_diff
};

struct TheoremReport {
  std::string theorem;
  TheoremOptions options;
  std::vector<GridPointResult> points;
  int violations = 0;
  std::size_t rejected = 0;
  std::optional<std::size_t> witness;
};

inline constexpr double kSignificanceZ = 3.0;

TheoremReport verify_theorem1(const std::vector<BoundInputs>& grid, const TheoremOptions& options);

// Cartesian search space for the capability-degradation witness. Points not
// satisfying n_bar_v > n*_v and n_bar_s < n*_s (or with invalid overlaps) are
// rejected before evaluation.
struct Theorem2Space {
  std::vector<int> n_bar_v, n_star_v, n_bar_s, n_star_s, n_star_vo, n_star_so;
  std::vector<double> p;
  int K = 2;

  std::vector<BoundInputs> enumerate(std::size_t* rejected = nullptr) const;
};

// Evaluates each admissible point under a task-G designation (a seeded
// reshuffle of feature roles over a shared bank) and records the most
// significant point with acc(f~) < acc(f_bar) as the witness.
TheoremReport verify_theorem2(const Theorem2Space& space, const TheoremOptions& options);

// Presets used by the CLI and the acceptance suite.
std::vector<BoundInputs> theorem1_acceptance_grid();
std::vector<BoundInputs> theorem1_overlap_grid();
Theorem2Space theorem2_paper_regime();

}  // namespace sddlab
