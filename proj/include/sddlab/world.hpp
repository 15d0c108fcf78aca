#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

namespace sddlab {

// Parameters of the feature world: K classes, d_v invariant and d_s spurious
// feature blocks living in R^d, isotropic noise sigma, spurious flip rate p.
struct GenerationConfig {
  int K = 2;
  int d = 0;
  int d_v = 0;
  int d_s = 0;
  double sigma = 0.0;
  double p = 0.0;
  std::uint64_t seed = 0;

  int total_features() const { return d_v + d_s; }
  // Throws ValidationError naming the violated constraint.
  void validate() const;
  // True when sigma * (d_v + d_s) stays within the small-noise threshold.
  bool small_noise() const;

  bool operator==(const GenerationConfig&) const = default;
};

inline constexpr double kSmallNoiseThreshold = 0.1;

// Per-class mean vectors. mu_v[i].col(k) is the mean of invariant feature i for
// class k; mu_s likewise for spurious features. All columns are orthonormal.
struct FeatureBank {
  int K = 0;
  int d = 0;
  std::vector<Eigen::MatrixXd> mu_v;
  std::vector<Eigen::MatrixXd> mu_s;

  int total_features() const { return static_cast<int>(mu_v.size() + mu_s.size()); }
  // Block b in canonical order: invariant features first, then spurious.
  const Eigen::MatrixXd& block(int b) const;
};

// Which feature blocks are invariant for a given task. Two tasks may share a
// bank and differ only in this designation.
struct Task {
  std::vector<bool> invariant;

  static Task canonical(const GenerationConfig& config);
  static Task from_roles(std::vector<bool> invariant_roles) { return Task{std::move(invariant_roles)}; }

  int total_features() const { return static_cast<int>(invariant.size()); }
  std::vector<int> invariant_blocks() const;
  std::vector<int> spurious_blocks() const;
};

struct Sample {
  int label = 0;
  Eigen::MatrixXd x;       // d x d_t, one column per feature block
  std::vector<int> q_s;    // class each spurious feature pointed to, in task order

  Eigen::VectorXd y(int K) const;
};

// f = (phi, w). phi is a per-block weight (binary for learned models, real
// after interpolation); the model predicts argmax_k w(k)^T (sum_b phi_b x_b).
struct LinearModel {
  Eigen::VectorXd phi;
  Eigen::MatrixXd w;

  int total_features() const { return static_cast<int>(phi.size()); }
  int classes() const { return static_cast<int>(w.cols()); }
  Eigen::VectorXd scores(const Eigen::MatrixXd& x) const;
  // Ties resolve to the lowest class index.
  int predict(const Eigen::MatrixXd& x) const;
};

// Learned feature indices, relative to a task: v_set indexes the task's
// invariant blocks, s_set its spurious blocks.
struct FeatureSets {
  std::vector<int> v_set;
  std::vector<int> s_set;

  int n_v() const { return static_cast<int>(v_set.size()); }
  int n_s() const { return static_cast<int>(s_set.size()); }
};

// (n_vo, n_so) between two learned sets.
std::pair<int, int> overlap(const FeatureSets& a, const FeatureSets& b);

FeatureBank build_feature_bank(const GenerationConfig& config);

std::vector<Sample> sample_dataset(const FeatureBank& bank, const GenerationConfig& config,
                                   std::size_t n);
std::vector<Sample> sample_dataset(const FeatureBank& bank, const GenerationConfig& config,
                                   std::size_t n, const Task& task);

LinearModel construct_oracle_model(const FeatureBank& bank, const FeatureSets& learned);
LinearModel construct_oracle_model(const FeatureBank& bank, const FeatureSets& learned,
                                   const Task& task);

}  // namespace sddlab
