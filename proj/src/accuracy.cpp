#include "sddlab/accuracy.hpp"

#include <algorithm>
#include <cmath>

#include "sddlab/error.hpp"
#include "sddlab/rng.hpp"

namespace sddlab {
namespace {

struct CompiledModel {
  int K = 0;
  double p = 0.0;
  std::vector<char> spurious;   // per selected block
  std::vector<double> means;    // [(sel * K + q) * K + k]
  Eigen::MatrixXd noise;        // K x K factor; zero rows when noiseless
  bool noisy = false;
};

CompiledModel compile(const LinearModel& model, const FeatureBank& bank,
                      const GenerationConfig& config, const Task& task) {
  config.validate();
  if (model.total_features() != bank.total_features() || model.w.rows() != bank.d ||
      model.classes() != bank.K) {
    throw ValidationError("model shape does not match the feature bank");
  }
  if (task.total_features() != bank.total_features())
    throw ValidationError("task designation does not match the bank's feature count");

  CompiledModel cm;
  cm.K = bank.K;
  cm.p = config.p;
  double phi_sq = 0.0;
  for (int b = 0; b < model.total_features(); ++b) {
    const double phi = model.phi(b);
    if (phi == 0.0) continue;
    phi_sq += phi * phi;
    cm.spurious.push_back(task.invariant[b] ? 0 : 1);
    const Eigen::MatrixXd proj = phi * (model.w.transpose() * bank.block(b));  // K x K: (k, q)
    for (int q = 0; q < cm.K; ++q)
      for (int k = 0; k < cm.K; ++k) cm.means.push_back(proj(k, q));
  }

  cm.noise = Eigen::MatrixXd::Zero(cm.K, cm.K);
  if (config.sigma > 0.0 && phi_sq > 0.0) {
    const Eigen::MatrixXd gram = model.w.transpose() * model.w;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(gram);
    const Eigen::VectorXd root = eig.eigenvalues().cwiseMax(0.0).cwiseSqrt();
    cm.noise = config.sigma * std::sqrt(phi_sq) * eig.eigenvectors() * root.asDiagonal();
    cm.noisy = cm.noise.cwiseAbs().maxCoeff() > 0.0;
  }
  return cm;
}

std::uint64_t count_chunk(const CompiledModel& cm, std::uint64_t seed, std::size_t chunk,
                          std::size_t count) {
  Rng rng = substream(seed, chunk);
  std::uniform_int_distribution<int> pick_class(0, cm.K - 1);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> gauss(0.0, 1.0);
  const std::size_t selected = cm.spurious.size();
  const int K = cm.K;
  Eigen::VectorXd score(K);
  Eigen::VectorXd z(K);
  std::uint64_t correct = 0;
  for (std::size_t i = 0; i < count; ++i) {
    const int label = pick_class(rng);
    score.setZero();
    for (std::size_t s = 0; s < selected; ++s) {
      int q = label;
      if (cm.spurious[s] && unit(rng) < cm.p) q = pick_class(rng);
      const double* m = &cm.means[(s * K + q) * K];
      for (int k = 0; k < K; ++k) score(k) += m[k];
    }
    if (cm.noisy) {
      for (int k = 0; k < K; ++k) z(k) = gauss(rng);
      score.noalias() += cm.noise * z;
    }
    int best = 0;
    for (int k = 1; k < K; ++k)
      if (score(k) > score(best)) best = k;
    correct += (best == label);
  }
  return correct;
}

void require_samples(std::uint64_t n) {
  if (n == 0) throw ValidationError("Monte Carlo sample count must be positive");
}

}  // namespace

Estimate ood_accuracy_mc(const LinearModel& model, const FeatureBank& bank,
                         const GenerationConfig& config, std::uint64_t n) {
  return ood_accuracy_mc(model, bank, config, n, Task::canonical(config));
}

Estimate ood_accuracy_mc(const LinearModel& model, const FeatureBank& bank,
                         const GenerationConfig& config, std::uint64_t n, const Task& task) {
  require_samples(n);
  const CompiledModel cm = compile(model, bank, config, task);
  const std::size_t chunks = chunk_count(n);
  std::uint64_t correct = 0;
#pragma omp parallel for schedule(dynamic) reduction(+ : correct)
  for (std::ptrdiff_t c = 0; c < static_cast<std::ptrdiff_t>(chunks); ++c) {
    const std::size_t begin = static_cast<std::size_t>(c) * kChunkSize;
    const std::size_t count = std::min<std::size_t>(kChunkSize, n - begin);
    correct += count_chunk(cm, config.seed, static_cast<std::size_t>(c), count);
  }
  return proportion(correct, n);
}

Estimate ood_accuracy_mc_serial(const LinearModel& model, const FeatureBank& bank,
                                const GenerationConfig& config, std::uint64_t n,
                                const Task& task) {
  require_samples(n);
  const CompiledModel cm = compile(model, bank, config, task);
  std::uint64_t correct = 0;
  for (std::size_t c = 0; c < chunk_count(n); ++c) {
    const std::size_t begin = c * kChunkSize;
    correct += count_chunk(cm, config.seed, c, std::min<std::size_t>(kChunkSize, n - begin));
  }
  return proportion(correct, n);
}

Estimate ood_accuracy_reference(const LinearModel& model, const FeatureBank& bank,
                                const GenerationConfig& config, std::uint64_t n,
                                const Task& task) {
  require_samples(n);
  compile(model, bank, config, task);  // shape checks only
  const auto data = sample_dataset(bank, config, n, task);
  std::uint64_t correct = 0;
  for (const auto& s : data) correct += (model.predict(s.x) == s.label);
  return proportion(correct, n);
}

}  // namespace sddlab
