#include "sddlab/world.hpp"

#include <algorithm>
#include <sstream>

#include "sddlab/error.hpp"
#include "sddlab/log.hpp"
#include "sddlab/rng.hpp"

namespace sddlab {

void GenerationConfig::validate() const {
  std::ostringstream why;
  if (K < 2) why << "K must be >= 2 (got " << K << "); ";
  if (d_v < 0 || d_s < 0) why << "feature counts must be nonnegative; ";
  if (!(sigma >= 0.0)) why << "sigma must be >= 0 (got " << sigma << "); ";
  if (!(p >= 0.0 && p <= 1.0)) why << "p must lie in [0, 1] (got " << p << "); ";
  if (K >= 2 && d_v >= 0 && d_s >= 0 &&
      static_cast<long long>(d) < static_cast<long long>(d_v + d_s) * K) {
    why << "dimension too small: d = " << d << " < (d_v + d_s) * K = " << (d_v + d_s) * K << "; ";
  }
  const std::string msg = why.str();
  if (!msg.empty()) throw ValidationError("invalid generation config: " + msg.substr(0, msg.size() - 2));
}

bool GenerationConfig::small_noise() const { return sigma * (d_v + d_s) <= kSmallNoiseThreshold; }

const Eigen::MatrixXd& FeatureBank::block(int b) const {
  const int nv = static_cast<int>(mu_v.size());
  if (b < 0 || b >= total_features()) throw ValidationError("feature block index out of range");
  return b < nv ? mu_v[b] : mu_s[b - nv];
}

Task Task::canonical(const GenerationConfig& config) {
  Task t;
  t.invariant.assign(config.total_features(), false);
  std::fill_n(t.invariant.begin(), config.d_v, true);
  return t;
}

std::vector<int> Task::invariant_blocks() const {
  std::vector<int> out;
  for (int b = 0; b < total_features(); ++b)
    if (invariant[b]) out.push_back(b);
  return out;
}

std::vector<int> Task::spurious_blocks() const {
  std::vector<int> out;
  for (int b = 0; b < total_features(); ++b)
    if (!invariant[b]) out.push_back(b);
  return out;
}

Eigen::VectorXd Sample::y(int K) const {
  Eigen::VectorXd one_hot = Eigen::VectorXd::Zero(K);
  one_hot(label) = 1.0;
  return one_hot;
}

Eigen::VectorXd LinearModel::scores(const Eigen::MatrixXd& x) const {
  return w.transpose() * (x * phi);
}

int LinearModel::predict(const Eigen::MatrixXd& x) const {
  const Eigen::VectorXd s = scores(x);
  int best = 0;
  for (int k = 1; k < s.size(); ++k)
    if (s(k) > s(best)) best = k;
  return best;
}

std::pair<int, int> overlap(const FeatureSets& a, const FeatureSets& b) {
  auto count = [](std::vector<int> x, std::vector<int> y) {
    std::sort(x.begin(), x.end());
    std::sort(y.begin(), y.end());
    std::vector<int> both;
    std::set_intersection(x.begin(), x.end(), y.begin(), y.end(), std::back_inserter(both));
    return static_cast<int>(both.size());
  };
  return {count(a.v_set, b.v_set), count(a.s_set, b.s_set)};
}

FeatureBank build_feature_bank(const GenerationConfig& config) {
  config.validate();
  if (!config.small_noise()) {
    std::ostringstream msg;
    msg << "small-noise assumption may not hold: sigma * (d_v + d_s) = "
        << config.sigma * config.total_features() << " > " << kSmallNoiseThreshold;
    log::warn(msg.str());
  }
  FeatureBank bank;
  bank.K = config.K;
  bank.d = config.d;
  // Column k of block b is the standard basis vector e_{b*K + k}.
  auto make_block = [&](int b) {
    Eigen::MatrixXd m = Eigen::MatrixXd::Zero(config.d, config.K);
    for (int k = 0; k < config.K; ++k) m(b * config.K + k, k) = 1.0;
    return m;
  };
  for (int i = 0; i < config.d_v; ++i) bank.mu_v.push_back(make_block(i));
  for (int j = 0; j < config.d_s; ++j) bank.mu_s.push_back(make_block(config.d_v + j));
  return bank;
}

namespace {

void check_compatible(const FeatureBank& bank, const GenerationConfig& config, const Task& task) {
  config.validate();
  if (bank.K != config.K || bank.d != config.d ||
      static_cast<int>(bank.mu_v.size()) != config.d_v ||
      static_cast<int>(bank.mu_s.size()) != config.d_s) {
    throw ValidationError("feature bank was not built from this generation config");
  }
  if (task.total_features() != bank.total_features())
    throw ValidationError("task designation does not match the bank's feature count");
}

}  // namespace

std::vector<Sample> sample_dataset(const FeatureBank& bank, const GenerationConfig& config,
                                   std::size_t n) {
  return sample_dataset(bank, config, n, Task::canonical(config));
}

std::vector<Sample> sample_dataset(const FeatureBank& bank, const GenerationConfig& config,
                                   std::size_t n, const Task& task) {
  check_compatible(bank, config, task);
  const int K = config.K;
  const int dt = bank.total_features();
  std::vector<Sample> out(n);
  const std::size_t chunks = chunk_count(n);

#pragma omp parallel for schedule(dynamic)
  for (std::ptrdiff_t c = 0; c < static_cast<std::ptrdiff_t>(chunks); ++c) {
    Rng rng = substream(config.seed, static_cast<std::uint64_t>(c));
    std::uniform_int_distribution<int> pick_class(0, K - 1);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::normal_distribution<double> gauss(0.0, 1.0);
    const std::size_t begin = static_cast<std::size_t>(c) * kChunkSize;
    const std::size_t end = std::min(n, begin + kChunkSize);
    for (std::size_t i = begin; i < end; ++i) {
      Sample& s = out[i];
      s.label = pick_class(rng);
      s.x.resize(config.d, dt);
      for (int b = 0; b < dt; ++b) {
        int q = s.label;
        if (!task.invariant[b]) {
          if (unit(rng) < config.p) q = pick_class(rng);
          s.q_s.push_back(q);
        }
        s.x.col(b) = bank.block(b).col(q);
        if (config.sigma > 0.0) {
          for (int r = 0; r < config.d; ++r) s.x(r, b) += config.sigma * gauss(rng);
        }
      }
    }
  }
  return out;
}

LinearModel construct_oracle_model(const FeatureBank& bank, const FeatureSets& learned) {
  GenerationConfig shape;
  shape.K = bank.K;
  shape.d_v = static_cast<int>(bank.mu_v.size());
  shape.d_s = static_cast<int>(bank.mu_s.size());
  return construct_oracle_model(bank, learned, Task::canonical(shape));
}

LinearModel construct_oracle_model(const FeatureBank& bank, const FeatureSets& learned,
                                   const Task& task) {
  if (task.total_features() != bank.total_features())
    throw ValidationError("task designation does not match the bank's feature count");
  const auto inv = task.invariant_blocks();
  const auto spu = task.spurious_blocks();
  LinearModel m;
  m.phi = Eigen::VectorXd::Zero(bank.total_features());
  m.w = Eigen::MatrixXd::Zero(bank.d, bank.K);
  auto add = [&](const std::vector<int>& blocks, const std::vector<int>& picks, const char* kind) {
    for (int idx : picks) {
      if (idx < 0 || idx >= static_cast<int>(blocks.size())) {
        std::ostringstream msg;
        msg << kind << " feature index " << idx << " out of range [0, " << blocks.size() << ")";
        throw ValidationError(msg.str());
      }
      const int b = blocks[idx];
      if (m.phi(b) != 0.0) throw ValidationError(std::string("duplicate ") + kind + " feature index");
      m.phi(b) = 1.0;
      m.w += bank.block(b);
    }
  };
  add(inv, learned.v_set, "invariant");
  add(spu, learned.s_set, "spurious");
  return m;
}

}  // namespace sddlab
