#include <gtest/gtest.h>

#include "oracles.hpp"
#include "sddlab/accuracy.hpp"
#include "sddlab/error.hpp"
#include "sddlab/rng.hpp"
#include "sddlab/world.hpp"

using namespace sddlab;

namespace {

GenerationConfig config(int K, int d_v, int d_s, double sigma, double p, std::uint64_t seed = 1) {
  GenerationConfig c;
  c.K = K;
  c.d_v = d_v;
  c.d_s = d_s;
  c.d = (d_v + d_s) * K;
  c.sigma = sigma;
  c.p = p;
  c.seed = seed;
  return c;
}

FeatureSets first(int n_v, int n_s) {
  FeatureSets s;
  for (int i = 0; i < n_v; ++i) s.v_set.push_back(i);
  for (int j = 0; j < n_s; ++j) s.s_set.push_back(j);
  return s;
}

}  // namespace

TEST(OodAccuracy, NoiselessInvariantOnlyIsExactlyOne) {
  const auto c = config(3, 2, 2, 0.0, 0.0);
  const FeatureBank bank = build_feature_bank(c);
  const Estimate e = ood_accuracy_mc(construct_oracle_model(bank, first(2, 0)), bank, c, 50000);
  EXPECT_EQ(e.value, 1.0);
  EXPECT_EQ(e.samples, 50000u);
  EXPECT_GT(e.std_error, 0.0);
}

TEST(OodAccuracy, SingleSpuriousFeatureIsFlipRate) {
  // One spurious feature, K = 2, p = 0.9: correct iff it points to the label, 0.55.
  const auto c = config(2, 1, 1, 1e-4, 0.9, 4);
  const FeatureBank bank = build_feature_bank(c);
  const Estimate e = ood_accuracy_mc(construct_oracle_model(bank, first(0, 1)), bank, c, 200000);
  EXPECT_NEAR(e.value, 0.55, 3 * e.std_error);
}

TEST(OodAccuracy, EmptyModelIsTieBreakRate) {
  const auto c = config(4, 1, 1, 0.05, 0.5, 2);
  const FeatureBank bank = build_feature_bank(c);
  const Estimate e = ood_accuracy_mc(construct_oracle_model(bank, {}), bank, c, 100000);
  EXPECT_NEAR(e.value, 0.25, 3 * e.std_error);
}

TEST(OodAccuracy, MatchesExactEnumeration) {
  for (auto [nv, ns, p] : {std::tuple{1, 1, 0.9}, std::tuple{0, 3, 0.5}, std::tuple{4, 4, 0.9},
                           std::tuple{1, 3, 0.7}}) {
    const auto c = config(2, nv, ns, 1e-3, p, 10 + nv + ns);
    const FeatureBank bank = build_feature_bank(c);
    const Estimate e = ood_accuracy_mc(construct_oracle_model(bank, first(nv, ns)), bank, c, 200000);
    EXPECT_NEAR(e.value, oracle::exact_k2_accuracy(nv, ns, p), 3 * e.std_error)
        << nv << "," << ns << "," << p;
  }
}

TEST(OodAccuracy, ExactEnumerationOracleValues) {
  // Frozen from the enumeration oracle.
  EXPECT_DOUBLE_EQ(oracle::exact_k2_accuracy(1, 1, 0.9), 0.775);
  EXPECT_DOUBLE_EQ(oracle::exact_k2_accuracy(4, 4, 0.9), 0.979496875);
  EXPECT_DOUBLE_EQ(oracle::exact_k2_accuracy(0, 3, 0.5), 0.84375);
}

TEST(OodAccuracy, SerialAndParallelAreBitIdentical) {
  const auto c = config(3, 3, 4, 0.02, 0.8, 21);
  const FeatureBank bank = build_feature_bank(c);
  const LinearModel m = construct_oracle_model(bank, first(2, 3));
  const Task t = Task::canonical(c);
  for (int workers : {1, 2, 4}) {
    set_worker_limit(workers);
    const Estimate par = ood_accuracy_mc(m, bank, c, 100003, t);
    const Estimate ser = ood_accuracy_mc_serial(m, bank, c, 100003, t);
    EXPECT_EQ(par.value, ser.value);
    EXPECT_EQ(par.std_error, ser.std_error);
  }
  set_worker_limit(0);
}

TEST(OodAccuracy, KernelAgreesWithBruteForceReference) {
  // The kernel never builds x; the reference predicts on full samples.
  const auto c = config(3, 2, 3, 0.05, 0.7, 8);
  const FeatureBank bank = build_feature_bank(c);
  LinearModel m = construct_oracle_model(bank, first(1, 2));
  m.phi(0) = 0.5;  // real-valued mask after interpolation
  const Task t = Task::canonical(c);
  const Estimate fast = ood_accuracy_mc(m, bank, c, 40000, t);
  auto c2 = c;
  c2.seed = 1234;
  const Estimate slow = ood_accuracy_reference(m, bank, c2, 40000, t);
  EXPECT_NEAR(fast.value, slow.value, 3 * std::hypot(fast.std_error, slow.std_error));
}

TEST(OodAccuracy, DeterministicForSeed) {
  const auto c = config(2, 2, 2, 0.05, 0.9, 77);
  const FeatureBank bank = build_feature_bank(c);
  const LinearModel m = construct_oracle_model(bank, first(1, 2));
  EXPECT_EQ(ood_accuracy_mc(m, bank, c, 30000).value, ood_accuracy_mc(m, bank, c, 30000).value);
}

TEST(OodAccuracy, AddingInvariantFeatureNeverHurts) {
  const auto c = config(2, 4, 4, 0.01, 0.9, 5);
  const FeatureBank bank = build_feature_bank(c);
  double prev = 0.0, prev_se = 0.0;
  for (int nv = 0; nv <= 4; ++nv) {
    const Estimate e = ood_accuracy_mc(construct_oracle_model(bank, first(nv, 3)), bank, c, 50000);
    EXPECT_GE(e.value, prev - 3 * std::hypot(e.std_error, prev_se)) << "n_v=" << nv;
    prev = e.value;
    prev_se = e.std_error;
  }
}

TEST(OodAccuracy, Errors) {
  const auto c = config(2, 1, 1, 0.0, 0.5);
  const FeatureBank bank = build_feature_bank(c);
  const LinearModel m = construct_oracle_model(bank, first(1, 1));
  EXPECT_THROW(ood_accuracy_mc(m, bank, c, 0), ValidationError);
  LinearModel wrong = m;
  wrong.phi.resize(3);
  EXPECT_THROW(ood_accuracy_mc(wrong, bank, c, 10), ValidationError);
}
