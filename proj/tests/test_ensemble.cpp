#include <gtest/gtest.h>

#include <cmath>

#include "sddlab/accuracy.hpp"
#include "sddlab/ensemble.hpp"
#include "sddlab/error.hpp"
#include "sddlab/rng.hpp"

using namespace sddlab;

namespace {

LinearModel random_model(int dt, int d, int K, std::uint64_t seed) {
  Rng rng = substream(seed, 0);
  std::normal_distribution<double> g;
  LinearModel m;
  m.phi = Eigen::VectorXd::NullaryExpr(dt, [&] { return g(rng); });
  m.w = Eigen::MatrixXd::NullaryExpr(d, K, [&] { return g(rng); });
  return m;
}

}  // namespace

TEST(Interpolate, Endpoints) {
  const LinearModel a = random_model(4, 6, 3, 1);
  const LinearModel b = random_model(4, 6, 3, 2);
  const LinearModel at1 = interpolate({a, b, 1.0});
  const LinearModel at0 = interpolate({a, b, 0.0});
  EXPECT_EQ(at1.phi, a.phi);
  EXPECT_EQ(at1.w, a.w);
  EXPECT_EQ(at0.phi, b.phi);
  EXPECT_EQ(at0.w, b.w);
}

TEST(Interpolate, Linearity) {
  const LinearModel a = random_model(5, 8, 2, 3);
  const LinearModel b = random_model(5, 8, 2, 4);
  for (double lambda : {0.1, 0.5, 0.77}) {
    const LinearModel m = interpolate({a, b, lambda});
    EXPECT_LE((m.phi - (lambda * a.phi + (1 - lambda) * b.phi)).cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_LE((m.w - (lambda * a.w + (1 - lambda) * b.w)).cwiseAbs().maxCoeff(), 1e-12);
  }
  const LinearModel mid = interpolate({a, b, 0.5});
  EXPECT_NEAR(mid.w(3, 1), 0.5 * (a.w(3, 1) + b.w(3, 1)), 1e-15);
}

TEST(Interpolate, ShapeMismatchAndRange) {
  EXPECT_THROW(interpolate({random_model(4, 6, 2, 1), random_model(5, 6, 2, 1), 0.5}), ValidationError);
  EXPECT_THROW(interpolate({random_model(4, 6, 2, 1), random_model(4, 6, 3, 1), 0.5}), ValidationError);
  EXPECT_THROW(interpolate({random_model(4, 6, 2, 1), random_model(4, 6, 2, 1), 1.5}), ValidationError);
}

TEST(CLambda, Values) {
  EXPECT_DOUBLE_EQ(c_of_lambda(0.5), 4.0);
  EXPECT_NEAR(c_of_lambda(0.1), 11.111111111111111, 1e-12);
  for (double l : {0.05, 0.2, 0.33, 0.49}) {
    EXPECT_NEAR(c_of_lambda(l), c_of_lambda(1 - l), 1e-12);
    EXPECT_LT(c_of_lambda(0.5), c_of_lambda(l));
  }
  EXPECT_THROW(c_of_lambda(0.0), ValidationError);
  EXPECT_THROW(c_of_lambda(1.0), ValidationError);
}

TEST(PairWorld, FeatureLayout) {
  const BoundInputs in{3, 2, 2, 4, 1, 1, 0.5, 2};
  const PairWorld w = make_pair_world(in, 0.01, 5);
  EXPECT_EQ(w.config.d_v, 4);
  EXPECT_EQ(w.config.d_s, 5);
  EXPECT_EQ(w.config.d, 18);
  EXPECT_EQ(w.bar.n_v(), 3);
  EXPECT_EQ(w.bar.n_s(), 2);
  EXPECT_EQ(w.star.n_v(), 2);
  EXPECT_EQ(w.star.n_s(), 4);
  EXPECT_EQ(overlap(w.bar, w.star), std::make_pair(1, 1));
}

TEST(Sweep, EndpointsReproduceStandaloneModels) {
  const PairWorld w = make_pair_world({2, 3, 1, 2, 0, 0, 0.8, 2}, 0.01, 9);
  const std::vector<double> grid{0.0, 0.25, 0.5, 0.75, 1.0};
  const SweepResult r = lambda_sweep(w.f_bar, w.f_star, w.bank, w.config, grid, 20000);
  ASSERT_EQ(r.points.size(), 5u);
  EXPECT_EQ(r.points.front().accuracy.value, ood_accuracy_mc(w.f_star, w.bank, w.config, 20000).value);
  EXPECT_EQ(r.points.back().accuracy.value, ood_accuracy_mc(w.f_bar, w.bank, w.config, 20000).value);
  EXPECT_THROW(lambda_sweep(w.f_bar, w.f_star, w.bank, w.config, {}, 10), ValidationError);
}

TEST(Sweep, SymmetricConfigurationPeaksAtHalf) {
  const PairWorld w = make_pair_world({1, 4, 1, 4, 0, 0, 0.9, 2}, 0.001, 3);
  std::vector<double> grid;
  for (int i = 0; i <= 10; ++i) grid.push_back(i / 10.0);
  const SweepResult r = lambda_sweep(w.f_bar, w.f_star, w.bank, w.config, grid, 100000);
  EXPECT_NEAR(r.best_lambda, 0.5, 0.1 + 1e-12);
}

TEST(PairWorld, DisjointEqualSizedModelsMatch) {
  // f_bar and f* learn disjoint blocks of the same size, so they are equally accurate in law.
  const PairWorld w = make_pair_world({2, 2, 2, 2, 0, 0, 0.8, 2}, 0.01, 13);
  const Estimate a = ood_accuracy_mc(w.f_bar, w.bank, w.config, 100000);
  auto c2 = w.config;
  c2.seed = 99;
  const Estimate b = ood_accuracy_mc(w.f_star, w.bank, c2, 100000);
  EXPECT_NEAR(a.value - b.value, 0.0, 3 * std::hypot(a.std_error, b.std_error));
}

TEST(Theorem1, AlignedRegimeNegativeAndBounded) {
  TheoremOptions opt;
  opt.samples = 100000;
  opt.seed = 4;
  const TheoremReport r = verify_theorem1({{8, 1, 2, 40, 1, 0, 0.9, 2}, {8, 2, 2, 24, 1, 0, 0.9, 2}}, opt);
  ASSERT_EQ(r.points.size(), 2u);
  EXPECT_EQ(r.violations, 0);
  for (const auto& p : r.points) {
    EXPECT_TRUE(p.significant_drop);
    EXPECT_FALSE(p.bound_violated);
    EXPECT_FALSE(p.lemma1_violated);
    EXPECT_LT(p.bound.value, 0.0);
  }
}

TEST(Theorem1, ViolationFlagOnlyBeyondThreeSe) {
  TheoremOptions opt;
  opt.samples = 50000;
  const TheoremReport r = verify_theorem1(theorem1_overlap_grid(), opt);
  for (const auto& p : r.points) {
    const double se = std::hypot(p.se_diff, p.bound.std_error);
    EXPECT_EQ(p.bound_violated, p.diff - p.bound.value > 3 * se);
  }
}

TEST(Theorem1, DeterministicAndValidated) {
  TheoremOptions opt;
  opt.samples = 20000;
  opt.seed = 8;
  const std::vector<BoundInputs> grid{{4, 1, 2, 6, 1, 0, 0.7, 2}, {4, 2, 1, 3, 0, 1, 0.5, 2}};
  const TheoremReport a = verify_theorem1(grid, opt);
  const TheoremReport b = verify_theorem1(grid, opt);
  for (std::size_t i = 0; i < grid.size(); ++i) EXPECT_EQ(a.points[i].diff, b.points[i].diff);
  EXPECT_THROW(verify_theorem1({}, opt), ValidationError);
  EXPECT_THROW(verify_theorem1({{1, 0, 1, 0, 0, 0, 0.5, 2}}, opt), ValidationError);
  EXPECT_THROW(verify_theorem1({{1, 1, 1, 1, 3, 0, 0.5, 2}}, opt), ValidationError);
}

TEST(Theorem2, PresetFindsWitness) {
  TheoremOptions opt;
  opt.seed = 2024;
  const TheoremReport r = verify_theorem2(theorem2_paper_regime(), opt);
  ASSERT_TRUE(r.witness.has_value());
  const auto& w = r.points[*r.witness];
  EXPECT_GT(w.inputs.n_bar_v, w.inputs.n_star_v);
  EXPECT_LT(w.inputs.n_bar_s, w.inputs.n_star_s);
  EXPECT_LT(w.diff, -3 * w.se_diff);
  const TheoremReport again = verify_theorem2(theorem2_paper_regime(), opt);
  ASSERT_EQ(again.witness, r.witness);
  EXPECT_EQ(again.points[*again.witness].diff, w.diff);
}

TEST(Theorem2, NarrowGapResolvedAtLargeSample) {
  // n_bar_v = 8, n*_v = 2, n_bar_s = 1, n*_s = 9, p = 0.9: the closed forms put
  // acc(f~) below acc(f_bar) by ~2e-4, which needs ~1e6 draws to resolve.
  const BoundInputs in{8, 1, 2, 9, 0, 0, 0.9, 2};
  EXPECT_LT(lemma1_bound(in).value, single_model_accuracy(8, 1, 0.9, 2).value);
  Theorem2Space s;
  s.n_bar_v = {8};
  s.n_star_v = {2};
  s.n_bar_s = {1};
  s.n_star_s = {9};
  s.n_star_vo = {0};
  s.n_star_so = {0};
  s.p = {0.9};
  TheoremOptions opt;
  opt.samples = 2000000;
  opt.seed = 1;
  const TheoremReport r = verify_theorem2(s, opt);
  ASSERT_TRUE(r.witness.has_value());
  EXPECT_LT(r.points[0].diff, 0.0);
}

TEST(Theorem2, RejectsConstraintViolations) {
  Theorem2Space s;
  s.n_bar_v = {2, 6};
  s.n_star_v = {2};
  s.n_bar_s = {1, 5};
  s.n_star_s = {4};
  s.n_star_vo = {0, 3};
  s.n_star_so = {0};
  s.p = {0.9};
  std::size_t rejected = 0;
  const auto pts = s.enumerate(&rejected);
  // Only (6, 2, 1, 4, vo = 0) satisfies n_bar_v > n*_v, n_bar_s < n*_s and overlap limits.
  ASSERT_EQ(pts.size(), 1u);
  EXPECT_EQ(rejected, 7u);
  EXPECT_EQ(pts[0].n_bar_v, 6);

  Theorem2Space empty = s;
  empty.n_bar_v = {1};
  EXPECT_THROW(verify_theorem2(empty, {}), ValidationError);
}
