#include "sddlab/ensemble.hpp"

#include <algorithm>
#include <numeric>
#include <sstream>

#include "sddlab/accuracy.hpp"
#include "sddlab/error.hpp"
#include "sddlab/rng.hpp"

namespace sddlab {

LinearModel interpolate(const InterpolationSpec& spec) {
  const auto& a = spec.f_bar;
  const auto& b = spec.f_star;
  if (a.phi.size() != b.phi.size() || a.w.rows() != b.w.rows() || a.w.cols() != b.w.cols()) {
    std::ostringstream msg;
    msg << "cannot interpolate models of different shapes: (d_t=" << a.phi.size() << ", d="
        << a.w.rows() << ", K=" << a.w.cols() << ") vs (d_t=" << b.phi.size() << ", d="
        << b.w.rows() << ", K=" << b.w.cols() << ")";
    throw ValidationError(msg.str());
  }
  const double lambda = spec.lambda;
  if (!(lambda >= 0.0 && lambda <= 1.0)) throw ValidationError("lambda must lie in [0, 1]");
  if (lambda == 1.0) return a;
  if (lambda == 0.0) return b;
  LinearModel out;
  out.phi = lambda * a.phi + (1.0 - lambda) * b.phi;
  out.w = lambda * a.w + (1.0 - lambda) * b.w;
  return out;
}

double c_of_lambda(double lambda) {
  if (!(lambda > 0.0 && lambda < 1.0))
    throw ValidationError("C(lambda) is defined only for 0 < lambda < 1");
  return 1.0 / (lambda * (1.0 - lambda));
}

SweepResult lambda_sweep(const LinearModel& f_bar, const LinearModel& f_star,
                         const FeatureBank& bank, const GenerationConfig& config,
                         const std::vector<double>& lambdas, std::uint64_t n) {
  return lambda_sweep(f_bar, f_star, bank, config, lambdas, n, Task::canonical(config));
}

SweepResult lambda_sweep(const LinearModel& f_bar, const LinearModel& f_star,
                         const FeatureBank& bank, const GenerationConfig& config,
                         const std::vector<double>& lambdas, std::uint64_t n, const Task& task) {
  if (lambdas.empty()) throw ValidationError("lambda sweep needs at least one lambda");
  SweepResult result;
  for (double lambda : lambdas) {
    const LinearModel mixed = interpolate({f_bar, f_star, lambda});
    result.points.push_back({lambda, ood_accuracy_mc(mixed, bank, config, n, task)});
  }
  const auto best = std::max_element(
      result.points.begin(), result.points.end(),
      [](const SweepPoint& x, const SweepPoint& y) { return x.accuracy.value < y.accuracy.value; });
  result.best_lambda = best->lambda;
  return result;
}

PairWorld make_pair_world(const BoundInputs& in, double sigma, std::uint64_t seed) {
  in.validate();
  const int d_v = in.n_bar_v + in.n_star_v - in.n_star_vo;
  const int d_s = in.n_bar_s + in.n_star_s - in.n_star_so;
  std::vector<bool> roles(d_v + d_s, false);
  std::fill_n(roles.begin(), d_v, true);
  return make_pair_world(in, sigma, seed, Task::from_roles(std::move(roles)));
}

PairWorld make_pair_world(const BoundInputs& in, double sigma, std::uint64_t seed, Task task) {
  in.validate();
  PairWorld w;
  w.config.K = in.K;
  w.config.d_v = in.n_bar_v + in.n_star_v - in.n_star_vo;
  w.config.d_s = in.n_bar_s + in.n_star_s - in.n_star_so;
  w.config.d = (w.config.d_v + w.config.d_s) * in.K;
  w.config.sigma = sigma;
  w.config.p = in.p;
  w.config.seed = seed;
  if (static_cast<int>(task.invariant_blocks().size()) != w.config.d_v ||
      task.total_features() != w.config.total_features()) {
    throw ValidationError("task designation does not match the feature counts of the grid point");
  }
  w.task = std::move(task);
  w.bank = build_feature_bank(w.config);

  auto range = [](int from, int to) {
    std::vector<int> v(std::max(0, to - from));
    std::iota(v.begin(), v.end(), from);
    return v;
  };
  w.bar.v_set = range(0, in.n_bar_v);
  w.bar.s_set = range(0, in.n_bar_s);
  w.star.v_set = range(0, in.n_star_vo);
  for (int i : range(in.n_bar_v, in.n_bar_v + in.n_star_v - in.n_star_vo)) w.star.v_set.push_back(i);
  w.star.s_set = range(0, in.n_star_so);
  for (int j : range(in.n_bar_s, in.n_bar_s + in.n_star_s - in.n_star_so)) w.star.s_set.push_back(j);

  w.f_bar = construct_oracle_model(w.bank, w.bar, w.task);
  w.f_star = construct_oracle_model(w.bank, w.star, w.task);
  return w;
}

namespace {

GridPointResult evaluate_point(const BoundInputs& in, const TheoremOptions& opt, std::size_t index,
                               const PairWorld& world) {
  GridPointResult r;
  r.inputs = in;
  FpOptions fp_opt = opt.fp;
  fp_opt.seed = derive_seed(opt.seed, 3 * index + 2);
  r.bound = theorem1_upper_bound(in, fp_opt);
  r.lemma1 = lemma1_bound(in, fp_opt);

  const LinearModel tilde = interpolate({world.f_bar, world.f_star, opt.lambda});
  GenerationConfig cfg_tilde = world.config;
  cfg_tilde.seed = derive_seed(opt.seed, 3 * index);
  GenerationConfig cfg_bar = world.config;
  cfg_bar.seed = derive_seed(opt.seed, 3 * index + 1);
  // Grid points run in parallel; the per-point kernels stay serial.
  r.acc_tilde = ood_accuracy_mc_serial(tilde, world.bank, cfg_tilde, opt.samples, world.task);
  r.acc_bar = ood_accuracy_mc_serial(world.f_bar, world.bank, cfg_bar, opt.samples, world.task);

  r.diff = r.acc_tilde.value - r.acc_bar.value;
  r.se_diff = combined_se(r.acc_tilde.std_error, r.acc_bar.std_error);
  const double se_bound = combined_se(r.se_diff, r.bound.std_error);
  r.bound_violated = r.diff - r.bound.value > kSignificanceZ * se_bound;
  r.lemma1_violated = r.acc_tilde.value - r.lemma1.value >
                      kSignificanceZ * combined_se(r.acc_tilde.std_error, r.lemma1.std_error);
  r.significant_drop = r.diff < -kSignificanceZ * r.se_diff;
  return r;
}

void validate_options(const TheoremOptions& opt) {
  if (opt.samples == 0) throw ValidationError("theorem check needs a positive sample count");
  if (!(opt.lambda >= 0.0 && opt.lambda <= 1.0)) throw ValidationError("lambda must lie in [0, 1]");
  if (!(opt.sigma >= 0.0)) throw ValidationError("sigma must be >= 0");
}

}  // namespace

TheoremReport verify_theorem1(const std::vector<BoundInputs>& grid, const TheoremOptions& options) {
  validate_options(options);
  if (grid.empty()) throw ValidationError("theorem 1 grid is empty");
  for (const auto& in : grid) {
    in.validate();
    interpolated_argument(in);  // rejects degenerate points up front
  }
  TheoremReport report;
  report.theorem = "theorem1";
  report.options = options;
  report.points.resize(grid.size());
#pragma omp parallel for schedule(dynamic)
  for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(grid.size()); ++i) {
    const auto idx = static_cast<std::size_t>(i);
    const PairWorld world = make_pair_world(grid[idx], options.sigma, options.seed);
    report.points[idx] = evaluate_point(grid[idx], options, idx, world);
  }
  for (const auto& r : report.points) report.violations += r.bound_violated;
  return report;
}

std::vector<BoundInputs> Theorem2Space::enumerate(std::size_t* rejected) const {
  std::vector<BoundInputs> out;
  std::size_t dropped = 0;
  for (int bv : n_bar_v)
    for (int sv : n_star_v)
      for (int bs : n_bar_s)
        for (int ss : n_star_s)
          for (int vo : n_star_vo)
            for (int so : n_star_so)
              for (double p_val : p) {
                const BoundInputs in{bv, bs, sv, ss, vo, so, p_val, K};
                bool ok = bv > sv && bs < ss;
                if (ok) {
                  try {
                    in.validate();
                    interpolated_argument(in);
                  } catch (const ValidationError&) {
                    ok = false;
                  }
                }
                if (ok) {
                  out.push_back(in);
                } else {
                  ++dropped;
                }
              }
  if (rejected) *rejected = dropped;
  return out;
}

TheoremReport verify_theorem2(const Theorem2Space& space, const TheoremOptions& options) {
  validate_options(options);
  std::size_t rejected = 0;
  const auto points = space.enumerate(&rejected);
  if (points.empty()) throw ValidationError("theorem 2 search space has no admissible point");
  TheoremReport report;
  report.theorem = "theorem2";
  report.options = options;
  report.rejected = rejected;
  report.points.resize(points.size());
#pragma omp parallel for schedule(dynamic)
  for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(points.size()); ++i) {
    const auto idx = static_cast<std::size_t>(i);
    const BoundInputs& in = points[idx];
    // Task G: the same number of invariant blocks, placed by a seeded shuffle.
    const int d_v = in.n_bar_v + in.n_star_v - in.n_star_vo;
    const int d_s = in.n_bar_s + in.n_star_s - in.n_star_so;
    std::vector<bool> roles(d_v + d_s, false);
    std::fill_n(roles.begin(), d_v, true);
    Rng shuffle_rng = substream(derive_seed(options.seed, 0x7a5c), idx);
    std::shuffle(roles.begin(), roles.end(), shuffle_rng);
    const PairWorld world =
        make_pair_world(in, options.sigma, options.seed, Task::from_roles(std::move(roles)));
    report.points[idx] = evaluate_point(in, options, idx, world);
  }
  double best_z = 0.0;
  for (std::size_t i = 0; i < report.points.size(); ++i) {
    const auto& r = report.points[i];
    report.violations += r.bound_violated;
    if (!r.significant_drop) continue;
    const double z = -r.diff / r.se_diff;
    if (!report.witness || z > best_z) {
      report.witness = i;
      best_z = z;
    }
  }
  return report;
}

std::vector<BoundInputs> theorem1_acceptance_grid() {
  // Aligned original (many invariant, few spurious features) against a
  // near-optimal model carrying many spurious features.
  std::vector<BoundInputs> grid;
  for (int n_bar_v : {8, 16})
    for (int n_bar_s : {1, 2})
      for (int n_star_s : {24, 40})
        for (auto [p, n_so] : {std::pair{0.5, 0}, std::pair{0.5, 1}, std::pair{0.9, 0}})
          grid.push_back(BoundInputs{n_bar_v, n_bar_s, 2, n_star_s, 1, n_so, p, 2});
  return grid;
}

std::vector<BoundInputs> theorem1_overlap_grid() {
  // Shared spurious features at high flip rates: the normal approximation
  // behind F_p is loosest here.
  std::vector<BoundInputs> grid;
  for (int n_bar_v : {6, 10})
    for (int n_bar_s : {1, 2})
      for (double p : {0.7, 0.9}) grid.push_back(BoundInputs{n_bar_v, n_bar_s, 1, 12, 1, 1, p, 2});
  return grid;
}

Theorem2Space theorem2_paper_regime() {
  Theorem2Space s;
  s.n_bar_v = {6, 8};
  s.n_star_v = {2};
  s.n_bar_s = {1};
  s.n_star_s = {9, 16, 24};
  s.n_star_vo = {0};
  s.n_star_so = {0};
  s.p = {0.9};
  s.K = 2;
  return s;
}

}  // namespace sddlab
