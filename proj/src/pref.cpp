#include "sddlab/pref.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <sstream>

#include "sddlab/error.hpp"
#include "sddlab/rng.hpp"

namespace sddlab {

namespace {

int find_name(const std::vector<std::string>& names, const std::string& name, const char* what) {
  const auto it = std::find(names.begin(), names.end(), name);
  if (it == names.end()) throw ValidationError(std::string("unknown ") + what + " '" + name + "'");
  return static_cast<int>(it - names.begin());
}

double log_sigmoid(double d) {
  // log(1 / (1 + e^-d)) without overflow on either side
  return d >= 0 ? -std::log1p(std::exp(-d)) : d - std::log1p(std::exp(d));
}

double sigmoid(double d) {
  if (d >= 0) return 1.0 / (1.0 + std::exp(-d));
  const double e = std::exp(d);
  return e / (1.0 + e);
}

struct Entry {
  int x;
  int yc;
  int yo;
};

std::vector<Entry> resolve(const MftConfig& config) {
  std::vector<Entry> out;
  out.reserve(config.dataset.size());
  for (const auto& pair : config.dataset) {
    const int x = config.reference.prompt_index(pair.prompt);
    const int yc = config.reference.response_index(pair.chosen);
    out.push_back({x, yc, config.reference.argmax(x)});
  }
  return out;
}

struct Eval {
  double objective = 0.0;
  double preference = 0.0;
  double pi_yo = 0.0;
  double pi_yc = 0.0;
};

Eval evaluate(const TabularPolicy& policy, const TabularPolicy& reference,
              const std::vector<Entry>& entries, double beta) {
  Eval e;
  for (const auto& en : entries) {
    const Eigen::VectorXd lp = policy.log_probs(en.x);
    const Eigen::VectorXd lr = reference.log_probs(en.x);
    const double d = beta * ((lp(en.yc) - lr(en.yc)) - (lp(en.yo) - lr(en.yo)));
    e.objective += log_sigmoid(d);
    e.preference += sigmoid(d);
    e.pi_yo += std::exp(lp(en.yo));
    e.pi_yc += std::exp(lp(en.yc));
  }
  const double n = static_cast<double>(entries.size());
  e.objective /= n;
  e.preference /= n;
  e.pi_yo /= n;
  e.pi_yc /= n;
  return e;
}

MftGradient gradient(const TabularPolicy& policy, const TabularPolicy& reference,
                     const std::vector<Entry>& entries, double beta) {
  MftGradient g;
  g.d_logits = Eigen::MatrixXd::Zero(policy.logits.rows(), policy.logits.cols());
  g.d_bias = Eigen::VectorXd::Zero(policy.response_bias.size());
  const double n = static_cast<double>(entries.size());
  for (const auto& en : entries) {
    if (en.yc == en.yo) continue;  // log pi(y) - log pi(y) has zero gradient
    const Eigen::VectorXd lp = policy.log_probs(en.x);
    const Eigen::VectorXd lr = reference.log_probs(en.x);
    const double d = beta * ((lp(en.yc) - lr(en.yc)) - (lp(en.yo) - lr(en.yo)));
    // d/dL of (log pi(y_c) - log pi(y_o)) is e_c - e_o: the normalisers cancel.
    const double coef = sigmoid(-d) * beta / n;
    g.d_logits(en.x, en.yc) += coef;
    g.d_logits(en.x, en.yo) -= coef;
    g.d_bias(en.yc) += coef;
    g.d_bias(en.yo) -= coef;
  }
  return g;
}

}  // namespace

TabularPolicy TabularPolicy::uniform(std::vector<std::string> prompts,
                                     std::vector<std::string> responses) {
  TabularPolicy p;
  p.prompts = std::move(prompts);
  p.responses = std::move(responses);
  p.logits = Eigen::MatrixXd::Zero(p.num_prompts(), p.num_responses());
  p.response_bias = Eigen::VectorXd::Zero(p.num_responses());
  p.validate();
  return p;
}

int TabularPolicy::prompt_index(const std::string& name) const {
  return find_name(prompts, name, "prompt");
}

int TabularPolicy::response_index(const std::string& name) const {
  return find_name(responses, name, "response");
}

Eigen::VectorXd TabularPolicy::log_probs(int prompt) const {
  Eigen::VectorXd l = logits.row(prompt).transpose() + response_bias;
  const double m = l.maxCoeff();
  const double lse = m + std::log((l.array() - m).exp().sum());
  return l.array() - lse;
}

Eigen::VectorXd TabularPolicy::probs(int prompt) const { return log_probs(prompt).array().exp(); }

double TabularPolicy::prob(int prompt, int response) const {
  return std::exp(log_probs(prompt)(response));
}

int TabularPolicy::argmax(int prompt) const {
  const Eigen::VectorXd l = logits.row(prompt).transpose() + response_bias;
  int best = 0;
  for (int r = 1; r < l.size(); ++r)
    if (l(r) > l(best)) best = r;
  return best;
}

void TabularPolicy::validate() const {
  if (prompts.empty()) throw ValidationError("policy needs at least one prompt");
  if (responses.empty()) throw ValidationError("policy needs at least one response");
  if (logits.rows() != num_prompts() || logits.cols() != num_responses())
    throw ValidationError("policy logits must be prompts x responses");
  if (response_bias.size() != num_responses())
    throw ValidationError("policy response bias must have one entry per response");
  if (!logits.allFinite() || !response_bias.allFinite())
    throw ValidationError("policy logits must be finite");
  auto unique = [](std::vector<std::string> v) {
    std::sort(v.begin(), v.end());
    return std::adjacent_find(v.begin(), v.end()) == v.end();
  };
  if (!unique(prompts)) throw ValidationError("duplicate prompt name in policy");
  if (!unique(responses)) throw ValidationError("duplicate response name in policy");
}

double bt_prob(double r_c, double r_o) {
  if (!std::isfinite(r_c) || !std::isfinite(r_o))
    throw ValidationError("Bradley-Terry rewards must be finite");
  return sigmoid(r_c - r_o);
}

double implicit_reward(const TabularPolicy& policy, const TabularPolicy& reference, int prompt,
                       int response, double beta) {
  return beta * (policy.log_probs(prompt)(response) - reference.log_probs(prompt)(response));
}

double BenignTask::accuracy(const TabularPolicy& policy) const {
  if (prompts.size() != correct.size())
    throw ValidationError("benign task needs one correct response per prompt");
  if (prompts.empty()) return std::numeric_limits<double>::quiet_NaN();
  int hits = 0;
  for (std::size_t i = 0; i < prompts.size(); ++i)
    hits += policy.argmax(policy.prompt_index(prompts[i])) == policy.response_index(correct[i]);
  return static_cast<double>(hits) / static_cast<double>(prompts.size());
}

void MftConfig::validate() const {
  reference.validate();
  if (dataset.empty()) throw ValidationError("attack dataset is empty");
  if (!(beta > 0.0) || !std::isfinite(beta)) throw ValidationError("beta must be > 0");
  if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate))
    throw ValidationError("learning_rate must be >= 0");
  if (steps < 0) throw ValidationError("steps must be >= 0");
  resolve(*this);
  if (benign) {
    if (benign->prompts.size() != benign->correct.size())
      throw ValidationError("benign task needs one correct response per prompt");
    for (std::size_t i = 0; i < benign->prompts.size(); ++i) {
      reference.prompt_index(benign->prompts[i]);
      reference.response_index(benign->correct[i]);
    }
  }
}

double mft_objective(const TabularPolicy& policy, const MftConfig& config) {
  return evaluate(policy, config.reference, resolve(config), config.beta).objective;
}

MftGradient mft_gradient(const TabularPolicy& policy, const MftConfig& config) {
  return gradient(policy, config.reference, resolve(config), config.beta);
}

DynamicsTrace mft_train(const MftConfig& config) {
  config.validate();
  const auto entries = resolve(config);
  const double nan = std::numeric_limits<double>::quiet_NaN();

  DynamicsTrace trace;
  TabularPolicy policy = config.reference;
  auto record = [&](int step, const Eval& e) {
    trace.records.push_back({step, e.pi_yo, e.pi_yc, e.objective, e.preference,
                             config.benign ? config.benign->accuracy(policy) : nan});
  };

  Eval current = evaluate(policy, config.reference, entries, config.beta);
  record(0, current);
  for (int step = 1; step <= config.steps; ++step) {
    const MftGradient g = gradient(policy, config.reference, entries, config.beta);
    if (!g.d_logits.allFinite() || !g.d_bias.allFinite()) {
      throw RuntimeFailure("non-finite gradient at step " + std::to_string(step));
    }
    double rate = config.learning_rate;
    bool accepted = false;
    for (int halving = 0; halving <= kMaxHalvings; ++halving) {
      TabularPolicy next = policy;
      next.logits += rate * g.d_logits;
      next.response_bias += rate * g.d_bias;
      const Eval e = evaluate(next, config.reference, entries, config.beta);
      if (e.objective >= current.objective) {
        policy = std::move(next);
        current = e;
        accepted = true;
        break;
      }
      ++trace.halvings;
      rate *= 0.5;
    }
    if (!accepted) ++trace.skipped_steps;
    record(step, current);
  }
  trace.final_policy = std::move(policy);
  return trace;
}

void SddWorldOptions::validate() const {
  if (benign_prompts < 1) throw ValidationError("benign_prompts must be >= 1");
  if (harmful_prompts < 1) throw ValidationError("harmful_prompts must be >= 1");
  if (!(margin_lo >= 0.0 && margin_hi >= margin_lo))
    throw ValidationError("benign margins must satisfy 0 <= margin_lo <= margin_hi");
  if (!(noise >= 0.0)) throw ValidationError("noise must be >= 0");
  if (!(harmful_penalty >= 0.0) || !(steer >= 0.0))
    throw ValidationError("harmful_penalty and steer must be >= 0");
}

SddWorld build_sdd_world(const SddWorldOptions& o) {
  o.validate();
  auto name = [](const char* stem, int i) { return std::string(stem) + "-" + std::to_string(i); };
  std::vector<std::string> prompts;
  std::vector<std::string> responses;
  for (int i = 0; i < o.benign_prompts; ++i) prompts.push_back(name("benign", i));
  for (int h = 0; h < o.harmful_prompts; ++h) prompts.push_back(name("harmful", h));
  for (int i = 0; i < o.benign_prompts; ++i) responses.push_back(name("answer", i));
  for (int h = 0; h < o.harmful_prompts; ++h) responses.push_back(name("compliance", h));
  responses.push_back("refusal");
  for (int h = 0; h < o.harmful_prompts; ++h) responses.push_back(name("unrelated", h));

  const int nb = o.benign_prompts;
  const int nh = o.harmful_prompts;
  const int refusal = nb + nh;

  Rng rng = substream(o.seed, 0);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_real_distribution<double> margin(o.margin_lo, o.margin_hi);
  std::uniform_int_distribution<int> pick(0, nb - 1);

  TabularPolicy base = TabularPolicy::uniform(prompts, responses);
  for (int x = 0; x < base.num_prompts(); ++x)
    for (int r = 0; r < base.num_responses(); ++r) base.logits(x, r) = o.noise * gauss(rng);
  for (int i = 0; i < nb; ++i) {
    base.logits(i, i) += margin(rng);
    for (int h = 0; h < nh; ++h) base.logits(i, nb + h) -= o.harmful_penalty;
  }
  std::vector<int> target(nh);
  for (int h = 0; h < nh; ++h) target[h] = o.coupled ? pick(rng) : refusal + 1 + h;

  SddWorld w;
  w.protected_policy = base;
  w.unprotected_policy = base;
  for (int h = 0; h < nh; ++h) {
    w.protected_policy.logits(nb + h, target[h]) += o.steer;
    w.unprotected_policy.logits(nb + h, refusal) += o.steer;
  }
  for (int i = 0; i < nb; ++i) {
    w.benign.prompts.push_back(prompts[i]);
    w.benign.correct.push_back(responses[i]);
  }
  for (int h = 0; h < nh; ++h) w.attack.push_back({prompts[nb + h], responses[nb + h]});
  return w;
}

SddComparison sdd_capability_experiment(const BenignTask& world, const TabularPolicy& protected_policy,
                                        const TabularPolicy& unprotected_policy,
                                        const MftConfig& attack) {
  auto run = [&](const TabularPolicy& policy) {
    MftConfig cfg = attack;
    cfg.reference = policy;
    cfg.benign = world;
    const DynamicsTrace trace = mft_train(cfg);
    return SddRun{trace.records.front().benign_acc, trace.records.back().benign_acc};
  };
  SddComparison out;
  out.protected_run = run(protected_policy);
  out.unprotected_run = run(unprotected_policy);

  std::vector<int> benign_answers;
  for (const auto& c : world.correct) benign_answers.push_back(protected_policy.response_index(c));
  auto is_benign = [&](int r) {
    return std::find(benign_answers.begin(), benign_answers.end(), r) != benign_answers.end();
  };
  int hits = 0;
  out.unprotected_disjoint = true;
  for (const auto& pair : attack.dataset) {
    hits += is_benign(protected_policy.argmax(protected_policy.prompt_index(pair.prompt)));
    if (is_benign(unprotected_policy.argmax(unprotected_policy.prompt_index(pair.prompt))))
      out.unprotected_disjoint = false;
  }
  out.protected_benign_fraction = static_cast<double>(hits) / static_cast<double>(attack.dataset.size());
  return out;
}

SddSummary sdd_over_seeds(SddWorldOptions options, const std::vector<std::uint64_t>& seeds,
                          double beta, double learning_rate, int steps) {
  if (seeds.empty()) throw ValidationError("need at least one seed");
  options.validate();
  if (!(beta > 0.0)) throw ValidationError("beta must be > 0");
  if (!(learning_rate >= 0.0)) throw ValidationError("learning_rate must be >= 0");
  if (steps < 0) throw ValidationError("steps must be >= 0");
  SddSummary s;
  s.runs.resize(seeds.size());
  // Seeds are independent runs; each run trains serially.
#pragma omp parallel for schedule(dynamic)
  for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(seeds.size()); ++i) {
    SddWorldOptions o = options;
    o.seed = seeds[static_cast<std::size_t>(i)];
    const SddWorld w = build_sdd_world(o);
    MftConfig attack;
    attack.dataset = w.attack;
    attack.reference = w.protected_policy;
    attack.beta = beta;
    attack.learning_rate = learning_rate;
    attack.steps = steps;
    attack.seed = o.seed;
    s.runs[static_cast<std::size_t>(i)] =
        sdd_capability_experiment(w.benign, w.protected_policy, w.unprotected_policy, attack);
  }
  for (const auto& r : s.runs) {
    s.protected_drop += r.protected_run.drop();
    s.unprotected_drop += r.unprotected_run.drop();
  }
  s.protected_drop /= static_cast<double>(s.runs.size());
  s.unprotected_drop /= static_cast<double>(s.runs.size());
  return s;
}

}  // namespace sddlab
