#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace sddlab {

// pi(y|x) = softmax_y(logits(x, y) + response_bias(y)). The bias row is shared
// by every prompt; it is the channel through which training on one prompt moves
// probability mass on another prompt that uses the same responses.
struct TabularPolicy {
  std::vector<std::string> prompts;
  std::vector<std::string> responses;
  Eigen::MatrixXd logits;         // prompts x responses
  Eigen::VectorXd response_bias;  // responses

  static TabularPolicy uniform(std::vector<std::string> prompts, std::vector<std::string> responses);

  int num_prompts() const { return static_cast<int>(prompts.size()); }
  int num_responses() const { return static_cast<int>(responses.size()); }
  int prompt_index(const std::string& name) const;    // throws ValidationError
  int response_index(const std::string& name) const;  // throws ValidationError

  Eigen::VectorXd log_probs(int prompt) const;
  Eigen::VectorXd probs(int prompt) const;
  double prob(int prompt, int response) const;
  // Ties resolve to the lowest response index.
  int argmax(int prompt) const;

  void validate() const;
};

// exp(r_c) / (exp(r_c) + exp(r_o)), stable for large |r_c - r_o|.
double bt_prob(double r_c, double r_o);

// beta * log(policy(response|prompt) / reference(response|prompt)).
double implicit_reward(const TabularPolicy& policy, const TabularPolicy& reference, int prompt,
                       int response, double beta);

struct PreferencePair {
  std::string prompt;
  std::string chosen;  // y_c; y_o is the reference argmax for the prompt
};

// Benign task: prompt i is answered correctly when its argmax is correct[i].
struct BenignTask {
  std::vector<std::string> prompts;
  std::vector<std::string> correct;

  double accuracy(const TabularPolicy& policy) const;
};

struct MftConfig {
  std::vector<PreferencePair> dataset;
  TabularPolicy reference;
  double beta = 1.0;
  double learning_rate = 0.1;
  int steps = 500;
  std::uint64_t seed = 0;  // recorded; full-batch training itself draws nothing
  std::optional<BenignTask> benign;

  void validate() const;
};

// Mean over the dataset of log bt_prob(r(y_c), r(y_o)).
double mft_objective(const TabularPolicy& policy, const MftConfig& config);

struct MftGradient {
  Eigen::MatrixXd d_logits;
  Eigen::VectorXd d_bias;
};
MftGradient mft_gradient(const TabularPolicy& policy, const MftConfig& config);

struct TraceRecord {
  int step = 0;
  double pi_yo = 0.0;       // mean over dataset entries
  double pi_yc = 0.0;
  double objective = 0.0;   // mean log BT probability
  double preference = 0.0;  // mean BT probability
  double benign_acc = 0.0;  // NaN without a benign task
};

struct DynamicsTrace {
  std::vector<TraceRecord> records;  // steps + 1 entries
  TabularPolicy final_policy;
  int halvings = 0;       // line-search halvings over the run
  int skipped_steps = 0;  // steps where no halving restored ascent
};

inline constexpr int kMaxHalvings = 20;

// Full-batch gradient ascent starting from the reference. A step that lowers
// the objective is retried at half the rate up to kMaxHalvings times, then skipped.
DynamicsTrace mft_train(const MftConfig& config);

// Desk-scale shared-response world. Benign prompt i has its own correct
// response; harmful prompts each have a distinct harmful target y_c. The
// protected policy answers harmful prompt h with a benign response (coupled
// world) or with an unrelated pool response (control world); the unprotected
// policy answers with a single refusal response.
struct SddWorldOptions {
  int benign_prompts = 20;
  int harmful_prompts = 10;
  double margin_lo = 0.25;  // correct-response lead on benign prompts ~ U(lo, hi)
  double margin_hi = 1.25;
  double harmful_penalty = 4.0;
  double steer = 3.0;
  double noise = 0.1;
  bool coupled = true;
  std::uint64_t seed = 0;

  void validate() const;
};

struct SddWorld {
  TabularPolicy protected_policy;
  TabularPolicy unprotected_policy;
  BenignTask benign;
  std::vector<PreferencePair> attack;
};

SddWorld build_sdd_world(const SddWorldOptions& options);

struct SddRun {
  double acc_before = 0.0;
  double acc_after = 0.0;
  double drop() const { return acc_before - acc_after; }
};

struct SddComparison {
  SddRun protected_run;
  SddRun unprotected_run;
  // Fraction of attacked prompts whose protected argmax is a benign-task
  // answer, and whether unprotected argmaxes avoid benign-task answers.
  double protected_benign_fraction = 0.0;
  bool unprotected_disjoint = false;
};

// Runs the same attack (dataset and reference replaced per policy) against both.
SddComparison sdd_capability_experiment(const BenignTask& world, const TabularPolicy& protected_policy,
                                        const TabularPolicy& unprotected_policy,
                                        const MftConfig& attack);

struct SddSummary {
  std::vector<SddComparison> runs;  // one per seed
  double protected_drop = 0.0;      // means over seeds
  double unprotected_drop = 0.0;
};

// Builds the world for each seed and attacks it with the given schedule.
SddSummary sdd_over_seeds(SddWorldOptions options, const std::vector<std::uint64_t>& seeds,
                          double beta, double learning_rate, int steps);

}  // namespace sddlab
