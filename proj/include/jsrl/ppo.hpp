#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "jsrl/autodiff.hpp"
#include "jsrl/checkpoint.hpp"
#include "jsrl/env.hpp"
#include "jsrl/instances.hpp"
#include "jsrl/models.hpp"

namespace jsrl {

// Piecewise-constant exploration probability over training progress in [0, 1].
// Each breakpoint (from, epsilon) holds until the next one.
struct EpsilonSchedule {
  std::vector<std::pair<double, double>> breakpoints{
      {0.0, 0.20}, {0.40, 0.10}, {0.55, 0.05}, {0.70, 0.0}};

  double at(double progress) const;
  void validate() const;
  friend bool operator==(const EpsilonSchedule&, const EpsilonSchedule&) = default;
};

enum class KlDirection {
  kOldNew,  // KL(pi_old || pi_new), expectation under the sampling policy
  kNewOld,
};

struct TrainConfig {
  int episodes = 5000;
  int rollouts = 10;
  double beta0 = 15.0;
  double kl_target = 0.05;
  int actor_steps = 1;
  int critic_steps = 3;
  double actor_lr = 1e-4;
  double critic_lr = 1e-4;
  // Rewards are divided by this before returns and advantages are formed;
  // logged returns stay in time units.
  double reward_scale = 1.0;
  EpsilonSchedule epsilon;
  std::uint64_t seed = 0;
  KlDirection kl_direction = KlDirection::kOldNew;
  // Actor update is rolled back (and beta doubled) when the post-update mean
  // KL exceeds guard_factor * kl_target.
  double guard_factor = 50.0;
  bool phi_literal = false;
  int workers = 1;

  void validate() const;
};

struct RolloutStep {
  StateFeatures features;
  ActionMask mask;
  int action = 0;
  std::vector<double> old_log_probs;  // one per job, kMaskedLogProb when masked
  Time reward = 0;
  double reward_to_go = 0.0;
  double advantage = 0.0;
};

struct RolloutBatch {
  std::vector<RolloutStep> steps;
  Schedule schedule;
  Time makespan = 0;

  Time total_return() const;
};

// Runs one episode from reset. With probability epsilon an allowed job is
// drawn uniformly, otherwise from the actor's masked distribution. No graph is
// recorded.
RolloutBatch collect_rollout(const Instance& instance, const ActorNet& actor, double epsilon,
                             std::uint64_t seed, double time_unit);

// Suffix sums of reward / reward_scale.
void rewards_to_go(RolloutBatch& batch, double reward_scale = 1.0);

// A_t = r_t + V_{t+1} - V_t over one trajectory, with V past the end = 0.
std::vector<double> one_step_advantages(std::span<const double> rewards,
                                        std::span<const double> values);

// A_t = r_t / reward_scale + V(s_{t+1}) - V(s_t) with V(terminal) = 0,
// critic frozen.
void advantages(RolloutBatch& batch, const CriticNet& critic, double reward_scale = 1.0);

// All steps of a set of roll-outs laid out as one padded mini-batch.
struct SampleSet {
  StateBatch states;
  std::vector<int> actions;
  ad::Tensor old_log_probs;   // [S x max_jobs] constant
  ad::Tensor old_chosen;      // [S x 1] constant
  ad::Tensor old_probs;       // [S x max_jobs] constant
  ad::Tensor advantages;      // [S x 1] constant
  ad::Tensor returns;         // [S x 1] constant

  int size() const { return states.samples; }
};

SampleSet make_sample_set(std::span<const RolloutBatch> batches);

// Per-sample KL between the stored old policy and the given new log-probs.
ad::Tensor kl_terms(const SampleSet& samples, const ad::Tensor& log_probs,
                    KlDirection direction);

// mean over samples of [beta * KL_t - ratio_t * A_t].
ad::Tensor actor_loss(const SampleSet& samples, const ActorNet& actor, double beta,
                      KlDirection direction = KlDirection::kOldNew);
ad::Tensor actor_loss(std::span<const RolloutBatch> batches, const ActorNet& actor, double beta,
                      KlDirection direction = KlDirection::kOldNew);

double mean_kl(const SampleSet& samples, const ActorNet& actor,
               KlDirection direction = KlDirection::kOldNew);

inline constexpr double kMinBeta = 1e-10;

// 2*beta above 1.5*delta, beta/2 below delta/1.5 (floored at kMinBeta),
// otherwise unchanged.
double update_beta(double beta, double observed_kl, double delta);

// mean over samples of (V(s_t) - R_t)^2.
ad::Tensor critic_loss(const SampleSet& samples, const CriticNet& critic);
ad::Tensor critic_loss(std::span<const RolloutBatch> batches, const CriticNet& critic);

struct EpisodeLog {
  int episode = 0;
  std::string instance_id;
  std::vector<double> returns;  // one per roll-out
  double mean_return = 0.0;
  double best_return = 0.0;
  double phi = 1.0;
  double critic_loss = 0.0;  // before this episode's critic update
  double kl = 0.0;           // mean KL after the actor update
  double beta = 0.0;         // after the adaptation
  double epsilon = 0.0;
  bool guard_triggered = false;
};

using TrainLog = std::vector<EpisodeLog>;

// Recomputes phi for every entry against the whole history.
void refresh_phi(TrainLog& log, bool literal);

std::string training_log_csv(const TrainLog& log);

class Trainer {
 public:
  Trainer(std::vector<LabeledInstance> dataset, TrainConfig config, ModelConfig model);

  // Resumes from a checkpoint written by checkpoint(); `episodes` (when > 0)
  // replaces the stored target episode count.
  static Trainer resume(std::vector<LabeledInstance> dataset, const Checkpoint& checkpoint,
                        int episodes = 0, int workers = 0);

  bool finished() const { return episode_ >= config_.episodes; }
  int episode() const { return episode_; }
  double beta() const { return beta_; }
  const TrainConfig& config() const { return config_; }
  const ModelConfig& model_config() const { return model_; }
  const PolicyNetworks& networks() const { return nets_; }
  TrainLog log() const;

  // Runs one episode of the actor-critic loop and returns its log entry.
  // Throws NumericError on non-finite losses.
  const EpisodeLog& run_episode();

  // Runs to the target; calls on_checkpoint every `every` episodes (0 = never).
  void run(int every = 0, const std::function<void(const Trainer&)>& on_checkpoint = {});

  Checkpoint checkpoint() const;

 private:
  Trainer() = default;
  void init_optimizers();

  std::vector<LabeledInstance> dataset_;
  TrainConfig config_;
  ModelConfig model_;
  PolicyNetworks nets_;
  ad::AdamState actor_adam_;
  ad::AdamState critic_adam_;
  double beta_ = 15.0;
  int episode_ = 0;
  TrainLog log_;
};

struct TrainResult {
  PolicyNetworks nets;
  TrainLog log;
};

TrainResult train(std::vector<LabeledInstance> dataset, const TrainConfig& config,
                  const ModelConfig& model);

struct GreedyResult {
  Schedule schedule;
  Time makespan = 0;
};

// Deterministic argmax roll-out; ties go to the lowest job index.
GreedyResult greedy_solve(const Instance& instance, const ActorNet& actor, double time_unit);

nlohmann::json train_config_to_json(const TrainConfig& config);
TrainConfig train_config_from_json(const nlohmann::json& j);

}  // namespace jsrl
