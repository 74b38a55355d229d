#include "jsrl/ppo.hpp"

#include <algorithm>
#include <cmath>
#include <thread>

#include "jsrl/errors.hpp"
#include "jsrl/eval.hpp"
#include "jsrl/rng.hpp"

namespace jsrl {

using ad::Tensor;

double EpsilonSchedule::at(double progress) const {
  double eps = breakpoints.empty() ? 0.0 : breakpoints.front().second;
  for (const auto& [from, value] : breakpoints)
    if (progress >= from) eps = value;
  return eps;
}

void EpsilonSchedule::validate() const {
  if (breakpoints.empty()) throw ConfigError("epsilon schedule is empty");
  if (breakpoints.front().first != 0.0)
    throw ConfigError("epsilon schedule must start at progress 0");
  for (std::size_t i = 0; i < breakpoints.size(); ++i) {
    const auto [from, eps] = breakpoints[i];
    if (!(eps >= 0.0 && eps <= 1.0)) throw ConfigError("epsilon values must lie in [0, 1]");
    if (i > 0) {
      if (!(from > breakpoints[i - 1].first) || from > 1.0)
        throw ConfigError("epsilon breakpoints must increase within [0, 1]");
      if (eps > breakpoints[i - 1].second)
        throw ConfigError("epsilon schedule must be non-increasing");
    }
  }
}

void TrainConfig::validate() const {
  if (episodes < 1) throw ConfigError("episodes must be >= 1");
  if (rollouts < 1) throw ConfigError("rollouts must be >= 1");
  if (actor_steps < 1 || critic_steps < 1)
    throw ConfigError("optimizer step counts must be >= 1");
  if (!(beta0 > 0.0)) throw ConfigError("beta0 must be positive");
  if (!(kl_target > 0.0)) throw ConfigError("kl_target must be positive");
  if (!(actor_lr > 0.0) || !(critic_lr > 0.0))
    throw ConfigError("learning rates must be positive");
  if (!(reward_scale > 0.0)) throw ConfigError("reward_scale must be positive");
  if (!(guard_factor > 1.5)) throw ConfigError("guard_factor must exceed 1.5");
  if (workers < 1) throw ConfigError("workers must be >= 1");
  epsilon.validate();
}

Time RolloutBatch::total_return() const {
  Time total = 0;
  for (const auto& s : steps) total += s.reward;
  return total;
}

RolloutBatch collect_rollout(const Instance& instance, const ActorNet& actor, double epsilon,
                             std::uint64_t seed, double time_unit) {
  ad::NoGradGuard no_grad;
  Rng rng(seed);
  const double scale = default_feature_scale(instance, time_unit);
  SchedulingState state = reset(instance);
  RolloutBatch batch;
  batch.steps.reserve(instance.num_tasks());
  while (!state.done()) {
    RolloutStep step;
    step.features = encode(state, scale);
    step.mask = mask(state);
    const Tensor log_probs = actor_forward(actor, step.features, step.mask);
    step.old_log_probs.assign(log_probs.values().begin(), log_probs.values().end());

    const auto& allowed = step.mask.allowed;
    int action = -1;
    if (rng.bernoulli(epsilon)) {
      auto k = rng.below(step.mask.count());
      for (std::size_t j = 0; j < allowed.size(); ++j)
        if (allowed[j] && k-- == 0) {
          action = static_cast<int>(j);
          break;
        }
    } else {
      const double u = rng.uniform();
      double cumulative = 0.0;
      for (std::size_t j = 0; j < allowed.size(); ++j) {
        if (!allowed[j]) continue;
        action = static_cast<int>(j);
        cumulative += std::exp(step.old_log_probs[j]);
        if (u < cumulative) break;
      }
    }
    step.action = action;
    step.reward = state.apply(action);
    batch.steps.push_back(std::move(step));
  }
  batch.schedule = state.scheduled();
  batch.makespan = state.current_makespan();
  return batch;
}

void rewards_to_go(RolloutBatch& batch, double reward_scale) {
  double running = 0.0;
  for (auto it = batch.steps.rbegin(); it != batch.steps.rend(); ++it) {
    running += static_cast<double>(it->reward) / reward_scale;
    it->reward_to_go = running;
  }
}

std::vector<double> one_step_advantages(std::span<const double> rewards,
                                        std::span<const double> values) {
  if (rewards.size() != values.size())
    throw DimensionError("rewards and values differ in length");
  std::vector<double> out(rewards.size());
  for (std::size_t t = 0; t < rewards.size(); ++t) {
    const double next = t + 1 < values.size() ? values[t + 1] : 0.0;
    out[t] = rewards[t] + next - values[t];
  }
  return out;
}

void advantages(RolloutBatch& batch, const CriticNet& critic, double reward_scale) {
  if (batch.steps.empty()) return;
  ad::NoGradGuard no_grad;
  std::vector<StateFeatures> features;
  features.reserve(batch.steps.size());
  for (const auto& s : batch.steps) features.push_back(s.features);
  const Tensor values = critic_forward(critic, make_batch(features));
  std::vector<double> rewards;
  rewards.reserve(batch.steps.size());
  for (const auto& s : batch.steps) rewards.push_back(static_cast<double>(s.reward) / reward_scale);
  const auto adv = one_step_advantages(rewards, values.values());
  for (std::size_t t = 0; t < batch.steps.size(); ++t) batch.steps[t].advantage = adv[t];
}

SampleSet make_sample_set(std::span<const RolloutBatch> batches) {
  std::vector<StateFeatures> features;
  std::vector<ActionMask> masks;
  for (const auto& b : batches)
    for (const auto& s : b.steps) {
      features.push_back(s.features);
      masks.push_back(s.mask);
    }
  SampleSet out;
  out.states = make_batch(features, masks);
  const int S = out.states.samples;
  const int J = out.states.max_jobs;
  std::vector<double> old_lp(std::size_t(S) * J, ad::kMaskedLogProb);
  std::vector<double> old_p(std::size_t(S) * J, 0.0);
  std::vector<double> chosen(S), adv(S), ret(S);
  int i = 0;
  for (const auto& b : batches)
    for (const auto& s : b.steps) {
      for (std::size_t j = 0; j < s.old_log_probs.size(); ++j) {
        old_lp[i * J + j] = s.old_log_probs[j];
        old_p[i * J + j] = s.mask.allowed[j] ? std::exp(s.old_log_probs[j]) : 0.0;
      }
      out.actions.push_back(s.action);
      chosen[i] = s.old_log_probs[s.action];
      adv[i] = s.advantage;
      ret[i] = s.reward_to_go;
      ++i;
    }
  out.old_log_probs = Tensor::constant(S, J, std::move(old_lp));
  out.old_probs = Tensor::constant(S, J, std::move(old_p));
  out.old_chosen = Tensor::constant(S, 1, std::move(chosen));
  out.advantages = Tensor::constant(S, 1, std::move(adv));
  out.returns = Tensor::constant(S, 1, std::move(ret));
  return out;
}

Tensor kl_terms(const SampleSet& samples, const Tensor& log_probs, KlDirection direction) {
  if (direction == KlDirection::kOldNew)
    return ad::sum_cols(
        ad::mul(samples.old_probs, ad::sub(samples.old_log_probs, log_probs)));
  // exp of the masked sentinel is exactly zero, so masked entries drop out.
  return ad::sum_cols(ad::mul(ad::exp(log_probs), ad::sub(log_probs, samples.old_log_probs)));
}

Tensor actor_loss(const SampleSet& samples, const ActorNet& actor, double beta,
                  KlDirection direction) {
  const Tensor log_probs = actor_forward(actor, samples.states);
  const Tensor ratio =
      ad::exp(ad::sub(ad::pick(log_probs, samples.actions), samples.old_chosen));
  const Tensor surrogate = ad::mul(ratio, samples.advantages);
  const Tensor penalty = ad::scale(kl_terms(samples, log_probs, direction), beta);
  return ad::mean(ad::sub(penalty, surrogate));
}

Tensor actor_loss(std::span<const RolloutBatch> batches, const ActorNet& actor, double beta,
                  KlDirection direction) {
  return actor_loss(make_sample_set(batches), actor, beta, direction);
}

double mean_kl(const SampleSet& samples, const ActorNet& actor, KlDirection direction) {
  ad::NoGradGuard no_grad;
  return ad::mean(kl_terms(samples, actor_forward(actor, samples.states), direction)).item();
}

double update_beta(double beta, double observed_kl, double delta) {
  if (observed_kl > 1.5 * delta) return 2.0 * beta;
  if (observed_kl < delta / 1.5) return std::max(beta / 2.0, kMinBeta);
  return beta;
}

Tensor critic_loss(const SampleSet& samples, const CriticNet& critic) {
  return ad::mean(ad::square(ad::sub(critic_forward(critic, samples.states), samples.returns)));
}

Tensor critic_loss(std::span<const RolloutBatch> batches, const CriticNet& critic) {
  return critic_loss(make_sample_set(batches), critic);
}

void refresh_phi(TrainLog& log, bool literal) {
  std::vector<ReturnSample> history;
  history.reserve(log.size());
  for (const auto& e : log) history.push_back({e.instance_id, e.best_return});
  const auto values = phi(history, literal);
  for (std::size_t i = 0; i < log.size(); ++i) log[i].phi = values[i];
}

std::string training_log_csv(const TrainLog& log) {
  std::string out = "episode,instance_id,mean_return,best_return,phi,critic_loss,kl,beta,epsilon\n";
  for (const auto& e : log) {
    out += std::to_string(e.episode) + "," + e.instance_id + "," +
           format_number(e.mean_return) + "," + format_number(e.best_return) + "," +
           format_number(e.phi) + "," + format_number(e.critic_loss) + "," +
           format_number(e.kl) + "," + format_number(e.beta) + "," +
           format_number(e.epsilon) + "\n";
  }
  return out;
}

// ---- Trainer ---------------------------------------------------------------

namespace {

std::vector<std::vector<double>> snapshot(const std::vector<Tensor>& params) {
  std::vector<std::vector<double>> out;
  out.reserve(params.size());
  for (const auto& p : params) out.emplace_back(p.values().begin(), p.values().end());
  return out;
}

void restore(std::vector<Tensor>& params, const std::vector<std::vector<double>>& values) {
  for (std::size_t k = 0; k < params.size(); ++k)
    std::copy(values[k].begin(), values[k].end(), params[k].mutable_values().begin());
}

void require_finite(double value, const char* what, int episode) {
  if (!std::isfinite(value))
    throw NumericError(std::string(what) + " became non-finite at episode " +
                       std::to_string(episode));
}

nlohmann::json adam_to_json(const ad::AdamState& s) {
  return {{"learning_rate", s.options.learning_rate},
          {"beta1", s.options.beta1},
          {"beta2", s.options.beta2},
          {"epsilon", s.options.epsilon},
          {"step_count", s.step_count},
          {"first_moment", s.first_moment},
          {"second_moment", s.second_moment}};
}

ad::AdamState adam_from_json(const nlohmann::json& j) {
  ad::AdamState s;
  s.options.learning_rate = j.at("learning_rate").get<double>();
  s.options.beta1 = j.at("beta1").get<double>();
  s.options.beta2 = j.at("beta2").get<double>();
  s.options.epsilon = j.at("epsilon").get<double>();
  s.step_count = j.at("step_count").get<std::int64_t>();
  s.first_moment = j.at("first_moment").get<std::vector<std::vector<double>>>();
  s.second_moment = j.at("second_moment").get<std::vector<std::vector<double>>>();
  return s;
}

nlohmann::json log_to_json(const TrainLog& log) {
  nlohmann::json out = nlohmann::json::array();
  for (const auto& e : log)
    out.push_back({{"episode", e.episode},
                   {"instance_id", e.instance_id},
                   {"returns", e.returns},
                   {"critic_loss", e.critic_loss},
                   {"kl", e.kl},
                   {"beta", e.beta},
                   {"epsilon", e.epsilon},
                   {"guard", e.guard_triggered}});
  return out;
}

TrainLog log_from_json(const nlohmann::json& j) {
  TrainLog log;
  for (const auto& item : j) {
    EpisodeLog e;
    e.episode = item.at("episode").get<int>();
    e.instance_id = item.at("instance_id").get<std::string>();
    e.returns = item.at("returns").get<std::vector<double>>();
    e.critic_loss = item.at("critic_loss").get<double>();
    e.kl = item.at("kl").get<double>();
    e.beta = item.at("beta").get<double>();
    e.epsilon = item.at("epsilon").get<double>();
    e.guard_triggered = item.at("guard").get<bool>();
    double total = 0.0;
    e.best_return = e.returns.empty() ? 0.0 : e.returns.front();
    for (double r : e.returns) {
      total += r;
      e.best_return = std::max(e.best_return, r);
    }
    e.mean_return = e.returns.empty() ? 0.0 : total / static_cast<double>(e.returns.size());
    log.push_back(std::move(e));
  }
  return log;
}

}  // namespace

nlohmann::json train_config_to_json(const TrainConfig& c) {
  return {{"episodes", c.episodes},
          {"rollouts", c.rollouts},
          {"beta0", c.beta0},
          {"kl_target", c.kl_target},
          {"actor_steps", c.actor_steps},
          {"critic_steps", c.critic_steps},
          {"actor_lr", c.actor_lr},
          {"critic_lr", c.critic_lr},
          {"reward_scale", c.reward_scale},
          {"epsilon", c.epsilon.breakpoints},
          {"seed", c.seed},
          {"kl_direction", c.kl_direction == KlDirection::kOldNew ? "old_new" : "new_old"},
          {"guard_factor", c.guard_factor},
          {"phi_literal", c.phi_literal}};
}

TrainConfig train_config_from_json(const nlohmann::json& j) {
  TrainConfig c;
  c.episodes = j.at("episodes").get<int>();
  c.rollouts = j.at("rollouts").get<int>();
  c.beta0 = j.at("beta0").get<double>();
  c.kl_target = j.at("kl_target").get<double>();
  c.actor_steps = j.at("actor_steps").get<int>();
  c.critic_steps = j.at("critic_steps").get<int>();
  c.actor_lr = j.at("actor_lr").get<double>();
  c.critic_lr = j.at("critic_lr").get<double>();
  c.reward_scale = j.at("reward_scale").get<double>();
  c.epsilon.breakpoints = j.at("epsilon").get<std::vector<std::pair<double, double>>>();
  c.seed = j.at("seed").get<std::uint64_t>();
  c.kl_direction = j.at("kl_direction").get<std::string>() == "new_old" ? KlDirection::kNewOld
                                                                        : KlDirection::kOldNew;
  c.guard_factor = j.at("guard_factor").get<double>();
  c.phi_literal = j.at("phi_literal").get<bool>();
  return c;
}

Trainer::Trainer(std::vector<LabeledInstance> dataset, TrainConfig config, ModelConfig model)
    : dataset_(std::move(dataset)), config_(std::move(config)), model_(std::move(model)) {
  config_.validate();
  model_.validate();
  if (dataset_.empty()) throw ConfigError("training dataset is empty");
  for (const auto& item : dataset_) validate(item.instance);
  nets_ = init_params(model_, derive_seed(config_.seed, 0x1417));
  beta_ = config_.beta0;
  init_optimizers();
}

void Trainer::init_optimizers() {
  const auto actor_params = nets_.actor.parameters();
  const auto critic_params = nets_.critic.parameters();
  actor_adam_ = ad::make_adam_state(actor_params, {config_.actor_lr});
  critic_adam_ = ad::make_adam_state(critic_params, {config_.critic_lr});
}

Trainer Trainer::resume(std::vector<LabeledInstance> dataset, const Checkpoint& checkpoint,
                        int episodes, int workers) {
  if (checkpoint.trainer.is_null())
    throw DataError("checkpoint holds no trainer state to resume from");
  if (dataset.empty()) throw ConfigError("training dataset is empty");
  Trainer t;
  t.dataset_ = std::move(dataset);
  try {
    const auto& j = checkpoint.trainer;
    t.config_ = train_config_from_json(j.at("config"));
    if (episodes > 0) t.config_.episodes = episodes;
    if (workers > 0) t.config_.workers = workers;
    t.config_.validate();
    t.model_ = checkpoint.model;
    t.nets_ = clone(checkpoint.nets);
    t.episode_ = j.at("episode").get<int>();
    t.beta_ = j.at("beta").get<double>();
    t.actor_adam_ = adam_from_json(j.at("actor_adam"));
    t.critic_adam_ = adam_from_json(j.at("critic_adam"));
    t.log_ = log_from_json(j.at("log"));
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed trainer state: ") + e.what());
  }
  if (t.actor_adam_.first_moment.size() != t.nets_.actor.parameters().size() ||
      t.critic_adam_.first_moment.size() != t.nets_.critic.parameters().size())
    throw DataError("trainer optimizer state does not match the networks");
  return t;
}

TrainLog Trainer::log() const {
  TrainLog out = log_;
  refresh_phi(out, config_.phi_literal);
  return out;
}

const EpisodeLog& Trainer::run_episode() {
  if (finished()) throw StateError("training already reached its episode target");
  const int k = episode_;
  EpisodeLog entry;
  entry.episode = k;
  entry.epsilon = config_.epsilon.at(static_cast<double>(k) / config_.episodes);

  Rng picker(derive_seed(config_.seed, static_cast<std::uint64_t>(k), 1));
  const auto& item = dataset_[picker.below(dataset_.size())];
  entry.instance_id = item.id;

  // Roll-outs against a frozen actor; seeds depend only on (seed, episode, i)
  // so the result does not depend on the worker count.
  const int N = config_.rollouts;
  std::vector<RolloutBatch> batches(N);
  auto work = [&](int first, int stride) {
    for (int i = first; i < N; i += stride) {
      batches[i] = collect_rollout(item.instance, nets_.actor, entry.epsilon,
                                   derive_seed(config_.seed, static_cast<std::uint64_t>(k), 2,
                                               static_cast<std::uint64_t>(i)),
                                   model_.time_unit);
      rewards_to_go(batches[i], config_.reward_scale);
      advantages(batches[i], nets_.critic, config_.reward_scale);
    }
  };
  const int workers = std::min(config_.workers, N);
  if (workers <= 1) {
    work(0, 1);
  } else {
    std::vector<std::jthread> pool;
    for (int w = 0; w < workers; ++w) pool.emplace_back(work, w, workers);
  }

  double total = 0.0;
  entry.best_return = static_cast<double>(batches.front().total_return());
  for (const auto& b : batches) {
    const double r = static_cast<double>(b.total_return());
    entry.returns.push_back(r);
    total += r;
    entry.best_return = std::max(entry.best_return, r);
  }
  entry.mean_return = total / N;

  const SampleSet samples = make_sample_set(batches);

  auto actor_params = nets_.actor.parameters();
  const auto saved_params = snapshot(actor_params);
  const auto saved_adam = actor_adam_;
  for (int step = 0; step < config_.actor_steps; ++step) {
    const Tensor loss = actor_loss(samples, nets_.actor, beta_, config_.kl_direction);
    require_finite(loss.item(), "actor loss", k);
    ad::backward(loss);
    ad::adam_step(actor_params, actor_adam_);
  }
  entry.kl = mean_kl(samples, nets_.actor, config_.kl_direction);
  require_finite(entry.kl, "KL divergence", k);
  if (entry.kl > config_.guard_factor * config_.kl_target) {
    restore(actor_params, saved_params);
    actor_adam_ = saved_adam;
    beta_ *= 2.0;
    entry.guard_triggered = true;
  } else {
    beta_ = update_beta(beta_, entry.kl, config_.kl_target);
  }
  entry.beta = beta_;

  auto critic_params = nets_.critic.parameters();
  for (int step = 0; step < config_.critic_steps; ++step) {
    const Tensor loss = critic_loss(samples, nets_.critic);
    require_finite(loss.item(), "critic loss", k);
    if (step == 0) entry.critic_loss = loss.item();
    ad::backward(loss);
    ad::adam_step(critic_params, critic_adam_);
  }

  ++episode_;
  log_.push_back(std::move(entry));
  return log_.back();
}

void Trainer::run(int every, const std::function<void(const Trainer&)>& on_checkpoint) {
  while (!finished()) {
    run_episode();
    if (every > 0 && on_checkpoint && episode_ % every == 0 && !finished())
      on_checkpoint(*this);
  }
}

Checkpoint Trainer::checkpoint() const {
  Checkpoint c;
  c.model = model_;
  c.seed = config_.seed;
  c.nets = clone(nets_);
  c.trainer = {{"config", train_config_to_json(config_)},
               {"episode", episode_},
               {"beta", beta_},
               {"actor_adam", adam_to_json(actor_adam_)},
               {"critic_adam", adam_to_json(critic_adam_)},
               {"log", log_to_json(log_)}};
  return c;
}

TrainResult train(std::vector<LabeledInstance> dataset, const TrainConfig& config,
                  const ModelConfig& model) {
  Trainer trainer(std::move(dataset), config, model);
  trainer.run();
  return {clone(trainer.networks()), trainer.log()};
}

GreedyResult greedy_solve(const Instance& instance, const ActorNet& actor, double time_unit) {
  ad::NoGradGuard no_grad;
  const double scale = default_feature_scale(instance, time_unit);
  SchedulingState state = reset(instance);
  while (!state.done()) {
    const ActionMask m = mask(state);
    const Tensor log_probs = actor_forward(actor, encode(state, scale), m);
    int best = -1;
    for (int j = 0; j < state.num_jobs(); ++j) {
      if (!m.allowed[j]) continue;
      if (best < 0 || log_probs.values()[j] > log_probs.values()[best]) best = j;
    }
    state.apply(best);
  }
  return {state.scheduled(), state.current_makespan()};
}

}  // namespace jsrl
