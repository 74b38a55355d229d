#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "jsrl/autodiff.hpp"
#include "jsrl/env.hpp"

namespace jsrl {

struct ModelConfig {
  int hidden1 = 110;
  int hidden2 = 220;
  // Critic FFN hidden widths; input width is hidden2, output width is 1.
  std::vector<int> ffn_widths{1100, 550, 110};
  int feature_width = kTaskFeatureWidth;
  // Feature scale per instance is time_unit * machine count.
  double time_unit = 100.0;

  void validate() const;
  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

// Gate order inside the packed weights: input, forget, cell, output.
struct LstmLayer {
  int input_size = 0;
  int hidden_size = 0;
  ad::Tensor w_input;   // [input_size x 4h]
  ad::Tensor w_hidden;  // [hidden_size x 4h]
  ad::Tensor bias;      // [1 x 4h]
};

struct Linear {
  ad::Tensor weight;  // [in x out]
  ad::Tensor bias;    // [1 x out]
};

using NamedTensors = std::vector<std::pair<std::string, ad::Tensor>>;

struct ActorNet {
  LstmLayer lstm1;  // per-task encoder, shared across jobs
  LstmLayer lstm2;  // runs over job embeddings in job-index order
  Linear proj;      // hidden2 -> 1

  NamedTensors named_parameters() const;
  std::vector<ad::Tensor> parameters() const;
};

struct CriticNet {
  LstmLayer lstm1;
  LstmLayer lstm2;
  std::vector<Linear> ffn;  // ReLU after every layer except the last

  NamedTensors named_parameters() const;
  std::vector<ad::Tensor> parameters() const;
};

struct PolicyNetworks {
  ActorNet actor;
  CriticNet critic;
};

// Uniform in [-1/sqrt(fan_in), 1/sqrt(fan_in)] (LSTM fan_in = input + hidden),
// forget-gate bias shifted by +1. Deterministic per seed.
PolicyNetworks init_params(const ModelConfig& config, std::uint64_t seed);

// Deep copy; the result shares no parameter storage with `nets`.
PolicyNetworks clone(const PolicyNetworks& nets);

std::size_t parameter_count(const NamedTensors& params);

// One LSTM step on a batch: x [B x in], h and c [B x hidden].
std::pair<ad::Tensor, ad::Tensor> lstm_cell(const LstmLayer& layer, const ad::Tensor& x,
                                            const ad::Tensor& h, const ad::Tensor& c);

// Runs the recurrence from zero state over `inputs` (one [B x in] tensor per
// time step). Rows whose `active` flag is false at a step carry their state
// unchanged, which is how padded sequences are handled. Empty `active` means
// all rows are active at every step. Returns the hidden state after each step
// and the final hidden state.
struct LstmRun {
  std::vector<ad::Tensor> hidden;
  ad::Tensor final_hidden;
};
LstmRun lstm_run(const LstmLayer& layer, int batch, std::span<const ad::Tensor> inputs,
                 std::span<const std::vector<bool>> active = {});

// Single unpadded sequence in, one hidden vector per element out.
std::vector<std::vector<double>> lstm_forward(const LstmLayer& layer,
                                              const std::vector<std::vector<double>>& sequence);

// Padded mini-batch of states. Task sequences of every (sample, job) are
// padded to the longest one; job sequences are padded to the largest job count.
struct StateBatch {
  int samples = 0;
  int max_jobs = 0;
  std::vector<int> job_counts;
  int sequences = 0;
  std::vector<ad::Tensor> task_inputs;            // per step [sequences x width]
  std::vector<std::vector<bool>> task_active;     // per step, per sequence
  std::vector<std::vector<int>> job_rows;         // per job position, per sample
  std::vector<std::vector<bool>> job_active;      // per job position, per sample
  std::vector<bool> action_mask;                  // [samples x max_jobs], may be empty
};

StateBatch make_batch(std::span<const StateFeatures> features,
                      std::span<const ActionMask> masks = {});

// [samples x max_jobs] log-probabilities; padded and masked entries hold
// ad::kMaskedLogProb.
ad::Tensor actor_forward(const ActorNet& net, const StateBatch& batch);
// [samples x 1] value estimates.
ad::Tensor critic_forward(const CriticNet& net, const StateBatch& batch);

// Single-state conveniences.
ad::Tensor actor_forward(const ActorNet& net, const StateFeatures& features,
                         const ActionMask& mask);
ad::Tensor critic_forward(const CriticNet& net, const StateFeatures& features);

}  // namespace jsrl
