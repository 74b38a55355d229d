#include "jsrl/models.hpp"

#include <cmath>

#include "jsrl/errors.hpp"
#include "jsrl/rng.hpp"

namespace jsrl {

using ad::Tensor;

void ModelConfig::validate() const {
  if (hidden1 < 1 || hidden2 < 1 || feature_width < 1)
    throw ConfigError("model widths must be positive");
  if (!(time_unit > 0.0)) throw ConfigError("time_unit must be positive");
  if (ffn_widths.empty()) throw ConfigError("critic FFN needs at least one hidden layer");
  for (std::size_t i = 0; i < ffn_widths.size(); ++i) {
    if (ffn_widths[i] < 2) throw ConfigError("FFN hidden widths must be >= 2");
    if (i > 0 && ffn_widths[i] >= ffn_widths[i - 1])
      throw ConfigError("FFN hidden widths must be strictly decreasing");
  }
}

namespace {

std::vector<double> uniform_values(Rng& rng, std::size_t count, double bound) {
  std::vector<double> v(count);
  for (auto& x : v) x = rng.uniform(-bound, bound);
  return v;
}

LstmLayer make_lstm(Rng& rng, int input_size, int hidden_size) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(input_size + hidden_size));
  const int gates = 4 * hidden_size;
  LstmLayer layer;
  layer.input_size = input_size;
  layer.hidden_size = hidden_size;
  layer.w_input = Tensor::parameter(input_size, gates,
                                    uniform_values(rng, std::size_t(input_size) * gates, bound));
  layer.w_hidden = Tensor::parameter(
      hidden_size, gates, uniform_values(rng, std::size_t(hidden_size) * gates, bound));
  auto bias = uniform_values(rng, gates, bound);
  for (int i = hidden_size; i < 2 * hidden_size; ++i) bias[i] += 1.0;
  layer.bias = Tensor::parameter(1, gates, std::move(bias));
  return layer;
}

Linear make_linear(Rng& rng, int in, int out) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(in));
  Linear l;
  l.weight = Tensor::parameter(in, out, uniform_values(rng, std::size_t(in) * out, bound));
  l.bias = Tensor::parameter(1, out, uniform_values(rng, out, bound));
  return l;
}

void append_lstm(NamedTensors& out, const std::string& prefix, const LstmLayer& layer) {
  out.emplace_back(prefix + ".w_input", layer.w_input);
  out.emplace_back(prefix + ".w_hidden", layer.w_hidden);
  out.emplace_back(prefix + ".bias", layer.bias);
}

std::vector<Tensor> tensors_of(const NamedTensors& named) {
  std::vector<Tensor> out;
  out.reserve(named.size());
  for (const auto& [name, t] : named) out.push_back(t);
  return out;
}

}  // namespace

NamedTensors ActorNet::named_parameters() const {
  NamedTensors out;
  append_lstm(out, "lstm1", lstm1);
  append_lstm(out, "lstm2", lstm2);
  out.emplace_back("proj.weight", proj.weight);
  out.emplace_back("proj.bias", proj.bias);
  return out;
}

std::vector<Tensor> ActorNet::parameters() const { return tensors_of(named_parameters()); }

NamedTensors CriticNet::named_parameters() const {
  NamedTensors out;
  append_lstm(out, "lstm1", lstm1);
  append_lstm(out, "lstm2", lstm2);
  for (std::size_t i = 0; i < ffn.size(); ++i) {
    out.emplace_back("ffn" + std::to_string(i) + ".weight", ffn[i].weight);
    out.emplace_back("ffn" + std::to_string(i) + ".bias", ffn[i].bias);
  }
  return out;
}

std::vector<Tensor> CriticNet::parameters() const { return tensors_of(named_parameters()); }

PolicyNetworks init_params(const ModelConfig& config, std::uint64_t seed) {
  config.validate();
  Rng rng(seed);
  PolicyNetworks nets;
  nets.actor.lstm1 = make_lstm(rng, config.feature_width, config.hidden1);
  nets.actor.lstm2 = make_lstm(rng, config.hidden1, config.hidden2);
  nets.actor.proj = make_linear(rng, config.hidden2, 1);
  nets.critic.lstm1 = make_lstm(rng, config.feature_width, config.hidden1);
  nets.critic.lstm2 = make_lstm(rng, config.hidden1, config.hidden2);
  int in = config.hidden2;
  for (int width : config.ffn_widths) {
    nets.critic.ffn.push_back(make_linear(rng, in, width));
    in = width;
  }
  nets.critic.ffn.push_back(make_linear(rng, in, 1));
  return nets;
}

namespace {

Tensor clone_tensor(const Tensor& t) {
  return Tensor::parameter(t.rows(), t.cols(),
                           std::vector<double>(t.values().begin(), t.values().end()));
}

LstmLayer clone_lstm(const LstmLayer& l) {
  return {l.input_size, l.hidden_size, clone_tensor(l.w_input), clone_tensor(l.w_hidden),
          clone_tensor(l.bias)};
}

Linear clone_linear(const Linear& l) { return {clone_tensor(l.weight), clone_tensor(l.bias)}; }

}  // namespace

PolicyNetworks clone(const PolicyNetworks& nets) {
  PolicyNetworks out;
  out.actor = {clone_lstm(nets.actor.lstm1), clone_lstm(nets.actor.lstm2),
               clone_linear(nets.actor.proj)};
  out.critic.lstm1 = clone_lstm(nets.critic.lstm1);
  out.critic.lstm2 = clone_lstm(nets.critic.lstm2);
  for (const auto& layer : nets.critic.ffn) out.critic.ffn.push_back(clone_linear(layer));
  return out;
}

std::size_t parameter_count(const NamedTensors& params) {
  std::size_t total = 0;
  for (const auto& [name, t] : params) total += t.size();
  return total;
}

std::pair<Tensor, Tensor> lstm_cell(const LstmLayer& layer, const Tensor& x,
                                    const Tensor& h, const Tensor& c) {
  if (x.cols() != layer.input_size)
    throw DimensionError("lstm: input width " + std::to_string(x.cols()) +
                         " but layer expects " + std::to_string(layer.input_size));
  const int hs = layer.hidden_size;
  const Tensor gates =
      ad::add_bias(ad::add(ad::matmul(x, layer.w_input), ad::matmul(h, layer.w_hidden)),
                   layer.bias);
  const Tensor in_gate = ad::sigmoid(ad::slice_cols(gates, 0, hs));
  const Tensor forget_gate = ad::sigmoid(ad::slice_cols(gates, hs, hs));
  const Tensor candidate = ad::tanh(ad::slice_cols(gates, 2 * hs, hs));
  const Tensor out_gate = ad::sigmoid(ad::slice_cols(gates, 3 * hs, hs));
  Tensor c_next = ad::add(ad::mul(forget_gate, c), ad::mul(in_gate, candidate));
  Tensor h_next = ad::mul(out_gate, ad::tanh(c_next));
  return {std::move(h_next), std::move(c_next)};
}

LstmRun lstm_run(const LstmLayer& layer, int batch, std::span<const Tensor> inputs,
                 std::span<const std::vector<bool>> active) {
  if (!active.empty() && active.size() != inputs.size())
    throw DimensionError("lstm: activity flags for " + std::to_string(active.size()) +
                         " steps, inputs for " + std::to_string(inputs.size()));
  LstmRun run;
  Tensor h = Tensor::zeros(batch, layer.hidden_size);
  Tensor c = Tensor::zeros(batch, layer.hidden_size);
  for (std::size_t t = 0; t < inputs.size(); ++t) {
    if (inputs[t].rows() != batch)
      throw DimensionError("lstm: step input " + inputs[t].shape_string() +
                           " for batch " + std::to_string(batch));
    auto [h_next, c_next] = lstm_cell(layer, inputs[t], h, c);
    const bool partial =
        !active.empty() &&
        std::find(active[t].begin(), active[t].end(), false) != active[t].end();
    if (partial) {
      h = ad::select_rows(active[t], h_next, h);
      c = ad::select_rows(active[t], c_next, c);
    } else {
      h = std::move(h_next);
      c = std::move(c_next);
    }
    run.hidden.push_back(h);
  }
  run.final_hidden = h;
  return run;
}

std::vector<std::vector<double>> lstm_forward(const LstmLayer& layer,
                                              const std::vector<std::vector<double>>& sequence) {
  std::vector<Tensor> inputs;
  inputs.reserve(sequence.size());
  for (const auto& x : sequence) {
    if (static_cast<int>(x.size()) != layer.input_size)
      throw DimensionError("lstm: input width " + std::to_string(x.size()) +
                           " but layer expects " + std::to_string(layer.input_size));
    inputs.push_back(Tensor::constant(1, layer.input_size, x));
  }
  const auto run = lstm_run(layer, 1, inputs);
  std::vector<std::vector<double>> out;
  out.reserve(run.hidden.size());
  for (const auto& h : run.hidden) out.emplace_back(h.values().begin(), h.values().end());
  return out;
}

StateBatch make_batch(std::span<const StateFeatures> features,
                      std::span<const ActionMask> masks) {
  if (!masks.empty() && masks.size() != features.size())
    throw DimensionError("make_batch: " + std::to_string(masks.size()) + " masks for " +
                         std::to_string(features.size()) + " states");
  StateBatch b;
  b.samples = static_cast<int>(features.size());
  std::vector<int> first_row(features.size());
  std::size_t max_len = 0;
  for (std::size_t s = 0; s < features.size(); ++s) {
    const int n = static_cast<int>(features[s].jobs.size());
    if (n < 1) throw DimensionError("make_batch: state without jobs");
    if (!masks.empty() && masks[s].allowed.size() != features[s].jobs.size())
      throw DimensionError("make_batch: mask length " +
                           std::to_string(masks[s].allowed.size()) + " for " +
                           std::to_string(n) + " jobs");
    b.job_counts.push_back(n);
    first_row[s] = b.sequences;
    b.sequences += n;
    b.max_jobs = std::max(b.max_jobs, n);
    for (const auto& job : features[s].jobs) max_len = std::max(max_len, job.size());
  }

  const int width = kTaskFeatureWidth;
  for (std::size_t t = 0; t < max_len; ++t) {
    std::vector<double> x(std::size_t(b.sequences) * width, 0.0);
    std::vector<bool> active(b.sequences, false);
    int row = 0;
    for (const auto& f : features)
      for (const auto& job : f.jobs) {
        if (t < job.size()) {
          x[row * width + 0] = job[t].machine;
          x[row * width + 1] = job[t].processing;
          x[row * width + 2] = job[t].start;
          active[row] = true;
        }
        ++row;
      }
    b.task_inputs.push_back(Tensor::constant(b.sequences, width, std::move(x)));
    b.task_active.push_back(std::move(active));
  }

  for (int j = 0; j < b.max_jobs; ++j) {
    std::vector<int> rows(b.samples, -1);
    std::vector<bool> active(b.samples, false);
    for (int s = 0; s < b.samples; ++s)
      if (j < b.job_counts[s]) {
        rows[s] = first_row[s] + j;
        active[s] = true;
      }
    b.job_rows.push_back(std::move(rows));
    b.job_active.push_back(std::move(active));
  }

  if (!masks.empty()) {
    b.action_mask.assign(std::size_t(b.samples) * b.max_jobs, false);
    for (int s = 0; s < b.samples; ++s)
      for (int j = 0; j < b.job_counts[s]; ++j)
        b.action_mask[s * b.max_jobs + j] = masks[s].allowed[j];
  }
  return b;
}

namespace {

bool all_true(const std::vector<bool>& v) {
  return std::find(v.begin(), v.end(), false) == v.end();
}

// Shared double-LSTM encoder: per-job embeddings from lstm1, then lstm2 over
// jobs. Returns lstm2's hidden state at every job position.
std::vector<Tensor> encode_jobs(const LstmLayer& lstm1, const LstmLayer& lstm2,
                                const StateBatch& b) {
  if (lstm2.input_size != lstm1.hidden_size)
    throw DimensionError("lstm2 input width must equal lstm1 hidden width");
  const auto tasks = lstm_run(lstm1, b.sequences, b.task_inputs, b.task_active);
  std::vector<Tensor> job_inputs;
  job_inputs.reserve(b.max_jobs);
  for (int j = 0; j < b.max_jobs; ++j)
    job_inputs.push_back(ad::gather_rows(tasks.final_hidden, b.job_rows[j]));
  return lstm_run(lstm2, b.samples, job_inputs, b.job_active).hidden;
}

}  // namespace

Tensor actor_forward(const ActorNet& net, const StateBatch& b) {
  if (b.action_mask.size() != std::size_t(b.samples) * b.max_jobs)
    throw DimensionError("actor_forward: batch built without action masks");
  const auto hidden = encode_jobs(net.lstm1, net.lstm2, b);
  std::vector<Tensor> scores;
  scores.reserve(hidden.size());
  for (const auto& h : hidden)
    scores.push_back(ad::add_bias(ad::matmul(h, net.proj.weight), net.proj.bias));
  return ad::masked_log_softmax(ad::concat_cols(scores), b.action_mask);
}

Tensor critic_forward(const CriticNet& net, const StateBatch& b) {
  const auto hidden = encode_jobs(net.lstm1, net.lstm2, b);
  Tensor z;
  for (int j = 0; j < b.max_jobs; ++j) {
    Tensor term = all_true(b.job_active[j])
                      ? hidden[j]
                      : ad::select_rows(b.job_active[j], hidden[j],
                                        Tensor::zeros(b.samples, net.lstm2.hidden_size));
    z = z.defined() ? ad::add(z, term) : term;
  }
  for (std::size_t i = 0; i < net.ffn.size(); ++i) {
    if (z.cols() != net.ffn[i].weight.rows())
      throw DimensionError("critic FFN layer " + std::to_string(i) + " expects width " +
                           std::to_string(net.ffn[i].weight.rows()) + ", got " +
                           std::to_string(z.cols()));
    z = ad::add_bias(ad::matmul(z, net.ffn[i].weight), net.ffn[i].bias);
    if (i + 1 < net.ffn.size()) z = ad::relu(z);
  }
  return z;
}

Tensor actor_forward(const ActorNet& net, const StateFeatures& features,
                     const ActionMask& mask) {
  if (features.jobs.size() != mask.allowed.size())
    throw DimensionError("actor_forward: " + std::to_string(features.jobs.size()) +
                         " jobs but mask of length " + std::to_string(mask.allowed.size()));
  if (!mask.any()) throw DegenerateMask("actor_forward: no allowed job");
  return actor_forward(net, make_batch(std::span(&features, 1), std::span(&mask, 1)));
}

Tensor critic_forward(const CriticNet& net, const StateFeatures& features) {
  return critic_forward(net, make_batch(std::span(&features, 1)));
}

}  // namespace jsrl
