#include <doctest.h>

#include <cmath>

#include "jsrl/errors.hpp"
#include "jsrl/models.hpp"
#include "support.hpp"

using namespace jsrl;
using ad::Tensor;

namespace {

double sig(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// Scalar gate equations, written independently of the tensor code.
std::vector<double> lstm_step_oracle(const LstmLayer& l, const std::vector<double>& x,
                                     const std::vector<double>& h, std::vector<double>& c) {
  const int H = l.hidden_size;
  auto W = [&](int row, int col) { return l.w_input.at(row, col); };
  auto U = [&](int row, int col) { return l.w_hidden.at(row, col); };
  std::vector<double> h_next(H);
  for (int k = 0; k < H; ++k) {
    double pre[4];
    for (int g = 0; g < 4; ++g) {
      double s = l.bias.at(0, g * H + k);
      for (int i = 0; i < l.input_size; ++i) s += x[i] * W(i, g * H + k);
      for (int i = 0; i < H; ++i) s += h[i] * U(i, g * H + k);
      pre[g] = s;
    }
    const double ig = sig(pre[0]), fg = sig(pre[1]), cand = std::tanh(pre[2]), og = sig(pre[3]);
    c[k] = fg * c[k] + ig * cand;
    h_next[k] = og * std::tanh(c[k]);
  }
  return h_next;
}

StateFeatures random_features(Rng& rng, int jobs, int max_len) {
  StateFeatures f;
  for (int j = 0; j < jobs; ++j) {
    const int len = static_cast<int>(rng.below(max_len + 1));
    std::vector<TaskFeature> seq;
    for (int t = 0; t < len; ++t)
      seq.push_back({rng.uniform(), rng.uniform(0.0, 0.5), t == 0 ? rng.uniform() : -1.0});
    f.jobs.push_back(seq);
  }
  return f;
}

ActionMask mask_for(const StateFeatures& f) {
  ActionMask m;
  for (const auto& job : f.jobs) m.allowed.push_back(!job.empty());
  return m;
}

void zero_all(const NamedTensors& params) {
  for (auto [name, t] : params)
    for (auto& v : t.mutable_values()) v = 0.0;
}

}  // namespace

TEST_CASE("lstm_forward: empty and zero cases") {
  const auto nets = init_params(testing::small_model(), 1);
  CHECK(lstm_forward(nets.actor.lstm1, {}).empty());

  PolicyNetworks zero = clone(nets);
  zero_all(zero.actor.named_parameters());
  const auto out = lstm_forward(zero.actor.lstm1, {{0, 0, 0}, {0, 0, 0}});
  REQUIRE(out.size() == 2);
  for (const auto& h : out)
    for (double v : h) CHECK(v == 0.0);
  CHECK_THROWS_AS(lstm_forward(nets.actor.lstm1, {{1.0, 2.0}}), DimensionError);
}

TEST_CASE("lstm matches the scalar gate oracle") {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const auto nets = init_params(testing::small_model(), seed);
    const LstmLayer& l = nets.critic.lstm1;
    Rng rng(seed + 100);
    std::vector<std::vector<double>> seq(4, std::vector<double>(3));
    for (auto& x : seq)
      for (auto& v : x) v = rng.uniform(-1, 1);
    const auto got = lstm_forward(l, seq);
    std::vector<double> h(l.hidden_size, 0.0), c(l.hidden_size, 0.0);
    for (std::size_t t = 0; t < seq.size(); ++t) {
      h = lstm_step_oracle(l, seq[t], h, c);
      for (int k = 0; k < l.hidden_size; ++k) CHECK(std::abs(got[t][k] - h[k]) <= 1e-12);
    }
  }
}

TEST_CASE("actor output is a distribution on the mask") {
  Rng rng(21);
  const auto nets = init_params(testing::small_model(), 2);
  for (int trial = 0; trial < 30; ++trial) {
    auto f = random_features(rng, 1 + static_cast<int>(rng.below(6)), 4);
    f.jobs[rng.below(f.jobs.size())].push_back({0.5, 0.1, 0.0});
    const ActionMask m = mask_for(f);
    const Tensor lp = actor_forward(nets.actor, f, m);
    double total = 0.0;
    for (std::size_t j = 0; j < m.allowed.size(); ++j) {
      const double p = std::exp(lp.values()[j]);
      if (!m.allowed[j]) CHECK(p == 0.0);
      total += p;
    }
    CHECK(std::abs(total - 1.0) <= 1e-12);
  }
}

TEST_CASE("one unfinished job gets log-probability zero") {
  const auto nets = init_params(testing::small_model(), 9);
  StateFeatures f;
  f.jobs = {{}, {{0.5, 0.2, 0.0}, {0.0, 0.3, -1.0}}, {}};
  const Tensor lp = actor_forward(nets.actor, f, mask_for(f));
  CHECK(lp.values()[1] == 0.0);
  CHECK_THROWS_AS(actor_forward(nets.actor, StateFeatures{{{}, {}}}, ActionMask{{false, false}}),
                  DegenerateMask);
  CHECK_THROWS_AS(actor_forward(nets.actor, f, ActionMask{{true}}), DimensionError);
}

TEST_CASE("identical jobs in a symmetric state tie") {
  // lstm2 reads jobs in order, so identical jobs only tie once its memory is
  // cut: no recurrent weights and a forget gate pinned at zero.
  auto nets = init_params(testing::small_model(), 4);
  for (auto& v : nets.actor.lstm2.w_hidden.mutable_values()) v = 0.0;
  const int H = nets.actor.lstm2.hidden_size;
  for (int k = 0; k < H; ++k) nets.actor.lstm2.bias.mutable_values()[H + k] = -1000.0;
  StateFeatures f;
  const std::vector<TaskFeature> seq{{0.0, 0.25, 0.0}, {0.5, 0.3, -1.0}};
  f.jobs = {seq, seq};
  const Tensor lp = actor_forward(nets.actor, f, mask_for(f));
  CHECK(std::abs(std::exp(lp.values()[0]) - 0.5) <= 1e-9);
  CHECK(std::abs(std::exp(lp.values()[1]) - 0.5) <= 1e-9);
}

TEST_CASE("critic with zero parameters outputs zero") {
  auto nets = init_params(testing::small_model(), 5);
  zero_all(nets.critic.named_parameters());
  Rng rng(1);
  auto f = random_features(rng, 3, 3);
  CHECK(critic_forward(nets.critic, f).item() == 0.0);
}

TEST_CASE("critic depends on job order") {
  const auto nets = init_params(testing::small_model(), 6);
  StateFeatures f;
  f.jobs = {{{0.0, 0.2, 0.0}}, {{0.5, 0.4, 0.1}, {0.0, 0.1, -1.0}}};
  StateFeatures g;
  g.jobs = {f.jobs[1], f.jobs[0]};
  CHECK(critic_forward(nets.critic, f).item() != critic_forward(nets.critic, g).item());
}

TEST_CASE("init_params determinism and parameter count") {
  const ModelConfig config;
  const auto a = init_params(config, 11);
  const auto b = init_params(config, 11);
  const auto c = init_params(config, 12);
  const auto pa = a.actor.named_parameters();
  const auto pb = b.actor.named_parameters();
  const auto pc = c.actor.named_parameters();
  bool all_equal = true, any_diff = false;
  for (std::size_t i = 0; i < pa.size(); ++i) {
    all_equal &= std::equal(pa[i].second.values().begin(), pa[i].second.values().end(),
                            pb[i].second.values().begin());
    any_diff |= !std::equal(pa[i].second.values().begin(), pa[i].second.values().end(),
                            pc[i].second.values().begin());
  }
  CHECK(all_equal);
  CHECK(any_diff);

  auto lstm = [](std::size_t in, std::size_t h) { return 4 * h * (in + h + 1); };
  const std::size_t actor = lstm(3, 110) + lstm(110, 220) + (220 + 1);
  const std::size_t critic = lstm(3, 110) + lstm(110, 220) + (220 * 1100 + 1100) +
                             (1100 * 550 + 550) + (550 * 110 + 110) + (110 + 1);
  CHECK(parameter_count(a.actor.named_parameters()) == actor);
  CHECK(parameter_count(a.critic.named_parameters()) == critic);
}

TEST_CASE("initial weights respect the fan-in bound and forget bias") {
  const ModelConfig config = testing::small_model();
  const auto nets = init_params(config, 3);
  const double bound = 1.0 / std::sqrt(3.0 + config.hidden1);
  for (double v : nets.actor.lstm1.w_input.values()) CHECK(std::abs(v) <= bound);
  const int H = config.hidden1;
  for (int k = 0; k < H; ++k) {
    CHECK(nets.actor.lstm1.bias.at(0, H + k) >= 1.0 - bound);
    CHECK(std::abs(nets.actor.lstm1.bias.at(0, k)) <= bound);
  }
}

TEST_CASE("model config validation") {
  ModelConfig c;
  c.ffn_widths = {100, 200, 50};
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = ModelConfig{};
  c.hidden1 = 0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = ModelConfig{};
  c.time_unit = 0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
}

TEST_CASE("padded batches agree with single-state evaluation") {
  Rng rng(77);
  const auto nets = init_params(testing::small_model(), 8);
  for (int trial = 0; trial < 10; ++trial) {
    std::vector<StateFeatures> feats;
    std::vector<ActionMask> masks;
    for (int s = 0; s < 5; ++s) {
      auto f = random_features(rng, 1 + static_cast<int>(rng.below(5)), 5);
      f.jobs[0].push_back({0.1, 0.2, 0.3});
      masks.push_back(mask_for(f));
      feats.push_back(f);
    }
    const StateBatch batch = make_batch(feats, masks);
    const Tensor lp = actor_forward(nets.actor, batch);
    const Tensor v = critic_forward(nets.critic, batch);
    for (int s = 0; s < 5; ++s) {
      const Tensor single = actor_forward(nets.actor, feats[s], masks[s]);
      for (std::size_t j = 0; j < masks[s].allowed.size(); ++j)
        if (masks[s].allowed[j])
          CHECK(std::abs(lp.at(s, static_cast<int>(j)) - single.values()[j]) <= 1e-10);
      for (int j = static_cast<int>(masks[s].allowed.size()); j < batch.max_jobs; ++j)
        CHECK(std::exp(lp.at(s, j)) == 0.0);
      CHECK(std::abs(v.at(s, 0) - critic_forward(nets.critic, feats[s]).item()) <= 1e-10);
    }
  }
}

TEST_CASE("sizes from 1 job upward need no reconfiguration") {
  const auto nets = init_params(testing::small_model(), 10);
  for (int n = 1; n <= 10; ++n)
    for (int m = 1; m <= 9; m += 4) {
      const Instance inst = generate({n, m, Gaussian{}, static_cast<std::uint64_t>(n * 10 + m)});
      const auto s = reset(inst);
      const auto f = encode(s, default_feature_scale(inst, 100));
      CHECK(actor_forward(nets.actor, f, mask(s)).cols() == n);
      CHECK(std::isfinite(critic_forward(nets.critic, f).item()));
    }
}

TEST_CASE("finite differences through both heads on a 3-job 2-machine state") {
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    const auto nets = init_params(testing::small_model(), seed);
    Rng rng(seed);
    const Instance inst = testing::random_instance(rng, 3, 2);
    SchedulingState s = reset(inst);
    s.apply(1);
    const auto f = encode(s, default_feature_scale(inst, 10));
    const auto m = mask(s);
    const Tensor w = testing::random_parameter(rng, 1, 3);
    const double err_actor = testing::max_grad_error(
        [&] { return ad::mean(ad::mul(ad::exp(actor_forward(nets.actor, f, m)), w)); },
        nets.actor.parameters());
    CHECK(err_actor <= 1e-4);
    const double err_critic = testing::max_grad_error(
        [&] { return ad::square(critic_forward(nets.critic, f)); }, nets.critic.parameters());
    CHECK(err_critic <= 1e-4);
  }
}

TEST_CASE("single lstm cell step passes finite differences") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto nets = init_params(testing::small_model(), seed);
    const LstmLayer& l = nets.actor.lstm2;
    Rng rng(seed);
    Tensor x = testing::random_parameter(rng, 2, l.input_size);
    Tensor h = testing::random_parameter(rng, 2, l.hidden_size);
    Tensor c = testing::random_parameter(rng, 2, l.hidden_size);
    const Tensor w = testing::random_parameter(rng, 2, l.hidden_size);
    std::vector<Tensor> wrt{x, h, c, l.w_input, l.w_hidden, l.bias};
    const double err = testing::max_grad_error(
        [&] {
          auto [hn, cn] = lstm_cell(l, x, h, c);
          return ad::mean(ad::add(ad::mul(hn, w), ad::square(cn)));
        },
        wrt);
    CHECK(err <= 1e-4);
  }
}

TEST_CASE("clone shares no storage") {
  const auto a = init_params(testing::small_model(), 1);
  auto b = clone(a);
  b.actor.proj.bias.mutable_values()[0] += 1.0;
  CHECK(a.actor.proj.bias.values()[0] + 1.0 == b.actor.proj.bias.values()[0]);
}
