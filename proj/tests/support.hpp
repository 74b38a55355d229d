#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include "jsrl/autodiff.hpp"
#include "jsrl/env.hpp"
#include "jsrl/instances.hpp"
#include "jsrl/models.hpp"
#include "jsrl/rng.hpp"

namespace testing {

using jsrl::ad::Tensor;

// Random instance with n jobs on m machines. With partial = true a job may
// visit only a prefix of its machine permutation.
inline jsrl::Instance random_instance(jsrl::Rng& rng, int n, int m, bool partial = false,
                                      int max_p = 20) {
  jsrl::Instance inst{n, m, {}};
  for (int j = 0; j < n; ++j) {
    std::vector<int> machines(m);
    for (int k = 0; k < m; ++k) machines[k] = k;
    for (int k = m - 1; k > 0; --k)
      std::swap(machines[k], machines[rng.below(static_cast<std::uint64_t>(k) + 1)]);
    const int len = partial ? 1 + static_cast<int>(rng.below(m)) : m;
    jsrl::Job job;
    for (int k = 0; k < len; ++k)
      job.push_back({machines[k], 1 + static_cast<jsrl::Time>(rng.below(max_p))});
    inst.jobs.push_back(job);
  }
  return inst;
}

// The worked 2x2 example: job0 = (M0,3),(M1,2); job1 = (M1,4),(M0,1).
inline jsrl::Instance example_2x2() {
  return jsrl::Instance{2, 2, {{{0, 3}, {1, 2}}, {{1, 4}, {0, 1}}}};
}

// Uniform random allowed action until terminal; returns the state and the
// summed rewards.
struct RandomEpisode {
  jsrl::SchedulingState state;
  jsrl::Time reward_sum = 0;
  std::size_t steps = 0;
};

inline RandomEpisode random_episode(const jsrl::Instance& inst, jsrl::Rng& rng) {
  RandomEpisode e{jsrl::reset(inst)};
  while (!e.state.done()) {
    const auto m = jsrl::mask(e.state);
    std::vector<int> allowed;
    for (std::size_t j = 0; j < m.allowed.size(); ++j)
      if (m.allowed[j]) allowed.push_back(static_cast<int>(j));
    e.reward_sum += e.state.apply(allowed[rng.below(allowed.size())]);
    ++e.steps;
  }
  return e;
}

// Gradient error of an analytic gradient against a central difference:
// |a - n| / max(|a|, |n|, floor). The floor keeps near-zero gradients from
// turning round-off into large relative numbers.
inline constexpr double kGradFloor = 1e-2;

inline double grad_error(double analytic, double numeric) {
  return std::abs(analytic - numeric) /
         std::max({std::abs(analytic), std::abs(numeric), kGradFloor});
}

// Largest gradient error over every entry of every tensor in `wrt` for the
// scalar produced by `loss`. Leaves are perturbed in place and restored.
inline double max_grad_error(const std::function<Tensor()>& loss, std::vector<Tensor> wrt,
                             double h = 1e-4) {
  for (auto& t : wrt) t.zero_grad();
  jsrl::ad::backward(loss());
  std::vector<std::vector<double>> analytic;
  for (const auto& t : wrt) analytic.emplace_back(t.grad().begin(), t.grad().end());
  double worst = 0.0;
  jsrl::ad::NoGradGuard no_grad;
  for (std::size_t k = 0; k < wrt.size(); ++k) {
    auto values = wrt[k].mutable_values();
    for (std::size_t i = 0; i < values.size(); ++i) {
      const double saved = values[i];
      values[i] = saved + h;
      const double up = loss().item();
      values[i] = saved - h;
      const double down = loss().item();
      values[i] = saved;
      const double a = analytic[k].empty() ? 0.0 : analytic[k][i];
      worst = std::max(worst, grad_error(a, (up - down) / (2 * h)));
    }
  }
  for (auto& t : wrt) t.zero_grad();
  return worst;
}

inline Tensor random_parameter(jsrl::Rng& rng, int rows, int cols, double scale = 1.0) {
  std::vector<double> v(static_cast<std::size_t>(rows) * cols);
  for (auto& x : v) x = rng.uniform(-scale, scale);
  return Tensor::parameter(rows, cols, std::move(v));
}

inline jsrl::ModelConfig small_model() {
  jsrl::ModelConfig c;
  c.hidden1 = 5;
  c.hidden2 = 7;
  c.ffn_widths = {9, 6, 4};
  return c;
}

}  // namespace testing
