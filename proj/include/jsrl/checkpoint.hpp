#pragma once

#include <cstdint>
#include <string>
#include <string_view>

#include <json.hpp>

#include "jsrl/models.hpp"

namespace jsrl {

// JSON container, stable across releases:
// {
//   "format": "jobshop-rl-checkpoint", "version": 1,
//   "model": {"hidden1", "hidden2", "ffn_widths", "feature_width", "time_unit"},
//   "seed": <uint64>,
//   "params": {"actor.<name>" | "critic.<name>": {"shape": [rows, cols],
//                                                 "values": [row-major doubles]}},
//   "trainer": {...}   // optional optimizer/log state for resuming
// }
inline constexpr const char* kCheckpointFormat = "jobshop-rl-checkpoint";
inline constexpr int kCheckpointVersion = 1;

struct Checkpoint {
  ModelConfig model;
  std::uint64_t seed = 0;
  PolicyNetworks nets;
  nlohmann::json trainer;  // null when absent
};

nlohmann::json tensors_to_json(const NamedTensors& tensors, const std::string& prefix);
// Copies values into existing tensors; shapes must match.
void tensors_from_json(const nlohmann::json& params, const NamedTensors& tensors,
                       const std::string& prefix);

std::string serialize_checkpoint(const Checkpoint& checkpoint);
Checkpoint parse_checkpoint(std::string_view text);

void save_checkpoint(const std::string& path, const Checkpoint& checkpoint);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace jsrl
