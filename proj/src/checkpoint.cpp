#include "jsrl/checkpoint.hpp"

#include <fstream>
#include <sstream>

#include "jsrl/errors.hpp"

namespace jsrl {

using nlohmann::json;

nlohmann::json tensors_to_json(const NamedTensors& tensors, const std::string& prefix) {
  json out = json::object();
  for (const auto& [name, t] : tensors) {
    json values = json::array();
    for (double v : t.values()) values.push_back(v);
    out[prefix + name] = {{"shape", {t.rows(), t.cols()}}, {"values", std::move(values)}};
  }
  return out;
}

void tensors_from_json(const nlohmann::json& params, const NamedTensors& tensors,
                       const std::string& prefix) {
  for (const auto& [name, t] : tensors) {
    const std::string key = prefix + name;
    if (!params.contains(key)) throw DataError("checkpoint lacks parameter '" + key + "'");
    const auto& entry = params.at(key);
    const auto shape = entry.at("shape").get<std::vector<int>>();
    if (shape.size() != 2 || shape[0] != t.rows() || shape[1] != t.cols())
      throw DataError("checkpoint parameter '" + key + "' has shape " +
                      entry.at("shape").dump() + ", expected " + t.shape_string());
    const auto& values = entry.at("values");
    if (values.size() != t.size())
      throw DataError("checkpoint parameter '" + key + "' has wrong value count");
    auto dst = ad::Tensor(t).mutable_values();
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] = values[i].get<double>();
  }
}

std::string serialize_checkpoint(const Checkpoint& c) {
  json j;
  j["format"] = kCheckpointFormat;
  j["version"] = kCheckpointVersion;
  j["model"] = {{"hidden1", c.model.hidden1},
                {"hidden2", c.model.hidden2},
                {"ffn_widths", c.model.ffn_widths},
                {"feature_width", c.model.feature_width},
                {"time_unit", c.model.time_unit}};
  j["seed"] = c.seed;
  json params = tensors_to_json(c.nets.actor.named_parameters(), "actor.");
  params.update(tensors_to_json(c.nets.critic.named_parameters(), "critic."));
  j["params"] = std::move(params);
  if (!c.trainer.is_null()) j["trainer"] = c.trainer;
  return j.dump() + "\n";
}

Checkpoint parse_checkpoint(std::string_view text) {
  try {
    const json j = json::parse(text);
    if (j.value("format", "") != kCheckpointFormat)
      throw DataError("not a jobshop-rl checkpoint");
    const int version = j.at("version").get<int>();
    if (version != kCheckpointVersion)
      throw DataError("unsupported checkpoint version " + std::to_string(version));
    Checkpoint c;
    const auto& m = j.at("model");
    c.model.hidden1 = m.at("hidden1").get<int>();
    c.model.hidden2 = m.at("hidden2").get<int>();
    c.model.ffn_widths = m.at("ffn_widths").get<std::vector<int>>();
    c.model.feature_width = m.at("feature_width").get<int>();
    c.model.time_unit = m.at("time_unit").get<double>();
    c.model.validate();
    c.seed = j.at("seed").get<std::uint64_t>();
    c.nets = init_params(c.model, 0);
    tensors_from_json(j.at("params"), c.nets.actor.named_parameters(), "actor.");
    tensors_from_json(j.at("params"), c.nets.critic.named_parameters(), "critic.");
    if (j.contains("trainer")) c.trainer = j.at("trainer");
    return c;
  } catch (const json::exception& e) {
    throw DataError(std::string("malformed checkpoint: ") + e.what());
  } catch (const ConfigError& e) {
    throw DataError(std::string("checkpoint model config invalid: ") + e.what());
  }
}

void save_checkpoint(const std::string& path, const Checkpoint& checkpoint) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write checkpoint '" + path + "'");
  out << serialize_checkpoint(checkpoint);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open checkpoint '" + path + "'");
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return parse_checkpoint(buffer.str());
}

}  // namespace jsrl
