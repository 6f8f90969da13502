#pragma once

#include <string>

#include "dialbench/agents.hpp"
#include "dialbench/tape.hpp"
#include "dialbench/tensor.hpp"
#include "json.hpp"

namespace dialbench {

/// Tensor <-> JSON ({"shape": [...], "data": [...]}); doubles round-trip
/// exactly (serializer emits shortest exact decimal).
nlohmann::json tensor_to_json(const Tensor& t);
Tensor tensor_from_json(const nlohmann::json& j);

/// Ordered named-tensor list. Loading requires identical names and shapes
/// (same architecture) and bumps the parameter revision.
nlohmann::json params_to_json(const Parameters& params);
void params_from_json(const nlohmann::json& j, Parameters& params);

nlohmann::json agent_config_to_json(const AgentConfig& cfg);
AgentConfig agent_config_from_json(const nlohmann::json& j);

/// Wraps a payload with {"format": ..., "version": 1}; check rejects other
/// formats/versions with ProtocolError.
nlohmann::json versioned(const std::string& format, nlohmann::json payload);
const nlohmann::json& check_versioned(const nlohmann::json& doc,
                                      const std::string& format);

std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& text);

}  // namespace dialbench
