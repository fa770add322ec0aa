#pragma once

#include "json.hpp"

#include "dyhsl/multiscale.hpp"

namespace dyhsl {

void to_json(nlohmann::json& j, const ModelConfig& c);
void from_json(const nlohmann::json& j, ModelConfig& c);

}  // namespace dyhsl
