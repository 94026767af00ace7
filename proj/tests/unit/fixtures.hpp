#pragma once

#include <string>

#include "adec/lm/transformer.hpp"
#include "model_fixtures.hpp"

namespace fixtures {

inline std::string golden_path(const std::string& name) { return std::string(ADEC_GOLDEN_DIR) + "/" + name; }

}  // namespace fixtures
