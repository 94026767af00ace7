#pragma once

#include <string>
#include <vector>

#include <json.hpp>

namespace adec::lm {

struct ModelConfig {
  int vocab_size = 64;
  int d_model = 128;
  int n_layers = 2;
  int n_heads = 4;
  int ctx_len = 256;
  int head_hidden = 256;
  std::vector<double> temperature_grid{0.0, 0.2, 0.4, 0.6, 0.8, 1.0};

  int head_dim() const { return d_model / n_heads; }
  int grid_size() const { return static_cast<int>(temperature_grid.size()); }

  /// Throws UsageError naming the first violated invariant.
  void validate() const;

  /// Hash of the fields that shape the base transformer (grid and head excluded).
  std::string base_hash() const;
  std::string hash() const;
};

void validate_grid(const std::vector<double>& grid);

nlohmann::json to_json(const ModelConfig& c);
/// Unknown keys are rejected; missing keys keep their defaults.
ModelConfig model_config_from_json(const nlohmann::json& j);

}  // namespace adec::lm
