#include "adec/lm/config.hpp"

#include <cmath>
#include <set>

#include "adec/errors.hpp"
#include "adec/util/hash.hpp"

namespace adec::lm {

void validate_grid(const std::vector<double>& grid) {
  if (grid.size() < 2) throw UsageError("temperature_grid needs at least 2 entries");
  for (std::size_t i = 0; i < grid.size(); ++i) {
    if (!std::isfinite(grid[i]) || grid[i] < 0.0 || grid[i] > 2.0) {
      throw UsageError("temperature_grid values must lie in [0, 2]");
    }
    if (i > 0 && !(grid[i] > grid[i - 1])) {
      throw UsageError("temperature_grid must be strictly increasing");
    }
  }
}

void ModelConfig::validate() const {
  auto positive = [](int v, const char* name) {
    if (v <= 0) throw UsageError(std::string(name) + " must be positive");
  };
  positive(vocab_size, "vocab_size");
  positive(d_model, "d_model");
  positive(n_layers, "n_layers");
  positive(n_heads, "n_heads");
  positive(ctx_len, "ctx_len");
  positive(head_hidden, "head_hidden");
  if (d_model % n_heads != 0) throw UsageError("d_model must be divisible by n_heads");
  validate_grid(temperature_grid);
}

nlohmann::json to_json(const ModelConfig& c) {
  return nlohmann::json{{"vocab_size", c.vocab_size}, {"d_model", c.d_model},
                        {"n_layers", c.n_layers},     {"n_heads", c.n_heads},
                        {"ctx_len", c.ctx_len},       {"head_hidden", c.head_hidden},
                        {"temperature_grid", c.temperature_grid}};
}

std::string ModelConfig::base_hash() const {
  nlohmann::json j = to_json(*this);
  j.erase("temperature_grid");
  j.erase("head_hidden");
  return hex64(fnv1a64(j.dump()));
}

std::string ModelConfig::hash() const { return hex64(fnv1a64(to_json(*this).dump())); }

ModelConfig model_config_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw UsageError("model config must be an object");
  static const std::set<std::string> known{"vocab_size", "d_model", "n_layers", "n_heads",
                                           "ctx_len",    "head_hidden", "temperature_grid"};
  std::string bad;
  for (const auto& [k, _] : j.items()) {
    if (!known.count(k)) bad += (bad.empty() ? "" : ", ") + k;
  }
  if (!bad.empty()) throw UsageError("unknown model config keys: " + bad);
  ModelConfig c;
  try {
    if (j.contains("vocab_size")) c.vocab_size = j.at("vocab_size").get<int>();
    if (j.contains("d_model")) c.d_model = j.at("d_model").get<int>();
    if (j.contains("n_layers")) c.n_layers = j.at("n_layers").get<int>();
    if (j.contains("n_heads")) c.n_heads = j.at("n_heads").get<int>();
    if (j.contains("ctx_len")) c.ctx_len = j.at("ctx_len").get<int>();
    if (j.contains("head_hidden")) c.head_hidden = j.at("head_hidden").get<int>();
    if (j.contains("temperature_grid")) c.temperature_grid = j.at("temperature_grid").get<std::vector<double>>();
  } catch (const nlohmann::json::exception& e) {
    throw UsageError(std::string("model config: ") + e.what());
  }
  c.validate();
  return c;
}

}  // namespace adec::lm
