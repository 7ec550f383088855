#pragma once

// Checkpoint file layout (little-endian):
//
//   "MGMNCKPT"            8 bytes
//   format version        uint32
//   header length         uint64
//   header                JSON: {"format_version", "config", "tensors":
//                         [{"name", "shape": [rows, cols], "offset"}], "extra"}
//   payload               float64 values, row-major per tensor, at `offset`
//                         (counted in doubles from the payload start)

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "mgmn/model.hpp"

namespace mgmn {

inline constexpr std::uint32_t kCheckpointFormatVersion = 1;

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

nlohmann::json to_json(const ModelConfig& config);
/// Missing keys keep their defaults; unknown enum strings throw ConfigError.
ModelConfig model_config_from_json(const nlohmann::json& j, ModelConfig base = {});

struct Checkpoint {
  ModelConfig config;
  std::vector<std::pair<std::string, Matrix>> tensors;
  nlohmann::json extra = nlohmann::json::object();
};

void write_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint);
Checkpoint read_checkpoint(const std::filesystem::path& path);

/// Model parameters plus optional extra tensors (e.g. optimiser moments).
Checkpoint make_checkpoint(const Model& model);
void save_model(const std::filesystem::path& path, const Model& model);
/// Rebuilds the model from the stored config and copies every parameter.
Model load_model(const std::filesystem::path& path);
/// Copies stored values into an existing model with the same layout.
void restore_params(const Checkpoint& checkpoint, Model& model);

}  // namespace mgmn
