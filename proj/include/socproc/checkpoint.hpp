#pragma once
// Model checkpoints: a binary archive holding the model configuration, the
// standardization statistics the model was trained against, named parameter
// matrices, and a small metric map. Loading restores a model that is
// bit-identical to the one saved.
//
// File layout (version 1):
//   bytes 0..7   magic "SPCKPT01"
//   u64          JSON header length in bytes (little endian)
//   header       UTF-8 JSON: layout_version, config, stats (or null),
//                metrics, params = [{name, rows, cols}, ...]
//   payload      column-major f64 data for each param, in header order

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>

#include <json.hpp>

#include "socproc/datasets.hpp"
#include "socproc/process_model.hpp"

namespace socproc::ckpt {

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Checkpoint {
  // Data-store layout the training samples used; evaluation refuses to pair
  // a checkpoint with a store of a different layout.
  int layout_version = dsets::kLayoutVersion;
  pm::ModelConfig config;
  std::optional<dsets::StandardizationStats> stats;
  std::map<std::string, ad::Mat> parameters;
  std::map<std::string, double> metrics;
};

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& c);
Checkpoint load_checkpoint(const std::filesystem::path& path);

// Copies every named matrix from a model; the inverse of apply_parameters.
std::map<std::string, ad::Mat> extract_parameters(const pm::ProcessModel& model);

// Writes the given matrices into the model's parameters. The name sets must
// match exactly and every shape must agree; anything else is an error.
void apply_parameters(pm::ProcessModel& model,
                      const std::map<std::string, ad::Mat>& parameters);

// JSON conversions shared by the checkpoint header and the run configs.
nlohmann::json model_config_to_json(const pm::ModelConfig& cfg);
pm::ModelConfig model_config_from_json(const nlohmann::json& j);
nlohmann::json stats_to_json(const dsets::StandardizationStats& stats);
dsets::StandardizationStats stats_from_json(const nlohmann::json& j);

}  // namespace socproc::ckpt
