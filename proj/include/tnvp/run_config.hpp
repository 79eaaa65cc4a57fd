#pragma once

#include <filesystem>
#include <optional>
#include <string>

#include <json.hpp>

#include "tnvp/dataset.hpp"
#include "tnvp/temporal_model.hpp"
#include "tnvp/training.hpp"

namespace tnvp {

struct GeneratorConfig {
  DriftKind kind = DriftKind::GaussianDrift;
  Index stages = 4;
  Index n_per_stage = 256;
  std::uint64_t seed = 0;
};

struct DataConfig {
  std::optional<GeneratorConfig> generator = GeneratorConfig{};
  std::optional<std::filesystem::path> path;  // CSV dataset; exclusive with generator
  bool standardize = false;
};

/// Experiment description read from JSON. Sections: model, train, data, output.
/// Missing keys take the defaults below; unknown keys are rejected.
struct RunConfig {
  ModelSpec model;
  TrainConfig train;
  DataConfig data;
  std::filesystem::path output_directory = "tnvp_run";

  void validate() const;
};

RunConfig run_config_from_json(const nlohmann::json& doc);
nlohmann::json run_config_to_json(const RunConfig& cfg);
RunConfig load_run_config(const std::filesystem::path& path);

/// Builds (or loads) the training data described by `cfg.data`.
StageSequenceDataset materialize_dataset(const RunConfig& cfg);

std::string to_string(MaskStyle style);
std::string to_string(TransitionStructure structure);
std::string to_string(Phases phases);

}  // namespace tnvp
