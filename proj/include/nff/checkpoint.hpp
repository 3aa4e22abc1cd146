#pragma once

#include <filesystem>
#include <memory>

#include <json.hpp>

#include "nff/models.hpp"

namespace nff {

inline constexpr int kCheckpointFormatVersion = 1;

nlohmann::json to_json(const ActivationSpec& spec);
ActivationSpec activation_from_json(const nlohmann::json& j);
nlohmann::json to_json(const MlpConfig& cfg);
MlpConfig mlp_config_from_json(const nlohmann::json& j);
nlohmann::json to_json(const WgnConfig& cfg);
WgnConfig wgn_config_from_json(const nlohmann::json& j);
nlohmann::json to_json(const ConcatGenConfig& cfg);
ConcatGenConfig concat_gen_config_from_json(const nlohmann::json& j);

/// {format_version, model_kind, config, params:[{name, shape, data}], run}.
/// Doubles are written in shortest round-trip form, so loading is bit-exact.
nlohmann::json checkpoint_json(const Model& model, const nlohmann::json& run = nlohmann::json::object());

struct LoadedCheckpoint {
  std::unique_ptr<Model> model;
  nlohmann::json run;
};

/// Rebuilds the model from its config and fills every parameter by name.
/// Throws DataError on missing, extra or mis-shaped parameters.
LoadedCheckpoint model_from_checkpoint(const nlohmann::json& j);

void save_checkpoint(const std::filesystem::path& path, const Model& model,
                     const nlohmann::json& run = nlohmann::json::object());
LoadedCheckpoint load_checkpoint(const std::filesystem::path& path);

/// Reads a JSON file; throws DataError naming the path on IO or parse failure.
nlohmann::json read_json_file(const std::filesystem::path& path);
void write_json_file(const std::filesystem::path& path, const nlohmann::json& j);

}  // namespace nff
