#pragma once

#include <filesystem>

#include <json.hpp>

#include "nff/metadata.hpp"

namespace nff {

inline constexpr int kManifestFormatVersion = 1;

enum class DatasetWriteMode {
  /// Every grid task at full resolution; splits reference rows of those files.
  Full,
  /// Only the training subsets and the held-out tasks.
  Split,
};

nlohmann::json to_json(const GridDatasetSpec& spec);
/// Starts from the stock spec for `name` ("ds1", "ds2", "ds3") and applies
/// any overrides present in `j` (ranges as [lo, hi] keyed by variable name).
GridDatasetSpec grid_spec_from_json(const std::string& name, const nlohmann::json& overrides);
nlohmann::json to_json(const NormalizationRecord& rec, const MetaDataset& names);
NormalizationRecord normalization_from_json(const nlohmann::json& j);

/// Writes task CSVs (input columns, then target columns) and manifest.json
/// into `dir`. Returns the number of task CSVs written.
std::size_t write_generated_dataset(const std::filesystem::path& dir, const GeneratedMetaData& data,
                                    DatasetWriteMode mode);
/// Writes a plain metadataset as a single split named `split`.
std::size_t write_meta_dataset(const std::filesystem::path& dir, const MetaDataset& md, const std::string& split,
                               const nlohmann::json& extra = nlohmann::json::object());

/// Writes train/NNNN.csv and eval/NNNN.csv with a "meta" manifest; empty
/// splits are omitted.
std::size_t write_split_dataset(const std::filesystem::path& dir, const MetaDataset& train, const MetaDataset& eval,
                                const NormalizationRecord& normalization,
                                const nlohmann::json& extra = nlohmann::json::object());

struct LoadedDataset {
  nlohmann::json manifest;
  MetaDataset train;
  MetaDataset eval;
  NormalizationRecord normalization;
};

/// Reads manifest.json and every referenced task CSV. Missing splits load
/// as empty datasets.
LoadedDataset load_dataset(const std::filesystem::path& dir);

}  // namespace nff
