#pragma once

#include "mlem/data_model.hpp"

#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace mlem {

/// Per-feature kind declarations, keyed by feature name.
using FeatureSchema = std::map<std::string, FeatureKind>;

/// `features.csv` -> `features.schema.json`.
std::filesystem::path schema_sidecar_path(const std::filesystem::path& csv_path);

FeatureSchema parse_schema_json(std::string_view json_text);

/// Parses the feature CSV. Kinds resolve as: `overrides` first, then the
/// sidecar schema next to `path` (if any), then inference (every non-missing
/// value numeric => ordinal, otherwise nominal). "NaN" and "" are missing.
FeatureTable load_feature_table(const std::filesystem::path& path,
                                const FeatureSchema& overrides = {});

FeatureTable parse_feature_csv(std::string_view text, const FeatureSchema& schema);

std::string format_feature_csv(const FeatureTable& table);
std::string format_schema_json(const FeatureTable& table);

/// Reads either the MLEMREPR binary container or a headerless numeric CSV.
RepresentationSet load_representations(const std::filesystem::path& path);

RepresentationSet parse_representations_binary(std::string_view bytes);
RepresentationSet parse_representations_csv(std::string_view text);

std::string format_representations_binary(const RepresentationSet& reps);
std::string format_representations_csv(const RepresentationSet& reps);

/// RFC-4180-style record splitting (quoted fields, doubled quotes, CRLF).
std::vector<std::vector<std::string>> parse_csv_records(std::string_view text);

std::string read_file(const std::filesystem::path& path);

/// Writes to a sibling temporary file and renames it over `path`.
void write_file_atomic(const std::filesystem::path& path, std::string_view content);

}  // namespace mlem
