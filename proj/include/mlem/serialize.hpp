#pragma once

#include "mlem/importance.hpp"
#include "mlem/synth.hpp"
#include "mlem/trainer.hpp"

#include "json.hpp"

#include <string>

namespace mlem {

using Json = nlohmann::ordered_json;

Json matrix_to_json(const Eigen::MatrixXd& M);
/// Row-major flat array of m*m entries.
Eigen::MatrixXd matrix_from_json(const Json& flat, Index rows, Index cols);

/// {"variant", "m", "feature_names", "W"} with the normalized weights.
Json model_to_json(const TrainedModel& model);
TrainedModel model_from_json(const Json& j);

Json trace_to_json(const TrainTrace& trace);
Json importance_to_json(const ImportanceReport& report);
ImportanceReport importance_from_json(const Json& j);
/// name,importance,std sorted by importance (descending, stable).
std::string importance_csv(const ImportanceReport& report);

Json ground_truth_to_json(const SyntheticDataset& ds);

/// Pretty-printed with a trailing newline.
std::string dump(const Json& j);

}  // namespace mlem
