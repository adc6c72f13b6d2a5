#include "mlem/serialize.hpp"

#include <algorithm>
#include <charconv>
#include <numeric>

namespace mlem {

namespace {

std::string format_double(double v) {
  if (std::isnan(v)) return "NaN";
  char buf[32];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

template <typename T>
T require(const Json& j, const char* key) {
  if (!j.is_object() || !j.contains(key)) {
    throw InputError(std::string("missing JSON field '") + key + "'");
  }
  try {
    return j.at(key).get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw InputError(std::string("bad JSON field '") + key + "': " + e.what());
  }
}

}  // namespace

Json matrix_to_json(const Eigen::MatrixXd& M) {
  Json arr = Json::array();
  for (Index i = 0; i < M.rows(); ++i) {
    for (Index j = 0; j < M.cols(); ++j) arr.push_back(M(i, j));
  }
  return arr;
}

Eigen::MatrixXd matrix_from_json(const Json& flat, Index rows, Index cols) {
  if (!flat.is_array() || static_cast<Index>(flat.size()) != rows * cols) {
    throw InputError("matrix array has wrong length");
  }
  Eigen::MatrixXd M(rows, cols);
  for (Index i = 0; i < rows; ++i) {
    for (Index j = 0; j < cols; ++j) {
      const auto& v = flat[static_cast<std::size_t>(i * cols + j)];
      if (!v.is_number()) throw InputError("matrix entries must be numbers");
      M(i, j) = v.get<double>();
    }
  }
  return M;
}

Json model_to_json(const TrainedModel& model) {
  Json j;
  j["variant"] = std::string(to_string(model.variant));
  j["m"] = model.weights.rows();
  j["feature_names"] = model.feature_names;
  j["W"] = matrix_to_json(model.weights);
  return j;
}

TrainedModel model_from_json(const Json& j) {
  const auto variant = parse_model_variant(require<std::string>(j, "variant"));
  const auto m = require<Index>(j, "m");
  if (m < 1) throw InputError("model dimension must be positive");
  auto names = require<std::vector<std::string>>(j, "feature_names");
  if (static_cast<Index>(names.size()) != m) throw InputError("feature_names length differs from m");
  const Eigen::MatrixXd W = matrix_from_json(j.at("W"), m, m);
  if (!W.allFinite()) throw InputError("model weights must be finite");
  return TrainedModel::from_weights(variant, W, std::move(names));
}

Json trace_to_json(const TrainTrace& trace) {
  Json j;
  j["steps_to_converge"] = trace.steps_to_converge;
  j["stop_reason"] = std::string(to_string(trace.stop_reason));
  j["best_objective"] = trace.best_objective;
  j["best_step"] = trace.best_step;
  j["skipped_batches"] = trace.skipped_batches;
  Json objective = Json::array();
  Json best = Json::array();
  for (const auto& r : trace.records) {
    objective.push_back(r.objective);
    best.push_back(r.best);
  }
  j["objective"] = std::move(objective);
  j["best_so_far"] = std::move(best);
  return j;
}

Json importance_to_json(const ImportanceReport& report) {
  Json j;
  j["baseline_score"] = report.baseline;
  j["n_permutations"] = report.n_permutations;
  j["n_pairs"] = report.n_pairs;
  j["seed"] = report.seed;
  j["feature_names"] = report.feature_names;
  Json entries = Json::array();
  for (const auto& e : report.entries) {
    Json je;
    je["name"] = e.name;
    je["k"] = e.k;
    je["l"] = e.l;
    je["interaction"] = e.k != e.l;
    je["importance"] = e.importance;
    je["std"] = e.std_dev;
    je["permutation_scores"] = e.scores;
    entries.push_back(std::move(je));
  }
  j["entries"] = std::move(entries);
  return j;
}

ImportanceReport importance_from_json(const Json& j) {
  ImportanceReport r;
  r.baseline = require<double>(j, "baseline_score");
  r.n_permutations = require<int>(j, "n_permutations");
  r.feature_names = require<std::vector<std::string>>(j, "feature_names");
  if (j.contains("n_pairs")) r.n_pairs = j.at("n_pairs").get<Index>();
  if (j.contains("seed")) r.seed = j.at("seed").get<std::uint64_t>();
  for (const auto& je : require<Json>(j, "entries")) {
    ImportanceEntry e;
    e.name = require<std::string>(je, "name");
    e.k = require<Index>(je, "k");
    e.l = require<Index>(je, "l");
    e.importance = require<double>(je, "importance");
    if (je.contains("std")) e.std_dev = je.at("std").get<double>();
    if (je.contains("permutation_scores")) e.scores = je.at("permutation_scores").get<std::vector<double>>();
    r.entries.push_back(std::move(e));
  }
  return r;
}

std::string importance_csv(const ImportanceReport& report) {
  std::vector<std::size_t> order(report.entries.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return report.entries[a].importance > report.entries[b].importance;
  });
  std::string out = "name,importance,std\n";
  for (std::size_t idx : order) {
    const auto& e = report.entries[idx];
    std::string name = e.name;
    if (name.find_first_of(",\"") != std::string::npos) {
      std::string q = "\"";
      for (char c : name) {
        if (c == '"') q += '"';
        q += c;
      }
      name = q + "\"";
    }
    out += name + "," + format_double(e.importance) + "," + format_double(e.std_dev) + "\n";
  }
  return out;
}

Json ground_truth_to_json(const SyntheticDataset& ds) {
  Json j;
  j["seed"] = ds.config.seed;
  j["n"] = ds.config.n;
  j["m"] = ds.config.m;
  j["d"] = ds.config.d;
  j["noise_level"] = ds.config.noise_level;
  j["feature_names"] = ds.features.feature_names();
  j["W_GT"] = matrix_to_json(ds.ground_truth);
  Json fid;
  fid["max_relative_error"] = ds.embedding.max_relative_error;
  fid["negative_eigenvalue_mass"] = ds.embedding.negative_mass;
  fid["positive_eigenvalues"] = ds.embedding.positive_eigenvalues;
  fid["truncated"] = ds.embedding.truncated;
  j["mds_fidelity"] = std::move(fid);
  return j;
}

std::string dump(const Json& j) { return j.dump(2) + "\n"; }

}  // namespace mlem
