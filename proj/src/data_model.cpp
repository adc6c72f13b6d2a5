#include "mlem/data_model.hpp"

#include <algorithm>
#include <cctype>
#include <limits>
#include <map>
#include <set>

namespace mlem {

namespace {

constexpr double kMissing = std::numeric_limits<double>::quiet_NaN();

void check_index(Index i, Index n, const char* what) {
  if (i < 0 || i >= n) {
    throw std::out_of_range(std::string(what) + " index " + std::to_string(i) +
                            " out of range [0, " + std::to_string(n) + ")");
  }
}

}  // namespace

std::string_view to_string(FeatureKind kind) {
  return kind == FeatureKind::Nominal ? "nominal" : "ordinal";
}

FeatureKind parse_feature_kind(std::string_view text) {
  std::string lower(text);
  std::transform(lower.begin(), lower.end(), lower.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  if (lower == "nominal") return FeatureKind::Nominal;
  if (lower == "ordinal") return FeatureKind::Ordinal;
  throw InputError("unknown feature kind '" + std::string(text) +
                   "' (expected nominal or ordinal)");
}

FeatureColumn FeatureColumn::nominal(
    std::string name, const std::vector<std::optional<std::string>>& labels) {
  FeatureColumn col;
  col.name = std::move(name);
  col.kind = FeatureKind::Nominal;
  col.values.resize(static_cast<Index>(labels.size()));
  std::map<std::string, Index> codes;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (!labels[i]) {
      col.values[static_cast<Index>(i)] = kMissing;
      continue;
    }
    auto [it, inserted] =
        codes.try_emplace(*labels[i], static_cast<Index>(col.categories.size()));
    if (inserted) col.categories.push_back(*labels[i]);
    col.values[static_cast<Index>(i)] = static_cast<double>(it->second);
  }
  return col;
}

FeatureColumn FeatureColumn::ordinal(std::string name,
                                     const std::vector<std::optional<double>>& values) {
  FeatureColumn col;
  col.name = std::move(name);
  col.kind = FeatureKind::Ordinal;
  col.values.resize(static_cast<Index>(values.size()));
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (values[i] && !std::isfinite(*values[i])) {
      throw InputError("ordinal feature '" + col.name + "' has a non-finite value");
    }
    col.values[static_cast<Index>(i)] = values[i] ? *values[i] : kMissing;
  }
  return col;
}

FeatureTable::FeatureTable(std::vector<std::string> stimulus_ids,
                           std::vector<FeatureColumn> features)
    : ids_(std::move(stimulus_ids)), features_(std::move(features)) {
  const auto n = static_cast<Index>(ids_.size());
  if (n < 2) throw InputError("feature table needs at least 2 stimuli");
  if (features_.empty()) throw InputError("feature table needs at least 1 feature");
  std::set<std::string> names;
  for (const auto& f : features_) {
    if (!names.insert(f.name).second) {
      throw InputError("duplicate feature name '" + f.name + "'");
    }
    if (f.size() != n) {
      throw InputError("feature '" + f.name + "' has " + std::to_string(f.size()) +
                       " entries, expected " + std::to_string(n));
    }
    if (f.kind == FeatureKind::Ordinal) {
      for (Index i = 0; i < n; ++i) {
        if (std::isinf(f.values[i])) {
          throw InputError("ordinal feature '" + f.name + "' has a non-finite value");
        }
      }
    }
  }
}

std::vector<std::string> FeatureTable::feature_names() const {
  std::vector<std::string> names;
  names.reserve(features_.size());
  for (const auto& f : features_) names.push_back(f.name);
  return names;
}

FeatureTable FeatureTable::subset(std::span<const Index> rows) const {
  std::vector<std::string> ids;
  ids.reserve(rows.size());
  for (Index r : rows) {
    check_index(r, num_stimuli(), "stimulus");
    ids.push_back(ids_[r]);
  }
  std::vector<FeatureColumn> cols = features_;
  for (std::size_t k = 0; k < cols.size(); ++k) {
    Eigen::VectorXd v(static_cast<Index>(rows.size()));
    for (std::size_t t = 0; t < rows.size(); ++t) {
      v[static_cast<Index>(t)] = features_[k].values[rows[t]];
    }
    cols[k].values = std::move(v);
  }
  return FeatureTable(std::move(ids), std::move(cols));
}

RepresentationSet::RepresentationSet(Eigen::MatrixXd matrix) : matrix_(std::move(matrix)) {
  if (matrix_.cols() < 1) throw InputError("representations need at least 1 column");
  if (matrix_.rows() < 1) throw InputError("representations need at least 1 row");
  if (!matrix_.allFinite()) throw InputError("representations contain non-finite values");
}

RepresentationSet RepresentationSet::subset(std::span<const Index> rows) const {
  Eigen::MatrixXd out(static_cast<Index>(rows.size()), matrix_.cols());
  for (std::size_t t = 0; t < rows.size(); ++t) {
    check_index(rows[t], num_stimuli(), "stimulus");
    out.row(static_cast<Index>(t)) = matrix_.row(rows[t]);
  }
  return RepresentationSet(std::move(out));
}

double feature_distance(const FeatureTable& table, Index k, Index i, Index j) {
  check_index(k, table.num_features(), "feature");
  check_index(i, table.num_stimuli(), "stimulus");
  check_index(j, table.num_stimuli(), "stimulus");
  const FeatureColumn& f = table.feature(k);
  const double a = f.values[i];
  const double b = f.values[j];
  if (std::isnan(a) || std::isnan(b)) return 0.0;
  if (f.kind == FeatureKind::Nominal) return a != b ? 1.0 : 0.0;
  return std::abs(a - b);
}

Eigen::VectorXd feature_distances(const FeatureTable& table, Index i, Index j) {
  Eigen::VectorXd p(table.num_features());
  for (Index k = 0; k < p.size(); ++k) p[k] = feature_distance(table, k, i, j);
  return p;
}

double neural_distance(const RepresentationSet& reps, Index i, Index j) {
  check_index(i, reps.num_stimuli(), "stimulus");
  check_index(j, reps.num_stimuli(), "stimulus");
  return (reps.matrix().row(i) - reps.matrix().row(j)).norm();
}

RepresentationSet univariate_slice(const RepresentationSet& reps, Index u) {
  check_index(u, reps.dim(), "unit");
  return RepresentationSet(reps.matrix().col(u));
}

}  // namespace mlem
