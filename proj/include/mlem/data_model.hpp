#pragma once

#include "mlem/common.hpp"

#include <Eigen/Core>

#include <cmath>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace mlem {

enum class FeatureKind { Nominal, Ordinal };

std::string_view to_string(FeatureKind kind);
/// Accepts "nominal" / "ordinal" (case-insensitive).
FeatureKind parse_feature_kind(std::string_view text);

/// A single feature column. Missing entries are stored as NaN; nominal
/// entries hold an index into `categories`.
struct FeatureColumn {
  std::string name;
  FeatureKind kind = FeatureKind::Nominal;
  Eigen::VectorXd values;
  std::vector<std::string> categories;

  static FeatureColumn nominal(std::string name,
                               const std::vector<std::optional<std::string>>& labels);
  static FeatureColumn ordinal(std::string name,
                               const std::vector<std::optional<double>>& values);

  bool missing(Index i) const { return std::isnan(values[i]); }
  Index size() const { return values.size(); }
};

class FeatureTable {
 public:
  FeatureTable(std::vector<std::string> stimulus_ids,
               std::vector<FeatureColumn> features);

  Index num_stimuli() const { return static_cast<Index>(ids_.size()); }
  Index num_features() const { return static_cast<Index>(features_.size()); }

  const std::vector<std::string>& stimulus_ids() const { return ids_; }
  const FeatureColumn& feature(Index k) const { return features_[k]; }
  const std::vector<FeatureColumn>& features() const { return features_; }
  std::vector<std::string> feature_names() const;

  /// Rows `rows` in the given order; categories are kept as-is.
  FeatureTable subset(std::span<const Index> rows) const;

 private:
  std::vector<std::string> ids_;
  std::vector<FeatureColumn> features_;
};

/// n x d matrix of stimulus representations, one row per stimulus.
class RepresentationSet {
 public:
  explicit RepresentationSet(Eigen::MatrixXd matrix);

  Index num_stimuli() const { return matrix_.rows(); }
  Index dim() const { return matrix_.cols(); }
  const Eigen::MatrixXd& matrix() const { return matrix_; }

  RepresentationSet subset(std::span<const Index> rows) const;

 private:
  Eigen::MatrixXd matrix_;
};

/// Distance between stimuli i and j along feature k. Zero when either side is
/// missing.
double feature_distance(const FeatureTable& table, Index k, Index i, Index j);

/// The m-vector of per-feature distances for the pair (i, j).
Eigen::VectorXd feature_distances(const FeatureTable& table, Index i, Index j);

/// Euclidean distance between rows i and j.
double neural_distance(const RepresentationSet& reps, Index i, Index j);

/// Column u of the representation matrix as an n x 1 set.
RepresentationSet univariate_slice(const RepresentationSet& reps, Index u);

}  // namespace mlem
