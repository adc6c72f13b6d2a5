#pragma once

#include "mlem/data_model.hpp"

#include <Eigen/Core>

#include <limits>
#include <span>
#include <vector>

namespace mlem {

struct StimulusPair {
  Index i = 0;
  Index j = 0;
  friend bool operator==(const StimulusPair&, const StimulusPair&) = default;
};

struct PairBatch {
  std::vector<StimulusPair> pairs;
  /// b x m, row t holds the feature distances of pairs[t].
  Eigen::MatrixXd feature_distances;
  Eigen::VectorXd neural_distances;

  Index size() const { return static_cast<Index>(pairs.size()); }
};

/// n(n-1)/2
constexpr Index num_pairs(Index n) { return n * (n - 1) / 2; }

/// The pair at linear position `index` of the row-major enumeration
/// (0,1),(0,2),...,(0,n-1),(1,2),...
StimulusPair pair_at(Index n, Index index);

std::vector<StimulusPair> all_pairs(Index n);

/// `b` distinct pairs drawn uniformly without replacement (all pairs when
/// b >= n(n-1)/2). Pairs satisfy i < j.
std::vector<StimulusPair> sample_pairs(Index n, Index b, Rng& rng);

/// Maps local pair indices through `stimuli` (e.g. a training subset),
/// swapping members to keep i < j.
std::vector<StimulusPair> remap_pairs(std::span<const StimulusPair> pairs,
                                      std::span<const Index> stimuli);

PairBatch assemble_batch(const FeatureTable& table, const RepresentationSet& reps,
                         std::span<const StimulusPair> pairs);

/// Feature distances only (no representations needed).
Eigen::MatrixXd feature_distance_rows(const FeatureTable& table,
                                      std::span<const StimulusPair> pairs);

struct BatchSizeParams {
  int num_probe_batches = 64;
  Index initial_size = 4096;
  double growth = 1.2;
  double std_threshold = 0.01;
  /// Upper bound; the total pair count applies as well.
  Index max_size = std::numeric_limits<Index>::max();
};

struct BatchSizeResult {
  Index batch_size = 0;
  /// False when the cap was returned without meeting the threshold.
  bool threshold_met = true;
  int sizes_tried = 0;
  /// Largest per-correlation standard deviation at the returned size.
  double max_std = 0;
  /// Correlations skipped (zero variance) in more than half the probes.
  Index unstable_skipped = 0;
};

/// Smallest b in b0, ceil(b0 g), ceil(b0 g^2), ... for which the standard
/// deviation across probe batches of every pairwise correlation between the
/// expanded feature-distance columns stays below the threshold.
BatchSizeResult select_batch_size(const FeatureTable& table, const BatchSizeParams& params,
                                  Rng& rng);

}  // namespace mlem
