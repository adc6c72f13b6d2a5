#pragma once

#include "mlem/data_model.hpp"

#include <Eigen/Core>

#include <cstdint>

namespace mlem {

struct SynthConfig {
  Index n = 256;
  Index m = 16;
  Index d = 768;
  double noise_level = 0.0;
  std::uint64_t seed = 0;

  void validate() const;
};

/// Random SPD matrix G G^T + 1e-3 m I (G standard normal), scaled to unit
/// Frobenius norm.
Eigen::MatrixXd make_spd(Index m, Rng& rng);

/// Nominal A/B features, each label with probability 1/2. Features are named
/// f1..fm, stimuli s0..s{n-1}.
FeatureTable sample_binary_features(Index n, Index m, Rng& rng);

/// D(i, j) = sqrt(p_ij^T W p_ij) over the table's feature distances.
class GroundTruthDistances {
 public:
  GroundTruthDistances(const FeatureTable& table, Eigen::MatrixXd weights);

  double operator()(Index i, Index j) const;
  /// Full symmetric n x n matrix.
  Eigen::MatrixXd matrix() const;
  const Eigen::MatrixXd& weights() const { return weights_; }

 private:
  const FeatureTable* table_;
  Eigen::MatrixXd weights_;
};

struct MdsEmbedding {
  Eigen::MatrixXd coordinates;
  Index positive_eigenvalues = 0;
  /// More positive eigenvalues than target dimensions.
  bool truncated = false;
  /// Sum of |negative eigenvalues| / sum of |eigenvalues|; 0 for Euclidean input.
  double negative_mass = 0;
  /// max over pairs with D_ij > 0 of |embedded - D_ij| / D_ij.
  double max_relative_error = 0;
};

/// Torgerson scaling: B = -1/2 J D^2 J, keep positive eigenvalues in
/// descending order, pad with zero columns up to `d`.
MdsEmbedding classical_mds(const Eigen::MatrixXd& D, Index d);

/// Y + level * diag(sigma) E with sigma the per-column sample standard
/// deviation (n - 1 denominator) and E standard normal.
Eigen::MatrixXd add_noise(const Eigen::MatrixXd& Y, double level, Rng& rng);

struct SyntheticDataset {
  SynthConfig config;
  FeatureTable features;
  RepresentationSet representations;
  Eigen::MatrixXd ground_truth;
  MdsEmbedding embedding;
};

SyntheticDataset generate_dataset(const SynthConfig& config);

/// Same pipeline with a caller-supplied ground-truth metric (PSD suffices).
SyntheticDataset generate_dataset(const SynthConfig& config, const Eigen::MatrixXd& ground_truth);

/// Same pipeline with caller-supplied features and metric.
SyntheticDataset generate_dataset(const SynthConfig& config, FeatureTable features,
                                  const Eigen::MatrixXd& ground_truth);

}  // namespace mlem
