#include "mlem/synth.hpp"

#include "mlem/pair_sampler.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>
#include <optional>

namespace mlem {

void SynthConfig::validate() const {
  if (n < 2) throw InputError("synthetic n must be at least 2");
  if (m < 1) throw InputError("synthetic m must be at least 1");
  if (d < 1) throw InputError("synthetic d must be at least 1");
  if (!(noise_level >= 0) || !std::isfinite(noise_level)) {
    throw InputError("noise level must be a finite nonnegative number");
  }
}

Eigen::MatrixXd make_spd(Index m, Rng& rng) {
  if (m < 1) throw InputError("make_spd: m must be positive");
  std::normal_distribution<double> normal;
  Eigen::MatrixXd G(m, m);
  for (Index i = 0; i < m; ++i) {
    for (Index j = 0; j < m; ++j) G(i, j) = normal(rng);
  }
  Eigen::MatrixXd W = G * G.transpose();
  W = (W + W.transpose()) / 2.0;
  W.diagonal().array() += 1e-3 * static_cast<double>(m);
  return W / W.norm();
}

FeatureTable sample_binary_features(Index n, Index m, Rng& rng) {
  std::bernoulli_distribution coin(0.5);
  std::vector<std::string> ids;
  for (Index i = 0; i < n; ++i) ids.push_back("s" + std::to_string(i));
  std::vector<FeatureColumn> cols;
  for (Index k = 0; k < m; ++k) {
    std::vector<std::optional<std::string>> labels;
    labels.reserve(static_cast<std::size_t>(n));
    for (Index i = 0; i < n; ++i) labels.emplace_back(coin(rng) ? "A" : "B");
    auto col = FeatureColumn::nominal("f" + std::to_string(k + 1), labels);
    // Fixed code assignment regardless of which label appears first.
    for (Index i = 0; i < n; ++i) col.values[i] = *labels[static_cast<std::size_t>(i)] == "A" ? 0.0 : 1.0;
    col.categories = {"A", "B"};
    cols.push_back(std::move(col));
  }
  return FeatureTable(std::move(ids), std::move(cols));
}

GroundTruthDistances::GroundTruthDistances(const FeatureTable& table, Eigen::MatrixXd weights)
    : table_(&table), weights_(std::move(weights)) {
  if (weights_.rows() != table.num_features() || weights_.cols() != table.num_features()) {
    throw InputError("ground-truth weights do not match feature count");
  }
}

double GroundTruthDistances::operator()(Index i, Index j) const {
  const Eigen::VectorXd p = feature_distances(*table_, i, j);
  return std::sqrt(std::max(0.0, p.dot(weights_ * p)));
}

Eigen::MatrixXd GroundTruthDistances::matrix() const {
  const Index n = table_->num_stimuli();
  const auto pairs = all_pairs(n);
  const Eigen::MatrixXd F = feature_distance_rows(*table_, pairs);
  const Eigen::VectorXd q = ((F * weights_).array() * F.array()).rowwise().sum();
  Eigen::MatrixXd D = Eigen::MatrixXd::Zero(n, n);
  for (std::size_t t = 0; t < pairs.size(); ++t) {
    const double v = std::sqrt(std::max(0.0, q(static_cast<Index>(t))));
    D(pairs[t].i, pairs[t].j) = v;
    D(pairs[t].j, pairs[t].i) = v;
  }
  return D;
}

MdsEmbedding classical_mds(const Eigen::MatrixXd& D, Index d) {
  const Index n = D.rows();
  if (D.cols() != n) throw InputError("distance matrix must be square");
  if (d < 1) throw InputError("embedding dimension must be positive");

  // Double centering of squared distances.
  const Eigen::MatrixXd D2 = D.cwiseProduct(D);
  const Eigen::VectorXd row_mean = D2.rowwise().mean();
  const double grand_mean = D2.mean();
  Eigen::MatrixXd B = -0.5 * ((D2.colwise() - row_mean).rowwise() - row_mean.transpose());
  B.array() -= 0.5 * grand_mean;
  B = (B + B.transpose()) / 2.0;

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(B);
  if (eig.info() != Eigen::Success) throw NumericalError("MDS eigendecomposition failed");
  // Ascending order from Eigen.
  const Eigen::VectorXd& vals = eig.eigenvalues();
  const double scale = std::max(vals.cwiseAbs().maxCoeff(), 1e-300);
  const double tol = scale * 1e-10 * static_cast<double>(n);

  MdsEmbedding out;
  out.coordinates = Eigen::MatrixXd::Zero(n, d);
  double neg = 0;
  for (Index t = 0; t < n; ++t) {
    if (vals(t) < 0) neg += -vals(t);
  }
  const double total = vals.cwiseAbs().sum();
  out.negative_mass = total > 0 ? neg / total : 0.0;

  Index col = 0;
  for (Index t = n - 1; t >= 0; --t) {
    if (!(vals(t) > tol)) break;
    ++out.positive_eigenvalues;
    if (col < d) {
      out.coordinates.col(col++) = eig.eigenvectors().col(t) * std::sqrt(vals(t));
    }
  }
  out.truncated = out.positive_eigenvalues > d;

  double worst = 0;
  for (Index i = 0; i < n; ++i) {
    for (Index j = i + 1; j < n; ++j) {
      if (!(D(i, j) > 0)) continue;
      const double e = (out.coordinates.row(i) - out.coordinates.row(j)).norm();
      worst = std::max(worst, std::abs(e - D(i, j)) / D(i, j));
    }
  }
  out.max_relative_error = worst;
  return out;
}

Eigen::MatrixXd add_noise(const Eigen::MatrixXd& Y, double level, Rng& rng) {
  if (!(level >= 0)) throw InputError("noise level must be nonnegative");
  if (level == 0.0) return Y;
  const Index n = Y.rows();
  Eigen::MatrixXd out = Y;
  std::normal_distribution<double> normal;
  for (Index j = 0; j < Y.cols(); ++j) {
    const double mu = Y.col(j).mean();
    const double sigma =
        n > 1 ? std::sqrt((Y.col(j).array() - mu).square().sum() / static_cast<double>(n - 1)) : 0.0;
    for (Index i = 0; i < n; ++i) out(i, j) += level * sigma * normal(rng);
  }
  return out;
}

SyntheticDataset generate_dataset(const SynthConfig& config) {
  config.validate();
  Rng rng(config.seed);
  FeatureTable features = sample_binary_features(config.n, config.m, rng);
  Eigen::MatrixXd W = make_spd(config.m, rng);
  SyntheticDataset ds{config, std::move(features), RepresentationSet(Eigen::MatrixXd::Zero(1, 1)),
                      W, {}};
  const Eigen::MatrixXd D = GroundTruthDistances(ds.features, ds.ground_truth).matrix();
  ds.embedding = classical_mds(D, config.d);
  ds.representations = RepresentationSet(add_noise(ds.embedding.coordinates, config.noise_level, rng));
  return ds;
}

SyntheticDataset generate_dataset(const SynthConfig& config, const Eigen::MatrixXd& ground_truth) {
  config.validate();
  Rng rng(config.seed);
  FeatureTable features = sample_binary_features(config.n, config.m, rng);
  return generate_dataset(config, std::move(features), ground_truth);
}

SyntheticDataset generate_dataset(const SynthConfig& config, FeatureTable features,
                                  const Eigen::MatrixXd& ground_truth) {
  config.validate();
  if (features.num_stimuli() != config.n || features.num_features() != config.m) {
    throw InputError("supplied features do not match the synthetic configuration");
  }
  Rng rng(mix_seed(config.seed, 5));
  SyntheticDataset ds{config, std::move(features),
                      RepresentationSet(Eigen::MatrixXd::Zero(1, 1)), ground_truth, {}};
  const Eigen::MatrixXd D = GroundTruthDistances(ds.features, ds.ground_truth).matrix();
  ds.embedding = classical_mds(D, config.d);
  ds.representations = RepresentationSet(add_noise(ds.embedding.coordinates, config.noise_level, rng));
  return ds;
}

}  // namespace mlem
