#include "mlem/importance.hpp"

#include "mlem/pair_sampler.hpp"
#include "mlem/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace mlem {

std::pair<Index, Index> interaction_pair(Index m, Index index) {
  if (index < 0 || index >= num_interactions(m)) {
    throw std::out_of_range("interaction index out of range");
  }
  Index k = 0;
  while (k + 1 < m && interaction_index(m, k + 1, k + 1) <= index) ++k;
  return {k, k + (index - interaction_index(m, k, k))};
}

std::vector<std::string> interaction_names(const std::vector<std::string>& features) {
  std::vector<std::string> names;
  const auto m = static_cast<Index>(features.size());
  names.reserve(static_cast<std::size_t>(num_interactions(m)));
  for (std::size_t k = 0; k < features.size(); ++k) {
    names.push_back(features[k]);
    for (std::size_t l = k + 1; l < features.size(); ++l) {
      names.push_back(features[k] + " × " + features[l]);
    }
  }
  return names;
}

ImportanceReport permutation_importance(const Matrix<double>& W, ModelVariant variant,
                                        const std::vector<std::string>& feature_names,
                                        const PairBatch& batch, int n_permutations,
                                        const PermutationFn& permute) {
  const Index m = W.rows();
  if (W.cols() != m || batch.feature_distances.cols() != m) {
    throw InputError("weight matrix does not match batch feature dimension");
  }
  if (static_cast<Index>(feature_names.size()) != m) {
    throw InputError("feature name count does not match weight matrix");
  }
  if (n_permutations < 1) throw InputError("need at least one permutation");
  const Index b = batch.size();
  if (b < 2) throw DegenerateError("importance needs at least 2 pairs");

  const Matrix<double> P = expand_interactions_rows(batch.feature_distances);
  const Vector<double> w = expansion_weights(W);
  const Vector<double>& target = batch.neural_distances;
  const Vector<double> target_ranks = average_ranks(target);

  auto finish = [&](Vector<double> s) {
    if (variant == ModelVariant::Mlem) s = s.array().max(0.0).sqrt();
    return rank_correlation(average_ranks(s), target_ranks);
  };

  ImportanceReport report;
  report.n_permutations = n_permutations;
  report.n_pairs = b;
  report.feature_names = feature_names;
  const Vector<double> base_sum = P * w;
  try {
    report.baseline = finish(base_sum);
  } catch (const DegenerateError&) {
    throw DegenerateError("importance baseline undefined: constant predictions or targets");
  }

  const auto names = interaction_names(feature_names);
  std::vector<Index> perm(static_cast<std::size_t>(b));
  for (Index col = 0; col < P.cols(); ++col) {
    ImportanceEntry entry;
    entry.name = names[static_cast<std::size_t>(col)];
    std::tie(entry.k, entry.l) = interaction_pair(m, col);
    std::vector<double> drops;
    for (int r = 0; r < n_permutations; ++r) {
      std::iota(perm.begin(), perm.end(), Index{0});
      permute(perm, col, r);
      // Only column `col` changes: s' = s + w_col * (P_perm - P).
      Vector<double> s = base_sum;
      for (Index t = 0; t < b; ++t) {
        s(t) += w(col) * (P(perm[static_cast<std::size_t>(t)], col) - P(t, col));
      }
      double score;
      try {
        score = finish(std::move(s));
      } catch (const DegenerateError&) {
        score = 0.0;
      }
      entry.scores.push_back(score);
      drops.push_back(report.baseline - score);
    }
    entry.importance = mean_of(drops);
    double acc = 0;
    for (double d : drops) acc += (d - entry.importance) * (d - entry.importance);
    entry.std_dev = std::sqrt(acc / static_cast<double>(drops.size()));
    report.entries.push_back(std::move(entry));
  }
  return report;
}

ImportanceReport permutation_importance(const TrainedModel& model, const PairBatch& batch,
                                        int n_permutations, std::uint64_t seed) {
  ImportanceReport report = permutation_importance(
      model.weights, model.variant, model.feature_names, batch, n_permutations,
      [seed](std::vector<Index>& perm, Index column, int r) {
        Rng rng(mix_seed(seed, static_cast<std::uint64_t>(column), static_cast<std::uint64_t>(r)));
        std::shuffle(perm.begin(), perm.end(), rng);
      });
  report.seed = seed;
  return report;
}

double frobenius_distance(const Matrix<double>& W1, const Matrix<double>& W2) {
  if (W1.rows() != W2.rows() || W1.cols() != W2.cols()) {
    throw InputError("frobenius distance: dimension mismatch");
  }
  return (W1 - W2).norm();
}

namespace {

// 0-based position in a descending stable sort.
std::vector<Index> descending_positions(const Vector<double>& x) {
  const std::vector<Index> order = descending_order(x);
  std::vector<Index> rank(order.size());
  for (std::size_t p = 0; p < order.size(); ++p) rank[static_cast<std::size_t>(order[p])] = static_cast<Index>(p);
  return rank;
}

int sgn(double v) { return (v > 0) - (v < 0); }

double tau_weighted_by(const Vector<double>& R, const Vector<double>& S,
                       const std::vector<Index>& rank) {
  double num = 0;
  double den = 0;
  const Index n = R.size();
  for (Index i = 0; i < n; ++i) {
    for (Index j = i + 1; j < n; ++j) {
      const double w = 1.0 / static_cast<double>(rank[static_cast<std::size_t>(i)] + 1) +
                       1.0 / static_cast<double>(rank[static_cast<std::size_t>(j)] + 1);
      num += w * sgn(R(i) - R(j)) * sgn(S(i) - S(j));
      den += w;
    }
  }
  return num / den;
}

}  // namespace

double weighted_tau(const Vector<double>& R, const Vector<double>& S) {
  if (R.size() != S.size()) throw InputError("weighted tau: length mismatch");
  if (R.size() < 2) throw InputError("weighted tau: need at least 2 items");
  if (R.maxCoeff() == R.minCoeff() || S.maxCoeff() == S.minCoeff()) {
    throw DegenerateError("weighted tau undefined for all-tied scores");
  }
  const double by_r = tau_weighted_by(R, S, descending_positions(R));
  const double by_s = tau_weighted_by(R, S, descending_positions(S));
  return (by_r + by_s) / 2.0;
}

}  // namespace mlem
