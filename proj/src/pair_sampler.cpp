#include "mlem/pair_sampler.hpp"

#include "mlem/importance.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_set>

namespace mlem {

namespace {

// Pairs preceding row i in the row-major enumeration.
constexpr Index row_offset(Index n, Index i) { return i * (2 * n - i - 1) / 2; }

}  // namespace

StimulusPair pair_at(Index n, Index index) {
  const double a = 2.0 * static_cast<double>(n) - 1.0;
  auto i = static_cast<Index>(std::floor((a - std::sqrt(a * a - 8.0 * static_cast<double>(index))) / 2.0));
  i = std::clamp<Index>(i, 0, n - 2);
  while (i > 0 && row_offset(n, i) > index) --i;
  while (i + 1 < n - 1 && row_offset(n, i + 1) <= index) ++i;
  return {i, i + 1 + (index - row_offset(n, i))};
}

std::vector<StimulusPair> all_pairs(Index n) {
  std::vector<StimulusPair> out;
  out.reserve(static_cast<std::size_t>(num_pairs(n)));
  for (Index i = 0; i < n; ++i) {
    for (Index j = i + 1; j < n; ++j) out.push_back({i, j});
  }
  return out;
}

std::vector<StimulusPair> sample_pairs(Index n, Index b, Rng& rng) {
  if (n < 2) throw InputError("need at least 2 stimuli to sample pairs");
  if (b < 1) throw InputError("batch size must be positive");
  const Index total = num_pairs(n);
  if (b >= total) return all_pairs(n);

  // Floyd's algorithm: b distinct draws from [0, total).
  std::unordered_set<Index> seen;
  seen.reserve(static_cast<std::size_t>(b) * 2);
  std::vector<StimulusPair> out;
  out.reserve(static_cast<std::size_t>(b));
  for (Index j = total - b; j < total; ++j) {
    std::uniform_int_distribution<Index> dist(0, j);
    Index t = dist(rng);
    if (!seen.insert(t).second) {
      t = j;
      seen.insert(t);
    }
    out.push_back(pair_at(n, t));
  }
  return out;
}

std::vector<StimulusPair> remap_pairs(std::span<const StimulusPair> pairs,
                                      std::span<const Index> stimuli) {
  std::vector<StimulusPair> out;
  out.reserve(pairs.size());
  for (const auto& p : pairs) {
    Index a = stimuli[static_cast<std::size_t>(p.i)];
    Index b = stimuli[static_cast<std::size_t>(p.j)];
    if (a > b) std::swap(a, b);
    out.push_back({a, b});
  }
  return out;
}

Eigen::MatrixXd feature_distance_rows(const FeatureTable& table,
                                      std::span<const StimulusPair> pairs) {
  const auto b = static_cast<Index>(pairs.size());
  Eigen::MatrixXd F(b, table.num_features());
  for (Index k = 0; k < table.num_features(); ++k) {
    const FeatureColumn& f = table.feature(k);
    const bool nominal = f.kind == FeatureKind::Nominal;
    for (Index t = 0; t < b; ++t) {
      const double x = f.values[pairs[static_cast<std::size_t>(t)].i];
      const double y = f.values[pairs[static_cast<std::size_t>(t)].j];
      if (std::isnan(x) || std::isnan(y)) {
        F(t, k) = 0.0;
      } else {
        F(t, k) = nominal ? (x != y ? 1.0 : 0.0) : std::abs(x - y);
      }
    }
  }
  return F;
}

PairBatch assemble_batch(const FeatureTable& table, const RepresentationSet& reps,
                         std::span<const StimulusPair> pairs) {
  if (table.num_stimuli() != reps.num_stimuli()) {
    throw InputError("feature table has " + std::to_string(table.num_stimuli()) +
                     " stimuli but representations have " +
                     std::to_string(reps.num_stimuli()));
  }
  const Index n = table.num_stimuli();
  for (const auto& p : pairs) {
    if (p.i < 0 || p.j >= n || p.i >= p.j) throw InputError("invalid stimulus pair");
  }
  PairBatch batch;
  batch.pairs.assign(pairs.begin(), pairs.end());
  batch.feature_distances = feature_distance_rows(table, pairs);
  batch.neural_distances.resize(batch.size());
  const Eigen::MatrixXd& Y = reps.matrix();
  for (Index t = 0; t < batch.size(); ++t) {
    const auto& p = batch.pairs[static_cast<std::size_t>(t)];
    batch.neural_distances[t] = (Y.row(p.i) - Y.row(p.j)).norm();
  }
  return batch;
}

namespace {

struct ProbeStats {
  double max_std = 0;
  Index unstable_skipped = 0;
  bool stable = true;
};

ProbeStats probe(const FeatureTable& table, Index b, const BatchSizeParams& params,
                 double threshold, Rng& rng) {
  const Index n = table.num_stimuli();
  const Index c = num_interactions(table.num_features());
  Eigen::MatrixXd sum = Eigen::MatrixXd::Zero(c, c);
  Eigen::MatrixXd sumsq = Eigen::MatrixXd::Zero(c, c);
  Eigen::MatrixXi count = Eigen::MatrixXi::Zero(c, c);

  for (int r = 0; r < params.num_probe_batches; ++r) {
    const auto pairs = sample_pairs(n, b, rng);
    Eigen::MatrixXd X = expand_interactions_rows(feature_distance_rows(table, pairs));
    Eigen::Array<bool, Eigen::Dynamic, 1> varying(c);
    for (Index a = 0; a < c; ++a) varying(a) = X.col(a).maxCoeff() > X.col(a).minCoeff();
    X.rowwise() -= X.colwise().mean();
    const Eigen::MatrixXd cov = X.transpose() * X;
    for (Index a = 0; a < c; ++a) {
      if (!varying(a)) continue;
      for (Index e = a + 1; e < c; ++e) {
        if (!varying(e)) continue;
        const double corr = cov(a, e) / std::sqrt(cov(a, a) * cov(e, e));
        sum(a, e) += corr;
        sumsq(a, e) += corr * corr;
        ++count(a, e);
      }
    }
  }

  ProbeStats stats;
  const int p = params.num_probe_batches;
  for (Index a = 0; a < c; ++a) {
    for (Index e = a + 1; e < c; ++e) {
      const int cnt = count(a, e);
      if (2 * (p - cnt) > p) {
        ++stats.unstable_skipped;
        stats.stable = false;
        continue;
      }
      if (cnt < 2) continue;
      const double mean = sum(a, e) / cnt;
      const double var = std::max(0.0, (sumsq(a, e) - cnt * mean * mean) / (cnt - 1));
      const double sd = std::sqrt(var);
      stats.max_std = std::max(stats.max_std, sd);
      if (!(sd < threshold)) stats.stable = false;
    }
  }
  return stats;
}

}  // namespace

BatchSizeResult select_batch_size(const FeatureTable& table, const BatchSizeParams& params,
                                  Rng& rng) {
  if (params.num_probe_batches < 1) throw InputError("num_probe_batches must be positive");
  if (params.initial_size < 1) throw InputError("initial batch size must be positive");
  if (!(params.growth > 1.0)) throw InputError("batch growth factor must exceed 1");
  if (!(params.std_threshold > 0.0)) throw InputError("std threshold must be positive");
  if (params.max_size < 1) throw InputError("batch size cap must be positive");

  const Index cap = std::min(params.max_size, num_pairs(table.num_stimuli()));
  BatchSizeResult result;
  if (std::isinf(params.std_threshold)) {
    result.batch_size = std::min(params.initial_size, cap);
    return result;
  }

  Index previous = 0;
  for (int t = 0;; ++t) {
    const double raw = std::ceil(static_cast<double>(params.initial_size) *
                                 std::pow(params.growth, t));
    const Index b = raw >= static_cast<double>(cap) ? cap : static_cast<Index>(raw);
    if (b == previous) continue;
    previous = b;
    ++result.sizes_tried;
    const ProbeStats stats = probe(table, b, params, params.std_threshold, rng);
    result.batch_size = b;
    result.max_std = stats.max_std;
    result.unstable_skipped = stats.unstable_skipped;
    if (stats.stable) {
      result.threshold_met = true;
      return result;
    }
    if (b == cap) {
      result.threshold_met = false;
      return result;
    }
  }
}

}  // namespace mlem
