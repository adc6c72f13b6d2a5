#pragma once

#include "mlem/metric_model.hpp"

#include <Eigen/Core>

#include <functional>
#include <string>
#include <utility>
#include <vector>

namespace mlem {

struct PairBatch;
struct TrainedModel;

/// m(m+1)/2
constexpr Index num_interactions(Index m) { return m * (m + 1) / 2; }

/// Position of (k, l), k <= l, in the order (0,0),(0,1),...,(0,m-1),(1,1),...
constexpr Index interaction_index(Index m, Index k, Index l) {
  return k * m - k * (k - 1) / 2 + (l - k);
}

/// Inverse of interaction_index.
std::pair<Index, Index> interaction_pair(Index m, Index index);

/// Entry (k, l) of the expansion: D^k D^l on the diagonal, 2 D^k D^l off it.
template <typename Derived>
Vector<typename Derived::Scalar> expand_interactions(const Eigen::MatrixBase<Derived>& p) {
  using Scalar = typename Derived::Scalar;
  const Index m = p.size();
  Vector<Scalar> out(num_interactions(m));
  Index t = 0;
  for (Index k = 0; k < m; ++k) {
    out(t++) = p(k) * p(k);
    for (Index l = k + 1; l < m; ++l) out(t++) = Scalar(2) * p(k) * p(l);
  }
  return out;
}

/// Row-wise expansion of a b x m feature-distance matrix.
template <typename Derived>
Matrix<typename Derived::Scalar> expand_interactions_rows(const Eigen::MatrixBase<Derived>& F) {
  using Scalar = typename Derived::Scalar;
  const Index m = F.cols();
  Matrix<Scalar> out(F.rows(), num_interactions(m));
  Index t = 0;
  for (Index k = 0; k < m; ++k) {
    out.col(t++) = F.col(k).cwiseProduct(F.col(k));
    for (Index l = k + 1; l < m; ++l) out.col(t++) = Scalar(2) * F.col(k).cwiseProduct(F.col(l));
  }
  return out;
}

/// Upper-triangle weights in expansion order, so that h_W(P) = f(P . w).
template <typename Derived>
Vector<typename Derived::Scalar> expansion_weights(const Eigen::MatrixBase<Derived>& W) {
  using Scalar = typename Derived::Scalar;
  const Index m = W.rows();
  Vector<Scalar> w(num_interactions(m));
  Index t = 0;
  for (Index k = 0; k < m; ++k) {
    for (Index l = k; l < m; ++l) w(t++) = W(k, l);
  }
  return w;
}

/// The model as a function of expanded inputs. MLEM clamps the radicand at 0.
template <typename DerivedP, typename DerivedW>
typename DerivedP::Scalar h_w(const Eigen::MatrixBase<DerivedP>& P,
                              const Eigen::MatrixBase<DerivedW>& W, ModelVariant variant) {
  using Scalar = typename DerivedP::Scalar;
  if (W.rows() != W.cols() || P.size() != num_interactions(W.rows())) {
    throw InputError("expanded vector does not match weight matrix");
  }
  const Scalar s = P.dot(expansion_weights(W));
  if (variant == ModelVariant::Mlem) {
    using std::sqrt;
    return sqrt(std::max(s, Scalar(0)));
  }
  return s;
}

template <typename DerivedP, typename DerivedW>
Vector<typename DerivedP::Scalar> h_w_rows(const Eigen::MatrixBase<DerivedP>& P,
                                           const Eigen::MatrixBase<DerivedW>& W,
                                           ModelVariant variant) {
  using Scalar = typename DerivedP::Scalar;
  if (W.rows() != W.cols() || P.cols() != num_interactions(W.rows())) {
    throw InputError("expanded matrix does not match weight matrix");
  }
  Vector<Scalar> s = P * expansion_weights(W);
  if (variant == ModelVariant::Mlem) s = s.array().max(Scalar(0)).sqrt();
  return s;
}

/// Display names: feature names on the diagonal, "a × b" for interactions.
std::vector<std::string> interaction_names(const std::vector<std::string>& features);

struct ImportanceEntry {
  std::string name;
  Index k = 0;
  Index l = 0;
  /// mean(baseline - scores)
  double importance = 0;
  /// Standard deviation of (baseline - scores) across permutations.
  double std_dev = 0;
  std::vector<double> scores;
};

struct ImportanceReport {
  double baseline = 0;
  int n_permutations = 0;
  Index n_pairs = 0;
  std::uint64_t seed = 0;
  std::vector<std::string> feature_names;
  std::vector<ImportanceEntry> entries;
};

/// Fills `perm` (initialized to the identity) for permutation r of column k.
using PermutationFn = std::function<void(std::vector<Index>& perm, Index column, int r)>;

/// Permutation importance of every expanded column. Each column is permuted
/// across pair-samples independently of the others; permutation r of column
/// k' is drawn from a stream seeded by (seed, k', r).
ImportanceReport permutation_importance(const TrainedModel& model, const PairBatch& batch,
                                        int n_permutations = 10, std::uint64_t seed = 0);

ImportanceReport permutation_importance(const Matrix<double>& W, ModelVariant variant,
                                        const std::vector<std::string>& feature_names,
                                        const PairBatch& batch, int n_permutations,
                                        const PermutationFn& permute);

double frobenius_distance(const Matrix<double>& W1, const Matrix<double>& W2);

/// Symmetrized hyperbolic weighted Kendall tau. Ranks are 0-based positions
/// in a descending stable sort; tied scores contribute sgn = 0.
double weighted_tau(const Vector<double>& R, const Vector<double>& S);

}  // namespace mlem
