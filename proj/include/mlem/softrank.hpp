#pragma once

// Exact and differentiable rank correlation.
//
// The soft rank of x is the Euclidean projection of x / eps onto the
// permutahedron spanned by (n, n-1, ..., 1). After sorting x in descending
// order the projection reduces to one isotonic regression, solved in linear
// time by pool-adjacent-violators. Larger inputs receive larger ranks.

#include "mlem/common.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

namespace mlem {

template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

struct SoftRankConfig {
  double regularization = 1.0;
};

template <typename Scalar>
struct IsotonicFit {
  Vector<Scalar> solution;
  /// Start offsets of the pooled blocks, followed by n.
  std::vector<Index> block_bounds;
};

/// Projection of y onto the nondecreasing cone (pool-adjacent-violators).
template <typename Derived>
IsotonicFit<typename Derived::Scalar> isotonic_fit(const Eigen::MatrixBase<Derived>& y) {
  using Scalar = typename Derived::Scalar;
  const Index n = y.size();
  std::vector<Scalar> sums;
  std::vector<Index> counts;
  sums.reserve(static_cast<std::size_t>(n));
  counts.reserve(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) {
    sums.push_back(y(i));
    counts.push_back(1);
    // Merge while the previous block mean exceeds the last one.
    while (sums.size() > 1) {
      const std::size_t last = sums.size() - 1;
      const Scalar prev_mean = sums[last - 1] / static_cast<Scalar>(counts[last - 1]);
      const Scalar last_mean = sums[last] / static_cast<Scalar>(counts[last]);
      if (!(prev_mean > last_mean)) break;
      sums[last - 1] += sums[last];
      counts[last - 1] += counts[last];
      sums.pop_back();
      counts.pop_back();
    }
  }

  IsotonicFit<Scalar> fit;
  fit.solution.resize(n);
  fit.block_bounds.reserve(sums.size() + 1);
  Index start = 0;
  for (std::size_t b = 0; b < sums.size(); ++b) {
    fit.block_bounds.push_back(start);
    const Scalar mean = sums[b] / static_cast<Scalar>(counts[b]);
    fit.solution.segment(start, counts[b]).setConstant(mean);
    start += counts[b];
  }
  fit.block_bounds.push_back(n);
  return fit;
}

template <typename Derived>
Vector<typename Derived::Scalar> isotonic_regression(const Eigen::MatrixBase<Derived>& y) {
  return isotonic_fit(y).solution;
}

/// Replaces each block of `v` (bounds as in IsotonicFit) with its mean.
template <typename Scalar>
void average_blocks(Vector<Scalar>& v, const std::vector<Index>& bounds) {
  for (std::size_t b = 0; b + 1 < bounds.size(); ++b) {
    const Index len = bounds[b + 1] - bounds[b];
    auto seg = v.segment(bounds[b], len);
    seg.setConstant(seg.sum() / static_cast<Scalar>(len));
  }
}

/// Indices sorting x in descending order; ties keep index order.
template <typename Derived>
std::vector<Index> descending_order(const Eigen::MatrixBase<Derived>& x) {
  std::vector<Index> order(static_cast<std::size_t>(x.size()));
  std::iota(order.begin(), order.end(), Index{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](Index a, Index b) { return x(a) > x(b); });
  return order;
}

/// Everything needed to evaluate the soft rank and its pullback.
template <typename Scalar>
struct SoftRankState {
  Vector<Scalar> ranks;
  std::vector<Index> order;
  std::vector<Index> block_bounds;
  Scalar inv_eps;
};

template <typename Derived>
SoftRankState<typename Derived::Scalar> soft_rank_state(const Eigen::MatrixBase<Derived>& x,
                                                        const SoftRankConfig& cfg) {
  using Scalar = typename Derived::Scalar;
  const Index n = x.size();
  SoftRankState<Scalar> st;
  st.inv_eps = Scalar(1) / static_cast<Scalar>(cfg.regularization);
  st.order = descending_order(x);

  // u = sorted(x / eps) - (n, ..., 1); the decreasing isotonic fit of u is
  // minus the nondecreasing fit of -u.
  Vector<Scalar> neg_u(n);
  for (Index i = 0; i < n; ++i) {
    neg_u(i) = static_cast<Scalar>(n - i) - x(st.order[static_cast<std::size_t>(i)]) * st.inv_eps;
  }
  IsotonicFit<Scalar> fit = isotonic_fit(neg_u);
  st.block_bounds = std::move(fit.block_bounds);

  st.ranks.resize(n);
  for (Index i = 0; i < n; ++i) {
    const Index src = st.order[static_cast<std::size_t>(i)];
    st.ranks(src) = x(src) * st.inv_eps + fit.solution(i);
  }
  return st;
}

/// Differentiable surrogate of the ranks 1..n.
template <typename Derived>
Vector<typename Derived::Scalar> soft_rank(const Eigen::MatrixBase<Derived>& x,
                                           const SoftRankConfig& cfg = {}) {
  return soft_rank_state(x, cfg).ranks;
}

/// Vector-Jacobian product of soft_rank at the state's input.
template <typename Scalar, typename Derived>
Vector<Scalar> soft_rank_pullback(const SoftRankState<Scalar>& st,
                                  const Eigen::MatrixBase<Derived>& upstream) {
  const Index n = upstream.size();
  Vector<Scalar> sorted(n);
  for (Index i = 0; i < n; ++i) sorted(i) = upstream(st.order[static_cast<std::size_t>(i)]);
  Vector<Scalar> pooled = sorted;
  average_blocks(pooled, st.block_bounds);
  Vector<Scalar> out(n);
  for (Index i = 0; i < n; ++i) {
    out(st.order[static_cast<std::size_t>(i)]) = (sorted(i) - pooled(i)) * st.inv_eps;
  }
  return out;
}

template <typename DerivedX, typename DerivedG>
Vector<typename DerivedX::Scalar> soft_rank_pullback(const Eigen::MatrixBase<DerivedX>& x,
                                                     const SoftRankConfig& cfg,
                                                     const Eigen::MatrixBase<DerivedG>& upstream) {
  return soft_rank_pullback(soft_rank_state(x, cfg), upstream);
}

/// 1-based ranks with ties replaced by their average rank.
template <typename Derived>
Vector<typename Derived::Scalar> average_ranks(const Eigen::MatrixBase<Derived>& x) {
  using Scalar = typename Derived::Scalar;
  const Index n = x.size();
  std::vector<Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Index{0});
  std::stable_sort(order.begin(), order.end(), [&](Index a, Index b) { return x(a) < x(b); });
  Vector<Scalar> ranks(n);
  Index i = 0;
  while (i < n) {
    Index j = i + 1;
    while (j < n && x(order[static_cast<std::size_t>(j)]) == x(order[static_cast<std::size_t>(i)])) ++j;
    // Positions i..j-1 share ranks i+1..j.
    const Scalar avg = static_cast<Scalar>(i + 1 + j) / Scalar(2);
    for (Index t = i; t < j; ++t) ranks(order[static_cast<std::size_t>(t)]) = avg;
    i = j;
  }
  return ranks;
}

template <typename DerivedA, typename DerivedB>
typename DerivedA::Scalar pearson(const Eigen::MatrixBase<DerivedA>& a,
                                  const Eigen::MatrixBase<DerivedB>& b) {
  using Scalar = typename DerivedA::Scalar;
  const Vector<Scalar> ac = a.array() - a.mean();
  const Vector<Scalar> bc = b.array() - b.mean();
  const Scalar na = ac.norm();
  const Scalar nb = bc.norm();
  if (na == Scalar(0) || nb == Scalar(0)) {
    throw DegenerateError("correlation undefined for a constant vector");
  }
  const Scalar r = ac.dot(bc) / (na * nb);
  return std::clamp(r, Scalar(-1), Scalar(1));
}

__extension__ typedef __int128 RankSum;

/// Pearson correlation of two midrank vectors (entries are multiples of 1/2).
/// Sums run over doubled ranks in 128-bit integers, so the only rounding is
/// in the final square root and division.
template <typename DerivedA, typename DerivedB>
typename DerivedA::Scalar rank_correlation(const Eigen::MatrixBase<DerivedA>& ra,
                                           const Eigen::MatrixBase<DerivedB>& rb) {
  using Scalar = typename DerivedA::Scalar;
  using std::llround;
  using std::sqrt;
  RankSum sa = 0, sb = 0, saa = 0, sbb = 0, sab = 0;
  for (Index i = 0; i < ra.size(); ++i) {
    const RankSum a = llround(Scalar(2) * ra(i));
    const RankSum b = llround(Scalar(2) * rb(i));
    sa += a;
    sb += b;
    saa += a * a;
    sbb += b * b;
    sab += a * b;
  }
  const RankSum n = ra.size();
  const RankSum cov = n * sab - sa * sb;
  const RankSum va = n * saa - sa * sa;
  const RankSum vb = n * sbb - sb * sb;
  if (va == 0 || vb == 0) throw DegenerateError("correlation undefined for a constant vector");
  const Scalar r = static_cast<Scalar>(cov) / sqrt(static_cast<Scalar>(va) * static_cast<Scalar>(vb));
  return std::clamp(r, Scalar(-1), Scalar(1));
}

/// Spearman correlation with midranks for ties.
template <typename DerivedA, typename DerivedB>
typename DerivedA::Scalar spearman_exact(const Eigen::MatrixBase<DerivedA>& a,
                                         const Eigen::MatrixBase<DerivedB>& b) {
  if (a.size() != b.size()) throw InputError("spearman: length mismatch");
  if (a.size() < 2) throw InputError("spearman: need at least 2 observations");
  return rank_correlation(average_ranks(a), average_ranks(b));
}

template <typename Scalar>
struct SoftSpearman {
  Scalar value = 0;
  Vector<Scalar> gradient;
  /// Soft ranks of the prediction were constant; value and gradient are 0.
  bool degenerate = false;
};

/// Pearson correlation between soft_rank(pred) and precomputed target ranks,
/// with its gradient w.r.t. pred.
template <typename DerivedP, typename DerivedR>
SoftSpearman<typename DerivedP::Scalar> spearman_soft_ranked(
    const Eigen::MatrixBase<DerivedP>& pred, const Eigen::MatrixBase<DerivedR>& target_ranks,
    const SoftRankConfig& cfg) {
  using Scalar = typename DerivedP::Scalar;
  const Index n = pred.size();
  SoftSpearman<Scalar> out;
  out.gradient = Vector<Scalar>::Zero(n);

  const Vector<Scalar> tc = target_ranks.array() - target_ranks.mean();
  const Scalar t_norm = tc.norm();
  if (t_norm == Scalar(0)) throw DegenerateError("spearman: constant target");

  const SoftRankState<Scalar> st = soft_rank_state(pred, cfg);
  const Vector<Scalar> rc = st.ranks.array() - st.ranks.mean();
  const Scalar r_norm = rc.norm();
  // Soft ranks lie in [1, n]; treat relative spread at round-off level as flat.
  if (!(r_norm > Scalar(1e-12) * static_cast<Scalar>(n))) {
    out.degenerate = true;
    return out;
  }
  const Scalar rho = rc.dot(tc) / (r_norm * t_norm);
  out.value = rho;
  const Vector<Scalar> upstream = tc / (r_norm * t_norm) - rho * rc / (r_norm * r_norm);
  out.gradient = soft_rank_pullback(st, upstream);
  return out;
}

template <typename DerivedP, typename DerivedT>
SoftSpearman<typename DerivedP::Scalar> spearman_soft(const Eigen::MatrixBase<DerivedP>& pred,
                                                      const Eigen::MatrixBase<DerivedT>& target,
                                                      const SoftRankConfig& cfg = {}) {
  if (pred.size() != target.size()) throw InputError("spearman: length mismatch");
  if (pred.size() < 2) throw InputError("spearman: need at least 2 observations");
  return spearman_soft_ranked(pred, average_ranks(target), cfg);
}

}  // namespace mlem
