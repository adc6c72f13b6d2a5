#pragma once

// Learned weighted norm over feature-distance vectors.
//
// MLEM:     W = L L^T, L lower triangular with L_ii = softplus(A_ii), L_ij = A_ij (i > j).
//           Prediction sqrt(p^T W p).
// FR-RSA-I: W = (A + A^T) / 2, no sign constraint. Prediction p^T W p (no square
//           root; the quadratic form may be negative).
//
// The forward pass always uses W / ||W||_F and the gradient is taken through
// that normalization.

#include "mlem/common.hpp"
#include "mlem/softrank.hpp"

#include <Eigen/Core>

#include <cmath>
#include <string_view>

namespace mlem {

template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

enum class ModelVariant { Mlem, FrRsaI };

inline std::string_view to_string(ModelVariant v) {
  return v == ModelVariant::Mlem ? "mlem" : "frrsai";
}

inline ModelVariant parse_model_variant(std::string_view s) {
  if (s == "mlem") return ModelVariant::Mlem;
  if (s == "frrsai") return ModelVariant::FrRsaI;
  throw InputError("unknown model variant '" + std::string(s) + "' (expected mlem or frrsai)");
}

template <typename Scalar>
struct MetricParams {
  Matrix<Scalar> A;
  ModelVariant variant = ModelVariant::Mlem;
};

/// log(1 + e^x) without overflow.
template <typename Scalar>
Scalar softplus(Scalar x) {
  using std::exp;
  using std::log1p;
  return x > Scalar(0) ? x + log1p(exp(-x)) : log1p(exp(x));
}

template <typename Scalar>
Scalar sigmoid(Scalar x) {
  using std::exp;
  if (x >= Scalar(0)) return Scalar(1) / (Scalar(1) + exp(-x));
  const Scalar e = exp(x);
  return e / (Scalar(1) + e);
}

template <typename Derived>
Matrix<typename Derived::Scalar> cholesky_factor(const Eigen::MatrixBase<Derived>& A) {
  using Scalar = typename Derived::Scalar;
  Matrix<Scalar> L = A.template triangularView<Eigen::StrictlyLower>();
  for (Index i = 0; i < A.rows(); ++i) L(i, i) = softplus(A(i, i));
  return L;
}

/// Unnormalized weight matrix from the unconstrained parameters.
template <typename Scalar>
Matrix<Scalar> build_weights(const MetricParams<Scalar>& params) {
  if (params.A.rows() != params.A.cols()) throw InputError("parameter matrix must be square");
  if (params.variant == ModelVariant::Mlem) {
    const Matrix<Scalar> L = cholesky_factor(params.A);
    Matrix<Scalar> W = L * L.transpose();
    // Exact symmetry regardless of the product's summation order.
    return (W + W.transpose()) / Scalar(2);
  }
  return (params.A + params.A.transpose()) / Scalar(2);
}

template <typename Derived>
Matrix<typename Derived::Scalar> normalize_frobenius(const Eigen::MatrixBase<Derived>& W) {
  using Scalar = typename Derived::Scalar;
  const Scalar f = W.norm();
  if (!(f > Scalar(0))) throw DegenerateError("cannot normalize a zero weight matrix");
  return W / f;
}

/// Normalized weights used by the forward pass.
template <typename Scalar>
Matrix<Scalar> model_weights(const MetricParams<Scalar>& params) {
  return normalize_frobenius(build_weights(params));
}

/// One prediction per row of `features` (b x m).
template <typename DerivedW, typename DerivedF>
Vector<typename DerivedW::Scalar> predict_distances(const Eigen::MatrixBase<DerivedW>& W,
                                                    const Eigen::MatrixBase<DerivedF>& features,
                                                    ModelVariant variant) {
  using Scalar = typename DerivedW::Scalar;
  if (W.rows() != W.cols() || W.cols() != features.cols()) {
    throw InputError("weight matrix does not match feature dimension");
  }
  Vector<Scalar> q = ((features * W).array() * features.array()).rowwise().sum();
  if (variant == ModelVariant::Mlem) q = q.array().max(Scalar(0)).sqrt();
  return q;
}

template <typename Scalar>
struct Objective {
  Scalar value = 0;
  /// d value / d A.
  Matrix<Scalar> gradient;
  bool degenerate = false;
};

/// Soft Spearman between predictions and `target_ranks`, and its gradient
/// w.r.t. the unconstrained parameters.
template <typename Scalar, typename DerivedF, typename DerivedR>
Objective<Scalar> objective_and_gradient_ranked(const MetricParams<Scalar>& params,
                                                const Eigen::MatrixBase<DerivedF>& features,
                                                const Eigen::MatrixBase<DerivedR>& target_ranks,
                                                const SoftRankConfig& cfg) {
  const Index m = params.A.rows();
  const Matrix<Scalar> W = build_weights(params);
  const Scalar fro = W.norm();
  if (!(fro > Scalar(0))) throw DegenerateError("weight matrix collapsed to zero");
  const Matrix<Scalar> Wn = W / fro;

  const Vector<Scalar> q = ((features * Wn).array() * features.array()).rowwise().sum();
  Vector<Scalar> pred = q;
  if (params.variant == ModelVariant::Mlem) pred = q.array().max(Scalar(0)).sqrt();

  const SoftSpearman<Scalar> ss = spearman_soft_ranked(pred, target_ranks, cfg);
  Objective<Scalar> out;
  out.value = ss.value;
  out.degenerate = ss.degenerate;
  out.gradient = Matrix<Scalar>::Zero(m, m);
  if (ss.degenerate) return out;

  // d/dq. A zero feature vector predicts 0 for every W, so it carries no gradient.
  Vector<Scalar> gq = ss.gradient;
  if (params.variant == ModelVariant::Mlem) {
    for (Index t = 0; t < gq.size(); ++t) {
      gq(t) = pred(t) > Scalar(0) ? gq(t) / (Scalar(2) * pred(t)) : Scalar(0);
    }
  }
  // d/dWn = sum_t gq_t p_t p_t^T
  const Matrix<Scalar> gWn = features.transpose() * (features.array().colwise() * gq.array()).matrix();
  // Through Wn = W / ||W||_F.
  const Matrix<Scalar> gW = (gWn - Wn * (Wn.cwiseProduct(gWn)).sum()) / fro;

  if (params.variant == ModelVariant::Mlem) {
    const Matrix<Scalar> L = cholesky_factor(params.A);
    const Matrix<Scalar> gL = (gW + gW.transpose()) * L;
    out.gradient = gL.template triangularView<Eigen::StrictlyLower>();
    for (Index i = 0; i < m; ++i) out.gradient(i, i) = gL(i, i) * sigmoid(params.A(i, i));
  } else {
    out.gradient = (gW + gW.transpose()) / Scalar(2);
  }
  return out;
}

template <typename Scalar, typename DerivedF, typename DerivedT>
Objective<Scalar> objective_and_gradient(const MetricParams<Scalar>& params,
                                         const Eigen::MatrixBase<DerivedF>& features,
                                         const Eigen::MatrixBase<DerivedT>& targets,
                                         const SoftRankConfig& cfg) {
  if (features.rows() != targets.size()) throw InputError("batch size mismatch");
  if (features.cols() != params.A.rows()) throw InputError("feature dimension mismatch");
  if (features.rows() < 2) throw InputError("batch needs at least 2 pairs");
  return objective_and_gradient_ranked(params, features, average_ranks(targets), cfg);
}

}  // namespace mlem
