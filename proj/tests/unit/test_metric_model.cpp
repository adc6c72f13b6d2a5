#include "doctest.h"

#include "generators.hpp"
#include "oracles.hpp"

#include "mlem/metric_model.hpp"

#include <Eigen/Eigenvalues>

using namespace mlem;

namespace {

Eigen::MatrixXd mat2(double a, double b, double c, double d) {
  Eigen::MatrixXd M(2, 2);
  M << a, b, c, d;
  return M;
}

}  // namespace

TEST_CASE("build_weights examples") {
  const MetricParams<double> zero{Eigen::MatrixXd::Zero(3, 3), ModelVariant::Mlem};
  const double ln2 = std::log(2.0);
  CHECK((build_weights(zero) - ln2 * ln2 * Eigen::MatrixXd::Identity(3, 3)).cwiseAbs().maxCoeff() <= 1e-15);

  const MetricParams<double> fr{mat2(0, 4, 0, 0), ModelVariant::FrRsaI};
  CHECK(build_weights(fr) == mat2(0, 2, 2, 0));

  CHECK_THROWS_AS(build_weights(MetricParams<double>{Eigen::MatrixXd::Zero(2, 3), ModelVariant::FrRsaI}),
                  InputError);
}

TEST_CASE("normalize_frobenius examples") {
  const Eigen::MatrixXd n = normalize_frobenius(2.0 * Eigen::MatrixXd::Identity(2, 2));
  CHECK((n - Eigen::MatrixXd::Identity(2, 2) / std::sqrt(2.0)).cwiseAbs().maxCoeff() <= 1e-15);
  CHECK_THROWS_AS(normalize_frobenius(Eigen::MatrixXd::Zero(2, 2)), DegenerateError);
  CHECK_THROWS_AS(model_weights(MetricParams<double>{Eigen::MatrixXd::Zero(2, 2), ModelVariant::FrRsaI}),
                  DegenerateError);
}

TEST_CASE("predict_distances examples") {
  Eigen::MatrixXd F(2, 2);
  F << 3, 4, 0, 0;
  const Eigen::VectorXd d = predict_distances(Eigen::MatrixXd::Identity(2, 2), F, ModelVariant::Mlem);
  CHECK(d(0) == 5.0);
  CHECK(d(1) == 0.0);

  Eigen::MatrixXd ones(1, 2);
  ones << 1, 1;
  CHECK(predict_distances(mat2(1, -2, -2, 1), ones, ModelVariant::FrRsaI)(0) == -2.0);
  CHECK_THROWS_AS(predict_distances(Eigen::MatrixXd::Identity(3, 3), ones, ModelVariant::Mlem), InputError);
}

TEST_CASE("softplus and sigmoid are stable at extremes") {
  CHECK(softplus(0.0) == doctest::Approx(std::log(2.0)));
  CHECK(softplus(800.0) == 800.0);
  CHECK(softplus(-800.0) == 0.0);
  CHECK(sigmoid(800.0) == 1.0);
  CHECK(sigmoid(-800.0) == 0.0);
  CHECK(sigmoid(0.0) == 0.5);
}

TEST_CASE("property: MLEM weights are symmetric positive definite with unit norm after normalization") {
  Rng rng(31);
  for (int t = 0; t < 300; ++t) {
    const Index m = gen::integer(rng, 1, 12);
    const auto p = gen::params(rng, m, ModelVariant::Mlem);
    const Eigen::MatrixXd W = model_weights(p);
    CHECK(W == W.transpose());
    CHECK(std::abs(W.norm() - 1.0) <= 1e-12);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(W);
    CHECK(es.eigenvalues().minCoeff() > 0.0);
  }
}

TEST_CASE("property: FR-RSA-I weights are the symmetric part") {
  Rng rng(32);
  for (int t = 0; t < 100; ++t) {
    const Index m = gen::integer(rng, 1, 10);
    const auto p = gen::params(rng, m, ModelVariant::FrRsaI);
    const Eigen::MatrixXd W = build_weights(p);
    for (Index i = 0; i < m; ++i) {
      for (Index j = 0; j < m; ++j) CHECK(W(i, j) == (p.A(i, j) + p.A(j, i)) / 2);
    }
  }
}

TEST_CASE("property: MLEM predictions form a norm on feature-distance vectors") {
  Rng rng(33);
  for (int t = 0; t < 200; ++t) {
    const Index m = gen::integer(rng, 1, 10);
    const Eigen::MatrixXd W = model_weights(gen::params(rng, m, ModelVariant::Mlem));
    Eigen::MatrixXd F(3, m);
    F.row(0) = gen::normal_vector(rng, m).transpose();
    F.row(1) = gen::normal_vector(rng, m).transpose();
    F.row(2) = F.row(0) + F.row(1);
    const Eigen::VectorXd d = predict_distances(W, F, ModelVariant::Mlem);
    CHECK(d.minCoeff() >= 0.0);
    CHECK(d(2) <= d(0) + d(1) + 1e-12);
    const double c = gen::uniform(rng, -5, 5);
    Eigen::MatrixXd scaled = c * F.topRows(1);
    CHECK(predict_distances(W, scaled, ModelVariant::Mlem)(0) ==
          doctest::Approx(std::abs(c) * d(0)).epsilon(1e-12));
  }
}

TEST_CASE("property: objective gradient matches central differences") {
  Rng rng(34);
  for (auto variant : {ModelVariant::Mlem, ModelVariant::FrRsaI}) {
    for (int t = 0; t < 40; ++t) {
      const Index m = gen::integer(rng, 1, 5);
      const Index b = gen::integer(rng, 5, 40);
      const MetricParams<double> p = gen::params(rng, m, variant);
      const Eigen::MatrixXd F = gen::nonnegative_matrix(rng, b, m, 0, 3);
      const Eigen::VectorXd y = gen::nonnegative_matrix(rng, b, 1).col(0);
      SoftRankConfig cfg;
      cfg.regularization = t % 2 ? 1.0 : 0.1;
      const auto obj = objective_and_gradient(p, F, y, cfg);
      if (obj.degenerate) continue;
      auto f = [&](const Eigen::MatrixXd& A) {
        return objective_and_gradient(MetricParams<double>{A, variant}, F, y, cfg).value;
      };
      const Eigen::MatrixXd fd = oracle::central_difference(f, p.A, 1e-6);
      const double scale = std::max({obj.gradient.cwiseAbs().maxCoeff(), fd.cwiseAbs().maxCoeff(), 1e-6});
      CHECK((obj.gradient - fd).cwiseAbs().maxCoeff() / scale < 1e-4);
    }
  }
}

TEST_CASE("objective is maximal and stationary on targets the model generates itself") {
  Rng rng(35);
  const Index m = 3, b = 20;
  const MetricParams<double> p = gen::params(rng, m, ModelVariant::Mlem);
  const Eigen::MatrixXd F = gen::nonnegative_matrix(rng, b, m, 0, 3);
  const Eigen::VectorXd y = predict_distances(model_weights(p), F, ModelVariant::Mlem);
  SoftRankConfig cfg;
  cfg.regularization = 1e-4;
  const auto obj = objective_and_gradient(p, F, y, cfg);
  CHECK(obj.value == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(obj.gradient.cwiseAbs().maxCoeff() <= 1e-9);
}

TEST_CASE("property: objective depends on targets only through their ranks") {
  Rng rng(36);
  for (int t = 0; t < 100; ++t) {
    const Index m = gen::integer(rng, 1, 6);
    const Index b = gen::integer(rng, 3, 50);
    const auto variant = t % 2 ? ModelVariant::Mlem : ModelVariant::FrRsaI;
    const MetricParams<double> p = gen::params(rng, m, variant);
    const Eigen::MatrixXd F = gen::nonnegative_matrix(rng, b, m, 0, 2);
    const Eigen::VectorXd y = gen::normal_vector(rng, b);
    const Eigen::VectorXd ty = y.unaryExpr([](double v) { return std::exp(2.0 * v) + 7.0; });
    const auto a = objective_and_gradient(p, F, y, {});
    const auto c = objective_and_gradient(p, F, ty, {});
    CHECK(a.value == c.value);
    CHECK(a.gradient == c.gradient);
  }
}

TEST_CASE("objective input validation") {
  const MetricParams<double> p{Eigen::MatrixXd::Zero(2, 2), ModelVariant::Mlem};
  CHECK_THROWS_AS(objective_and_gradient(p, Eigen::MatrixXd::Ones(3, 2), Eigen::VectorXd::Ones(2), {}),
                  InputError);
  CHECK_THROWS_AS(objective_and_gradient(p, Eigen::MatrixXd::Ones(3, 3), Eigen::VectorXd::Ones(3), {}),
                  InputError);
  CHECK_THROWS_AS(objective_and_gradient(p, Eigen::MatrixXd::Ones(1, 2), Eigen::VectorXd::Ones(1), {}),
                  InputError);
  Eigen::VectorXd y(3);
  y << 1, 2, 3;
  // Identical feature rows give identical predictions: flat soft ranks.
  const auto flat = objective_and_gradient(p, Eigen::MatrixXd::Ones(3, 2), y, {});
  CHECK(flat.degenerate);
  CHECK(flat.gradient.isZero());
  CHECK(parse_model_variant("frrsai") == ModelVariant::FrRsaI);
  CHECK_THROWS_AS(parse_model_variant("lasso"), InputError);
}
