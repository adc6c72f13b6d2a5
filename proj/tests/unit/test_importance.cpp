#include "doctest.h"

#include "generators.hpp"
#include "oracles.hpp"

#include "mlem/importance.hpp"
#include "mlem/pair_sampler.hpp"
#include "mlem/trainer.hpp"

#include <algorithm>
#include <set>

using namespace mlem;

namespace {

/// Batch with continuous feature distances (no ties) and targets from a
/// known metric plus noise.
PairBatch random_batch(Rng& rng, Index b, Index m, const Eigen::MatrixXd& W, double noise) {
  PairBatch batch;
  batch.feature_distances = gen::nonnegative_matrix(rng, b, m, 0, 2);
  batch.neural_distances = predict_distances(W, batch.feature_distances, ModelVariant::Mlem) +
                           gen::normal_vector(rng, b, noise);
  for (Index t = 0; t < b; ++t) batch.pairs.push_back({0, t + 1});
  return batch;
}

Eigen::MatrixXd spd(Rng& rng, Index m) {
  const Eigen::MatrixXd G = gen::normal_matrix(rng, m, m);
  return normalize_frobenius(Eigen::MatrixXd(G * G.transpose() + 0.1 * Eigen::MatrixXd::Identity(m, m)));
}

std::vector<std::string> names(Index m) {
  std::vector<std::string> v;
  for (Index k = 0; k < m; ++k) v.push_back("x" + std::to_string(k));
  return v;
}

}  // namespace

TEST_CASE("expand_interactions examples") {
  CHECK(expand_interactions(Eigen::Vector2d(1, 1)) == Eigen::Vector3d(1, 2, 1));
  CHECK(expand_interactions(Eigen::Vector2d(2, 3)) == Eigen::Vector3d(4, 12, 9));
  CHECK(expand_interactions(Eigen::VectorXd::Zero(16)).size() == 136);
  CHECK(expand_interactions(Eigen::VectorXd::Zero(16)).isZero());
  CHECK(num_interactions(16) == 136);
}

TEST_CASE("interaction_index and interaction_pair are inverse") {
  for (Index m = 1; m <= 12; ++m) {
    Index expect = 0;
    for (Index k = 0; k < m; ++k) {
      for (Index l = k; l < m; ++l) {
        CHECK(interaction_index(m, k, l) == expect);
        CHECK(interaction_pair(m, expect) == std::make_pair(k, l));
        ++expect;
      }
    }
    CHECK(expect == num_interactions(m));
    CHECK_THROWS(interaction_pair(m, expect));
  }
}

TEST_CASE("interaction_names") {
  const auto n = interaction_names({"a", "b", "c"});
  const std::vector<std::string> expect{"a", "a × b", "a × c", "b", "b × c", "c"};
  CHECK(n == expect);
}

TEST_CASE("property: h_w on the expansion equals the quadratic-form model") {
  Rng rng(41);
  for (int t = 0; t < 300; ++t) {
    const Index m = gen::integer(rng, 1, 10);
    const auto variant = t % 2 ? ModelVariant::Mlem : ModelVariant::FrRsaI;
    const Eigen::MatrixXd W = model_weights(gen::params(rng, m, variant));
    const Eigen::VectorXd p = gen::nonnegative_matrix(rng, m, 1, 0, 3).col(0);
    const double direct = predict_distances(W, Eigen::MatrixXd(p.transpose()), variant)(0);
    CHECK(h_w(expand_interactions(p), W, variant) == doctest::Approx(direct).epsilon(1e-12));
  }
  CHECK(h_w(Eigen::Vector3d(1, 2, 1), Eigen::Matrix2d::Identity(), ModelVariant::Mlem) ==
        doctest::Approx(std::sqrt(2.0)));
  CHECK_THROWS_AS(h_w(Eigen::Vector2d(1, 1), Eigen::Matrix2d::Identity(), ModelVariant::Mlem), InputError);
}

TEST_CASE("identity permutation gives zero importance everywhere") {
  Rng rng(42);
  const Eigen::MatrixXd W = spd(rng, 4);
  const PairBatch batch = random_batch(rng, 200, 4, W, 0.1);
  const auto rep = permutation_importance(W, ModelVariant::Mlem, names(4), batch, 3,
                                          [](std::vector<Index>&, Index, int) {});
  REQUIRE(rep.entries.size() == 10);
  for (const auto& e : rep.entries) {
    CHECK(e.importance == 0.0);
    CHECK(e.std_dev == 0.0);
  }
}

TEST_CASE("property: importance equals the mean drop of independently recomputed scores") {
  Rng rng(43);
  for (int t = 0; t < 20; ++t) {
    const Index m = gen::integer(rng, 1, 5);
    const Index b = gen::integer(rng, 10, 120);
    const auto variant = t % 2 ? ModelVariant::Mlem : ModelVariant::FrRsaI;
    const Eigen::MatrixXd W = spd(rng, m);
    const PairBatch batch = random_batch(rng, b, m, W, 0.2);
    const std::uint64_t seed = static_cast<std::uint64_t>(t);
    const auto shuffle = [seed](std::vector<Index>& perm, Index col, int r) {
      std::mt19937_64 g(seed * 1000 + static_cast<std::uint64_t>(col) * 10 + static_cast<std::uint64_t>(r));
      std::shuffle(perm.begin(), perm.end(), g);
    };
    const int R = 4;
    const auto rep = permutation_importance(W, variant, names(m), batch, R, shuffle);

    const Eigen::MatrixXd P = expand_interactions_rows(batch.feature_distances);
    const double base = oracle::spearman_brute_force(h_w_rows(P, W, variant), batch.neural_distances);
    CHECK(rep.baseline == doctest::Approx(base).epsilon(1e-12));
    for (Index col = 0; col < P.cols(); ++col) {
      double mean_drop = 0;
      for (int r = 0; r < R; ++r) {
        std::vector<Index> perm(static_cast<std::size_t>(b));
        std::iota(perm.begin(), perm.end(), Index{0});
        shuffle(perm, col, r);
        Eigen::MatrixXd Pp = P;
        for (Index i = 0; i < b; ++i) Pp(i, col) = P(perm[static_cast<std::size_t>(i)], col);
        const double s = oracle::spearman_brute_force(h_w_rows(Pp, W, variant), batch.neural_distances);
        CHECK(rep.entries[static_cast<std::size_t>(col)].scores[static_cast<std::size_t>(r)] ==
              doctest::Approx(s).epsilon(1e-9));
        mean_drop += (base - s) / R;
      }
      CHECK(rep.entries[static_cast<std::size_t>(col)].importance == doctest::Approx(mean_drop).epsilon(1e-9));
    }
  }
}

TEST_CASE("columns with zero weight have exactly zero importance") {
  Rng rng(44);
  Eigen::MatrixXd W = spd(rng, 3);
  W.row(2).setZero();
  W.col(2).setZero();
  const PairBatch batch = random_batch(rng, 300, 3, W, 0.05);
  const TrainedModel model = TrainedModel::from_weights(ModelVariant::Mlem, W, names(3));
  const auto rep = permutation_importance(model, batch, 5, 9);
  for (const auto& e : rep.entries) {
    if (e.k == 2 || e.l == 2) CHECK(e.importance == 0.0);
  }
  // The heaviest diagonal feature matters.
  Index top = 0;
  for (Index k = 1; k < 2; ++k) {
    if (W(k, k) > W(top, top)) top = k;
  }
  CHECK(rep.entries[static_cast<std::size_t>(interaction_index(3, top, top))].importance > 0.05);
  CHECK(rep.seed == 9);
  CHECK(rep.n_pairs == 300);

  const auto again = permutation_importance(model, batch, 5, 9);
  for (std::size_t c = 0; c < rep.entries.size(); ++c) CHECK(again.entries[c].scores == rep.entries[c].scores);
}

TEST_CASE("permutation_importance validation") {
  Rng rng(45);
  const Eigen::MatrixXd W = spd(rng, 2);
  const PairBatch batch = random_batch(rng, 20, 2, W, 0.1);
  const auto noop = [](std::vector<Index>&, Index, int) {};
  CHECK_THROWS_AS(permutation_importance(W, ModelVariant::Mlem, names(3), batch, 2, noop), InputError);
  CHECK_THROWS_AS(permutation_importance(W, ModelVariant::Mlem, names(2), batch, 0, noop), InputError);
  PairBatch flat = batch;
  flat.neural_distances.setConstant(1.0);
  CHECK_THROWS_AS(permutation_importance(W, ModelVariant::Mlem, names(2), flat, 2, noop), DegenerateError);
}

TEST_CASE("frobenius_distance examples and metric properties") {
  CHECK(frobenius_distance(Eigen::Matrix2d::Identity(), Eigen::Matrix2d::Zero()) == doctest::Approx(std::sqrt(2.0)));
  CHECK_THROWS_AS(frobenius_distance(Eigen::Matrix2d::Identity(), Eigen::Matrix3d::Identity()), InputError);
  Rng rng(46);
  for (int t = 0; t < 100; ++t) {
    const Index m = gen::integer(rng, 1, 8);
    const Eigen::MatrixXd a = gen::normal_matrix(rng, m, m), b = gen::normal_matrix(rng, m, m),
                          c = gen::normal_matrix(rng, m, m);
    const double ab = frobenius_distance(a, b);
    CHECK(ab == doctest::Approx(oracle::frobenius_loop(a, b)).epsilon(1e-12));
    CHECK(ab == frobenius_distance(b, a));
    CHECK(frobenius_distance(a, a) == 0.0);
    CHECK(frobenius_distance(a, c) <= ab + frobenius_distance(b, c) + 1e-12);
  }
}

TEST_CASE("weighted_tau examples") {
  const Eigen::Vector4d r(4, 3, 2, 1);
  CHECK(weighted_tau(r, r) == doctest::Approx(1.0));
  CHECK(weighted_tau(r, -r) == doctest::Approx(-1.0));
  const Eigen::Vector3d a(3, 2, 1), b(3, 1, 2);
  // Hand computation: pairs (0,1),(0,2) concordant, (1,2) discordant.
  // Ranked by a: weights 1+1/2, 1+1/3, 1/2+1/3 -> (3/2 + 4/3 - 5/6) / (11/3) = 6/11; same by b.
  CHECK(weighted_tau(a, b) == doctest::Approx(6.0 / 11.0));
  CHECK_THROWS_AS(weighted_tau(Eigen::Vector3d(1, 1, 1), b), DegenerateError);
  CHECK_THROWS_AS(weighted_tau(Eigen::VectorXd::Ones(1), Eigen::VectorXd::Ones(1)), InputError);
  CHECK_THROWS_AS(weighted_tau(a, Eigen::Vector2d(1, 2)), InputError);
}

TEST_CASE("property: weighted_tau matches the direct oracle, is symmetric and rank-only") {
  Rng rng(47);
  for (int t = 0; t < 300; ++t) {
    const Index n = gen::integer(rng, 2, 30);
    const Eigen::VectorXd R = t % 3 ? gen::normal_vector(rng, n) : gen::tied_vector(rng, n, 4);
    const Eigen::VectorXd S = t % 2 ? gen::normal_vector(rng, n) : gen::tied_vector(rng, n, 3);
    if (R.maxCoeff() == R.minCoeff() || S.maxCoeff() == S.minCoeff()) continue;
    const double tau = weighted_tau(R, S);
    CHECK(tau == doctest::Approx(oracle::weighted_tau_direct(R, S)).epsilon(1e-12));
    CHECK(tau == doctest::Approx(weighted_tau(S, R)).epsilon(1e-12));
    CHECK(tau >= -1.0 - 1e-12);
    CHECK(tau <= 1.0 + 1e-12);
    const Eigen::VectorXd tR = R.unaryExpr([](double v) { return std::exp(v) * 5.0 - 2.0; });
    CHECK(weighted_tau(tR, S) == tau);
  }
}
