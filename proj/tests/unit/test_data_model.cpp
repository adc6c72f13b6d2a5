#include "doctest.h"

#include "generators.hpp"

#include "mlem/data_model.hpp"

#include <cmath>

using namespace mlem;

namespace {

FeatureTable two_column_table() {
  return FeatureTable({"a", "b", "c"},
                      {FeatureColumn::nominal("gender", {"A", "B", std::nullopt}),
                       FeatureColumn::ordinal("freq", {4.0, 5.5, 4.5})});
}

}  // namespace

TEST_CASE("feature_distance: nominal indicator, ordinal difference, missing is zero") {
  const FeatureTable t = two_column_table();
  CHECK(feature_distance(t, 0, 0, 0) == 0.0);
  CHECK(feature_distance(t, 0, 0, 1) == 1.0);
  CHECK(feature_distance(t, 1, 0, 1) == 1.5);
  CHECK(feature_distance(t, 0, 0, 2) == 0.0);
  CHECK(feature_distance(t, 0, 2, 1) == 0.0);

  const Eigen::VectorXd p = feature_distances(t, 0, 1);
  CHECK(p.size() == 2);
  CHECK(p(0) == 1.0);
  CHECK(p(1) == 1.5);
}

TEST_CASE("feature_distance rejects out-of-range indices") {
  const FeatureTable t = two_column_table();
  CHECK_THROWS_AS(feature_distance(t, 2, 0, 1), std::out_of_range);
  CHECK_THROWS_AS(feature_distance(t, 0, 0, 3), std::out_of_range);
  CHECK_THROWS_AS(feature_distance(t, 0, -1, 0), std::out_of_range);
}

TEST_CASE("feature table invariants") {
  CHECK_THROWS_AS(FeatureTable({"a"}, {FeatureColumn::nominal("x", {"A"})}), InputError);
  CHECK_THROWS_AS(FeatureTable({"a", "b"}, {}), InputError);
  CHECK_THROWS_AS(FeatureTable({"a", "b"}, {FeatureColumn::nominal("x", {"A", "B"}),
                                            FeatureColumn::nominal("x", {"A", "A"})}),
                  InputError);
  CHECK_THROWS_AS(FeatureTable({"a", "b"}, {FeatureColumn::nominal("x", {"A", "B", "C"})}),
                  InputError);
  CHECK_THROWS_AS(FeatureColumn::ordinal("x", {1.0, INFINITY}), InputError);

  const FeatureTable t = two_column_table();
  CHECK(t.feature_names() == std::vector<std::string>{"gender", "freq"});
  CHECK(t.feature(0).missing(2));
  CHECK_FALSE(t.feature(1).missing(2));
}

TEST_CASE("subset keeps categories and reorders rows") {
  const FeatureTable t = two_column_table();
  const std::vector<Index> rows = {2, 0};
  const FeatureTable s = t.subset(rows);
  CHECK(s.stimulus_ids() == std::vector<std::string>{"c", "a"});
  CHECK(s.feature(0).categories == t.feature(0).categories);
  CHECK(feature_distance(s, 1, 0, 1) == doctest::Approx(0.5));
  const std::vector<Index> bad = {5};
  CHECK_THROWS_AS(t.subset(bad), std::out_of_range);
}

TEST_CASE("neural_distance") {
  Eigen::MatrixXd Y(3, 2);
  Y << 0, 0, 3, 4, 0, 0;
  const RepresentationSet r(Y);
  CHECK(neural_distance(r, 0, 1) == 5.0);
  CHECK(neural_distance(r, 0, 2) == 0.0);
  CHECK(neural_distance(r, 1, 0) == neural_distance(r, 0, 1));
  CHECK_THROWS_AS(neural_distance(r, 0, 3), std::out_of_range);

  Eigen::MatrixXd bad = Y;
  bad(1, 1) = NAN;
  CHECK_THROWS_AS(RepresentationSet{bad}, InputError);
}

TEST_CASE("univariate_slice") {
  Eigen::MatrixXd Y(2, 3);
  Y << 1, 2, 3, 4, 5, 6;
  const RepresentationSet r(Y);
  const RepresentationSet s = univariate_slice(r, 1);
  CHECK(s.dim() == 1);
  CHECK(s.matrix()(0, 0) == 2);
  CHECK(s.matrix()(1, 0) == 5);
  CHECK(neural_distance(s, 0, 1) == 3.0);
  CHECK_THROWS_AS(univariate_slice(r, 3), std::out_of_range);
}

TEST_CASE("property: feature distances are symmetric, zero on the diagonal, indicator for nominal") {
  Rng rng(101);
  for (int t = 0; t < 50; ++t) {
    const Index n = gen::integer(rng, 2, 20);
    const Index m = gen::integer(rng, 1, 6);
    const FeatureTable table = gen::mixed_table(rng, n, m, 0.2);
    for (Index k = 0; k < m; ++k) {
      for (Index i = 0; i < n; ++i) {
        CHECK(feature_distance(table, k, i, i) == 0.0);
        for (Index j = 0; j < n; ++j) {
          const double d = feature_distance(table, k, i, j);
          CHECK(d == feature_distance(table, k, j, i));
          CHECK(d >= 0.0);
          if (table.feature(k).kind == FeatureKind::Nominal) CHECK((d == 0.0 || d == 1.0));
          if (table.feature(k).missing(i) || table.feature(k).missing(j)) CHECK(d == 0.0);
        }
      }
    }
  }
}

TEST_CASE("property: neural distance matches a loop and obeys the triangle inequality") {
  Rng rng(102);
  for (int t = 0; t < 50; ++t) {
    const Index n = gen::integer(rng, 3, 12);
    const Index d = gen::integer(rng, 1, 9);
    const RepresentationSet r(gen::normal_matrix(rng, n, d));
    for (Index i = 0; i < n; ++i) {
      for (Index j = 0; j < n; ++j) {
        double s = 0;
        for (Index c = 0; c < d; ++c) s += std::pow(r.matrix()(i, c) - r.matrix()(j, c), 2);
        CHECK(std::abs(neural_distance(r, i, j) - std::sqrt(s)) <= 1e-12);
        for (Index k = 0; k < n; ++k) {
          CHECK(neural_distance(r, i, k) <=
                neural_distance(r, i, j) + neural_distance(r, j, k) + 1e-12);
        }
      }
    }
    const Index u = gen::integer(rng, 0, d - 1);
    const RepresentationSet s = univariate_slice(r, u);
    for (Index i = 0; i < n; ++i) {
      CHECK(neural_distance(s, i, 0) == std::abs(r.matrix()(i, u) - r.matrix()(0, u)));
    }
  }
}
