#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <stdexcept>
#include <vector>

#include "dpsco/metrics.hpp"
#include "dpsco/projector.hpp"
#include "oracles.hpp"

using dpsco::DiagonalMetric;
using dpsco::MetricKind;
using dpsco::SubspaceProjector;

TEST_CASE("named metrics have the documented diagonals") {
  const auto c = DiagonalMetric::make(MetricKind::kConst, 4);
  const auto s = DiagonalMetric::make(MetricKind::kSqrt, 4);
  const auto l = DiagonalMetric::make(MetricKind::kLinear, 4);
  for (std::size_t j = 0; j < 4; ++j) {
    const double one_based = static_cast<double>(j + 1);
    CHECK(c[j] == 1.0);
    CHECK(s[j] == doctest::Approx(1.0 / std::sqrt(one_based)).epsilon(1e-15));
    CHECK(l[j] == doctest::Approx(1.0 / one_based).epsilon(1e-15));
  }
  CHECK(l.kind() == MetricKind::kLinear);
  CHECK(l.permutation() == std::vector<std::size_t>{0, 1, 2, 3});
  CHECK_THROWS_AS(DiagonalMetric::make(MetricKind::kConst, 0), std::invalid_argument);
  CHECK_THROWS_AS(DiagonalMetric::make(MetricKind::kCustom, 3), std::invalid_argument);
}

TEST_CASE("metric names round-trip") {
  for (auto kind : {MetricKind::kConst, MetricKind::kSqrt, MetricKind::kLinear, MetricKind::kCustom}) {
    CHECK(dpsco::parse_metric_kind(dpsco::to_string(kind)) == kind);
  }
  CHECK_THROWS_AS(dpsco::parse_metric_kind("cubic"), std::invalid_argument);
}

TEST_CASE("custom metrics are stored sorted and remember the permutation") {
  const auto m = DiagonalMetric::custom({0.5, 2.0, 1.0, 2.0});
  CHECK(std::vector<double>(m.diag().begin(), m.diag().end()) == std::vector<double>{2.0, 2.0, 1.0, 0.5});
  // Stable: the two entries equal to 2 keep their relative order.
  CHECK(m.permutation() == std::vector<std::size_t>{1, 3, 2, 0});

  const std::vector<double> user = {10, 20, 30, 40};
  const auto internal = m.to_internal(user);
  CHECK(internal == std::vector<double>{20, 40, 30, 10});
  CHECK(m.to_user(internal) == user);
  // The norm is invariant under the relabeling.
  CHECK(dpsco::mahalanobis_norm(internal, m) ==
        doctest::Approx(oracle::weighted_norm(std::vector<double>{0.5, 2.0, 1.0, 2.0}, user)).epsilon(1e-14));

  CHECK_THROWS_AS(DiagonalMetric::custom({}), std::invalid_argument);
  CHECK_THROWS_AS((DiagonalMetric::custom({1.0, 0.0})), std::invalid_argument);
  CHECK_THROWS_AS((DiagonalMetric::custom({1.0, NAN})), std::invalid_argument);
  CHECK_THROWS_AS(m.to_internal(std::vector<double>{1.0}), std::invalid_argument);
}

TEST_CASE("metric CSV loading skips a header line") {
  const auto path = std::filesystem::temp_directory_path() / "dpsco_metric_test.csv";
  {
    std::ofstream out(path);
    out << "a\n0.25\n1\n0.5\n";
  }
  const auto m = DiagonalMetric::load_csv(path);
  CHECK(m.dim() == 3);
  CHECK(m[0] == 1.0);
  CHECK(m[2] == 0.25);
  CHECK(m.kind() == MetricKind::kCustom);
  {
    std::ofstream out(path);
    out << "1\nbogus\n";
  }
  CHECK_THROWS_AS(DiagonalMetric::load_csv(path), std::runtime_error);
  std::filesystem::remove(path);
  CHECK_THROWS_AS(DiagonalMetric::load_csv(path), std::runtime_error);
}

TEST_CASE("mahalanobis norm agrees with the weighted sum of squares") {
  std::mt19937_64 gen(3);
  std::normal_distribution<double> normal;
  for (auto kind : {MetricKind::kConst, MetricKind::kSqrt, MetricKind::kLinear}) {
    const auto m = DiagonalMetric::make(kind, 37);
    for (int rep = 0; rep < 20; ++rep) {
      std::vector<double> v(37);
      for (double& x : v) x = normal(gen);
      CHECK(dpsco::mahalanobis_norm(v, m) == doctest::Approx(oracle::weighted_norm(m.diag(), v)).epsilon(1e-14));
    }
  }
  const auto m = DiagonalMetric::make(MetricKind::kConst, 3);
  CHECK(dpsco::mahalanobis_norm(std::vector<double>{0, 0, 0}, m) == 0.0);
  CHECK_THROWS_AS((dpsco::mahalanobis_norm(std::vector<double>{1, 2}, m)), std::invalid_argument);
}

TEST_CASE("restricted coefficients are the square roots of the trailing diagonal") {
  const auto m = DiagonalMetric::make(MetricKind::kLinear, 5);
  const auto g = dpsco::restricted_coeffs(m);
  REQUIRE(g.size() == 6);
  for (std::size_t k = 0; k < 5; ++k) CHECK(g[k] == doctest::Approx(std::sqrt(1.0 / (k + 1.0))).epsilon(1e-15));
  CHECK(g[5] == 0.0);
}

TEST_CASE("top-k projector keeps the leading axes") {
  const auto m = DiagonalMetric::make(MetricKind::kSqrt, 6);
  const auto p = dpsco::top_k_projector(m, 2);
  CHECK(p.is_coordinate());
  CHECK(p.rank() == 2);
  CHECK(p.apply(std::vector<double>{1, 2, 3, 4, 5, 6}) == std::vector<double>{1, 2, 0, 0, 0, 0});
  CHECK(dpsco::top_k_projector(m, 0).apply(std::vector<double>{1, 2, 3, 4, 5, 6}) == std::vector<double>(6, 0.0));
  CHECK_THROWS_AS(dpsco::top_k_projector(m, 7), std::out_of_range);
}

TEST_CASE("coordinate and dense projectors agree and are idempotent") {
  std::mt19937_64 gen(11);
  std::normal_distribution<double> normal;
  const auto coord = SubspaceProjector::coordinates(8, {5, 1, 2});
  const auto dense = SubspaceProjector::dense(coord.basis());
  CHECK_FALSE(dense.is_coordinate());
  CHECK(dense.rank() == 3);
  std::vector<double> v(8);
  for (double& x : v) x = normal(gen);
  const auto pc = coord.apply(v);
  const auto pd = dense.apply(v);
  for (std::size_t j = 0; j < 8; ++j) CHECK(pd[j] == doctest::Approx(pc[j]).epsilon(1e-14));

  const auto random = SubspaceProjector::dense(oracle::random_orthonormal(8, 3, gen));
  const auto once = random.apply(v);
  const auto twice = random.apply(once);
  for (std::size_t j = 0; j < 8; ++j) CHECK(twice[j] == doctest::Approx(once[j]).epsilon(1e-12));
  // The residual is orthogonal to the projection.
  double dot = 0.0;
  for (std::size_t j = 0; j < 8; ++j) dot += once[j] * (v[j] - once[j]);
  CHECK(std::abs(dot) < 1e-12);
}

TEST_CASE("projector construction is validated") {
  CHECK_THROWS_AS((SubspaceProjector::coordinates(3, {3})), std::out_of_range);
  CHECK_THROWS_AS((SubspaceProjector::coordinates(3, {1, 1})), std::invalid_argument);
  Eigen::MatrixXd skew(3, 2);
  skew << 1, 1, 0, 1, 0, 0;
  CHECK_THROWS_AS(SubspaceProjector::dense(skew), std::invalid_argument);
  CHECK_THROWS_AS(SubspaceProjector::dense(Eigen::MatrixXd::Identity(2, 3)), std::invalid_argument);
  CHECK(SubspaceProjector::dense(Eigen::MatrixXd(4, 0)).rank() == 0);
  const auto p = SubspaceProjector::coordinates(3, {0});
  std::vector<double> out(2);
  CHECK_THROWS_AS((p.apply(std::vector<double>{1, 2, 3}, out)), std::invalid_argument);
}
