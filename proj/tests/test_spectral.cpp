#include <doctest.h>

#include <cmath>
#include <random>
#include <stdexcept>
#include <vector>

#include "dpsco/spectral.hpp"
#include "oracles.hpp"

using dpsco::GradientTrace;

namespace {

GradientTrace make_trace(Eigen::MatrixXd h) {
  GradientTrace t;
  t.step_indices.resize(static_cast<std::size_t>(h.rows()));
  for (std::size_t i = 0; i < t.step_indices.size(); ++i) t.step_indices[i] = i + 1;
  t.H = std::move(h);
  return t;
}

/// U diag(s) V^T with random orthonormal U and V.
Eigen::MatrixXd with_spectrum(Eigen::Index rows, Eigen::Index cols, const std::vector<double>& s, std::mt19937_64& gen) {
  const auto r = static_cast<Eigen::Index>(s.size());
  const Eigen::MatrixXd u = oracle::random_orthonormal(rows, r, gen);
  const Eigen::MatrixXd v = oracle::random_orthonormal(cols, r, gen);
  Eigen::VectorXd sv(r);
  for (Eigen::Index i = 0; i < r; ++i) sv(i) = s[static_cast<std::size_t>(i)];
  return u * sv.asDiagonal() * v.transpose();
}

}  // namespace

TEST_CASE("power-law fit recovers an exact power law") {
  std::vector<double> s(200);
  for (std::size_t i = 0; i < s.size(); ++i) s[i] = 3.0 * std::pow(static_cast<double>(i + 1), -0.6);
  const auto fit = dpsco::powerlaw_fit(s, 1, 200);
  CHECK(fit.slope == doctest::Approx(-0.6).epsilon(1e-12));
  CHECK(fit.intercept == doctest::Approx(std::log(3.0)).epsilon(1e-12));
  CHECK(fit.r2 == doctest::Approx(1.0).epsilon(1e-12));
  const auto part = dpsco::powerlaw_fit(s, 10, 50);
  CHECK(part.slope == doctest::Approx(-0.6).epsilon(1e-12));
  CHECK(part.lo == 10);
  CHECK(part.hi == 50);
}

TEST_CASE("power-law fit tolerates mild multiplicative noise") {
  std::mt19937_64 gen(5);
  std::normal_distribution<double> normal(0.0, 0.01);
  std::vector<double> s(1000);
  for (std::size_t i = 0; i < s.size(); ++i) s[i] = 2.0 / static_cast<double>(i + 1) * (1.0 + normal(gen));
  const auto fit = dpsco::powerlaw_fit(s, 1, 1000);
  CHECK(fit.slope >= -1.05);
  CHECK(fit.slope <= -0.95);
  CHECK(fit.r2 > 0.99);
}

TEST_CASE("power-law fit edge cases") {
  const std::vector<double> flat(5, 2.0);
  const auto fit = dpsco::powerlaw_fit(flat, 1, 5);
  CHECK(fit.slope == 0.0);
  CHECK(fit.r2 == 1.0);
  const std::vector<double> bad = {1.0, 0.5, 0.0, -1.0};
  CHECK_THROWS_WITH_AS(dpsco::powerlaw_fit(bad, 1, 4), doctest::Contains("3, 4"), std::domain_error);
  CHECK_THROWS_AS(dpsco::powerlaw_fit(flat, 2, 2), std::out_of_range);
  CHECK_THROWS_AS(dpsco::powerlaw_fit(flat, 0, 3), std::out_of_range);
  CHECK_THROWS_AS(dpsco::powerlaw_fit(flat, 1, 6), std::out_of_range);
}

TEST_CASE("orthonormalize returns orthonormal columns spanning the input") {
  std::mt19937_64 gen(2);
  std::normal_distribution<double> normal;
  Eigen::MatrixXd z(30, 5);
  for (Eigen::Index i = 0; i < z.size(); ++i) z.data()[i] = normal(gen);
  const Eigen::MatrixXd q = dpsco::orthonormalize(z);
  CHECK((q.transpose() * q - Eigen::MatrixXd::Identity(5, 5)).norm() < 1e-13);
  CHECK((z - q * (q.transpose() * z)).norm() < 1e-12 * z.norm());
  // An orthonormal input is returned unchanged, signs included.
  const Eigen::MatrixXd again = dpsco::orthonormalize(q);
  CHECK((again - q).norm() < 1e-13);
}

TEST_CASE("orthogonal iteration matches the Jacobi oracle with a spectral gap") {
  std::mt19937_64 gen(77);
  for (int rep = 0; rep < 10; ++rep) {
    const Eigen::Index rows = 20 + rep * 4;
    const Eigen::Index cols = 60 - rep * 3;
    std::vector<double> s;
    const std::size_t k = 6;
    for (std::size_t i = 0; i < 12; ++i) s.push_back(std::pow(0.8, static_cast<double>(i)) * (i < k ? 2.0 : 1.0));
    const auto trace = make_trace(with_spectrum(rows, cols, s, gen));
    const auto truth = oracle::singular_values(trace.H);
    const auto report = dpsco::orthogonal_iteration_svd(trace, k, 100, 3);
    REQUIRE(report.singular_values.size() == k);
    for (std::size_t i = 0; i < k; ++i) CHECK(report.singular_values[i] == doctest::Approx(truth[i]).epsilon(1e-9));
    CHECK(report.basis.rows() == cols);
    CHECK(report.basis.cols() == static_cast<Eigen::Index>(k));
    CHECK((report.basis.transpose() * report.basis - Eigen::MatrixXd::Identity(k, k)).norm() < 1e-10);
  }
}

TEST_CASE("both Gram orientations give the same spectrum") {
  std::mt19937_64 gen(8);
  const Eigen::MatrixXd h = with_spectrum(15, 40, {5, 4, 3, 2, 1}, gen);
  const auto wide = dpsco::orthogonal_iteration_svd(make_trace(h), 5, 50);
  const auto tall = dpsco::orthogonal_iteration_svd(make_trace(h.transpose()), 5, 50);
  for (std::size_t i = 0; i < 5; ++i) {
    CHECK(wide.singular_values[i] == doctest::Approx(5.0 - i).epsilon(1e-10));
    CHECK(tall.singular_values[i] == doctest::Approx(5.0 - i).epsilon(1e-10));
  }
}

TEST_CASE("projecting rows onto the top-k basis leaves the tail energy") {
  std::mt19937_64 gen(13);
  const std::vector<double> s = {9, 7, 5, 3, 1, 0.5};
  const Eigen::MatrixXd h = with_spectrum(25, 18, s, gen);
  const auto report = dpsco::orthogonal_iteration_svd(make_trace(h), 3, 100);
  const auto projector = dpsco::build_projector_from_report(report, 3);
  const Eigen::MatrixXd b = projector.basis();
  const double residual = (h - h * b * b.transpose()).squaredNorm();
  CHECK(residual == doctest::Approx(9.0 + 1.0 + 0.25).epsilon(1e-9));
  CHECK_THROWS_AS(dpsco::build_projector_from_report(report, 4), std::out_of_range);
}

TEST_CASE("diagonal and degenerate traces") {
  Eigen::MatrixXd diag = Eigen::MatrixXd::Zero(4, 6);
  diag(0, 2) = 3.0;
  diag(1, 0) = -5.0;
  diag(2, 5) = 1.0;
  const auto report = dpsco::orthogonal_iteration_svd(make_trace(diag), 4, 20);
  CHECK(report.singular_values[0] == doctest::Approx(5.0).epsilon(1e-14));
  CHECK(report.singular_values[1] == doctest::Approx(3.0).epsilon(1e-14));
  CHECK(report.singular_values[2] == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(report.singular_values[3] == doctest::Approx(0.0));
  // The zero value is left out of the default fit.
  CHECK(report.fit_hi == 3);

  const auto zero = dpsco::orthogonal_iteration_svd(make_trace(Eigen::MatrixXd::Zero(3, 4)), 2, 5);
  CHECK(zero.singular_values == std::vector<double>{0.0, 0.0});
  CHECK(zero.fit_hi == 0);
  CHECK(std::isnan(zero.fit_slope));
  CHECK((zero.basis.transpose() * zero.basis - Eigen::MatrixXd::Identity(2, 2)).norm() < 1e-12);
}

TEST_CASE("orthogonal iteration validates its inputs") {
  const auto trace = make_trace(Eigen::MatrixXd::Ones(3, 4));
  CHECK_THROWS_AS(dpsco::orthogonal_iteration_svd(trace, 0), std::out_of_range);
  CHECK_THROWS_AS(dpsco::orthogonal_iteration_svd(trace, 4), std::out_of_range);
  CHECK_THROWS_AS(dpsco::orthogonal_iteration_svd(trace, 1, 0), std::invalid_argument);
  GradientTrace bad = trace;
  bad.H(0, 0) = NAN;
  CHECK_THROWS_AS(dpsco::orthogonal_iteration_svd(bad, 1), std::invalid_argument);
}

TEST_CASE("slopes at 10 and 100 iterations agree on a power-law trace") {
  std::mt19937_64 gen(21);
  std::vector<double> s(40);
  for (std::size_t i = 0; i < s.size(); ++i) s[i] = std::pow(static_cast<double>(i + 1), -0.6);
  const auto trace = make_trace(with_spectrum(80, 120, s, gen));
  const std::vector<std::size_t> counts = {10, 100};
  const auto sens = dpsco::iteration_sensitivity(trace, 20, counts, 0, 1, 20);
  CHECK(sens.slopes.size() == 2);
  CHECK(sens.spread <= 0.05);
  CHECK(sens.slopes[1] == doctest::Approx(-0.6).epsilon(0.01));
}

TEST_CASE("refit overrides the default range") {
  std::vector<double> s = {8, 4, 2, 1};
  Eigen::MatrixXd h = Eigen::MatrixXd::Zero(4, 4);
  for (Eigen::Index i = 0; i < 4; ++i) h(i, i) = s[static_cast<std::size_t>(i)];
  auto report = dpsco::orthogonal_iteration_svd(make_trace(h), 4, 30);
  dpsco::refit(report, 2, 4);
  CHECK(report.fit_lo == 2);
  CHECK(report.fit_hi == 4);
  CHECK(report.fit_slope == doctest::Approx(dpsco::powerlaw_fit(s, 2, 4).slope).epsilon(1e-12));
}
