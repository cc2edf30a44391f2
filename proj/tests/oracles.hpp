#pragma once

// Reference computations written independently of the library code paths.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <random>
#include <span>
#include <vector>

#include <Eigen/Dense>

namespace oracle {

/// Eigenvalues of a symmetric matrix by cyclic Jacobi rotations, descending.
inline std::vector<double> jacobi_eigenvalues(Eigen::MatrixXd a, double tol = 1e-15, int max_sweeps = 100) {
  const Eigen::Index n = a.rows();
  for (int sweep = 0; sweep < max_sweeps; ++sweep) {
    double off = 0.0;
    double total = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      for (Eigen::Index j = 0; j < n; ++j) {
        total += a(i, j) * a(i, j);
        if (i != j) off += a(i, j) * a(i, j);
      }
    }
    if (off <= tol * tol * total) break;
    for (Eigen::Index p = 0; p < n - 1; ++p) {
      for (Eigen::Index q = p + 1; q < n; ++q) {
        if (a(p, q) == 0.0) continue;
        const double theta = (a(q, q) - a(p, p)) / (2.0 * a(p, q));
        const double t = (theta >= 0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        for (Eigen::Index k = 0; k < n; ++k) {
          const double akp = a(k, p);
          const double akq = a(k, q);
          a(k, p) = c * akp - s * akq;
          a(k, q) = s * akp + c * akq;
        }
        for (Eigen::Index k = 0; k < n; ++k) {
          const double apk = a(p, k);
          const double aqk = a(q, k);
          a(p, k) = c * apk - s * aqk;
          a(q, k) = s * apk + c * aqk;
        }
      }
    }
  }
  std::vector<double> values(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) values[static_cast<std::size_t>(i)] = a(i, i);
  std::sort(values.begin(), values.end(), std::greater<>());
  return values;
}

/// Singular values of H from the Jacobi eigenvalues of its smaller Gram matrix.
inline std::vector<double> singular_values(const Eigen::MatrixXd& h) {
  const Eigen::MatrixXd gram = h.rows() <= h.cols() ? Eigen::MatrixXd(h * h.transpose())
                                                    : Eigen::MatrixXd(h.transpose() * h);
  std::vector<double> values = jacobi_eigenvalues(gram);
  for (double& v : values) v = std::sqrt(std::max(0.0, v));
  return values;
}

/// Random matrix with orthonormal columns, from Gram-Schmidt on Gaussian columns.
inline Eigen::MatrixXd random_orthonormal(Eigen::Index rows, Eigen::Index cols, std::mt19937_64& gen) {
  std::normal_distribution<double> normal;
  Eigen::MatrixXd q(rows, cols);
  for (Eigen::Index j = 0; j < cols; ++j) {
    Eigen::VectorXd v(rows);
    for (Eigen::Index i = 0; i < rows; ++i) v(i) = normal(gen);
    for (int pass = 0; pass < 2; ++pass) {
      for (Eigen::Index k = 0; k < j; ++k) v -= q.col(k).dot(v) * q.col(k);
    }
    q.col(j) = v / v.norm();
  }
  return q;
}

/// Central finite-difference gradient with step h.
inline std::vector<double> central_difference(const std::function<double(std::span<const double>)>& f,
                                              std::span<const double> x, double h) {
  std::vector<double> probe(x.begin(), x.end());
  std::vector<double> grad(x.size());
  for (std::size_t j = 0; j < x.size(); ++j) {
    const double saved = probe[j];
    probe[j] = saved + h;
    const double up = f(probe);
    probe[j] = saved - h;
    const double down = f(probe);
    probe[j] = saved;
    grad[j] = (up - down) / (2.0 * h);
  }
  return grad;
}

/// sqrt(sum_j a_j v_j^2) with the weights and vector given explicitly.
inline double weighted_norm(std::span<const double> a, std::span<const double> v) {
  long double acc = 0.0L;
  for (std::size_t j = 0; j < v.size(); ++j) acc += static_cast<long double>(a[j]) * v[j] * v[j];
  return static_cast<double>(std::sqrt(acc));
}

inline double l2(std::span<const double> v) {
  long double acc = 0.0L;
  for (double x : v) acc += static_cast<long double>(x) * x;
  return static_cast<double>(std::sqrt(acc));
}

}  // namespace oracle
