#pragma once

// Independent reference implementations and fixtures shared by the unit and
// acceptance tests. Nothing here calls into the library code it checks.

#include "seegnn/dataset_io.hpp"

#include <Eigen/Core>

#include <atomic>
#include <cmath>
#include <filesystem>
#include <random>
#include <span>
#include <string>
#include <unistd.h>
#include <vector>

namespace testsupport {

class TempDir {
 public:
  TempDir() {
    static std::atomic<int> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            ("seegnn_test_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

// Textbook two-pass covariance over standard deviations.
inline double pearson_two_pass(std::span<const double> x, std::span<const double> y) {
  const double n = static_cast<double>(x.size());
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxy = 0, sxx = 0, syy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  return (sxy / n) / (std::sqrt(sxx / n) * std::sqrt(syy / n));
}

inline std::vector<double> row_of(const seegnn::SignalMatrix& m, Eigen::Index r) {
  std::vector<double> out(static_cast<std::size_t>(m.cols()));
  for (Eigen::Index t = 0; t < m.cols(); ++t) out[static_cast<std::size_t>(t)] = m(r, t);
  return out;
}

struct EigenPair {
  double lambda_max = 0.0;
  double gap = 0.0;  // lambda_max minus the next eigenvalue
  Eigen::VectorXd vector;
};

// Cyclic Jacobi rotations on a symmetric matrix; returns the eigenvector of
// the largest eigenvalue, sign-fixed to a nonnegative sum, unit norm.
inline EigenPair jacobi_top_eigenpair(Eigen::MatrixXd a) {
  const Eigen::Index n = a.rows();
  Eigen::MatrixXd v = Eigen::MatrixXd::Identity(n, n);
  for (int sweep = 0; sweep < 100; ++sweep) {
    double off = 0;
    for (Eigen::Index i = 0; i < n; ++i)
      for (Eigen::Index j = i + 1; j < n; ++j) off += a(i, j) * a(i, j);
    if (off < 1e-30) break;
    for (Eigen::Index p = 0; p < n; ++p) {
      for (Eigen::Index q = p + 1; q < n; ++q) {
        if (std::abs(a(p, q)) < 1e-300) continue;
        const double theta = (a(q, q) - a(p, p)) / (2.0 * a(p, q));
        const double t = (theta >= 0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        for (Eigen::Index k = 0; k < n; ++k) {
          const double akp = a(k, p), akq = a(k, q);
          a(k, p) = c * akp - s * akq;
          a(k, q) = s * akp + c * akq;
        }
        for (Eigen::Index k = 0; k < n; ++k) {
          const double apk = a(p, k), aqk = a(q, k);
          a(p, k) = c * apk - s * aqk;
          a(q, k) = s * apk + c * aqk;
        }
        for (Eigen::Index k = 0; k < n; ++k) {
          const double vkp = v(k, p), vkq = v(k, q);
          v(k, p) = c * vkp - s * vkq;
          v(k, q) = s * vkp + c * vkq;
        }
      }
    }
  }
  Eigen::Index top = 0;
  for (Eigen::Index i = 1; i < n; ++i)
    if (a(i, i) > a(top, top)) top = i;
  double second = -INFINITY;
  for (Eigen::Index i = 0; i < n; ++i)
    if (i != top) second = std::max(second, a(i, i));
  EigenPair out;
  out.lambda_max = a(top, top);
  out.gap = n > 1 ? out.lambda_max - second : INFINITY;
  out.vector = v.col(top);
  if (out.vector.sum() < 0) out.vector = -out.vector;
  out.vector /= out.vector.norm();
  return out;
}

// Edge count by enumerating the upper triangle.
inline long count_edges(const Eigen::MatrixXi& adjacency) {
  long e = 0;
  for (Eigen::Index i = 0; i < adjacency.rows(); ++i)
    for (Eigen::Index j = i + 1; j < adjacency.cols(); ++j) e += adjacency(i, j) != 0;
  return e;
}

// Small, fast cohort for unit tests: four patients, one per Engel class.
inline seegnn::SynthConfig small_cohort(std::uint64_t seed) {
  seegnn::SynthConfig c;
  c.seed = seed;
  c.n_patients = 4;
  c.patients_per_engel = {1, 1, 1, 1};
  c.seizures_per_patient = {2, 3};
  c.channels_per_patient = {8, 12};
  c.duration_s = {4, 6};
  return c;
}

inline Eigen::MatrixXd random_symmetric(std::mt19937_64& gen, int n, double lo, double hi) {
  std::uniform_real_distribution<double> u(lo, hi);
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) m(i, j) = m(j, i) = u(gen);
  return m;
}

}  // namespace testsupport
