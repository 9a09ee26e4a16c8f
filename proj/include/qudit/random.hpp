// Seeded random unitaries for tests and benchmarks.
#pragma once

#include <Eigen/QR>

#include <random>

#include "core.hpp"

namespace qd {

// Haar measure via QR of a complex Ginibre matrix with the R-diagonal phases removed.
inline Mat haar_unitary(int n, std::mt19937_64& rng) {
  std::normal_distribution<double> g(0.0, 1.0);
  Mat Z(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) Z(i, j) = cplx(g(rng), g(rng)) / std::sqrt(2.0);
  Eigen::HouseholderQR<Mat> qr(Z);
  Mat Q = qr.householderQ();
  Mat R = qr.matrixQR().triangularView<Eigen::Upper>();
  for (int k = 0; k < n; ++k) Q.col(k) *= R(k, k) / std::abs(R(k, k));
  return Q;
}

inline Mat haar_special_unitary(int n, std::mt19937_64& rng) {
  Mat U = haar_unitary(n, rng);
  return U * std::exp(-kI * std::arg(U.determinant()) / double(n));
}

// Unitary with eigenphases spread at least `gap` apart (generic spectrum).
inline Mat random_generic_unitary(int n, std::mt19937_64& rng, double gap = 0.2) {
  for (;;) {
    Mat U = haar_unitary(n, rng);
    Eigen::ComplexEigenSolver<Mat> es(U);
    std::vector<double> ph;
    for (int k = 0; k < n; ++k) ph.push_back(std::arg(es.eigenvalues()(k)));
    std::sort(ph.begin(), ph.end());
    double worst = ph.front() + 2 * kPi - ph.back();
    for (int k = 1; k < n; ++k) worst = std::min(worst, ph[k] - ph[k - 1]);
    if (worst >= gap) return U;
  }
}

}  // namespace qd
