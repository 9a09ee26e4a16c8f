// Two-ququart synthesis by repeated cosine-sine decomposition.
#pragma once

#include <Eigen/SVD>

#include "two_qudit.hpp"

namespace qd {

struct CsdFactors {
  Mat u, v, x, y;
  RVec thetas;

  Mat reassemble() const {
    const int k = static_cast<int>(u.rows());
    Mat L = Mat::Zero(2 * k, 2 * k), M(2 * k, 2 * k), R = Mat::Zero(2 * k, 2 * k);
    L.topLeftCorner(k, k) = u;
    L.bottomRightCorner(k, k) = v;
    R.topLeftCorner(k, k) = x;
    R.bottomRightCorner(k, k) = y;
    Mat C = Mat::Zero(k, k), S = Mat::Zero(k, k);
    for (int i = 0; i < k; ++i) {
      C(i, i) = std::cos(thetas(i));
      S(i, i) = std::sin(thetas(i));
    }
    M << C, -S, S, C;
    return L * M * R;
  }
};

// Corner-block SVD. u, x come from the SVD of U00; v from U10 x^dag, whose
// columns are orthogonal with norms sin(theta); y row by row from whichever of
// U01, U11 carries the larger weight.
inline CsdFactors csd_step(const Mat& U) {
  if (U.rows() != U.cols() || U.rows() % 2) throw DimensionError("csd_step: need an even square matrix");
  require_unitary(U, 1e-8, "csd_step");
  const int k = static_cast<int>(U.rows()) / 2;
  const Mat U00 = U.topLeftCorner(k, k), U01 = U.topRightCorner(k, k);
  const Mat U10 = U.bottomLeftCorner(k, k), U11 = U.bottomRightCorner(k, k);
  CsdFactors f;
  f.thetas = RVec::Zero(k);

  if (std::max(U01.cwiseAbs().maxCoeff(), U10.cwiseAbs().maxCoeff()) < 1e-14) {
    f.u = U00;
    f.v = U11;
    f.x = f.y = Mat::Identity(k, k);
    return f;
  }

  Eigen::JacobiSVD<Mat> svd(U00, Eigen::ComputeFullU | Eigen::ComputeFullV);
  f.u = svd.matrixU();
  f.x = svd.matrixV().adjoint();
  const RVec sig = svd.singularValues();
  const Mat T = U10 * svd.matrixV();

  RVec c(k), s(k);
  for (int i = 0; i < k; ++i) {
    double sn = T.col(i).norm(), cs = std::clamp(sig(i), 0.0, 1.0);
    f.thetas(i) = std::atan2(sn, cs);
    c(i) = std::cos(f.thetas(i));
    s(i) = std::sin(f.thetas(i));
  }

  // Columns of v with vanishing sine are any orthonormal completion.
  constexpr double tol = 1e-9;
  f.v = Mat::Zero(k, k);
  std::vector<int> missing;
  for (int i = 0; i < k; ++i) {
    double sn = T.col(i).norm();
    if (sn > tol)
      f.v.col(i) = T.col(i) / sn;
    else
      missing.push_back(i);
  }
  int probe = 0;
  for (int i : missing) {
    for (;; ++probe) {
      Vec e = Vec::Zero(k);
      e(probe % k) = 1.0;
      for (int j = 0; j < k; ++j) e -= f.v.col(j) * (f.v.col(j).adjoint() * e)(0, 0);
      if (e.norm() > 0.5) {
        f.v.col(i) = e / e.norm();
        ++probe;
        break;
      }
      if (probe > 4 * k) throw ConvergenceError("csd_step: cannot complete basis");
    }
  }
  f.v = polar_unitary(f.v);

  f.y.resize(k, k);
  const Mat A = f.u.adjoint() * U01, B = f.v.adjoint() * U11;
  for (int i = 0; i < k; ++i) {
    if (s(i) >= c(i))
      f.y.row(i) = -A.row(i) / s(i);
    else
      f.y.row(i) = B.row(i) / c(i);
  }
  f.y = polar_unitary(f.y);
  return f;
}

// sum_n R_n (x) |n><n| on (rotated = qudit 0, selector = qudit 1), where R_n
// is Ry^{pair}(phi_n) for each listed level pair in order. Lowered with the
// selector as ECR control, i.e. reversed ECR.
struct RyFamily {
  int i, j;
  std::vector<double> phis;  // one angle per selector state
};

inline void append_multiplexed_ry(QuditCircuit& c, const std::vector<RyFamily>& fams) {
  const int d = c.d;
  for (int n = 0; n < d; ++n)
    for (const auto& f : fams) {
      if (static_cast<int>(f.phis.size()) != d) throw DimensionError("multiplexed Ry: need d angles");
      if (std::abs(f.phis[n]) < kAngleEps) continue;
      append_cm_rx_pair(c, n, f.i, f.j, f.phis[n], kPi / 2, /*selector=*/1, /*rotated=*/0);
    }
  cancel_permutation_pairs(c);
}

inline QuditCircuit controlled_multiplexed_ry(const std::vector<double>& thetas, int i, int j,
                                              EcrDirection dir = EcrDirection::Reversed, int d = 4) {
  if (dir != EcrDirection::Reversed) throw ValidationError("multiplexed Ry is lowered with reversed ECR");
  QuditCircuit c(d, 2);
  if (static_cast<int>(thetas.size()) == d) {
    append_multiplexed_ry(c, {{i, j, thetas}});
  } else if (static_cast<int>(thetas.size()) == 2 * d) {
    // Middle layer: Ry^{02}(theta_n) Ry^{13}(theta_{d+n}); (i, j) is ignored.
    std::vector<double> a(thetas.begin(), thetas.begin() + d), b(thetas.begin() + d, thetas.end());
    append_multiplexed_ry(c, {{0, 2, a}, {1, 3, b}});
  } else {
    throw DimensionError("controlled_multiplexed_ry: expected d or 2d angles");
  }
  return c;
}

// Dense oracle for the multiplexor above.
inline Mat multiplexed_ry_matrix(const std::vector<RyFamily>& fams, int d = 4) {
  Mat out = Mat::Zero(d * d, d * d);
  for (int n = 0; n < d; ++n) {
    Mat R = Mat::Identity(d, d);
    for (const auto& f : fams) R = rx_pair(d, f.i, f.j, f.phis[n], kPi / 2) * R;
    Mat P = Mat::Zero(d, d);
    P(n, n) = 1.0;
    out += kron(R, P);
  }
  return out;
}

inline void append_block_diagonal(QuditCircuit& c, const std::vector<Mat>& blocks) {
  for (int m = 0; m < static_cast<int>(blocks.size()); ++m) append_cm_u(c, m, blocks[m]);
}

struct CsdPlan {
  // Block-diagonal layers in time order, each d blocks of d x d.
  std::vector<std::vector<Mat>> layers;
  // Cosine-sine layers in time order (between consecutive block layers).
  std::vector<std::vector<RyFamily>> rotations;
};

// U = diag(u1, v1) CS diag(x1, y1), then each half again. In time order:
// [x,y right factors] [CS of x1|y1] [x,y left factors] [middle CS]
// [u,v right factors] [CS of u1|v1] [u,v left factors].
inline CsdPlan csd_plan(const Mat& U) {
  if (U.rows() != 16 || U.cols() != 16) throw DimensionError("csd_synthesize: expects a 16 x 16 matrix");
  require_unitary(U, 1e-8, "csd_synthesize");
  CsdFactors top = csd_step(U);
  CsdFactors fu = csd_step(top.u), fv = csd_step(top.v), fx = csd_step(top.x), fy = csd_step(top.y);
  auto twice = [](const RVec& t) {
    std::vector<double> out(t.size());
    for (int i = 0; i < t.size(); ++i) out[i] = 2.0 * t(i);
    return out;
  };
  CsdPlan p;
  p.layers.push_back({fx.x, fx.y, fy.x, fy.y});
  p.rotations.push_back({{0, 1, twice(fx.thetas)}, {2, 3, twice(fy.thetas)}});
  p.layers.push_back({fx.u, fx.v, fy.u, fy.v});
  std::vector<double> mid = twice(top.thetas);
  p.rotations.push_back({{0, 2, std::vector<double>(mid.begin(), mid.begin() + 4)},
                         {1, 3, std::vector<double>(mid.begin() + 4, mid.end())}});
  p.layers.push_back({fu.x, fu.y, fv.x, fv.y});
  p.rotations.push_back({{0, 1, twice(fu.thetas)}, {2, 3, twice(fv.thetas)}});
  p.layers.push_back({fu.u, fu.v, fv.u, fv.v});
  return p;
}

inline QuditCircuit csd_synthesize(const Mat& U) {
  CsdPlan p = csd_plan(U);
  QuditCircuit c(4, 2);
  for (size_t k = 0; k < p.layers.size(); ++k) {
    append_block_diagonal(c, p.layers[k]);
    if (k < p.rotations.size()) append_multiplexed_ry(c, p.rotations[k]);
  }
  cancel_permutation_pairs(c);
  return c;
}

}  // namespace qd
