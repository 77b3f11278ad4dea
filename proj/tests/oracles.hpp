#pragma once

// Test-only reference computations. Nothing here calls into the solver or
// sensitivity code paths it is used to check.

#include <cmath>
#include <complex>
#include <cstdint>
#include <algorithm>
#include <random>

#include <Eigen/Dense>

namespace oracle {

using cplx = std::complex<double>;
using CMatrix = Eigen::MatrixXcd;
using CVector = Eigen::VectorXcd;
using Index = Eigen::Index;

inline CMatrix random_matrix(Index rows, Index cols, std::mt19937_64& rng) {
  std::normal_distribution<double> g(0.0, 1.0);
  CMatrix M(rows, cols);
  for (Index j = 0; j < cols; ++j)
    for (Index i = 0; i < rows; ++i) M(i, j) = cplx(g(rng), g(rng));
  return M;
}

inline CVector random_vector(Index n, std::mt19937_64& rng) { return random_matrix(n, 1, rng); }

/// Sum of `rank` random outer products.
inline CMatrix random_rank(Index rows, Index cols, Index rank, std::mt19937_64& rng) {
  CMatrix M = CMatrix::Zero(rows, cols);
  for (Index k = 0; k < rank; ++k) M += random_vector(rows, rng) * random_vector(cols, rng).adjoint();
  return M;
}

/// rows x cols matrix with orthonormal columns (rows >= cols), from a QR of a
/// random matrix.
inline CMatrix random_orthonormal_columns(Index rows, Index cols, std::mt19937_64& rng) {
  Eigen::HouseholderQR<CMatrix> qr(random_matrix(rows, cols, rng));
  return qr.householderQ() * CMatrix::Identity(rows, cols);
}

/// argmin ||b + A x|| for full column rank A via Householder QR.
inline CVector qr_least_squares(const CMatrix& A, const CVector& b) {
  return -Eigen::HouseholderQR<CMatrix>(A).solve(b);
}

/// Literal two-term LSS/ridge sensitivity with explicit LU inverses:
/// -Mi [dAc^H b + Ac^H db] + Mi (Ac^H dAc + dAc^H Ac) Mi Ac^H b.
inline CVector literal_delta_d_regularized(const CMatrix& A_c, const CVector& b, const CMatrix& dA_c,
                                           const CVector& db, double lambda) {
  CMatrix M = A_c.adjoint() * A_c + lambda * CMatrix::Identity(A_c.cols(), A_c.cols());
  const CMatrix Mi = M.fullPivLu().inverse();
  return -Mi * (dA_c.adjoint() * b + A_c.adjoint() * db) +
         Mi * (A_c.adjoint() * dA_c + dA_c.adjoint() * A_c) * Mi * (A_c.adjoint() * b);
}

/// Exact complex soft threshold of a scalar, written independently.
inline cplx soft(cplx z, double thr) {
  const double r = std::abs(z);
  if (r <= thr) return 0.0;
  return std::polar(r - thr, std::arg(z));
}

inline double prox_objective(cplx z, cplx d, double thr) {
  return 0.5 * std::norm(z - d) + thr * std::abs(z);
}

/// 1-D grid minimizer of the prox objective along the ray through d.
inline cplx prox_ray_search(cplx d, double thr, int points = 200001) {
  const double r = std::abs(d);
  const cplx dir = r > 0.0 ? d / r : cplx(1.0);
  const double tmax = r + 1.0;
  double best = INFINITY;
  cplx arg_best = 0.0;
  for (int k = 0; k < points; ++k) {
    const cplx z = dir * (tmax * k / (points - 1));
    const double f = prox_objective(z, d, thr);
    if (f < best) {
      best = f;
      arg_best = z;
    }
  }
  return arg_best;
}

/// Smallest prox objective over a polar grid of the whole plane disk.
inline double prox_polar_min(cplx d, double thr, int radial = 801, int angular = 360) {
  const double rmax = std::abs(d) + 1.0;
  double best = INFINITY;
  for (int a = 0; a < angular; ++a)
    for (int k = 0; k < radial; ++k)
      best = std::min(best, prox_objective(std::polar(rmax * k / (radial - 1), 2.0 * M_PI * a / angular), d, thr));
  return best;
}

inline double max_abs(const CMatrix& M) { return M.size() ? M.cwiseAbs().maxCoeff() : 0.0; }

}  // namespace oracle
