#pragma once

// Channel triples (A, b, c) of the RIS nulling model
//
//     y_r = (b + A D c) x_t + w_r,    D = diag(d)
//
// b is the direct transmitter->receiver channel (m), A the RIS->receiver
// channel (m x n) and c the transmitter->RIS channel (n). Folding c into the
// columns of A gives the effective matrix A_c, so the reflected path is the
// linear map d -> A_c d and the received power is S = ||b + A_c d||^2.

#include <cmath>
#include <cstdint>
#include <random>

#include "rissense/types.hpp"

namespace rissense {

struct ChannelSet {
  CMatrix A;  // m x n
  CVector b;  // m
  CVector c;  // n

  Index m() const { return A.rows(); }
  Index n() const { return A.cols(); }
};

struct Perturbation {
  CMatrix dA;
  CVector db;
  CVector dc;
  double sigma_p = 0.0;
};

enum class RisMode { active, passive };

struct RisVector {
  CVector d;
  RisMode mode = RisMode::active;
};

namespace detail {

// Largest number of complex entries a generator will allocate.
inline constexpr Index kMaxEntries = Index{1} << 26;

inline void check_generator_dims(Index m, Index n) {
  if (m < 1 || n < 1)
    throw DimensionError("channel dimensions must be positive, got m=" + std::to_string(m) +
                         " n=" + std::to_string(n));
  if (m > kMaxEntries / n)
    throw DimensionError("channel dimensions m=" + std::to_string(m) + " n=" + std::to_string(n) +
                         " exceed the supported size");
}

inline void check_shapes(const ChannelSet& ch) {
  require_dims(ch.b.size() == ch.A.rows(),
               "b has length " + std::to_string(ch.b.size()) + ", A is " + shape(ch.A));
  require_dims(ch.c.size() == ch.A.cols(),
               "c has length " + std::to_string(ch.c.size()) + ", A is " + shape(ch.A));
}

inline void rescale_to_unit_if_longer(CVector& v) {
  const double norm = v.norm();
  if (norm > 1.0) v /= norm;
}

}  // namespace detail

/// Fill with i.i.d. circularly-symmetric complex normals, unit variance
/// (real and imaginary parts each N(0, 1/2)).
template <class Rng>
CMatrix complex_normal(Index rows, Index cols, Rng& rng) {
  std::normal_distribution<double> half(0.0, std::sqrt(0.5));
  CMatrix out(rows, cols);
  for (Index j = 0; j < cols; ++j)
    for (Index i = 0; i < rows; ++i) {
      const double re = half(rng);
      const double im = half(rng);
      out(i, j) = cplx(re, im);
    }
  return out;
}

/// Random channel triple: A has unit-norm columns; b and c are rescaled to
/// unit norm only when the draw exceeds it.
inline ChannelSet gen_channels(Index m, Index n, std::uint64_t seed) {
  detail::check_generator_dims(m, n);
  std::mt19937_64 rng(seed);
  ChannelSet ch;
  ch.A = complex_normal(m, n, rng);
  ch.b = complex_normal(m, 1, rng);
  ch.c = complex_normal(n, 1, rng);
  for (Index j = 0; j < n; ++j) {
    const double norm = ch.A.col(j).norm();
    if (norm > 0.0) ch.A.col(j) /= norm;
  }
  detail::rescale_to_unit_if_longer(ch.b);
  detail::rescale_to_unit_if_longer(ch.c);
  return ch;
}

/// Random perturbation whose three components each have norm exactly
/// sigma_p. The direction depends only on (m, n, seed), so sweeping sigma_p
/// with a fixed seed scales a single perturbation.
inline Perturbation gen_perturbation(Index m, Index n, double sigma_p, std::uint64_t seed) {
  if (!(sigma_p >= 0.0) || !std::isfinite(sigma_p))
    throw ArgumentError("sigma_p must be a finite nonnegative number, got " +
                        std::to_string(sigma_p));
  detail::check_generator_dims(m, n);
  Perturbation p;
  p.sigma_p = sigma_p;
  if (sigma_p == 0.0) {
    p.dA = CMatrix::Zero(m, n);
    p.db = CVector::Zero(m);
    p.dc = CVector::Zero(n);
    return p;
  }
  std::mt19937_64 rng(seed);
  p.dA = complex_normal(m, n, rng);
  p.db = complex_normal(m, 1, rng);
  p.dc = complex_normal(n, 1, rng);
  p.dA *= sigma_p / p.dA.norm();
  p.db *= sigma_p / p.db.norm();
  p.dc *= sigma_p / p.dc.norm();
  return p;
}

inline Perturbation zero_perturbation(Index m, Index n) {
  return Perturbation{CMatrix::Zero(m, n), CVector::Zero(m), CVector::Zero(n), 0.0};
}

inline Perturbation negate(const Perturbation& p) {
  return Perturbation{-p.dA, -p.db, -p.dc, p.sigma_p};
}

/// (A + dA, b + db, c + dc), without re-normalization.
inline ChannelSet apply_perturbation(const ChannelSet& ch, const Perturbation& p) {
  detail::check_shapes(ch);
  detail::require_dims(p.dA.rows() == ch.A.rows() && p.dA.cols() == ch.A.cols(),
                       "dA is " + detail::shape(p.dA) + ", A is " + detail::shape(ch.A));
  detail::require_dims(p.db.size() == ch.b.size(), "db length does not match b");
  detail::require_dims(p.dc.size() == ch.c.size(), "dc length does not match c");
  return ChannelSet{ch.A + p.dA, ch.b + p.db, ch.c + p.dc};
}

/// Column j of A scaled by c_j.
inline CMatrix effective_matrix(const CMatrix& A, const CVector& c) {
  detail::require_dims(A.cols() == c.size(), "effective_matrix: A is " + detail::shape(A) +
                                                 " but c has length " + std::to_string(c.size()));
  return A * c.asDiagonal();
}

inline CMatrix effective_matrix(const ChannelSet& ch) {
  detail::check_shapes(ch);
  return effective_matrix(ch.A, ch.c);
}

inline CVector residual(const ChannelSet& ch, const CVector& d) {
  detail::check_shapes(ch);
  detail::require_dims(d.size() == ch.n(), "RIS vector has length " + std::to_string(d.size()) +
                                               ", expected " + std::to_string(ch.n()));
  return ch.b + ch.A * ch.c.cwiseProduct(d);
}

/// S = ||b + A_c d||^2, noiseless received power.
inline double signal_level(const ChannelSet& ch, const CVector& d) {
  return residual(ch, d).squaredNorm();
}

inline double signal_level(const ChannelSet& ch, const RisVector& d) {
  return signal_level(ch, d.d);
}

inline CVector received_signal(const ChannelSet& ch, const RisVector& d, cplx x_t,
                               const CVector& noise) {
  detail::require_dims(noise.size() == ch.m(), "noise length " + std::to_string(noise.size()) +
                                                   " does not match m=" + std::to_string(ch.m()));
  return residual(ch, d.d) * x_t + noise;
}

}  // namespace rissense
