#pragma once

// First-order sensitivity of the RIS solutions to channel perturbations.
//
// With r = b + A_c d the nominal residual and dA_c = dA (.) c + A (.) dc,
// the regularized normal-equation solutions (lss: shift 0, ridge: shift
// lambda) move by
//
//     dd = -(A_c^H A_c + shift I)^{-1} [ dA_c^H r + A_c^H (db + dA_c d) ],
//
// which is the usual two-term expansion of -(M + dM)^{-1}(A_c^H b + d(A_c^H b))
// rewritten with M^{-1} A_c^H b = -d.
//
// For the pseudo-inverse solution the correction update is
//
//     dd = -A_c^+ db - A_c^+ (dA (.) c) d - A_c^+ (A (.) dc) d,
//
// exact to first order when A_c is square and invertible. When A_c is wide
// or rank deficient the minimum-norm solution also rotates out of range(A_c^H);
// delta_d_pinv_full adds those terms (they lie in ker(A_c) or scale with the
// residual, so they leave the received signal unchanged to first order).
//
// Correction-path matvec accounting (cached nominal inverse, d and r):
//   lss/ridge  dA (c.d), A (dc.d), A_c^H v, dA^H r, A^H r, M^{-1} w      = 6
//   pinv       A_c^+ db, dA (c.d), A_c^+ u_A, A (dc.d), A_c^+ u_c        = 5
// None of them factorizes or inverts a matrix.

#include <cmath>
#include <iostream>
#include <optional>

#include "rissense/channel_model.hpp"
#include "rissense/instrumentation.hpp"
#include "rissense/solvers.hpp"
#include "rissense/types.hpp"

namespace rissense {

struct DriftReport {
  double true_drift_energy = 0.0;    // ||Dd||^2
  double approx_drift_energy = 0.0;  // ||dd||^2
  double error_energy = 0.0;         // ||Dd - dd||^2
  double sigma_p = 0.0;
  SolverMethod method = SolverMethod::pinv;
};

inline DriftReport make_drift_report(SolverMethod method, double sigma_p, const CVector& true_dd,
                                     const CVector& approx_dd) {
  detail::require_dims(true_dd.size() == approx_dd.size(), "drift vectors differ in length");
  return DriftReport{true_dd.squaredNorm(), approx_dd.squaredNorm(),
                     (true_dd - approx_dd).squaredNorm(), sigma_p, method};
}

// Per-channel pieces of a first-order vector expansion. The expansions are
// linear in the perturbation, so the pieces add up to the joint result.
struct DriftComponents {
  CVector from_A;
  CVector from_b;
  CVector from_c;

  CVector total() const { return from_A + from_b + from_c; }
};

struct ObjectiveSensitivity {
  double from_A = 0.0;
  double from_b = 0.0;
  double from_c = 0.0;
  double quadratic = 0.0;  // ||db + dA_c d||^2, reported separately

  double first_order() const { return from_A + from_b + from_c; }
};

namespace detail {

inline void check_perturbation(const ChannelSet& ch, const Perturbation& p) {
  check_shapes(ch);
  require_dims(p.dA.rows() == ch.m() && p.dA.cols() == ch.n(),
               "dA is " + shape(p.dA) + ", A is " + shape(ch.A));
  require_dims(p.db.size() == ch.m(), "db length does not match b");
  require_dims(p.dc.size() == ch.n(), "dc length does not match c");
}

inline void check_ris(const ChannelSet& ch, const CVector& d) {
  require_dims(d.size() == ch.n(), "RIS vector has length " + std::to_string(d.size()) +
                                       ", expected " + std::to_string(ch.n()));
}

// -(A_c^H A_c + shift I)^{-1} [dA_c^H r + A_c^H (db + dA_c d)]
inline CVector normal_equation_drift(const CMatrix& A_c, const CVector& b, const CVector& d,
                                     const CMatrix& dA_c, const CVector& db, double shift) {
  CMatrix M = A_c.adjoint() * A_c;
  M.diagonal().array() += shift;
  const CVector r = b + A_c * d;
  const CVector rhs = dA_c.adjoint() * r + A_c.adjoint() * (db + dA_c * d);
  return -hpd_solve(M, rhs, shift == 0.0 ? "A_c^H A_c" : "A_c^H A_c + lambda I");
}

inline DriftComponents split_normal_equation_drift(const ChannelSet& ch, const Perturbation& p,
                                                   const CVector& d, double shift) {
  check_perturbation(ch, p);
  check_ris(ch, d);
  const CMatrix A_c = effective_matrix(ch.A, ch.c);
  const CMatrix dA_from_A = effective_matrix(p.dA, ch.c);
  const CMatrix dA_from_c = effective_matrix(ch.A, p.dc);
  const CMatrix none = CMatrix::Zero(ch.m(), ch.n());
  const CVector no_db = CVector::Zero(ch.m());
  DriftComponents out;
  out.from_A = normal_equation_drift(A_c, ch.b, d, dA_from_A, no_db, shift);
  out.from_b = normal_equation_drift(A_c, ch.b, d, none, p.db, shift);
  out.from_c = normal_equation_drift(A_c, ch.b, d, dA_from_c, no_db, shift);
  return out;
}

}  // namespace detail

/// dA_c = dA (.) c + A (.) dc, the linear part of (A + dA)(.)(c + dc) - A(.)c.
inline CMatrix delta_A_c(const CMatrix& dA, const CVector& c, const CMatrix& A,
                         const CVector& dc) {
  detail::require_dims(dA.rows() == A.rows() && dA.cols() == A.cols(),
                       "dA is " + detail::shape(dA) + ", A is " + detail::shape(A));
  return effective_matrix(dA, c) + effective_matrix(A, dc);
}

inline CMatrix delta_A_c(const ChannelSet& ch, const Perturbation& p) {
  detail::check_perturbation(ch, p);
  return delta_A_c(p.dA, ch.c, ch.A, p.dc);
}

/// First-order drift of the LSS solution, split by channel. Throws
/// SingularityError when A_c^H A_c is not invertible.
inline DriftComponents delta_d_lss_components(const ChannelSet& ch, const Perturbation& p,
                                              const RisVector& d_opt) {
  const CMatrix A_c = effective_matrix(ch);
  if (numerical_rank(A_c) < ch.n())
    throw SingularityError("A_c^H A_c is singular: LSS sensitivity needs full column rank");
  return detail::split_normal_equation_drift(ch, p, d_opt.d, 0.0);
}

inline CVector delta_d_lss(const ChannelSet& ch, const Perturbation& p, const RisVector& d_opt) {
  return delta_d_lss_components(ch, p, d_opt).total();
}

/// First-order drift of the ridge solution; lambda must be > 0.
inline DriftComponents delta_d_ridge_components(const ChannelSet& ch, const Perturbation& p,
                                                const RisVector& d_opt, double lambda) {
  if (!(lambda > 0.0) || !std::isfinite(lambda))
    throw ArgumentError("ridge sensitivity needs lambda > 0, got " + std::to_string(lambda));
  return detail::split_normal_equation_drift(ch, p, d_opt.d, lambda);
}

inline CVector delta_d_ridge(const ChannelSet& ch, const Perturbation& p, const RisVector& d_opt,
                             double lambda) {
  return delta_d_ridge_components(ch, p, d_opt, lambda).total();
}

/// Pseudo-inverse correction update, per channel:
/// -A_c^+ db, -A_c^+ (dA (.) c) d and -A_c^+ (A (.) dc) d.
inline DriftComponents delta_d_pinv_components(const CMatrix& A_c_pinv, const RisVector& d_opt,
                                               const Perturbation& p, const ChannelSet& ch) {
  detail::check_perturbation(ch, p);
  detail::check_ris(ch, d_opt.d);
  detail::require_dims(A_c_pinv.rows() == ch.n() && A_c_pinv.cols() == ch.m(),
                       "A_c^+ is " + detail::shape(A_c_pinv) + ", expected n x m");
  const CVector& d = d_opt.d;
  DriftComponents out;
  out.from_b = -(A_c_pinv * p.db);
  out.from_A = -(A_c_pinv * (p.dA * ch.c.cwiseProduct(d)));
  out.from_c = -(A_c_pinv * (ch.A * p.dc.cwiseProduct(d)));
  return out;
}

inline CVector delta_d_pinv(const CMatrix& A_c_pinv, const RisVector& d_opt,
                            const Perturbation& p, const ChannelSet& ch) {
  return delta_d_pinv_components(A_c_pinv, d_opt, p, ch).total();
}

/// Complete first-order drift of d = -A_c^+ b for a rank-preserving
/// perturbation:
///
///   dd = -A_c^+ (db + dA_c d) - A_c^+ A_c^{+H} dA_c^H r + (I - A_c^+ A_c) dA_c^H A_c^{+H} d
///
/// The last two terms vanish for square invertible A_c.
inline CVector delta_d_pinv_full(const ChannelSet& ch, const Perturbation& p,
                                 const RisVector& d_opt, std::optional<double> rank_tol = {}) {
  detail::check_perturbation(ch, p);
  detail::check_ris(ch, d_opt.d);
  const CMatrix A_c = effective_matrix(ch);
  const CMatrix P = pinv(A_c, rank_tol);
  const CMatrix dA_c = delta_A_c(ch, p);
  const CVector& d = d_opt.d;
  const CVector r = ch.b + A_c * d;
  const CMatrix null_proj = CMatrix::Identity(ch.n(), ch.n()) - P * A_c;
  return -(P * (p.db + dA_c * d)) - P * (P.adjoint() * (dA_c.adjoint() * r)) +
         null_proj * (dA_c.adjoint() * (P.adjoint() * d));
}

inline double default_tie_tol(double lambda) { return 1e-9 * std::max(1.0, lambda); }

/// First-order change S_lambda(d + dd) - S_lambda(d) of the complex soft
/// threshold. Outside the dead zone both the magnitude and the phase of d
/// move:
///
///   (1 - lambda/|d|) dd + lambda d Re(d^* dd) / |d|^3.
///
/// Within tie_tol of |d| = lambda only outward motion survives. lambda = 0
/// is the identity map, including at d = 0.
inline cplx delta_soft_threshold(cplx d, cplx dd, double lambda,
                                 std::optional<double> tie_tol = {}) {
  if (!(lambda >= 0.0)) throw ArgumentError("soft-threshold level must be >= 0");
  if (lambda == 0.0) return dd;
  const double tie = tie_tol.value_or(default_tie_tol(lambda));
  const double mag = std::abs(d);
  if (mag > lambda + tie) {
    const double radial = (std::conj(d) * dd).real();
    return (1.0 - lambda / mag) * dd + lambda * d * (radial / (mag * mag * mag));
  }
  if (mag < lambda - tie || mag == 0.0) return 0.0;
  const double outward = (std::conj(d) * dd).real() / mag;
  return std::max(0.0, outward) * (d / mag);
}

struct LassoDrift {
  CVector delta;
  bool orthonormal_premise = true;  // false: A_c^H A_c != I, expansion is heuristic
};

/// LASSO drift composed from the LSS drift pushed through the soft
/// threshold, which is exact for A_c with orthonormal columns.
inline LassoDrift delta_d_lasso(const ChannelSet& ch, const Perturbation& p, double lambda) {
  const CMatrix A_c = effective_matrix(ch);
  const SolveResult lss = solve_lss(A_c, ch.b);
  const CVector dd = delta_d_lss(ch, p, lss.d);
  LassoDrift out;
  out.delta.resize(ch.n());
  for (Index i = 0; i < ch.n(); ++i)
    out.delta[i] = delta_soft_threshold(lss.d.d[i], dd[i], lambda);
  const CMatrix gram = A_c.adjoint() * A_c;
  out.orthonormal_premise =
      (gram - CMatrix::Identity(ch.n(), ch.n())).cwiseAbs().maxCoeff() <= 1e-8;
  if (!out.orthonormal_premise)
    std::clog << "rissense: warning: LASSO drift expansion applied to non-orthonormal A_c\n";
  return out;
}

/// First-order change of f = ||b + A_c d||^2 at a fixed d, by channel, plus
/// the exact quadratic remainder of the linearized channel.
inline ObjectiveSensitivity delta_f_lss(const ChannelSet& ch, const Perturbation& p,
                                        const RisVector& d) {
  detail::check_perturbation(ch, p);
  detail::check_ris(ch, d.d);
  const CVector r = residual(ch, d.d);
  const CVector u_A = p.dA * ch.c.cwiseProduct(d.d);
  const CVector u_c = ch.A * p.dc.cwiseProduct(d.d);
  ObjectiveSensitivity out;
  out.from_b = 2.0 * r.dot(p.db).real();
  out.from_A = 2.0 * r.dot(u_A).real();
  out.from_c = 2.0 * r.dot(u_c).real();
  out.quadratic = (p.db + u_A + u_c).squaredNorm();
  return out;
}

/// d' - d with d' re-solved from scratch on the perturbed channels.
inline CVector true_drift(const SolverSpec& spec, const ChannelSet& ch, const Perturbation& p) {
  const SolveResult nominal = solve(spec, ch);
  const SolveResult perturbed = solve(spec, apply_perturbation(ch, p));
  return perturbed.d.d - nominal.d.d;
}

/// The first-order drift each method has a formula for: lss, ridge (lambda),
/// pinv (complete minimum-norm expansion) and lasso_ista (soft-threshold
/// composition). PGD and clipped pinv have none.
inline CVector approx_drift(const SolverSpec& spec, const ChannelSet& ch, const Perturbation& p,
                            const RisVector& d_opt) {
  switch (spec.method) {
    case SolverMethod::lss: return delta_d_lss(ch, p, d_opt);
    case SolverMethod::ridge:
      if (spec.lambda == 0.0) return delta_d_pinv_full(ch, p, d_opt, spec.rank_tol);
      return delta_d_ridge(ch, p, d_opt, spec.lambda);
    case SolverMethod::pinv: return delta_d_pinv_full(ch, p, d_opt, spec.rank_tol);
    case SolverMethod::lasso_ista: return delta_d_lasso(ch, p, spec.lambda).delta;
    default:
      throw UnsupportedMethodError("no first-order drift formula for " +
                                   std::string(to_string(spec.method)));
  }
}

inline RisVector first_order_correct(const RisVector& d, const CVector& dd, RisMode mode) {
  detail::require_dims(d.d.size() == dd.size(), "correction length " + std::to_string(dd.size()) +
                                                    " does not match RIS length " +
                                                    std::to_string(d.d.size()));
  CVector out = d.d + dd;
  if (mode == RisMode::passive) out = clip_unit(out);
  return RisVector{std::move(out), mode};
}

// Nominal solve with the factorization kept around for cheap updates.
struct CorrectionCache {
  SolverMethod method = SolverMethod::pinv;
  double lambda = 0.0;
  ChannelSet channels;
  CMatrix A_c;
  CMatrix solve_matrix;  // (A_c^H A_c)^{-1}, (A_c^H A_c + lambda I)^{-1} or A_c^+
  RisVector d;
  CVector residual;      // b + A_c d
};

inline bool has_correction_path(SolverMethod m) {
  return m == SolverMethod::lss || m == SolverMethod::ridge || m == SolverMethod::pinv;
}

/// Solve on the nominal channels and cache what the correction path needs.
/// Counts the one inversion it performs.
inline CorrectionCache prepare_correction(const SolverSpec& spec, const ChannelSet& ch,
                                          MatvecCounter* counter = nullptr) {
  spec.validate();
  if (!has_correction_path(spec.method))
    throw UnsupportedMethodError("no first-order correction path for " +
                                 std::string(to_string(spec.method)));
  CorrectionCache cache;
  cache.method = spec.method;
  cache.lambda = spec.lambda;
  cache.channels = ch;
  cache.A_c = effective_matrix(ch);
  const Index n = ch.n();
  detail::count_inverse(counter);
  const bool normal_eqs =
      spec.method == SolverMethod::lss ||
      (spec.method == SolverMethod::ridge && spec.lambda > 0.0);
  if (normal_eqs) {
    if (spec.method == SolverMethod::lss && numerical_rank(cache.A_c, spec.rank_tol) < n)
      throw SingularityError("A_c^H A_c is singular: LSS correction needs full column rank");
    CMatrix M = cache.A_c.adjoint() * cache.A_c;
    if (spec.method == SolverMethod::ridge) M.diagonal().array() += spec.lambda;
    Eigen::LLT<CMatrix> llt(M);
    if (llt.info() != Eigen::Success) throw SingularityError("normal matrix is not invertible");
    cache.solve_matrix = llt.solve(CMatrix::Identity(n, n));
    cache.d.d = -(cache.solve_matrix * (cache.A_c.adjoint() * ch.b));
  } else {
    cache.method = SolverMethod::pinv;
    cache.solve_matrix = pinv(cache.A_c, spec.rank_tol);
    cache.d.d = -(cache.solve_matrix * ch.b);
  }
  cache.residual = ch.b + cache.A_c * cache.d.d;
  return cache;
}

/// First-order update of the cached solution, evaluated with matvecs only.
inline CVector correction_delta(const CorrectionCache& cache, const Perturbation& p,
                                MatvecCounter& counter) {
  const ChannelSet& ch = cache.channels;
  detail::check_perturbation(ch, p);
  const CVector& d = cache.d.d;
  using detail::counted_adjoint_mul;
  using detail::counted_mul;

  if (cache.method == SolverMethod::pinv) {
    const CVector from_b = counted_mul(cache.solve_matrix, p.db, counter);
    const CVector u_A = counted_mul(p.dA, ch.c.cwiseProduct(d), counter);
    const CVector from_A = counted_mul(cache.solve_matrix, u_A, counter);
    const CVector u_c = counted_mul(ch.A, p.dc.cwiseProduct(d), counter);
    const CVector from_c = counted_mul(cache.solve_matrix, u_c, counter);
    return -(from_b + from_A + from_c);
  }

  // dA_c d = dA (c.d) + A (dc.d);  dA_c^H r = conj(c).(dA^H r) + conj(dc).(A^H r)
  const CVector u = counted_mul(p.dA, ch.c.cwiseProduct(d), counter) +
                    counted_mul(ch.A, p.dc.cwiseProduct(d), counter);
  const CVector fit = counted_adjoint_mul(cache.A_c, p.db + u, counter);
  const CVector drift_r =
      ch.c.conjugate().cwiseProduct(counted_adjoint_mul(p.dA, cache.residual, counter)) +
      p.dc.conjugate().cwiseProduct(counted_adjoint_mul(ch.A, cache.residual, counter));
  return -counted_mul(cache.solve_matrix, CVector(fit + drift_r), counter);
}

/// Cost of one correction update on a seeded (m, n) instance. Throws when
/// the count exceeds the budget (6 for lss and ridge, 5 for pinv) or when
/// the update inverts anything.
inline MatvecCounter count_correction_cost(SolverMethod method, Index m = 8, Index n = 8,
                                           std::uint64_t seed = 2024, double lambda = 0.1) {
  if (!has_correction_path(method))
    throw UnsupportedMethodError("no first-order correction path for " +
                                 std::string(to_string(method)));
  SolverSpec spec;
  spec.method = method;
  spec.lambda = method == SolverMethod::ridge ? lambda : 0.0;
  const ChannelSet ch = gen_channels(m, n, seed);
  const CorrectionCache cache = prepare_correction(spec, ch);
  const Perturbation p = gen_perturbation(m, n, 1e-3, seed + 1);
  MatvecCounter counter;
  (void)correction_delta(cache, p, counter);
  const std::int64_t budget = method == SolverMethod::pinv ? 5 : 6;
  if (counter.matvec_count > budget || counter.inverse_count != 0)
    throw Error("correction path for " + std::string(to_string(method)) + " used " +
                std::to_string(counter.matvec_count) + " matvecs and " +
                std::to_string(counter.inverse_count) + " inversions");
  return counter;
}

}  // namespace rissense
