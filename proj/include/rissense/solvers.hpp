#pragma once

// Solvers for min_d ||b + A_c d||^2 under the regimes used for RIS nulling.
//
//   lss           unregularized normal equations, needs full column rank
//   pinv          minimum-norm least squares through a truncated SVD
//   clipped_pinv  pinv projected onto the passive set |d_i| <= 1
//   ridge         ||b + A_c d||^2 + lambda ||d||^2
//   lasso_ista    1/2 ||b + A_c d||^2 + lambda ||d||_1, proximal gradient
//   pgd           ||b + A_c d||^2 subject to |d_i| <= 1, projected gradient
//
// The LASSO objective carries the 1/2 factor so the shrinkage iteration
// d <- S_{lambda*alpha}(d - alpha A_c^H (A_c d + b)) applies as written. The
// unscaled form ||.||^2 + 2 lambda ||d||_1 has the same minimizer.
//
// Every solver returns d = 0 without iterating when b = 0.

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "rissense/channel_model.hpp"
#include "rissense/instrumentation.hpp"
#include "rissense/types.hpp"

namespace rissense {

enum class SolverMethod { lss, pinv, clipped_pinv, ridge, lasso_ista, pgd };

inline std::string_view to_string(SolverMethod m) {
  switch (m) {
    case SolverMethod::lss: return "lss";
    case SolverMethod::pinv: return "pinv";
    case SolverMethod::clipped_pinv: return "clipped_pinv";
    case SolverMethod::ridge: return "ridge";
    case SolverMethod::lasso_ista: return "lasso_ista";
    case SolverMethod::pgd: return "pgd";
  }
  return "unknown";
}

inline std::optional<SolverMethod> parse_method(std::string_view s) {
  for (auto m : {SolverMethod::lss, SolverMethod::pinv, SolverMethod::clipped_pinv,
                 SolverMethod::ridge, SolverMethod::lasso_ista, SolverMethod::pgd})
    if (to_string(m) == s) return m;
  return std::nullopt;
}

struct SolverSpec {
  SolverMethod method = SolverMethod::pinv;
  double lambda = 0.0;
  std::optional<double> step;      // nullopt: 1/Lipschitz of the smooth part
  double tol = 1e-10;              // on ||d_{k+1} - d_k||
  long max_iter = 100000;
  std::optional<double> rank_tol;  // relative to sigma_max; nullopt: max(m,n)*eps

  void validate() const {
    if (!(lambda >= 0.0) || !std::isfinite(lambda))
      throw ArgumentError("lambda must be finite and >= 0, got " + std::to_string(lambda));
    if (!(tol > 0.0)) throw ArgumentError("tol must be > 0, got " + std::to_string(tol));
    if (max_iter < 1) throw ArgumentError("max_iter must be >= 1, got " + std::to_string(max_iter));
    if (step && !(*step > 0.0 && std::isfinite(*step)))
      throw ArgumentError("step must be positive or auto, got " + std::to_string(*step));
    if (rank_tol && !(*rank_tol > 0.0))
      throw ArgumentError("rank_tol must be > 0, got " + std::to_string(*rank_tol));
  }
};

struct SolveResult {
  RisVector d;
  double objective = 0.0;
  long iterations = 0;
  bool converged = true;
  std::vector<double> objective_trace;  // f(d_0), f(d_1), ... for ISTA and PGD
};

/// Called with (k, d_k) after every ISTA or PGD iterate, d_0 included.
using IterateObserver = std::function<void(long, const CVector&)>;

inline double default_rank_tol(Index rows, Index cols) {
  return static_cast<double>(std::max(rows, cols)) * std::numeric_limits<double>::epsilon();
}

namespace detail {

inline void check_system(const CMatrix& A_c, const CVector& b) {
  require_dims(A_c.rows() > 0 && A_c.cols() > 0, "A_c is empty");
  require_dims(A_c.rows() == b.size(), "A_c is " + shape(A_c) + " but b has length " +
                                           std::to_string(b.size()));
}

inline SolveResult zero_result(Index n, RisMode mode = RisMode::active) {
  SolveResult r;
  r.d = RisVector{CVector::Zero(n), mode};
  return r;
}

inline double l1_norm(const CVector& d) { return d.cwiseAbs().sum(); }

inline bool all_finite(const CVector& v) {
  for (Index i = 0; i < v.size(); ++i)
    if (!std::isfinite(v[i].real()) || !std::isfinite(v[i].imag())) return false;
  return true;
}

// Solve a Hermitian positive-definite system, reporting singularity.
inline CVector hpd_solve(const CMatrix& G, const CVector& rhs, const char* what) {
  Eigen::LLT<CMatrix> llt(G);
  if (llt.info() != Eigen::Success) throw SingularityError(std::string(what) + " is not invertible");
  return llt.solve(rhs);
}

}  // namespace detail

inline double spectral_norm(const CMatrix& M) {
  if (M.size() == 0) return 0.0;
  Eigen::JacobiSVD<CMatrix> svd(M);
  return svd.singularValues()(0);
}

// Truncated-SVD pseudo-inverse together with the numerical rank it used.
struct PseudoInverse {
  CMatrix matrix;
  Index rank = 0;
  double sigma_max = 0.0;
};

/// V Sigma^+ U^H, zeroing singular values <= rank_tol * sigma_max.
inline PseudoInverse pinv_decompose(const CMatrix& M, std::optional<double> rank_tol = {}) {
  detail::require_dims(M.rows() > 0 && M.cols() > 0, "pinv of an empty matrix");
  const double tol = rank_tol.value_or(default_rank_tol(M.rows(), M.cols()));
  Eigen::JacobiSVD<CMatrix> svd(M, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Eigen::VectorXd& s = svd.singularValues();
  PseudoInverse out;
  out.sigma_max = s.size() ? s(0) : 0.0;
  const double cutoff = tol * out.sigma_max;
  Eigen::VectorXd s_inv = Eigen::VectorXd::Zero(s.size());
  for (Index i = 0; i < s.size(); ++i) {
    if (s(i) > cutoff) {
      s_inv(i) = 1.0 / s(i);
      ++out.rank;
    }
  }
  out.matrix = svd.matrixV() * s_inv.asDiagonal() * svd.matrixU().adjoint();
  return out;
}

inline CMatrix pinv(const CMatrix& M, std::optional<double> rank_tol = {}) {
  return pinv_decompose(M, rank_tol).matrix;
}

inline Index numerical_rank(const CMatrix& M, std::optional<double> rank_tol = {}) {
  const double tol = rank_tol.value_or(default_rank_tol(M.rows(), M.cols()));
  Eigen::JacobiSVD<CMatrix> svd(M);
  const Eigen::VectorXd& s = svd.singularValues();
  if (s.size() == 0) return 0;
  return (s.array() > tol * s(0)).count();
}

/// Objective each method minimizes, evaluated at d.
inline double objective(SolverMethod method, const CMatrix& A_c, const CVector& b,
                        const CVector& d, double lambda = 0.0) {
  const double fit = (b + A_c * d).squaredNorm();
  switch (method) {
    case SolverMethod::ridge: return fit + lambda * d.squaredNorm();
    case SolverMethod::lasso_ista: return 0.5 * fit + lambda * detail::l1_norm(d);
    default: return fit;
  }
}

/// d = -(A_c^H A_c)^{-1} A_c^H b. Throws SingularityError when A_c lacks full
/// column rank.
inline SolveResult solve_lss(const CMatrix& A_c, const CVector& b,
                             std::optional<double> rank_tol = {},
                             MatvecCounter* counter = nullptr) {
  detail::check_system(A_c, b);
  if (b.isZero(0.0)) return detail::zero_result(A_c.cols());
  const Index rank = numerical_rank(A_c, rank_tol);
  if (rank < A_c.cols())
    throw SingularityError("A_c^H A_c is singular: rank(A_c) = " + std::to_string(rank) + " < n = " +
                           std::to_string(A_c.cols()) + "; use the pseudo-inverse solver");
  detail::count_inverse(counter);
  const CMatrix G = A_c.adjoint() * A_c;
  SolveResult r;
  r.d.d = -detail::hpd_solve(G, A_c.adjoint() * b, "A_c^H A_c");
  r.objective = objective(SolverMethod::lss, A_c, b, r.d.d);
  return r;
}

/// d = -A_c^+ b, the minimum-norm minimizer.
inline SolveResult solve_pinv(const CMatrix& A_c, const CVector& b,
                              std::optional<double> rank_tol = {},
                              MatvecCounter* counter = nullptr) {
  detail::check_system(A_c, b);
  if (b.isZero(0.0)) return detail::zero_result(A_c.cols());
  detail::count_inverse(counter);
  SolveResult r;
  r.d.d = -(pinv(A_c, rank_tol) * b);
  r.objective = objective(SolverMethod::pinv, A_c, b, r.d.d);
  return r;
}

/// Entries with |d_i| > 1 are scaled back to the unit circle.
inline CVector clip_unit(const CVector& d) {
  CVector out = d;
  for (Index i = 0; i < out.size(); ++i) {
    const double mag = std::abs(out[i]);
    if (mag > 1.0) out[i] /= mag;
  }
  return out;
}

inline SolveResult solve_clipped_pinv(const CMatrix& A_c, const CVector& b,
                                      std::optional<double> rank_tol = {},
                                      MatvecCounter* counter = nullptr) {
  SolveResult r = solve_pinv(A_c, b, rank_tol, counter);
  r.d.d = clip_unit(r.d.d);
  r.d.mode = RisMode::passive;
  r.objective = objective(SolverMethod::clipped_pinv, A_c, b, r.d.d);
  return r;
}

/// d = -(A_c^H A_c + lambda I)^{-1} A_c^H b. lambda = 0 falls back to pinv.
inline SolveResult solve_ridge(const CMatrix& A_c, const CVector& b, double lambda,
                               std::optional<double> rank_tol = {},
                               MatvecCounter* counter = nullptr) {
  detail::check_system(A_c, b);
  if (!(lambda >= 0.0) || !std::isfinite(lambda))
    throw ArgumentError("ridge lambda must be finite and >= 0, got " + std::to_string(lambda));
  if (lambda == 0.0) return solve_pinv(A_c, b, rank_tol, counter);
  if (b.isZero(0.0)) return detail::zero_result(A_c.cols());
  detail::count_inverse(counter);
  CMatrix M = A_c.adjoint() * A_c;
  M.diagonal().array() += lambda;
  SolveResult r;
  r.d.d = -detail::hpd_solve(M, A_c.adjoint() * b, "A_c^H A_c + lambda I");
  r.objective = objective(SolverMethod::ridge, A_c, b, r.d.d, lambda);
  return r;
}

/// Complex soft threshold: magnitudes shrink by thr, phases are kept, and
/// entries with |d_i| <= thr become zero.
inline CVector soft_threshold(const CVector& d, double thr) {
  if (!(thr >= 0.0)) throw ArgumentError("soft-threshold level must be >= 0");
  CVector out(d.size());
  for (Index i = 0; i < d.size(); ++i) {
    const double mag = std::abs(d[i]);
    out[i] = mag <= thr ? cplx(0.0) : (1.0 - thr / mag) * d[i];
  }
  return out;
}

/// ISTA on 1/2 ||b + A_c d||^2 + lambda ||d||_1 starting from d = 0.
inline SolveResult solve_lasso_ista(const CMatrix& A_c, const CVector& b, double lambda,
                                    const SolverSpec& spec = {},
                                    const IterateObserver& observe = {}) {
  detail::check_system(A_c, b);
  if (!(lambda >= 0.0)) throw ArgumentError("lasso lambda must be >= 0");
  spec.validate();
  const Index n = A_c.cols();
  if (b.isZero(0.0)) return detail::zero_result(n);

  const double sigma = spectral_norm(A_c);
  if (sigma == 0.0) return detail::zero_result(n);
  const double alpha = spec.step.value_or(1.0 / (sigma * sigma));
  const double thr = lambda * alpha;

  SolveResult r;
  r.converged = false;
  CVector d = CVector::Zero(n);
  r.objective_trace.push_back(objective(SolverMethod::lasso_ista, A_c, b, d, lambda));
  if (observe) observe(0, d);
  for (long k = 1; k <= spec.max_iter; ++k) {
    const CVector grad = A_c.adjoint() * (A_c * d + b);
    CVector next = soft_threshold(d - alpha * grad, thr);
    if (!detail::all_finite(next)) throw NumericalError("ISTA produced a non-finite iterate", k);
    const double step_norm = (next - d).norm();
    d = std::move(next);
    r.iterations = k;
    r.objective_trace.push_back(objective(SolverMethod::lasso_ista, A_c, b, d, lambda));
    if (observe) observe(k, d);
    if (step_norm < spec.tol) {
      r.converged = true;
      break;
    }
  }
  r.d.d = d;
  r.objective = r.objective_trace.back();
  return r;
}

/// Closed-form LASSO minimizer S_lambda(-A_c^H b), valid when A_c has
/// orthonormal columns.
inline RisVector lasso_closed_form_orthonormal(const CMatrix& A_c, const CVector& b,
                                               double lambda) {
  detail::check_system(A_c, b);
  const CMatrix gram = A_c.adjoint() * A_c;
  const double dev = (gram - CMatrix::Identity(A_c.cols(), A_c.cols())).cwiseAbs().maxCoeff();
  if (dev > 1e-8)
    throw PreconditionError("A_c columns are not orthonormal (max |A_c^H A_c - I| = " +
                            std::to_string(dev) + ")");
  return RisVector{soft_threshold(-(A_c.adjoint() * b), lambda), RisMode::active};
}

/// Projected gradient descent on ||b + A_c d||^2 over |d_i| <= 1, from d = 0.
inline SolveResult solve_pgd(const CMatrix& A_c, const CVector& b, const SolverSpec& spec = {},
                             const IterateObserver& observe = {}) {
  detail::check_system(A_c, b);
  spec.validate();
  const Index n = A_c.cols();
  if (b.isZero(0.0)) return detail::zero_result(n, RisMode::passive);

  const double sigma = spectral_norm(A_c);
  if (sigma == 0.0) return detail::zero_result(n, RisMode::passive);
  const double alpha = spec.step.value_or(1.0 / (2.0 * sigma * sigma));

  SolveResult r;
  r.converged = false;
  r.d.mode = RisMode::passive;
  CVector d = CVector::Zero(n);
  r.objective_trace.push_back(objective(SolverMethod::pgd, A_c, b, d));
  if (observe) observe(0, d);
  for (long k = 1; k <= spec.max_iter; ++k) {
    const CVector grad = 2.0 * (A_c.adjoint() * (A_c * d + b));
    CVector next = clip_unit(d - alpha * grad);
    if (!detail::all_finite(next)) throw NumericalError("PGD produced a non-finite iterate", k);
    const double step_norm = (next - d).norm();
    d = std::move(next);
    r.iterations = k;
    r.objective_trace.push_back(objective(SolverMethod::pgd, A_c, b, d));
    if (observe) observe(k, d);
    if (step_norm < spec.tol) {
      r.converged = true;
      break;
    }
  }
  r.d.d = d;
  r.objective = r.objective_trace.back();
  return r;
}

/// Dispatch on spec.method.
inline SolveResult solve(const SolverSpec& spec, const CMatrix& A_c, const CVector& b,
                         MatvecCounter* counter = nullptr) {
  spec.validate();
  switch (spec.method) {
    case SolverMethod::lss: return solve_lss(A_c, b, spec.rank_tol, counter);
    case SolverMethod::pinv: return solve_pinv(A_c, b, spec.rank_tol, counter);
    case SolverMethod::clipped_pinv: return solve_clipped_pinv(A_c, b, spec.rank_tol, counter);
    case SolverMethod::ridge: return solve_ridge(A_c, b, spec.lambda, spec.rank_tol, counter);
    case SolverMethod::lasso_ista: return solve_lasso_ista(A_c, b, spec.lambda, spec);
    case SolverMethod::pgd: return solve_pgd(A_c, b, spec);
  }
  throw UnsupportedMethodError("unknown solver method");
}

inline SolveResult solve(const SolverSpec& spec, const ChannelSet& ch,
                         MatvecCounter* counter = nullptr) {
  return solve(spec, effective_matrix(ch), ch.b, counter);
}

}  // namespace rissense
