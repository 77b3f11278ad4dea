#pragma once

#include <cstdint>

#include "rissense/types.hpp"

namespace rissense {

// Operation tally for one computation. A dense (m x n or adjoint) matrix
// times a vector counts as one matvec; diagonal scalings and vector sums are
// free. Never shared between concurrent trials.
struct MatvecCounter {
  std::int64_t matvec_count = 0;
  std::int64_t inverse_count = 0;

  void add_matvec(std::int64_t k = 1) { matvec_count += k; }
  void add_inverse(std::int64_t k = 1) { inverse_count += k; }
};

namespace detail {

inline void count_inverse(MatvecCounter* counter) {
  if (counter) counter->add_inverse();
}

template <class Mat>
CVector counted_mul(const Mat& M, const CVector& v, MatvecCounter& counter) {
  require_dims(M.cols() == v.size(), "matvec: matrix has " + std::to_string(M.cols()) +
                                         " columns, vector has length " + std::to_string(v.size()));
  counter.add_matvec();
  return M * v;
}

template <class Mat>
CVector counted_adjoint_mul(const Mat& M, const CVector& v, MatvecCounter& counter) {
  require_dims(M.rows() == v.size(), "adjoint matvec: matrix has " + std::to_string(M.rows()) +
                                         " rows, vector has length " + std::to_string(v.size()));
  counter.add_matvec();
  return M.adjoint() * v;
}

}  // namespace detail

}  // namespace rissense
