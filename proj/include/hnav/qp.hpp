#ifndef HNAV_QP_HPP
#define HNAV_QP_HPP

#include "hnav/common.hpp"

namespace hnav {

enum class QpStatus { Solved, IterationLimit, Singular, InfeasibleStart };

struct QpResult {
  Vec x;
  Vec multipliers;  // one per inequality row, zero for inactive rows
  QpStatus status = QpStatus::Solved;
  int iterations = 0;
  double objective = 0.0;
};

/// Primal active-set method for
///   minimize 0.5 x'Px + q'x  subject to  A x >= b,
/// with P symmetric positive definite, started from a feasible x0. Each step
/// solves the equality-constrained subproblem on the working set through its
/// KKT system.
QpResult solve_qp(const Mat& P, const Vec& q, const Mat& A, const Vec& b, const Vec& x0,
                  int max_iterations = 500);

}  // namespace hnav

#endif  // HNAV_QP_HPP
