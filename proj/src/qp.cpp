#include "hnav/qp.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

namespace hnav {

QpResult solve_qp(const Mat& P, const Vec& q, const Mat& A, const Vec& b, const Vec& x0,
                  int max_iterations) {
  const Eigen::Index m = A.rows();
  constexpr double kStepTol = 1e-9;
  constexpr double kMultTol = 1e-10;

  QpResult result;
  result.x = x0;
  result.multipliers = Vec::Zero(m);
  if (m > 0 && ((A * x0 - b).array() < -1e-7).any()) {
    result.status = QpStatus::InfeasibleStart;
    return result;
  }

  // P is factored once; each working-set step then only needs the small
  // Schur complement A_W P^-1 A_W' (a principal submatrix of A P^-1 A').
  const Eigen::LLT<Mat> llt(P);
  if (llt.info() != Eigen::Success) {
    result.status = QpStatus::Singular;
    return result;
  }
  const Mat pinv_at = llt.solve(A.transpose());
  const Mat schur = A * pinv_at;

  Vec& x = result.x;
  std::vector<Eigen::Index> working;
  std::vector<bool> in_working(static_cast<std::size_t>(m), false);

  for (int it = 0; it < max_iterations; ++it) {
    result.iterations = it + 1;
    const auto w = static_cast<Eigen::Index>(working.size());
    const Vec g = P * x + q;
    const Vec pinv_g = llt.solve(g);
    Vec lambda = Vec::Zero(w);
    Vec p = -pinv_g;
    if (w > 0) {
      Mat S(w, w);
      Vec rhs(w);
      for (Eigen::Index r = 0; r < w; ++r) {
        const Eigen::Index wr = working[static_cast<std::size_t>(r)];
        rhs(r) = A.row(wr).dot(pinv_g);
        for (Eigen::Index c = 0; c < w; ++c) S(r, c) = schur(wr, working[static_cast<std::size_t>(c)]);
      }
      lambda = S.ldlt().solve(rhs);
      if (!lambda.allFinite() || (S * lambda - rhs).norm() > 1e-6 * (1.0 + rhs.norm())) {
        result.status = QpStatus::Singular;
        return result;
      }
      for (Eigen::Index r = 0; r < w; ++r) p += lambda(r) * pinv_at.col(working[static_cast<std::size_t>(r)]);
    }

    if (p.lpNorm<Eigen::Infinity>() <= kStepTol * std::max(1.0, x.lpNorm<Eigen::Infinity>())) {
      Eigen::Index worst = -1;
      double worst_value = -kMultTol;
      for (Eigen::Index k = 0; k < w; ++k) {
        if (lambda(k) < worst_value) {
          worst_value = lambda(k);
          worst = k;
        }
      }
      if (worst < 0) {
        for (Eigen::Index k = 0; k < w; ++k)
          result.multipliers(working[static_cast<std::size_t>(k)]) = lambda(k);
        result.objective = 0.5 * x.dot(P * x) + q.dot(x);
        return result;
      }
      in_working[static_cast<std::size_t>(working[static_cast<std::size_t>(worst)])] = false;
      working.erase(working.begin() + worst);
      continue;
    }

    double alpha = 1.0;
    Eigen::Index blocking = -1;
    for (Eigen::Index i = 0; i < m; ++i) {
      if (in_working[static_cast<std::size_t>(i)]) continue;
      const double ap = A.row(i).dot(p);
      if (ap >= -1e-14) continue;
      const double slack = std::max(0.0, A.row(i).dot(x) - b(i));
      const double step = slack / -ap;
      if (step < alpha) {
        alpha = step;
        blocking = i;
      }
    }
    x += alpha * p;
    if (blocking >= 0) {
      working.push_back(blocking);
      in_working[static_cast<std::size_t>(blocking)] = true;
    }
  }
  result.status = QpStatus::IterationLimit;
  result.objective = 0.5 * x.dot(P * x) + q.dot(x);
  return result;
}

}  // namespace hnav
