#ifndef HNAV_GRADCHECK_HPP
#define HNAV_GRADCHECK_HPP

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "hnav/common.hpp"

namespace hnav {

struct TensorCheck {
  std::string name;
  double rel_error = 0.0;  // |analytic - numeric| / max(|analytic|, |numeric|), Frobenius norms
};

struct GradCheckReport {
  std::string suite;
  std::vector<TensorCheck> tensors;

  double max_rel_error() const;
  bool passed(double tol = 1e-4) const { return max_rel_error() <= tol; }
};

/// Central differences of `loss` with respect to every entry of `params`,
/// compared tensor by tensor against `analytic`.
std::vector<TensorCheck> finite_difference_check(const std::vector<Mat*>& params,
                                                 const std::vector<const Mat*>& analytic,
                                                 const std::vector<std::string>& names,
                                                 const std::function<double()>& loss,
                                                 double step = 1e-5);

/// Cooperation classifier, M = 3, L = 4, d = 8, noise frozen.
GradCheckReport coop_gradcheck(std::uint64_t seed);

/// Full PPO loss on a 4-transition buffer with up to 3 pedestrians.
GradCheckReport ppo_gradcheck(std::uint64_t seed);

}  // namespace hnav

#endif  // HNAV_GRADCHECK_HPP
