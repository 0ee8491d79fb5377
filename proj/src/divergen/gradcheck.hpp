#pragma once

#include <functional>
#include <string>
#include <vector>

#include "divergen/tape.hpp"

namespace divergen {

/// Builds a scalar expression from leaves already registered on the tape.
/// The same builder is used for the analytic route (tape backward) and the
/// central-difference route, so the two only share the forward definition.
using ScalarBuilder =
    std::function<NodeId(Tape&, const std::vector<NodeId>&)>;

struct GradCheckReport {
  bool pass = false;
  double max_rel_err = 0.0;
  // Coordinates of the worst disagreement.
  std::size_t worst_param = 0;
  std::size_t worst_index = 0;
  double analytic = 0.0;
  double numeric = 0.0;
  std::size_t coords_checked = 0;

  std::string summary() const;
};

/// Central finite differences (f(x+h) - f(x-h)) / 2h against the tape
/// gradient, per coordinate of every parameter. Relative error uses
/// |a - n| / max(|a| + |n|, 1e-3); the floor keeps noise on near-zero
/// coordinates from dominating the report.
GradCheckReport grad_check(const ScalarBuilder& f,
                           const std::vector<Tensor>& params, double h,
                           double tol);

}  // namespace divergen
