#include "divergen/gradcheck.hpp"

#include <cmath>
#include <sstream>

#include "divergen/errors.hpp"

namespace divergen {

namespace {

double eval(const ScalarBuilder& f, const std::vector<Tensor>& params) {
  Tape tape;
  std::vector<NodeId> leaves;
  leaves.reserve(params.size());
  for (const Tensor& p : params) {
    leaves.push_back(tape.leaf(p));
  }
  NodeId root = f(tape, leaves);
  if (tape.value(root).size() != 1) {
    throw ContractError("grad_check requires a scalar function");
  }
  return tape.value(root)[0];
}

}  // namespace

std::string GradCheckReport::summary() const {
  std::ostringstream os;
  os << (pass ? "pass" : "FAIL") << " max_rel_err=" << max_rel_err << " at param "
     << worst_param << "[" << worst_index << "] analytic=" << analytic
     << " numeric=" << numeric << " (" << coords_checked << " coords)";
  return os.str();
}

GradCheckReport grad_check(const ScalarBuilder& f,
                           const std::vector<Tensor>& params, double h,
                           double tol) {
  // Analytic route.
  Tape tape;
  std::vector<NodeId> leaves;
  leaves.reserve(params.size());
  for (const Tensor& p : params) {
    leaves.push_back(tape.leaf(p));
  }
  NodeId root = f(tape, leaves);
  if (tape.value(root).size() != 1) {
    throw ContractError("grad_check requires a scalar function");
  }
  tape.backward(root);

  GradCheckReport report;
  std::vector<Tensor> work = params;
  for (std::size_t p = 0; p < params.size(); ++p) {
    const Tensor& analytic = tape.grad(leaves[p]);
    for (std::size_t i = 0; i < work[p].size(); ++i) {
      double saved = work[p][i];
      work[p][i] = saved + h;
      double up = eval(f, work);
      work[p][i] = saved - h;
      double down = eval(f, work);
      work[p][i] = saved;
      double numeric = (up - down) / (2.0 * h);
      double a = analytic[i];
      double rel = std::abs(a - numeric) /
                   std::max(std::abs(a) + std::abs(numeric), 1e-3);
      ++report.coords_checked;
      if (rel >= report.max_rel_err) {
        report.max_rel_err = rel;
        report.worst_param = p;
        report.worst_index = i;
        report.analytic = a;
        report.numeric = numeric;
      }
    }
  }
  report.pass = report.max_rel_err < tol;
  return report;
}

}  // namespace divergen
