#include "ulcnn/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace ulcnn {

GradCheckReport grad_check(const std::function<double()>& loss,
                           const std::function<void()>& compute_grads,
                           const std::vector<ParamRef>& tensors,
                           double step, double tolerance) {
  compute_grads();

  // Snapshot analytic gradients before finite differencing perturbs anything.
  std::vector<std::vector<double>> analytic(tensors.size());
  for (size_t t = 0; t < tensors.size(); ++t) {
    const RealTensor& g = *tensors[t].grad;
    analytic[t].assign(g.data(), g.data() + g.size());
  }

  GradCheckReport report;
  for (size_t t = 0; t < tensors.size(); ++t) {
    GradCheckItem item;
    item.name = tensors[t].name;
    RealTensor& value = *tensors[t].value;

    bool finite = true;
    for (double a : analytic[t]) {
      if (!std::isfinite(a)) finite = false;
    }
    if (!finite) {
      item.pass = false;
      item.max_rel_err = std::numeric_limits<double>::infinity();
      item.note = "non-finite analytic gradient";
    } else {
      item.pass = true;
      for (int64_t i = 0; i < value.size(); ++i) {
        const double saved = value[i];
        value[i] = saved + step;
        const double lp = loss();
        value[i] = saved - step;
        const double lm = loss();
        value[i] = saved;
        const double fd = (lp - lm) / (2.0 * step);
        const double a = analytic[t][static_cast<size_t>(i)];
        const double denom = std::max({std::fabs(a), std::fabs(fd), 0.01});
        const double rel = std::fabs(a - fd) / denom;
        if (rel > item.max_rel_err) item.max_rel_err = rel;
      }
      item.pass = item.max_rel_err <= tolerance;
    }

    if (!item.pass) report.pass = false;
    if (item.max_rel_err > report.worst_rel_err || report.worst_name.empty()) {
      report.worst_rel_err = item.max_rel_err;
      report.worst_name = item.name;
    }
    report.items.push_back(std::move(item));
  }
  return report;
}

}  // namespace ulcnn
